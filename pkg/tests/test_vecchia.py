"""Conditioning sets and composite likelihood against dense oracles."""

import numpy as np
import pytest
from scipy import stats

from mobilekrig.covariance import CovParams, PointSet, cov_matrix
from mobilekrig.vecchia import (CompositeWorkspace, ConditioningScheme,
                                ResidualSeries, build_conditioning_sets,
                                composite_loglik, conditional_loglik_term)

from conftest import random_points

ALL_KINDS = ("xonly", "s", "st", "stx")


def make_series(n, seed, with_x=False, t_span=6.0):
    pts = random_points(n, seed=seed, with_x=with_x, t_span=t_span)
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 1], dtype=np.uint64)))
    return ResidualSeries(pts, gen.standard_normal(n))


def minute_series(minutes, resid=None):
    t = np.asarray(minutes, dtype=float) / 60.0
    n = len(t)
    pts = PointSet(np.zeros((n, 2)), t)
    r = np.zeros(n) if resid is None else np.asarray(resid, dtype=float)
    return ResidualSeries(pts, r)


def params_for(kind):
    return CovParams(kind=kind, sigma2=0.9, tau2=0.2, theta_s=1.1, theta_t=1.7,
                     theta_x=1.3)


class TestSchemeValidation:
    def test_field_errors(self):
        with pytest.raises(ValueError, match="mode"):
            ConditioningScheme(mode="NEAREST")
        with pytest.raises(ValueError, match="lag_l"):
            ConditioningScheme(lag_l=-1.0)
        with pytest.raises(ValueError, match="width_m"):
            ConditioningScheme(width_m=0.0)
        with pytest.raises(ValueError, match="max_size"):
            ConditioningScheme(max_size=0)
        with pytest.raises(ValueError, match="seed"):
            ConditioningScheme(seed=-1)

    def test_dict_roundtrip(self):
        s = ConditioningScheme(lag_l=5.0, width_m=30.0, max_size=40, seed=9,
                               mode="K_NEAREST_TIME", closed_left=True)
        assert ConditioningScheme.from_dict(s.to_dict()) == s


class TestSeriesValidation:
    def test_misaligned(self):
        pts = PointSet(np.zeros((3, 2)), np.arange(3.0))
        with pytest.raises(ValueError, match="aligned"):
            ResidualSeries(pts, np.zeros(2))

    def test_unsorted_time(self):
        pts = PointSet(np.zeros((3, 2)), np.array([0.0, 2.0, 1.0]))
        with pytest.raises(ValueError, match="ordered"):
            ResidualSeries(pts, np.zeros(3))

    def test_nonfinite_residual(self):
        pts = PointSet(np.zeros((2, 2)), np.arange(2.0))
        with pytest.raises(ValueError, match="finite"):
            ResidualSeries(pts, np.array([0.0, np.nan]))


class TestConditioningSets:
    def test_first_observation_empty(self):
        series = minute_series([0, 1, 2])
        sets = build_conditioning_sets(series, ConditioningScheme())
        assert sets[0].size == 0

    def test_window_enumeration(self):
        # minutes 0..10, lag 2, width 3: for the point at t=10 the open
        # window (2, 5) admits exactly the points at minutes 6 and 7
        series = minute_series(range(11))
        sets = build_conditioning_sets(series, ConditioningScheme(lag_l=2.0, width_m=3.0))
        assert list(sets[10]) == [6, 7]

    def test_boundaries_are_open(self):
        series = minute_series([0.0, 2.0, 5.0, 7.0])
        sets = build_conditioning_sets(series, ConditioningScheme(lag_l=2.0, width_m=3.0))
        # for t=7: gaps are 7, 5, 2 -> gap 5 and gap 2 both on the boundary
        assert list(sets[3]) == []

    def test_closed_left_admits_simultaneous(self):
        series = minute_series([0.0, 0.0, 1.0])
        open_sets = build_conditioning_sets(series, ConditioningScheme(lag_l=0.0, width_m=5.0))
        closed_sets = build_conditioning_sets(
            series, ConditioningScheme(lag_l=0.0, width_m=5.0, closed_left=True))
        assert list(open_sets[1]) == []
        assert list(closed_sets[1]) == [0]
        assert list(closed_sets[2]) == [0, 1]

    def test_subsample_capped_and_reproducible(self):
        # 1 Hz stream: 300 seconds, 10-minute window -> all predecessors
        # are candidates, capped at max_size
        series = minute_series(np.arange(300) / 60.0)
        scheme = ConditioningScheme(lag_l=0.0, width_m=10.0, max_size=100, seed=12)
        a = build_conditioning_sets(series, scheme)
        b = build_conditioning_sets(series, scheme)
        assert len(a[299]) == 100
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        c = build_conditioning_sets(series, ConditioningScheme(
            lag_l=0.0, width_m=10.0, max_size=100, seed=13))
        assert any(not np.array_equal(x, y) for x, y in zip(a, c))

    def test_subsample_sorted_and_within_window(self):
        series = minute_series(np.arange(200) / 2.0)
        scheme = ConditioningScheme(lag_l=5.0, width_m=50.0, max_size=20, seed=3)
        sets = build_conditioning_sets(series, scheme)
        t_min = series.points.t * 60.0
        for i, idx in enumerate(sets):
            assert np.all(np.diff(idx) > 0)
            if idx.size:
                gaps = t_min[i] - t_min[idx]
                assert np.all((gaps > 5.0) & (gaps < 55.0))

    def test_k_nearest_time_mode(self):
        series = minute_series([0, 1, 2, 50, 300])
        scheme = ConditioningScheme(max_size=2, mode="K_NEAREST_TIME")
        sets = build_conditioning_sets(series, scheme)
        assert list(sets[4]) == [2, 3]
        assert list(sets[2]) == [0, 1]


class TestConditionalTerm:
    def test_empty_set_standard_normal_at_zero(self):
        series = minute_series([0.0], resid=[0.0])
        p = CovParams(kind="st", sigma2=0.6, tau2=0.4)
        got = conditional_loglik_term(p, series, 0, np.array([], dtype=np.int64))
        assert got == pytest.approx(-0.5 * np.log(2 * np.pi), rel=1e-14)

    def test_empty_set_matches_scipy_norm(self):
        series = minute_series([0.0], resid=[1.7])
        p = CovParams(kind="st", sigma2=0.8, tau2=0.3)
        got = conditional_loglik_term(p, series, 0, np.array([], dtype=np.int64))
        assert got == pytest.approx(stats.norm.logpdf(1.7, scale=np.sqrt(1.1)), rel=1e-12)

    def test_five_points_vs_explicit_inverse(self):
        # direct conditional-normal formula with an explicit 4x4 inverse
        series = make_series(5, seed=21, with_x=True)
        idx = np.arange(4)
        for kind in ALL_KINDS:
            p = params_for(kind)
            got = conditional_loglik_term(p, series, 4, idx)
            full = cov_matrix(p, series.points, add_nugget=True)
            s22 = full[:4, :4]
            s12 = full[4, :4]
            mean = s12 @ np.linalg.inv(s22) @ series.resid[:4]
            var = full[4, 4] - s12 @ np.linalg.inv(s22) @ s12
            want = stats.norm.logpdf(series.resid[4], loc=mean, scale=np.sqrt(var))
            assert got == pytest.approx(want, abs=1e-10)

    def test_duplicated_point_degenerate_warns(self):
        pts = PointSet(np.zeros((2, 2)), np.zeros(2))
        series = ResidualSeries(pts, np.array([0.4, 0.4]))
        p = CovParams(kind="st", sigma2=1.0, tau2=0.0)
        with pytest.warns(RuntimeWarning, match="degenerate"):
            got = conditional_loglik_term(p, series, 1, np.array([0]))
        assert np.isfinite(got)

    def test_non_earlier_index_rejected(self):
        series = make_series(4, seed=2)
        with pytest.raises(ValueError):
            conditional_loglik_term(params_for("st"), series, 1, np.array([2]))


def full_sets(n):
    return [np.arange(i) for i in range(n)]


class TestCompositeLoglik:
    def test_equals_dense_loglik_all_kinds(self):
        # complete conditioning sets recover the exact joint density
        series = make_series(50, seed=31, with_x=True)
        for kind in ALL_KINDS:
            p = params_for(kind)
            got = composite_loglik(p, series, full_sets(50))
            dense = stats.multivariate_normal.logpdf(
                series.resid, mean=np.zeros(50),
                cov=cov_matrix(p, series.points, add_nugget=True))
            assert got == pytest.approx(dense, rel=1e-8)

    def test_single_observation_is_marginal(self):
        series = minute_series([0.0], resid=[0.9])
        p = CovParams(kind="s", sigma2=1.0, tau2=0.5)
        got = composite_loglik(p, series, full_sets(1))
        assert got == pytest.approx(stats.norm.logpdf(0.9, scale=np.sqrt(1.5)), rel=1e-12)

    def test_tiny_ranges_give_independence(self):
        series = make_series(30, seed=35)
        p = CovParams(kind="st", sigma2=0.7, tau2=0.3, theta_s=1e-9, theta_t=1e-9)
        got = composite_loglik(p, series, full_sets(30))
        want = stats.norm.logpdf(series.resid, scale=1.0).sum()
        assert got == pytest.approx(want, rel=1e-10)

    def test_worker_counts_bit_identical(self):
        series = make_series(120, seed=40, with_x=True)
        scheme = ConditioningScheme(lag_l=0.0, width_m=90.0, max_size=12, seed=2)
        sets = build_conditioning_sets(series, scheme)
        p = params_for("stx")
        vals = {composite_loglik(p, series, sets, workers=w) for w in (1, 4, 8)}
        assert len(vals) == 1

    def test_workspace_matches_scalar_terms(self):
        # batched evaluation must agree with the per-term reference path
        series = make_series(60, seed=44, with_x=True)
        scheme = ConditioningScheme(lag_l=0.0, width_m=120.0, max_size=8, seed=6)
        sets = build_conditioning_sets(series, scheme)
        for kind in ALL_KINDS:
            p = params_for(kind)
            batched = CompositeWorkspace(series, sets).loglik(p)
            scalar = sum(conditional_loglik_term(p, series, i, idx)
                         for i, idx in enumerate(sets))
            assert batched == pytest.approx(scalar, rel=1e-12)

    def test_workspace_reusable_across_params(self):
        series = make_series(40, seed=47)
        sets = build_conditioning_sets(series, ConditioningScheme(width_m=120.0))
        ws = CompositeWorkspace(series, sets)
        p1 = CovParams(kind="st", sigma2=1.0, tau2=0.1, theta_s=1.0, theta_t=1.0)
        p2 = CovParams(kind="st", sigma2=2.0, tau2=0.2, theta_s=0.5, theta_t=2.0)
        assert ws.loglik(p1) != ws.loglik(p2)
        assert ws.loglik(p1) == composite_loglik(p1, series, sets)
