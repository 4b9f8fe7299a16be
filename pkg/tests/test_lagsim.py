"""Lagged autoregression study: series generator, lag fits and the MSE table."""

import numpy as np
import pytest

from mobilekrig.lagsim import (BURN_IN, LagSimConfig, fit_lag, model_name,
                               predict_lag, relative_mse_table, simulate_series)


def manual_recursion(theta, z):
    """Reference loop for the simulated process, zero initial state."""
    y = np.zeros(z.size)
    for t in range(z.size):
        prev = y[t - 1] if t >= 1 else 0.0
        z1 = z[t - 1] if t >= 1 else 0.0
        z2 = z[t - 2] if t >= 2 else 0.0
        y[t] = 0.9 * prev + z[t] + theta * z1 + theta * z2
    return y


class TestSimulateSeries:
    def test_matches_reference_recursion(self):
        gen = np.random.Generator(np.random.Philox(key=np.array([70, 0], dtype=np.uint64)))
        z = gen.standard_normal(40 + BURN_IN)
        for theta in (0.0, 0.9, 0.4):
            got = simulate_series(theta, 40, seed=0, z=z)
            assert got == pytest.approx(manual_recursion(theta, z)[BURN_IN:], rel=1e-12)

    def test_burn_in_discarded(self):
        gen = np.random.Generator(np.random.Philox(key=np.array([71, 0], dtype=np.uint64)))
        z = gen.standard_normal(30 + BURN_IN)
        got = simulate_series(0.9, 30, seed=0, z=z)
        assert got.shape == (30,)
        assert got[0] == pytest.approx(manual_recursion(0.9, z)[BURN_IN], rel=1e-12)

    def test_seed_controls_draws(self):
        a = simulate_series(0.0, 50, seed=1)
        assert np.array_equal(a, simulate_series(0.0, 50, seed=1))
        assert not np.array_equal(a, simulate_series(0.0, 50, seed=2))

    def test_ar1_variance_near_theory(self):
        y = simulate_series(0.0, 20000, seed=3)
        assert y.var() == pytest.approx(1.0 / (1.0 - 0.81), rel=0.1)

    def test_bad_inputs_rejected(self):
        with pytest.raises(ValueError, match="n must be"):
            simulate_series(0.0, 0, seed=0)
        with pytest.raises(ValueError, match="length"):
            simulate_series(0.0, 10, seed=0, z=np.zeros(10))


class TestFitLag:
    def test_matches_least_squares(self):
        gen = np.random.Generator(np.random.Philox(key=np.array([72, 0], dtype=np.uint64)))
        y = gen.standard_normal(300).cumsum() * 0.1 + gen.standard_normal(300)
        for l in (1, 2, 7):
            cur, lag = y[l:], y[:-l]
            want = np.linalg.lstsq(lag[:, None], cur, rcond=None)[0][0]
            assert fit_lag(y, l) == pytest.approx(want, rel=1e-12)
            x = np.column_stack([np.ones(cur.size), lag])
            want_b = np.linalg.lstsq(x, cur, rcond=None)[0][1]
            assert fit_lag(y, l, intercept=True) == pytest.approx(want_b, rel=1e-10)

    def test_ar1_slopes_track_powers_of_phi(self):
        y = simulate_series(0.0, 60000, seed=5)
        assert fit_lag(y, 1) == pytest.approx(0.9, abs=0.01)
        assert fit_lag(y, 2) == pytest.approx(0.81, abs=0.02)

    def test_short_series_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            fit_lag(np.arange(5.0), 4)

    def test_degenerate_regressor_rejected(self):
        with pytest.raises(ZeroDivisionError, match="identically zero"):
            fit_lag(np.array([0.0, 0.0, 0.0, 1.0]), 1)
        with pytest.raises(ZeroDivisionError, match="zero variance"):
            fit_lag(np.ones(10), 2, intercept=True)


class TestPredictLag:
    def test_power_rule(self):
        y = np.array([2.0, -4.0])
        assert predict_lag(0.5, 1, 3, y) == pytest.approx(0.125 * y)
        assert predict_lag(0.25, 2, 1, y) == pytest.approx(0.5 * y)
        assert predict_lag(-0.5, 1, 2, y) == pytest.approx(0.25 * y)

    def test_negative_base_fractional_power_rejected(self):
        with pytest.raises(ValueError, match="fractional"):
            predict_lag(-0.5, 2, 1, np.ones(3))

    def test_bad_lags_rejected(self):
        with pytest.raises(ValueError, match=">= 1"):
            predict_lag(0.5, 0, 1, np.ones(2))
        with pytest.raises(ValueError, match=">= 1"):
            predict_lag(0.5, 1, 0, np.ones(2))


class TestConfig:
    def test_baseline_lag_required(self):
        with pytest.raises(ValueError, match="lag-1 baseline"):
            LagSimConfig(fit_lags=(2, 5))

    def test_positive_sizes_required(self):
        with pytest.raises(ValueError, match="positive"):
            LagSimConfig(reps=0)

    def test_nonpositive_lags_rejected(self):
        with pytest.raises(ValueError, match=">= 1"):
            LagSimConfig(horizons=(0, 5))


class TestModelName:
    def test_known_and_generic_names(self):
        assert model_name(0.0) == "ar1"
        assert model_name(0.9) == "arma12"
        assert model_name(0.5) == "arma12_0.5"


class TestRelativeMseTable:
    small = LagSimConfig(n_train=400, n_test=400, reps=3,
                         fit_lags=(1, 2, 5), horizons=(1, 5), seed=8)

    def test_layout_and_baseline_column(self):
        table = relative_mse_table(self.small)
        assert list(table.columns) == ["model", "h", "l", "rel_mse"]
        assert len(table) == 2 * 2 * 3
        assert set(table["model"]) == {"ar1", "arma12"}
        ones = table.loc[table["l"] == 1, "rel_mse"]
        assert np.all(ones.to_numpy() == 1.0)
        assert np.all(np.isfinite(table["rel_mse"])) and np.all(table["rel_mse"] > 0)

    def test_ar1_indifferent_to_fitting_lag(self):
        table = relative_mse_table(self.small)
        ar1 = table.loc[table["model"] == "ar1", "rel_mse"]
        assert ar1.to_numpy() == pytest.approx(1.0, abs=0.2)

    def test_deterministic(self):
        a = relative_mse_table(self.small)
        b = relative_mse_table(self.small)
        assert a.equals(b)
