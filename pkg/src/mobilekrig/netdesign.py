"""Monitoring-network design: expected kriging error for mobile vs fixed sensors.

The expected mean squared prediction error of the conditional-Gaussian
predictor depends only on sensor locations and covariance parameters, so
candidate networks are scored by the closed form

    sigma2 + tau2 - mean_i( k_i' (K + tau2 I)^{ -1} k_i )

without simulating any data.  Mobile networks are car routes drawn from an
archive and overlaid on one nominal afternoon; fixed networks are segments
reporting on a regular clock.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .covariance import CovParams, PointSet, cov_matrix, cross_cov_matrix
from .features import fit_pca, fit_standardization, local_hour, segment_score_table
from .ingest import epoch_seconds, project
from .vecchia import _chol_with_jitter

NETWORK_KINDS = ("MOBILE", "FIXED")
DEFAULT_SAMPLING_PERIOD_S = 15.0
DEFAULT_WINDOW_HOURS = (13.0, 15.5)
DEFAULT_FORECAST_HOUR = 16.0
DEFAULT_INTERP_HOUR = 14.25
DEFAULT_COND_CAP = 2000


@dataclass
class NetworkScenario:
    kind: str
    count: int
    sampling_period_s: float = DEFAULT_SAMPLING_PERIOD_S
    window_hours: tuple = DEFAULT_WINDOW_HOURS
    forecast_hour: float = DEFAULT_FORECAST_HOUR
    interp_hour: float = DEFAULT_INTERP_HOUR
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NETWORK_KINDS:
            raise ValueError(f"kind must be one of {NETWORK_KINDS}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        lo, hi = self.window_hours
        if not lo < hi:
            raise ValueError("window start must precede end")
        if self.forecast_hour < hi:
            raise ValueError("forecast target must not precede the window end")
        if not lo <= self.interp_hour <= hi:
            raise ValueError("interpolation target must fall inside the window")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


def _local_sod(ts: pd.Series, tz_offset_hours: float) -> np.ndarray:
    """Local seconds of day."""
    return (epoch_seconds(ts) + tz_offset_hours * 3600.0) % 86400.0


def split_days(obs: pd.DataFrame, tz_offset_hours: float) -> list:
    """Per-local-day observation frames, in chronological order."""
    shifted = obs["timestamp"] + pd.Timedelta(hours=tz_offset_hours)
    days = shifted.dt.floor("D")
    return [obs.loc[days == d].reset_index(drop=True) for d in days.unique()]


def _qualifies(day: pd.DataFrame, window: tuple, tz_offset_hours: float,
               bin_minutes: float = 30.0) -> bool:
    """A day qualifies when every half-hour bin of the service window has data."""
    lo, hi = window
    sod = _local_sod(day["timestamp"], tz_offset_hours) / 3600.0
    edges = np.arange(lo, hi + 1e-9, bin_minutes / 60.0)
    counts, _ = np.histogram(sod, bins=edges)
    return bool(np.all(counts > 0))


def _resample_period(day: pd.DataFrame, period_s: float) -> pd.DataFrame:
    """First observation of each aligned period bin."""
    bins = np.floor(epoch_seconds(day["timestamp"]) / period_s).astype(np.int64)
    keep = np.zeros(len(day), dtype=bool)
    keep[np.unique(bins, return_index=True)[1]] = True
    return day.loc[keep]


def sample_routes(archive: list, c: int, seed: int,
                  sampling_period_s: float = DEFAULT_SAMPLING_PERIOD_S,
                  service_window: tuple = (13.0, 16.0),
                  tz_offset_hours: float = -8.0,
                  nominal_date: str | None = None) -> pd.DataFrame:
    """Overlay c archive day-routes on one nominal afternoon.

    Days qualify when their observations cover the whole service window;
    draws are with replacement from the qualifying days.  Each drawn route is
    clipped to the window, thinned to the sampling period, re-stamped onto
    the nominal date (preserving local time of day) and given a fresh car id.
    """
    lo, hi = service_window
    qual = [d for d in archive if len(d) and _qualifies(d, service_window, tz_offset_hours)]
    if not qual:
        raise ValueError("no archive day covers the service window")
    if nominal_date is None:
        nominal_date = str((qual[0]["timestamp"].iloc[0]
                            + pd.Timedelta(hours=tz_offset_hours)).date())
    midnight_epoch = (pd.Timestamp(nominal_date, tz="UTC")
                      - pd.Timedelta(hours=tz_offset_hours)).value / 1e9
    gen = _rng(seed, 10)
    picks = gen.integers(0, len(qual), size=c)
    parts = []
    for j, pick in enumerate(picks):
        day = qual[pick]
        sod = _local_sod(day["timestamp"], tz_offset_hours)
        day = day.loc[(sod >= lo * 3600.0) & (sod <= hi * 3600.0)]
        day = _resample_period(day, sampling_period_s).copy()
        sod = _local_sod(day["timestamp"], tz_offset_hours)
        new_epoch = midnight_epoch + sod
        day["timestamp"] = pd.to_datetime((new_epoch * 1e9).astype(np.int64), utc=True)
        day["car_id"] = f"route{j:03d}"
        parts.append(day)
    out = pd.concat(parts, ignore_index=True)
    return out.sort_values(["timestamp", "car_id"], kind="mergesort").reset_index(drop=True)


def sample_fixed_sites(segments: pd.DataFrame, m_sites: int, seed: int,
                       sampling_period_s: float = DEFAULT_SAMPLING_PERIOD_S,
                       window_hours: tuple = DEFAULT_WINDOW_HOURS,
                       tz_offset_hours: float = -8.0,
                       nominal_date: str = "2026-03-02",
                       origin: tuple | None = None) -> pd.DataFrame:
    """m fixed segments each reporting once per period across the window."""
    if m_sites > len(segments):
        raise ValueError(f"m_sites={m_sites} exceeds {len(segments)} segments")
    if origin is None:
        origin = (float(segments["lat"].mean()), float(segments["lon"].mean()))
    gen = _rng(seed, 11)
    rows = segments.iloc[np.sort(gen.choice(len(segments), size=m_sites, replace=False))]
    east, north = project(rows["lat"].to_numpy(), rows["lon"].to_numpy(), origin)
    lo, hi = window_hours
    midnight_epoch = (pd.Timestamp(nominal_date, tz="UTC")
                      - pd.Timedelta(hours=tz_offset_hours)).value / 1e9
    sod = np.arange(lo * 3600.0, hi * 3600.0, sampling_period_s)
    n_sites, n_t = len(rows), sod.size
    epoch = midnight_epoch + np.tile(sod, n_sites)
    return pd.DataFrame({
        "car_id": np.repeat([f"site{i:03d}" for i in range(n_sites)], n_t),
        "timestamp": pd.to_datetime((epoch * 1e9).astype(np.int64), utc=True),
        "segment_id": np.repeat(rows["segment_id"].to_numpy(), n_t),
        "east_km": np.repeat(east, n_t), "north_km": np.repeat(north, n_t),
        "log_no2": np.nan, "block_seconds": float(sampling_period_s),
    }).sort_values(["timestamp", "car_id"], kind="mergesort").reset_index(drop=True)


def _scaled_dist2(params: CovParams, a: PointSet, b: PointSet) -> np.ndarray:
    """Kernel-argument distances used to rank conditioning points."""
    d = a.coords[:, None, :] - b.coords[None, :, :]
    q = (d[..., 0] ** 2 + d[..., 1] ** 2) / params.theta_s ** 2
    if params.kind in ("st", "stx"):
        q = q + (a.t[:, None] - b.t[None, :]) ** 2 / params.theta_t ** 2
    if params.kind == "stx" and a.x is not None:
        dx = a.x[:, None, :] - b.x[None, :, :]
        q = q + np.sum(dx * dx, axis=-1) / params.theta_x ** 2
    return q


def expected_mspe(params: CovParams, conditioning: PointSet, targets: PointSet,
                  cap: int = DEFAULT_COND_CAP) -> float:
    """Closed-form average predictive variance of kriging at the targets.

    When the network exceeds `cap` points, conditioning is capped at the cap
    points nearest (in kernel distance) to the target batch, with a warning.
    """
    if len(conditioning) == 0:
        raise ValueError("conditioning set is empty")
    if len(targets) == 0:
        raise ValueError("need at least one target")
    if len(conditioning) > cap:
        q = _scaled_dist2(params, targets, conditioning).min(axis=0)
        keep = np.sort(np.argpartition(q, cap - 1)[:cap])
        warnings.warn(f"conditioning capped at {cap} of {len(conditioning)} points",
                      RuntimeWarning, stacklevel=2)
        conditioning = conditioning.subset(keep)
    sig22 = cov_matrix(params, conditioning, add_nugget=True)
    chol = _chol_with_jitter(sig22, 0)
    sig12 = cross_cov_matrix(params, targets, conditioning)
    alpha = np.linalg.solve(chol, sig12.T)
    quad = np.sum(alpha * alpha, axis=0)
    return float(params.sigma2 + params.tau2 - np.mean(quad))


def _points_at_hours(params: CovParams, segments: pd.DataFrame, seg_ids: np.ndarray,
                     hour: float, origin: tuple, seg_scores) -> PointSet:
    seg = segments.set_index("segment_id")
    lat = seg.loc[seg_ids, "lat"].to_numpy()
    lon = seg.loc[seg_ids, "lon"].to_numpy()
    east, north = project(lat, lon, origin)
    x = None
    if seg_scores is not None:
        x = np.ascontiguousarray(seg_scores.loc[seg_ids].to_numpy())
    return PointSet(coords=np.column_stack([east, north]),
                    t=np.full(len(seg_ids), hour, dtype=float), x=x)


def _obs_points(params: CovParams, obs: pd.DataFrame, tz_offset_hours: float,
                seg_scores) -> PointSet:
    t = _local_sod(obs["timestamp"], tz_offset_hours) / 3600.0
    x = None
    if seg_scores is not None:
        x = np.ascontiguousarray(seg_scores.loc[obs["segment_id"].to_numpy()].to_numpy())
    return PointSet(coords=np.ascontiguousarray(obs[["east_km", "north_km"]].to_numpy()),
                    t=np.ascontiguousarray(t), x=x)


def compare_networks(params: CovParams, archive: list, segments: pd.DataFrame,
                     counts, reps: int = 30, seed: int = 0,
                     seg_scores: pd.DataFrame | None = None,
                     n_targets: int = 2000, tz_offset_hours: float = -8.0,
                     nominal_date: str = "2026-03-02",
                     scenario: NetworkScenario | None = None,
                     cap: int = DEFAULT_COND_CAP) -> pd.DataFrame:
    """Expected MSPE per (kind, count, rep) for forecast and interpolation targets.

    Targets are a fixed uniform subsample of segments evaluated at the
    forecast hour (after the window) and the interpolation hour (inside it).
    """
    base = scenario or NetworkScenario(kind="MOBILE", count=1)
    origin = (float(segments["lat"].mean()), float(segments["lon"].mean()))
    if seg_scores is None and params.kind in ("stx", "xonly"):
        std = fit_standardization(segments)
        basis = fit_pca((segments[std.columns].to_numpy() - std.means) / std.sds)
        seg_scores = segment_score_table(segments, std, basis)
    gen = _rng(seed, 12)
    n_t = min(n_targets, len(segments))
    tgt_ids = segments["segment_id"].to_numpy()[
        np.sort(gen.choice(len(segments), size=n_t, replace=False))]
    tg_fc = _points_at_hours(params, segments, tgt_ids, base.forecast_hour,
                             origin, seg_scores)
    tg_in = _points_at_hours(params, segments, tgt_ids, base.interp_hour,
                             origin, seg_scores)
    lo, hi = base.window_hours
    rows = []
    for count in counts:
        for rep in range(reps):
            for kind_code, kind in enumerate(NETWORK_KINDS):
                child = int(np.random.SeedSequence(
                    [seed, kind_code, int(count), rep]).generate_state(1)[0])
                if kind == "MOBILE":
                    net = sample_routes(archive, count, child,
                                        sampling_period_s=base.sampling_period_s,
                                        service_window=(lo, 16.0),
                                        tz_offset_hours=tz_offset_hours,
                                        nominal_date=nominal_date)
                    sod = _local_sod(net["timestamp"], tz_offset_hours) / 3600.0
                    net = net.loc[(sod >= lo) & (sod <= hi)]
                else:
                    net = sample_fixed_sites(segments, count, child,
                                             sampling_period_s=base.sampling_period_s,
                                             window_hours=(lo, hi),
                                             tz_offset_hours=tz_offset_hours,
                                             nominal_date=nominal_date, origin=origin)
                pts = _obs_points(params, net, tz_offset_hours, seg_scores)
                rows.append({
                    "kind": kind, "count": int(count), "rep": rep,
                    "mspe_forecast": expected_mspe(params, pts, tg_fc, cap=cap),
                    "mspe_interp": expected_mspe(params, pts, tg_in, cap=cap)})
    return pd.DataFrame(rows, columns=["kind", "count", "rep",
                                       "mspe_forecast", "mspe_interp"])


def summarize_networks(table: pd.DataFrame) -> pd.DataFrame:
    """Mean and 95% band of MSPE per (kind, count)."""
    out = []
    for (kind, count), grp in table.groupby(["kind", "count"], sort=True):
        row = {"kind": kind, "count": count}
        for col in ("mspe_forecast", "mspe_interp"):
            vals = grp[col].to_numpy()
            row[f"{col}_mean"] = float(vals.mean())
            row[f"{col}_lo"] = float(np.percentile(vals, 2.5))
            row[f"{col}_hi"] = float(np.percentile(vals, 97.5))
        out.append(row)
    return pd.DataFrame(out)
