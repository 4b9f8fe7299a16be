"""Synthetic streets, routes and pollution fields.

Everything here exists so the pipeline and the design experiments can run
without restricted data: a rectangular street grid with smooth synthetic
covariates, random-walk drives over it, exact Gaussian-process draws for
small n, and a cheap random-Fourier field for large demo datasets.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .covariance import CovParams, PointSet, cov_matrix
from .ingest import (COVARIATE_COLUMNS, N_COVARIATES, project, segmentize_centerlines,
                     unproject)

DEFAULT_ORIGIN = (37.80, -122.27)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


def make_street_grid(n_ew: int = 5, n_ns: int = 5, extent_km: float = 1.2,
                     origin: tuple = DEFAULT_ORIGIN) -> pd.DataFrame:
    """Centerline table for a rectangular grid of straight streets."""
    rows = []
    way = 0
    for i in range(n_ew):
        north = extent_km * i / max(n_ew - 1, 1)
        for v, east in enumerate((0.0, extent_km)):
            lat, lon = unproject(east, north, origin)
            rows.append({"way_id": way, "vertex_index": v, "lat": lat, "lon": lon})
        way += 1
    for j in range(n_ns):
        east = extent_km * j / max(n_ns - 1, 1)
        for v, north in enumerate((0.0, extent_km)):
            lat, lon = unproject(east, north, origin)
            rows.append({"way_id": way, "vertex_index": v, "lat": lat, "lon": lon})
        way += 1
    return pd.DataFrame(rows)


def synth_covariates(segments: pd.DataFrame, seed: int = 0,
                     origin: tuple | None = None) -> pd.DataFrame:
    """Smooth spatial covariates c01..c28 for a segment table.

    Each column is a random plane wave of the planar coordinates plus a small
    rough component, giving full-rank, spatially structured predictors.
    """
    if origin is None:
        origin = (float(segments["lat"].mean()), float(segments["lon"].mean()))
    east, north = project(segments["lat"].to_numpy(), segments["lon"].to_numpy(), origin)
    coords = np.column_stack([east, north])
    gen = _rng(seed, 1)
    out = segments[["segment_id", "lat", "lon"]].copy()
    freqs = gen.normal(scale=2.0, size=(N_COVARIATES, 2))
    phases = gen.uniform(0, 2 * np.pi, size=N_COVARIATES)
    amps = gen.uniform(0.5, 2.0, size=N_COVARIATES)
    rough = gen.normal(scale=0.15, size=(len(segments), N_COVARIATES))
    for k, col in enumerate(COVARIATE_COLUMNS):
        out[col] = amps[k] * np.cos(coords @ freqs[k] + phases[k]) + rough[:, k]
    return out


def make_segment_grid(n_east: int = 10, n_north: int = 10, spacing_km: float = 0.15,
                      origin: tuple = DEFAULT_ORIGIN, seed: int = 0) -> pd.DataFrame:
    """Segment table on a regular grid with synthetic covariates attached."""
    ee, nn = np.meshgrid(np.arange(n_east) * spacing_km, np.arange(n_north) * spacing_km)
    east, north = ee.ravel(), nn.ravel()
    lat, lon = unproject(east, north, origin)
    base = pd.DataFrame({"segment_id": np.arange(east.size, dtype=np.int64),
                         "lat": lat, "lon": lon})
    return synth_covariates(base, seed=seed, origin=origin)


def random_walk_route(segments: pd.DataFrame, n_steps: int, seed: int,
                      origin: tuple | None = None, start: int | None = None,
                      neighbor_km: float = 0.35) -> np.ndarray:
    """Sequence of n_steps segment ids following nearest-neighbor moves."""
    if origin is None:
        origin = (float(segments["lat"].mean()), float(segments["lon"].mean()))
    east, north = project(segments["lat"].to_numpy(), segments["lon"].to_numpy(), origin)
    coords = np.column_stack([east, north])
    tree = cKDTree(coords)
    nbrs = tree.query_ball_point(coords, r=neighbor_km)
    gen = _rng(seed, 2)
    pos = int(gen.integers(0, len(segments))) if start is None else start
    ids = segments["segment_id"].to_numpy()
    path = np.empty(n_steps, dtype=np.int64)
    for s in range(n_steps):
        path[s] = ids[pos]
        choices = [j for j in nbrs[pos] if j != pos]
        pos = int(choices[gen.integers(0, len(choices))]) if choices else pos
    return path


def route_observations(segments: pd.DataFrame, start: pd.Timestamp, car_id: str,
                       duration_minutes: float, step_seconds: float, seed: int,
                       origin: tuple | None = None) -> pd.DataFrame:
    """Observation-shaped rows (no log_no2 yet) for one random drive."""
    if origin is None:
        origin = (float(segments["lat"].mean()), float(segments["lon"].mean()))
    n = int(round(duration_minutes * 60.0 / step_seconds))
    path = random_walk_route(segments, n, seed, origin=origin)
    seg = segments.set_index("segment_id")
    lat = seg.loc[path, "lat"].to_numpy()
    lon = seg.loc[path, "lon"].to_numpy()
    east, north = project(lat, lon, origin)
    times = pd.to_datetime(start, utc=True) + pd.to_timedelta(
        np.arange(n) * step_seconds, unit="s")
    return pd.DataFrame({"car_id": car_id, "timestamp": times, "segment_id": path,
                         "east_km": east, "north_km": north,
                         "log_no2": np.nan, "block_seconds": float(step_seconds)})


def gp_draw(params: CovParams, points: PointSet, seed: int,
            include_nugget: bool = True) -> np.ndarray:
    """Exact zero-mean draw from the model covariance (dense Cholesky)."""
    n = len(points)
    sig = cov_matrix(params, points, add_nugget=False)
    sig[np.diag_indices_from(sig)] += 1e-10
    gen = _rng(seed, 3)
    y = np.linalg.cholesky(sig) @ gen.standard_normal(n)
    if include_nugget and params.tau2 > 0:
        y = y + np.sqrt(params.tau2) * gen.standard_normal(n)
    return y


def fourier_field(coords: np.ndarray, t_hours: np.ndarray, seed: int,
                  amp: float = 0.5, space_scale_km: float = 1.0,
                  time_scale_h: float = 1.0, n_features: int = 64) -> np.ndarray:
    """Cheap stationary space-time field for large synthetic datasets."""
    gen = _rng(seed, 4)
    w = gen.standard_cauchy(size=(n_features, 2)) / space_scale_km
    v = gen.standard_cauchy(size=n_features) / time_scale_h
    phi = gen.uniform(0, 2 * np.pi, size=n_features)
    ang = coords @ w.T + np.outer(t_hours, v) + phi
    return amp * np.sqrt(2.0 / n_features) * np.cos(ang).sum(axis=1)


def build_synth(seed: int = 0, days: int = 2, cars: int = 2,
                drive_hours: float = 3.0, step_seconds: float = 15.0,
                start_local_hour: float = 9.0, tz_offset_hours: float = -8.0,
                first_day: str = "2026-03-02", interval_m: float = 60.0,
                origin: tuple = DEFAULT_ORIGIN, gps_jitter_m: float = 8.0,
                stagger_hours: float = 2.0):
    """Centerlines, per-segment covariates, and raw car samples.

    Returns (centerlines, covariates, samples).  Covariates are keyed by the
    segment ids that segmentizing the returned centerlines produces, so the
    full pipeline can run end to end on these three tables.

    Drive start times stagger across days and cars; without spread over the
    local day the diurnal harmonics in the mean design are degenerate.
    """
    center = make_street_grid(origin=origin)
    seg = segmentize_centerlines(center, interval_m=interval_m)
    seg_cov = synth_covariates(seg, seed=seed, origin=origin)
    cov_only = seg_cov[["segment_id"] + list(COVARIATE_COLUMNS)]
    gen = _rng(seed, 5)
    z = (seg_cov[COVARIATE_COLUMNS].to_numpy() -
         seg_cov[COVARIATE_COLUMNS].to_numpy().mean(0)) / \
        seg_cov[COVARIATE_COLUMNS].to_numpy().std(0, ddof=1)
    mean_w = np.zeros(N_COVARIATES)
    mean_w[:4] = np.array([0.30, -0.20, 0.15, 0.10])
    seg_mean = pd.Series(2.8 + z @ mean_w, index=seg_cov["segment_id"].to_numpy())
    parts = []
    day0 = pd.Timestamp(first_day, tz="UTC")
    for d in range(days):
        for c in range(cars):
            stagger = stagger_hours * ((d * cars + c) % 4)
            start = day0 + pd.Timedelta(days=d) + pd.Timedelta(
                hours=start_local_hour + stagger - tz_offset_hours)
            parts.append(route_observations(
                seg_cov, start, car_id=f"car{chr(65 + c)}",
                duration_minutes=drive_hours * 60.0, step_seconds=step_seconds,
                seed=int(np.random.SeedSequence([seed, 6, d, c]).generate_state(1)[0]),
                origin=origin))
    obs = pd.concat(parts, ignore_index=True)
    t_h = obs["timestamp"].astype("int64").to_numpy() / 1e9 / 3600.0
    t_h = t_h - t_h.min()
    coords = obs[["east_km", "north_km"]].to_numpy()
    field = fourier_field(coords, t_h, seed=seed)
    hour_local = (obs["timestamp"].astype("int64").to_numpy() / 1e9 / 3600.0
                  + tz_offset_hours) % 24.0
    diurnal = 0.25 * np.cos(2 * np.pi * hour_local / 24.0)
    log_no2 = seg_mean.loc[obs["segment_id"]].to_numpy() + diurnal + field \
        + 0.15 * gen.standard_normal(len(obs))
    jit = gps_jitter_m / 1000.0
    east_j = obs["east_km"].to_numpy() + gen.uniform(-jit, jit, len(obs))
    north_j = obs["north_km"].to_numpy() + gen.uniform(-jit, jit, len(obs))
    lat, lon = unproject(east_j, north_j, origin)
    samples = pd.DataFrame({"car_id": obs["car_id"],
                            "timestamp": obs["timestamp"],
                            "lat": lat, "lon": lon,
                            "no2_ppb": np.exp(log_no2)})
    return center, cov_only, samples
