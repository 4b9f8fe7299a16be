"""Raw-sample ingestion: segment geometry, snapping, block medians, projection.

Tabular data flows through pandas DataFrames with fixed schemas:

* samples:      car_id, timestamp, lat, lon, no2_ppb
* centerlines:  way_id, vertex_index, lat, lon
* segments:     segment_id, lat, lon, c01..c28 (covariates optional for
                geometry-only tables)
* observations: car_id, timestamp, segment_id, east_km, north_km, log_no2,
                block_seconds

Timestamps are tz-aware UTC throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

N_COVARIATES = 28
COVARIATE_COLUMNS = [f"c{i:02d}" for i in range(1, N_COVARIATES + 1)]

SAMPLE_COLUMNS = ["car_id", "timestamp", "lat", "lon", "no2_ppb"]
CENTERLINE_COLUMNS = ["way_id", "vertex_index", "lat", "lon"]
OBS_COLUMNS = ["car_id", "timestamp", "segment_id", "east_km", "north_km",
               "log_no2", "block_seconds"]

# Local equirectangular projection constants (km per degree).
KM_PER_DEG_LAT = 110.574
KM_PER_DEG_LON_EQUATOR = 111.320

DEFAULT_MAX_SNAP_M = 100.0
DEFAULT_FLOOR_PPB = 0.1

# Near-tie window for nearest-segment assignment, in km.
_SNAP_TIE_KM = 1e-12


def project(lat, lon, origin: tuple[float, float]):
    """Project geographic coordinates to local planar km around `origin`.

    east = (lon - lon0) * 111.320 * cos(lat0), north = (lat - lat0) * 110.574.
    Valid for small domains (origin within ~1 degree of the points).
    """
    lat0, lon0 = origin
    east = (np.asarray(lon, dtype=float) - lon0) * KM_PER_DEG_LON_EQUATOR * np.cos(np.radians(lat0))
    north = (np.asarray(lat, dtype=float) - lat0) * KM_PER_DEG_LAT
    return east, north


def unproject(east_km, north_km, origin: tuple[float, float]):
    """Inverse of :func:`project`."""
    lat0, lon0 = origin
    lat = lat0 + np.asarray(north_km, dtype=float) / KM_PER_DEG_LAT
    lon = lon0 + np.asarray(east_km, dtype=float) / (KM_PER_DEG_LON_EQUATOR * np.cos(np.radians(lat0)))
    return lat, lon


def segment_origin(segments: pd.DataFrame) -> tuple[float, float]:
    """Projection origin: centroid of the segment table."""
    return float(segments["lat"].mean()), float(segments["lon"].mean())


def segment_planar(segments: pd.DataFrame, origin: tuple[float, float]) -> np.ndarray:
    """(n, 2) planar east/north km of segment centers."""
    east, north = project(segments["lat"].to_numpy(), segments["lon"].to_numpy(), origin)
    return np.column_stack([east, north])


# ---------------------------------------------------------------------------
# segment geometry


def segmentize_centerlines(centerlines: pd.DataFrame, interval_m: float = 30.0) -> pd.DataFrame:
    """Place segment centers along polylines by arc-length stepping.

    Each polyline is cut into pieces of `interval_m` meters (the last piece
    holds the remainder); the segment center is the arc-length midpoint of
    its piece.  Returns a geometry-only segment table with sequential ids.
    """
    if interval_m <= 0:
        raise ValueError("interval must be > 0")
    if len(centerlines) == 0:
        raise ValueError("no geometry")
    rows = []
    seg_id = 0
    for way_id, grp in centerlines.groupby("way_id", sort=True):
        grp = grp.sort_values("vertex_index")
        lat = grp["lat"].to_numpy(dtype=float)
        lon = grp["lon"].to_numpy(dtype=float)
        if len(lat) < 2:
            raise ValueError(f"centerline {way_id!r} has fewer than 2 vertices")
        origin = (float(lat[0]), float(lon[0]))
        east, north = project(lat, lon, origin)
        step_m = np.hypot(np.diff(east), np.diff(north)) * 1000.0
        cum_m = np.concatenate([[0.0], np.cumsum(step_m)])
        total_m = float(cum_m[-1])
        n_seg = max(1, int(np.ceil(total_m / interval_m - 1e-9)))
        for k in range(n_seg):
            lo = k * interval_m
            hi = min((k + 1) * interval_m, total_m)
            mid = 0.5 * (lo + hi)
            e = np.interp(mid, cum_m, east)
            n = np.interp(mid, cum_m, north)
            clat, clon = unproject(e, n, origin)
            rows.append((seg_id, float(clat), float(clon)))
            seg_id += 1
    return pd.DataFrame(rows, columns=["segment_id", "lat", "lon"])


# ---------------------------------------------------------------------------
# snapping


@dataclass
class SnapResult:
    """Snapped observations plus a drop report; dropped samples are never silent."""

    observations: pd.DataFrame
    origin: tuple[float, float]
    n_input: int
    n_snapped: int
    n_dropped: int


def snap_to_segments(samples: pd.DataFrame, segments: pd.DataFrame,
                     max_snap_m: float = DEFAULT_MAX_SNAP_M,
                     floor_ppb: float = DEFAULT_FLOOR_PPB) -> SnapResult:
    """Assign each sample to the nearest segment by planar distance.

    Near-ties (within 1e-12 km) break to the smallest segment id.  Samples
    farther than `max_snap_m` from every segment are dropped and counted.
    Concentrations are floored at `floor_ppb` before the log transform.
    """
    if len(segments) == 0:
        raise ValueError("segment table is empty")
    samples = samples.reset_index(drop=True)
    segments = segments.sort_values("segment_id").reset_index(drop=True)
    origin = segment_origin(segments)
    seg_xy = segment_planar(segments, origin)
    tree = cKDTree(seg_xy)

    east, north = project(samples["lat"].to_numpy(), samples["lon"].to_numpy(), origin)
    pts = np.column_stack([east, north])
    k = min(2, len(segments))
    dist, idx = tree.query(pts, k=k)
    if k == 1:
        dist = dist[:, None]
        idx = idx[:, None]
    nearest = idx[:, 0].copy()
    # Refine near-ties so the smallest id wins deterministically.
    tie = np.nonzero(dist[:, 1] - dist[:, 0] <= _SNAP_TIE_KM)[0] if k == 2 else []
    for i in tie:
        cand = tree.query_ball_point(pts[i], r=dist[i, 0] + _SNAP_TIE_KM)
        nearest[i] = min(cand)

    keep = dist[:, 0] <= max_snap_m / 1000.0
    kept = samples.loc[keep].reset_index(drop=True)
    seg_rows = segments.iloc[nearest[keep]].reset_index(drop=True)
    ppb = np.maximum(kept["no2_ppb"].to_numpy(dtype=float), floor_ppb)

    obs = pd.DataFrame({
        "car_id": kept["car_id"].to_numpy(),
        "timestamp": kept["timestamp"],
        "segment_id": seg_rows["segment_id"].to_numpy(),
        "east_km": seg_xy[nearest[keep], 0],
        "north_km": seg_xy[nearest[keep], 1],
        "log_no2": np.log(ppb),
        "block_seconds": np.ones(len(kept), dtype=np.int64),
    })
    obs = obs.sort_values(["car_id", "timestamp"], kind="mergesort").reset_index(drop=True)
    return SnapResult(
        observations=obs,
        origin=origin,
        n_input=len(samples),
        n_snapped=int(keep.sum()),
        n_dropped=int((~keep).sum()),
    )


# ---------------------------------------------------------------------------
# block medians


def epoch_seconds(timestamps: pd.Series) -> np.ndarray:
    """Seconds since the Unix epoch as float64."""
    return timestamps.astype("int64").to_numpy() / 1e9


def block_median(obs: pd.DataFrame, block_seconds: int) -> pd.DataFrame:
    """Reduce per-car observations to medians over aligned time blocks.

    Blocks align to wall-clock boundaries (epoch-time multiples of
    `block_seconds`), so repeated runs partition identically.  The output
    location is the one of the sample nearest the block's temporal center
    (earlier sample on an exact tie) and the output time is the block center.
    """
    if block_seconds < 1:
        raise ValueError("block_seconds must be >= 1")
    if len(obs) == 0:
        return obs.copy()
    obs = obs.sort_values(["car_id", "timestamp"], kind="mergesort").reset_index(drop=True)
    sec = epoch_seconds(obs["timestamp"])
    block = np.floor(sec / block_seconds).astype(np.int64)
    center = (block + 0.5) * block_seconds
    dist_to_center = np.abs(sec - center)

    work = obs.assign(_block=block, _dist=dist_to_center)
    gb = work.groupby(["car_id", "_block"], sort=True)
    med = gb["log_no2"].median()
    rep_idx = gb["_dist"].idxmin()  # first occurrence wins exact ties
    rep = work.loc[rep_idx.to_numpy()]

    keys = med.index.to_frame(index=False)
    center_sec = (keys["_block"].to_numpy(dtype=float) + 0.5) * block_seconds
    out = pd.DataFrame({
        "car_id": keys["car_id"].to_numpy(),
        "timestamp": pd.to_datetime((center_sec * 1e9).astype(np.int64), utc=True),
        "segment_id": rep["segment_id"].to_numpy(),
        "east_km": rep["east_km"].to_numpy(),
        "north_km": rep["north_km"].to_numpy(),
        "log_no2": med.to_numpy(),
        "block_seconds": np.full(len(keys), block_seconds, dtype=np.int64),
    })
    return out.sort_values(["car_id", "timestamp"], kind="mergesort").reset_index(drop=True)


# ---------------------------------------------------------------------------
# CSV interfaces


def load_samples(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = set(SAMPLE_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"samples file missing columns: {sorted(missing)}")
    df["timestamp"] = pd.to_datetime(df["timestamp"], utc=True, format="ISO8601")
    if not np.isfinite(df["no2_ppb"]).all():
        raise ValueError("non-finite no2_ppb values in samples")
    if (df["lat"].abs() > 90).any() or (df["lon"].abs() > 180).any():
        raise ValueError("lat/lon out of range in samples")
    df = df.sort_values(["car_id", "timestamp"], kind="mergesort").reset_index(drop=True)
    dup = df.duplicated(subset=["car_id", "timestamp"])
    if dup.any():
        raise ValueError(f"{int(dup.sum())} duplicate (car_id, timestamp) rows in samples")
    return df[SAMPLE_COLUMNS]


def load_centerlines(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = set(CENTERLINE_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"centerlines file missing columns: {sorted(missing)}")
    if len(df) == 0:
        raise ValueError("no geometry")
    return df[CENTERLINE_COLUMNS]


def load_segments(path, require_covariates: bool = False) -> pd.DataFrame:
    df = pd.read_csv(path)
    base = {"segment_id", "lat", "lon"}
    missing = base - set(df.columns)
    if missing:
        raise ValueError(f"segments file missing columns: {sorted(missing)}")
    has_cov = all(c in df.columns for c in COVARIATE_COLUMNS)
    if require_covariates and not has_cov:
        raise ValueError(f"segments file must carry the {N_COVARIATES} covariate "
                         f"columns {COVARIATE_COLUMNS[0]}..{COVARIATE_COLUMNS[-1]}")
    if df["segment_id"].duplicated().any():
        raise ValueError("duplicate segment ids")
    cols = ["segment_id", "lat", "lon"] + (COVARIATE_COLUMNS if has_cov else [])
    return df[cols].sort_values("segment_id").reset_index(drop=True)


def write_segments(segments: pd.DataFrame, path):
    segments.to_csv(path, index=False)


def _format_timestamps(ts: pd.Series) -> pd.Series:
    return ts.map(lambda t: t.isoformat())


def write_observations(obs: pd.DataFrame, path):
    out = obs.copy()
    out["timestamp"] = _format_timestamps(out["timestamp"])
    out[OBS_COLUMNS].to_csv(path, index=False)


def load_observations(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = set(OBS_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"observations file missing columns: {sorted(missing)}")
    df["timestamp"] = pd.to_datetime(df["timestamp"], utc=True, format="ISO8601")
    if not np.isfinite(df["log_no2"]).all():
        raise ValueError("non-finite log_no2 values")
    return df[OBS_COLUMNS]
