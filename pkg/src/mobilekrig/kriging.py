"""Conditional-Gaussian prediction from a fitted model.

All prediction paths share one dense kriging core: stack the conditioning
observations, factor their covariance (with nugget), and read off conditional
means and variances for the targets.  Conditioning windows stay small (an
hour of blocks, or a bounded neighbor count), so dense solves are the right
tool here even though fitting uses the composite likelihood.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .covariance import PointSet, cov_matrix, cross_cov_matrix
from .estimation import FittedModel, observation_points
from .features import design_matrix, local_hour, segment_score_table
from .ingest import epoch_seconds, project
from .vecchia import _chol_with_jitter

_NEG_VAR_WARN = -1e-8


@dataclass
class PredictionSet:
    """Predictions on the log scale with latent and observation-level variances."""

    segment_id: np.ndarray
    timestamp: pd.Series
    mean_log: np.ndarray
    var_log: np.ndarray
    var_latent: np.ndarray
    car_id: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.mean_log.shape[0]

    @property
    def sd_log(self) -> np.ndarray:
        return np.sqrt(self.var_log)

    def mean_ppb(self, lognormal_correction: bool = False) -> np.ndarray:
        if lognormal_correction:
            return np.exp(self.mean_log + 0.5 * self.var_log)
        return np.exp(self.mean_log)

    def to_frame(self, lognormal_correction: bool = False) -> pd.DataFrame:
        return pd.DataFrame({
            "segment_id": self.segment_id,
            "timestamp": [ts.isoformat() for ts in self.timestamp],
            "mean_log": self.mean_log,
            "sd_log": self.sd_log,
            "mean_ppb": self.mean_ppb(lognormal_correction),
        })


def _target_features(model: FittedModel, segments: pd.DataFrame, targets: pd.DataFrame):
    """Design matrix, point set and scores for target (segment, time) pairs."""
    seg_scores = segment_score_table(segments, model.standardization, model.basis)
    missing = set(targets["segment_id"]) - set(seg_scores.index)
    if missing:
        raise ValueError(f"targets reference unknown segment ids: {sorted(missing)[:5]}")
    scores = seg_scores.loc[targets["segment_id"].to_numpy()].to_numpy()
    hours = local_hour(targets["timestamp"], model.tz_offset_hours)
    x_design = design_matrix(hours, scores)
    seg_idx = segments.set_index("segment_id")
    lat = seg_idx.loc[targets["segment_id"], "lat"].to_numpy(dtype=float)
    lon = seg_idx.loc[targets["segment_id"], "lon"].to_numpy(dtype=float)
    east, north = project(lat, lon, model.origin)
    t_rel = (epoch_seconds(targets["timestamp"]) - model.time0_epoch) / 3600.0
    pts = PointSet(coords=np.column_stack([east, north]), t=np.asarray(t_rel),
                   x=np.ascontiguousarray(scores))
    return x_design, pts, seg_scores


def _conditioning_arrays(model: FittedModel, seg_scores: pd.DataFrame,
                         conditioning: pd.DataFrame):
    scores = seg_scores.loc[conditioning["segment_id"].to_numpy()].to_numpy()
    hours = local_hour(conditioning["timestamp"], model.tz_offset_hours)
    xc = design_matrix(hours, scores)
    pts = observation_points(conditioning, scores, model.time0_epoch)
    resid = conditioning["log_no2"].to_numpy(dtype=float) - xc @ model.beta
    return pts, resid


def _clamped_var_latent(sigma2: float, quad: np.ndarray) -> np.ndarray:
    var = sigma2 - quad
    low = var < _NEG_VAR_WARN
    if np.any(low):
        warnings.warn(f"{int(np.count_nonzero(low))} negative latent variance(s) "
                      f"clamped (min {var.min():.3e})", RuntimeWarning, stacklevel=2)
    return np.maximum(var, 0.0)


def krige(model: FittedModel, segments: pd.DataFrame, conditioning: pd.DataFrame,
          targets: pd.DataFrame) -> PredictionSet:
    """Conditional mean and variance of log concentration at target pairs.

    Targets is a frame with segment_id and timestamp columns.  The xonly kind
    ignores conditioning entirely (pure regression); all other kinds require
    a non-empty conditioning set.
    """
    x_t, pts_t, seg_scores = _target_features(model, segments, targets)
    prior_mean = x_t @ model.beta
    p = model.params
    base = dict(segment_id=targets["segment_id"].to_numpy(),
                timestamp=targets["timestamp"].reset_index(drop=True))
    if model.kind == "xonly":
        n = len(targets)
        return PredictionSet(**base, mean_log=prior_mean,
                             var_log=np.full(n, p.tau2),
                             var_latent=np.zeros(n))
    if conditioning is None or len(conditioning) == 0:
        raise ValueError(f"kind {model.kind!r} needs a non-empty conditioning set")
    pts_c, resid_c = _conditioning_arrays(model, seg_scores, conditioning)
    sig22 = cov_matrix(p, pts_c, add_nugget=True)
    chol = _chol_with_jitter(sig22, 0)
    sig12 = cross_cov_matrix(p, pts_t, pts_c)
    alpha = np.linalg.solve(chol, sig12.T)
    w = np.linalg.solve(chol, resid_c)
    mean = prior_mean + alpha.T @ w
    var_latent = _clamped_var_latent(p.sigma2, np.sum(alpha * alpha, axis=0))
    return PredictionSet(**base, mean_log=mean, var_log=var_latent + p.tau2,
                         var_latent=var_latent)


def forecast(model: FittedModel, segments: pd.DataFrame, stream: pd.DataFrame,
             targets: pd.DataFrame, horizon_minutes: float,
             cond_window_minutes: float = 60.0,
             offset_minutes: float | None = None) -> PredictionSet:
    """Predict targets conditioning on the stream h minutes before them.

    For a target at time T the conditioning window is
    (T - offset - cond_window, T - offset] with offset defaulting to the
    horizon.  Target times with an empty window fall back to the regression
    mean (prior variance), flagged in the result info.
    """
    if offset_minutes is None:
        offset_minutes = horizon_minutes
    off = pd.Timedelta(minutes=offset_minutes)
    width = pd.Timedelta(minutes=cond_window_minutes)
    targets = targets.reset_index(drop=True)
    n = len(targets)
    mean = np.empty(n)
    var_latent = np.empty(n)
    fallback_times = []
    for t_star, grp in targets.groupby("timestamp", sort=True):
        idx = grp.index.to_numpy()
        win = stream.loc[(stream["timestamp"] > t_star - off - width) &
                         (stream["timestamp"] <= t_star - off)]
        if len(win) == 0 and model.kind != "xonly":
            x_t, _, _ = _target_features(model, segments, grp)
            mean[idx] = x_t @ model.beta
            var_latent[idx] = model.params.sigma2
            fallback_times.append(t_star.isoformat())
            continue
        sub = krige(model, segments, win, grp)
        mean[idx] = sub.mean_log
        var_latent[idx] = sub.var_latent
    info = {"horizon_minutes": float(horizon_minutes),
            "cond_window_minutes": float(cond_window_minutes),
            "offset_minutes": float(offset_minutes)}
    if fallback_times:
        warnings.warn(f"{len(fallback_times)} target time(s) had no conditioning data; "
                      "regression-mean fallback used", RuntimeWarning, stacklevel=2)
        info["mean_fallback_times"] = fallback_times
    return PredictionSet(segment_id=targets["segment_id"].to_numpy(),
                         timestamp=targets["timestamp"],
                         mean_log=mean, var_log=var_latent + model.params.tau2,
                         var_latent=var_latent, info=info)


def car_ab_predict(model: FittedModel, segments: pd.DataFrame,
                   stream: pd.DataFrame) -> PredictionSet:
    """Predict each car's observations from the other cars' same-day data.

    Days are local days under the model's time-zone offset.
    """
    stream = stream.sort_values("timestamp", kind="mergesort").reset_index(drop=True)
    days = (stream["timestamp"]
            + pd.Timedelta(hours=model.tz_offset_hours)).dt.floor("D")
    parts = []
    for day in days.unique():
        day_obs = stream.loc[days == day]
        cars = day_obs["car_id"].unique()
        if len(cars) < 2:
            warnings.warn(f"day {pd.Timestamp(day).date()} has a single car; skipped",
                          RuntimeWarning, stacklevel=2)
            continue
        for car in cars:
            mine = day_obs.loc[day_obs["car_id"] == car]
            other = day_obs.loc[day_obs["car_id"] != car]
            pred = krige(model, segments, other,
                         mine[["segment_id", "timestamp"]])
            pred.car_id = mine["car_id"].to_numpy()
            parts.append(pred)
    if not parts:
        raise ValueError("no day with at least two cars")
    return PredictionSet(
        segment_id=np.concatenate([p.segment_id for p in parts]),
        timestamp=pd.concat([p.timestamp for p in parts], ignore_index=True),
        mean_log=np.concatenate([p.mean_log for p in parts]),
        var_log=np.concatenate([p.var_log for p in parts]),
        var_latent=np.concatenate([p.var_latent for p in parts]),
        car_id=np.concatenate([p.car_id for p in parts]))


def _align_truth(pred: PredictionSet, truth: pd.DataFrame) -> pd.DataFrame:
    keys = ["segment_id", "timestamp"]
    left = pd.DataFrame({"segment_id": pred.segment_id,
                         "timestamp": pd.Series(pred.timestamp).reset_index(drop=True)})
    if pred.car_id is not None and "car_id" in truth.columns:
        keys = ["car_id"] + keys
        left["car_id"] = pred.car_id
    merged = left.merge(truth[keys + ["log_no2"]].drop_duplicates(subset=keys),
                        on=keys, how="left")
    if merged["log_no2"].isna().all():
        raise ValueError("no overlap between predictions and truth")
    return merged


def score(pred: PredictionSet, truth: pd.DataFrame,
          lognormal_correction: bool = False) -> dict:
    """RMSPE and correlation on the ppb scale, plus log-scale MSPE.

    Predictions are exponentiated without variance correction by default.
    Correlation of constant predictions is undefined and reported as NaN.
    """
    merged = _align_truth(pred, truth)
    ok = merged["log_no2"].notna().to_numpy()
    actual_log = merged["log_no2"].to_numpy(dtype=float)[ok]
    pred_log = pred.mean_log[ok]
    pred_ppb = pred.mean_ppb(lognormal_correction)[ok]
    actual_ppb = np.exp(actual_log)
    err = pred_ppb - actual_ppb
    rmspe = float(np.sqrt(np.mean(err * err)))
    if np.ptp(pred_ppb) == 0.0 or np.ptp(actual_ppb) == 0.0:
        cor = float("nan")
    else:
        cor = float(np.corrcoef(pred_ppb, actual_ppb)[0, 1])
    d = pred_log - actual_log
    return {"rmspe_ppb": rmspe, "cor_ppb": cor, "mspe_log": float(np.mean(d * d)),
            "n": int(ok.sum())}


def score_log(pred: PredictionSet, truth: pd.DataFrame) -> float:
    return score(pred, truth)["mspe_log"]


def nearest_archive_indices(target_coords: np.ndarray, archive_coords: np.ndarray,
                            archive_order: np.ndarray, k: int,
                            chunk: int = 256) -> list:
    """Per-target indices of the k nearest archive points, ties by earlier time.

    archive_order ranks rows in time (earlier = smaller); ties in planar
    distance resolve toward smaller rank.
    """
    out = []
    na = archive_coords.shape[0]
    k = min(k, na)
    for s in range(0, target_coords.shape[0], chunk):
        tc = target_coords[s:s + chunk]
        d = tc[:, None, :] - archive_coords[None, :, :]
        d2 = d[..., 0] ** 2 + d[..., 1] ** 2
        for row in d2:
            order = np.lexsort((archive_order, row))
            out.append(np.sort(order[:k]))
    return out


def spatial_interpolate(model: FittedModel, segments: pd.DataFrame,
                        archive: pd.DataFrame, targets: pd.DataFrame,
                        k: int = 800) -> PredictionSet:
    """Krige each target from its k spatially nearest archive observations."""
    if len(archive) == 0:
        raise ValueError("empty archive")
    archive = archive.sort_values("timestamp", kind="mergesort").reset_index(drop=True)
    targets = targets.reset_index(drop=True)
    x_t, pts_t, seg_scores = _target_features(model, segments, targets)
    prior_mean = x_t @ model.beta
    pts_c, resid_c = _conditioning_arrays(model, seg_scores, archive)
    nbrs = nearest_archive_indices(pts_t.coords, pts_c.coords,
                                   np.arange(len(archive)), k)
    p = model.params
    n = len(targets)
    mean = np.empty(n)
    var_latent = np.empty(n)
    groups: dict = {}
    for i, nb in enumerate(nbrs):
        groups.setdefault(nb.tobytes(), (nb, []))[1].append(i)
    for nb, idx in groups.values():
        idx = np.asarray(idx)
        sub = pts_c.subset(nb)
        sig22 = cov_matrix(p, sub, add_nugget=True)
        chol = _chol_with_jitter(sig22, 0)
        sig12 = cross_cov_matrix(p, pts_t.subset(idx), sub)
        alpha = np.linalg.solve(chol, sig12.T)
        w = np.linalg.solve(chol, resid_c[nb])
        mean[idx] = prior_mean[idx] + alpha.T @ w
        var_latent[idx] = _clamped_var_latent(p.sigma2, np.sum(alpha * alpha, axis=0))
    return PredictionSet(segment_id=targets["segment_id"].to_numpy(),
                         timestamp=targets["timestamp"],
                         mean_log=mean, var_log=var_latent + p.tau2,
                         var_latent=var_latent, info={"k": int(k)})
