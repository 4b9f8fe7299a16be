"""Two-step model fitting: OLS for the mean, composite MLE for the covariance.

Step one regresses log concentration on the PCA + diurnal design and keeps the
residuals.  Step two maximizes the Vecchia composite log-likelihood of those
residuals over log-transformed covariance parameters with a derivative-free
simplex, restarting from rescaled initial values.  Sliding-window refits and a
day-resampling bootstrap reuse the same machinery.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from .covariance import CovParams, PointSet
from .features import (FeatureConfig, PcaBasis, Standardization, fit_pca,
                       fit_standardization, observation_features, segment_score_table)
from .ingest import epoch_seconds
from .vecchia import CompositeWorkspace, ConditioningScheme, ResidualSeries, \
    build_conditioning_sets

MODEL_SCHEMA_VERSION = 1

# one restart multiplies every initial parameter by one of these, in order
_RESTART_SCALES = (1.0, 0.3, 3.0, 0.1, 10.0, 0.03, 30.0)
_LOG_BOUND = 30.0  # clip log-parameters; e^30 is far outside any sane fit


@dataclass
class OptimizerConfig:
    max_iters: int = 500
    rel_tol: float = 1e-6
    restarts: int = 3

    def __post_init__(self):
        if self.max_iters <= 0 or self.rel_tol <= 0 or self.restarts <= 0:
            raise ValueError("optimizer settings must be positive")


@dataclass
class ThetaFit:
    """Best covariance parameters with per-start convergence diagnostics."""

    params: CovParams
    loglik: float
    converged: bool
    n_evals: int
    starts: list = field(default_factory=list)


class FitError(RuntimeError):
    """No optimizer start converged; `best` holds the best attempt anyway."""

    def __init__(self, msg: str, best: ThetaFit):
        super().__init__(msg)
        self.best = best


def ols_beta(x: np.ndarray, y: np.ndarray, column_names=None):
    """Least-squares coefficients via QR, plus residuals.

    Near-dependent columns (tiny diagonal of R) are an error naming the
    offending columns rather than a silently unstable solve.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    if n <= p:
        raise ValueError(f"need more observations ({n}) than design columns ({p})")
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(float).eps * diag.max()
    bad = np.nonzero(diag <= max(tol, 1e-10 * diag.max()))[0]
    if bad.size:
        names = [column_names[i] if column_names else f"col{i}" for i in bad]
        raise ValueError(f"design matrix is rank deficient; near-dependent columns: {names}")
    from scipy.linalg import solve_triangular
    beta = solve_triangular(r, q.T @ y, lower=False)
    return beta, y - x @ beta


def _active_names(kind: str) -> list:
    return {"xonly": ["sigma2", "tau2"],
            "s": ["sigma2", "tau2", "theta_s"],
            "st": ["sigma2", "tau2", "theta_s", "theta_t"],
            "stx": ["sigma2", "tau2", "theta_s", "theta_t", "theta_x"]}[kind]


def _params_from_log(kind: str, names: list, logv: np.ndarray) -> CovParams:
    vals = dict(zip(names, np.exp(np.clip(logv, -_LOG_BOUND, _LOG_BOUND))))
    return CovParams(kind=kind, **vals)


def fit_theta(series: ResidualSeries, kind: str, scheme: ConditioningScheme,
              config: OptimizerConfig | None = None, sets=None,
              workers: int = 1) -> ThetaFit:
    """Composite-likelihood estimate of the covariance parameters.

    The conditioning sets (and any subsample inside them) are frozen before
    optimization so the objective is deterministic.  Starts multiply the
    default initial values (half the residual variance for sigma2/tau2, unit
    ranges) by 1.0, 0.3, 3.0, ...; the best final objective wins.
    """
    config = config or OptimizerConfig()
    if len(series) < 50:
        raise ValueError(f"need at least 50 residuals to fit, got {len(series)}")
    resid_var = float(np.var(series.resid))
    if kind == "xonly":
        params = CovParams(kind="xonly", sigma2=0.0, tau2=resid_var)
        ws = CompositeWorkspace(series, sets if sets is not None
                                else build_conditioning_sets(series, scheme))
        return ThetaFit(params=params, loglik=ws.loglik(params, workers=workers),
                        converged=True, n_evals=1,
                        starts=[{"scale": 1.0, "converged": True, "note": "closed form"}])
    if sets is None:
        sets = build_conditioning_sets(series, scheme)
    ws = CompositeWorkspace(series, sets)
    names = _active_names(kind)
    base = {"sigma2": max(resid_var / 2.0, 1e-8), "tau2": max(resid_var / 2.0, 1e-8),
            "theta_s": 1.0, "theta_t": 1.0, "theta_x": 1.0}
    x0 = np.log(np.array([base[n] for n in names]))

    evals = [0]

    def nll(logv):
        evals[0] += 1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return -ws.loglik(_params_from_log(kind, names, logv), workers=workers)

    f0 = abs(nll(x0))
    starts = []
    best = None
    for s in range(config.restarts):
        scale = _RESTART_SCALES[s % len(_RESTART_SCALES)]
        res = minimize(nll, x0 + np.log(scale), method="Nelder-Mead",
                       options={"maxiter": config.max_iters,
                                "maxfev": 4 * config.max_iters,
                                "fatol": config.rel_tol * max(1.0, f0),
                                "xatol": 1e-4, "adaptive": True})
        starts.append({"scale": scale, "converged": bool(res.success),
                       "loglik": -float(res.fun), "n_iter": int(res.nit)})
        if best is None or res.fun < best.fun:
            best = res
    fit = ThetaFit(params=_params_from_log(kind, names, best.x),
                   loglik=-float(best.fun), converged=bool(best.success),
                   n_evals=evals[0], starts=starts)
    if not any(st["converged"] for st in starts):
        raise FitError("no optimizer start converged", best=fit)
    return fit


@dataclass
class FittedModel:
    """Everything needed to predict: mean model, covariance, and feature maps."""

    kind: str
    beta: np.ndarray
    params: CovParams
    scheme: ConditioningScheme
    basis: PcaBasis
    standardization: Standardization
    origin: tuple
    time0_epoch: float
    train_start: str
    train_end: str
    block_seconds: float
    tz_offset_hours: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema_version": MODEL_SCHEMA_VERSION, "kind": self.kind,
                "beta": self.beta.tolist(), "params": self.params.to_dict(),
                "scheme": self.scheme.to_dict(), "basis": self.basis.to_dict(),
                "standardization": self.standardization.to_dict(),
                "origin": [float(self.origin[0]), float(self.origin[1])],
                "time0_epoch": float(self.time0_epoch),
                "train_start": self.train_start, "train_end": self.train_end,
                "block_seconds": float(self.block_seconds),
                "tz_offset_hours": float(self.tz_offset_hours),
                "diagnostics": self.diagnostics}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        ver = d.get("schema_version")
        if ver != MODEL_SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema version {ver}")
        return cls(kind=d["kind"], beta=np.asarray(d["beta"], dtype=float),
                   params=CovParams.from_dict(d["params"]),
                   scheme=ConditioningScheme.from_dict(d["scheme"]),
                   basis=PcaBasis.from_dict(d["basis"]),
                   standardization=Standardization.from_dict(d["standardization"]),
                   origin=(d["origin"][0], d["origin"][1]),
                   time0_epoch=float(d["time0_epoch"]),
                   train_start=d["train_start"], train_end=d["train_end"],
                   block_seconds=float(d["block_seconds"]),
                   tz_offset_hours=float(d["tz_offset_hours"]),
                   diagnostics=d.get("diagnostics", {}))

    @classmethod
    def from_json(cls, s: str) -> "FittedModel":
        return cls.from_dict(json.loads(s))


def observation_points(obs: pd.DataFrame, scores: np.ndarray, time0_epoch: float) -> PointSet:
    """Planar/relative-hour point set for an observation table."""
    coords = obs[["east_km", "north_km"]].to_numpy(dtype=float)
    t = (epoch_seconds(obs["timestamp"]) - time0_epoch) / 3600.0
    return PointSet(coords=np.ascontiguousarray(coords), t=np.ascontiguousarray(t),
                    x=np.ascontiguousarray(scores, dtype=float))


def _check_observations(obs: pd.DataFrame):
    if len(obs) == 0:
        raise ValueError("no observations")


def two_step_fit(obs: pd.DataFrame, segments: pd.DataFrame, kind: str,
                 scheme: ConditioningScheme, config: OptimizerConfig | None = None,
                 feat: FeatureConfig | None = None, origin: tuple | None = None,
                 workers: int = 1) -> FittedModel:
    """OLS mean fit followed by composite-likelihood covariance fit."""
    feat = feat or FeatureConfig()
    _check_observations(obs)
    obs = obs.sort_values("timestamp", kind="mergesort").reset_index(drop=True)
    std = fit_standardization(segments)
    z = (segments[std.columns].to_numpy(dtype=float) - std.means) / std.sds
    basis = fit_pca(z, k_computed=feat.k_computed, k_retained=feat.k_retained)
    seg_scores = segment_score_table(segments, std, basis)
    x, scores = observation_features(obs, seg_scores, feat.tz_offset_hours)
    y = obs["log_no2"].to_numpy(dtype=float)
    beta, resid = ols_beta(x, y)
    t_epoch = epoch_seconds(obs["timestamp"])
    time0 = float(t_epoch[0])
    series = ResidualSeries(observation_points(obs, scores, time0), resid)
    sets = build_conditioning_sets(series, scheme)
    theta = fit_theta(series, kind, scheme, config, sets=sets, workers=workers)
    if origin is None:
        origin = (float(segments["lat"].mean()), float(segments["lon"].mean()))
    block_sec = float(obs["block_seconds"].iloc[0]) if "block_seconds" in obs else float("nan")
    return FittedModel(
        kind=kind, beta=beta, params=theta.params, scheme=scheme, basis=basis,
        standardization=std, origin=(float(origin[0]), float(origin[1])),
        time0_epoch=time0,
        train_start=obs["timestamp"].iloc[0].isoformat(),
        train_end=obs["timestamp"].iloc[-1].isoformat(),
        block_seconds=block_sec, tz_offset_hours=feat.tz_offset_hours,
        diagnostics={"loglik": theta.loglik, "converged": theta.converged,
                     "n_evals": theta.n_evals, "starts": theta.starts,
                     "n_obs": int(len(obs)), "resid_var": float(np.var(resid))})


@dataclass
class WindowFit:
    week_start: pd.Timestamp
    model: FittedModel
    mspe_log: float
    n_eval: int


def sliding_window_fit(obs: pd.DataFrame, segments: pd.DataFrame, kind: str,
                       scheme: ConditioningScheme, window_weeks: int,
                       config: OptimizerConfig | None = None,
                       feat: FeatureConfig | None = None,
                       horizon_minutes: float = 15.0,
                       cond_window_minutes: float = 60.0,
                       step_weeks: int = 1, workers: int = 1) -> list:
    """Train on each trailing window, score next-week short-horizon forecasts.

    Weeks are counted from the first observation.  Evaluation weeks with an
    empty training window are skipped with a warning.
    """
    from .kriging import forecast, score_log

    _check_observations(obs)
    obs = obs.sort_values("timestamp", kind="mergesort").reset_index(drop=True)
    t0 = obs["timestamp"].iloc[0]
    t_end = obs["timestamp"].iloc[-1]
    week = pd.Timedelta(weeks=1)
    results = []
    k = window_weeks
    while t0 + k * week <= t_end:
        eval_start = t0 + k * week
        eval_end = eval_start + step_weeks * week
        train_mask = (obs["timestamp"] >= eval_start - window_weeks * week) & \
                     (obs["timestamp"] < eval_start)
        eval_mask = (obs["timestamp"] >= eval_start) & (obs["timestamp"] < eval_end)
        k += step_weeks
        if not eval_mask.any():
            continue
        if not train_mask.any():
            warnings.warn(f"empty training window before {eval_start}; week skipped")
            continue
        train = obs.loc[train_mask].reset_index(drop=True)
        ev = obs.loc[eval_mask].reset_index(drop=True)
        try:
            model = two_step_fit(train, segments, kind, scheme, config, feat,
                                 workers=workers)
        except (ValueError, FitError) as exc:
            warnings.warn(f"week at {eval_start} skipped: {exc}")
            continue
        hist = obs.loc[obs["timestamp"] < eval_end].reset_index(drop=True)
        pred = forecast(model, segments, hist, ev[["segment_id", "timestamp"]],
                        horizon_minutes=horizon_minutes,
                        cond_window_minutes=cond_window_minutes)
        mspe = score_log(pred, ev)
        results.append(WindowFit(week_start=eval_start, model=model,
                                 mspe_log=mspe, n_eval=int(len(ev))))
    return results


def bootstrap_theta(obs: pd.DataFrame, segments: pd.DataFrame, kind: str,
                    scheme: ConditioningScheme, config: OptimizerConfig | None = None,
                    feat: FeatureConfig | None = None, window_weeks: int = 21,
                    reps: int = 15, seed: int = 0, draws=None,
                    workers: int = 1) -> list:
    """Day-resampling bootstrap of the covariance parameters.

    Whole days inside the trailing window are drawn with replacement (keyed
    generator per replicate) and the two-step fit is rerun.  `draws` injects
    explicit per-replicate day-index arrays, bypassing the generator.
    """
    _check_observations(obs)
    obs = obs.sort_values("timestamp", kind="mergesort").reset_index(drop=True)
    t_end = obs["timestamp"].iloc[-1]
    window = obs.loc[obs["timestamp"] > t_end - pd.Timedelta(weeks=window_weeks)]
    days = window["timestamp"].dt.floor("D")
    uniq = days.unique()
    if len(uniq) < 1:
        raise ValueError("no complete day in the bootstrap window")
    by_day = {d: window.loc[days == d] for d in uniq}
    out = []
    for r in range(reps):
        if draws is not None:
            pick = np.asarray(draws[r], dtype=np.int64)
        else:
            gen = np.random.Generator(np.random.Philox(
                key=np.array([seed, r], dtype=np.uint64)))
            pick = gen.integers(0, len(uniq), size=len(uniq))
        boot = pd.concat([by_day[uniq[i]] for i in pick], ignore_index=True)
        boot = boot.sort_values("timestamp", kind="mergesort").reset_index(drop=True)
        model = two_step_fit(boot, segments, kind, scheme, config, feat, workers=workers)
        out.append(model.params)
    return out
