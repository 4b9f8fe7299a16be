"""Command-line pipeline: streets to segments to observations to predictions.

Every command reads an optional INI config (sections [paths], [model],
[scheme], [optimizer], [features], [predict], [run]); command-line flags
override config values, which override built-in defaults.  Each output file
gets a `<name>.meta.json` sidecar recording the resolved settings hash, the
seed, and library versions, so artifacts are reconstructible from inputs.

Errors exit with status 1 and a single `error: ...` line on stderr; partially
written outputs are removed.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys

import numpy as np
import pandas as pd
import scipy

from . import __version__
from .covariance import KINDS
from .estimation import (FittedModel, OptimizerConfig, bootstrap_theta,
                         sliding_window_fit, two_step_fit)
from .features import FeatureConfig
from .ingest import (DEFAULT_FLOOR_PPB, DEFAULT_MAX_SNAP_M, block_median,
                     load_centerlines, load_observations, load_samples, load_segments,
                     segmentize_centerlines, snap_to_segments, write_observations,
                     write_segments)
from .kriging import car_ab_predict, forecast, score, spatial_interpolate
from .lagsim import LagSimConfig, relative_mse_table
from .netdesign import compare_networks, split_days, summarize_networks
from .simulate import build_synth
from .vecchia import MODES, ConditioningScheme

_PARAM_COLS = ("sigma2", "tau2", "theta_s", "theta_t", "theta_x")


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config resolution


def _read_config(path: str) -> dict:
    if not os.path.exists(path):
        raise CliError(f"config not found: {path}")
    cp = configparser.ConfigParser()
    cp.read(path)
    return {s: dict(cp.items(s)) for s in cp.sections()}


def _to_bool(s) -> bool:
    if isinstance(s, bool):
        return s
    return str(s).strip().lower() in ("1", "true", "yes", "on")


class Settings:
    """Flag > config > default resolution, remembering every resolved value."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.resolved: dict = {}

    def get(self, section: str, key: str, cast, default, override=None):
        if override is not None:
            val = override
        elif section in self.cfg and key in self.cfg[section]:
            val = cast(self.cfg[section][key])
        else:
            val = default
        if val is not None and cast in (int, float, str):
            val = cast(val)
        self.resolved[f"{section}.{key}"] = val
        return val

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _mark(outputs: list, path: str) -> str:
    outputs.append(path)
    return path


def _sidecar(outputs: list, path: str, command: str, st: Settings, seed,
             inputs: dict, extra: dict | None = None):
    meta = {
        "command": command,
        "config_hash": st.config_hash(),
        "settings": st.resolved,
        "seed": seed,
        "inputs": {k: os.path.abspath(v) for k, v in inputs.items() if v},
        "versions": {"mobilekrig": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "pandas": pd.__version__,
                     "python": sys.version.split()[0]},
    }
    if extra:
        meta.update(extra)
    side = _mark(outputs, path + ".meta.json")
    with open(side, "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")


def _parse_time(s: str) -> pd.Timestamp:
    ts = pd.Timestamp(s)
    return ts.tz_localize("UTC") if ts.tz is None else ts.tz_convert("UTC")


def _int_list(s) -> list:
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [int(v) for v in str(s).split(",") if v.strip()]


def _float_list(s) -> list:
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


def _scheme(st: Settings, args) -> ConditioningScheme:
    return ConditioningScheme(
        lag_l=st.get("scheme", "lag_l", float, 0.0, getattr(args, "lag_l", None)),
        width_m=st.get("scheme", "width_m", float, 60.0, getattr(args, "width_m", None)),
        max_size=st.get("scheme", "max_size", int, 100, getattr(args, "max_size", None)),
        seed=_seed(st, args),
        mode=st.get("scheme", "mode", str, "LAG_WINDOW", getattr(args, "mode", None)),
        closed_left=_to_bool(st.get("scheme", "closed_left", _to_bool, False,
                                    getattr(args, "closed_left", None))))


def _optimizer(st: Settings, args) -> OptimizerConfig:
    return OptimizerConfig(
        max_iters=st.get("optimizer", "max_iters", int, 500,
                         getattr(args, "max_iters", None)),
        rel_tol=st.get("optimizer", "rel_tol", float, 1e-6,
                       getattr(args, "rel_tol", None)),
        restarts=st.get("optimizer", "restarts", int, 3,
                        getattr(args, "restarts", None)))


def _features(st: Settings, args) -> FeatureConfig:
    return FeatureConfig(
        k_computed=st.get("features", "k_computed", int, 13,
                          getattr(args, "k_computed", None)),
        k_retained=st.get("features", "k_retained", int, 7,
                          getattr(args, "k_retained", None)),
        tz_offset_hours=st.get("features", "tz_offset_hours", float, -8.0,
                               getattr(args, "tz_offset_hours", None)))


def _seed(st: Settings, args) -> int:
    return st.get("run", "seed", int, 0, getattr(args, "seed", None))


def _workers(st: Settings, args) -> int:
    return st.get("run", "workers", int, 1, getattr(args, "workers", None))


def _load_model(path: str) -> FittedModel:
    if not path or not os.path.exists(path):
        raise CliError(f"model not found: {path}")
    with open(path) as fh:
        return FittedModel.from_json(fh.read())


def _file_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _targets_frame(args, segments: pd.DataFrame) -> pd.DataFrame:
    if getattr(args, "targets", None):
        df = pd.read_csv(args.targets)
        need = {"segment_id", "timestamp"}
        if need - set(df.columns):
            raise CliError("targets file needs segment_id and timestamp columns")
        df["timestamp"] = pd.to_datetime(df["timestamp"], utc=True, format="ISO8601")
        return df[["segment_id", "timestamp"]]
    if getattr(args, "at", None):
        at = _parse_time(args.at)
        return pd.DataFrame({"segment_id": segments["segment_id"],
                             "timestamp": at})
    raise CliError("provide --targets CSV or --at TIME")


def _write_predictions(outputs: list, pred, path: str):
    _mark(outputs, path)
    pred.to_frame().to_csv(path, index=False)


# ---------------------------------------------------------------------------
# command handlers


def cmd_segments(args, st: Settings, outputs: list):
    center = load_centerlines(args.centerlines)
    interval = st.get("paths", "interval_m", float, 30.0, args.interval_m)
    seg = segmentize_centerlines(center, interval_m=interval)
    if args.covariates:
        cov = pd.read_csv(args.covariates)
        if "segment_id" not in cov.columns:
            raise CliError("covariates file needs a segment_id column")
        merged = seg.merge(cov, on="segment_id", how="left", validate="1:1")
        bad = merged.drop(columns=seg.columns).isna().any(axis=1)
        if bad.any():
            raise CliError(f"{int(bad.sum())} segments missing covariate values")
        seg = merged
    _mark(outputs, args.out)
    write_segments(seg, args.out)
    _sidecar(outputs, args.out, "segments", st, None,
             {"centerlines": args.centerlines, "covariates": args.covariates},
             {"n_segments": int(len(seg))})


def cmd_snap(args, st: Settings, outputs: list):
    samples = load_samples(args.samples)
    segments = load_segments(args.segments)
    res = snap_to_segments(
        samples, segments,
        max_snap_m=st.get("paths", "max_snap_m", float, DEFAULT_MAX_SNAP_M,
                          args.max_snap_m),
        floor_ppb=st.get("paths", "floor_ppb", float, DEFAULT_FLOOR_PPB,
                         args.floor_ppb))
    _mark(outputs, args.out)
    write_observations(res.observations, args.out)
    _sidecar(outputs, args.out, "snap", st, None,
             {"samples": args.samples, "segments": args.segments},
             {"origin": list(res.origin), "n_input": res.n_input,
              "n_snapped": res.n_snapped, "n_dropped": res.n_dropped})


def cmd_reduce(args, st: Settings, outputs: list):
    obs = load_observations(args.observations)
    block = st.get("model", "block_seconds", int, 60, args.block_seconds)
    out = block_median(obs, block)
    _mark(outputs, args.out)
    write_observations(out, args.out)
    _sidecar(outputs, args.out, "reduce", st, None,
             {"observations": args.observations},
             {"block_seconds": block, "n_in": int(len(obs)), "n_out": int(len(out))})


def cmd_fit(args, st: Settings, outputs: list):
    obs = load_observations(args.observations)
    segments = load_segments(args.segments, require_covariates=True)
    kind = st.get("model", "kind", str, "st", args.kind)
    if kind not in KINDS:
        raise CliError(f"kind must be one of {KINDS}")
    model = two_step_fit(obs, segments, kind, _scheme(st, args),
                         _optimizer(st, args), _features(st, args),
                         workers=_workers(st, args))
    _mark(outputs, args.out)
    with open(args.out, "w") as fh:
        fh.write(model.to_json())
        fh.write("\n")
    _sidecar(outputs, args.out, "fit", st, _seed(st, args),
             {"observations": args.observations, "segments": args.segments},
             {"diagnostics": model.diagnostics})


def cmd_forecast(args, st: Settings, outputs: list):
    model = _load_model(args.model)
    segments = load_segments(args.segments, require_covariates=True)
    stream = load_observations(args.stream)
    targets = _targets_frame(args, segments)
    horizon = st.get("predict", "horizon_minutes", float, 15.0, args.horizon_minutes)
    window = st.get("predict", "cond_window_minutes", float, 60.0,
                    args.cond_window_minutes)
    pred = forecast(model, segments, stream, targets, horizon_minutes=horizon,
                    cond_window_minutes=window, offset_minutes=args.offset_minutes)
    _write_predictions(outputs, pred, args.out)
    _sidecar(outputs, args.out, "forecast", st, _seed(st, args),
             {"model": args.model, "segments": args.segments, "stream": args.stream},
             {"model_hash": _file_hash(args.model), "window": pred.info})


def cmd_interpolate(args, st: Settings, outputs: list):
    model = _load_model(args.model)
    segments = load_segments(args.segments, require_covariates=True)
    archive = load_observations(args.archive)
    targets = _targets_frame(args, segments)
    k = st.get("predict", "k_neighbors", int, 800, args.k)
    pred = spatial_interpolate(model, segments, archive, targets, k=k)
    _write_predictions(outputs, pred, args.out)
    _sidecar(outputs, args.out, "interpolate", st, _seed(st, args),
             {"model": args.model, "segments": args.segments, "archive": args.archive},
             {"model_hash": _file_hash(args.model), "k": k})


def cmd_crossval(args, st: Settings, outputs: list):
    obs = load_observations(args.observations)
    segments = load_segments(args.segments, require_covariates=True)
    train_end = _parse_time(args.train_end)
    test_end = _parse_time(args.test_end) if args.test_end else None
    kinds = [k.strip() for k in
             st.get("model", "kinds", str, "st", args.kinds).split(",")]
    horizons = _float_list(st.get("predict", "horizons", str, "5,15,60",
                                  args.horizons))
    window = st.get("predict", "cond_window_minutes", float, 60.0,
                    args.cond_window_minutes)
    train = obs.loc[obs["timestamp"] <= train_end].reset_index(drop=True)
    test = obs.loc[obs["timestamp"] > train_end]
    if test_end is not None:
        test = test.loc[test["timestamp"] <= test_end]
    test = test.reset_index(drop=True)
    if len(train) == 0 or len(test) == 0:
        raise CliError("train or test window is empty")
    rows = []
    for kind in kinds:
        if kind not in KINDS:
            raise CliError(f"kind must be one of {KINDS}")
        scheme = _scheme(st, args)
        if kind == "s":
            # spatial-only fit conditions on the nearest observations in time
            scheme = ConditioningScheme(max_size=30, seed=scheme.seed,
                                        mode="K_NEAREST_TIME")
        model = two_step_fit(train, segments, kind, scheme, _optimizer(st, args),
                             _features(st, args), workers=_workers(st, args))
        for h in horizons:
            pred = forecast(model, segments, obs, test[["segment_id", "timestamp"]],
                            horizon_minutes=h, cond_window_minutes=window)
            rows.append({"kind": kind, "protocol": f"h{h:g}",
                         **score(pred, test)})
        try:
            pred = car_ab_predict(model, segments, test)
            rows.append({"kind": kind, "protocol": "carab", **score(pred, test)})
        except ValueError:
            pass
    _mark(outputs, args.out)
    pd.DataFrame(rows).to_csv(args.out, index=False)
    _sidecar(outputs, args.out, "crossval", st, _seed(st, args),
             {"observations": args.observations, "segments": args.segments},
             {"train_end": train_end.isoformat(), "n_train": int(len(train)),
              "n_test": int(len(test))})


def cmd_carab(args, st: Settings, outputs: list):
    model = _load_model(args.model)
    segments = load_segments(args.segments, require_covariates=True)
    obs = load_observations(args.observations)
    pred = car_ab_predict(model, segments, obs)
    _write_predictions(outputs, pred, args.out)
    _sidecar(outputs, args.out, "carab", st, _seed(st, args),
             {"model": args.model, "observations": args.observations,
              "segments": args.segments},
             {"model_hash": _file_hash(args.model), "scores": score(pred, obs)})


def cmd_sliding_window(args, st: Settings, outputs: list):
    obs = load_observations(args.observations)
    segments = load_segments(args.segments, require_covariates=True)
    kind = st.get("model", "kind", str, "st", args.kind)
    horizon = st.get("predict", "horizon_minutes", float, 15.0, args.horizon_minutes)
    fits = sliding_window_fit(obs, segments, kind, _scheme(st, args),
                              window_weeks=args.window_weeks,
                              config=_optimizer(st, args), feat=_features(st, args),
                              horizon_minutes=horizon, workers=_workers(st, args))
    rows = []
    for f in fits:
        row = {"week_start": f.week_start.isoformat(), "mspe_log": f.mspe_log,
               "n_eval": f.n_eval}
        row.update({c: getattr(f.model.params, c) for c in _PARAM_COLS})
        rows.append(row)
    _mark(outputs, args.out)
    pd.DataFrame(rows, columns=["week_start", "mspe_log", "n_eval", *_PARAM_COLS]
                 ).to_csv(args.out, index=False)
    _sidecar(outputs, args.out, "sliding-window", st, _seed(st, args),
             {"observations": args.observations, "segments": args.segments},
             {"window_weeks": args.window_weeks, "n_weeks": len(rows)})


def cmd_bootstrap(args, st: Settings, outputs: list):
    obs = load_observations(args.observations)
    segments = load_segments(args.segments, require_covariates=True)
    kind = st.get("model", "kind", str, "st", args.kind)
    params = bootstrap_theta(obs, segments, kind, _scheme(st, args),
                             _optimizer(st, args), _features(st, args),
                             window_weeks=args.window_weeks, reps=args.reps,
                             seed=_seed(st, args), workers=_workers(st, args))
    rows = [{"rep": i, **{c: getattr(p, c) for c in _PARAM_COLS}}
            for i, p in enumerate(params)]
    _mark(outputs, args.out)
    pd.DataFrame(rows).to_csv(args.out, index=False)
    _sidecar(outputs, args.out, "bootstrap", st, _seed(st, args),
             {"observations": args.observations, "segments": args.segments},
             {"reps": args.reps, "window_weeks": args.window_weeks})


def cmd_design_sim(args, st: Settings, outputs: list):
    model = _load_model(args.model)
    segments = load_segments(args.segments, require_covariates=True)
    archive_obs = load_observations(args.archive)
    from .features import segment_score_table
    seg_scores = segment_score_table(segments, model.standardization, model.basis)
    counts = _int_list(st.get("design", "counts", str, "1,2,3,5,8", args.counts))
    reps = st.get("design", "reps", int, 30, args.reps)
    n_targets = st.get("design", "n_targets", int, 2000, args.n_targets)
    tz = model.tz_offset_hours
    table = compare_networks(model.params, split_days(archive_obs, tz), segments,
                             counts, reps=reps, seed=_seed(st, args),
                             seg_scores=seg_scores, n_targets=n_targets,
                             tz_offset_hours=tz)
    _mark(outputs, args.out)
    table.to_csv(args.out, index=False)
    if args.summary_out:
        _mark(outputs, args.summary_out)
        summarize_networks(table).to_csv(args.summary_out, index=False)
    _sidecar(outputs, args.out, "design-sim", st, _seed(st, args),
             {"model": args.model, "segments": args.segments, "archive": args.archive},
             {"model_hash": _file_hash(args.model), "counts": counts, "reps": reps})


def cmd_lag_sim(args, st: Settings, outputs: list):
    cfg = LagSimConfig(
        thetas=tuple(_float_list(st.get("lagsim", "thetas", str, "0,0.9", args.thetas))),
        n_train=st.get("lagsim", "n_train", int, 10000, args.n_train),
        n_test=st.get("lagsim", "n_test", int, 10000, args.n_test),
        reps=st.get("lagsim", "reps", int, 1000, args.reps),
        fit_lags=tuple(_int_list(st.get("lagsim", "fit_lags", str, "1,2,5,10,20",
                                        args.fit_lags))),
        horizons=tuple(_int_list(st.get("lagsim", "horizons", str, "1,5,10,20",
                                        args.horizons))),
        seed=_seed(st, args), intercept=bool(args.intercept))
    table = relative_mse_table(cfg)
    _mark(outputs, args.out)
    table.to_csv(args.out, index=False)
    _sidecar(outputs, args.out, "lag-sim", st, cfg.seed,
             {}, {"reps": cfg.reps, "thetas": list(cfg.thetas)})


def cmd_synth(args, st: Settings, outputs: list):
    os.makedirs(args.outdir, exist_ok=True)
    center, cov, samples = build_synth(
        seed=_seed(st, args),
        days=st.get("synth", "days", int, 2, args.days),
        cars=st.get("synth", "cars", int, 2, args.cars),
        drive_hours=st.get("synth", "drive_hours", float, 3.0, args.drive_hours),
        step_seconds=st.get("synth", "step_seconds", float, 15.0, args.step_seconds))
    paths = {n: os.path.join(args.outdir, f"{n}.csv")
             for n in ("centerlines", "covariates", "samples")}
    for p in paths.values():
        _mark(outputs, p)
    center.to_csv(paths["centerlines"], index=False)
    cov.to_csv(paths["covariates"], index=False)
    out = samples.copy()
    out["timestamp"] = out["timestamp"].map(lambda t: t.isoformat())
    out.to_csv(paths["samples"], index=False)
    _sidecar(outputs, paths["samples"], "synth", st, _seed(st, args), {},
             {"n_samples": int(len(samples))})


# ---------------------------------------------------------------------------
# parser


def _common(sp):
    sp.add_argument("--config", help="INI config file")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)


def _scheme_flags(sp):
    sp.add_argument("--lag-l", type=float)
    sp.add_argument("--width-m", type=float)
    sp.add_argument("--max-size", type=int)
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--closed-left", action="store_const", const=True)


def _fit_flags(sp):
    sp.add_argument("--max-iters", type=int)
    sp.add_argument("--rel-tol", type=float)
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--k-computed", type=int)
    sp.add_argument("--k-retained", type=int)
    sp.add_argument("--tz-offset-hours", type=float)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mobilekrig",
        description="Spatiotemporal kriging of mobile air-quality streams")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("segments", help="segmentize street centerlines")
    sp.add_argument("--centerlines", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--interval-m", type=float)
    sp.add_argument("--covariates", help="per-segment covariate CSV to merge")
    _common(sp)

    sp = sub.add_parser("snap", help="snap raw samples to segments")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-snap-m", type=float)
    sp.add_argument("--floor-ppb", type=float)
    _common(sp)

    sp = sub.add_parser("reduce", help="reduce observations to block medians")
    sp.add_argument("--observations", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--block-seconds", type=int)
    _common(sp)

    sp = sub.add_parser("fit", help="two-step model fit")
    sp.add_argument("--observations", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--kind", choices=KINDS)
    _scheme_flags(sp)
    _fit_flags(sp)
    _common(sp)

    sp = sub.add_parser("forecast", help="h-minute-ahead prediction")
    sp.add_argument("--model", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--stream", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--horizon-minutes", type=float)
    sp.add_argument("--cond-window-minutes", type=float)
    sp.add_argument("--offset-minutes", type=float)
    sp.add_argument("--targets")
    sp.add_argument("--at")
    _common(sp)

    sp = sub.add_parser("interpolate", help="spatial interpolation from an archive")
    sp.add_argument("--model", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--archive", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--k", type=int)
    sp.add_argument("--targets")
    sp.add_argument("--at")
    _common(sp)

    sp = sub.add_parser("crossval", help="train/test forecast scoring per kind")
    sp.add_argument("--observations", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--train-end", required=True)
    sp.add_argument("--test-end")
    sp.add_argument("--kinds", help="comma list of model kinds")
    sp.add_argument("--horizons", help="comma list of minutes")
    sp.add_argument("--cond-window-minutes", type=float)
    _scheme_flags(sp)
    _fit_flags(sp)
    _common(sp)

    sp = sub.add_parser("carab", help="predict each car from the other cars")
    sp.add_argument("--model", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--observations", required=True)
    sp.add_argument("--out", required=True)
    _common(sp)

    sp = sub.add_parser("sliding-window", help="weekly refits with forecast scoring")
    sp.add_argument("--observations", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window-weeks", type=int, required=True)
    sp.add_argument("--kind", choices=KINDS)
    sp.add_argument("--horizon-minutes", type=float)
    _scheme_flags(sp)
    _fit_flags(sp)
    _common(sp)

    sp = sub.add_parser("bootstrap", help="day-resampling bootstrap of theta")
    sp.add_argument("--observations", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window-weeks", type=int, default=21)
    sp.add_argument("--reps", type=int, default=15)
    sp.add_argument("--kind", choices=KINDS)
    _scheme_flags(sp)
    _fit_flags(sp)
    _common(sp)

    sp = sub.add_parser("design-sim", help="mobile vs fixed network comparison")
    sp.add_argument("--model", required=True)
    sp.add_argument("--segments", required=True)
    sp.add_argument("--archive", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--summary-out")
    sp.add_argument("--counts")
    sp.add_argument("--reps", type=int)
    sp.add_argument("--n-targets", type=int)
    _common(sp)

    sp = sub.add_parser("lag-sim", help="lagged-regression simulation table")
    sp.add_argument("--out", required=True)
    sp.add_argument("--thetas")
    sp.add_argument("--n-train", type=int)
    sp.add_argument("--n-test", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--fit-lags")
    sp.add_argument("--horizons")
    sp.add_argument("--intercept", action="store_true")
    _common(sp)

    sp = sub.add_parser("synth", help="generate a synthetic demo dataset")
    sp.add_argument("--outdir", required=True)
    sp.add_argument("--days", type=int)
    sp.add_argument("--cars", type=int)
    sp.add_argument("--drive-hours", type=float)
    sp.add_argument("--step-seconds", type=float)
    _common(sp)

    return p


_HANDLERS = {
    "segments": cmd_segments, "snap": cmd_snap, "reduce": cmd_reduce,
    "fit": cmd_fit, "forecast": cmd_forecast, "interpolate": cmd_interpolate,
    "crossval": cmd_crossval, "carab": cmd_carab,
    "sliding-window": cmd_sliding_window, "bootstrap": cmd_bootstrap,
    "design-sim": cmd_design_sim, "lag-sim": cmd_lag_sim, "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    outputs: list = []
    try:
        cfg = _read_config(args.config) if args.config else {}
        _HANDLERS[args.command](args, Settings(cfg), outputs)
    except Exception as exc:
        for path in outputs:
            if os.path.exists(path):
                try:
                    os.remove(path)
                except OSError:
                    pass
        msg = str(exc).splitlines()[0] if str(exc) else exc.__class__.__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
