"""Lagged-regression forecasting study on AR(1)/ARMA(1,2) series.

Simulates Y_t = 0.9 Y_{t-1} + theta Z_{t-1} + theta Z_{t-2} + Z_t, fits
no-intercept regressions of Y_t on Y_{t-l}, forecasts h steps ahead with the
power rule b_l^(h/l) Y_{t-h}, and tabulates test MSE relative to the l = 1
baseline.  theta = 0 collapses to an AR(1), where every lag choice performs
alike; theta = 0.9 rewards fitting at the forecast horizon.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.signal import lfilter

BURN_IN = 500


def model_name(theta: float) -> str:
    if theta == 0.0:
        return "ar1"
    if theta == 0.9:
        return "arma12"
    return f"arma12_{theta:g}"


@dataclass
class LagSimConfig:
    thetas: tuple = (0.0, 0.9)
    n_train: int = 10000
    n_test: int = 10000
    reps: int = 1000
    fit_lags: tuple = (1, 2, 5, 10, 20)
    horizons: tuple = (1, 5, 10, 20)
    seed: int = 0
    intercept: bool = False

    def __post_init__(self):
        if min(self.n_train, self.n_test, self.reps) <= 0:
            raise ValueError("n_train, n_test and reps must be positive")
        if 1 not in self.fit_lags:
            raise ValueError("fit_lags must include the lag-1 baseline")
        if any(l < 1 for l in self.fit_lags) or any(h < 1 for h in self.horizons):
            raise ValueError("lags and horizons must be >= 1")


def simulate_series(theta: float, n: int, seed: int, z: np.ndarray | None = None) -> np.ndarray:
    """n values of the recursion after a discarded 500-step burn-in.

    z injects the innovation sequence (length n + burn-in) for tests;
    otherwise innovations are standard normal from a counter-based generator.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if z is None:
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
        z = gen.standard_normal(n + BURN_IN)
    else:
        z = np.asarray(z, dtype=float)
        if z.shape != (n + BURN_IN,):
            raise ValueError(f"injected innovations must have length {n + BURN_IN}")
    y = lfilter([1.0, theta, theta], [1.0, -0.9], z)
    return y[BURN_IN:]


def fit_lag(series: np.ndarray, l: int, intercept: bool = False) -> float:
    """Slope of the regression of Y_t on Y_{t-l} (no intercept by default)."""
    y = np.asarray(series, dtype=float)
    if y.shape[0] <= l + 1:
        raise ValueError(f"series of length {y.shape[0]} too short for lag {l}")
    cur, lag = y[l:], y[:-l]
    if intercept:
        den = float(np.sum((lag - lag.mean()) ** 2))
        if den == 0.0:
            raise ZeroDivisionError(f"lag-{l} regressor has zero variance")
        return float(np.sum((lag - lag.mean()) * (cur - cur.mean())) / den)
    den = float(lag @ lag)
    if den == 0.0:
        raise ZeroDivisionError(f"lag-{l} regressor is identically zero")
    return float((cur @ lag) / den)


def predict_lag(b_hat: float, l: int, h: int, y_lag_h) -> np.ndarray:
    """Forecast h steps ahead from a lag-l fit: b_hat^(h/l) * Y_{t-h}."""
    if l < 1 or h < 1:
        raise ValueError("l and h must be >= 1")
    exponent = h / l
    if b_hat <= 0 and exponent != int(exponent):
        raise ValueError(f"b_hat={b_hat} <= 0 cannot be raised to fractional power {h}/{l}")
    return float(b_hat) ** exponent * np.asarray(y_lag_h, dtype=float)


def _rep_mse(theta: float, cfg: LagSimConfig, seed: int) -> np.ndarray:
    """(n_horizons, n_lags) test MSE for one replicate; NaN marks failed cells."""
    n = cfg.n_train + cfg.n_test
    y = simulate_series(theta, n, seed)
    train = y[:cfg.n_train]
    test_idx = np.arange(cfg.n_train, n)
    out = np.empty((len(cfg.horizons), len(cfg.fit_lags)))
    for j, l in enumerate(cfg.fit_lags):
        b = fit_lag(train, l, intercept=cfg.intercept)
        for i, h in enumerate(cfg.horizons):
            try:
                err = y[test_idx] - predict_lag(b, l, h, y[test_idx - h])
                out[i, j] = float(np.mean(err * err))
            except ValueError:
                out[i, j] = np.nan
    return out


def relative_mse_table(cfg: LagSimConfig | None = None) -> pd.DataFrame:
    """Rep-averaged test MSE per (model, h, l), divided by the same-row l=1 cell."""
    cfg = cfg or LagSimConfig()
    rows = []
    base_col = cfg.fit_lags.index(1)
    for mi, theta in enumerate(cfg.thetas):
        acc = np.zeros((cfg.reps, len(cfg.horizons), len(cfg.fit_lags)))
        for r in range(cfg.reps):
            child = np.random.SeedSequence([cfg.seed, mi, r]).generate_state(1)[0]
            acc[r] = _rep_mse(theta, cfg, int(child))
        if np.isnan(acc).any():
            warnings.warn(f"{int(np.isnan(acc).sum())} failed prediction cell(s) "
                          f"for theta={theta}", RuntimeWarning, stacklevel=2)
        mse = np.nanmean(acc, axis=0)
        rel = mse / mse[:, base_col][:, None]
        name = model_name(theta)
        for i, h in enumerate(cfg.horizons):
            for j, l in enumerate(cfg.fit_lags):
                rows.append({"model": name, "h": h, "l": l, "rel_mse": rel[i, j]})
    return pd.DataFrame(rows, columns=["model", "h", "l", "rel_mse"])
