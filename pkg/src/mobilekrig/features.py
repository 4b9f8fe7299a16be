"""Covariate standardization, principal components, and design vectors.

The mean design vector for an observation at segment s and time t is

    [1, pc_1..pc_K, cos(2*pi*h/24), sin(2*pi*h/24), cos(2*pi*h/12),
     sin(2*pi*h/12), pc_i * harmonic_j for all i, j]

with h the local hour of day, giving p = 1 + K + 4 + 4K entries (40 at the
default K = 7).  The covariance covariate vector is the plain score vector
pc_1..pc_K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .ingest import COVARIATE_COLUMNS

DEFAULT_K_COMPUTED = 13
DEFAULT_K_RETAINED = 7
DEFAULT_TZ_OFFSET_HOURS = -8.0  # Oakland; fixed offset, no DST


@dataclass
class FeatureConfig:
    k_computed: int = DEFAULT_K_COMPUTED
    k_retained: int = DEFAULT_K_RETAINED
    tz_offset_hours: float = DEFAULT_TZ_OFFSET_HOURS


@dataclass
class Standardization:
    """Per-column means and sample standard deviations of the training covariates."""

    means: np.ndarray
    sds: np.ndarray
    columns: list[str]

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "sds": self.sds.tolist(),
                "columns": list(self.columns)}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(np.asarray(d["means"], dtype=float),
                   np.asarray(d["sds"], dtype=float), list(d["columns"]))


@dataclass
class PcaBasis:
    """Orthonormal loadings (d x k_computed) with explained-variance fractions."""

    loadings: np.ndarray
    explained: np.ndarray
    k_computed: int
    k_retained: int

    def to_dict(self) -> dict:
        return {"loadings": self.loadings.tolist(), "explained": self.explained.tolist(),
                "k_computed": self.k_computed, "k_retained": self.k_retained}

    @classmethod
    def from_dict(cls, d: dict) -> "PcaBasis":
        return cls(np.asarray(d["loadings"], dtype=float),
                   np.asarray(d["explained"], dtype=float),
                   int(d["k_computed"]), int(d["k_retained"]))


def fit_standardization(segments: pd.DataFrame, columns=None) -> Standardization:
    """Column means and sample sds (divisor n-1) of the covariate table."""
    columns = list(columns) if columns is not None else list(COVARIATE_COLUMNS)
    if len(segments) < 2:
        raise ValueError("need at least 2 segments to standardize")
    vals = segments[columns].to_numpy(dtype=float)
    means = vals.mean(axis=0)
    sds = vals.std(axis=0, ddof=1)
    bad = np.nonzero(sds <= 0)[0]
    if bad.size:
        raise ValueError(f"constant covariate column(s): {[columns[i] for i in bad]}")
    return Standardization(means=means, sds=sds, columns=columns)


def apply_standardization(segments: pd.DataFrame, std: Standardization) -> np.ndarray:
    vals = segments[std.columns].to_numpy(dtype=float)
    return (vals - std.means) / std.sds


def fit_pca(standardized: np.ndarray, k_computed: int = DEFAULT_K_COMPUTED,
            k_retained: int = DEFAULT_K_RETAINED) -> PcaBasis:
    """Top-k eigenvectors of the sample covariance of the standardized table.

    Deterministic sign convention: each loading's largest-magnitude entry is
    positive, so results are identical across runs and platforms.
    """
    z = np.asarray(standardized, dtype=float)
    d = z.shape[1]
    if k_computed > d:
        raise ValueError(f"k_computed={k_computed} exceeds {d} covariate columns")
    if not 1 <= k_retained <= k_computed:
        raise ValueError("need 1 <= k_retained <= k_computed")
    cov = np.cov(z, rowvar=False, ddof=1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    signs = np.sign(eigvecs[np.argmax(np.abs(eigvecs), axis=0), np.arange(d)])
    signs[signs == 0] = 1.0
    eigvecs = eigvecs * signs
    explained = eigvals / eigvals.sum()
    return PcaBasis(loadings=eigvecs[:, :k_computed], explained=explained[:k_computed],
                    k_computed=k_computed, k_retained=k_retained)


def pca_scores(basis: PcaBasis, standardized: np.ndarray, k: int | None = None) -> np.ndarray:
    """(n, k) principal-component scores; k defaults to k_retained."""
    k = basis.k_retained if k is None else k
    return np.asarray(standardized, dtype=float) @ basis.loadings[:, :k]


def pc_tstats(scores: np.ndarray, y: np.ndarray) -> np.ndarray:
    """t-statistics of each score column in a least-squares fit of y (with intercept)."""
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = scores.shape
    if y.shape != (n,):
        raise ValueError("scores and y are not aligned")
    if n <= k + 1:
        raise ValueError(f"need more than {k + 1} observations for {k} PCs")
    x = np.column_stack([np.ones(n), scores])
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    dof = n - (k + 1)
    sigma2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(x.T @ x)
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    return (beta / se)[1:]


def select_pcs(scores: np.ndarray, y: np.ndarray, k_retained: int = DEFAULT_K_RETAINED) -> int:
    """Number of leading PCs to keep (fixed by configuration, default 7).

    The least-squares diagnostics backing the choice are available via
    :func:`pc_tstats`; this call validates that they are computable.
    """
    scores = np.asarray(scores, dtype=float)
    if not 1 <= k_retained <= scores.shape[1]:
        raise ValueError(f"k_retained={k_retained} out of range for {scores.shape[1]} PCs")
    pc_tstats(scores, y)
    return int(k_retained)


_HARMONIC_PERIODS = (24.0, 12.0)


def diurnal_harmonics(hours) -> np.ndarray:
    """(n, 4) harmonic block [cos24, sin24, cos12, sin12] for local hours of day."""
    h = np.atleast_1d(np.asarray(hours, dtype=float))
    cols = []
    for period in _HARMONIC_PERIODS:
        ang = 2.0 * np.pi * h / period
        cols.extend([np.cos(ang), np.sin(ang)])
    return np.column_stack(cols)


def design_matrix(hours: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Stack mean-design rows: intercept, scores, harmonics, score x harmonic products."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    n, k = scores.shape
    harm = diurnal_harmonics(hours)
    inter = (scores[:, :, None] * harm[:, None, :]).reshape(n, 4 * k)
    return np.column_stack([np.ones(n), scores, harm, inter])


def build_design_row(pcs: np.ndarray, hour: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean design vector and covariance covariate vector for one point."""
    pcs = np.asarray(pcs, dtype=float).ravel()
    x_mean = design_matrix(np.array([hour]), pcs[None, :])[0]
    return x_mean, pcs.copy()


def design_dim(k_retained: int) -> int:
    return 1 + k_retained + 4 + 4 * k_retained


def local_hour(timestamps: pd.Series, tz_offset_hours: float) -> np.ndarray:
    """Local hour of day in [0, 24) from UTC timestamps and a fixed offset."""
    sec = timestamps.astype("int64").to_numpy() / 1e9
    return (sec / 3600.0 + tz_offset_hours) % 24.0


def segment_score_table(segments: pd.DataFrame, std: Standardization,
                        basis: PcaBasis) -> pd.DataFrame:
    """Retained-PC scores per segment, indexed by segment_id."""
    z = apply_standardization(segments, std)
    scores = pca_scores(basis, z)
    out = pd.DataFrame(scores, columns=[f"pc{i+1}" for i in range(scores.shape[1])])
    out.index = pd.Index(segments["segment_id"].to_numpy(), name="segment_id")
    return out


def observation_features(obs: pd.DataFrame, seg_scores: pd.DataFrame,
                         tz_offset_hours: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean design matrix X (n, p) and covariance covariates (n, K) for observations."""
    missing = set(obs["segment_id"]) - set(seg_scores.index)
    if missing:
        raise ValueError(f"observations reference unknown segment ids: {sorted(missing)[:5]}")
    scores = seg_scores.loc[obs["segment_id"].to_numpy()].to_numpy()
    hours = local_hour(obs["timestamp"], tz_offset_hours)
    return design_matrix(hours, scores), scores
