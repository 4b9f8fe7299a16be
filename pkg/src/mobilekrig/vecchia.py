"""Lagged conditioning sets and the Vecchia composite log-likelihood.

Each ordered residual contributes the log-density of a univariate conditional
normal given the residuals in its conditioning set.  With complete sets
{0..i-1} the sum is the exact dense Gaussian log-likelihood; lagged windows
trade exactness for speed and for targeting correlation at a chosen lag.

Terms are evaluated in batches grouped by conditioning-set size and written
into a preallocated array that is summed in index order, so results are
bit-identical no matter how many workers participate.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .covariance import CovParams, PointSet, kernel_from_dists

MODES = ("LAG_WINDOW", "K_NEAREST_TIME")
DEFAULT_MAX_SIZE = 100

# factorization jitter ladder: none, then 1e-8 escalated x10 up to three times
_JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5)
# conditional variances below this fraction of the marginal variance are
# treated as degenerate (duplicated points without a nugget)
_DEGENERATE_REL = 1e-8
# boundary comparisons happen in minutes rounded here, so that times that are
# exactly on a window edge up to float error stay excluded
_ROUND_DECIMALS = 9


@dataclass
class ConditioningScheme:
    """Which earlier observations each residual conditions on.

    LAG_WINDOW takes indices j < i with t_i - t_j in the open interval
    (lag_l, lag_l + width_m) minutes; sets larger than max_size are subsampled
    uniformly without replacement by a counter-based generator keyed by
    (seed, i), so every set is reproducible in isolation.  closed_left admits
    the left boundary itself (with lag_l = 0 that means simultaneous
    observations from other cars).  K_NEAREST_TIME takes the max_size most
    recent observations regardless of gap.
    """

    lag_l: float = 0.0
    width_m: float = 60.0
    max_size: int = DEFAULT_MAX_SIZE
    seed: int = 0
    mode: str = "LAG_WINDOW"
    closed_left: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lag_l < 0:
            raise ValueError("lag_l must be >= 0 minutes")
        if self.width_m <= 0:
            raise ValueError("width_m must be > 0 minutes")
        if self.max_size < 1:
            raise ValueError("max_size must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {"lag_l": self.lag_l, "width_m": self.width_m, "max_size": self.max_size,
                "seed": int(self.seed), "mode": self.mode, "closed_left": self.closed_left}

    @classmethod
    def from_dict(cls, d: dict) -> "ConditioningScheme":
        return cls(lag_l=float(d["lag_l"]), width_m=float(d["width_m"]),
                   max_size=int(d["max_size"]), seed=int(d["seed"]),
                   mode=str(d["mode"]), closed_left=bool(d.get("closed_left", False)))


class ResidualSeries:
    """Time-ordered spacetime points with their regression residuals."""

    __slots__ = ("points", "resid")

    def __init__(self, points: PointSet, resid):
        resid = np.ascontiguousarray(resid, dtype=float)
        if resid.ndim != 1 or len(points) != resid.shape[0]:
            raise ValueError("points and residuals are not aligned")
        if np.any(np.diff(points.t) < 0):
            raise ValueError("series must be ordered by non-decreasing time")
        if not np.all(np.isfinite(resid)):
            raise ValueError("non-finite residuals")
        self.points = points
        self.resid = resid

    def __len__(self) -> int:
        return self.resid.shape[0]


def _subsample(idx: np.ndarray, k: int, seed: int, i: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, i], dtype=np.uint64)))
    pick = gen.choice(idx.shape[0], size=k, replace=False)
    return np.sort(idx[pick])


def build_conditioning_sets(series: ResidualSeries, scheme: ConditioningScheme) -> list:
    """Per-observation index arrays of strictly earlier conditioning points."""
    t = series.points.t
    n = len(series)
    sets: list[np.ndarray] = []
    if scheme.mode == "K_NEAREST_TIME":
        for i in range(n):
            sets.append(np.arange(max(0, i - scheme.max_size), i, dtype=np.int64))
        return sets
    lo_h = scheme.lag_l / 60.0
    hi_h = (scheme.lag_l + scheme.width_m) / 60.0
    for i in range(n):
        left = np.searchsorted(t, t[i] - hi_h, side="left")
        right = min(np.searchsorted(t, t[i] - lo_h, side="right"), i)
        cand = np.arange(left, right, dtype=np.int64)
        if cand.size:
            dtm = np.round((t[i] - t[cand]) * 60.0, _ROUND_DECIMALS)
            in_left = dtm >= scheme.lag_l if scheme.closed_left else dtm > scheme.lag_l
            cand = cand[in_left & (dtm < scheme.lag_l + scheme.width_m)]
        if cand.size > scheme.max_size:
            cand = _subsample(cand, scheme.max_size, int(scheme.seed), i)
        sets.append(cand)
    return sets


def _need_x(params: CovParams, points: PointSet) -> bool:
    if params.kind == "stx":
        if points.x is None:
            raise ValueError("stx covariance requires covariate scores on every point")
        return True
    return params.kind == "xonly" and points.x is not None


def _marginal_term(params: CovParams, e: np.ndarray) -> np.ndarray:
    v = params.sigma2 + params.tau2
    return -0.5 * (np.log(2.0 * np.pi * v) + e * e / v)


def _chol_with_jitter(mat: np.ndarray, i: int) -> np.ndarray:
    for jit in _JITTERS:
        try:
            m = mat if jit == 0.0 else mat + jit * np.eye(mat.shape[0])
            return np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(
        f"conditioning covariance at index {i} not factorizable after jitter {_JITTERS[-1]}")


def conditional_loglik_term(params: CovParams, series: ResidualSeries, i: int,
                            n_i: np.ndarray) -> float:
    """Log-density of residual i given its conditioning residuals.

    Empty set: marginal N(0, sigma2 + tau2).  Factorization failures escalate
    a diagonal jitter; conditional variances indistinguishable from zero are
    clamped and reported as degenerate.
    """
    n_i = np.asarray(n_i, dtype=np.int64)
    if n_i.size == 0:
        return float(_marginal_term(params, series.resid[i]))
    if np.any(n_i >= i):
        raise ValueError(f"conditioning set of {i} contains non-earlier index")
    sub = series.points.subset(n_i)
    tgt = series.points.subset(np.array([i]))
    need_x = _need_x(params, series.points)
    dx = None
    d12 = tgt.coords[:, None, :] - sub.coords[None, :, :]
    ds2_12 = d12[..., 0] ** 2 + d12[..., 1] ** 2
    dt2_12 = (tgt.t[:, None] - sub.t[None, :]) ** 2
    d22 = sub.coords[:, None, :] - sub.coords[None, :, :]
    ds2_22 = d22[..., 0] ** 2 + d22[..., 1] ** 2
    dt2_22 = (sub.t[:, None] - sub.t[None, :]) ** 2
    dx2_12 = dx2_22 = None
    if need_x:
        dxv = tgt.x[:, None, :] - sub.x[None, :, :]
        dx2_12 = np.sum(dxv * dxv, axis=-1)
        dxm = sub.x[:, None, :] - sub.x[None, :, :]
        dx2_22 = np.sum(dxm * dxm, axis=-1)
    sig12 = kernel_from_dists(params, ds2_12, dt2_12, dx2_12)[0]
    sig22 = kernel_from_dists(params, ds2_22, dt2_22, dx2_22)
    sig22[np.diag_indices_from(sig22)] += params.tau2
    chol = _chol_with_jitter(sig22, i)
    alpha = np.linalg.solve(chol, sig12)
    w = np.linalg.solve(chol, series.resid[n_i])
    mean = float(alpha @ w)
    var = params.sigma2 + params.tau2 - float(alpha @ alpha)
    floor = _DEGENERATE_REL * (params.sigma2 + params.tau2)
    if var < floor:
        warnings.warn(f"degenerate conditional variance at index {i}; clamped",
                      RuntimeWarning, stacklevel=2)
        var = floor
    e = series.resid[i] - mean
    return float(-0.5 * (np.log(2.0 * np.pi * var) + e * e / var))


class CompositeWorkspace:
    """Frozen conditioning geometry for repeated likelihood evaluations.

    Squared component distances depend only on the points and the sets, so
    they are stacked per set-size group once; each evaluation then reduces to
    kernel transforms plus batched Cholesky factorizations.  Groups are split
    into chunks to bound temporary memory.
    """

    def __init__(self, series: ResidualSeries, sets, chunk_elems: int = 1 << 22):
        if len(sets) != len(series):
            raise ValueError("one conditioning set per observation required")
        self.series = series
        self.n = len(series)
        self.has_x = series.points.x is not None
        pts = series.points
        resid = series.resid
        sizes = np.array([len(s) for s in sets], dtype=np.int64)
        self.empty_idx = np.nonzero(sizes == 0)[0]
        self.chunks = []
        for k in np.unique(sizes[sizes > 0]):
            members = np.nonzero(sizes == k)[0]
            per = max(1, int(chunk_elems // (k * k)))
            for s in range(0, members.size, per):
                idx = members[s:s + per]
                nbr = np.stack([np.asarray(sets[i], dtype=np.int64) for i in idx])
                if np.any(nbr >= idx[:, None]):
                    raise ValueError("conditioning sets must contain only earlier indices")
                self.chunks.append(self._prep_chunk(pts, resid, idx, nbr))

    def _prep_chunk(self, pts: PointSet, resid: np.ndarray, idx: np.ndarray,
                    nbr: np.ndarray) -> dict:
        ci = pts.coords[idx]
        cn = pts.coords[nbr]
        ti = pts.t[idx]
        tn = pts.t[nbr]
        d12 = ci[:, None, :] - cn
        d22 = cn[:, :, None, :] - cn[:, None, :, :]
        chunk = {
            "idx": idx,
            "eN": resid[nbr],
            "ei": resid[idx],
            "ds2_12": d12[..., 0] ** 2 + d12[..., 1] ** 2,
            "dt2_12": (ti[:, None] - tn) ** 2,
            "ds2_22": d22[..., 0] ** 2 + d22[..., 1] ** 2,
            "dt2_22": (tn[:, :, None] - tn[:, None, :]) ** 2,
            "dx2_12": None, "dx2_22": None,
        }
        if self.has_x:
            xi = pts.x[idx]
            xn = pts.x[nbr]
            v12 = xi[:, None, :] - xn
            v22 = xn[:, :, None, :] - xn[:, None, :, :]
            chunk["dx2_12"] = np.sum(v12 * v12, axis=-1)
            chunk["dx2_22"] = np.sum(v22 * v22, axis=-1)
        return chunk

    def _eval_chunk(self, params: CovParams, chunk: dict, terms: np.ndarray,
                    need_x: bool) -> int:
        dx12 = chunk["dx2_12"] if need_x else None
        dx22 = chunk["dx2_22"] if need_x else None
        sig12 = kernel_from_dists(params, chunk["ds2_12"], chunk["dt2_12"], dx12)
        sig22 = kernel_from_dists(params, chunk["ds2_22"], chunk["dt2_22"], dx22)
        k = sig22.shape[-1]
        step = k + 1
        sig22.reshape(sig22.shape[0], -1)[:, ::step] += params.tau2
        try:
            chol = np.linalg.cholesky(sig22)
        except np.linalg.LinAlgError:
            return self._eval_fallback(params, chunk, terms)
        rhs = np.stack([sig12, chunk["eN"]], axis=-1)
        sol = np.linalg.solve(chol, rhs)
        alpha = sol[..., 0]
        w = sol[..., 1]
        mean = np.sum(alpha * w, axis=1)
        var = params.sigma2 + params.tau2 - np.sum(alpha * alpha, axis=1)
        floor = _DEGENERATE_REL * (params.sigma2 + params.tau2)
        n_clamped = int(np.count_nonzero(var < floor))
        if n_clamped:
            var = np.maximum(var, floor)
        e = chunk["ei"] - mean
        terms[chunk["idx"]] = -0.5 * (np.log(2.0 * np.pi * var) + e * e / var)
        return n_clamped

    def _eval_fallback(self, params: CovParams, chunk: dict, terms: np.ndarray) -> int:
        # at least one matrix in the chunk needs jitter: redo items one by one
        n_clamped = 0
        for row, i in enumerate(chunk["idx"]):
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                terms[i] = self._scalar_item(params, chunk, row, int(i))
            n_clamped += sum(1 for c in caught if issubclass(c.category, RuntimeWarning))
        return n_clamped

    def _scalar_item(self, params: CovParams, chunk: dict, row: int, i: int) -> float:
        need_x = chunk["dx2_12"] is not None and params.kind in ("stx", "xonly")
        dx12 = chunk["dx2_12"][row] if need_x else None
        dx22 = chunk["dx2_22"][row] if need_x else None
        sig12 = kernel_from_dists(params, chunk["ds2_12"][row], chunk["dt2_12"][row], dx12)
        sig22 = kernel_from_dists(params, chunk["ds2_22"][row], chunk["dt2_22"][row], dx22)
        sig22[np.diag_indices_from(sig22)] += params.tau2
        chol = _chol_with_jitter(sig22, i)
        alpha = np.linalg.solve(chol, sig12)
        w = np.linalg.solve(chol, chunk["eN"][row])
        mean = float(alpha @ w)
        var = params.sigma2 + params.tau2 - float(alpha @ alpha)
        floor = _DEGENERATE_REL * (params.sigma2 + params.tau2)
        if var < floor:
            warnings.warn(f"degenerate conditional variance at index {i}; clamped",
                          RuntimeWarning, stacklevel=2)
            var = floor
        e = chunk["ei"][row] - mean
        return float(-0.5 * (np.log(2.0 * np.pi * var) + e * e / var))

    def loglik(self, params: CovParams, workers: int = 1) -> float:
        """Composite log-likelihood; identical for any worker count."""
        need_x = _need_x(params, self.series.points)
        terms = np.empty(self.n, dtype=float)
        terms[self.empty_idx] = _marginal_term(params, self.series.resid[self.empty_idx])
        if workers <= 1 or len(self.chunks) <= 1:
            n_clamped = sum(self._eval_chunk(params, c, terms, need_x) for c in self.chunks)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(self._eval_chunk, params, c, terms, need_x)
                        for c in self.chunks]
                n_clamped = sum(f.result() for f in futs)
        if n_clamped:
            warnings.warn(f"{n_clamped} degenerate conditional variance(s) clamped",
                          RuntimeWarning, stacklevel=2)
        return float(np.sum(terms))


def composite_loglik(params: CovParams, series: ResidualSeries, sets,
                     workers: int = 1) -> float:
    """Sum of conditional log-density terms over the whole series."""
    return CompositeWorkspace(series, sets).loglik(params, workers=workers)
