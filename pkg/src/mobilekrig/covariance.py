"""Covariance kernels for the four dependence structures.

All four model variants share one parameter vector: a variance ``sigma2``,
a nugget ``tau2`` and range parameters in space (km), time (hours) and
standardized-covariate space.  The kernels are:

* ``xonly``  -- independent errors: zero covariance between distinct points.
* ``s``      -- spatial exponential: sigma2 * exp(-d_s / theta_s).
* ``st``     -- anisotropic space-time exponential:
  sigma2 * exp(-sqrt(d_s^2/theta_s^2 + d_t^2/theta_t^2)).
* ``stx``    -- space, time and covariate-space exponential, adding
  d_x^2/theta_x^2 under the root.

The nugget is never part of the kernel value; callers add ``tau2`` on
diagonals of observation covariances (``cov_matrix(..., add_nugget=True)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

KINDS = ("xonly", "s", "st", "stx")


@dataclass
class CovParams:
    """Covariance parameters; ranges for components inactive under `kind` are ignored."""

    kind: str
    sigma2: float = 1.0
    tau2: float = 0.0
    theta_s: float = 1.0
    theta_t: float = 1.0
    theta_x: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.sigma2) or self.sigma2 < 0:
            raise ValueError(f"sigma2 must be finite and >= 0, got {self.sigma2}")
        if not np.isfinite(self.tau2) or self.tau2 < 0:
            raise ValueError(f"tau2 must be finite and >= 0, got {self.tau2}")
        for name in self.active_ranges():
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be finite and > 0 for kind {self.kind!r}, got {val}")

    def active_ranges(self) -> tuple[str, ...]:
        return {
            "xonly": (),
            "s": ("theta_s",),
            "st": ("theta_s", "theta_t"),
            "stx": ("theta_s", "theta_t", "theta_x"),
        }[self.kind]

    @property
    def x_active(self) -> bool:
        return self.kind == "stx"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sigma2": self.sigma2,
            "tau2": self.tau2,
            "theta_s": self.theta_s,
            "theta_t": self.theta_t,
            "theta_x": self.theta_x,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CovParams":
        return cls(**d)


@dataclass(frozen=True)
class SpacetimePoint:
    """One prediction or observation support point: planar km, hours, covariate scores."""

    east_km: float
    north_km: float
    t_hours: float
    x_cov: np.ndarray | None = None


class PointSet:
    """Column-oriented set of space-time(-covariate) points.

    coords : (n, 2) planar easting/northing in km
    t      : (n,) time in hours (continuous)
    x      : (n, K) standardized covariate scores, or None
    """

    __slots__ = ("coords", "t", "x")

    def __init__(self, coords: np.ndarray, t: np.ndarray, x: np.ndarray | None = None):
        coords = np.asarray(coords, dtype=float)
        t = np.asarray(t, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must be (n, 2), got {coords.shape}")
        if t.shape != (coords.shape[0],):
            raise ValueError("t must be (n,) aligned with coords")
        if x is not None:
            x = np.asarray(x, dtype=float)
            if x.ndim != 2 or x.shape[0] != coords.shape[0]:
                raise ValueError("x must be (n, K) aligned with coords")
        self.coords = coords
        self.t = t
        self.x = x

    def __len__(self) -> int:
        return self.coords.shape[0]

    def subset(self, idx) -> "PointSet":
        return PointSet(
            self.coords[idx],
            self.t[idx],
            None if self.x is None else self.x[idx],
        )

    @classmethod
    def from_points(cls, points: Sequence[SpacetimePoint]) -> "PointSet":
        coords = np.array([[p.east_km, p.north_km] for p in points], dtype=float)
        t = np.array([p.t_hours for p in points], dtype=float)
        if points and points[0].x_cov is not None:
            x = np.array([np.asarray(p.x_cov, dtype=float) for p in points])
        else:
            x = None
        return cls(coords, t, x)


def _as_pointset(points) -> PointSet:
    if isinstance(points, PointSet):
        return points
    return PointSet.from_points(list(points))


def _check_xcov(params: CovParams, *sets: PointSet):
    if params.kind == "stx":
        for ps in sets:
            if ps.x is None:
                raise ValueError("stx covariance requires covariate scores on every point")


def kernel_from_dists(params: CovParams, ds2: np.ndarray, dt2: np.ndarray,
                      dx2: np.ndarray | None) -> np.ndarray:
    """Kernel value from squared component distances (no nugget).

    ds2/dt2/dx2 broadcast together; dx2 may be None for kinds that ignore it.
    """
    kind = params.kind
    if kind == "s":
        return params.sigma2 * np.exp(-np.sqrt(ds2) / params.theta_s)
    if kind == "st":
        q2 = ds2 / params.theta_s**2 + dt2 / params.theta_t**2
        return params.sigma2 * np.exp(-np.sqrt(q2))
    if kind == "stx":
        q2 = ds2 / params.theta_s**2 + dt2 / params.theta_t**2 + dx2 / params.theta_x**2
        return params.sigma2 * np.exp(-np.sqrt(q2))
    # xonly: sigma2 exactly at zero distance, else 0.  Coincident points are
    # indistinguishable from "the same point" here.
    tot = ds2 + dt2
    if dx2 is not None:
        tot = tot + dx2
    return np.where(tot == 0.0, params.sigma2, 0.0)


def _component_dists2(a: PointSet, b: PointSet, need_x: bool):
    """Pairwise squared distances (na, nb) per component."""
    d = a.coords[:, None, :] - b.coords[None, :, :]
    ds2 = d[..., 0] ** 2 + d[..., 1] ** 2
    dt2 = (a.t[:, None] - b.t[None, :]) ** 2
    dx2 = None
    if need_x and a.x is not None and b.x is not None:
        dx = a.x[:, None, :] - b.x[None, :, :]
        dx2 = np.einsum("ijk,ijk->ij", dx, dx)
    return ds2, dt2, dx2


def cov(params: CovParams, a: SpacetimePoint, b: SpacetimePoint) -> float:
    """Covariance between two points under `params.kind` (nugget excluded)."""
    for p in (a, b):
        vals = [p.east_km, p.north_km, p.t_hours]
        if p.x_cov is not None:
            vals.extend(np.asarray(p.x_cov, dtype=float).ravel())
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite point coordinates")
    pa, pb = PointSet.from_points([a]), PointSet.from_points([b])
    _check_xcov(params, pa, pb)
    ds2, dt2, dx2 = _component_dists2(pa, pb, need_x=params.kind in ('stx', 'xonly'))
    return float(kernel_from_dists(params, ds2, dt2, dx2)[0, 0])


def cov_matrix(params: CovParams, points, add_nugget: bool = False) -> np.ndarray:
    """Covariance matrix of a point set; tau2 added on the diagonal if requested.

    Exactly symmetric: every (i, j)/(j, i) pair is computed from bit-identical
    distance values.
    """
    ps = _as_pointset(points)
    if len(ps) < 1:
        raise ValueError("cov_matrix needs at least one point")
    _check_xcov(params, ps)
    ds2, dt2, dx2 = _component_dists2(ps, ps, need_x=params.kind in ('stx', 'xonly'))
    c = kernel_from_dists(params, ds2, dt2, dx2)
    if add_nugget:
        c[np.diag_indices_from(c)] += params.tau2
    return c


def cross_cov(params: CovParams, target: SpacetimePoint, points) -> np.ndarray:
    """Covariances between one target point and each point of a set (never with nugget)."""
    ps = _as_pointset(points)
    tgt = PointSet.from_points([target])
    _check_xcov(params, tgt, ps)
    ds2, dt2, dx2 = _component_dists2(tgt, ps, need_x=params.kind in ('stx', 'xonly'))
    return kernel_from_dists(params, ds2, dt2, dx2)[0]


def cross_cov_matrix(params: CovParams, targets, points) -> np.ndarray:
    """(n_targets, n_points) cross-covariance block (never with nugget)."""
    ta = _as_pointset(targets)
    ps = _as_pointset(points)
    _check_xcov(params, ta, ps)
    ds2, dt2, dx2 = _component_dists2(ta, ps, need_x=params.kind in ('stx', 'xonly'))
    return kernel_from_dists(params, ds2, dt2, dx2)
