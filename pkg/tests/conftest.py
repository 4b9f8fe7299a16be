"""Shared fixtures: small synthetic road grids, routes and fitted models."""

import numpy as np
import pandas as pd
import pytest

from mobilekrig.covariance import CovParams, PointSet
from mobilekrig.estimation import OptimizerConfig, two_step_fit
from mobilekrig.features import FeatureConfig
from mobilekrig.ingest import project
from mobilekrig.simulate import gp_draw, make_segment_grid, route_observations
from mobilekrig.vecchia import ConditioningScheme


@pytest.fixture(scope="session")
def grid_segments():
    # spacing must stay below the route walker's neighbor radius (0.35 km)
    return make_segment_grid(n_east=6, n_north=6, spacing_km=0.3, seed=3)


@pytest.fixture(scope="session")
def grid_origin(grid_segments):
    return (float(grid_segments["lat"].mean()), float(grid_segments["lon"].mean()))


def random_points(n, seed, with_x=False, k=2, t_span=6.0, box_km=3.0):
    """Scattered space-time points for covariance and likelihood tests."""
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    coords = gen.uniform(0.0, box_km, size=(n, 2))
    t = np.sort(gen.uniform(0.0, t_span, size=n))
    x = gen.standard_normal((n, k)) if with_x else None
    return PointSet(coords, t, x)


def synth_obs(segments, params, seed, cars=2, minutes=120.0, step_seconds=120.0,
              start="2026-03-02T17:00:00Z", mean=2.5, stagger_hours=6.0):
    """Observation frame over the grid with values drawn from the model.

    Car starts are staggered across the day so the diurnal harmonics in the
    regression design stay identifiable.
    """
    origin = (float(segments["lat"].mean()), float(segments["lon"].mean()))
    parts = [route_observations(segments,
                                pd.Timestamp(start) + pd.Timedelta(hours=stagger_hours * c),
                                f"car{c}", duration_minutes=minutes,
                                step_seconds=step_seconds, seed=seed + c, origin=origin)
             for c in range(cars)]
    obs = pd.concat(parts, ignore_index=True).sort_values(
        ["timestamp", "car_id"], kind="mergesort").reset_index(drop=True)
    t_h = (obs["timestamp"] - obs["timestamp"].iloc[0]).dt.total_seconds().to_numpy() / 3600.0
    pts = PointSet(np.column_stack([obs["east_km"].to_numpy(), obs["north_km"].to_numpy()]), t_h)
    obs["log_no2"] = mean + gp_draw(params, pts, seed=seed + 100)
    return obs


@pytest.fixture(scope="session")
def st_params():
    return CovParams(kind="st", sigma2=0.8, tau2=0.1, theta_s=1.2, theta_t=2.0)


@pytest.fixture(scope="session")
def small_obs(grid_segments, st_params):
    return synth_obs(grid_segments, st_params, seed=11)


@pytest.fixture(scope="session")
def tiny_model(grid_segments, small_obs):
    """A cheap but real fitted model reused by prediction-side tests."""
    scheme = ConditioningScheme(lag_l=0.0, width_m=30.0, max_size=15, seed=5)
    return two_step_fit(small_obs, grid_segments, kind="st", scheme=scheme,
                        config=OptimizerConfig(max_iters=500, restarts=1),
                        feat=FeatureConfig(k_computed=6, k_retained=3))


def project_obs(obs, origin):
    east, north = project(obs["lat"].to_numpy(), obs["lon"].to_numpy(), origin)
    return east, north
