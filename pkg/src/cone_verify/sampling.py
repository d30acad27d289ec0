"""Deterministic point sampling of regions for the CLI checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fields import Ball

__all__ = ["RegionSamplingPlan", "sample_region"]


@dataclass(frozen=True)
class RegionSamplingPlan:
    strategy: str = "random"  # "grid" | "random"
    count: int = 64
    seed: int = 0
    skip_singularity_radius: float = 1e-3

    def __post_init__(self):
        if self.strategy not in ("grid", "random"):
            raise ConfigError(f"unknown sampling strategy '{self.strategy}'")
        if self.count < 0:
            raise ConfigError("sample count must be nonnegative")


def _keeps(plan, region, singularities, x):
    if not region.contains(x):
        return False
    for sigma in singularities or []:
        if np.linalg.norm(x - sigma) < plan.skip_singularity_radius:
            return False
    return True


def _random_points(plan, region, singularities):
    rng = np.random.default_rng(plan.seed)
    n = region.dimension
    points = []
    tries = 0
    limit = 1000 * plan.count + 1000
    while len(points) < plan.count and tries < limit:
        tries += 1
        if isinstance(region, Ball):
            u = rng.normal(size=n)
            u /= max(np.linalg.norm(u), 1e-300)
            r = region.radius * rng.random() ** (1.0 / n)
            x = region.center + r * u
        else:
            x = np.array([rng.uniform(lo, hi) for lo, hi in region.bounds])
        if _keeps(plan, region, singularities, x):
            points.append(x)
    if len(points) < plan.count:
        raise ConfigError("could not draw the requested number of samples; "
                          "region too small or too much of it is skipped")
    return np.asarray(points)


def _grid_points(plan, region, singularities):
    n = region.dimension
    box = region.bounding_box()
    per_axis = max(1, math.ceil(plan.count ** (1.0 / n)))
    for _ in range(16):
        axes = []
        for lo, hi in box:
            cell = (hi - lo) / per_axis
            axes.append(lo + cell * (np.arange(per_axis) + 0.5))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        kept = [x for x in pts if _keeps(plan, region, singularities, x)]
        if len(kept) >= plan.count:
            return np.asarray(kept[:plan.count])
        per_axis += 1
    raise ConfigError("grid sampling could not reach the requested count")


def sample_region(plan, region, singularities=None):
    """Sample points of the region, skipping balls around singularities.

    Random sampling is reproducible from the seed; grid sampling is
    deterministic outright (cell-centered lattice, lexicographic order).
    """
    if plan.count == 0:
        return np.empty((0, region.dimension))
    if plan.strategy == "random":
        return _random_points(plan, region, singularities)
    return _grid_points(plan, region, singularities)
