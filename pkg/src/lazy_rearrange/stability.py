"""Placement-stability oracles.

Both oracles follow the estimator protocol (``get_params``/``predict_proba``)
so thresholds can be tuned and swapped like any other model. Queries carry
a top-view environment heightmap and a bottom-view depth image of the
placed object on the same grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from shapely.geometry import Point, Polygon, box
from sklearn.base import BaseEstimator

from .geometry import object_bottom_grid, synthesize_heightmap
from .model import Arrangement, Instance, ObjectShape, Pose

QUERY_SIZE = 200
QUERY_RESOLUTION = 0.005


class MalformedQueryError(ValueError):
    pass


@dataclass
class StabilityQuery:
    """Environment heightmap and object bottom depth image sharing one grid.

    ``object_bottom`` is NaN off the object's footprint; ``mass_center`` is the
    x-y offset of the object's mass center from the grid center, in meters.
    """

    environment: np.ndarray
    object_bottom: np.ndarray
    mass_center: tuple[float, float] = (0.0, 0.0)
    resolution: float = QUERY_RESOLUTION

    def validate(self, size: int | None = QUERY_SIZE) -> None:
        env = np.asarray(self.environment)
        bot = np.asarray(self.object_bottom)
        if env.ndim != 2 or env.shape != bot.shape:
            raise MalformedQueryError(f"grid shapes differ: {env.shape} vs {bot.shape}")
        if size is not None and env.shape != (size, size):
            raise MalformedQueryError(f"expected {size}x{size} grids, got {env.shape}")
        if np.isnan(bot).all():
            raise MalformedQueryError("object footprint is empty")


@dataclass(frozen=True)
class StabilityVerdict:
    probability: float
    stable: bool


def build_query(
    shape: ObjectShape,
    pose: Pose,
    environment: Arrangement,
    instance: Instance,
    size: int = QUERY_SIZE,
    resolution: float = QUERY_RESOLUTION,
) -> StabilityQuery:
    """Synthesize the query images for placing ``shape`` at ``pose`` into ``environment``."""
    half = size * resolution / 2
    window = (pose.x - half, pose.y - half, pose.x + half, pose.y + half)
    env = synthesize_heightmap(environment, instance, window, resolution).grid
    bottom = object_bottom_grid(shape, pose.theta, size, resolution)
    mx, my = shape.mass_center
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return StabilityQuery(env, bottom, (c * mx - s * my, s * mx + c * my), resolution)


class StabilityOracle(BaseEstimator):
    """Common estimator surface; subclasses implement ``assess``."""

    requires_query = True
    threshold = 0.5

    def fit(self, X=None, y=None):
        return self

    def assess(self, query: StabilityQuery) -> StabilityVerdict:
        raise NotImplementedError

    def predict_proba(self, queries: Sequence[StabilityQuery]) -> np.ndarray:
        p = np.array([self.assess(q).probability for q in queries], dtype=float)
        return np.column_stack([1.0 - p, p])

    def predict(self, queries: Sequence[StabilityQuery]) -> np.ndarray:
        return np.array([self.assess(q).stable for q in queries], dtype=bool)


class AlwaysStable(StabilityOracle):
    """Every placement succeeds (the setting used for disc instances)."""

    requires_query = False

    def assess(self, query: StabilityQuery | None = None) -> StabilityVerdict:
        return StabilityVerdict(1.0, True)


class SupportPolygonStability(StabilityOracle):
    """Deterministic geometric stand-in for a learned placement-stability model.

    The object is dropped onto the environment; the cells that touch within
    ``contact_tol`` form the contact set. A placement is stable when the mass
    center projects inside the contact hull, and, for contact covering less
    than ``alpha`` of the footprint, inside that hull eroded by ``margin``.
    The probability is a logistic squashing of the mass center's signed
    distance to the governing hull boundary.
    """

    def __init__(self, threshold=0.5, contact_tol=0.002, alpha=0.3, margin=0.005, softness=0.001):
        self.threshold = threshold
        self.contact_tol = contact_tol
        self.alpha = alpha
        self.margin = margin
        self.softness = softness

    def contact_hull(self, query: StabilityQuery) -> tuple[Polygon, float, float]:
        """Contact hull polygon, landing height and contact fraction of the footprint."""
        query.validate(size=None)
        env = np.asarray(query.environment, dtype=float)
        bottom = np.asarray(query.object_bottom, dtype=float)
        footprint = ~np.isnan(bottom)
        lift = np.where(footprint, env - np.nan_to_num(bottom), -np.inf)
        landing = float(lift.max())
        contact = footprint & (lift >= landing - self.contact_tol)
        rows, cols = env.shape
        res = query.resolution
        ii, jj = np.nonzero(contact)
        x0, y0 = -cols * res / 2, -rows * res / 2
        corners = np.concatenate(
            [
                np.column_stack([x0 + (jj + dx) * res, y0 + (ii + dy) * res])
                for dx, dy in ((0, 0), (1, 0), (1, 1), (0, 1))
            ]
        )
        try:
            hull = ConvexHull(corners)
            poly = Polygon(corners[hull.vertices])
        except QhullError:
            poly = box(*corners.min(axis=0), *corners.max(axis=0))
        return poly, landing, float(contact.sum()) / float(footprint.sum())

    def stability_margin(self, query: StabilityQuery) -> float:
        hull, _, fraction = self.contact_hull(query)
        region = hull if fraction >= self.alpha else hull.buffer(-self.margin)
        center = Point(query.mass_center)
        if region.is_empty:
            return -(hull.exterior.distance(center) if not hull.contains(center) else 0.0) - self.margin
        d = region.exterior.distance(center)
        return d if region.contains(center) else -d

    def assess(self, query: StabilityQuery) -> StabilityVerdict:
        m = self.stability_margin(query)
        z = max(min(m / self.softness, 700.0), -700.0)
        p = 1.0 / (1.0 + math.exp(-z))
        return StabilityVerdict(p, p >= self.threshold)


def support_polygon_assess(query: StabilityQuery, **params) -> StabilityVerdict:
    return SupportPolygonStability(**params).assess(query)


def make_oracle(name: str, **params) -> StabilityOracle:
    if name == "always":
        return AlwaysStable()
    if name == "support-polygon":
        return SupportPolygonStability(**params)
    raise ValueError(f"unknown stability oracle {name!r}")
