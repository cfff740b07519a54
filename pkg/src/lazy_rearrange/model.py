"""Domain types for tabletop rearrangement: poses, shapes, arrangements, plans."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterator, Mapping, Sequence, Union

import numpy as np
from shapely import affinity
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

TWO_PI = 2.0 * math.pi
TABLE = "table"

POSITION_TOL = 1e-9
THETA_TOL = 1e-9
SUPPORT_TOL = 1e-3  # top surface vs. resting height


class MalformedInstanceError(ValueError):
    """An arrangement or instance refers to unknown objects or is inconsistent."""


class QueryOnBufferError(ValueError):
    """A geometric predicate was asked about an object sitting at a symbolic buffer."""


class InvalidPlanError(ValueError):
    """A plan cannot be executed from the initial arrangement."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


def normalize_angle(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:
        theta = 0.0
    return theta


@dataclass(frozen=True)
class Pose:
    """Placement of an object: x-y position on the table, resting height z and yaw."""

    x: float
    y: float
    z: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.z < -POSITION_TOL:
            raise ValueError(f"pose z must be >= 0, got {self.z}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "z", max(float(self.z), 0.0))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z, self.theta]

    def close_to(self, other: "Pose", ignore_theta: bool = False) -> bool:
        if abs(self.x - other.x) > POSITION_TOL or abs(self.y - other.y) > POSITION_TOL:
            return False
        if abs(self.z - other.z) > POSITION_TOL:
            return False
        if ignore_theta:
            return True
        d = abs(self.theta - other.theta)
        return min(d, TWO_PI - d) <= THETA_TOL


# ---------------------------------------------------------------------------
# Shapes


@dataclass(frozen=True)
class Disc:
    radius: float
    height: float
    kind = "disc"

    def __post_init__(self):
        if not self.radius > 0 or not self.height > 0:
            raise ValueError("disc radius and height must be positive")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def bounding_radius(self) -> float:
        return self.radius

    @property
    def mass_center(self) -> tuple[float, float]:
        return (0.0, 0.0)

    @cached_property
    def local_footprint(self) -> Polygon:
        return Polygon(
            [
                (self.radius * math.cos(a), self.radius * math.sin(a))
                for a in np.linspace(0.0, TWO_PI, 64, endpoint=False)
            ]
        )

    def bottom_depth(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Bottom-surface depth at local coordinates; NaN outside the footprint."""
        inside = u * u + v * v <= self.radius**2
        return np.where(inside, 0.0, np.nan)


@dataclass(frozen=True)
class Prism:
    """Extruded convex polygon; vertices are counterclockwise in the object frame."""

    vertices: tuple[tuple[float, float], ...]
    height: float
    kind = "prism"

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if not self.height > 0:
            raise ValueError("prism height must be positive")
        if len(verts) < 3:
            raise ValueError("prism needs at least 3 vertices")
        pts = np.asarray(verts)
        edges = np.roll(pts, -1, axis=0) - pts
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross <= 1e-12):
            raise ValueError("prism polygon must be convex, non-degenerate and counterclockwise")

    @cached_property
    def local_footprint(self) -> Polygon:
        return Polygon(self.vertices)

    @property
    def area(self) -> float:
        return self.local_footprint.area

    @cached_property
    def bounding_radius(self) -> float:
        return max(math.hypot(x, y) for x, y in self.vertices)

    @cached_property
    def mass_center(self) -> tuple[float, float]:
        c = self.local_footprint.centroid
        return (c.x, c.y)

    def bottom_depth(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        pts = np.asarray(self.vertices)
        inside = np.ones(np.shape(u), dtype=bool)
        for (x0, y0), (x1, y1) in zip(pts, np.roll(pts, -1, axis=0)):
            inside &= (x1 - x0) * (v - y0) - (y1 - y0) * (u - x0) >= -1e-12
        return np.where(inside, 0.0, np.nan)


@dataclass(frozen=True)
class Gridded:
    """Object described by a footprint mask and a bottom-surface depth grid.

    Row ``i``, column ``j`` of the grids covers the local cell
    ``x in [(j - ncols/2) * res, (j + 1 - ncols/2) * res)`` and likewise for y
    with rows, so the object origin sits at the grid center.
    """

    mask: tuple[tuple[bool, ...], ...]
    depth: tuple[tuple[float, ...], ...]
    resolution: float
    height: float
    kind = "gridded"

    def __post_init__(self):
        mask = tuple(tuple(bool(c) for c in row) for row in self.mask)
        depth = tuple(tuple(float(c) for c in row) for row in self.depth)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "depth", depth)
        m = np.asarray(mask, dtype=bool)
        d = np.asarray(depth, dtype=float)
        if m.ndim != 2 or not m.any():
            raise ValueError("gridded mask must be a nonempty 2D grid")
        if d.shape != m.shape:
            raise ValueError("gridded depth and mask shapes differ")
        if np.any(d[m] < 0):
            raise ValueError("gridded depth values must be nonnegative")
        if not self.resolution > 0 or not self.height > 0:
            raise ValueError("gridded resolution and height must be positive")

    @cached_property
    def mask_array(self) -> np.ndarray:
        return np.asarray(self.mask, dtype=bool)

    @cached_property
    def depth_array(self) -> np.ndarray:
        return np.asarray(self.depth, dtype=float)

    def _cell_origin(self) -> tuple[float, float]:
        rows, cols = self.mask_array.shape
        return (-cols / 2.0 * self.resolution, -rows / 2.0 * self.resolution)

    @cached_property
    def local_footprint(self):
        x0, y0 = self._cell_origin()
        r = self.resolution
        cells = [
            box(x0 + j * r, y0 + i * r, x0 + (j + 1) * r, y0 + (i + 1) * r)
            for i, j in zip(*np.nonzero(self.mask_array))
        ]
        return unary_union(cells)

    @property
    def area(self) -> float:
        return float(self.mask_array.sum()) * self.resolution**2

    @cached_property
    def bounding_radius(self) -> float:
        x0, y0 = self._cell_origin()
        r = self.resolution
        ii, jj = np.nonzero(self.mask_array)
        xs = np.maximum(np.abs(x0 + jj * r), np.abs(x0 + (jj + 1) * r))
        ys = np.maximum(np.abs(y0 + ii * r), np.abs(y0 + (ii + 1) * r))
        return float(np.max(np.hypot(xs, ys)))

    @cached_property
    def mass_center(self) -> tuple[float, float]:
        x0, y0 = self._cell_origin()
        ii, jj = np.nonzero(self.mask_array)
        r = self.resolution
        return (float(np.mean(x0 + (jj + 0.5) * r)), float(np.mean(y0 + (ii + 0.5) * r)))

    def bottom_depth(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        x0, y0 = self._cell_origin()
        rows, cols = self.mask_array.shape
        j = np.floor((np.asarray(u) - x0) / self.resolution).astype(int)
        i = np.floor((np.asarray(v) - y0) / self.resolution).astype(int)
        ok = (i >= 0) & (i < rows) & (j >= 0) & (j < cols)
        ic, jc = np.clip(i, 0, rows - 1), np.clip(j, 0, cols - 1)
        ok &= self.mask_array[ic, jc]
        return np.where(ok, self.depth_array[ic, jc], np.nan)


ObjectShape = Union[Disc, Prism, Gridded]


def world_footprint(shape: ObjectShape, pose: Pose):
    """Footprint polygon of ``shape`` placed at ``pose`` in table coordinates."""
    geom = shape.local_footprint
    if pose.theta and not isinstance(shape, Disc):
        geom = affinity.rotate(geom, pose.theta, origin=(0, 0), use_radians=True)
    return affinity.translate(geom, pose.x, pose.y)


# ---------------------------------------------------------------------------
# Arrangements, actions, plans


@dataclass(frozen=True)
class BufferSlot:
    """Symbolic, not yet allocated buffer location (only inside search states)."""

    buffer_id: str


ObjectState = Union[Pose, BufferSlot]


@dataclass(frozen=True)
class Arrangement:
    """Assignment of every object to a pose or a buffer, plus the support relation."""

    states: Mapping[str, ObjectState]
    support: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", dict(self.states))
        support = {k: v for k, v in dict(self.support).items()}
        for oid, st in self.states.items():
            if isinstance(st, Pose):
                support.setdefault(oid, TABLE)
        object.__setattr__(self, "support", support)

    def __iter__(self) -> Iterator[str]:
        return iter(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def pose(self, oid: str) -> Pose:
        st = self.states[oid]
        if isinstance(st, BufferSlot):
            raise QueryOnBufferError(f"object {oid!r} is at buffer {st.buffer_id!r}")
        return st

    def placed(self) -> dict[str, Pose]:
        return {k: v for k, v in self.states.items() if isinstance(v, Pose)}

    def moved(self, oid: str, pose: ObjectState, support: str = TABLE) -> "Arrangement":
        states = dict(self.states)
        states[oid] = pose
        sup = dict(self.support)
        if isinstance(pose, Pose):
            sup[oid] = support
        else:
            sup.pop(oid, None)
        return Arrangement(states, sup)

    def without(self, oid: str) -> "Arrangement":
        states = {k: v for k, v in self.states.items() if k != oid}
        sup = {k: v for k, v in self.support.items() if k != oid}
        return Arrangement(states, sup)


@dataclass(frozen=True)
class Action:
    """One overhand pick-n-place of ``object`` from ``start`` to ``target``."""

    object: str
    start: Pose
    target: Pose

    def __post_init__(self):
        if self.start.close_to(self.target):
            raise ValueError("action must move the object")


@dataclass(frozen=True)
class Plan:
    actions: tuple[Action, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self) -> Iterator[Action]:
        return iter(self.actions)


class Scenario(str, Enum):
    EE = "EE"
    MB = "MB"


@dataclass(frozen=True)
class Table:
    """Axis-aligned rectangular tabletop centered at the origin."""

    width: float
    depth: float

    def __post_init__(self):
        if not self.width > 0 or not self.depth > 0:
            raise ValueError("table dimensions must be positive")

    @property
    def area(self) -> float:
        return self.width * self.depth

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (-self.width / 2, -self.depth / 2, self.width / 2, self.depth / 2)

    def contains_point(self, x: float, y: float, tol: float = 1e-9) -> bool:
        return abs(x) <= self.width / 2 + tol and abs(y) <= self.depth / 2 + tol

    def contains(self, shape: ObjectShape, pose: Pose, tol: float = 1e-9) -> bool:
        hw, hd = self.width / 2 + tol, self.depth / 2 + tol
        if isinstance(shape, Disc):
            r = shape.radius
            return abs(pose.x) + r <= hw and abs(pose.y) + r <= hd
        minx, miny, maxx, maxy = world_footprint(shape, pose).bounds
        return minx >= -hw and maxx <= hw and miny >= -hd and maxy <= hd


@dataclass(frozen=True)
class Instance:
    objects: Mapping[str, ObjectShape]
    initial: Arrangement
    goal: Arrangement
    table: Table
    scenario: Scenario = Scenario.EE
    C: float = 10.0
    instance_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "objects", dict(self.objects))
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        ids = set(self.objects)
        if set(self.initial.states) != ids or set(self.goal.states) != ids:
            raise MalformedInstanceError("initial and goal must cover exactly the instance objects")

    @property
    def ids(self) -> list[str]:
        return list(self.objects)

    @property
    def n(self) -> int:
        return len(self.objects)

    @property
    def density(self) -> float:
        return sum(s.area for s in self.objects.values()) / self.table.area

    def at_goal(self, oid: str, pose: ObjectState) -> bool:
        if not isinstance(pose, Pose):
            return False
        # discs are treated as yaw-invariant
        return pose.close_to(self.goal.pose(oid), ignore_theta=isinstance(self.objects[oid], Disc))


# ---------------------------------------------------------------------------
# Predicates


@dataclass
class ValidityReport:
    valid: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.valid


def _intervals_overlap(za: float, ha: float, zb: float, hb: float, tol: float = 1e-9) -> bool:
    return za < zb + hb - tol and zb < za + ha - tol


def find_support(oid: str, pose: Pose, placed: Mapping[str, Pose], objects: Mapping[str, ObjectShape]) -> str | None:
    """Object (or the table) that ``oid`` rests on at ``pose``; None if floating."""
    from .geometry import footprints_overlap

    if pose.z <= SUPPORT_TOL:
        return TABLE
    best = None
    for other, p in placed.items():
        if other == oid:
            continue
        top = p.z + objects[other].height
        if abs(top - pose.z) <= SUPPORT_TOL and footprints_overlap(objects[oid], pose, objects[other], p):
            if best is None or top > placed[best].z + objects[best].height:
                best = other
    return best


def validate_arrangement(arrangement: Arrangement, instance: Instance) -> ValidityReport:
    """Check containment, pairwise collision-freedom and support of a fully placed arrangement."""
    from .geometry import footprints_collide, footprints_overlap

    problems: list[str] = []
    for oid in arrangement.states:
        if oid not in instance.objects:
            raise MalformedInstanceError(f"unknown object id {oid!r}")
    placed = {}
    for oid, st in arrangement.states.items():
        if not isinstance(st, Pose):
            raise QueryOnBufferError(f"object {oid!r} is not placed")
        placed[oid] = st
    objs = instance.objects
    for oid, pose in placed.items():
        if not instance.table.contains(objs[oid], pose):
            problems.append(f"out-of-region: {oid}")
    ids = list(placed)
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            i, j = ids[a], ids[b]
            if footprints_collide(objs[i], placed[i], objs[j], placed[j]):
                problems.append(f"collision: {i} / {j}")
    for oid, pose in placed.items():
        sup = arrangement.support.get(oid, TABLE)
        if sup == TABLE:
            if pose.z > SUPPORT_TOL:
                problems.append(f"unsupported: {oid} floats at z={pose.z:g}")
            continue
        if sup not in placed:
            problems.append(f"unsupported: {oid} declares missing support {sup!r}")
            continue
        top = placed[sup].z + objs[sup].height
        if abs(top - pose.z) > SUPPORT_TOL or not footprints_overlap(objs[oid], pose, objs[sup], placed[sup]):
            problems.append(f"unsupported: {oid} does not rest on {sup}")
    # support must be acyclic
    for oid in placed:
        seen = {oid}
        cur = arrangement.support.get(oid, TABLE)
        while cur != TABLE and cur in placed:
            if cur in seen:
                problems.append(f"support cycle through {oid}")
                break
            seen.add(cur)
            cur = arrangement.support.get(cur, TABLE)
    return ValidityReport(not problems, problems)


def is_graspable(oid: str, arrangement: Arrangement) -> bool:
    """True iff nothing currently rests on ``oid``."""
    if isinstance(arrangement.states[oid], BufferSlot):
        raise QueryOnBufferError(f"object {oid!r} is at a buffer")
    return not any(
        sup == oid and isinstance(arrangement.states.get(other), Pose)
        for other, sup in arrangement.support.items()
        if other != oid
    )


def goal_ancestors(oid: str, goal: Arrangement) -> list[str]:
    chain = []
    cur = goal.support.get(oid, TABLE)
    while cur != TABLE and cur not in chain:
        chain.append(cur)
        cur = goal.support.get(cur, TABLE)
    return chain


def is_goal_available(oid: str, arrangement: Arrangement, instance: Instance) -> bool:
    """Goal pose unobstructed and every goal-stack parent beneath it already in place."""
    from .geometry import footprints_collide

    goal_pose = instance.goal.pose(oid)
    shape = instance.objects[oid]
    for other, st in arrangement.states.items():
        if other == oid or not isinstance(st, Pose):
            continue
        if footprints_collide(shape, goal_pose, instance.objects[other], st):
            return False
    for parent in goal_ancestors(oid, instance.goal):
        if not instance.at_goal(parent, arrangement.states[parent]):
            return False
    return True


def replay_plan(instance: Instance, plan: Plan | Sequence[Action]) -> list[Arrangement]:
    """Execute ``plan`` from the initial arrangement.

    Returns the arrangement after every prefix (index 0 is the initial one).
    Raises InvalidPlanError at the first step that is not executable or if
    the final arrangement differs from the goal.
    """
    from .geometry import footprints_collide

    objs = instance.objects
    arr = instance.initial
    history = [arr]
    for k, act in enumerate(plan):
        if act.object not in objs:
            raise InvalidPlanError(f"step {k}: unknown object {act.object!r}", k)
        cur = arr.pose(act.object)
        ignore = isinstance(objs[act.object], Disc)
        if not cur.close_to(act.start, ignore_theta=ignore):
            raise InvalidPlanError(f"step {k}: {act.object} is not at the action's pick pose", k)
        if not is_graspable(act.object, arr):
            raise InvalidPlanError(f"step {k}: {act.object} is not graspable", k)
        shape = objs[act.object]
        if not instance.table.contains(shape, act.target):
            raise InvalidPlanError(f"step {k}: target of {act.object} leaves the table", k)
        rest = arr.without(act.object).placed()
        for other, p in rest.items():
            if footprints_collide(shape, act.target, objs[other], p):
                raise InvalidPlanError(f"step {k}: {act.object} collides with {other}", k)
        sup = find_support(act.object, act.target, rest, objs)
        if sup is None:
            raise InvalidPlanError(f"step {k}: {act.object} would float at z={act.target.z:g}", k)
        arr = arr.moved(act.object, act.target, sup)
        history.append(arr)
    for oid in objs:
        if not instance.at_goal(oid, arr.states[oid]):
            raise InvalidPlanError(f"final arrangement: {oid} is not at its goal", len(history) - 1)
    return history
