"""Lazy buffer allocation: cost-optimal placing regions, sampling, expansion and repair."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (
    TrackRegion,
    ee_optimal_buffer_region,
    footprints_collide,
    footprints_overlap,
    mb_optimal_buffer_region,
    table_lattice,
)
from .model import TWO_PI, Action, Arrangement, Disc, Pose, Scenario, Table
from .stability import StabilityOracle, build_query
from .state import GOAL, FixedBuffer, Move, SearchContext, SearchState


@dataclass(frozen=True)
class PendingBuffer:
    """Waypoint at a buffer that has not been allocated yet."""

    obj: int


@dataclass(frozen=True)
class Step:
    obj: int
    src: object
    dst: object


@dataclass
class BufferRequest:
    obj: int
    place_time: int
    pick_time: int
    visits: tuple[Pose, ...]
    environment: dict[int, Pose]
    avoid: list[tuple[int, Pose]]
    source: Pose | None = None  # where the object is picked from; parking it there is no move


@dataclass
class AllocatorConfig:
    allocator: str = "sampling"
    samples_per_round: int = 10
    expansion_step: float | None = None
    orientation_count: int = 8
    grid_resolution: float = 0.05
    stack_buffers: bool = False


# ---------------------------------------------------------------------------
# Regions


@dataclass(frozen=True)
class DiscRegion:
    """Union of discs of a common radius around x-y points (radius 0: the points)."""

    points: tuple[tuple[float, float], ...]
    radius: float = 0.0

    def covers(self, table: Table) -> bool:
        x0, y0, x1, y1 = table.bounds
        corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
        return any(
            all(math.hypot(px - cx, py - cy) <= self.radius for cx, cy in corners) for px, py in self.points
        )

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        return any(math.hypot(x - px, y - py) <= self.radius + tol for px, py in self.points)


def expand_region(region, step: float, table: Table):
    """Grow a region by ``step`` (meters; arclength for track regions), saturating at the full table."""
    if isinstance(region, DiscRegion):
        if region.covers(table):
            return region
        return DiscRegion(region.points, region.radius + step)
    if isinstance(region, TrackRegion):
        per = region.perimeter
        if region.covers_track:
            return region
        segs = [((p - step) % per, min(2 * step, per)) for p in region.points]
        segs += [((a - step) % per, min(length + 2 * step, per)) for a, length in region.segments]
        return TrackRegion((), tuple(segs), per, region.value)
    raise TypeError(f"unsupported region {region!r}")


def region_covers(region, table: Table) -> bool:
    if isinstance(region, DiscRegion):
        return region.covers(table)
    return region.covers_track


def _visit_cost(ctx: SearchContext, xy: np.ndarray, visits: Sequence[Pose]) -> np.ndarray:
    """Summed leg length from each candidate x-y to every visit."""
    xy = np.atleast_2d(xy)
    total = np.zeros(len(xy))
    if ctx.scenario is Scenario.EE:
        for v in visits:
            total += np.hypot(xy[:, 0] - v.x, xy[:, 1] - v.y)
        return total
    s = project_many(ctx, xy)
    per = ctx.track.perimeter
    for v in visits:
        d = np.abs(s - ctx.project(v)) % per
        total += np.minimum(d, per - d)
    return total


def project_many(ctx: SearchContext, xy: np.ndarray) -> np.ndarray:
    w, d = ctx.track.width, ctx.track.depth
    hw, hd = w / 2, d / 2
    x, y = xy[:, 0], xy[:, 1]
    dist = np.stack([y + hd, hw - x, hd - y, x + hw])
    arc = np.stack([x + hw, w + (y + hd), w + d + (hw - x), 2 * w + d + (hd - y)]) % ctx.track.perimeter
    best = dist.min(axis=0)
    arc = np.where(dist <= best + 1e-12, arc, np.inf)
    return arc.min(axis=0)


def compute_pb_star(request: BufferRequest, ctx: SearchContext):
    """Cost-optimal placing region for a buffer given its surrounding visits."""
    visits = request.visits
    if ctx.scenario is Scenario.EE:
        pts = [v.xy for v in visits]
        while len(pts) < 4:
            pts.append(pts[-1])
        return DiscRegion(tuple(ee_optimal_buffer_region(*pts[:4])))
    return mb_optimal_buffer_region([ctx.project(v) for v in visits], ctx.track)


# ---------------------------------------------------------------------------
# Feasibility


def landing(ctx: SearchContext, obj: int, xy: tuple[float, float], theta: float, request: BufferRequest, stack: bool):
    """Resting pose and support index when dropping ``obj`` at ``xy``."""
    pose = Pose(xy[0], xy[1], 0.0, theta)
    if not stack:
        return pose, -1
    shape = ctx.shapes[obj]
    top, support = 0.0, -1
    for j, p in request.environment.items():
        if footprints_overlap(shape, pose, ctx.shapes[j], p):
            t = p.z + ctx.shapes[j].height
            if t > top:
                top, support = t, j
    return Pose(xy[0], xy[1], top, theta), support


def pose_feasible(
    pose: Pose,
    obj: int,
    request: BufferRequest,
    ctx: SearchContext,
    oracle: StabilityOracle,
    stack: bool = False,
) -> bool:
    """Inside the table, clear of the scene at placement, clear of every pose used during the stay, stable."""
    shape = ctx.shapes[obj]
    if request.source is not None and pose.close_to(request.source, ignore_theta=isinstance(shape, Disc)):
        return False
    if not ctx.instance.table.contains(shape, pose):
        return False
    for j, p in request.environment.items():
        hit = footprints_collide(shape, pose, ctx.shapes[j], p) if stack else footprints_overlap(shape, pose, ctx.shapes[j], p)
        if hit:
            return False
    for j, p in request.avoid:
        if footprints_overlap(shape, pose, ctx.shapes[j], p):
            return False
    if oracle.requires_query:
        env = Arrangement({ctx.ids[j]: p for j, p in request.environment.items()})
        return oracle.assess(build_query(shape, pose, env, ctx.instance)).stable
    return True


def _orientations(shape, count: int, rng: np.random.Generator | None) -> list[float]:
    if isinstance(shape, Disc):
        return [0.0]
    base = float(rng.uniform(0.0, TWO_PI)) if rng is not None else 0.0
    return [(base + k * TWO_PI / count) % TWO_PI for k in range(count)]


# ---------------------------------------------------------------------------
# Segment bookkeeping


def segment_steps(ctx: SearchContext, anchor: SearchState, segment: Sequence[Move]) -> list[Step]:
    loc: dict[int, object] = {i: ctx.current_pose(anchor, i) for i in range(ctx.n)}
    steps = []
    for mv in segment:
        src = loc[mv.obj]
        if src is None:
            src = PendingBuffer(mv.obj)
        dst = ctx.goal[mv.obj] if mv.dest == GOAL else PendingBuffer(mv.obj)
        steps.append(Step(mv.obj, src, dst))
        loc[mv.obj] = dst
    return steps


def _resolve(wp, poses: dict[int, FixedBuffer]):
    if isinstance(wp, PendingBuffer):
        fb = poses.get(wp.obj)
        return fb.pose if fb is not None else None
    return wp


def build_request(
    ctx: SearchContext,
    anchor: SearchState,
    steps: list[Step],
    k: int,
    resolved: dict[int, FixedBuffer],
) -> BufferRequest:
    obj = steps[k].obj
    q = next(m for m in range(k + 1, len(steps)) if steps[m].obj == obj)
    env: dict[int, Pose] = {}
    for i in range(ctx.n):
        p = ctx.current_pose(anchor, i)
        if p is not None:
            env[i] = p
    for st in steps[:k]:
        env.pop(st.obj, None)
        p = _resolve(st.dst, resolved)
        if p is not None:
            env[st.obj] = p
    env.pop(obj, None)
    avoid = []
    for st in steps[k + 1 : q]:
        for wp in (st.src, st.dst):
            p = _resolve(wp, resolved)
            if p is not None:
                avoid.append((st.obj, p))
    flat = []
    for st in steps:
        flat.extend([st.src, st.dst])
    place_idx, pick_idx = 2 * k + 1, 2 * q
    v1 = _resolve(flat[place_idx - 1], resolved)
    v2 = next((p for p in (_resolve(w, resolved) for w in flat[place_idx + 1 :]) if p is not None), None)
    v3 = next((p for p in (_resolve(w, resolved) for w in reversed(flat[:pick_idx])) if p is not None), None)
    v4 = _resolve(flat[pick_idx + 1], resolved)
    visits = tuple(v for v in (v1, v2, v3, v4) if v is not None)
    return BufferRequest(obj, k, q, visits, env, avoid, source=v1)


# ---------------------------------------------------------------------------
# Allocators


def _sample_in_region(region, ctx: SearchContext, obj: int, rng: np.random.Generator, tries: int = 64):
    table = ctx.instance.table
    rb = ctx.shapes[obj].bounding_radius
    hw, hd = table.width / 2, table.depth / 2
    if isinstance(region, DiscRegion):
        for _ in range(tries):
            px, py = region.points[int(rng.integers(len(region.points)))]
            if region.radius <= 0:
                return (px, py)
            rho = region.radius * math.sqrt(float(rng.uniform()))
            ang = float(rng.uniform(0.0, TWO_PI))
            x, y = px + rho * math.cos(ang), py + rho * math.sin(ang)
            if abs(x) <= hw and abs(y) <= hd:
                return (x, y)
        return None
    per = region.perimeter
    track = ctx.track
    reach = min(table.width, table.depth) / 2
    for _ in range(tries):
        if region.measure <= 0:
            s = region.points[int(rng.integers(len(region.points)))]
        else:
            u = float(rng.uniform(0.0, region.measure))
            s = region.segments[-1][0]
            for a, length in region.segments:
                if u <= length:
                    s = (a + u) % per
                    break
                u -= length
        bx, by = track.param_to_point(s)
        nx, ny = track.inward_normal(s)
        lo = min(rb + 1e-9, reach)
        d = float(rng.uniform(lo, reach))
        x, y = bx + d * nx, by + d * ny
        if region.contains(track.point_to_param(x, y), tol=1e-6):
            return (x, y)
    return None


def _default_step(ctx: SearchContext, cfg: AllocatorConfig) -> float:
    if cfg.expansion_step:
        return cfg.expansion_step
    return max(s.bounding_radius for s in ctx.shapes)


def sample_one(
    ctx: SearchContext,
    request: BufferRequest,
    oracle: StabilityOracle,
    cfg: AllocatorConfig,
    rng: np.random.Generator,
) -> tuple[FixedBuffer | None, int]:
    """Region sampling with gradual expansion; returns the buffer (or None) and samples drawn."""
    obj = request.obj
    region = compute_pb_star(request, ctx)
    step = _default_step(ctx, cfg)
    table = ctx.instance.table
    drawn = 0
    seen: set = set()
    while True:
        for _ in range(cfg.samples_per_round):
            xy = _sample_in_region(region, ctx, obj, rng)
            if xy is None:
                continue
            for theta in _orientations(ctx.shapes[obj], cfg.orientation_count, rng):
                key = (round(xy[0], 12), round(xy[1], 12), round(theta, 12))
                if key in seen:
                    continue
                seen.add(key)
                pose, support = landing(ctx, obj, xy, theta, request, cfg.stack_buffers)
                drawn += 1
                if pose_feasible(pose, obj, request, ctx, oracle, cfg.stack_buffers):
                    return FixedBuffer(obj, pose, support), drawn
        if region_covers(region, table):
            return None, drawn
        region = expand_region(region, step, table)


def _exact_candidates(ctx: SearchContext, region, obj: int, res: float) -> list[tuple[float, float]]:
    if isinstance(region, DiscRegion):
        return list(region.points)
    track = ctx.track
    rb = ctx.shapes[obj].bounding_radius
    reach = min(track.width, track.depth) / 2
    arcs = list(region.points)
    for a, length in region.segments:
        m = max(int(length / res), 1)
        arcs.extend((a + length * t / m) % region.perimeter for t in range(m + 1))
    out = []
    offsets = np.arange(rb + 1e-9, reach, res)
    for s in arcs:
        bx, by = track.param_to_point(s)
        nx, ny = track.inward_normal(s)
        out.extend((bx + d * nx, by + d * ny) for d in offsets)
    return out


def grid_optimal_one(
    ctx: SearchContext,
    request: BufferRequest,
    oracle: StabilityOracle,
    cfg: AllocatorConfig,
) -> tuple[FixedBuffer | None, int]:
    """Cheapest feasible pose among the exact optimum and a fine table lattice."""
    obj = request.obj
    region = compute_pb_star(request, ctx)
    exact = _exact_candidates(ctx, region, obj, cfg.grid_resolution)
    lattice = table_lattice(ctx.instance.table, cfg.grid_resolution)
    cands = np.concatenate([np.asarray(exact, dtype=float).reshape(-1, 2), lattice])
    cost = _visit_cost(ctx, cands, request.visits)
    order = np.lexsort((np.arange(len(cands)), np.round(cost, 12)))
    drawn = 0
    thetas = _orientations(ctx.shapes[obj], max(cfg.orientation_count // 2, 1), None)
    for idx in order:
        xy = (float(cands[idx, 0]), float(cands[idx, 1]))
        for theta in thetas:
            pose, support = landing(ctx, obj, xy, theta, request, cfg.stack_buffers)
            drawn += 1
            if pose_feasible(pose, obj, request, ctx, oracle, cfg.stack_buffers):
                return FixedBuffer(obj, pose, support), drawn
    return None, drawn


@dataclass
class Allocation:
    poses: dict[int, FixedBuffer]
    steps: list[Step]
    failed: BufferRequest | None = None
    samples: int = 0

    @property
    def ok(self) -> bool:
        return self.failed is None


def sample_buffers(
    ctx: SearchContext,
    anchor: SearchState,
    segment: Sequence[Move],
    oracle: StabilityOracle,
    cfg: AllocatorConfig,
    seed: int = 0,
    node_id: int = 0,
) -> Allocation:
    """Allocate every buffer opened in ``segment``, in the order objects entered them.

    Stops at the first request without a feasible pose and returns the poses
    found so far.
    """
    steps = segment_steps(ctx, anchor, segment)
    resolved: dict[int, FixedBuffer] = {}
    samples = 0
    for r, k in enumerate(k for k, st in enumerate(steps) if isinstance(st.dst, PendingBuffer)):
        request = build_request(ctx, anchor, steps, k, resolved)
        if cfg.allocator == "grid-optimal":
            fb, drawn = grid_optimal_one(ctx, request, oracle, cfg)
        else:
            rng = np.random.default_rng([seed, node_id, r])
            fb, drawn = sample_one(ctx, request, oracle, cfg, rng)
        samples += drawn
        if fb is None:
            return Allocation(resolved, steps, request, samples)
        resolved[request.obj] = fb
    return Allocation(resolved, steps, None, samples)


def concrete_actions(ctx: SearchContext, steps: Sequence[Step], poses: dict[int, FixedBuffer]) -> list[Action]:
    out = []
    for st in steps:
        src, dst = _resolve(st.src, poses), _resolve(st.dst, poses)
        out.append(Action(ctx.ids[st.obj], src, dst))
    return out


def repair_on_failure(ctx: SearchContext, anchor: SearchState, allocation: Allocation):
    """Deterministic replacement state just before the failing buffer placement.

    Returns ``(state, actions)`` with the pre-failure actions made concrete, or
    None when the failure happens on the segment's first action (the
    replacement would be the anchor itself).
    """
    k = allocation.failed.place_time
    if k == 0:
        return None
    steps = allocation.steps[:k]
    actions = concrete_actions(ctx, steps, allocation.poses)
    at_goal = anchor.at_goal
    fixed = {fb.obj: fb for fb in anchor.fixed}
    for st in steps:
        if isinstance(st.dst, PendingBuffer):
            fixed[st.obj] = allocation.poses[st.obj]
        else:
            fixed.pop(st.obj, None)
            at_goal |= 1 << st.obj
    state = SearchState(
        at_goal=at_goal,
        buffered=0,
        fixed=tuple(sorted(fixed.values(), key=lambda fb: fb.obj)),
        last_waypoint=actions[-1].target,
    )
    return state, actions


# ---------------------------------------------------------------------------
# Eager near-goal buffers (Greedy-Sampling baseline)


def nearest_goal_buffer(
    ctx: SearchContext,
    st: SearchState,
    obj: int,
    oracle: StabilityOracle,
    step: float,
    bearings: int = 16,
    stack: bool = False,
) -> tuple[FixedBuffer | None, int]:
    """First feasible pose on rings of growing radius around ``obj``'s goal."""
    goal = ctx.goal[obj]
    env = {}
    for i in range(ctx.n):
        if i == obj:
            continue
        p = ctx.current_pose(st, i)
        if p is not None:
            env[i] = p
    request = BufferRequest(obj, 0, 1, (goal,), env, [], source=ctx.current_pose(st, obj))
    table = ctx.instance.table
    max_r = math.hypot(table.width, table.depth)
    drawn = 0
    k = 0
    while k * step <= max_r:
        rad = k * step
        count = 1 if k == 0 else bearings
        for b in range(count):
            ang = TWO_PI * b / count
            xy = (goal.x + rad * math.cos(ang), goal.y + rad * math.sin(ang))
            if not table.contains_point(*xy):
                continue
            pose, support = landing(ctx, obj, xy, goal.theta, request, stack)
            drawn += 1
            if pose_feasible(pose, obj, request, ctx, oracle, stack):
                return FixedBuffer(obj, pose, support), drawn
        k += 1
    return None, drawn

