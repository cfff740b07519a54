"""Lazy A* over deterministic and non-deterministic rearrangement states.

Objects only move to their goal (when graspable and the goal is available)
or to a buffer (when their goal is unavailable and they hold up some other
object). Buffer poses are not chosen when an object is parked; nodes with
pending buffers carry a lower bound on their cost instead, and the poses
are allocated once the search pops the next deterministic state.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field, replace

from .buffers import (
    AllocatorConfig,
    PendingBuffer,
    Step,
    concrete_actions,
    nearest_goal_buffer,
    repair_on_failure,
    sample_buffers,
    segment_steps,
)
from .cost import CostBreakdown, plan_cost
from .geometry import fermat_point, track_distance
from .model import Action, Instance, Plan, Pose, Scenario
from .stability import AlwaysStable, StabilityOracle
from .state import BUFFER, GOAL, FixedBuffer, Move, SearchContext, SearchNode, SearchState

PLANNERS = ("orla-full", "orla-action", "greedy-sampling")


@dataclass
class SearchConfig:
    planner: str = "orla-full"
    allocator: str = "sampling"
    samples_per_round: int = 10
    expansion_step: float | None = None
    orientation_count: int = 8
    grid_resolution: float = 0.05
    stack_buffers: bool = False
    timeout: float = 300.0
    max_expansions: int | None = None
    seed: int = 0
    audit: bool = False
    greedy_step: float = 0.01

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ValueError(f"unknown planner {self.planner!r}")
        if self.allocator not in ("sampling", "grid-optimal"):
            raise ValueError(f"unknown allocator {self.allocator!r}")

    @property
    def allocator_config(self) -> AllocatorConfig:
        return AllocatorConfig(
            allocator=self.allocator,
            samples_per_round=self.samples_per_round,
            expansion_step=self.expansion_step,
            orientation_count=self.orientation_count,
            grid_resolution=self.grid_resolution,
            stack_buffers=self.stack_buffers,
        )


@dataclass
class SearchStats:
    ds_expanded: int = 0
    nds_expanded: int = 0
    generated: int = 0
    allocations: int = 0
    repairs: int = 0
    buffers_sampled: int = 0
    wall_time: float = 0.0
    success: bool = False
    reason: str = ""

    @property
    def nodes_expanded(self) -> int:
        return self.ds_expanded + self.nds_expanded

    def as_dict(self) -> dict:
        return {
            "ds_expanded": self.ds_expanded,
            "nds_expanded": self.nds_expanded,
            "generated": self.generated,
            "allocations": self.allocations,
            "repairs": self.repairs,
            "buffers_sampled": self.buffers_sampled,
            "wall_time": self.wall_time,
            "success": self.success,
            "reason": self.reason,
        }


@dataclass
class SearchAudit:
    """Optional trace used by the optimality tests."""

    expanded: list[tuple[SearchState, float, float]] = field(default_factory=list)
    popped_f: list[float] = field(default_factory=list)
    bound_pairs: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class SearchResult:
    plan: Plan | None
    cost: CostBreakdown | None
    stats: SearchStats
    search_cost: float | None = None
    audit: SearchAudit | None = None

    @property
    def success(self) -> bool:
        return self.plan is not None


# ---------------------------------------------------------------------------
# Cost terms


def h_of_ds(ctx: SearchContext, state: SearchState) -> float:
    """One transfer leg plus C for every object away from its goal."""
    return ctx.ds_heuristic(state)


def g_of_ds(ctx: SearchContext, anchor: SearchNode, actions: list[Action]) -> float:
    """Anchor cost plus the concrete segment (transit legs included)."""
    if anchor.g is None:
        raise ValueError("anchor must be a resolved deterministic state")
    travel = 0.0
    prev = anchor.state.last_waypoint
    for act in actions:
        travel += ctx.dist(prev, act.start) + ctx.dist(act.start, act.target)
        prev = act.target
    return anchor.g + ctx.travel_weight * travel + ctx.C * len(actions)


def distance_refinement(ctx: SearchContext, p_s: Pose, p_n: Pose, p_g: Pose) -> float:
    """Least extra travel a pending buffer adds beyond the straight p_s -> p_n leg, plus its leg to p_g."""
    if ctx.scenario is Scenario.EE:
        pts = [p_s.xy, p_n.xy, p_g.xy]
        pb = fermat_point(*pts)
        total = sum(math.hypot(pb[0] - x, pb[1] - y) for x, y in pts)
        return total - ctx.dist(p_s, p_n)
    per = ctx.track.perimeter
    arcs = [ctx.project(p_s), ctx.project(p_n), ctx.project(p_g)]
    # arc-distance sums are concave between the points, so one of them is optimal
    best = min(sum(track_distance(c, a, per) for a in arcs) for c in arcs)
    return best - track_distance(arcs[0], arcs[1], per)


def segment_lower_bound(ctx: SearchContext, anchor: SearchNode, segment: tuple[Move, ...], state: SearchState):
    """Lower bound on the cost of any completion through ``state``.

    Returns ``(bound, frontier)``; ``frontier`` flags a pending buffer whose
    following visit is not known yet.
    """
    steps = segment_steps(ctx, anchor.state, segment)
    flat: list = [anchor.state.last_waypoint]
    for st in steps:
        flat.extend((st.src, st.dst))
    travel = 0.0
    prev = None
    for wp in flat:
        if not isinstance(wp, Pose):
            continue
        if prev is not None:
            travel += ctx.dist(prev, wp)
        prev = wp
    extra = 0.0
    frontier = False
    away = 0
    for i in ctx.away(state):
        away += 1
        if (state.buffered >> i) & 1:
            place = max(k for k, st in enumerate(steps) if st.obj == i and isinstance(st.dst, PendingBuffer))
            idx = 2 + 2 * place
            p_s = flat[idx - 1]
            p_n = next((w for w in flat[idx + 1 :] if isinstance(w, Pose)), None)
            if p_n is None:
                p_n = p_s
                frontier = True
            extra += distance_refinement(ctx, p_s, p_n, ctx.goal[i])
        else:
            extra += ctx.dist(ctx.current_pose(state, i), ctx.goal[i])
    bound = anchor.g + ctx.C * (len(steps) + away) + ctx.travel_weight * (travel + extra)
    return bound, frontier


def f_of_nds(ctx: SearchContext, node: SearchNode) -> float:
    return segment_lower_bound(ctx, node.anchor, node.segment, node.state)[0]


def segment_signature(ctx: SearchContext, anchor: SearchNode, segment: tuple[Move, ...]) -> tuple:
    """Everything about a segment that its future cost and buffer allocation depend on.

    Per pending buffer: the pick pose before it, the next and previous
    concrete visits around it, and the sets of steps before and during the
    stay (these fix the environment and the avoid list). Plus the last
    concrete waypoint. Two segments with equal signatures from the same
    anchor differ only in the travel already spent, so the costlier one can
    be dropped.
    """
    steps = segment_steps(ctx, anchor.state, segment)
    flat: list = []
    for st in steps:
        flat.extend((st.src, st.dst))
    concrete = [k for k, w in enumerate(flat) if isinstance(w, Pose)]
    last = flat[concrete[-1]] if concrete else anchor.state.last_waypoint
    parts = []
    for k, st in enumerate(steps):
        if not isinstance(st.dst, PendingBuffer):
            continue
        q = next((m for m in range(k + 1, len(steps)) if steps[m].obj == st.obj), None)
        place = 2 * k + 1
        v2 = next((flat[i] for i in concrete if i > place), None)
        v3 = None
        if q is not None:
            v3 = next((flat[i] for i in reversed(concrete) if i < 2 * q), None)
        during = frozenset(steps[k + 1 : q if q is not None else len(steps)])
        parts.append((st.obj, st.src, v2, v3, frozenset(steps[:k]), during))
    return (last, tuple(parts))


@dataclass(frozen=True)
class BufferTrace:
    obj: int
    p_s: Pose
    v2: Pose | None
    v3: Pose | None
    picked: bool
    before: frozenset
    during: frozenset


@dataclass(frozen=True)
class SegmentTrace:
    """Incremental form of a segment: the same numbers as segment_lower_bound and segment_signature."""

    steps: tuple[Step, ...]
    travel: float
    last: Pose | None
    buffers: tuple[BufferTrace, ...] = ()

    @classmethod
    def start(cls, anchor: SearchNode) -> "SegmentTrace":
        return cls((), 0.0, anchor.state.last_waypoint)

    def extend(self, ctx: SearchContext, step: Step) -> "SegmentTrace":
        travel, last = self.travel, self.last
        first_concrete = None
        for wp in (step.src, step.dst):
            if isinstance(wp, Pose):
                if last is not None:
                    travel += ctx.dist(last, wp)
                last = wp
                if first_concrete is None:
                    first_concrete = wp
        bufs = []
        for b in self.buffers:
            if b.picked:
                bufs.append(b)
                continue
            v2 = b.v2 if b.v2 is not None else first_concrete
            if step.obj == b.obj:
                bufs.append(replace(b, v2=v2, v3=self.last, picked=True))
            else:
                bufs.append(replace(b, v2=v2, during=b.during | {step}))
        if isinstance(step.dst, PendingBuffer):
            bufs.append(BufferTrace(step.obj, step.src, None, None, False, frozenset(self.steps), frozenset()))
        return SegmentTrace(self.steps + (step,), travel, last, tuple(bufs))

    def signature(self) -> tuple:
        return (self.last, tuple((b.obj, b.p_s, b.v2, b.v3, b.before, b.during) for b in self.buffers))


def trace_bound(ctx: SearchContext, anchor: SearchNode, trace: SegmentTrace, state: SearchState, cache: dict) -> tuple[float, bool]:
    extra = 0.0
    frontier = False
    away = 0
    open_bufs = {b.obj: b for b in trace.buffers if not b.picked}
    for i in ctx.away(state):
        away += 1
        b = open_bufs.get(i)
        if b is not None:
            p_n = b.v2
            if p_n is None:
                p_n = b.p_s
                frontier = True
            key = (i, b.p_s, p_n)
            r = cache.get(key)
            if r is None:
                r = cache[key] = distance_refinement(ctx, b.p_s, p_n, ctx.goal[i])
            extra += r
        else:
            extra += ctx.dist(ctx.current_pose(state, i), ctx.goal[i])
    bound = anchor.g + ctx.C * (len(trace.steps) + away) + ctx.travel_weight * (trace.travel + extra)
    return bound, frontier


# ---------------------------------------------------------------------------
# Expansion


def successor_moves(ctx: SearchContext, state: SearchState) -> list[Move]:
    """Moves allowed by the goal rule and the buffer rule, in object order."""
    moves = []
    for i in ctx.away(state):
        if not ctx.graspable(state, i):
            continue
        if ctx.available(state, i):
            moves.append(Move(i, GOAL))
        elif not (state.buffered >> i) & 1 and ctx.blocks_others(state, i):
            moves.append(Move(i, BUFFER))
    return moves


def apply_move(ctx: SearchContext, state: SearchState, move: Move, fixed: FixedBuffer | None = None) -> SearchState:
    bit = 1 << move.obj
    rest = tuple(fb for fb in state.fixed if fb.obj != move.obj)
    if move.dest == GOAL:
        buffered = state.buffered & ~bit
        lw = ctx.goal[move.obj] if buffered == 0 else None
        return SearchState(state.at_goal | bit, buffered, rest, lw)
    if fixed is not None:
        rest = tuple(sorted(rest + (fixed,), key=lambda fb: fb.obj))
        return SearchState(state.at_goal, state.buffered, rest, fixed.pose)
    return SearchState(state.at_goal, state.buffered | bit, rest, None)


def expand(ctx: SearchContext, node: SearchNode) -> list[Move]:
    return successor_moves(ctx, node.state)


# ---------------------------------------------------------------------------
# Main loop


class LazyAStar:
    """Best-first search keyed by ``(f, pending buffers, -depth, insertion)``."""

    def __init__(self, instance: Instance, config: SearchConfig | None = None, oracle: StabilityOracle | None = None):
        self.instance = instance
        self.config = config or SearchConfig()
        self.oracle = oracle or AlwaysStable()
        weight = 0.0 if self.config.planner == "orla-action" else 1.0
        self.ctx = SearchContext(instance, travel_weight=weight)
        self.eager = self.config.planner == "greedy-sampling"
        self.alloc_cfg = self.config.allocator_config
        self._ids = itertools.count()
        self._tie = itertools.count()
        self.stats = SearchStats()
        self.audit = SearchAudit() if self.config.audit else None
        self.keep_waypoint = weight > 0
        self._nds_best: dict = {}
        self._refine: dict = {}

    # -- node construction -------------------------------------------------

    def _node(self, **kw) -> SearchNode:
        return SearchNode(node_id=next(self._ids), **kw)

    def _push(self, heap, node: SearchNode) -> None:
        self.stats.generated += 1
        pending = bin(node.state.buffered).count("1")
        heapq.heappush(heap, (node.f, pending, -node.depth, next(self._tie), node))

    def _resolved_child(self, parent_ds: SearchNode, state: SearchState, actions: list[Action], depth: int) -> SearchNode:
        g = g_of_ds(self.ctx, parent_ds, actions)
        h = h_of_ds(self.ctx, state)
        return self._node(
            state=state,
            parent=parent_ds,
            move=None,
            anchor=parent_ds,
            segment=(),
            f=g + h,
            depth=depth,
            g=g,
            h=h,
            resolved=True,
            actions=tuple(actions),
        )

    def _children(self, node: SearchNode) -> list[SearchNode]:
        ctx = self.ctx
        out = []
        for mv in expand(ctx, node):
            if node.is_ds and mv.dest == GOAL:
                cur = ctx.current_pose(node.state, mv.obj)
                state = apply_move(ctx, node.state, mv)
                child = self._resolved_child(node, state, [Action(ctx.ids[mv.obj], cur, ctx.goal[mv.obj])], node.depth + 1)
                child.parent, child.move = node, mv
                out.append(child)
                continue
            if self.eager and mv.dest == BUFFER:
                fb, drawn = nearest_goal_buffer(
                    ctx, node.state, mv.obj, self.oracle, self.config.greedy_step, stack=self.alloc_cfg.stack_buffers
                )
                self.stats.buffers_sampled += drawn
                if fb is None:
                    continue
                cur = ctx.current_pose(node.state, mv.obj)
                state = apply_move(ctx, node.state, mv, fixed=fb)
                child = self._resolved_child(node, state, [Action(ctx.ids[mv.obj], cur, fb.pose)], node.depth + 1)
                child.parent, child.move = node, mv
                out.append(child)
                continue
            anchor = node if node.is_ds else node.anchor
            segment = (mv,) if node.is_ds else node.segment + (mv,)
            state = apply_move(ctx, node.state, mv)
            base = node.trace if not node.is_ds else SegmentTrace.start(anchor)
            cur = ctx.current_pose(node.state, mv.obj)
            step = Step(
                mv.obj,
                cur if cur is not None else PendingBuffer(mv.obj),
                ctx.goal[mv.obj] if mv.dest == GOAL else PendingBuffer(mv.obj),
            )
            trace = base.extend(ctx, step)
            bound, frontier = trace_bound(ctx, anchor, trace, state, self._refine)
            key = (anchor.node_id, state.at_goal, state.buffered, state.fixed, trace.signature())
            if self._nds_best.get(key, math.inf) <= bound:
                continue
            self._nds_best[key] = bound
            out.append(
                self._node(
                    state=state,
                    parent=node,
                    move=mv,
                    anchor=anchor,
                    segment=segment,
                    f=max(node.f, bound),
                    depth=node.depth + 1,
                    frontier=frontier,
                    trace=trace,
                )
            )
        return out

    def _resolve(self, node: SearchNode) -> list[SearchNode]:
        """Allocate the pending buffers of an unresolved deterministic node."""
        ctx = self.ctx
        anchor = node.anchor
        alloc = sample_buffers(
            ctx, anchor.state, node.segment, self.oracle, self.alloc_cfg, self.config.seed, node.node_id
        )
        self.stats.allocations += 1
        self.stats.buffers_sampled += alloc.samples
        if alloc.ok:
            actions = concrete_actions(ctx, alloc.steps, alloc.poses)
            node.actions = tuple(actions)
            node.g = g_of_ds(ctx, anchor, actions)
            node.h = h_of_ds(ctx, node.state)
            if self.audit is not None:
                exact = node.g + node.h
                self.audit.bound_pairs.append((node.f, exact))
                for anc in node.ancestors_since_anchor():
                    self.audit.bound_pairs.append((anc.f, exact))
            node.f = node.g + node.h
            node.resolved = True
            return [node]
        self.stats.repairs += 1
        repaired = repair_on_failure(ctx, anchor.state, alloc)
        if repaired is None:
            return []
        state, actions = repaired
        child = self._resolved_child(anchor, state, actions, anchor.depth + len(actions))
        child.parent = node
        return [child]

    def run(self) -> SearchResult:
        cfg = self.config
        ctx = self.ctx
        t0 = time.perf_counter()
        root_state = ctx.initial_state()
        h0 = h_of_ds(ctx, root_state)
        root = self._node(
            state=root_state, parent=None, move=None, anchor=None, segment=(), f=h0, depth=0, g=0.0, h=h0, resolved=True
        )
        heap: list = []
        self._push(heap, root)
        closed: set = set()
        best_g: dict = {}
        result_node = None
        while heap:
            if time.perf_counter() - t0 > cfg.timeout:
                self.stats.reason = "timeout"
                break
            if cfg.max_expansions is not None and self.stats.nodes_expanded >= cfg.max_expansions:
                self.stats.reason = "expansion budget"
                break
            node = heapq.heappop(heap)[-1]
            if not node.is_ds:
                self.stats.nds_expanded += 1
                for child in self._children(node):
                    self._push(heap, child)
                continue
            if not node.resolved:
                for child in self._resolve(node):
                    key = child.state.key(self.keep_waypoint)
                    if key in closed or best_g.get(key, math.inf) <= child.g:
                        continue
                    best_g[key] = child.g
                    self._push(heap, child)
                continue
            key = node.state.key(self.keep_waypoint)
            if key in closed:
                continue
            closed.add(key)
            self.stats.ds_expanded += 1
            if self.audit is not None:
                self.audit.expanded.append((node.state, node.g, node.h))
                self.audit.popped_f.append(node.f)
            if ctx.is_goal(node.state):
                result_node = node
                break
            for child in self._children(node):
                if child.resolved:
                    ckey = child.state.key(self.keep_waypoint)
                    if ckey in closed or best_g.get(ckey, math.inf) <= child.g:
                        continue
                    best_g[ckey] = child.g
                self._push(heap, child)
        else:
            self.stats.reason = "open list exhausted"
        self.stats.wall_time = time.perf_counter() - t0
        if result_node is None:
            return SearchResult(None, None, self.stats, audit=self.audit)
        self.stats.success = True
        self.stats.reason = "solved"
        plan = reconstruct(result_node)
        cost = plan_cost(plan, self.instance, check=False)
        return SearchResult(plan, cost, self.stats, search_cost=result_node.g, audit=self.audit)


def reconstruct(node: SearchNode) -> Plan:
    chunks = []
    while node is not None and node.anchor is not None:
        chunks.append(node.actions)
        node = node.anchor
    actions = [a for chunk in reversed(chunks) for a in chunk]
    return Plan(tuple(actions))


def plan_search(instance: Instance, config: SearchConfig | None = None, oracle: StabilityOracle | None = None) -> SearchResult:
    """Run the configured planner on ``instance``."""
    return LazyAStar(instance, config, oracle).run()
