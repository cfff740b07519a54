"""Search states, nodes and the per-instance lookup tables used by the planners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

from .geometry import Track, footprints_collide, track_distance
from .model import TABLE, Action, Disc, Instance, Pose, Scenario, goal_ancestors

GOAL = "goal"
BUFFER = "buffer"


@dataclass(frozen=True)
class Move:
    """Abstract action: send object ``obj`` to its goal or to a (possibly pending) buffer."""

    obj: int
    dest: str


@dataclass(frozen=True)
class FixedBuffer:
    """Object parked at a concrete buffer pose, resting on ``support`` (-1 for the table)."""

    obj: int
    pose: Pose
    support: int = -1


@dataclass(frozen=True)
class SearchState:
    """Object locations: goal bitmask, pending-buffer bitmask and concrete buffers.

    Objects in none of these sit at their start pose.
    """

    at_goal: int
    buffered: int = 0
    fixed: tuple[FixedBuffer, ...] = ()
    last_waypoint: Pose | None = None

    @property
    def is_ds(self) -> bool:
        return self.buffered == 0

    @property
    def fixed_mask(self) -> int:
        m = 0
        for fb in self.fixed:
            m |= 1 << fb.obj
        return m

    def fixed_of(self, i: int) -> FixedBuffer | None:
        for fb in self.fixed:
            if fb.obj == i:
                return fb
        return None

    def key(self, keep_waypoint: bool = True) -> tuple:
        return (self.at_goal, self.fixed, self.last_waypoint if keep_waypoint else None)


@dataclass(eq=False)
class SearchNode:
    state: SearchState
    parent: "SearchNode | None"
    move: Move | None
    anchor: "SearchNode | None"
    segment: tuple[Move, ...]
    f: float
    depth: int
    node_id: int
    g: float | None = None
    h: float | None = None
    resolved: bool = False
    actions: tuple[Action, ...] = ()
    frontier: bool = False  # a pending buffer's next visit is not decided yet
    trace: object = None  # incremental segment bookkeeping (search module)

    @property
    def is_ds(self) -> bool:
        return self.state.is_ds

    def ancestors_since_anchor(self) -> Iterator["SearchNode"]:
        node = self.parent
        while node is not None and node is not self.anchor:
            yield node
            node = node.parent


@dataclass
class SearchContext:
    """Per-instance tables: poses by index, blocking and support relations, metrics."""

    instance: Instance
    travel_weight: float = 1.0
    ids: list[str] = field(init=False)
    shapes: list = field(init=False)
    start: list[Pose] = field(init=False)
    goal: list[Pose] = field(init=False)

    def __post_init__(self):
        inst = self.instance
        self.ids = inst.ids
        self.index = {oid: k for k, oid in enumerate(self.ids)}
        self.n = len(self.ids)
        self.full = (1 << self.n) - 1
        self.shapes = [inst.objects[o] for o in self.ids]
        self.start = [inst.initial.pose(o) for o in self.ids]
        self.goal = [inst.goal.pose(o) for o in self.ids]
        self.C = inst.C
        self.scenario = inst.scenario
        self.track = Track.of(inst.table)
        self._proj: dict[tuple[float, float], float] = {}
        n = self.n
        self.start_blocks_goal = [0] * n
        for i in range(n):
            for j in range(n):
                if i != j and footprints_collide(self.shapes[i], self.goal[i], self.shapes[j], self.start[j]):
                    self.start_blocks_goal[i] |= 1 << j
        self.start_children = [0] * n
        self.goal_children = [0] * n
        self.goal_ancestors = [0] * n
        for j, oid in enumerate(self.ids):
            s = inst.initial.support.get(oid, TABLE)
            if s != TABLE:
                self.start_children[self.index[s]] |= 1 << j
            s = inst.goal.support.get(oid, TABLE)
            if s != TABLE:
                self.goal_children[self.index[s]] |= 1 << j
            for anc in goal_ancestors(oid, inst.goal):
                self.goal_ancestors[j] |= 1 << self.index[anc]
        self.start_support = [
            self.index.get(inst.initial.support.get(o, TABLE), -1) for o in self.ids
        ]
        self.goal_support = [self.index.get(inst.goal.support.get(o, TABLE), -1) for o in self.ids]
        # initially at goal counts as goal from the start
        self.initial_goal_mask = 0
        for i, oid in enumerate(self.ids):
            if inst.at_goal(oid, self.start[i]):
                self.initial_goal_mask |= 1 << i
        self._fixed_blocks: dict[tuple[int, Pose, int], bool] = {}
        self.transfer = [self.dist(self.start[i], self.goal[i]) for i in range(n)]

    # -- metrics ---------------------------------------------------------

    def project(self, p: Pose) -> float:
        key = (p.x, p.y)
        s = self._proj.get(key)
        if s is None:
            s = self.track.point_to_param(p.x, p.y)
            self._proj[key] = s
        return s

    def dist(self, p: Pose | None, q: Pose | None) -> float:
        if p is None or q is None:
            return 0.0
        if self.scenario is Scenario.EE:
            return math.hypot(p.x - q.x, p.y - q.y)
        return track_distance(self.project(p), self.project(q), self.track)

    # -- locations and predicates ----------------------------------------

    def start_mask(self, st: SearchState) -> int:
        return self.full & ~st.at_goal & ~st.buffered & ~st.fixed_mask

    def current_pose(self, st: SearchState, i: int) -> Pose | None:
        bit = 1 << i
        if st.at_goal & bit:
            return self.goal[i]
        if st.buffered & bit:
            return None
        fb = st.fixed_of(i)
        if fb is not None:
            return fb.pose
        return self.start[i]

    def graspable(self, st: SearchState, i: int, removed: int = 0) -> bool:
        bit = 1 << i
        if st.buffered & bit:
            return True
        present_start = self.start_mask(st) & ~removed
        if st.at_goal & bit:
            if self.goal_children[i] & st.at_goal & ~removed:
                return False
        elif not (st.fixed_mask & bit):
            if self.start_children[i] & present_start:
                return False
        for fb in st.fixed:
            if fb.support == i and not (removed >> fb.obj) & 1:
                return False
        return True

    def fixed_blocks_goal(self, fb: FixedBuffer, i: int) -> bool:
        key = (fb.obj, fb.pose, i)
        hit = self._fixed_blocks.get(key)
        if hit is None:
            hit = footprints_collide(self.shapes[i], self.goal[i], self.shapes[fb.obj], fb.pose)
            self._fixed_blocks[key] = hit
        return hit

    def available(self, st: SearchState, i: int, removed: int = 0) -> bool:
        present_start = self.start_mask(st) & ~removed & ~(1 << i)
        if self.start_blocks_goal[i] & present_start:
            return False
        if self.goal_ancestors[i] & ~st.at_goal:
            return False
        for fb in st.fixed:
            if fb.obj != i and not (removed >> fb.obj) & 1 and self.fixed_blocks_goal(fb, i):
                return False
        return True

    def blocks_others(self, st: SearchState, i: int) -> bool:
        """Whether taking ``i`` away lets some other object become graspable or goal-available."""
        removed = 1 << i
        for j in range(self.n):
            if j == i or (st.at_goal >> j) & 1:
                continue
            if not self.graspable(st, j) and self.graspable(st, j, removed):
                return True
            if not self.available(st, j) and self.available(st, j, removed):
                return True
        return False

    def away(self, st: SearchState) -> Iterator[int]:
        for i in range(self.n):
            if not (st.at_goal >> i) & 1:
                yield i

    def is_goal(self, st: SearchState) -> bool:
        return st.at_goal == self.full and st.buffered == 0 and not st.fixed

    def ds_heuristic(self, st: SearchState) -> float:
        if not st.is_ds:
            raise ValueError("heuristic is defined on deterministic states only")
        h = 0.0
        for i in self.away(st):
            h += self.travel_weight * self.dist(self.current_pose(st, i), self.goal[i]) + self.C
        return h

    def initial_state(self) -> SearchState:
        return SearchState(at_goal=self.initial_goal_mask)
