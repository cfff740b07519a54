"""Ablation planners and a brute-force optimality oracle for tiny instances.

The oracle shares no search code with the planners: it runs A* over exact
joint states (every object at its start, its goal or a lattice pose, plus
the robot's position) with the plain action set "move any graspable object
to any free location". Footprint overlap is evaluated with shapely rather
than the planner's own collision routines.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
import shapely

from .cost import CostBreakdown
from .model import TABLE, TWO_PI, Action, Disc, Instance, Plan, Pose, Scenario, world_footprint
from .search import SearchConfig, SearchResult, plan_search
from .stability import StabilityOracle


def orla_action_search(instance: Instance, config: SearchConfig | None = None, oracle: StabilityOracle | None = None) -> SearchResult:
    """Minimize the number of pick-n-places only; reported costs still include true travel."""
    cfg = replace(config or SearchConfig(), planner="orla-action")
    return plan_search(instance, cfg, oracle)


def greedy_sampling_search(instance: Instance, config: SearchConfig | None = None, oracle: StabilityOracle | None = None) -> SearchResult:
    """Buffers are fixed on the spot, as close to the object's goal as feasible."""
    cfg = replace(config or SearchConfig(), planner="greedy-sampling")
    return plan_search(instance, cfg, oracle)


def orla_full_search(instance: Instance, config: SearchConfig | None = None, oracle: StabilityOracle | None = None) -> SearchResult:
    cfg = replace(config or SearchConfig(), planner="orla-full")
    return plan_search(instance, cfg, oracle)


# ---------------------------------------------------------------------------
# Brute-force oracle


class OracleTooLarge(RuntimeError):
    pass


@dataclass
class OracleResult:
    cost: CostBreakdown
    plan: Plan
    expanded: int

    @property
    def total(self) -> float:
        return self.cost.total

    @property
    def actions(self) -> int:
        return len(self.plan)


def _track_arc(xy: np.ndarray, width: float, depth: float) -> np.ndarray:
    hw, hd = width / 2, depth / 2
    x, y = xy[:, 0], xy[:, 1]
    gaps = np.stack([y + hd, hw - x, hd - y, x + hw])
    arcs = np.stack([x + hw, width + y + hd, width + depth + hw - x, 2 * width + depth + hd - y])
    arcs = arcs % (2 * (width + depth))
    nearest = gaps.min(axis=0)
    return np.where(gaps <= nearest + 1e-12, arcs, np.inf).min(axis=0)


class BruteForceOracle:
    """Exact A* over the discretized joint state space (n <= 3).

    Locations are the start and goal poses plus a lattice of table-level
    poses at ``resolution`` (``orientations`` yaw values for non-disc
    shapes). ``extra_poses`` adds per-object locations, e.g. buffer poses of
    a planner's path, so that arbitrary arrangements can be queried.
    """

    def __init__(
        self,
        instance: Instance,
        resolution: float = 0.05,
        orientations: int = 4,
        extra_poses: Mapping[str, list[Pose]] | None = None,
        max_states: int = 3_000_000,
        max_objects: int = 3,
    ):
        if instance.n > max_objects:
            raise OracleTooLarge(f"oracle handles at most {max_objects} objects, got {instance.n}")
        self.instance = instance
        self.resolution = resolution
        self.orientations = orientations
        self.max_states = max_states
        self.ids = instance.ids
        self.n = len(self.ids)
        self.C = instance.C
        self._build(extra_poses or {})

    # -- tables --------------------------------------------------------

    def _lattice(self) -> np.ndarray:
        t = self.instance.table
        kx = int(math.floor(t.width / 2 / self.resolution + 1e-9))
        ky = int(math.floor(t.depth / 2 / self.resolution + 1e-9))
        gx, gy = np.meshgrid(np.arange(-kx, kx + 1) * self.resolution, np.arange(-ky, ky + 1) * self.resolution)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def _build(self, extra: Mapping[str, list[Pose]]) -> None:
        inst = self.instance
        table = inst.table
        poses: list[Pose] = []
        index: dict[tuple, int] = {}

        def add(p: Pose) -> int:
            key = (round(p.x, 12), round(p.y, 12), round(p.z, 12), round(p.theta, 12))
            if key not in index:
                index[key] = len(poses)
                poses.append(p)
            return index[key]

        lattice = self._lattice()
        yaw = [k * TWO_PI / self.orientations for k in range(self.orientations)]
        self.start_loc, self.goal_loc = [], []
        self.start_sup, self.goal_sup = [], []
        allowed = []
        for i, oid in enumerate(self.ids):
            shape = inst.objects[oid]
            self.start_loc.append(add(inst.initial.pose(oid)))
            self.goal_loc.append(add(inst.goal.pose(oid)))
            self.start_sup.append(self._sup_index(inst.initial.support.get(oid, TABLE)))
            self.goal_sup.append(self._sup_index(inst.goal.support.get(oid, TABLE)))
            locs = {self.start_loc[i], self.goal_loc[i]}
            for th in ([0.0] if isinstance(shape, Disc) else yaw):
                for x, y in lattice:
                    p = Pose(float(x), float(y), 0.0, th)
                    if table.contains(shape, p):
                        locs.add(add(p))
            for p in extra.get(oid, []):
                locs.add(self._match(i, p, poses, add))
            allowed.append(np.array(sorted(locs), dtype=np.int64))
        self.poses = poses
        self.allowed = allowed
        canon: dict[tuple, int] = {}
        self.xy_id = np.array(
            [canon.setdefault((round(p.x, 12), round(p.y, 12)), k) for k, p in enumerate(poses)], dtype=np.int64
        )
        xy = np.array([[p.x, p.y] for p in poses])
        if inst.scenario is Scenario.EE:
            self.dist = np.hypot(xy[:, 0][:, None] - xy[:, 0][None], xy[:, 1][:, None] - xy[:, 1][None])
        else:
            s = _track_arc(xy, table.width, table.depth)
            per = 2 * (table.width + table.depth)
            d = np.abs(s[:, None] - s[None]) % per
            self.dist = np.minimum(d, per - d)
        # pairwise collision tables on each object's allowed locations
        self.coll = {}
        for i in range(self.n):
            for j in range(i + 1, self.n):
                m = self._collisions(i, j)
                self.coll[(i, j)] = m
                self.coll[(j, i)] = m.T
        self.pos_in = []
        for i in range(self.n):
            lookup = np.full(len(poses), -1, dtype=np.int64)
            lookup[allowed[i]] = np.arange(len(allowed[i]))
            self.pos_in.append(lookup)

    def _sup_index(self, s: str) -> int:
        return -1 if s == TABLE else self.ids.index(s)

    def _match(self, i: int, p: Pose, poses, add) -> int:
        shape = self.instance.objects[self.ids[i]]
        for k in (self.start_loc[i], self.goal_loc[i]):
            if p.close_to(poses[k], ignore_theta=isinstance(shape, Disc)):
                return k
        if isinstance(shape, Disc):
            p = Pose(p.x, p.y, p.z, 0.0)
        return add(p)

    def _collisions(self, i: int, j: int) -> np.ndarray:
        inst = self.instance
        si, sj = inst.objects[self.ids[i]], inst.objects[self.ids[j]]
        pi = [self.poses[k] for k in self.allowed[i]]
        pj = [self.poses[k] for k in self.allowed[j]]
        zi = np.array([[p.z, p.z + si.height] for p in pi])
        zj = np.array([[p.z, p.z + sj.height] for p in pj])
        zhit = (zi[:, 0][:, None] < zj[:, 1][None] - 1e-9) & (zj[:, 0][None] < zi[:, 1][:, None] - 1e-9)
        if isinstance(si, Disc) and isinstance(sj, Disc):
            a = np.array([[p.x, p.y] for p in pi])
            b = np.array([[p.x, p.y] for p in pj])
            d = np.hypot(a[:, 0][:, None] - b[:, 0][None], a[:, 1][:, None] - b[:, 1][None])
            return zhit & (d < si.radius + sj.radius - 1e-9)
        ga = np.array([world_footprint(si, p) for p in pi], dtype=object)
        gb = np.array([world_footprint(sj, p) for p in pj], dtype=object)
        shapely.prepare(ga)
        inter = shapely.intersects(ga[:, None], gb[None, :])
        touch = shapely.touches(ga[:, None], gb[None, :])
        return zhit & inter & ~touch

    # -- state predicates ------------------------------------------------

    def _loc_of(self, oid: str, p: Pose) -> int:
        i = self.ids.index(oid)
        shape = self.instance.objects[oid]
        for k in self.allowed[i]:
            if p.close_to(self.poses[k], ignore_theta=isinstance(shape, Disc)):
                return int(k)
        raise KeyError(f"pose of {oid} is not an oracle location; pass it in extra_poses")

    def _rests_on(self, locs: tuple, j: int) -> int:
        """Index of the object ``j`` rests on, or -1 for the table."""
        if locs[j] == self.goal_loc[j] and self.goal_sup[j] >= 0:
            return self.goal_sup[j]
        if locs[j] == self.start_loc[j] and self.start_sup[j] >= 0:
            return self.start_sup[j]
        return -1

    def _graspable(self, locs: tuple, i: int) -> bool:
        return not any(j != i and self._rests_on(locs, j) == i for j in range(self.n))

    def _supported(self, locs: tuple, i: int, dest: int) -> bool:
        p = self.poses[dest]
        if p.z <= 1e-9:
            return True
        for loc, sup in ((self.goal_loc[i], self.goal_sup[i]), (self.start_loc[i], self.start_sup[i])):
            if dest == loc and sup >= 0:
                ref = self.goal_loc[sup] if loc == self.goal_loc[i] else self.start_loc[sup]
                return locs[sup] == ref
        return False

    def _free_mask(self, locs: tuple, i: int) -> np.ndarray:
        ok = np.ones(len(self.allowed[i]), dtype=bool)
        for j in range(self.n):
            if j != i:
                ok &= ~self.coll[(i, j)][:, self.pos_in[j][locs[j]]]
        return ok

    # -- search ----------------------------------------------------------

    def _h(self, locs: tuple, target: tuple) -> float:
        return sum(self.C + self.dist[a, b] for a, b in zip(locs, target) if a != b)

    def solve(
        self,
        start: Mapping[str, Pose] | None = None,
        robot: Pose | None = None,
        target: Mapping[str, Pose] | None = None,
        target_robot: Pose | None = None,
        upper_bound: float | None = None,
    ) -> OracleResult | None:
        """Cheapest plan from ``start`` (initial arrangement) to ``target`` (goal).

        ``robot`` is where the robot stands initially (None: at its first
        pick, no lead-in). With ``target_robot`` the robot must end there.
        States whose optimistic cost exceeds ``upper_bound`` are pruned, so
        None is returned if no plan within the bound exists.
        """
        inst = self.instance
        src = tuple(
            self._loc_of(o, (start or {}).get(o, inst.initial.pose(o))) if start else self.start_loc[k]
            for k, o in enumerate(self.ids)
        )
        dst = tuple(
            self._loc_of(o, target[o]) if target else self.goal_loc[k] for k, o in enumerate(self.ids)
        )
        r0 = -1 if robot is None else self._robot_loc(robot)
        rt = None if target_robot is None else self._robot_loc(target_robot)
        start_key = (src, r0)
        g = {start_key: 0.0}
        parent: dict = {start_key: None}
        tie = itertools.count()
        heap = [(self._h(src, dst), next(tie), start_key)]
        closed = set()
        while heap:
            f, _, key = heapq.heappop(heap)
            if key in closed:
                continue
            closed.add(key)
            if len(closed) > self.max_states:
                raise OracleTooLarge(f"more than {self.max_states} states expanded")
            locs, r = key
            if locs == dst and (rt is None or r == rt):
                return self._result(key, parent, len(closed))
            gk = g[key]
            for i in range(self.n):
                if not self._graspable(locs, i):
                    continue
                cur = locs[i]
                free = self._free_mask(locs, i)
                cand = self.allowed[i][free]
                cand = cand[cand != cur]
                lead = 0.0 if r < 0 else self.dist[r, cur]
                step = gk + self.C + lead + self.dist[cur, cand]
                h_rest = self._h(locs[:i] + locs[i + 1 :], dst[:i] + dst[i + 1 :])
                hd = np.where(cand == dst[i], 0.0, self.C + self.dist[cand, dst[i]])
                fs = step + h_rest + hd
                keep = np.ones(len(cand), dtype=bool) if upper_bound is None else fs <= upper_bound + 1e-9
                for d, gn, fn in zip(cand[keep], step[keep], fs[keep]):
                    d = int(d)
                    if self.poses[d].z > 1e-9 and not self._supported(locs, i, d):
                        continue
                    nl = locs[:i] + (d,) + locs[i + 1 :]
                    nk = (nl, int(self.xy_id[d]))
                    if nk in closed or g.get(nk, math.inf) <= gn:
                        continue
                    g[nk] = float(gn)
                    parent[nk] = (key, i, cur, d)
                    heapq.heappush(heap, (float(fn), next(tie), nk))
        return None

    def _robot_loc(self, p: Pose) -> int:
        for k, q in enumerate(self.poses):
            if abs(q.x - p.x) <= 1e-9 and abs(q.y - p.y) <= 1e-9:
                return int(self.xy_id[k])
        raise KeyError("robot position is not an oracle location")

    def _result(self, key, parent, expanded: int) -> OracleResult:
        acts = []
        while parent[key] is not None:
            prev, i, a, b = parent[key]
            acts.append(Action(self.ids[i], self.poses[a], self.poses[b]))
            key = prev
        acts.reverse()
        travel = 0.0
        last = None
        for act in acts:
            a = self._robot_loc(act.start)
            b = self._robot_loc(act.target)
            travel += (0.0 if last is None else self.dist[last, a]) + self.dist[a, b]
            last = b
        return OracleResult(CostBreakdown(float(travel), self.C * len(acts)), Plan(tuple(acts)), expanded)


def brute_force_oracle(instance: Instance, buffer_grid_resolution: float = 0.05, **kw) -> OracleResult | None:
    """Optimal plan over the lattice-discretized action space."""
    return BruteForceOracle(instance, buffer_grid_resolution, **kw).solve()
