"""Plan cost: robot travel plus a constant charge per pick-n-place."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import Track, dist_ee, track_distance, track_project
from .model import Action, Instance, Plan, Pose, Scenario, replay_plan


@dataclass(frozen=True)
class CostBreakdown:
    travel: float
    manipulation: float

    @property
    def total(self) -> float:
        return self.travel + self.manipulation

    def as_dict(self) -> dict:
        return {"travel": self.travel, "manipulation": self.manipulation, "total": self.total}


def leg_distance(scenario: Scenario | str, start: Pose, end: Pose, instance: Instance) -> float:
    """Travel for one robot leg: x-y end-effector distance (EE) or base arc length (MB)."""
    if Scenario(scenario) is Scenario.EE:
        return dist_ee(start, end)
    track = Track.of(instance.table)
    return track_distance(track_project(start, track), track_project(end, track), track)


def waypoints(actions: Iterable[Action]) -> list[Pose]:
    """Robot stops in order: pick then place for every action."""
    out: list[Pose] = []
    for act in actions:
        out.append(act.start)
        out.append(act.target)
    return out


def path_travel(points: Sequence[Pose], instance: Instance, start: Pose | None = None) -> float:
    seq = ([start] if start is not None else []) + list(points)
    return sum(leg_distance(instance.scenario, a, b, instance) for a, b in zip(seq, seq[1:]))


def segment_cost(start: Pose | None, actions: Sequence[Action], instance: Instance) -> float:
    """Cost of executing ``actions`` with the robot starting at ``start`` (None: at the first pick)."""
    return path_travel(waypoints(actions), instance, start) + instance.C * len(actions)


def plan_cost(plan: Plan | Sequence[Action], instance: Instance, check: bool = True) -> CostBreakdown:
    """Travel (transfer and transit legs, no lead-in or return) plus C per action.

    Raises InvalidPlanError when ``check`` is set and the plan is not executable.
    """
    actions = list(plan)
    if check:
        replay_plan(instance, actions)
    travel = path_travel(waypoints(actions), instance)
    return CostBreakdown(travel, instance.C * len(actions))
