"""Helpers that check search traces against the brute-force oracle."""

from __future__ import annotations

from lazy_rearrange.baselines import BruteForceOracle
from lazy_rearrange.state import SearchContext


def state_poses(ctx: SearchContext, state) -> dict:
    return {ctx.ids[i]: ctx.current_pose(state, i) for i in range(ctx.n)}


def cost_through(instance, ctx: SearchContext, state, resolution: float = 0.05) -> float:
    """Cheapest total cost of any plan passing through ``state`` with the robot at its last waypoint."""
    poses = state_poses(ctx, state)
    extra = {oid: [p] for oid, p in poses.items()}
    oracle = BruteForceOracle(instance, resolution, extra_poses=extra)
    lw = state.last_waypoint
    if lw is None:
        to = 0.0
    else:
        res = oracle.solve(target=poses, target_robot=lw)
        if res is None:
            return float("inf")
        to = res.total
    rest = oracle.solve(start=poses, robot=lw)
    return float("inf") if rest is None else to + rest.total


def admissibility_violations(instance, result, optimum: float, resolution: float = 0.05, tol: float = 1e-6, exhaustive: bool = False):
    """Expanded deterministic states whose g + h exceeds the oracle cost through them.

    Any state's cost-through is at least the global optimum, so states with
    g + h below ``optimum`` need no oracle call unless ``exhaustive`` is set.
    """
    ctx = SearchContext(instance)
    bad = []
    checked = 0
    for state, g, h in result.audit.expanded:
        if not exhaustive and g + h <= optimum + tol:
            continue
        checked += 1
        through = cost_through(instance, ctx, state, resolution)
        if g + h > through + tol:
            bad.append((state, g + h, through))
    return bad, checked


def bound_violations(result, tol: float = 1e-6):
    return [(f, exact) for f, exact in result.audit.bound_pairs if f > exact + tol]


def monotone_violations(result, tol: float = 1e-9):
    seq = result.audit.popped_f
    return [(a, b) for a, b in zip(seq, seq[1:]) if b < a - tol]
