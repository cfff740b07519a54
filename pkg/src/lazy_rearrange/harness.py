"""Instance generation, plan verification and benchmark sweeps."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .cost import CostBreakdown, plan_cost
from .geometry import footprints_collide
from .model import (
    TWO_PI,
    Arrangement,
    Disc,
    Instance,
    InvalidPlanError,
    Plan,
    Pose,
    Prism,
    Scenario,
    Table,
    replay_plan,
)
from .search import SearchConfig, SearchResult, plan_search
from .stability import make_oracle

POSE_BUDGET = 100_000
DISC_HEIGHT = 0.05
COST_TOL = 1e-9


class GenerationError(RuntimeError):
    pass


def table_for(scenario: Scenario | str, area: float | None = None) -> Table:
    """1x1 (EE) or 3x1 (MB) table, or the scenario's aspect ratio scaled to ``area``."""
    aspect = 1.0 if Scenario(scenario) is Scenario.EE else 3.0
    if area is None:
        return Table(aspect, 1.0)
    depth = math.sqrt(area / aspect)
    return Table(aspect * depth, depth)


def disc_radius(n: int, rho: float, table_area: float) -> float:
    return math.sqrt(rho * table_area / (n * math.pi))


def _sample_flat(shapes: Sequence, table: Table, rng: np.random.Generator, fixed: Sequence[tuple] = ()) -> list[Pose]:
    """Collision-free table-level poses, one per shape, by rejection sampling."""
    placed: list[tuple] = list(fixed)
    out = []
    hw, hd = table.width / 2, table.depth / 2
    for shape in shapes:
        rb = shape.bounding_radius if not isinstance(shape, Disc) else shape.radius
        for _ in range(POSE_BUDGET):
            theta = 0.0 if isinstance(shape, Disc) else float(rng.uniform(0.0, TWO_PI))
            mx, my = max(hw - rb, 0.0), max(hd - rb, 0.0)
            pose = Pose(float(rng.uniform(-mx, mx)), float(rng.uniform(-my, my)), 0.0, theta)
            if not table.contains(shape, pose):
                continue
            if any(footprints_collide(shape, pose, s, p) for s, p in placed):
                continue
            break
        else:
            raise GenerationError(f"no collision-free pose after {POSE_BUDGET} attempts")
        placed.append((shape, pose))
        out.append(pose)
    return out


def generate_disc_instance(n: int, rho: float, scenario: Scenario | str = "EE", seed: int = 0, C: float = 10.0) -> Instance:
    """``n`` equal discs filling a fraction ``rho`` of the scenario's standard table."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < rho < 0.5:
        raise ValueError("rho must lie in (0, 0.5)")
    scenario = Scenario(str(scenario).upper())
    table = table_for(scenario)
    r = disc_radius(n, rho, table.area)
    shape = Disc(r, DISC_HEIGHT)
    rng = np.random.default_rng(seed)
    ids = [f"o{k}" for k in range(n)]
    start = _sample_flat([shape] * n, table, rng)
    goal = _sample_flat([shape] * n, table, rng)
    iid = f"{scenario.value.lower()}-n{n}-rho{rho:g}-s{seed}"
    return Instance(
        {o: shape for o in ids},
        Arrangement(dict(zip(ids, start))),
        Arrangement(dict(zip(ids, goal))),
        table,
        scenario,
        C,
        iid,
    )


@dataclass(frozen=True)
class CatalogEntry:
    """Shape template; ``stack_on`` names an entry the object may rest on at its goal."""

    name: str
    shape: object
    stack_on: str | None = None


def box(w: float, d: float, h: float) -> Prism:
    return Prism(((-w / 2, -d / 2), (w / 2, -d / 2), (w / 2, d / 2), (-w / 2, d / 2)), h)


def default_catalog() -> list[CatalogEntry]:
    return [
        CatalogEntry("plate", Disc(0.10, 0.02)),
        CatalogEntry("cup", Disc(0.04, 0.10), stack_on="plate"),
        CatalogEntry("box", box(0.12, 0.08, 0.06)),
        CatalogEntry("book", box(0.16, 0.10, 0.03)),
        CatalogEntry("wedge", Prism(((-0.06, -0.05), (0.07, -0.05), (0.0, 0.07)), 0.05)),
    ]


def generate_shape_instance(
    catalog: Sequence[CatalogEntry] | None,
    n: int,
    rho: float,
    scenario: Scenario | str = "EE",
    seed: int = 0,
    C: float = 10.0,
) -> Instance:
    """Mixed-shape instance; the table is scaled so footprint area over table area equals ``rho``.

    Objects whose catalog entry has ``stack_on`` are stacked, in the goal, on
    the first unclaimed object of that entry type when one exists.
    """
    catalog = list(catalog or default_catalog())
    if not catalog:
        raise ValueError("catalog must be nonempty")
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    scenario = Scenario(str(scenario).upper())
    rng = np.random.default_rng(seed)
    picks = [catalog[k % len(catalog)] for k in range(n)]
    ids = [f"{e.name}{k}" for k, e in enumerate(picks)]
    objects = {oid: e.shape for oid, e in zip(ids, picks)}
    table = table_for(scenario, sum(s.area for s in objects.values()) / rho)
    start = _sample_flat([e.shape for e in picks], table, rng)

    # goal: stack children on unclaimed parents, sample the rest flat
    parent_of: dict[int, int] = {}
    claimed: set[int] = set()
    for k, e in enumerate(picks):
        if e.stack_on is None:
            continue
        for j, pe in enumerate(picks):
            if pe.name == e.stack_on and j not in claimed and j != k:
                parent_of[k] = j
                claimed.add(j)
                break
    flat_idx = [k for k in range(n) if k not in parent_of]
    flat_goal = _sample_flat([picks[k].shape for k in flat_idx], table, rng)
    goal_pose: dict[int, Pose] = dict(zip(flat_idx, flat_goal))
    support = {}
    for k, j in parent_of.items():
        base = goal_pose[j]
        goal_pose[k] = Pose(base.x, base.y, base.z + picks[j].shape.height, 0.0)
        support[ids[k]] = ids[j]
    iid = f"{scenario.value.lower()}-shapes-n{n}-rho{rho:g}-s{seed}"
    return Instance(
        objects,
        Arrangement(dict(zip(ids, start))),
        Arrangement({ids[k]: goal_pose[k] for k in range(n)}, support),
        table,
        scenario,
        C,
        iid,
    )


# ---------------------------------------------------------------------------
# Verification


@dataclass
class VerificationReport:
    valid: bool
    cost: CostBreakdown | None = None
    failed_step: int | None = None
    reason: str = ""
    cost_mismatch: bool = False
    warnings: list[str] = field(default_factory=list)


def verify_plan(instance: Instance, plan: Plan, claimed: CostBreakdown | None = None, tol: float = COST_TOL) -> VerificationReport:
    """Replay ``plan`` and recompute its cost; a stale claimed cost only warns."""
    try:
        replay_plan(instance, plan)
    except InvalidPlanError as exc:
        return VerificationReport(False, failed_step=exc.step, reason=str(exc))
    cost = plan_cost(plan, instance, check=False)
    report = VerificationReport(True, cost)
    if claimed is not None:
        if abs(claimed.travel - cost.travel) > tol or abs(claimed.manipulation - cost.manipulation) > tol:
            report.cost_mismatch = True
            report.warnings.append(
                f"claimed cost {claimed.total:.9g} differs from recomputed {cost.total:.9g}"
            )
    return report


# ---------------------------------------------------------------------------
# Benchmarks


@dataclass
class BenchmarkRow:
    instance_id: str
    n: int
    rho: float
    scenario: str
    planner: str
    success: bool
    actions: int | None
    actions_per_object: float | None
    travel: float | None
    manipulation: float | None
    total: float | None
    wall_time: float
    nodes_expanded: int
    verified: bool | None = None


CSV_VERSION = "1"


def run_one(instance: Instance, config: SearchConfig, stability: str = "always") -> tuple[BenchmarkRow, SearchResult]:
    """Plan one instance and summarize it as a row; the search result is returned alongside."""
    res = plan_search(instance, config, make_oracle(stability))
    st = res.stats
    if res.plan is None:
        row = BenchmarkRow(
            instance.instance_id, instance.n, instance.density, instance.scenario.value, config.planner,
            False, None, None, None, None, None, st.wall_time, st.nodes_expanded,
        )
        return row, res
    report = verify_plan(instance, res.plan, res.cost)
    cost = report.cost if report.valid else res.cost
    row = BenchmarkRow(
        instance.instance_id,
        instance.n,
        instance.density,
        instance.scenario.value,
        config.planner,
        True,
        len(res.plan),
        len(res.plan) / instance.n,
        cost.travel,
        cost.manipulation,
        cost.total,
        st.wall_time,
        st.nodes_expanded,
        report.valid and not report.cost_mismatch,
    )
    return row, res


def _run_pair(args):
    inst, cfg, stability = args
    return run_one(inst, cfg, stability)


@dataclass
class BenchmarkResult:
    rows: list[BenchmarkRow]
    results: dict = field(default_factory=dict)  # (instance id, planner) -> SearchResult

    def summary(self) -> list[dict]:
        """Success rates and means over instances solved by both planners of each pair."""
        planners = sorted({r.planner for r in self.rows})
        by = {(r.instance_id, r.planner): r for r in self.rows}
        ids = sorted({r.instance_id for r in self.rows})
        out = []
        for p in planners:
            runs = [by[(i, p)] for i in ids if (i, p) in by]
            out.append(
                {"kind": "success_rate", "planner": p, "other": "", "count": len(runs),
                 "value": sum(r.success for r in runs) / len(runs) if runs else float("nan")}
            )
        for a_i, a in enumerate(planners):
            for b in planners[a_i + 1 :]:
                common = [i for i in ids if (i, a) in by and (i, b) in by and by[(i, a)].success and by[(i, b)].success]
                for metric in ("actions", "travel", "total"):
                    for p, q in ((a, b), (b, a)):
                        vals = [getattr(by[(i, p)], metric) for i in common]
                        out.append(
                            {"kind": f"mean_{metric}", "planner": p, "other": q, "count": len(common),
                             "value": float(np.mean(vals)) if vals else float("nan")}
                        )
        return out

    def common_means(self, a: str, b: str, metric: str) -> tuple[float, float, int]:
        by = {(r.instance_id, r.planner): r for r in self.rows}
        ids = sorted({r.instance_id for r in self.rows})
        common = [i for i in ids if (i, a) in by and (i, b) in by and by[(i, a)].success and by[(i, b)].success]
        if not common:
            return float("nan"), float("nan"), 0
        va = [getattr(by[(i, a)], metric) for i in common]
        vb = [getattr(by[(i, b)], metric) for i in common]
        return float(np.mean(va)), float(np.mean(vb)), len(common)

    def to_csv(self, include_timing: bool = False) -> str:
        """Rows, then a summary table; wall time is left out unless asked for so reruns are byte-identical."""
        cols = [f.name for f in fields(BenchmarkRow) if include_timing or f.name != "wall_time"]
        buf = io.StringIO()
        buf.write(f"# benchmark csv v{CSV_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in cols])
        buf.write("# summary\n")
        w.writerow(["kind", "planner", "other", "count", "value"])
        for s in self.summary():
            w.writerow([s["kind"], s["planner"], s["other"], s["count"], _fmt(s["value"])])
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_benchmark(
    instances: Iterable[Instance],
    configs: Sequence[SearchConfig],
    jobs: int = 1,
    stability: str = "always",
) -> BenchmarkResult:
    """Run every (instance, planner) pair; rows come back ordered by (instance id, planner)."""
    tasks = [(inst, cfg, stability) for inst in instances for cfg in configs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(_run_pair, tasks))
    else:
        pairs = [_run_pair(t) for t in tasks]
    rows = sorted((row for row, _ in pairs), key=lambda r: (r.instance_id, r.planner))
    results = {(row.instance_id, row.planner): res for row, res in pairs}
    return BenchmarkResult(rows, results)


def planner_configs(names: Sequence[str], **kw) -> list[SearchConfig]:
    base = SearchConfig(**kw)
    return [replace(base, planner=name) for name in names]


def commonly_solved(rows: Sequence[BenchmarkRow], planners: Sequence[str]) -> list[str]:
    by = {(r.instance_id, r.planner): r for r in rows}
    ids = sorted({r.instance_id for r in rows})
    return [i for i in ids if all((i, p) in by and by[(i, p)].success for p in planners)]


__all__ = [
    "BenchmarkResult",
    "BenchmarkRow",
    "CatalogEntry",
    "GenerationError",
    "VerificationReport",
    "commonly_solved",
    "default_catalog",
    "disc_radius",
    "generate_disc_instance",
    "generate_shape_instance",
    "planner_configs",
    "run_benchmark",
    "run_one",
    "table_for",
    "verify_plan",
]
