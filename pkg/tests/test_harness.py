import math

import pytest

from lazy_rearrange.cost import CostBreakdown
from lazy_rearrange.harness import (
    CatalogEntry,
    GenerationError,
    box,
    commonly_solved,
    disc_radius,
    generate_disc_instance,
    generate_shape_instance,
    planner_configs,
    run_benchmark,
    verify_plan,
)
from lazy_rearrange.model import Action, Plan, Pose, validate_arrangement
from lazy_rearrange.search import plan_search

from conftest import disc_instance


def test_disc_radius_from_density():
    # rho = n * pi * r^2 / table area
    assert disc_radius(5, 0.2, 1.0) == pytest.approx(math.sqrt(0.2 / (5 * math.pi)))
    assert disc_radius(5, 0.2, 1.0) == pytest.approx(0.1128, abs=1e-4)
    assert disc_radius(5, 0.2, 3.0) == pytest.approx(0.1954, abs=1e-4)


@pytest.mark.parametrize("scenario,n", [("EE", 5), ("MB", 5), ("EE", 10), ("MB", 15)])
def test_generated_instances_valid_and_dense(scenario, n):
    inst = generate_disc_instance(n, 0.2, scenario, 3)
    assert validate_arrangement(inst.initial, inst).valid and validate_arrangement(inst.goal, inst).valid
    assert inst.density == pytest.approx(0.2, abs=1e-9)
    assert (inst.table.width, inst.table.depth) == ((1.0, 1.0) if scenario == "EE" else (3.0, 1.0))


def test_generation_is_deterministic():
    a, b = generate_disc_instance(5, 0.2, "EE", 9), generate_disc_instance(5, 0.2, "EE", 9)
    assert a.initial == b.initial and a.goal == b.goal and a.instance_id == b.instance_id
    assert generate_disc_instance(5, 0.2, "EE", 10).initial != a.initial


def test_generation_errors(monkeypatch):
    with pytest.raises(ValueError):
        generate_disc_instance(5, 0.6, "EE", 0)
    with pytest.raises(ValueError):
        generate_disc_instance(0, 0.2, "EE", 0)
    import lazy_rearrange.harness as harness

    monkeypatch.setattr(harness, "POSE_BUDGET", 20)
    with pytest.raises(GenerationError):
        generate_disc_instance(30, 0.45, "EE", 0)


def test_shape_instance_area_and_stacking():
    unit = [CatalogEntry("sq", box(1.0, 1.0, 0.1))]
    inst = generate_shape_instance(unit, 4, 0.25, "EE", 0)
    assert inst.table.width * inst.table.depth == pytest.approx(16.0)
    stacked = generate_shape_instance(None, 6, 0.25, "EE", 2)
    assert stacked.goal.support.get("cup1") == "plate0"
    assert validate_arrangement(stacked.goal, stacked).valid
    again = generate_shape_instance(None, 6, 0.25, "EE", 2)
    assert again.goal == stacked.goal


def test_verify_plan_cases(swap_instance):
    empty = disc_instance([(0, 0)], [(0, 0)])
    assert verify_plan(empty, Plan(())).valid
    res = plan_search(swap_instance)
    stale = CostBreakdown(res.cost.travel + 0.5, res.cost.manipulation)
    rep = verify_plan(swap_instance, res.plan, stale)
    assert rep.valid and rep.cost_mismatch and rep.warnings
    bad = Plan((Action("o1", Pose(-0.2, 0), Pose(0.2, 0)),))
    rep = verify_plan(swap_instance, bad)
    assert not rep.valid and rep.failed_step == 0


def test_verify_rejects_covered_pick():
    inst = generate_shape_instance(None, 2, 0.25, "EE", 0)
    # cup1 rests on plate0 at the goal; start from the goal and try to move the plate
    from lazy_rearrange.model import Instance

    rev = Instance(inst.objects, inst.goal, inst.initial, inst.table, inst.scenario, inst.C)
    plate = rev.initial.pose("plate0")
    rep = verify_plan(rev, Plan((Action("plate0", plate, inst.initial.pose("plate0")),)))
    assert not rep.valid and rep.failed_step == 0 and "graspable" in rep.reason


def test_benchmark_rows_summary_and_timeouts():
    insts = [generate_disc_instance(4, 0.2, "EE", s) for s in range(2)] + [generate_disc_instance(12, 0.3, "EE", 0)]
    cfgs = planner_configs(["orla-full", "orla-action", "greedy-sampling"], max_expansions=400)
    res = run_benchmark(insts, cfgs)
    assert len(res.rows) == 9
    assert [(r.instance_id, r.planner) for r in res.rows] == sorted((r.instance_id, r.planner) for r in res.rows)
    for r in res.rows:
        if r.success:
            assert r.verified and r.total == pytest.approx(r.travel + r.manipulation, abs=1e-12)
            assert r.actions_per_object == pytest.approx(r.actions / r.n)
    assert any(not r.success for r in res.rows)
    common = commonly_solved(res.rows, ["orla-full", "orla-action"])
    a, b, count = res.common_means("orla-full", "orla-action", "travel")
    assert count == len(common) >= 2
    text = res.to_csv()
    assert "# summary" in text and "wall_time" not in text
    assert "wall_time" in res.to_csv(include_timing=True)
    assert run_benchmark(insts, cfgs).to_csv() == text


def test_parallel_benchmark_matches_serial():
    insts = [generate_disc_instance(3, 0.2, "MB", s) for s in range(2)]
    cfgs = planner_configs(["orla-full", "orla-action"])
    assert run_benchmark(insts, cfgs, jobs=2).to_csv() == run_benchmark(insts, cfgs).to_csv()
