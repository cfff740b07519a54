import json

import pytest

from lazy_rearrange.cli import main
from lazy_rearrange.harness import generate_disc_instance, generate_shape_instance
from lazy_rearrange.io import (
    ParseError,
    instance_from_json,
    instance_to_json,
    plan_from_json,
    plan_to_json,
    read_instance,
    read_plan,
    write_instance,
    write_plan,
)
from lazy_rearrange.model import Gridded
from lazy_rearrange.search import plan_search


@pytest.mark.parametrize("inst", [generate_disc_instance(4, 0.2, "MB", 1), generate_shape_instance(None, 6, 0.25, "EE", 2)])
def test_instance_round_trip(tmp_path, inst):
    path = tmp_path / "i.json"
    write_instance(inst, path)
    back = read_instance(path)
    assert back.objects == inst.objects and back.initial == inst.initial and back.goal == inst.goal
    assert back.table == inst.table and back.scenario == inst.scenario and back.instance_id == inst.instance_id


def test_gridded_round_trip():
    inst = generate_disc_instance(1, 0.2, "EE", 0)
    d = instance_to_json(inst)
    d["objects"]["o0"] = {"type": "gridded", "mask": [[1, 1], [1, 0]], "depth": [[0, 0], [0, 0]], "resolution": 0.05, "height": 0.04}
    back = instance_from_json(json.loads(json.dumps(d)))
    assert isinstance(back.objects["o0"], Gridded)


def test_plan_round_trip(tmp_path, swap_instance):
    res = plan_search(swap_instance)
    write_plan(res.plan, tmp_path / "p.json", res.cost, planner="orla-full")
    plan, cost = read_plan(tmp_path / "p.json")
    assert plan == res.plan and cost == res.cost
    assert plan_from_json(plan_to_json(res.plan))[1] is None


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda d: d.pop("table"), "table"),
        (lambda d: d["initial"]["o0"].update(pose=[0, 0]), "initial.o0.pose"),
        (lambda d: d["objects"]["o0"].update(type="blob"), "objects.o0.type"),
        (lambda d: d.update(scenario="XX"), "scenario"),
        (lambda d: d["goal"].pop("o1"), "goal.o1"),
        (lambda d: d["objects"]["o0"].update(radius="big"), "objects.o0.radius"),
    ],
)
def test_parse_errors_name_the_field(mutate, field):
    d = instance_to_json(generate_disc_instance(2, 0.2, "EE", 0))
    mutate(d)
    with pytest.raises(ParseError) as err:
        instance_from_json(d)
    assert err.value.field == field


def test_cli_round_trip(tmp_path, capsys):
    inst, plan = tmp_path / "i.json", tmp_path / "p.json"
    assert main(["gen", "--n", "3", "--scenario", "mb", "--seed", "4", "--out", str(inst)]) == 0
    assert main(["plan", "--instance", str(inst), "--out", str(plan)]) == 0
    assert main(["verify", "--instance", str(inst), "--plan", str(plan)]) == 0
    assert "PASS" in capsys.readouterr().out
    meta = json.loads(plan.read_text())
    assert meta["robot_start"] == "first pick" and meta["planner"] == "orla-full"


def test_cli_verify_failures(tmp_path, capsys):
    inst, plan = tmp_path / "i.json", tmp_path / "p.json"
    main(["gen", "--n", "3", "--seed", "1", "--out", str(inst)])
    main(["plan", "--instance", str(inst), "--out", str(plan)])
    d = json.loads(plan.read_text())
    d["actions"] = d["actions"][1:]
    plan.write_text(json.dumps(d))
    assert main(["verify", "--instance", str(inst), "--plan", str(plan)]) == 1
    d = json.loads(plan.read_text())
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["verify", "--instance", str(tmp_path / "bad.json"), "--plan", str(plan)]) == 2
    assert main(["gen", "--n", "3", "--rho", "0.7"]) == 2
    assert main(["plan", "--instance", str(tmp_path / "missing.json")]) == 2
    assert main(["plan"]) == 2


def test_cli_bench_deterministic(tmp_path):
    d = tmp_path / "insts"
    d.mkdir()
    for s in range(2):
        main(["gen", "--n", "3", "--seed", str(s), "--out", str(d / f"i{s}.json")])
    outs = []
    for k in range(2):
        out = tmp_path / f"b{k}.csv"
        assert main(["bench", "--instances-dir", str(d), "--planners", "orla-full", "greedy-sampling", "--csv-out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] and b"# summary" in outs[0]
    assert main(["bench", "--instances-dir", str(tmp_path / "nothing")]) == 2


def test_cli_shapes_with_support_polygon(tmp_path):
    inst = tmp_path / "s.json"
    assert main(["gen", "--n", "4", "--shapes", "default", "--rho", "0.25", "--seed", "2", "--out", str(inst)]) == 0
    assert main(["plan", "--instance", str(inst), "--stability", "support-polygon", "--timeout", "60"]) == 0
