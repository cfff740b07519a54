"""JSON reading and writing for instances and plans."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from .cost import CostBreakdown
from .model import TABLE, Action, Arrangement, Disc, Gridded, Instance, Plan, Pose, Prism, Scenario, Table

FORMAT_VERSION = 1


class ParseError(ValueError):
    """Malformed input file; ``field`` names the offending entry."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}" if field else reason)
        self.field = field


def _number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(field, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ParseError(field, "must be finite")
    return float(value)


def _require(obj: dict, key: str, field: str):
    if not isinstance(obj, dict):
        raise ParseError(field, "expected an object")
    if key not in obj:
        raise ParseError(f"{field}.{key}" if field else key, "missing")
    return obj[key]


def pose_to_list(p: Pose) -> list[float]:
    return [p.x, p.y, p.z, p.theta]


def pose_from_json(value, field: str) -> Pose:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ParseError(field, "pose must be [x, y, z, theta]")
    vals = [_number(v, f"{field}[{k}]") for k, v in enumerate(value)]
    try:
        return Pose(*vals)
    except ValueError as exc:
        raise ParseError(field, str(exc)) from None


def shape_to_json(shape) -> dict:
    if isinstance(shape, Disc):
        return {"type": "disc", "radius": shape.radius, "height": shape.height}
    if isinstance(shape, Prism):
        return {"type": "prism", "vertices": [list(v) for v in shape.vertices], "height": shape.height}
    return {
        "type": "gridded",
        "mask": [[int(c) for c in row] for row in shape.mask],
        "depth": [list(row) for row in shape.depth],
        "resolution": shape.resolution,
        "height": shape.height,
    }


def shape_from_json(d: dict, field: str):
    kind = _require(d, "type", field)
    try:
        if kind == "disc":
            return Disc(_number(_require(d, "radius", field), f"{field}.radius"), _number(_require(d, "height", field), f"{field}.height"))
        if kind == "prism":
            verts = _require(d, "vertices", field)
            if not isinstance(verts, list):
                raise ParseError(f"{field}.vertices", "expected a list")
            pts = [
                (_number(v[0], f"{field}.vertices[{k}]"), _number(v[1], f"{field}.vertices[{k}]"))
                for k, v in enumerate(verts)
            ]
            return Prism(tuple(pts), _number(_require(d, "height", field), f"{field}.height"))
        if kind == "gridded":
            return Gridded(
                _require(d, "mask", field),
                _require(d, "depth", field),
                _number(_require(d, "resolution", field), f"{field}.resolution"),
                _number(_require(d, "height", field), f"{field}.height"),
            )
    except (ValueError, TypeError, IndexError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(field, str(exc)) from None
    raise ParseError(f"{field}.type", f"unknown shape type {kind!r}")


def arrangement_to_json(arr: Arrangement) -> dict:
    return {
        oid: {"pose": pose_to_list(arr.pose(oid)), "support": arr.support.get(oid, TABLE)} for oid in arr.states
    }


def arrangement_from_json(d, field: str) -> Arrangement:
    if not isinstance(d, dict):
        raise ParseError(field, "expected an object keyed by object id")
    states, support = {}, {}
    for oid, entry in d.items():
        f = f"{field}.{oid}"
        states[oid] = pose_from_json(_require(entry, "pose", f), f"{f}.pose")
        sup = entry.get("support", TABLE)
        if not isinstance(sup, str):
            raise ParseError(f"{f}.support", "expected an object id or 'table'")
        support[oid] = sup
    return Arrangement(states, support)


def instance_to_json(inst: Instance) -> dict:
    return {
        "format": FORMAT_VERSION,
        "id": inst.instance_id,
        "scenario": inst.scenario.value,
        "C": inst.C,
        "table": {"width": inst.table.width, "depth": inst.table.depth},
        "objects": {oid: shape_to_json(s) for oid, s in inst.objects.items()},
        "initial": arrangement_to_json(inst.initial),
        "goal": arrangement_to_json(inst.goal),
    }


def instance_from_json(d: dict[str, Any]) -> Instance:
    if not isinstance(d, dict):
        raise ParseError("", "instance must be a JSON object")
    scen = d.get("scenario", "EE")
    try:
        scenario = Scenario(str(scen).upper())
    except ValueError:
        raise ParseError("scenario", f"expected EE or MB, got {scen!r}") from None
    tbl = _require(d, "table", "")
    try:
        table = Table(_number(_require(tbl, "width", "table"), "table.width"), _number(_require(tbl, "depth", "table"), "table.depth"))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError("table", str(exc)) from None
    objs = _require(d, "objects", "")
    if not isinstance(objs, dict) or not objs:
        raise ParseError("objects", "expected a nonempty object")
    objects = {oid: shape_from_json(s, f"objects.{oid}") for oid, s in objs.items()}
    initial = arrangement_from_json(_require(d, "initial", ""), "initial")
    goal = arrangement_from_json(_require(d, "goal", ""), "goal")
    for name, arr in (("initial", initial), ("goal", goal)):
        missing = set(objects) - set(arr.states)
        extra = set(arr.states) - set(objects)
        if missing:
            raise ParseError(f"{name}.{sorted(missing)[0]}", "missing pose")
        if extra:
            raise ParseError(f"{name}.{sorted(extra)[0]}", "unknown object")
    C = _number(d.get("C", 10.0), "C")
    return Instance(objects, initial, goal, table, scenario, C, str(d.get("id", "")))


def plan_to_json(plan: Plan, cost: CostBreakdown | None = None, **meta) -> dict:
    out: dict[str, Any] = {
        "format": FORMAT_VERSION,
        "actions": [
            {"object": a.object, "start": pose_to_list(a.start), "target": pose_to_list(a.target)} for a in plan
        ],
    }
    if cost is not None:
        out["cost"] = cost.as_dict()
    out.update(meta)
    return out


def plan_from_json(d: dict[str, Any]) -> tuple[Plan, CostBreakdown | None]:
    acts = _require(d, "actions", "")
    if not isinstance(acts, list):
        raise ParseError("actions", "expected a list")
    actions = []
    for k, a in enumerate(acts):
        f = f"actions[{k}]"
        obj = _require(a, "object", f)
        start = pose_from_json(_require(a, "start", f), f"{f}.start")
        target = pose_from_json(_require(a, "target", f), f"{f}.target")
        try:
            actions.append(Action(str(obj), start, target))
        except ValueError as exc:
            raise ParseError(f, str(exc)) from None
    cost = None
    if "cost" in d:
        c = d["cost"]
        cost = CostBreakdown(_number(_require(c, "travel", "cost"), "cost.travel"), _number(_require(c, "manipulation", "cost"), "cost.manipulation"))
    return Plan(tuple(actions)), cost


def _load(path: str | Path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError("", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None


def _dump(obj: Any, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def read_instance(path: str | Path) -> Instance:
    return instance_from_json(_load(path))


def write_instance(inst: Instance, path: str | Path) -> None:
    _dump(instance_to_json(inst), path)


def read_plan(path: str | Path) -> tuple[Plan, CostBreakdown | None]:
    return plan_from_json(_load(path))


def write_plan(plan: Plan, path: str | Path, cost: CostBreakdown | None = None, **meta) -> None:
    _dump(plan_to_json(plan, cost, **meta), path)
