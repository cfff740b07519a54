"""Command line entry point: gen, plan, verify, bench.

Exit codes: 0 success, 1 planning or verification failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    CatalogEntry,
    GenerationError,
    default_catalog,
    generate_disc_instance,
    generate_shape_instance,
    planner_configs,
    run_benchmark,
    verify_plan,
)
from .io import ParseError, read_instance, read_plan, shape_from_json, write_instance, write_plan
from .model import MalformedInstanceError
from .planner import RearrangementPlanner, check_instance
from .search import PLANNERS

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def load_catalog(source: str) -> list[CatalogEntry]:
    if source == "default":
        return default_catalog()
    try:
        data = json.loads(Path(source).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read catalog {source}: {exc}") from None
    if not isinstance(data, list) or not data:
        raise InputError("catalog must be a nonempty JSON list")
    out = []
    for k, e in enumerate(data):
        if not isinstance(e, dict) or "name" not in e or "shape" not in e:
            raise InputError(f"catalog[{k}] needs 'name' and 'shape'")
        out.append(CatalogEntry(str(e["name"]), shape_from_json(e["shape"], f"catalog[{k}].shape"), e.get("stack_on")))
    return out


def _load_instance(path: str):
    try:
        return check_instance(read_instance(path))
    except OSError as exc:
        raise InputError(str(exc)) from None


def cmd_gen(args) -> int:
    if args.shapes:
        inst = generate_shape_instance(load_catalog(args.shapes), args.n, args.rho, args.scenario, args.seed)
    else:
        inst = generate_disc_instance(args.n, args.rho, args.scenario, args.seed)
    if args.out:
        write_instance(inst, args.out)
    else:
        from .io import instance_to_json

        json.dump(instance_to_json(inst), sys.stdout, indent=1)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_plan(args) -> int:
    inst = _load_instance(args.instance)
    est = RearrangementPlanner(
        planner=args.planner,
        allocator=args.allocator,
        stability=args.stability,
        seed=args.seed,
        timeout=args.timeout,
    ).fit()
    res = est.plan(inst)
    st = res.stats
    print(
        f"{inst.instance_id or args.instance}: {args.planner} "
        f"{'solved' if res.success else 'failed (' + st.reason + ')'} "
        f"expanded={st.nodes_expanded} time={st.wall_time:.2f}s"
    )
    if not res.success:
        return EXIT_FAIL
    print(f"actions={len(res.plan)} travel={res.cost.travel:.6f} manipulation={res.cost.manipulation:g} total={res.cost.total:.6f}")
    if args.out:
        stats = st.as_dict()
        stats.pop("wall_time")
        write_plan(
            res.plan,
            args.out,
            res.cost,
            instance_id=inst.instance_id,
            planner=args.planner,
            robot_start="first pick",
            stats=stats,
        )
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _load_instance(args.instance)
    try:
        plan, claimed = read_plan(args.plan)
    except OSError as exc:
        raise InputError(str(exc)) from None
    rep = verify_plan(inst, plan, claimed)
    if not rep.valid:
        print(f"FAIL at step {rep.failed_step}: {rep.reason}")
        return EXIT_FAIL
    for w in rep.warnings:
        print(f"warning: {w}")
    print(f"PASS actions={len(plan)} travel={rep.cost.travel:.6f} total={rep.cost.total:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    files = sorted(Path(args.instances_dir).glob("*.json"))
    if not files:
        raise InputError(f"no instance files in {args.instances_dir}")
    insts = [_load_instance(str(f)) for f in files]
    for p in args.planners:
        if p not in PLANNERS:
            raise InputError(f"unknown planner {p!r}")
    configs = planner_configs(args.planners, allocator=args.allocator, timeout=args.timeout, seed=args.seed)
    result = run_benchmark(insts, configs, jobs=args.jobs, stability=args.stability)
    text = result.to_csv(include_timing=args.include_timing)
    if args.csv_out:
        Path(args.csv_out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lazy-rearrange", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--rho", type=float, default=0.2)
    g.add_argument("--scenario", type=str.lower, choices=["ee", "mb"], default="ee")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--shapes", help="shape catalog JSON, or 'default'; discs when omitted")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", help="plan an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--planner", choices=PLANNERS, default="orla-full")
    p.add_argument("--stability", choices=["always", "support-polygon"], default="always")
    p.add_argument("--allocator", choices=["sampling", "grid-optimal"], default="sampling")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    v = sub.add_parser("verify", help="replay a plan and recompute its cost")
    v.add_argument("--instance", required=True)
    v.add_argument("--plan", required=True)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="run planners over a directory of instances")
    b.add_argument("--instances-dir", required=True)
    b.add_argument("--planners", nargs="+", default=list(PLANNERS))
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--csv-out")
    b.add_argument("--allocator", choices=["sampling", "grid-optimal"], default="sampling")
    b.add_argument("--stability", choices=["always", "support-polygon"], default="always")
    b.add_argument("--timeout", type=float, default=300.0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--include-timing", action="store_true", help="add the wall_time column (breaks byte-identical reruns)")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ParseError, MalformedInstanceError, GenerationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
