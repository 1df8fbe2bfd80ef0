"""Command line entry point: ``robust-mapf {solve,validate,simulate,experiment,render}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import GridMap, MapParseError, MapfInstance, Plan, instance_from_json, load_map, load_scen, validate_plan
from .maps import BUILTIN, builtin_map
from .sim import IntruderConfig, JitterModel, ReplanPolicy, SimConfig, render_frames, run as simulate, trace_from_json
from .solver import SolverTimeout, Unsolvable, solve


class CliError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise CliError(f"{path}: {e.strerror or e}") from None


def _load_grid(ref: str, base: Path | None = None) -> GridMap:
    if ref in BUILTIN:
        return builtin_map(ref)
    p = Path(ref)
    if base is not None and not p.is_absolute() and not p.exists():
        p = base / p
    try:
        return load_map(_read(str(p)), name=p.stem)
    except MapParseError as e:
        raise CliError(f"{p}: {e}") from None


def load_instance(path: str, map_ref: str | None = None, n_agents: int | None = None) -> MapfInstance:
    """JSON instance (inline map or map reference) or a ``.scen`` file with ``--map``."""
    text = _read(path)
    try:
        if path.endswith(".scen"):
            if map_ref is None:
                raise CliError(f"{path}: a .scen instance needs --map")
            return load_scen(text, _load_grid(map_ref), n_agents)
        data = json.loads(text)
        grid = None
        ref = map_ref or (data.get("map") if isinstance(data.get("map"), str) else None)
        if ref is not None:
            grid = _load_grid(ref, Path(path).parent)
        return instance_from_json(data, grid)
    except (MapParseError, ValueError, KeyError) as e:
        raise CliError(f"{path}: {e}") from None


def load_plan(path: str, instance: MapfInstance) -> Plan:
    text = _read(path)
    try:
        if path.endswith(".csv"):
            return Plan.from_csv(text, instance.map, {a.id: a.start for a in instance.agents})
        return Plan.from_json(json.loads(text), instance.map)
    except (ValueError, KeyError) as e:
        raise CliError(f"{path}: malformed plan ({e})") from None


def _emit(args, text: str, default_name: str) -> None:
    if args.out:
        out = Path(args.out)
        if out.suffix == "":
            out.mkdir(parents=True, exist_ok=True)
            out = out / default_name
        out.write_text(text)
    else:
        sys.stdout.write(text)


def _out_dir(args, default: str) -> Path:
    d = Path(args.out or default)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(f"{d}: {e.strerror or e}") from None
    return d


def cmd_solve(args) -> int:
    inst = load_instance(args.instance, args.map, args.agents)
    try:
        plan = solve(inst, time_budget_ms=args.budget_ms, max_work=args.max_work)
    except SolverTimeout as e:
        print(f"timeout: {e}", file=sys.stderr)
        return 3
    except Unsolvable as e:
        print(f"unsolvable: {e}", file=sys.stderr)
        return 2
    if args.format == "csv":
        _emit(args, plan.to_csv(inst.map), "plan.csv")
    else:
        _emit(args, json.dumps(plan.to_json(inst.map), sort_keys=True) + "\n", "plan.json")
    return 0


def cmd_validate(args) -> int:
    inst = load_instance(args.instance, args.map, args.agents)
    plan = load_plan(args.plan, inst)
    report = validate_plan(inst, plan)
    if not report:
        print("ok: plan is 1-robust")
        return 0
    for c in report:
        print(c.describe(inst.map))
    return 1


def _parse_xy(text: str) -> tuple[int, int]:
    try:
        x, y = (int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from None
    return x, y


def cmd_simulate(args) -> int:
    inst = load_instance(args.instance, args.map, args.agents)
    plan = load_plan(args.plan, inst)
    bad = validate_plan(inst, plan)
    if bad:
        for c in bad:
            print(c.describe(inst.map), file=sys.stderr)
        raise CliError(f"{args.plan}: plan is not 1-robust")
    intruder = None
    if args.intruder or args.intruder_vertex:
        v = inst.map.vertex(*args.intruder_vertex) if args.intruder_vertex else None
        intruder = IntruderConfig(args.appear_ms, args.disappear_ms, vertex=v, agent=args.intruder_agent)
    if args.clock == "wall":
        mode = "wall-clock"
    else:
        mode = "jittered-virtual" if args.jitter else "exact-virtual"
    cfg = SimConfig(
        clock_mode=mode,
        jitter=JitterModel() if args.jitter else None,
        intruder=intruder,
        replan=ReplanPolicy(args.policy, threshold_ms=args.threshold_ms),
        rng_seed=args.seed,
        solver_budget_ms=args.budget_ms,
        solver_max_work=args.max_work,
    )
    trace = simulate(inst, plan, cfg)
    timings = args.record_timings or args.clock == "wall"
    out = _out_dir(args, "sim-out")
    (out / "summary.json").write_text(trace.summary_json(timings))
    (out / "events.csv").write_text(trace.events_csv())
    (out / "actions.csv").write_text(trace.actions_csv())
    (out / "trace.json").write_text(json.dumps(trace.to_json(timings), sort_keys=True) + "\n")
    print(f"soc_ms={trace.soc_ms} makespan_ms={trace.makespan_ms} replanned={int(trace.replanned)} -> {out}")
    return 0


def cmd_experiment(args) -> int:
    from .harness import preset, run_study, summary_markdown, write_study

    overrides = {"threshold_ms": args.threshold_ms, "solver_budget_ms": args.budget_ms,
                 "instance_seed": args.seed, "record_timings": args.record_timings or args.clock == "wall"}
    if args.clock == "wall":
        overrides["clock_mode"] = "wall-clock"
    if args.instances is not None:
        overrides["n_instances"] = args.instances
    if args.seeds is not None:
        overrides["seeds"] = tuple(range(args.seeds))
    try:
        spec = preset(args.preset, **overrides)
    except KeyError as e:
        raise CliError(str(e.args[0])) from None
    if args.maps:
        unknown = [m for m in args.maps if m not in spec.agent_counts]
        if unknown:
            raise CliError(f"maps {unknown} are not part of preset {spec.name!r}")
        from dataclasses import replace

        spec = replace(spec, agent_counts={m: spec.agent_counts[m] for m in args.maps})

    def progress(i, n):
        if not args.quiet and (i % 25 == 0 or i == n):
            print(f"  {i}/{n} experiments", file=sys.stderr)

    solved, results = run_study(spec, workers=args.workers, progress=progress)
    out = _out_dir(args, f"results-{spec.name}")
    summary = write_study(out, solved, results)
    sys.stdout.write(summary_markdown(summary))
    print(f"{len(results)} experiments -> {out / 'results.csv'}")
    return 0


def cmd_render(args) -> int:
    path = Path(args.trace)
    if path.is_dir():
        path = path / "trace.json"
    try:
        trace = trace_from_json(json.loads(_read(str(path))))
    except (ValueError, KeyError) as e:
        raise CliError(f"{path}: malformed trace ({e})") from None
    frames = render_frames(trace)
    out = _out_dir(args, "frames")
    width = len(str(len(frames)))
    for i, f in enumerate(frames):
        (out / f"frame_{i:0{width}d}.txt").write_text(f)
    print(f"{len(frames)} frames -> {out}")
    return 0


def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    def d(v):
        return argparse.SUPPRESS if suppress else v

    p.add_argument("--seed", type=int, default=d(0), help="random seed (default 0)")
    p.add_argument("--clock", choices=["virtual", "wall"], default=d("virtual"))
    p.add_argument("--threshold-ms", type=int, default=d(2000), help="fleet slack replan threshold")
    p.add_argument("--budget-ms", type=float, default=d(None),
                   help="solver wall-time budget; unset keeps virtual runs machine-independent")
    p.add_argument("--max-work", type=int, default=d(3_000_000), help="solver low-level expansion budget")
    p.add_argument("--out", default=d(None), help="output file or directory")
    p.add_argument("--record-timings", action="store_true", default=d(False),
                   help="write solver wall times into outputs (breaks byte-identical reruns)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-mapf", description="1-robust MAPF planning and execution")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _common(p, suppress=True)
        return p

    def instance_args(p):
        p.add_argument("instance", help="instance .json or .scen")
        p.add_argument("--map", help="map file or built-in name (" + ", ".join(sorted(BUILTIN)) + ")")
        p.add_argument("--agents", type=int, help="number of .scen rows to use")

    p = add("solve", "compute a SOC-optimal 1-robust plan")
    instance_args(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_solve)

    p = add("validate", "report conflicts of a plan")
    instance_args(p)
    p.add_argument("plan", help="plan .json or .csv")
    p.set_defaults(func=cmd_validate)

    p = add("simulate", "execute a plan")
    instance_args(p)
    p.add_argument("plan", help="plan .json or .csv")
    p.add_argument("--policy", choices=["none", "random", "predictive"], default="none")
    p.add_argument("--intruder", action="store_true", help="spawn an intruder at a random agent's route")
    p.add_argument("--intruder-vertex", type=_parse_xy, help="fixed intruder cell x,y")
    p.add_argument("--intruder-agent", type=int, help="fixed victim agent")
    p.add_argument("--appear-ms", type=int, default=3000)
    p.add_argument("--disappear-ms", type=int, default=10000)
    p.add_argument("--jitter", action="store_true", help="add seeded lognormal action delays")
    p.set_defaults(func=cmd_simulate)

    p = add("experiment", "run the four-part intruder study")
    p.add_argument("--preset", default="desk", help="paper, paper-lab, desk or smoke")
    p.add_argument("--maps", nargs="+", help="restrict to these maps of the preset")
    p.add_argument("--instances", type=int, help="instances per map and agent count")
    p.add_argument("--seeds", type=int, help="number of seeds (0..n-1)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = add("render", "write text frames from a simulation trace")
    p.add_argument("trace", help="trace.json or a simulate output directory")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
