"""Instance generation, the four-run intruder experiment, metrics and summaries.

Every experiment executes the same base plan four times: without an
intruder (the lower bound), with an intruder and no replanning, with a
replan at a random time, and with slack-triggered replanning.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .core import Agent, GridMap, MapfInstance, Plan
from .maps import builtin_map
from .sim import ClockMode, IntruderConfig, ReplanPolicy, SimConfig, run as simulate
from .solver import CBS, SolverError, SolverTimeout, Unsolvable

RESULT_COLUMNS = [
    "map", "n_agents", "instance_id", "seed",
    "tc_lb", "tc_n", "tc_r", "tc_p",
    "replanned_pred", "t_replan_rand", "t_replan_pred",
    "solver_ms_rand", "solver_ms_pred", "outlier_flags",
    # extras: machine-independent solver effort and failure bookkeeping
    "solver_nodes_rand", "solver_nodes_pred", "replanned_rand", "valid", "error",
]


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    agent_counts: dict[str, tuple[int, ...]]
    n_instances: int = 20
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    intruder: IntruderConfig = IntruderConfig()
    threshold_ms: int = 2000
    solver_budget_ms: float | None = None
    generation_max_work: int = 400_000
    replan_max_work: int = 3_000_000
    max_retries: int = 200
    margin_frac: float = 0.02
    instance_seed: int = 0
    clock_mode: ClockMode = "exact-virtual"
    record_timings: bool = False

    def __post_init__(self):
        if not self.agent_counts:
            raise ValueError("experiment needs at least one map")
        for m, counts in self.agent_counts.items():
            if not counts or any(c <= 0 for c in counts):
                raise ValueError(f"agent counts for {m} must be positive")
        if self.n_instances <= 0 or not self.seeds:
            raise ValueError("need at least one instance and one seed")

    @property
    def maps(self) -> list[str]:
        return list(self.agent_counts)

    def n_experiments(self) -> int:
        return sum(len(c) for c in self.agent_counts.values()) * self.n_instances * len(self.seeds)


PRESETS = {
    "paper": ExperimentSpec(
        "paper",
        {"lab": (5, 10, 15), "arena": (10, 15, 20, 25), "room32": (5, 10, 15), "random32": (5, 10, 15)},
    ),
    "paper-lab": ExperimentSpec("paper-lab", {"lab": (5, 10, 15)}, seeds=(0,)),
    "desk": ExperimentSpec("desk", {"room32": (5, 10, 15), "random32": (5, 10, 15)}),
    "smoke": ExperimentSpec("smoke", {"room32": (5,), "random32": (5,)}, n_instances=2, seeds=(0, 1)),
}


def preset(name: str, **overrides) -> ExperimentSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(spec, **overrides) if overrides else spec


# -- instances ---------------------------------------------------------------


@dataclass
class SolvedInstance:
    map_name: str
    instance_id: int
    instance: MapfInstance
    plan: Plan
    solver_nodes: int = 0


def _sample(grid: GridMap, n_agents: int, rng: random.Random) -> MapfInstance:
    free = list(grid.vertices)
    while True:
        starts = rng.sample(free, n_agents)
        goals = rng.sample(free, n_agents)
        if all(s != g for s, g in zip(starts, goals)):
            return MapfInstance(grid, tuple(Agent(k, s, g) for k, (s, g) in enumerate(zip(starts, goals))))


def generate_solved(
    grid: GridMap,
    n_agents: int,
    n_instances: int,
    rng: random.Random,
    max_work: int | None = 400_000,
    time_budget_ms: float | None = None,
    max_retries: int = 200,
) -> list[SolvedInstance]:
    """Random instances that the solver finishes within the budget, with their plans.

    A work budget (low-level expansions) rather than wall time keeps the
    accepted set identical on every machine.
    """
    if len(grid.vertices) < 2 * n_agents:
        raise GenerationError(f"map {grid.name!r} has too few free cells for {n_agents} agents")
    out = []
    failures = 0
    while len(out) < n_instances:
        inst = _sample(grid, n_agents, rng)
        cbs = CBS(inst, time_budget_ms, max_work=max_work)
        try:
            plan = cbs.solve()
        except (SolverTimeout, Unsolvable):
            failures += 1
            if failures > max_retries:
                raise GenerationError(
                    f"map {grid.name!r}, {n_agents} agents: gave up after {failures} rejected samples"
                ) from None
            continue
        out.append(SolvedInstance(grid.name, len(out), inst, plan, cbs.stats.expanded))
    return out


def generate_instances(grid: GridMap, n_agents: int, n_instances: int, rng: random.Random, **kw) -> list[MapfInstance]:
    return [s.instance for s in generate_solved(grid, n_agents, n_instances, rng, **kw)]


def _instance_rng(spec: ExperimentSpec, map_name: str, n_agents: int) -> random.Random:
    return random.Random(f"{spec.instance_seed}/{map_name}/{n_agents}")


# -- experiments ---------------------------------------------------------------


@dataclass
class ExperimentResult:
    map: str
    n_agents: int
    instance_id: int
    seed: int
    tc_lb: int = 0
    tc_n: int = 0
    tc_r: int = 0
    tc_p: int = 0
    replanned_pred: bool = False
    replanned_rand: bool = False
    t_replan_rand: int | None = None
    t_replan_pred: int | None = None
    solver_ms_rand: float | None = None
    solver_ms_pred: float | None = None
    solver_nodes_rand: int | None = None
    solver_nodes_pred: int | None = None
    outlier_flags: str = ""
    valid: bool = True
    error: str = ""

    @property
    def key(self):
        return (self.map, self.n_agents, self.instance_id, self.seed)

    @property
    def impact(self) -> int:
        return self.tc_n - self.tc_lb

    @property
    def impact_r(self) -> int:
        return self.tc_r - self.tc_lb

    @property
    def impact_p(self) -> int:
        return self.tc_p - self.tc_lb

    @property
    def tc_d(self) -> int:
        return self.tc_p - self.tc_r

    @property
    def m_r(self) -> float:
        return mitigation(self.impact, self.impact_r)

    @property
    def m_p(self) -> float:
        return mitigation(self.impact, self.impact_p)

    @property
    def m_r_literal(self) -> float:
        return self.impact_r / self.impact if self.impact else math.nan

    @property
    def m_p_literal(self) -> float:
        return self.impact_p / self.impact if self.impact else math.nan

    def row(self) -> dict:
        def opt(v, digits=None):
            if v is None:
                return ""
            return round(v, digits) if digits is not None else v

        return {
            "map": self.map, "n_agents": self.n_agents, "instance_id": self.instance_id, "seed": self.seed,
            "tc_lb": self.tc_lb, "tc_n": self.tc_n, "tc_r": self.tc_r, "tc_p": self.tc_p,
            "replanned_pred": int(self.replanned_pred),
            "t_replan_rand": opt(self.t_replan_rand), "t_replan_pred": opt(self.t_replan_pred),
            "solver_ms_rand": opt(self.solver_ms_rand, 3), "solver_ms_pred": opt(self.solver_ms_pred, 3),
            "outlier_flags": self.outlier_flags,
            "solver_nodes_rand": opt(self.solver_nodes_rand), "solver_nodes_pred": opt(self.solver_nodes_pred),
            "replanned_rand": int(self.replanned_rand), "valid": int(self.valid), "error": self.error,
        }


def mitigation(impact: float, impact_x: float) -> float:
    """Share of the intruder's cost increase removed: ``(I - I^X) / I``; NaN when ``I == 0``."""
    if impact == 0:
        return math.nan
    return (impact - impact_x) / impact


def outlier_flags(r: ExperimentResult, margin_frac: float = 0.02) -> str:
    """Comma-joined flags ``a`` / ``b`` / ``c`` (empty when the result is regular).

    a: predictive did not replan yet beat random by more than the margin;
    b: both replanned within 1 s of each other but ended more than the margin apart;
    c: some run finished below the intruder-free lower bound.
    """
    margin = margin_frac * r.tc_lb
    flags = []
    if not r.replanned_pred and r.tc_r - r.tc_p > margin:
        flags.append("a")
    if (r.replanned_pred and r.replanned_rand and r.t_replan_pred is not None and r.t_replan_rand is not None
            and abs(r.t_replan_pred - r.t_replan_rand) <= 1000 and abs(r.tc_p - r.tc_r) > margin):
        flags.append("b")
    if min(r.tc_n, r.tc_r, r.tc_p) < r.tc_lb:
        flags.append("c")
    return ",".join(flags)


def run_experiment(solved: SolvedInstance, seed: int, spec: ExperimentSpec) -> ExperimentResult:
    inst, plan = solved.instance, solved.plan
    res = ExperimentResult(solved.map_name, len(inst.agents), solved.instance_id, seed)
    # the seed picks independent streams per instance so random draws are not shared across instances
    stream = random.Random(f"{seed}/{solved.map_name}/{len(inst.agents)}/{solved.instance_id}").getrandbits(32)
    base = SimConfig(
        clock_mode=spec.clock_mode,
        rng_seed=stream,
        solver_budget_ms=spec.solver_budget_ms,
        solver_max_work=spec.replan_max_work,
    )
    try:
        lb = simulate(inst, plan, base, check=False)
        with_intruder = replace(base, intruder=spec.intruder)
        tn = simulate(inst, plan, with_intruder, check=False)
        window_end = lb.makespan_ms - 3000
        rand_cfg = replace(with_intruder, replan=ReplanPolicy(
            "random", window_start_ms=spec.intruder.appear_at, window_end_ms=window_end))
        tr = simulate(inst, plan, rand_cfg, check=False)
        pred_cfg = replace(with_intruder, replan=ReplanPolicy("predictive", threshold_ms=spec.threshold_ms))
        tp = simulate(inst, plan, pred_cfg, check=False)
    except (SolverError, RuntimeError, ValueError) as e:
        res.valid = False
        res.error = f"{type(e).__name__}: {e}"
        return res
    res.tc_lb, res.tc_n, res.tc_r, res.tc_p = lb.soc_ms, tn.soc_ms, tr.soc_ms, tp.soc_ms
    res.replanned_rand = tr.replanned
    res.replanned_pred = tp.replanned
    res.t_replan_rand = tr.replan_ms
    res.t_replan_pred = tp.replan_ms
    for trace, which in ((tr, "rand"), (tp, "pred")):
        if trace.replans:
            ev = trace.replans[0]
            setattr(res, f"solver_nodes_{which}", ev.solver_nodes)
            if spec.record_timings or spec.clock_mode == "wall-clock":
                setattr(res, f"solver_ms_{which}", ev.solver_ms)
    violations = lb.violations + tn.violations + tr.violations + tp.violations
    if violations:
        res.valid = False
        res.error = "safety violation: " + violations[0]
    res.outlier_flags = outlier_flags(res, spec.margin_frac)
    return res


def _generate_job(args):
    spec, map_name, n = args
    grid = builtin_map(map_name)
    return generate_solved(grid, n, spec.n_instances, _instance_rng(spec, map_name, n),
                           max_work=spec.generation_max_work, max_retries=spec.max_retries)


def _experiment_job(args):
    solved, seed, spec = args
    return run_experiment(solved, seed, spec)


def run_study(spec: ExperimentSpec, workers: int = 1, progress=None) -> tuple[list[SolvedInstance], list[ExperimentResult]]:
    """Generate every instance set and run all experiments; output order is fixed."""
    gen_jobs = [(spec, m, n) for m in spec.maps for n in spec.agent_counts[m]]
    exp_jobs = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            sets = list(pool.map(_generate_job, gen_jobs))
            solved = [s for group in sets for s in group]
            exp_jobs = [(s, seed, spec) for s in solved for seed in spec.seeds]
            results = []
            for r in pool.map(_experiment_job, exp_jobs, chunksize=1):
                results.append(r)
                if progress:
                    progress(len(results), len(exp_jobs))
    else:
        solved = [s for job in gen_jobs for s in _generate_job(job)]
        exp_jobs = [(s, seed, spec) for s in solved for seed in spec.seeds]
        results = []
        for job in exp_jobs:
            results.append(_experiment_job(job))
            if progress:
                progress(len(results), len(exp_jobs))
    results.sort(key=lambda r: r.key)
    return solved, results


# -- aggregation -------------------------------------------------------------


def _mean(xs) -> float | None:
    xs = [x for x in xs if x is not None and not math.isnan(x)]
    return statistics.fmean(xs) if xs else None


def _median(xs) -> float | None:
    xs = [x for x in xs if x is not None]
    return statistics.median(xs) if xs else None


def _group_summary(rs: list[ExperimentResult]) -> dict:
    valid = [r for r in rs if r.valid]
    rep = [r for r in valid if r.replanned_pred]
    norep = [r for r in valid if not r.replanned_pred]
    clean_rep = [r for r in rep if not r.outlier_flags]
    clean_norep = [r for r in norep if not r.outlier_flags]
    flags = {f: sum(1 for r in valid if f in r.outlier_flags.split(",")) for f in "abc"}
    return {
        "n": len(rs),
        "n_valid": len(valid),
        "n_replanned_pred": len(rep),
        "n_replanned_rand": sum(1 for r in valid if r.replanned_rand),
        "n_outliers": sum(1 for r in valid if r.outlier_flags),
        "outliers_by_rule": flags,
        "mean_tc_d_replanned": _mean([r.tc_d for r in rep]),
        "mean_tc_d_not_replanned": _mean([r.tc_d for r in norep]),
        "mean_impact": _mean([r.impact for r in valid]),
        "mean_m_p_replanned": _mean([r.m_p for r in clean_rep]),
        "mean_m_r_replanned": _mean([r.m_r for r in clean_rep]),
        "mean_m_p_not_replanned": _mean([r.m_p for r in clean_norep]),
        "mean_m_r_not_replanned": _mean([r.m_r for r in clean_norep]),
        "mean_m_p_literal_replanned": _mean([r.m_p_literal for r in clean_rep]),
        "mean_m_r_literal_replanned": _mean([r.m_r_literal for r in clean_rep]),
        "median_solver_ms_pred": _median([r.solver_ms_pred for r in rep]),
        "mean_solver_ms_pred": _mean([r.solver_ms_pred for r in rep]),
        "median_solver_nodes_pred": _median([r.solver_nodes_pred for r in rep]),
        "max_solver_nodes_pred": max((r.solver_nodes_pred or 0 for r in rep), default=None),
    }


def aggregate(results: list[ExperimentResult]) -> dict:
    """Per-map and overall tables; independent of the order of ``results``."""
    ordered = sorted(results, key=lambda r: r.key)
    maps = sorted({r.map for r in ordered})
    per_map = {m: _group_summary([r for r in ordered if r.map == m]) for m in maps}
    overall = _group_summary(ordered)
    boxplot = {
        m: {
            "tc_d_replanned": [r.tc_d for r in ordered if r.map == m and r.valid and r.replanned_pred],
            "tc_d_not_replanned": [r.tc_d for r in ordered if r.map == m and r.valid and not r.replanned_pred],
        }
        for m in maps
    }
    return {"per_map": per_map, "overall": overall, "boxplot": boxplot}


def _fmt(v, pct=False) -> str:
    if v is None:
        return "-"
    if pct:
        return f"{100 * v:.2f}%"
    if isinstance(v, float):
        return f"{v:.1f}"
    return str(v)


def summary_markdown(summary: dict) -> str:
    cols = [
        ("runs", "n_valid", False),
        ("pred. replanned", "n_replanned_pred", False),
        ("outliers", "n_outliers", False),
        ("mean T_D replanned [ms]", "mean_tc_d_replanned", False),
        ("mean T_D not replanned [ms]", "mean_tc_d_not_replanned", False),
        ("M^P (replanned)", "mean_m_p_replanned", True),
        ("M^R (replanned)", "mean_m_r_replanned", True),
        ("M^P (not replanned)", "mean_m_p_not_replanned", True),
        ("M^R (not replanned)", "mean_m_r_not_replanned", True),
        ("median solver nodes", "median_solver_nodes_pred", False),
        ("median solver ms", "median_solver_ms_pred", False),
    ]
    lines = ["| map | " + " | ".join(c[0] for c in cols) + " |", "|---" * (len(cols) + 1) + "|"]
    rows = list(summary["per_map"].items()) + [("all", summary["overall"])]
    for name, s in rows:
        lines.append(f"| {name} | " + " | ".join(_fmt(s[k], pct) for _, k, pct in cols) + " |")
    return "\n".join(lines) + "\n"


def results_csv(results: list[ExperimentResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, RESULT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in sorted(results, key=lambda r: r.key):
        w.writerow(r.row())
    return buf.getvalue()


def read_results_csv(text: str) -> list[ExperimentResult]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        def num(k, cast=int):
            return cast(row[k]) if row.get(k, "") != "" else None

        out.append(ExperimentResult(
            row["map"], int(row["n_agents"]), int(row["instance_id"]), int(row["seed"]),
            int(row["tc_lb"]), int(row["tc_n"]), int(row["tc_r"]), int(row["tc_p"]),
            bool(int(row["replanned_pred"])), bool(int(row.get("replanned_rand") or 0)),
            num("t_replan_rand"), num("t_replan_pred"),
            num("solver_ms_rand", float), num("solver_ms_pred", float),
            num("solver_nodes_rand"), num("solver_nodes_pred"),
            row["outlier_flags"], bool(int(row.get("valid") or 1)), row.get("error", ""),
        ))
    return out


def write_study(out: Path, solved: list[SolvedInstance], results: list[ExperimentResult]) -> dict:
    """Write results CSV, summaries, box-plot value lists and the instance files."""
    out.mkdir(parents=True, exist_ok=True)
    summary = aggregate(results)
    (out / "results.csv").write_text(results_csv(results))
    (out / "summary.md").write_text(summary_markdown(summary))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    box = out / "boxplot"
    box.mkdir(exist_ok=True)
    for m, groups in summary["boxplot"].items():
        for name, values in groups.items():
            (box / f"{m}_{name}.txt").write_text("".join(f"{v}\n" for v in values))
    inst_dir = out / "instances"
    inst_dir.mkdir(exist_ok=True)
    for s in solved:
        name = f"{s.map_name}-{len(s.instance.agents)}-{s.instance_id:02d}.json"
        (inst_dir / name).write_text(json.dumps(s.instance.to_json(s.map_name), sort_keys=True) + "\n")
    return summary
