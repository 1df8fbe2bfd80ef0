"""Acceptance checks; each prints one PASS/FAIL line (also collected in the terminal summary)."""

import json
import random
import threading
import time

import pytest

from conftest import hand_plan, random_small_instance
from oracles import joint_optimal_soc
from robust_mapf.adg import build_adg
from robust_mapf.cli import main as cli_main
from robust_mapf.core import Agent, GridMap, MapfInstance, validate_plan
from robust_mapf.harness import aggregate, generate_solved, preset, run_study
from robust_mapf.maps import builtin_map, fig4_instance
from robust_mapf.monitor import Monitor, estimate_all
from robust_mapf.sim import DeadlockError, IntruderConfig, ReplanPolicy, SimConfig, run
from robust_mapf.solver import SolverError, Unsolvable, solve

# every plan any criterion produces is collected here for the robustness check
PLANS: list[tuple[MapfInstance, object]] = []


def _small_instances(seed: int, count: int, max_side=5, max_agents=3):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        inst = random_small_instance(rng, max_side, max_agents)
        if inst is not None:
            out.append(inst)
    return out


def _stream(seed: int, max_side=5, max_agents=3):
    rng = random.Random(seed)
    while True:
        inst = random_small_instance(rng, max_side, max_agents)
        if inst is not None:
            yield inst


def _keep(inst, plan):
    PLANS.append((inst, plan))
    return plan


def _keep_replans(trace):
    for ev in trace.replans:
        if ev.plan is not None:
            goals = {a.id: a.goal for a in trace.instance.agents}
            sub = MapfInstance(trace.instance.map, tuple(Agent(k, v, goals[k]) for k, v in ev.config))
            PLANS.append((sub, ev.plan))


@pytest.fixture(scope="module")
def desk():
    t0 = time.monotonic()
    solved, results = run_study(preset("desk"))
    return solved, results, time.monotonic() - t0


def test_criterion_1_cbs_matches_joint_optimum(report):
    t0 = time.monotonic()
    insts = _small_instances(1, 200)
    agree = 0
    for inst in insts:
        ref = joint_optimal_soc(inst)
        try:
            soc = _keep(inst, solve(inst)).soc
        except Unsolvable:
            soc = None
        agree += soc == ref
    elapsed = time.monotonic() - t0
    report(1, agree == len(insts) and elapsed < 300,
           f"{agree}/{len(insts)} SOC equal to joint search, {elapsed:.1f} s (limit 300 s)")


def test_criterion_3_simulated_soc_matches_plan(report):
    insts = _small_instances(3, 60)
    exact_bad = 0
    solved = []
    for inst in insts:
        try:
            plan = _keep(inst, solve(inst))
        except Unsolvable:
            continue
        solved.append((inst, plan))
        if run(inst, plan).soc_ms != plan.soc * 1000:
            exact_bad += 1
    # wall clock: 20 instances with real moves, run side by side in threads
    wall = [(i, p) for i, p in solved if p.soc >= 3][:20]
    errors = [None] * len(wall)

    def go(k, inst, plan):
        tr = run(inst, plan, SimConfig(clock_mode="wall-clock"))
        errors[k] = abs(tr.soc_ms - plan.soc * 1000) / (plan.soc * 1000)

    threads = [threading.Thread(target=go, args=(k, i, p)) for k, (i, p) in enumerate(wall)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    worst = max(e for e in errors if e is not None)
    ok = exact_bad == 0 and len(wall) >= 20 and all(e is not None and e < 0.005 for e in errors)
    report(3, ok, f"exact-virtual mismatches {exact_bad}/{len(solved)}; wall-clock on {len(wall)} "
                  f"instances worst relative error {100 * worst:.3f}% (limit 0.5%)")


def _delay_trace(adg, rng):
    tx = [rng.choice([600, 1000, 1000, 1500, 2400]) for _ in range(len(adg))]
    base = rng.randrange(0, 3000, 50)
    m = Monitor(adg, tx, base_ms=base)
    real = [None] * len(adg)
    nb = [0] * len(adg)
    pending = set(range(len(adg)))
    now = base
    while pending:
        ready = sorted(i for i in pending if all(real[p] is not None for p in adg.preds[i]))
        i = rng.choice(ready)
        if rng.random() < 0.25:
            t = now + rng.randrange(0, 4000, 100)
            nb[i] = max(nb[i], t)
            m.observe_not_before(i, t)
        else:
            t_c = max([real[p] for p in adg.preds[i]] + [now]) + rng.randrange(0, 5000, 10)
            real[i] = t_c
            pending.discard(i)
            now = max(now, t_c - 3000)
            m.on_completion(i, t_c)
        if m.records() != estimate_all(adg, tx, base, real, nb):
            return False
    return True


def test_criterion_4_incremental_monitor_equals_scratch(report):
    rng = random.Random(4)
    adgs = []
    for inst in _stream(44, max_side=6, max_agents=4):
        try:
            plan = solve(inst, max_work=200_000)
        except SolverError:
            continue
        if plan.soc:
            adgs.append(build_adg(_keep(inst, plan)))
        if len(adgs) == 400:
            break
    for s in generate_solved(builtin_map("room32"), 8, 100, random.Random(4)):
        adgs.append(build_adg(_keep(s.instance, s.plan)))
    traces = [(adg, random.Random(rng.getrandbits(32))) for adg in adgs[:500]]
    same = sum(_delay_trace(adg, r) for adg, r in traces)
    report(4, same == len(traces) == 500, f"{same}/{len(traces)} delay traces bit-identical to from-scratch estimates")


def test_criterion_5_jittered_runs_are_safe(report):
    rng = random.Random(5)
    runs = violations = deadlocks = 0
    policies = ["none", "none", "random", "predictive"]
    for inst in _stream(55, max_side=7, max_agents=5):
        if runs == 1000:
            break
        try:
            plan = _keep(inst, solve(inst, max_work=200_000))
        except SolverError:
            continue
        kind = policies[runs % 4]
        intr = IntruderConfig(rng.randrange(0, 4000, 100), rng.randrange(5000, 9000, 100)) if kind != "none" else None
        cfg = SimConfig(clock_mode="jittered-virtual", rng_seed=runs, intruder=intr,
                        replan=ReplanPolicy(kind, threshold_ms=rng.choice([0, 1000, 2000])))
        runs += 1
        try:
            tr = run(inst, plan, cfg)
        except DeadlockError:
            deadlocks += 1
            continue
        _keep_replans(tr)
        violations += len(tr.violations)
    report(5, runs == 1000 and violations == 0 and deadlocks == 0,
           f"{runs} jittered runs, {violations} occupancy violations, {deadlocks} deadlocks")


CROSS = GridMap.from_rows(["@.@", "...", "@.@"])


def _crossing(k):
    w = 2 + k
    plan = hand_plan(CROSS, {0: [(0, 1), (1, 1), (2, 1)], 1: [(1, 0)] * (w + 1) + [(1, 1), (1, 2)]})
    inst = MapfInstance.from_coords(CROSS, [((0, 1), (2, 1)), ((1, 0), (1, 2))])
    return inst, _keep(inst, plan)


def test_criterion_6_trigger_iff_delay_exceeds_gap_by_threshold(report):
    wrong = []
    cases = 0
    for k in range(4):
        inst, plan = _crossing(k)
        g = 1000 * k
        for d in range(100, 9100, 100):
            cfg = SimConfig(intruder=IntruderConfig(0, d, vertex=CROSS.vertex(1, 1), agent=0),
                            replan=ReplanPolicy("predictive", threshold_ms=2000))
            tr = run(inst, plan, cfg)
            fired = any(e.policy == "predictive" for e in tr.replans)
            cases += 1
            if fired != (d - g > 2000):
                wrong.append((d, g, fired))
    report(6, not wrong, f"{cases - len(wrong)}/{cases} (d, g) cases fire exactly when d - g > 2000 ms"
                         + (f"; first mismatch {wrong[0]}" if wrong else ""))


def test_criterion_7_two_corridor_reroute(report):
    inst = fig4_instance()
    g = inst.map
    plan = _keep(inst, solve(inst))
    block = IntruderConfig(0, 7000, vertex=g.vertex(1, 4), agent=0)
    pred = run(inst, plan, SimConfig(intruder=block, replan=ReplanPolicy("predictive")))
    none = run(inst, plan, SimConfig(intruder=block))
    _keep_replans(pred)
    upper = {g.vertex(x, 2) for x in range(5, 11)}
    new = pred.replans[0].plan if pred.replans and pred.replans[0].plan is not None else None
    via_upper = new is not None and bool(upper & set(new.paths[0]))
    ok = via_upper and pred.soc_ms < none.soc_ms
    report(7, ok, f"red via upper corridor: {via_upper}; SOC predictive {pred.soc_ms} ms vs no replan {none.soc_ms} ms")


@pytest.mark.slow
def test_criterion_8_desk_mitigation_study(report, desk):
    solved, results, elapsed = desk
    for s in solved:
        _keep(s.instance, s.plan)
    summary = aggregate(results)
    o = summary["overall"]
    gap = o["mean_m_p_replanned"] - o["mean_m_r_replanned"]
    per_map = {m: s["mean_tc_d_replanned"] for m, s in summary["per_map"].items()}
    all_valid = [r for r in results if r.valid and not r.outlier_flags and r.impact]
    mp_all = sum(r.m_p for r in all_valid) / len(all_valid)
    mr_all = sum(r.m_r for r in all_valid) / len(all_valid)
    ok = gap >= 0.05 and all(v is not None and v <= 0 for v in per_map.values()) and elapsed < 7200
    report(8, ok, f"{len(results)} runs in {elapsed:.0f} s; replanned subset M^P {100 * o['mean_m_p_replanned']:.2f}% "
                  f"vs M^R {100 * o['mean_m_r_replanned']:.2f}% (gap {100 * gap:.2f} pp, need >= 5); "
                  f"all clean runs M^P {100 * mp_all:.2f}% vs M^R {100 * mr_all:.2f}%; mean T_D replanned "
                  + ", ".join(f"{m} {v:.0f} ms" for m, v in sorted(per_map.items())))


def test_criterion_2_every_plan_is_one_robust(report):
    # runs after the criteria above in file order; if run alone it still checks its own batch
    for inst in _small_instances(2, 100, max_side=6, max_agents=4):
        try:
            _keep(inst, solve(inst, max_work=200_000))
        except SolverError:
            pass
    bad = [(i, p) for i, p in PLANS if validate_plan(i, p)]
    report(2, not bad, f"{len(PLANS) - len(bad)}/{len(PLANS)} plans with an empty conflict report")


def _run_twice(tmp_path, make_args):
    blobs = []
    for tag in ("first", "second"):
        out = tmp_path / tag
        assert cli_main(make_args(out)) == 0
        files = sorted(p for p in out.rglob("*") if p.is_file()) if out.is_dir() else [out]
        blobs.append({str(p.relative_to(out) if out.is_dir() else p.name): p.read_bytes() for p in files})
    return blobs[0] == blobs[1] and bool(blobs[0])


def test_criterion_9_fixed_seed_is_byte_identical(report, tmp_path, capsys):
    inst = fig4_instance()
    ipath = tmp_path / "inst.json"
    ipath.write_text(json.dumps(inst.to_json()))
    ppath = tmp_path / "plan.json"
    assert cli_main(["solve", str(ipath), "--out", str(ppath)]) == 0
    checks = {
        "solve": _run_twice(tmp_path / "s", lambda o: ["--seed", "7", "solve", str(ipath), "--out", str(o)]),
        "simulate": _run_twice(tmp_path / "m", lambda o: [
            "simulate", str(ipath), str(ppath), "--seed", "7", "--clock", "virtual", "--policy", "predictive",
            "--intruder", "--jitter", "--out", str(o)]),
        "experiment": _run_twice(tmp_path / "e", lambda o: [
            "experiment", "--preset", "smoke", "--seed", "7", "--quiet", "--out", str(o)]),
    }
    (tmp_path / "m").mkdir(exist_ok=True)
    checks["render"] = _run_twice(tmp_path / "r", lambda o: ["render", str(tmp_path / "m" / "first"), "--out", str(o)])
    capsys.readouterr()
    report(9, all(checks.values()), ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in checks.items()))
