"""Fleet execution of an ADG-scheduled plan with an intruder and replanning.

One event loop drives all agents. In the virtual clock modes events are
processed in ``(time, sequence)`` order without sleeping, which makes runs
reproducible bit for bit; ``wall-clock`` mode paces the same loop by the
real clock. Each action first checks that its target vertex is free (the
intruder or another agent's body blocks it) and re-checks every
``occupancy_recheck`` ms, then takes ``action_duration`` ms plus optional
jitter.
"""

from __future__ import annotations

import heapq
import itertools
import json
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Literal

from .adg import Adg, build_adg
from .core import Agent, GridMap, MapfInstance, Plan, Vertex, validate_plan
from .monitor import NO_INTERACTION, Monitor, event_log_csv
from .solver import CBS, SolverError

ClockMode = Literal["exact-virtual", "jittered-virtual", "wall-clock"]


class DeadlockError(RuntimeError):
    """Execution stalled: idle agents, no eligible action, unfinished plan."""


@dataclass(frozen=True)
class IntruderConfig:
    appear_at: int = 3000
    disappear_at: int = 10000
    lead_time: int = 2000
    vertex: Vertex | None = None  # fixed placement instead of the random pick
    agent: int | None = None  # fixed victim agent

    def __post_init__(self):
        if self.disappear_at <= self.appear_at:
            raise ValueError("intruder must disappear after it appears")


@dataclass(frozen=True)
class JitterModel:
    """Additive per-action delay ``exp(N(mu, sigma))`` ms, capped at ``cap_ms``."""

    mu: float = 5.0
    sigma: float = 1.0
    cap_ms: int = 5000

    def sample(self, rng: random.Random) -> int:
        return min(self.cap_ms, int(rng.lognormvariate(self.mu, self.sigma)))


@dataclass(frozen=True)
class ReplanPolicy:
    kind: Literal["none", "random", "predictive"] = "none"
    threshold_ms: int = 2000
    slack_mode: Literal["relative", "literal"] = "relative"
    # random policy: draw uniformly in [window_start_ms, window_end_ms]
    window_start_ms: int | None = None
    window_end_ms: int | None = None
    max_replans: int = 1


@dataclass(frozen=True)
class SimConfig:
    action_duration: int = 1000
    occupancy_recheck: int = 100
    clock_mode: ClockMode = "exact-virtual"
    jitter: JitterModel | None = None
    intruder: IntruderConfig | None = None
    replan: ReplanPolicy = ReplanPolicy()
    rng_seed: int = 0
    solver_budget_ms: float | None = None
    solver_max_work: int | None = 3_000_000
    max_time_ms: int | None = None  # watchdog; default derived from the plan

    def __post_init__(self):
        if self.action_duration <= 0 or self.occupancy_recheck <= 0:
            raise ValueError("action_duration and occupancy_recheck must be positive")
        if self.clock_mode == "jittered-virtual" and self.jitter is None:
            object.__setattr__(self, "jitter", JitterModel())


@dataclass
class ActionRecord:
    epoch: int
    agent: int
    index: int
    source: Vertex
    target: Vertex
    assigned_ms: int
    start_ms: int | None = None
    complete_ms: int | None = None
    aborted: bool = False


@dataclass
class ReplanEvent:
    policy: str
    trigger_ms: int
    barrier_ms: int | None = None
    config: list[tuple[int, Vertex]] = field(default_factory=list)
    ok: bool = False
    reason: str = ""
    plan: Plan | None = None
    solver_ms: float = 0.0
    solver_nodes: int = 0
    noop: bool = False


@dataclass
class IntruderEvent:
    vertex: Vertex | None
    agent: int | None
    appear_ms: int
    disappear_ms: int
    note: str = ""


@dataclass
class ExecutionTrace:
    instance: MapfInstance
    plan: Plan
    actions: list[ActionRecord]
    final_ms: dict[int, int]
    replans: list[ReplanEvent]
    intruder: IntruderEvent | None
    events: list[tuple]
    violations: list[str]
    end_ms: int

    @property
    def soc_ms(self) -> int:
        return sum(self.final_ms.values())

    @property
    def makespan_ms(self) -> int:
        return max(self.final_ms.values(), default=0)

    @property
    def replanned(self) -> bool:
        return any(r.ok and not r.noop for r in self.replans)

    @property
    def replan_ms(self) -> int | None:
        return self.replans[0].trigger_ms if self.replans else None

    def summary(self, record_timings: bool = False) -> dict:
        grid = self.instance.map
        reps = []
        for r in self.replans:
            d = {
                "policy": r.policy,
                "trigger_ms": r.trigger_ms,
                "barrier_ms": r.barrier_ms,
                "ok": r.ok,
                "noop": r.noop,
                "reason": r.reason,
                "config": [[k, *grid.coord(v)] for k, v in r.config],
                "solver_nodes": r.solver_nodes,
            }
            if r.plan is not None:
                d["new_soc"] = r.plan.soc
            if record_timings:
                d["solver_ms"] = round(r.solver_ms, 3)
            reps.append(d)
        intr = None
        if self.intruder is not None:
            i = self.intruder
            intr = {
                "vertex": list(grid.coord(i.vertex)) if i.vertex is not None else None,
                "agent": i.agent,
                "appear": i.appear_ms,
                "disappear": i.disappear_ms,
                "note": i.note,
            }
        return {
            "soc_ms": self.soc_ms,
            "makespan_ms": self.makespan_ms,
            "plan_soc": self.plan.soc,
            "replans": reps,
            "intruder": intr,
            "violations": self.violations,
        }

    def to_json(self, record_timings: bool = False) -> dict:
        """Full trace: the summary plus instance, base plan and per-action times."""
        grid = self.instance.map
        d = self.summary(record_timings)
        d["instance"] = self.instance.to_json()
        d["plan"] = self.plan.to_json(grid)
        d["final_ms"] = {str(k): v for k, v in sorted(self.final_ms.items())}
        d["end_ms"] = self.end_ms
        d["actions"] = [
            [r.epoch, r.agent, r.index, *grid.coord(r.source), *grid.coord(r.target),
             r.assigned_ms, r.start_ms, r.complete_ms, r.aborted]
            for r in self.actions
        ]
        return d

    def summary_json(self, record_timings: bool = False) -> str:
        return json.dumps(self.summary(record_timings), indent=2, sort_keys=True) + "\n"

    def events_csv(self) -> str:
        return event_log_csv(self.events)

    def actions_csv(self) -> str:
        grid = self.instance.map
        lines = ["epoch,agent,index,from_x,from_y,to_x,to_y,assigned_ms,start_ms,complete_ms,aborted"]
        for r in self.actions:
            fx, fy = grid.coord(r.source)
            tx, ty = grid.coord(r.target)
            cells = [r.epoch, r.agent, r.index, fx, fy, tx, ty, r.assigned_ms,
                     "" if r.start_ms is None else r.start_ms,
                     "" if r.complete_ms is None else r.complete_ms, int(r.aborted)]
            lines.append(",".join(str(c) for c in cells))
        return "\n".join(lines) + "\n"


class _VirtualClock:
    def __init__(self):
        self.reset()

    def reset(self) -> None:
        self.now = 0

    def advance(self, t: int) -> int:
        self.now = max(self.now, t)
        return self.now

    def read(self) -> int:
        return self.now


class _WallClock:
    def __init__(self):
        self.reset()

    def reset(self) -> None:
        self.t0 = time.monotonic()

    def read(self) -> int:
        return int((time.monotonic() - self.t0) * 1000)

    def advance(self, t: int) -> int:
        delay = t / 1000.0 - (time.monotonic() - self.t0)
        if delay > 0:
            time.sleep(delay)
        return max(t, self.read())


class ShadowTracker:
    """Independent occupancy bookkeeping that records safety violations.

    Checks that no two agent bodies share a vertex, that no move starts
    into a vertex another agent holds, and that every vertex is entered in
    the order the current plan schedules.
    """

    def __init__(self, positions: dict[int, Vertex]):
        self.body: dict[int, set[Vertex]] = {k: {v} for k, v in positions.items()}
        self.violations: list[str] = []
        self.expected: dict[Vertex, list[int]] = {}
        self.cursor: dict[Vertex, int] = {}

    def load_plan(self, plan: Plan) -> None:
        order: dict[Vertex, list[tuple[int, int]]] = {}
        for k, p in plan.paths.items():
            for t in range(1, len(p)):
                if p[t] != p[t - 1]:
                    order.setdefault(p[t], []).append((t, k))
        self.expected = {v: [k for _, k in sorted(lst)] for v, lst in order.items()}
        self.cursor = {v: 0 for v in self.expected}

    def positions(self) -> dict[int, Vertex]:
        out = {}
        for k, cells in self.body.items():
            if len(cells) != 1:
                self.violations.append(f"agent {k} queried mid-move")
            out[k] = min(cells)
        return out

    def start_move(self, t: int, k: int, src: Vertex, dst: Vertex) -> None:
        for j, cells in self.body.items():
            if j != k and dst in cells:
                self.violations.append(f"t={t}: agent {k} enters {dst} held by agent {j}")
        seq = self.expected.get(dst, [])
        c = self.cursor.get(dst, 0)
        if c >= len(seq) or seq[c] != k:
            want = seq[c] if c < len(seq) else None
            self.violations.append(f"t={t}: agent {k} entered {dst} out of order (expected {want})")
        else:
            self.cursor[dst] = c + 1
        self.body[k] = {src, dst}

    def finish_move(self, t: int, k: int, dst: Vertex) -> None:
        self.body[k] = {dst}


def _rng(seed: int, stream: str) -> random.Random:
    return random.Random(f"{seed}/{stream}")


class Simulator:
    def __init__(
        self,
        instance: MapfInstance,
        plan: Plan,
        config: SimConfig = SimConfig(),
        replanner: Callable[..., Plan] | None = None,
    ):
        self.instance = instance
        self.grid: GridMap = instance.map
        self.config = config
        # replanner(grid, [(agent, current, goal)], time_budget_ms=, max_work=) -> Plan
        self.replanner = replanner
        self.goals = {a.id: a.goal for a in instance.agents}
        self.agents = sorted(self.goals)
        self.base_plan = plan
        self.rng_intruder = _rng(config.rng_seed, "intruder")
        self.rng_replan = _rng(config.rng_seed, "replan")
        self.rng_jitter = _rng(config.rng_seed, "jitter")
        self.clock = _WallClock() if config.clock_mode == "wall-clock" else _VirtualClock()

    # -- setup -------------------------------------------------------------

    def _install(self, plan: Plan, base_ms: int) -> None:
        self.plan = plan
        self.adg: Adg = build_adg(plan)
        pol = self.config.replan
        self.monitor = Monitor(
            self.adg,
            self.config.action_duration,
            base_ms=base_ms,
            nominal_ms=self.config.action_duration,
            slack_mode=pol.slack_mode,
            max_replans=pol.max_replans,
            replans_used=self.replans_used,
        )
        self.tracker.load_plan(plan)

    def _push(self, t: int, kind: str, payload=None) -> None:
        heapq.heappush(self.heap, (t, next(self.seq), kind, payload))

    def run(self) -> ExecutionTrace:
        cfg = self.config
        self.heap: list = []
        self.seq = itertools.count()
        self.pos = {a.id: a.start for a in self.instance.agents}
        for k in self.agents:
            if self.base_plan.paths[k][0] != self.pos[k]:
                raise ValueError(f"plan for agent {k} does not start at its start vertex")
        self.tracker = ShadowTracker(self.pos)
        self.replans_used = 0
        self.epoch = 0
        self.state: dict[int, str] = {k: "idle" for k in self.agents}  # idle | blocked | moving
        self.current: dict[int, int] = {}
        self.records: list[ActionRecord] = []
        self.rec_of: dict[int, ActionRecord] = {}
        self.token = {k: 0 for k in self.agents}
        self.final_ms = {k: 0 for k in self.agents}
        self.stopping: ReplanEvent | None = None
        self.replan_events: list[ReplanEvent] = []
        self.intruder_vertex: Vertex | None = None
        self.intruder_event: IntruderEvent | None = None
        self.events: list[tuple] = []
        self.monitor_logs: list[list] = []
        self._install(self.base_plan, 0)
        self.monitor_logs.append(self.monitor.log)

        if cfg.intruder is not None:
            self._push(cfg.intruder.appear_at, "intruder_on")
        pol = cfg.replan
        if pol.kind == "random":
            lo = pol.window_start_ms
            if lo is None:
                lo = cfg.intruder.appear_at if cfg.intruder else 0
            hi = pol.window_end_ms
            if hi is None:
                hi = self.base_plan.makespan * cfg.action_duration - 3000
            t_r = self.rng_replan.randint(lo, hi) if hi >= lo else lo
            self._push(t_r, "replan_timer")

        limit = cfg.max_time_ms
        if limit is None:
            extra = cfg.intruder.disappear_at if cfg.intruder else 0
            jit = cfg.jitter.cap_ms if cfg.jitter else 0
            n_act = sum(max(len(p) - 1, 1) for p in self.base_plan.paths.values())
            limit = (self.base_plan.makespan + 1) * cfg.action_duration * 4 + extra + n_act * jit + 600_000

        # pushed last so anything scheduled at time 0 (an intruder) is in place first
        self._push(0, "start")
        # execution starts here; setup time is not part of the measured cost
        self.clock.reset()
        now = 0
        while self.heap or not self._finished():
            if not self.heap:
                raise DeadlockError(self._stall_report(now))
            t, _, kind, payload = heapq.heappop(self.heap)
            now = self.clock.advance(t)
            if now > limit:
                raise DeadlockError(f"watchdog: no completion by {limit} ms; " + self._stall_report(now))
            self._handle(now, kind, payload)
            self._dispatch(now)
            if self._finished():
                break
        end = now
        for log in self.monitor_logs:
            self.events.extend(log)
        self.events.sort(key=lambda r: r[0])
        return ExecutionTrace(
            instance=self.instance,
            plan=self.base_plan,
            actions=self.records,
            final_ms=dict(self.final_ms),
            replans=self.replan_events,
            intruder=self.intruder_event,
            events=self.events,
            violations=list(self.tracker.violations),
            end_ms=end,
        )

    def _finished(self) -> bool:
        return self.adg.done and all(s == "idle" for s in self.state.values()) and self.stopping is None

    def _stall_report(self, now: int) -> str:
        pending = [(k, self.adg.next_node(k)) for k in self.agents if self.adg.next_node(k) is not None]
        return f"t={now}: deadlock; agents with unfinished actions {pending}, states {self.state}"

    # -- events ------------------------------------------------------------

    def _handle(self, now: int, kind: str, payload) -> None:
        if kind == "complete":
            self._complete(now, payload)
        elif kind == "poll":
            k, tok = payload
            if self.token[k] == tok and self.state[k] == "blocked":
                self._try_start(now, k)
        elif kind == "intruder_on":
            self._spawn_intruder(now)
        elif kind == "intruder_off":
            self.intruder_vertex = None
            self.events.append((now, -1, -1, "intruder_left", NO_INTERACTION))
        elif kind == "replan_timer":
            if self.replans_used < self.config.replan.max_replans and self.stopping is None:
                self._trigger(now, "random")

    def _dispatch(self, now: int) -> None:
        while True:
            if self.stopping is not None:
                if any(s == "moving" for s in self.state.values()):
                    return
                self._replan(now)
            self._assign_idle(now)
            if self.stopping is None:
                return

    def _assign_idle(self, now: int) -> None:
        for k in self.agents:
            if self.stopping is not None:
                return
            if self.state[k] != "idle":
                continue
            node = self.adg.next_node(k)
            if node is None or not self.adg.is_eligible(node):
                continue
            self.adg.assign(node)
            self.monitor.log_assigned(node, now)
            a = self.adg.actions[node]
            rec = ActionRecord(self.epoch, k, a.timestep, a.source, a.target, now)
            self.records.append(rec)
            self.rec_of[k] = rec
            self.current[k] = node
            self.monitor.observe_not_before(node, now)
            self._try_start(now, k)
        self._check_predictive(now)

    def _blocked(self, k: int, v: Vertex) -> str | None:
        if v == self.intruder_vertex:
            return "intruder"
        for j in self.agents:
            if j == k:
                continue
            if self.pos[j] == v:
                return f"agent {j}"
            if self.state[j] == "moving":
                a = self.adg.actions[self.current[j]]
                if a.target == v:
                    return f"agent {j}"
        return None

    def _try_start(self, now: int, k: int) -> None:
        cfg = self.config
        node = self.current[k]
        a = self.adg.actions[node]
        if not a.is_wait:
            why = self._blocked(k, a.target)
            if why is not None:
                if why != "intruder":
                    self.tracker.violations.append(f"t={now}: agent {k} blocked by {why} at {a.target}")
                self.state[k] = "blocked"
                self.token[k] += 1
                nxt = now + cfg.occupancy_recheck
                self._push(nxt, "poll", (k, self.token[k]))
                self.monitor.observe_not_before(node, nxt)
                self._check_predictive(now)
                return
            self.tracker.start_move(now, k, a.source, a.target)
        self.state[k] = "moving"
        self.rec_of[k].start_ms = now
        dur = cfg.action_duration
        if cfg.jitter is not None and cfg.clock_mode != "exact-virtual":
            dur += cfg.jitter.sample(self.rng_jitter)
        self._push(now + dur, "complete", (k, self.epoch))

    def _complete(self, now: int, payload) -> None:
        k, epoch = payload
        node = self.current.pop(k)
        a = self.adg.actions[node]
        self.pos[k] = a.target
        self.state[k] = "idle"
        if not a.is_wait:
            self.tracker.finish_move(now, k, a.target)
        self.rec_of[k].complete_ms = now
        self.final_ms[k] = now
        self.adg.mark_completed(node, now)
        self.monitor.on_completion(node, now)
        self._check_predictive(now)

    def _check_predictive(self, now: int) -> None:
        pol = self.config.replan
        if pol.kind != "predictive" or self.stopping is not None:
            return
        if self.replans_used >= pol.max_replans:
            return
        if self.monitor.should_replan(pol.threshold_ms):
            self._trigger(now, "predictive")

    # -- intruder ----------------------------------------------------------

    def _spawn_intruder(self, now: int) -> None:
        ic = self.config.intruder
        v, agent, note = spawn_intruder(self, ic, self.rng_intruder, now)
        self.intruder_event = IntruderEvent(v, agent, ic.appear_at, ic.disappear_at, note)
        if v is None:
            self.events.append((now, -1, -1, "intruder_skipped", NO_INTERACTION))
            return
        self.intruder_vertex = v
        self.events.append((now, agent, -1, "intruder_appeared", NO_INTERACTION))
        self._push(ic.disappear_at, "intruder_off")

    # -- replanning --------------------------------------------------------

    def _trigger(self, now: int, policy: str) -> None:
        self.replans_used += 1
        self.monitor.replans_used = self.replans_used
        self.monitor.log_replan(now)
        ev = ReplanEvent(policy, now)
        self.replan_events.append(ev)
        self.stopping = ev
        for k in self.agents:
            if self.state[k] == "blocked":
                # blocked actions are abandoned; the agent replans from where it stands
                node = self.current.pop(k)
                self.adg.unassign(node)
                self.token[k] += 1
                self.state[k] = "idle"
                self.rec_of[k].aborted = True

    def _replan(self, now: int) -> None:
        ev = self.stopping
        self.stopping = None
        ev.barrier_ms = now
        ev.config = [(k, self.pos[k]) for k in self.agents]
        shadow = self.tracker.positions()
        if shadow != self.pos:
            self.tracker.violations.append(f"t={now}: barrier configuration differs from shadow positions")
        if self.adg.done:
            ev.noop = True
            ev.ok = True
            ev.reason = "all agents finished"
            return
        cfg = self.config
        config = [(k, self.pos[k], self.goals[k]) for k in self.agents]
        t0 = time.perf_counter()
        try:
            if self.replanner is not None:
                new = self.replanner(self.grid, config, time_budget_ms=cfg.solver_budget_ms,
                                     max_work=cfg.solver_max_work)
            else:
                inst = MapfInstance(self.grid, tuple(Agent(k, cur, goal) for k, cur, goal in config))
                cbs = CBS(inst, cfg.solver_budget_ms, max_work=cfg.solver_max_work)
                try:
                    new = cbs.solve()
                finally:
                    ev.solver_nodes = cbs.stats.expanded
        except SolverError as e:
            ev.solver_ms = (time.perf_counter() - t0) * 1000.0
            ev.reason = f"{type(e).__name__}: {e}"
            self.events.append((now, -1, -1, "replan_failed", NO_INTERACTION))
            return
        ev.solver_ms = (time.perf_counter() - t0) * 1000.0
        ev.ok = True
        ev.plan = new
        base = self.clock.read() if isinstance(self.clock, _WallClock) else now
        self.epoch += 1
        self._install(new, base)
        self.monitor_logs.append(self.monitor.log)
        self.events.append((base, -1, -1, "replan_applied", NO_INTERACTION))


def spawn_intruder(sim: Simulator, config: IntruderConfig, rng: random.Random, now: int):
    """Pick the intruder's vertex: on a random agent's remaining route, entered nearest ``now + lead``.

    Returns ``(vertex, agent, note)``; ``vertex`` is ``None`` when nobody has
    moves left to take.
    """
    adg, mon = sim.adg, sim.monitor
    pending: dict[int, list[int]] = {}
    for k in sim.agents:
        nodes = [i for i in adg.by_agent.get(k, ()) if not adg.assigned[i] and not adg.completed[i]
                 and not adg.actions[i].is_wait]
        if nodes:
            pending[k] = nodes
    if config.vertex is not None:
        return config.vertex, config.agent, "fixed vertex"
    if not pending:
        return None, None, "no agent with remaining moves"
    if config.agent is not None:
        if config.agent not in pending:
            return None, config.agent, "chosen agent has no remaining moves"
        agent = config.agent
    else:
        agent = rng.choice(sorted(pending))
    target = now + config.lead_time
    best = min(pending[agent], key=lambda i: (abs(mon.completion(i) - target), i))
    return adg.actions[best].target, agent, ""


def run(instance: MapfInstance, plan: Plan, config: SimConfig = SimConfig(), check: bool = True) -> ExecutionTrace:
    """Execute ``plan`` on ``instance`` under ``config``."""
    if check:
        bad = validate_plan(instance, plan)
        if bad:
            raise ValueError("plan is not 1-robust: " + "; ".join(c.describe(instance.map) for c in bad[:5]))
    return Simulator(instance, plan, config).run()


def render_frames(trace: ExecutionTrace) -> list[str]:
    """Plain-text grid snapshots after every distinct event time.

    Agents are drawn as base-36 ids (``*`` beyond 36), the intruder as
    ``I``, obstacles as ``#``. A moving agent is drawn at its source until
    the move completes.
    """
    grid = trace.instance.map
    digits = "0123456789abcdefghijklmnopqrstuvwxyz"
    pos = {a.id: a.start for a in trace.instance.agents}
    changes: dict[int, list[tuple[int, Vertex]]] = {}
    for r in trace.actions:
        if r.complete_ms is not None:
            changes.setdefault(r.complete_ms, []).append((r.agent, r.target))
    times = set(changes)
    intr = trace.intruder
    if intr is not None and intr.vertex is not None:
        times |= {intr.appear_ms, intr.disappear_ms}
    frames = []
    for t in [0] + sorted(times - {0}):
        for k, v in changes.get(t, ()):
            pos[k] = v
        cells = [["." if free else "#" for free in grid.cells[y * grid.width:(y + 1) * grid.width]]
                 for y in range(grid.height)]
        if intr is not None and intr.vertex is not None and intr.appear_ms <= t < intr.disappear_ms:
            x, y = grid.coord(intr.vertex)
            cells[y][x] = "I"
        for k in sorted(pos):
            x, y = grid.coord(pos[k])
            cells[y][x] = digits[k] if k < len(digits) else "*"
        frames.append(f"t={t}\n" + "\n".join("".join(r) for r in cells) + "\n")
    return frames


def trace_from_json(data: dict) -> ExecutionTrace:
    """Rebuild enough of a trace from :meth:`ExecutionTrace.to_json` to render it."""
    from .core import instance_from_json

    inst = instance_from_json(data["instance"])
    grid = inst.map
    actions = []
    for e, k, i, fx, fy, tx, ty, asg, st, done, ab in data["actions"]:
        actions.append(ActionRecord(e, k, i, grid.vertex(fx, fy), grid.vertex(tx, ty), asg, st, done, ab))
    intr = None
    if data.get("intruder"):
        d = data["intruder"]
        v = grid.vertex(*d["vertex"]) if d["vertex"] is not None else None
        intr = IntruderEvent(v, d["agent"], d["appear"], d["disappear"], d.get("note", ""))
    return ExecutionTrace(
        instance=inst,
        plan=Plan.from_json(data["plan"], grid),
        actions=actions,
        final_ms={int(k): v for k, v in data["final_ms"].items()},
        replans=[],
        intruder=intr,
        events=[],
        violations=list(data.get("violations", [])),
        end_ms=data.get("end_ms", 0),
    )
