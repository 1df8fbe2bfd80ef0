"""Execution-time estimates over an ADG, slack, and the predictive replan rule.

All times are integer milliseconds. Nodes without predecessors start at
``base_ms + timestep * nominal_ms``; every other node starts when its last
predecessor completes. A real completion time replaces the estimate for
good, and an observed lower bound on an action's start (it was assigned
at some time, or found its target blocked at a poll) raises its start
estimate.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Mapping, Sequence

from .adg import Adg, AdgError
from .core import Action

NOMINAL_MS = 1000
NO_INTERACTION = -math.inf

ExecModel = Callable[[Action], int] | Mapping[int, int] | int | None


class MonitorConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TimingRecord:
    est_start: int
    est_exec: int
    est_complete: int
    real_complete: int | None = None

    @property
    def completion(self) -> int:
        return self.est_complete if self.real_complete is None else self.real_complete


@dataclass(frozen=True)
class PlanEstimate:
    total: int
    per_agent: dict[int, int]


def exec_times(adg: Adg, exec_model: ExecModel = None) -> list[int]:
    """Resolve an execution model to one duration per node.

    ``None`` means the nominal 1000 ms; an int is a constant; a mapping is
    keyed by node id; a callable receives the :class:`Action`.
    """
    if exec_model is None:
        return [NOMINAL_MS] * len(adg)
    if isinstance(exec_model, int):
        return [exec_model] * len(adg)
    if callable(exec_model):
        return [int(exec_model(a)) for a in adg.actions]
    if isinstance(exec_model, (list, tuple)):
        if len(exec_model) != len(adg):
            raise MonitorConfigError(f"execution model has {len(exec_model)} entries for {len(adg)} nodes")
        return [int(x) for x in exec_model]
    out = []
    for i in range(len(adg)):
        if i not in exec_model:
            raise MonitorConfigError(f"execution model has no entry for node {i} ({adg.actions[i]})")
        out.append(int(exec_model[i]))
    return out


def _start(adg: Adg, i: int, comp: Sequence[int], base_ms: int, nominal_ms: int, not_before: Sequence[int]) -> int:
    preds = adg.preds[i]
    if preds:
        s = max(comp[p] for p in preds)
    else:
        s = base_ms + adg.actions[i].timestep * nominal_ms
    nb = not_before[i]
    return nb if nb > s else s


def estimate_all(
    adg: Adg,
    exec_model: ExecModel = None,
    base_ms: int = 0,
    real: Sequence[int | None] | None = None,
    not_before: Sequence[int] | None = None,
    nominal_ms: int = NOMINAL_MS,
) -> list[TimingRecord]:
    """From-scratch estimate of every node, in timestep order."""
    n = len(adg)
    tx = exec_times(adg, exec_model)
    real = list(real) if real is not None else [None] * n
    nb = list(not_before) if not_before is not None else [0] * n
    comp = [0] * n
    out: list[TimingRecord] = []
    # node ids are sorted by timestep, so predecessors always come first
    for i in range(n):
        s = _start(adg, i, comp, base_ms, nominal_ms, nb)
        rec = TimingRecord(s, tx[i], s + tx[i], real[i])
        comp[i] = rec.completion
        out.append(rec)
    return out


SlackMode = Literal["relative", "literal"]


@dataclass
class Monitor:
    """Incremental estimates plus slack bookkeeping for one ADG.

    ``slack_mode="relative"`` compares every action's slack with its value
    before execution; ``"literal"`` uses the raw action slack.
    """

    adg: Adg
    exec_model: ExecModel = None
    base_ms: int = 0
    nominal_ms: int = NOMINAL_MS
    slack_mode: SlackMode = "relative"
    max_replans: int = 1
    replans_used: int = 0
    log: list[tuple] = field(default_factory=list, repr=False)

    def __post_init__(self):
        n = len(self.adg)
        self.tx = exec_times(self.adg, self.exec_model)
        self.real: list[int | None] = [None] * n
        self.not_before = [0] * n
        recs = estimate_all(self.adg, self.tx, self.base_ms, nominal_ms=self.nominal_ms)
        self.est_start = [r.est_start for r in recs]
        self.comp = [r.completion for r in recs]
        self.initial_comp = list(self.comp)
        self.initial_slack = [self.action_slack(i) for i in range(n)]

    # -- estimates ---------------------------------------------------------

    def record(self, i: int) -> TimingRecord:
        s = self.est_start[i]
        return TimingRecord(s, self.tx[i], s + self.tx[i], self.real[i])

    def records(self) -> list[TimingRecord]:
        return [self.record(i) for i in range(len(self.adg))]

    def completion(self, i: int) -> int:
        return self.comp[i]

    def _propagate(self, roots: Sequence[int]) -> list[int]:
        """Recompute successors of ``roots`` in topological order; return nodes that changed."""
        adg = self.adg
        heap = sorted(set(s for r in roots for s in adg.succs[r]))
        queued = set(heap)
        changed = []
        while heap:
            i = heapq.heappop(heap)
            queued.discard(i)
            if self._refresh(i):
                changed.append(i)
                for s in adg.succs[i]:
                    if s not in queued:
                        queued.add(s)
                        heapq.heappush(heap, s)
        return changed

    def _refresh(self, i: int) -> bool:
        s = _start(self.adg, i, self.comp, self.base_ms, self.nominal_ms, self.not_before)
        c = self.real[i] if self.real[i] is not None else s + self.tx[i]
        if s == self.est_start[i] and c == self.comp[i]:
            return False
        self.est_start[i] = s
        self.comp[i] = c
        return True

    def on_completion(self, node: int, t_c: int) -> list[int]:
        """Record a real completion and update dependants; returns changed node ids."""
        if self.real[node] is not None:
            raise AdgError(f"node {node} already has a completion time")
        for p in self.adg.preds[node]:
            if self.real[p] is None:
                raise AdgError(f"node {node} completed before predecessor {p}")
            if t_c < self.real[p]:
                raise AdgError(f"node {node} completed at {t_c} ms, before predecessor {p} ({self.real[p]} ms)")
        self.real[node] = t_c
        before = self.comp[node]
        self.comp[node] = t_c
        a = self.adg.actions[node]
        self.log.append((t_c, a.agent, a.timestep, "completed", self.fleet_slack()))
        if before == t_c:
            return []
        changed = self._propagate([node])
        if changed:
            self.log.append((t_c, a.agent, a.timestep, "estimate_updated", self.fleet_slack()))
        return [node] + changed

    def observe_not_before(self, node: int, t: int) -> list[int]:
        """The action cannot start before ``t`` (it was assigned then, or its target is still blocked)."""
        if self.real[node] is not None or t <= self.not_before[node]:
            return []
        self.not_before[node] = t
        if not self._refresh(node):
            return []
        changed = [node] + self._propagate([node])
        a = self.adg.actions[node]
        self.log.append((t, a.agent, a.timestep, "estimate_updated", self.fleet_slack()))
        return changed

    def log_assigned(self, node: int, t: int) -> None:
        a = self.adg.actions[node]
        self.log.append((t, a.agent, a.timestep, "assigned", self.fleet_slack()))

    def plan_estimate(self, objective: Literal["soc", "makespan"] = "soc") -> PlanEstimate:
        per_agent = {k: (self.comp[ids[-1]] if ids else self.base_ms) for k, ids in self.adg.by_agent.items()}
        vals = list(per_agent.values())
        total = sum(vals) if objective == "soc" else max(vals, default=0)
        return PlanEstimate(total, per_agent)

    # -- slack -------------------------------------------------------------

    def _prev_completion(self, head: int) -> int:
        prev = self.adg.prev_in_agent(head)
        return self.base_ms if prev is None else self.comp[prev]

    def edge_slack(self, tail: int, head: int) -> int:
        """delta: tail's completion minus the completion of the head agent's previous action."""
        return self.comp[tail] - self._prev_completion(head)

    def action_slack(self, i: int) -> float:
        tails = self.adg.type2_in[i]
        if not tails:
            return NO_INTERACTION
        prev = self._prev_completion(i)
        return max(self.comp[t] for t in tails) - prev

    def relative_slack(self, i: int) -> float:
        d = self.action_slack(i)
        if d == NO_INTERACTION:
            return NO_INTERACTION
        if self.slack_mode == "literal":
            return d
        # only waiting beyond the planned wait counts; planned early arrival is not credit
        return max(d, 0) - max(self.initial_slack[i], 0)

    def fleet_slack(self) -> float:
        best = NO_INTERACTION
        completed = self.real
        for i, tails in enumerate(self.adg.type2_in):
            if tails and completed[i] is None:
                r = self.relative_slack(i)
                if r > best:
                    best = r
        return best

    def should_replan(self, threshold_ms: float) -> bool:
        return self.replans_used < self.max_replans and self.fleet_slack() > threshold_ms

    def log_replan(self, t: int) -> None:
        self.log.append((t, -1, -1, "replan_triggered", self.fleet_slack()))

    def log_csv(self) -> str:
        return event_log_csv(self.log)


def event_log_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_ms", "agent", "action_index", "event", "fleet_slack_ms"])
    for t, agent, idx, event, slack in rows:
        w.writerow([t, agent, idx, event, "" if slack == NO_INTERACTION else slack])
    return buf.getvalue()
