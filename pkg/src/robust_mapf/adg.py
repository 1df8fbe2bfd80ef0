"""Action Dependency Graph built from a 1-robust plan.

Nodes are every action of every agent (waits included), numbered in
``(timestep, agent)`` order so node ids are already a topological order.
Type 1 edges chain one agent's actions. Type 2 edges join consecutive
visitors of a vertex: the earlier agent's action leaving the vertex must
complete before the later agent's action entering it may start.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .core import Action, GridMap, Plan, Vertex


class AdgError(RuntimeError):
    """Contract violation while driving the graph (double completion and the like)."""


class NotOneRobust(ValueError):
    def __init__(self, conflict):
        a, ta, b, tb, v = conflict
        super().__init__(f"plan is not 1-robust: agents {a}@t{ta} and {b}@t{tb} share vertex {v}")
        self.conflict = conflict


@dataclass
class Adg:
    actions: list[Action]
    type1_edges: list[tuple[int, int]]
    type2_edges: list[tuple[int, int]]
    preds: list[tuple[int, ...]] = field(repr=False)
    succs: list[tuple[int, ...]] = field(repr=False)
    type2_in: list[tuple[int, ...]] = field(repr=False)
    by_agent: dict[int, list[int]] = field(repr=False)
    completed: list[bool] = field(repr=False)
    assigned: list[bool] = field(repr=False)
    completion_ms: list[int | None] = field(repr=False)
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    def __post_init__(self):
        self._missing = [len(p) for p in self.preds]
        self._ready = {i for i, m in enumerate(self._missing) if m == 0}

    def __len__(self) -> int:
        return len(self.actions)

    def node(self, agent: int, index: int) -> int:
        return self.by_agent[agent][index]

    def prev_in_agent(self, node: int) -> int | None:
        a = self.actions[node]
        return None if a.timestep == 0 else self.by_agent[a.agent][a.timestep - 1]

    def eligible(self) -> list[int]:
        """Unassigned, uncompleted node ids whose predecessors are all complete."""
        with self.lock:
            return sorted(i for i in self._ready if not self.assigned[i])

    def eligible_actions(self) -> list[Action]:
        return [self.actions[i] for i in self.eligible()]

    def is_eligible(self, node: int) -> bool:
        with self.lock:
            return node in self._ready and not self.assigned[node]

    def next_node(self, agent: int) -> int | None:
        """The agent's first uncompleted action."""
        for i in self.by_agent.get(agent, ()):
            if not self.completed[i]:
                return i
        return None

    def assign(self, node: int) -> None:
        with self.lock:
            if self.completed[node] or self.assigned[node]:
                raise AdgError(f"node {node} already assigned or completed")
            if node not in self._ready:
                raise AdgError(f"node {node} is not eligible")
            self.assigned[node] = True

    def unassign(self, node: int) -> None:
        """Withdraw an assignment that never completed (aborted before a replan)."""
        with self.lock:
            if not self.assigned[node] or self.completed[node]:
                raise AdgError(f"node {node} is not an in-flight assignment")
            self.assigned[node] = False

    def mark_completed(self, node: int, t_c: int) -> None:
        with self.lock:
            if self.completed[node]:
                raise AdgError(f"node {node} completed twice")
            if not self.assigned[node]:
                raise AdgError(f"node {node} completed without being assigned")
            self.completed[node] = True
            self.completion_ms[node] = t_c
            self._ready.discard(node)
            for s in self.succs[node]:
                self._missing[s] -= 1
                if self._missing[s] == 0:
                    self._ready.add(s)

    @property
    def done(self) -> bool:
        return all(self.completed)

    def snapshot(self) -> tuple[tuple[bool, ...], tuple[bool, ...]]:
        with self.lock:
            return tuple(self.completed), tuple(self.assigned)

    def to_dot(self, grid: GridMap | None = None) -> str:
        def where(v: Vertex) -> str:
            return str(grid.coord(v)) if grid else str(v)

        lines = ["digraph adg {"]
        for i, a in enumerate(self.actions):
            label = f"r{a.agent} t{a.timestep} {where(a.source)}->{where(a.target)}"
            lines.append(f'  n{i} [label="{label}"];')
        for kind, edges in (("type1", self.type1_edges), ("type2", self.type2_edges)):
            style = "" if kind == "type1" else ", style=dashed"
            for u, v in edges:
                lines.append(f'  n{u} -> n{v} [label="{kind}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _first_conflict(plan: Plan):
    # local import keeps the graph module independent of the search code at import time
    from .solver import find_conflicts

    return find_conflicts(plan.paths, first_only=True)


def build_adg(plan: Plan, check: bool = True) -> Adg:
    """ADG with consecutive-visitor Type 2 edges; raises :class:`NotOneRobust` on bad plans."""
    if check:
        conflict = _first_conflict(plan)
        if conflict is not None:
            raise NotOneRobust(conflict)
    keyed = []
    for k in plan.agents:
        keyed.extend(plan.actions(k))
    keyed.sort(key=lambda a: (a.timestep, a.agent))
    actions = keyed
    index = {(a.agent, a.timestep): i for i, a in enumerate(actions)}
    by_agent = {k: [index[(k, t)] for t in range(plan.length(k))] for k in plan.agents}

    type1 = [(ids[t], ids[t + 1]) for ids in by_agent.values() for t in range(len(ids) - 1)]
    type1.sort()

    # visits: (arrival time, agent, entering node or None, departing node or None)
    visits: dict[Vertex, list[tuple[int, int, int | None, int | None]]] = {}
    for k in plan.agents:
        p = plan.paths[k]
        t = 0
        while t < len(p):
            v = p[t]
            start = t
            while t + 1 < len(p) and p[t + 1] == v:
                t += 1
            enter = index[(k, start - 1)] if start > 0 else None
            depart = index[(k, t)] if t + 1 < len(p) else None
            visits.setdefault(v, []).append((start, k, enter, depart))
            t += 1
    type2 = []
    for v in sorted(visits):
        seq = sorted(visits[v])
        for (_, k1, _, dep), (_, k2, ent, _) in zip(seq, seq[1:]):
            if k1 == k2:
                continue
            if dep is None or ent is None:
                # only reachable for plans that were not checked
                raise NotOneRobust((k1, 0, k2, 0, v))
            type2.append((dep, ent))
    type2.sort()

    n = len(actions)
    preds: list[list[int]] = [[] for _ in range(n)]
    succs: list[list[int]] = [[] for _ in range(n)]
    t2in: list[list[int]] = [[] for _ in range(n)]
    for u, v in type1:
        preds[v].append(u)
        succs[u].append(v)
    for u, v in type2:
        preds[v].append(u)
        succs[u].append(v)
        t2in[v].append(u)
    adg = Adg(
        actions=actions,
        type1_edges=type1,
        type2_edges=type2,
        preds=[tuple(sorted(p)) for p in preds],
        succs=[tuple(sorted(s)) for s in succs],
        type2_in=[tuple(sorted(p)) for p in t2in],
        by_agent=by_agent,
        completed=[False] * n,
        assigned=[False] * n,
        completion_ms=[None] * n,
    )
    if not is_acyclic(adg):
        raise AdgError("dependency graph has a cycle")
    return adg


def is_acyclic(adg: Adg) -> bool:
    return len(topological_order(adg)) == len(adg)


def topological_order(adg: Adg) -> list[int]:
    """Kahn's algorithm; shorter than ``len(adg)`` when a cycle exists."""
    indeg = [len(p) for p in adg.preds]
    stack = sorted((i for i, d in enumerate(indeg) if d == 0), reverse=True)
    order = []
    while stack:
        u = stack.pop()
        order.append(u)
        for s in reversed(adg.succs[u]):
            indeg[s] -= 1
            if indeg[s] == 0:
                stack.append(s)
    return order
