"""SOC-optimal 1-robust Conflict-Based Search.

A pair of occupancies ``(a, v, t1)`` and ``(b, v, t2)`` with ``a != b`` and
``|t1 - t2| <= 1`` is forbidden; that single rule covers vertex, swap,
following and cycle conflicts. Agents stay on their goal after finishing.

High level splits on the earliest conflict (lowest agent pair on ties).
Two split shapes are used, both keeping every 1-robust solution in at
least one child:

* ordinary: the entering agent is banned from ``v`` at ``t-1, t, t+1``
  around the other agent's occupancy, or the other agent is banned at its
  occupancy time;
* parked goal: either the parked agent's path becomes longer than the
  conflict time, or the other agent is banned from the goal vertex from
  ``t - 1`` onwards.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable, Literal

from .core import Agent, GridMap, MapfInstance, Plan, Vertex

DEFAULT_BUDGET_MS = 120_000


class SolverError(RuntimeError):
    pass


class SolverTimeout(SolverError):
    """Budget (time or node count) ran out before a solution was proven optimal."""


class Unsolvable(SolverError):
    """No 1-robust solution exists within the search horizon."""


@dataclass(frozen=True, order=True)
class Constraint:
    """``vertex``: not at ``vertex`` at ``timestep``.
    ``vertex_from``: not at ``vertex`` at any time >= ``timestep``.
    ``length``: path must be longer than ``timestep`` actions.
    """

    agent: int
    vertex: Vertex
    timestep: int
    kind: Literal["vertex", "vertex_from", "length"] = "vertex"

    def __post_init__(self):
        if self.timestep < 0:
            raise ValueError("constraint timestep must be >= 0")


@dataclass
class SolveStats:
    expanded: int = 0
    generated: int = 0
    low_level_calls: int = 0
    low_level_expanded: int = 0
    elapsed_ms: float = 0.0


class _Budget:
    """Shared wall-clock and work limits, checked from the low-level searches."""

    def __init__(self, stats: SolveStats, deadline: float | None, max_work: int | None):
        self.stats = stats
        self.deadline = deadline
        self.max_work = max_work

    def tick(self, n: int) -> None:
        self.stats.low_level_expanded += n
        if self.max_work is not None and self.stats.low_level_expanded > self.max_work:
            raise SolverTimeout(f"work budget {self.max_work} exhausted")
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise SolverTimeout("time budget exhausted in low-level search")


@dataclass
class CtNode:
    """Constraint-tree node; constraints are tagged with the agent they guard against."""

    constraints: tuple[tuple[Constraint, int], ...]
    paths: dict[int, tuple[Vertex, ...]]
    cost: int
    conflicts: int = 0
    seq: int = 0
    groups: tuple[tuple[int, ...], ...] = ()

    @property
    def solution(self) -> Plan:
        return Plan(self.paths)

    def sort_key(self):
        return (self.cost, self.conflicts, self.seq)


@dataclass
class _AgentConstraints:
    bans: dict[Vertex, set[int]] = field(default_factory=dict)
    open_bans: dict[Vertex, int] = field(default_factory=dict)
    min_length: int = 0

    def add(self, c: Constraint) -> None:
        if c.kind == "vertex":
            self.bans.setdefault(c.vertex, set()).add(c.timestep)
        elif c.kind == "vertex_from":
            prev = self.open_bans.get(c.vertex)
            self.open_bans[c.vertex] = c.timestep if prev is None else min(prev, c.timestep)
        else:
            self.min_length = max(self.min_length, c.timestep + 1)

    def latest(self) -> int:
        t = self.min_length
        for ts in self.bans.values():
            t = max(t, max(ts))
        for t0 in self.open_bans.values():
            t = max(t, t0)
        return t


class _ConflictTable:
    """Occupancy of other agents, for tie-breaking toward fewer conflicts."""

    def __init__(self, paths: Iterable[tuple[Vertex, ...]]):
        self.occ: dict[tuple[Vertex, int], int] = {}
        self.parked: dict[Vertex, int] = {}
        self.horizon = 0
        for p in paths:
            last = len(p) - 1
            for t, v in enumerate(p[:-1]):
                self.occ[(v, t)] = self.occ.get((v, t), 0) + 1
            self.parked[p[-1]] = last
            self.horizon = max(self.horizon, last)

    def count(self, v: Vertex, t: int) -> int:
        occ = self.occ
        n = occ.get((v, t - 1), 0) + occ.get((v, t), 0) + occ.get((v, t + 1), 0)
        p = self.parked.get(v)
        if p is not None and t + 1 >= p:
            n += 1
        return n


def space_time_astar(
    grid: GridMap,
    start: Vertex,
    goal: Vertex,
    h: list[int],
    cons: _AgentConstraints,
    horizon: int,
    cat: _ConflictTable | None = None,
    budget: _Budget | None = None,
) -> tuple[Vertex, ...] | None:
    """Shortest path under constraints that may then wait at ``goal`` forever.

    Ties on f prefer fewer conflicts with ``cat``, then larger g, then the
    smaller vertex index.
    """
    bans = cons.bans
    open_bans = cons.open_bans
    if h[start] < 0:
        return None
    goal_bans = bans.get(goal)
    earliest_goal = max(cons.min_length, (max(goal_bans) + 1) if goal_bans else 0)
    if goal in open_bans:
        return None
    if _banned(bans, open_bans, start, 0):
        return None
    cap = max(cons.latest(), earliest_goal, cat.horizon if cat else 0) + 1
    adj = grid.adjacency

    def heur(v: Vertex, t: int) -> int:
        d = h[v]
        return d if t + d >= earliest_goal else earliest_goal - t

    # node: (f, conflicts, -t, v, t, parent_idx)
    nodes: list[tuple[Vertex, int]] = [(start, -1)]
    heap = [(heur(start, 0), 0, 0, start, 0, 0)]
    closed: set[tuple[Vertex, int]] = set()
    popped = 0
    while heap:
        f, nc, _, v, t, idx = heapq.heappop(heap)
        key = (v, t if t < cap else cap)
        if key in closed:
            continue
        closed.add(key)
        popped += 1
        if budget is not None and popped % 256 == 0:
            budget.tick(256)
        if v == goal and t >= earliest_goal:
            if budget is not None:
                budget.tick(popped % 256)
            path = []
            while idx >= 0:
                vv, idx = nodes[idx]
                path.append(vv)
            path.reverse()
            return tuple(path)
        nt = t + 1
        if nt > horizon:
            continue
        kt = nt if nt < cap else cap
        for u in (v,) + adj[v]:
            if (u, kt) in closed or h[u] < 0:
                continue
            if _banned(bans, open_bans, u, nt):
                continue
            ncu = nc + (cat.count(u, nt) if cat is not None else 0)
            nodes.append((u, idx))
            heapq.heappush(heap, (nt + heur(u, nt), ncu, -nt, u, nt, len(nodes) - 1))
    if budget is not None:
        budget.tick(popped % 256)
    return None


def _banned(bans, open_bans, v: Vertex, t: int) -> bool:
    ts = bans.get(v)
    if ts is not None and t in ts:
        return True
    t0 = open_bans.get(v)
    return t0 is not None and t >= t0


def _position(path: tuple[Vertex, ...], t: int) -> Vertex:
    return path[t] if t < len(path) else path[-1]


def find_conflicts(paths: dict[int, tuple[Vertex, ...]], first_only: bool = False):
    """Conflicts as ``(a, ta, b, tb, v)``: a at v at ta, b at v at tb, ``ta <= tb``.

    Ordered by ``tb``, then agent pair. Returns a list (or one tuple/None with
    ``first_only``).
    """
    agents = sorted(paths)
    horizon = max((len(p) for p in paths.values()), default=1) - 1
    found = []
    prev: dict[Vertex, int] = {}
    for t in range(horizon + 1):
        cur: dict[Vertex, int] = {}
        at_t = []
        for k in agents:
            p = paths[k]
            v = p[t] if t < len(p) else p[-1]
            other = cur.get(v)
            if other is not None:
                at_t.append((min(other, k), t, max(other, k), t, v))
            else:
                cur[v] = k
            o = prev.get(v)
            if o is not None and o != k:
                at_t.append((o, t - 1, k, t, v))
        if at_t:
            at_t.sort(key=lambda c: (min(c[0], c[2]), max(c[0], c[2]), c[1], c[4]))
            if first_only:
                return at_t[0]
            found.extend(at_t)
        prev = cur
    return None if first_only else found


def _count_conflicts(paths) -> int:
    return len(find_conflicts(paths))


def joint_astar(
    grid: GridMap,
    members: list[int],
    starts: dict[int, Vertex],
    goals: dict[int, Vertex],
    hs: dict[int, list[int]],
    cons: dict[int, _AgentConstraints],
    horizon: int,
    cat: _ConflictTable | None = None,
    budget: _Budget | None = None,
) -> dict[int, tuple[Vertex, ...]] | None:
    """Coupled A* for a meta-agent: minimum summed length, 1-robust inside the group.

    Operator decomposition: one member moves per expansion, so a joint step
    is spread over ``len(members)`` intermediate states. A member standing on
    its goal may "finish" at zero cost and then stays there.
    """
    n = len(members)
    adj = grid.adjacency
    hl = [hs[k] for k in members]
    cl = [cons[k] for k in members]
    gl = [goals[k] for k in members]
    earliest = []
    for k, c in zip(members, cl):
        if goals[k] in c.open_bans:
            return None
        gb = c.bans.get(goals[k])
        earliest.append(max(c.min_length, (max(gb) + 1) if gb else 0))
    start = tuple(starts[k] for k in members)
    for i in range(n):
        if hl[i][start[i]] < 0 or _banned(cl[i].bans, cl[i].open_bans, start[i], 0):
            return None
    cap = max([c.latest() for c in cl] + earliest + [cat.horizon if cat else 0]) + 1

    def h1(i: int, v: Vertex, t: int) -> int:
        d = hl[i][v]
        e = earliest[i] - t
        return d if d > e else e

    def heur(old, new, done, t) -> int:
        s = 0
        m = len(new)
        for i in range(n):
            if not done[i]:
                s += h1(i, new[i], t + 1) if i < m else h1(i, old[i], t)
        return s

    none_done = (False,) * n
    # record: (old, new, done, t, parent_idx); "new" holds moves already chosen for t+1
    records = [(start, (), none_done, 0, -1)]
    heap = [(heur(start, (), none_done, 0), 0, 0, 0, 0)]  # (f, conflicts, -depth, g, idx)
    closed: set = set()
    popped = 0
    while heap:
        f, nc, negd, g, idx = heapq.heappop(heap)
        old, new, done, t, _ = records[idx]
        kt = t if t < cap else cap
        key = (old, new, done, kt)
        if key in closed:
            continue
        closed.add(key)
        popped += 1
        if budget is not None and popped % 256 == 0:
            budget.tick(256)
        i = len(new)
        if i == 0:
            if all(done):
                if budget is not None:
                    budget.tick(popped % 256)
                return _joint_paths(records, idx, members)
            for j in range(n):
                if not done[j] and old[j] == gl[j] and t >= earliest[j]:
                    nd = done[:j] + (True,) + done[j + 1:]
                    if (old, (), nd, kt) not in closed:
                        records.append((old, (), nd, t, idx))
                        heapq.heappush(heap, (g + heur(old, (), nd, t), nc, negd, g, len(records) - 1))
            if t + 1 > horizon:
                continue
        nt = t + 1
        if done[i]:
            choices = (old[i],)
        else:
            c = cl[i]
            hi = hl[i]
            choices = tuple(
                u for u in (old[i],) + adj[old[i]]
                if hi[u] >= 0
                and not _banned(c.bans, c.open_bans, u, nt)
                and u not in new
                and (u == old[i] or u not in old)
            )
        step = 0 if done[i] else 1
        depth = t * (n + 1) + i + 1
        for u in choices:
            nn = new + (u,)
            ncu = nc + (cat.count(u, nt) if (cat is not None and not done[i]) else 0)
            if len(nn) == n:
                rec = (nn, (), done, nt, idx)
                k2 = (nn, (), done, nt if nt < cap else cap)
            else:
                rec = (old, nn, done, t, idx)
                k2 = (old, nn, done, kt)
            if k2 in closed:
                continue
            records.append(rec)
            ng = g + step
            heapq.heappush(heap, (ng + heur(rec[0], rec[1], done, rec[3]), ncu, -depth, ng, len(records) - 1))
    if budget is not None:
        budget.tick(popped % 256)
    return None


def _joint_paths(records, idx, members) -> dict[int, tuple[Vertex, ...]]:
    chain = []
    while idx >= 0:
        old, new, done, t, parent = records[idx]
        if not new:
            chain.append((old, done, t))
        idx = parent
    chain.reverse()
    paths: dict[int, list[Vertex]] = {k: [] for k in members}
    finished = [False] * len(members)
    last_t = -1
    for pos, done, t in chain:
        for i, k in enumerate(members):
            if finished[i]:
                continue
            if t != last_t:
                paths[k].append(pos[i])
            if done[i]:
                finished[i] = True
        last_t = t
    return {k: tuple(p) for k, p in paths.items()}


class CBS:
    """1-robust CBS with optional meta-agent merging.

    Once two groups have conflicted more than ``merge_threshold`` times
    (counted over the whole tree) they are merged in the node where the
    threshold is crossed and planned jointly, dropping the constraints they
    imposed on each other. ``merge_threshold=None`` gives plain CBS.

    ``time_budget_ms``, ``max_nodes`` (constraint-tree expansions) and
    ``max_work`` (low-level expansions) bound the search; the count budgets
    keep outcomes independent of machine speed.
    """

    def __init__(
        self,
        instance: MapfInstance,
        time_budget_ms: float | None = DEFAULT_BUDGET_MS,
        max_nodes: int | None = None,
        merge_threshold: int | None = 10,
        max_group: int = 3,
        max_work: int | None = None,
    ):
        self.instance = instance
        self.grid = instance.map
        self.time_budget_ms = time_budget_ms
        self.max_nodes = max_nodes
        self.merge_threshold = merge_threshold
        self.max_group = max_group
        self.max_work = max_work
        self.agents: dict[int, Agent] = {a.id: a for a in instance.agents}
        self.h = {a.id: self.grid.distances_from(a.goal) for a in instance.agents}
        total = sum(self.h[a.id][a.start] for a in instance.agents if self.h[a.id][a.start] > 0)
        # per-agent path-length cap; bounds the tree so exhaustion proves unsolvability
        self.horizon = len(self.grid.vertices) * max(len(self.agents), 1) + total
        self.stats = SolveStats()
        self._pair_conflicts: dict[tuple[int, int], int] = {}
        self._deadline: float | None = None
        self._budget = _Budget(self.stats, None, max_work)

    def _plan_group(self, group: tuple[int, ...], constraints, paths) -> dict[int, tuple[Vertex, ...]] | None:
        cons = {k: _AgentConstraints() for k in group}
        for c, _src in constraints:
            if c.agent in cons:
                cons[c.agent].add(c)
        cat = _ConflictTable(p for j, p in paths.items() if j not in cons)
        self.stats.low_level_calls += 1
        if len(group) == 1:
            (k,) = group
            a = self.agents[k]
            p = space_time_astar(self.grid, a.start, a.goal, self.h[k], cons[k], self.horizon, cat, self._budget)
            return None if p is None else {k: p}
        return joint_astar(
            self.grid,
            list(group),
            {k: self.agents[k].start for k in group},
            {k: self.agents[k].goal for k in group},
            self.h,
            cons,
            self.horizon,
            cat,
            self._budget,
        )

    def _split(self, conflict, paths) -> list[tuple[Constraint, int]]:
        """Constraints for the two children, each tagged with the agent it protects against."""
        a, ta, b, tb, v = conflict
        for parked, t_parked, other in ((a, ta, b), (b, tb, a)):
            p = paths[parked]
            last = len(p) - 1
            if v == p[-1] and t_parked >= last:
                t_other = tb if other == b else ta
                tp = max(last, t_other - 1)
                return [
                    (Constraint(parked, v, tp, "length"), other),
                    (Constraint(other, v, max(tp - 1, 0), "vertex_from"), parked),
                ]
        return [(Constraint(a, v, ta, "vertex"), b)] + [
            (Constraint(b, v, t, "vertex"), a) for t in (ta - 1, ta, ta + 1) if t >= 0
        ]

    def solve(self) -> Plan:
        t0 = time.perf_counter()
        if self.time_budget_ms is not None:
            self._deadline = t0 + self.time_budget_ms / 1000.0
        self._budget.deadline = self._deadline
        try:
            return self._solve()
        finally:
            self.stats.elapsed_ms = (time.perf_counter() - t0) * 1000.0

    def _out_of_budget(self) -> str | None:
        if self.max_nodes is not None and self.stats.expanded > self.max_nodes:
            return f"node budget {self.max_nodes} exhausted"
        if self._deadline is not None and time.perf_counter() > self._deadline:
            return f"time budget {self.time_budget_ms} ms exhausted"
        return None

    def _push(self, heap, node: CtNode) -> None:
        node.conflicts = _count_conflicts(node.paths)
        heapq.heappush(heap, (node.sort_key(), node))

    def _solve(self) -> Plan:
        for a in self.instance.agents:
            if self.h[a.id][a.start] < 0:
                raise Unsolvable(f"agent {a.id}: goal unreachable from start")
        paths: dict[int, tuple[Vertex, ...]] = {}
        for k in sorted(self.agents):
            found = self._plan_group((k,), (), paths)
            if found is None:
                raise Unsolvable(f"agent {k}: no path within horizon {self.horizon}")
            paths.update(found)
        seq = itertools.count()
        groups = tuple((k,) for k in sorted(self.agents))
        root = CtNode((), paths, sum(len(p) - 1 for p in paths.values()), seq=next(seq))
        root.groups = groups
        heap: list = []
        self._push(heap, root)
        while heap:
            _, node = heapq.heappop(heap)
            self.stats.expanded += 1
            conflict = find_conflicts(node.paths, first_only=True)
            if conflict is None:
                return node.solution
            reason = self._out_of_budget()
            if reason:
                raise SolverTimeout(reason)
            a, _, b, _, _ = conflict
            ga = next(g for g in node.groups if a in g)
            gb = next(g for g in node.groups if b in g)
            pair = (min(a, b), max(a, b))
            self._pair_conflicts[pair] = self._pair_conflicts.get(pair, 0) + 1
            if self._should_merge(ga, gb):
                merged = self._merge(node, ga, gb, next(seq))
                if merged is not None:
                    self._push(heap, merged)
                continue
            groups_to_constraints: dict[int, list[tuple[Constraint, int]]] = {}
            for c, src in self._split(conflict, node.paths):
                groups_to_constraints.setdefault(c.agent, []).append((c, src))
            for k, new in groups_to_constraints.items():
                fresh = tuple(x for x in new if x not in node.constraints)
                if not fresh:
                    continue
                constraints = node.constraints + fresh
                group = next(g for g in node.groups if k in g)
                found = self._plan_group(group, constraints, node.paths)
                if found is None:
                    continue
                child_paths = dict(node.paths)
                child_paths.update(found)
                cost = sum(len(p) - 1 for p in child_paths.values())
                child = CtNode(constraints, child_paths, cost, seq=next(seq))
                child.groups = node.groups
                self.stats.generated += 1
                self._push(heap, child)
        raise Unsolvable("constraint tree exhausted")

    def _should_merge(self, ga, gb) -> bool:
        if self.merge_threshold is None or len(ga) + len(gb) > self.max_group:
            return False
        total = sum(self._pair_conflicts.get((min(i, j), max(i, j)), 0) for i in ga for j in gb)
        return total > self.merge_threshold

    def _merge(self, node: CtNode, ga, gb, seq: int) -> CtNode | None:
        group = tuple(sorted(ga + gb))
        members = set(group)
        constraints = tuple(
            (c, src) for c, src in node.constraints if not (c.agent in members and src in members)
        )
        found = self._plan_group(group, constraints, node.paths)
        if found is None:
            return None
        paths = dict(node.paths)
        paths.update(found)
        child = CtNode(constraints, paths, sum(len(p) - 1 for p in paths.values()), seq=seq)
        child.groups = tuple(g for g in node.groups if g not in (ga, gb)) + (group,)
        self.stats.generated += 1
        return child


def solve(
    instance: MapfInstance,
    objective: Literal["soc"] = "soc",
    time_budget_ms: float | None = DEFAULT_BUDGET_MS,
    max_nodes: int | None = None,
    merge_threshold: int | None = 10,
    max_work: int | None = None,
) -> Plan:
    """SOC-optimal 1-robust plan; raises :class:`SolverTimeout` or :class:`Unsolvable`."""
    if objective != "soc":
        raise ValueError("only the 'soc' objective is supported")
    return CBS(instance, time_budget_ms, max_nodes, merge_threshold, max_work=max_work).solve()


def replan(
    grid: GridMap,
    config: Iterable[tuple[int, Vertex, Vertex]],
    time_budget_ms: float | None = DEFAULT_BUDGET_MS,
    max_nodes: int | None = None,
    merge_threshold: int | None = 10,
    max_work: int | None = None,
) -> Plan:
    """Plan from the current fleet configuration ``(agent_id, current, goal)``."""
    agents = tuple(Agent(k, cur, goal) for k, cur, goal in config)
    return solve(MapfInstance(grid, agents), time_budget_ms=time_budget_ms, max_nodes=max_nodes,
                 merge_threshold=merge_threshold, max_work=max_work)
