"""Brute-force references kept independent of the package's own algorithms."""

from __future__ import annotations

import heapq
import itertools
from collections import deque

from robust_mapf.core import GridMap, MapfInstance, Plan


def _bfs(grid: GridMap, src: int) -> dict[int, int]:
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for v in grid.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def joint_optimal_soc(instance: MapfInstance, max_depth: int = 60) -> int | None:
    """Exact 1-robust SOC optimum by search over joint configurations.

    State = positions plus a "finished" flag per agent. An agent on its goal
    may finish (free) and then never moves again. Each step costs the number
    of unfinished agents. A joint step is legal when no two agents share a
    vertex afterwards and no agent enters a vertex another agent held before.
    """
    grid = instance.map
    starts = tuple(a.start for a in instance.agents)
    goals = tuple(a.goal for a in instance.agents)
    n = len(starts)
    dists = [_bfs(grid, g) for g in goals]
    if any(starts[i] not in dists[i] for i in range(n)):
        return None

    def h(pos, done):
        return sum(0 if done[i] else dists[i].get(pos[i], 10**6) for i in range(n))

    none_done = (False,) * n
    best: dict[tuple, int] = {(starts, none_done): 0}
    counter = itertools.count()
    heap = [(h(starts, none_done), 0, next(counter), starts, none_done, 0)]
    while heap:
        f, g, _, pos, done, depth = heapq.heappop(heap)
        if all(done):
            return g
        key = (pos, done)
        if best.get(key, 10**9) < g:
            continue
        # optional finishing is free; expand it as zero-cost successors
        for i in range(n):
            if not done[i] and pos[i] == goals[i]:
                nd = done[:i] + (True,) + done[i + 1:]
                k2 = (pos, nd)
                if best.get(k2, 10**9) > g:
                    best[k2] = g
                    heapq.heappush(heap, (g + h(pos, nd), g, next(counter), pos, nd, depth))
        if depth >= max_depth:
            continue
        options = [
            (pos[i],) if done[i] else (pos[i],) + grid.neighbors(pos[i]) for i in range(n)
        ]
        step = sum(1 for d in done if not d)
        if step == 0:
            continue
        occupied = set(pos)
        for nxt in itertools.product(*options):
            if len(set(nxt)) < n:
                continue
            ok = True
            for i in range(n):
                if nxt[i] != pos[i] and nxt[i] in occupied:
                    ok = False
                    break
            if not ok:
                continue
            ng = g + step
            k2 = (nxt, done)
            if best.get(k2, 10**9) > ng:
                best[k2] = ng
                heapq.heappush(heap, (ng + h(nxt, done), ng, next(counter), nxt, done, depth + 1))
    return None


def naive_robust_violations(plan: Plan) -> set[tuple[int, int, int]]:
    """Occupancy-table scan: ``(a, b, t)`` where b is at a vertex a held at t or t-1."""
    agents = sorted(plan.paths)
    horizon = plan.makespan
    table = {k: [plan.position(k, t) for t in range(horizon + 1)] for k in agents}
    bad = set()
    for t in range(horizon + 1):
        for a in agents:
            for b in agents:
                if a == b:
                    continue
                if table[a][t] == table[b][t] and a < b:
                    bad.add((a, b, t))
                if t > 0 and table[a][t - 1] == table[b][t]:
                    bad.add((a, b, t))
    return bad


def shortest_path_len(grid: GridMap, src: int, dst: int, blocked: set[int] = frozenset()) -> int | None:
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        if u == dst:
            return dist[u]
        for v in grid.neighbors(u):
            if v not in dist and v not in blocked:
                dist[v] = dist[u] + 1
                q.append(v)
    return None
