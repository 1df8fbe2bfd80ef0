"""Grid maps, MAPF instances, plans and 1-robust plan validation.

Vertices are integer cell indices ``y * width + x``; files and JSON use
``[x, y]`` coordinates. Agents stay parked on their goal after their plan
ends, so every check extends a finished path with waits at the goal.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal, Sequence

PASSABLE = frozenset(".G")
BLOCKED = frozenset("@TO")

Vertex = int
Coord = tuple[int, int]


class MapParseError(ValueError):
    """Raised for malformed ``.map``/``.scen``/instance files."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    cells: tuple[bool, ...]
    name: str = ""

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"map dimensions must be positive, got {self.width}x{self.height}")
        if len(self.cells) != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} cells, got {len(self.cells)}"
            )

    @classmethod
    def from_rows(cls, rows: Sequence[str], name: str = "") -> "GridMap":
        """Build a map from rows of ``.``/``@`` characters (any passable/blocked glyph)."""
        return load_map(_render_header(len(rows[0]), len(rows)) + "\n".join(rows), name=name)

    def vertex(self, x: int, y: int) -> Vertex:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"({x}, {y}) outside {self.width}x{self.height} map")
        return y * self.width + x

    def coord(self, v: Vertex) -> Coord:
        return v % self.width, v // self.width

    def passable(self, v: Vertex) -> bool:
        return 0 <= v < len(self.cells) and self.cells[v]

    @cached_property
    def vertices(self) -> tuple[Vertex, ...]:
        return tuple(v for v, free in enumerate(self.cells) if free)

    @cached_property
    def adjacency(self) -> tuple[tuple[Vertex, ...], ...]:
        # 4-connected; neighbours in ascending vertex order
        w, h = self.width, self.height
        adj = []
        for v, free in enumerate(self.cells):
            if not free:
                adj.append(())
                continue
            x, y = v % w, v // w
            nbrs = []
            if y > 0 and self.cells[v - w]:
                nbrs.append(v - w)
            if x > 0 and self.cells[v - 1]:
                nbrs.append(v - 1)
            if x < w - 1 and self.cells[v + 1]:
                nbrs.append(v + 1)
            if y < h - 1 and self.cells[v + w]:
                nbrs.append(v + w)
            adj.append(tuple(nbrs))
        return tuple(adj)

    def neighbors(self, v: Vertex) -> tuple[Vertex, ...]:
        return self.adjacency[v]

    @cached_property
    def edges(self) -> frozenset[tuple[Vertex, Vertex]]:
        """Undirected edges as ``(u, v)`` with ``u < v``."""
        return frozenset((u, v) for u in self.vertices for v in self.adjacency[u] if u < v)

    def distances_from(self, source: Vertex) -> list[int]:
        """BFS distances from ``source``; unreachable cells get ``-1``."""
        dist = [-1] * len(self.cells)
        dist[source] = 0
        queue = deque([source])
        adj = self.adjacency
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for v in adj[u]:
                if dist[v] < 0:
                    dist[v] = du
                    queue.append(v)
        return dist

    def rows(self) -> list[str]:
        w = self.width
        return ["".join("." if self.cells[y * w + x] else "@" for x in range(w)) for y in range(self.height)]

    def to_text(self) -> str:
        return _render_header(self.width, self.height) + "\n".join(self.rows()) + "\n"


def _render_header(width: int, height: int) -> str:
    return f"type octile\nheight {height}\nwidth {width}\nmap\n"


def load_map(text: str, name: str = "") -> GridMap:
    """Parse MovingAI ``.map`` text."""
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw:
            continue
        if raw == "map":
            break
        key, _, value = raw.partition(" ")
        if key not in ("type", "height", "width"):
            raise MapParseError(f"unexpected header entry {raw!r}", line=i)
        header[key] = value.strip()
    else:
        raise MapParseError("missing 'map' line", line=len(lines))
    for key in ("height", "width"):
        if key not in header:
            raise MapParseError(f"missing '{key}' header")
        if not header[key].isdigit() or int(header[key]) < 1:
            raise MapParseError(f"bad {key} value {header[key]!r}")
    height, width = int(header["height"]), int(header["width"])
    body = lines[i:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != height:
        raise MapParseError(f"expected {height} map rows, found {len(body)}", line=i + len(body))
    cells: list[bool] = []
    for r, row in enumerate(body):
        row = row.rstrip("\r")
        if len(row) != width:
            raise MapParseError(f"expected {width} columns, found {len(row)}", line=i + r + 1)
        for c, ch in enumerate(row):
            if ch in PASSABLE:
                cells.append(True)
            elif ch in BLOCKED:
                cells.append(False)
            else:
                raise MapParseError(f"unknown cell character {ch!r}", line=i + r + 1, column=c + 1)
    return GridMap(width, height, tuple(cells), name)


@dataclass(frozen=True)
class Agent:
    id: int
    start: Vertex
    goal: Vertex


@dataclass(frozen=True)
class MapfInstance:
    map: GridMap
    agents: tuple[Agent, ...]

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        for a in self.agents:
            for what, v in (("start", a.start), ("goal", a.goal)):
                if not self.map.passable(v):
                    raise ValueError(f"agent {a.id} {what} {self.map.coord(v)} is not traversable")
        if len({a.start for a in self.agents}) != len(self.agents):
            raise ValueError("agent starts must be pairwise distinct")
        if len({a.goal for a in self.agents}) != len(self.agents):
            raise ValueError("agent goals must be pairwise distinct")

    @classmethod
    def from_coords(cls, grid: GridMap, pairs: Iterable[tuple[Coord, Coord]]) -> "MapfInstance":
        agents = tuple(
            Agent(k, grid.vertex(*s), grid.vertex(*g)) for k, (s, g) in enumerate(pairs)
        )
        return cls(grid, agents)

    def agent(self, agent_id: int) -> Agent:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)

    def to_json(self, map_ref: str | None = None) -> dict:
        """JSON instance: ``map`` is a file reference or an inline row list."""
        coord = self.map.coord
        return {
            "map": map_ref if map_ref is not None else {"name": self.map.name, "rows": self.map.rows()},
            "agents": [
                {"id": a.id, "start": list(coord(a.start)), "goal": list(coord(a.goal))}
                for a in self.agents
            ],
        }


def instance_from_json(data: dict, grid: GridMap | None = None) -> MapfInstance:
    """Inverse of :meth:`MapfInstance.to_json`; ``grid`` resolves a map file reference."""
    m = data.get("map")
    if isinstance(m, dict):
        grid = GridMap.from_rows(m["rows"], name=m.get("name", ""))
    elif grid is None:
        raise MapParseError(f"instance references map {m!r} but no map was supplied")
    agents = []
    for entry in data["agents"]:
        agents.append(Agent(int(entry["id"]), grid.vertex(*entry["start"]), grid.vertex(*entry["goal"])))
    return MapfInstance(grid, tuple(agents))


def load_scen(text: str, grid: GridMap, n_agents: int | None = None) -> MapfInstance:
    """Parse a MovingAI ``.scen`` (version 1) file; first ``n_agents`` rows become agents."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].lower().startswith("version"):
        raise MapParseError("missing 'version' header", line=1)
    pairs = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split("\t") if "\t" in ln else ln.split()
        if len(parts) < 8:
            raise MapParseError(f"expected 9 fields, found {len(parts)}", line=lineno)
        try:
            sx, sy, gx, gy = (int(p) for p in parts[4:8])
        except ValueError as exc:
            raise MapParseError(f"non-integer coordinate ({exc})", line=lineno) from None
        pairs.append(((sx, sy), (gx, gy)))
        if n_agents is not None and len(pairs) == n_agents:
            break
    return MapfInstance.from_coords(grid, pairs)


def dump_scen(instance: MapfInstance, map_file: str = "map.map") -> str:
    g = instance.map
    out = ["version 1"]
    for a in instance.agents:
        sx, sy = g.coord(a.start)
        gx, gy = g.coord(a.goal)
        out.append(f"0\t{map_file}\t{g.width}\t{g.height}\t{sx}\t{sy}\t{gx}\t{gy}\t0")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Action:
    agent: int
    timestep: int
    source: Vertex
    target: Vertex

    @property
    def is_wait(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class Plan:
    """Per-agent vertex sequences; ``paths[k][t]`` is agent k's vertex at timestep t."""

    paths: dict[int, tuple[Vertex, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "paths", {k: tuple(p) for k, p in sorted(self.paths.items())})
        for k, p in self.paths.items():
            if not p:
                raise ValueError(f"agent {k} has an empty path (needs at least its start vertex)")

    @property
    def agents(self) -> list[int]:
        return list(self.paths)

    def length(self, agent: int) -> int:
        return len(self.paths[agent]) - 1

    @property
    def soc(self) -> int:
        return sum(len(p) - 1 for p in self.paths.values())

    @property
    def makespan(self) -> int:
        return max((len(p) - 1 for p in self.paths.values()), default=0)

    def actions(self, agent: int) -> tuple[Action, ...]:
        p = self.paths[agent]
        return tuple(Action(agent, i, p[i], p[i + 1]) for i in range(len(p) - 1))

    def position(self, agent: int, t: int) -> Vertex:
        p = self.paths[agent]
        return p[t] if t < len(p) else p[-1]

    def to_json(self, grid: GridMap) -> dict:
        return {
            "soc": self.soc,
            "makespan": self.makespan,
            "paths": {str(k): [list(grid.coord(v)) for v in p] for k, p in self.paths.items()},
        }

    @classmethod
    def from_json(cls, data: dict, grid: GridMap) -> "Plan":
        return cls({int(k): tuple(grid.vertex(*xy) for xy in p) for k, p in data["paths"].items()})

    def to_csv(self, grid: GridMap) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["agent", "timestep", "from_x", "from_y", "to_x", "to_y"])
        for k in self.paths:
            for a in self.actions(k):
                w.writerow([k, a.timestep, *grid.coord(a.source), *grid.coord(a.target)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, grid: GridMap, starts: dict[int, Vertex] | None = None) -> "Plan":
        """Rebuild from the CSV form; agents without rows need ``starts``."""
        rows: dict[int, list[tuple[int, Vertex, Vertex]]] = {}
        for r in csv.DictReader(io.StringIO(text)):
            src = grid.vertex(int(r["from_x"]), int(r["from_y"]))
            dst = grid.vertex(int(r["to_x"]), int(r["to_y"]))
            rows.setdefault(int(r["agent"]), []).append((int(r["timestep"]), src, dst))
        paths = {k: (v,) for k, v in (starts or {}).items()}
        for k, acts in rows.items():
            acts.sort()
            paths[k] = (acts[0][1],) + tuple(dst for _, _, dst in acts)
        return cls(paths)


def plan_cost(plan: Plan, objective: Literal["soc", "makespan"] = "soc") -> int:
    if objective == "soc":
        return plan.soc
    if objective == "makespan":
        return plan.makespan
    raise ValueError(f"unknown objective {objective!r}")


ConflictKind = Literal["vertex", "swap", "following", "cycle", "structural"]


@dataclass(frozen=True)
class Conflict:
    kind: ConflictKind
    agents: tuple[int, ...]
    timestep: int
    vertices: tuple[Vertex, ...]
    detail: str = ""

    def describe(self, grid: GridMap | None = None) -> str:
        where = [grid.coord(v) for v in self.vertices] if grid else list(self.vertices)
        text = f"{self.kind} conflict t={self.timestep} agents={list(self.agents)} at {where}"
        return text + (f" ({self.detail})" if self.detail else "")


def structural_errors(instance: MapfInstance, plan: Plan) -> list[Conflict]:
    errors = []
    grid = instance.map
    ids = {a.id for a in instance.agents}
    if set(plan.paths) != ids:
        missing = sorted(ids - set(plan.paths))
        extra = sorted(set(plan.paths) - ids)
        errors.append(Conflict("structural", tuple(missing + extra), 0, (), f"missing={missing} extra={extra}"))
    for a in instance.agents:
        p = plan.paths.get(a.id)
        if p is None:
            continue
        if p[0] != a.start:
            errors.append(Conflict("structural", (a.id,), 0, (p[0],), "path does not begin at start"))
        if p[-1] != a.goal:
            errors.append(Conflict("structural", (a.id,), len(p) - 1, (p[-1],), "path does not end at goal"))
        for t, v in enumerate(p):
            if not grid.passable(v):
                errors.append(Conflict("structural", (a.id,), t, (v,), "vertex not traversable"))
            elif t and v != p[t - 1] and v not in grid.adjacency[p[t - 1]]:
                errors.append(Conflict("structural", (a.id,), t, (p[t - 1], v), "not a 4-neighbour move"))
    return errors


def validate_plan(instance: MapfInstance, plan: Plan) -> list[Conflict]:
    """Return every vertex, swap, following and cycle conflict; empty iff 1-robust.

    Structural problems (wrong endpoints, illegal moves, missing agents) are
    reported with kind ``"structural"`` and short-circuit the conflict scan.
    """
    errors = structural_errors(instance, plan)
    if errors:
        return errors
    agents = sorted(plan.paths)
    horizon = plan.makespan
    report: list[Conflict] = []
    prev: dict[int, Vertex] = {}
    for t in range(horizon + 1):
        cur = {k: plan.position(k, t) for k in agents}
        by_vertex: dict[Vertex, list[int]] = {}
        for k in agents:
            by_vertex.setdefault(cur[k], []).append(k)
        for v, ks in sorted(by_vertex.items()):
            if len(ks) > 1:
                report.append(Conflict("vertex", tuple(ks), t, (v,)))
        if t == 0:
            prev = cur
            continue
        # b follows a when b enters the vertex a occupied at t-1 and a moved away
        previous_occupant = {v: k for k, v in prev.items()}
        follows: dict[int, int] = {}
        for b in agents:
            v = cur[b]
            if v == prev[b]:
                continue
            a = previous_occupant.get(v)
            if a is not None and a != b and cur[a] != v:
                follows[b] = a
        in_cycle: set[int] = set()
        for b0 in sorted(follows):
            if b0 in in_cycle:
                continue
            chain = [b0]
            nxt = follows[b0]
            while nxt in follows and nxt not in chain:
                chain.append(nxt)
                nxt = follows[nxt]
            if nxt == b0:
                in_cycle.update(chain)
                verts = tuple(prev[k] for k in chain)
                if len(chain) == 2:
                    report.append(Conflict("swap", tuple(sorted(chain)), t, tuple(sorted(verts))))
                else:
                    low = chain.index(min(chain))
                    order = tuple(chain[low:] + chain[:low])
                    report.append(Conflict("cycle", order, t, tuple(prev[k] for k in order)))
        for b, a in sorted(follows.items()):
            if b not in in_cycle:
                report.append(Conflict("following", (a, b), t, (cur[b],)))
        prev = cur
    return report


def is_one_robust(instance: MapfInstance, plan: Plan) -> bool:
    return not validate_plan(instance, plan)
