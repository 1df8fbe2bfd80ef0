"""Built-in maps.

``room32`` and ``random32`` are generated stand-ins with the structure of
the MovingAI ``room-32-32-4`` and ``random-32-32-20`` maps; ``lab`` and
``arena`` are synthetic approximations of unpublished layouts. Drop real
``.map`` files in place of these via :func:`robust_mapf.core.load_map`.
"""

from __future__ import annotations

import random

from .core import GridMap, MapfInstance


def _largest_component(width: int, height: int, cells: list[bool]) -> list[bool]:
    grid = GridMap(width, height, tuple(cells))
    seen: set[int] = set()
    best: set[int] = set()
    for v in grid.vertices:
        if v in seen:
            continue
        comp = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for w in grid.adjacency[u]:
                if w not in comp:
                    comp.add(w)
                    stack.append(w)
        seen |= comp
        if len(comp) > len(best):
            best = comp
    return [i in best for i in range(width * height)]


def random_map(width: int = 32, height: int = 32, density: float = 0.2, seed: int = 0, name: str = "") -> GridMap:
    rng = random.Random(seed)
    n = width * height
    blocked = set(rng.sample(range(n), round(density * n)))
    cells = _largest_component(width, height, [i not in blocked for i in range(n)])
    return GridMap(width, height, tuple(cells), name or f"random{width}-{height}-{round(density * 100)}")


def room_map(width: int = 32, height: int = 32, room: int = 3, seed: int = 0, name: str = "") -> GridMap:
    """Square rooms of side ``room`` separated by 1-cell walls, one door per shared wall."""
    rng = random.Random(seed)
    step = room + 1
    cells = [[True] * width for _ in range(height)]
    for y in range(height):
        for x in range(width):
            if x % step == room or y % step == room:
                cells[y][x] = False
    rooms_x = (width + 1) // step
    rooms_y = (height + 1) // step
    for ry in range(rooms_y):
        for rx in range(rooms_x):
            wx = rx * step + room
            if rx + 1 < rooms_x and wx < width:
                cells[ry * step + rng.randrange(room)][wx] = True
            wy = ry * step + room
            if ry + 1 < rooms_y and wy < height:
                cells[wy][rx * step + rng.randrange(room)] = True
    flat = _largest_component(width, height, [c for row in cells for c in row])
    return GridMap(width, height, tuple(flat), name or f"room{width}-{height}-{room + 1}")


def lab_map() -> GridMap:
    """Warehouse-like stand-in: shelf rows with aisles (not the real laboratory)."""
    rows = [
        "....................",
        ".@@@@.@@@@.@@@@.@@@.",
        "....................",
        ".@@@@.@@@@.@@@@.@@@.",
        "....................",
        ".@@@@.@@@@.@@@@.@@@.",
        "....................",
        ".@@@@.@@@@.@@@@.@@@.",
        "....................",
        "....................",
    ]
    return GridMap.from_rows(rows, name="lab")


def arena_map(size: int = 33, seed: int = 3) -> GridMap:
    """Open arena stand-in with sparse pillars."""
    rng = random.Random(seed)
    cells = [True] * (size * size)
    for y in range(2, size - 2, 5):
        for x in range(2, size - 2, 5):
            if rng.random() < 0.7:
                cells[y * size + x] = False
    return GridMap(size, size, tuple(_largest_component(size, size, cells)), "arena")


# Two agents; the lower-numbered agent is "red", the other "blue".
def fig4_map() -> GridMap:
    """Two routes east of the junction (4, 4): a short one past blue's goal, a longer upper one."""
    return GridMap.from_rows(_fig4_rows(), name="two-corridor")


def _fig4_rows() -> list[str]:
    w = 12
    grid = [["@"] * w for _ in range(9)]
    for x in range(0, 5):
        grid[4][x] = "."  # red's approach lane, junction at x=4
    for y in range(5, 9):
        grid[y][4] = "."  # blue's approach lane
    for x in range(5, 12):
        grid[4][x] = "."  # middle corridor
    for y in (2, 3):
        grid[y][5] = "."
        grid[y][10] = "."
    for x in range(5, 11):
        grid[2][x] = "."  # upper corridor
    return ["".join(r) for r in grid]


def fig4_instance() -> MapfInstance:
    grid = fig4_map()
    red = ((0, 4), (11, 4))
    blue = ((4, 8), (8, 4))
    return MapfInstance.from_coords(grid, [red, blue])


def fig1_instance() -> MapfInstance:
    """Small crossing: agent 1 must let agent 0 through the shared centre cell first."""
    grid = GridMap.from_rows(
        [
            "@.@",
            "...",
            "@.@",
        ],
        name="cross",
    )
    return MapfInstance.from_coords(grid, [((0, 1), (2, 1)), ((1, 0), (1, 2))])


BUILTIN = {
    "room32": lambda: room_map(name="room32"),
    "random32": lambda: random_map(name="random32"),
    "lab": lab_map,
    "arena": arena_map,
    "two-corridor": fig4_map,
}


def builtin_map(name: str) -> GridMap:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown built-in map {name!r}; choose from {sorted(BUILTIN)}") from None
