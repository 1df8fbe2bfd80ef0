import random

import pytest
from hypothesis import strategies as st

from robust_mapf.core import Agent, GridMap, MapfInstance, Plan


def random_small_instance(rng: random.Random, max_side: int = 5, max_agents: int = 3, density: float = 0.25):
    """Random grid of side <= max_side with up to max_agents agents; None if too few free cells."""
    w, h = rng.randint(2, max_side), rng.randint(2, max_side)
    cells = tuple(rng.random() > density for _ in range(w * h))
    if sum(cells) < 2:
        return None
    grid = GridMap(w, h, cells)
    free = list(grid.vertices)
    n = rng.randint(1, min(max_agents, len(free)))
    starts = rng.sample(free, n)
    goals = rng.sample(free, n)
    return MapfInstance(grid, tuple(Agent(k, s, g) for k, (s, g) in enumerate(zip(starts, goals))))


@st.composite
def small_instances(draw, max_side=5, max_agents=3):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = random.Random(seed)
    inst = None
    while inst is None:
        inst = random_small_instance(rng, max_side, max_agents)
    return inst


def corridor(length: int) -> GridMap:
    return GridMap.from_rows(["." * length], name=f"corridor{length}")


@pytest.fixture
def open4():
    return GridMap.from_rows(["...."] * 4, name="open4")


def hand_plan(grid: GridMap, paths: dict[int, list[tuple[int, int]]]) -> Plan:
    return Plan({k: tuple(grid.vertex(x, y) for x, y in p) for k, p in paths.items()})


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def _report(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
