import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import corridor, hand_plan, small_instances
from oracles import naive_robust_violations
from robust_mapf.core import (
    Agent,
    GridMap,
    MapParseError,
    MapfInstance,
    Plan,
    dump_scen,
    instance_from_json,
    load_map,
    load_scen,
    plan_cost,
    validate_plan,
)

MAP_TEXT = """type octile
height 3
width 4
map
.@..
....
T..G
"""


def test_load_map_header_and_cells():
    g = load_map(MAP_TEXT, name="tiny")
    assert (g.width, g.height) == (4, 3)
    assert not g.passable(g.vertex(1, 0))
    assert not g.passable(g.vertex(0, 2))
    assert g.passable(g.vertex(3, 2))
    assert len(g.vertices) == 10


def test_map_text_roundtrip():
    g = load_map(MAP_TEXT)
    assert load_map(g.to_text()).cells == g.cells


@pytest.mark.parametrize(
    "text, line, column",
    [
        ("type octile\nheight 2\nwidth 2\nmap\n..\n.x\n", 6, 2),
        ("type octile\nheight 2\nwidth 2\nmap\n..\n...\n", 6, None),
        ("type octile\nheight 3\nwidth 2\nmap\n..\n..\n", 6, None),
    ],
)
def test_map_errors_carry_position(text, line, column):
    with pytest.raises(MapParseError) as exc:
        load_map(text)
    assert exc.value.line == line
    assert exc.value.column == column


def test_map_missing_dimensions():
    with pytest.raises(MapParseError):
        load_map("type octile\nmap\n..\n")


def test_neighbours_are_four_connected_and_sorted():
    g = GridMap.from_rows(["...", ".@.", "..."])
    centre_left = g.vertex(0, 1)
    assert g.neighbors(centre_left) == (g.vertex(0, 0), g.vertex(0, 2))
    assert g.neighbors(g.vertex(1, 1)) == ()
    for v in g.vertices:
        assert list(g.neighbors(v)) == sorted(g.neighbors(v))


def test_distances_unreachable_is_minus_one():
    g = GridMap.from_rows([".@."])
    d = g.distances_from(g.vertex(0, 0))
    assert d[g.vertex(2, 0)] == -1


def test_instance_rejects_shared_start_and_blocked_cells():
    g = corridor(3)
    with pytest.raises(ValueError):
        MapfInstance(g, (Agent(0, 0, 2), Agent(1, 0, 1)))
    blocked = GridMap.from_rows([".@."])
    with pytest.raises(ValueError):
        MapfInstance(blocked, (Agent(0, 1, 2),))


def test_scen_roundtrip():
    g = load_map(MAP_TEXT)
    inst = MapfInstance.from_coords(g, [((0, 0), (3, 2)), ((2, 0), (1, 1))])
    back = load_scen(dump_scen(inst, "tiny.map"), g)
    assert back == inst
    assert load_scen(dump_scen(inst), g, n_agents=1).agents == inst.agents[:1]


def test_scen_bad_row_reports_line():
    g = load_map(MAP_TEXT)
    with pytest.raises(MapParseError) as exc:
        load_scen("version 1\n0\tm\t4\t3\t0\t0\n", g)
    assert exc.value.line == 2


def test_instance_json_roundtrip():
    g = load_map(MAP_TEXT, name="tiny")
    inst = MapfInstance.from_coords(g, [((0, 0), (3, 2))])
    data = json.loads(json.dumps(inst.to_json()))
    assert instance_from_json(data) == inst
    with pytest.raises(MapParseError):
        instance_from_json(inst.to_json(map_ref="tiny.map"))
    assert instance_from_json(inst.to_json(map_ref="tiny.map"), g) == inst


def test_plan_costs_and_serialisation():
    g = corridor(5)
    plan = hand_plan(g, {0: [(0, 0), (1, 0), (2, 0)], 1: [(4, 0), (4, 0), (3, 0)]})
    assert plan.soc == 4
    assert plan.makespan == 2
    assert plan_cost(plan, "makespan") == 2
    assert Plan.from_json(json.loads(json.dumps(plan.to_json(g))), g) == plan
    assert Plan.from_csv(plan.to_csv(g), g) == plan
    assert plan.to_csv(g).splitlines()[0] == "agent,timestep,from_x,from_y,to_x,to_y"


def test_position_parks_at_goal():
    g = corridor(3)
    plan = hand_plan(g, {0: [(0, 0), (1, 0)]})
    assert plan.position(0, 10) == g.vertex(1, 0)


def _kinds(inst, plan):
    return sorted(c.kind for c in validate_plan(inst, plan))


def test_vertex_conflict():
    g = GridMap.from_rows(["...", ".@."])
    inst = MapfInstance.from_coords(g, [((0, 0), (1, 0)), ((2, 0), (0, 1))])
    plan = hand_plan(g, {0: [(0, 0), (1, 0)], 1: [(2, 0), (1, 0), (0, 0), (0, 1)]})
    assert "vertex" in _kinds(inst, plan)


def test_swap_conflict():
    g = corridor(2)
    inst = MapfInstance.from_coords(g, [((0, 0), (1, 0)), ((1, 0), (0, 0))])
    plan = hand_plan(g, {0: [(0, 0), (1, 0)], 1: [(1, 0), (0, 0)]})
    assert _kinds(inst, plan) == ["swap"]


def test_following_conflict():
    g = corridor(3)
    inst = MapfInstance.from_coords(g, [((1, 0), (2, 0)), ((0, 0), (1, 0))])
    plan = hand_plan(g, {0: [(1, 0), (2, 0)], 1: [(0, 0), (1, 0)]})
    report = validate_plan(inst, plan)
    assert [c.kind for c in report] == ["following"]
    assert report[0].agents == (0, 1)


def test_cycle_conflict():
    g = GridMap.from_rows(["..", ".."])
    ring = [(0, 0), (1, 0), (1, 1), (0, 1)]
    pairs = [(ring[i], ring[(i + 1) % 4]) for i in range(4)]
    inst = MapfInstance.from_coords(g, pairs)
    plan = hand_plan(g, {k: [s, t] for k, (s, t) in enumerate(pairs)})
    report = validate_plan(inst, plan)
    assert [c.kind for c in report] == ["cycle"]
    assert len(report[0].agents) == 4


def test_structural_errors():
    g = corridor(4)
    inst = MapfInstance.from_coords(g, [((0, 0), (3, 0))])
    jump = hand_plan(g, {0: [(0, 0), (2, 0), (3, 0)]})
    assert _kinds(inst, jump) == ["structural"]
    short = hand_plan(g, {0: [(0, 0), (1, 0)]})
    assert _kinds(inst, short) == ["structural"]


def test_parked_agent_blocks_later_entry():
    g = corridor(3)
    inst = MapfInstance.from_coords(g, [((0, 0), (1, 0)), ((2, 0), (0, 0))])
    plan = hand_plan(g, {0: [(0, 0), (1, 0)], 1: [(2, 0), (2, 0), (1, 0), (0, 0)]})
    assert validate_plan(inst, plan)


def _random_plan(inst: MapfInstance, rng: random.Random, steps: int) -> Plan:
    g = inst.map
    paths = {}
    for a in inst.agents:
        p = [a.start]
        for _ in range(rng.randint(0, steps)):
            p.append(rng.choice((p[-1],) + g.neighbors(p[-1])))
        paths[a.id] = tuple(p)
    return Plan(paths)


@settings(max_examples=300, deadline=None)
@given(small_instances(max_side=4, max_agents=4), st.integers(0, 10**6))
def test_validate_matches_occupancy_scan(inst, seed):
    # goals are rewritten to the random walk's endpoint so only conflicts matter
    plan = _random_plan(inst, random.Random(seed), 6)
    ends = [p[-1] for p in plan.paths.values()]
    if len(set(ends)) < len(ends):
        return
    inst2 = MapfInstance(inst.map, tuple(Agent(a.id, a.start, plan.paths[a.id][-1]) for a in inst.agents))
    report = validate_plan(inst2, plan)
    naive = naive_robust_violations(plan)
    assert (not report) == (not naive)
    if not any(c.kind == "vertex" for c in report):
        # without shared vertices every violation is a move into a just-vacated cell
        assert {c.timestep for c in report} == {t for _, _, t in naive}
