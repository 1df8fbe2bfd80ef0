"""Sweep block duration d and schedule gap g on a two-agent crossing; print when replanning fires."""

from robust_mapf.core import GridMap, MapfInstance, Plan
from robust_mapf.sim import IntruderConfig, ReplanPolicy, SimConfig, run

GRID = GridMap.from_rows(["@.@", "...", "@.@"])


def crossing(k: int):
    v = GRID.vertex
    w = 2 + k
    plan = Plan({0: (v(0, 1), v(1, 1), v(2, 1)), 1: (v(1, 0),) * (w + 1) + (v(1, 1), v(1, 2))})
    return MapfInstance.from_coords(GRID, [((0, 1), (2, 1)), ((1, 0), (1, 2))]), plan


def main(threshold: int = 2000):
    print("g_ms,d_ms,fired,expected")
    for k in range(4):
        inst, plan = crossing(k)
        for d in range(500, 8001, 500):
            cfg = SimConfig(intruder=IntruderConfig(0, d, vertex=GRID.vertex(1, 1), agent=0),
                            replan=ReplanPolicy("predictive", threshold_ms=threshold))
            fired = bool(run(inst, plan, cfg).replans)
            print(f"{1000 * k},{d},{int(fired)},{int(d - 1000 * k > threshold)}")


if __name__ == "__main__":
    main()
