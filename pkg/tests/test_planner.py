import math

import numpy as np
import pytest

import oracles
from oto import scenes
from oto.frontier import FrontierSet, full_scan_frontiers
from oto.planner import (CAP, COMPLETE, ExplorationComplete, ExplorationMetrics, PlannerConfig,
                         greedy_baseline_cycle, plan_cycle, run_exploration)
from oto.subregion import EnclosedRegion
from oto.viewpoint import CostWeights, subregion_cost
from oto.world import FREE, OCCUPIED, UNKNOWN, GridMap, RobotState


def _grid(cells, res=1.0):
    cells = np.asarray(cells, dtype=np.uint8)
    return GridMap(cells.shape[1], cells.shape[0], res, cells)


def _frontier_set(grid, cells):
    fs = FrontierSet.empty(grid)
    for c in cells:
        fs.member[c] = True
        fs.cells.add(c)
    return fs


def _corridor(length=20):
    cells = np.full((3, length), OCCUPIED)
    cells[1, 1:length - 1] = FREE
    return _grid(cells)


def test_trivial_room_is_fully_covered():
    res = run_exploration(scenes.load_corpus("trivial_room.txt"), PlannerConfig())
    assert res.metrics.termination == COMPLETE
    assert res.metrics.final_coverage == 1.0


def test_config_defaults_and_validation():
    c = PlannerConfig()
    assert (c.sensor_range, c.max_speed, c.cube) == (15.0, 2.0, (20.0, 20.0, 5.0))
    assert (c.w_r, c.w_l, c.w_d) == (0.3, 0.1, 0.2)
    assert (c.sample_radius, c.neighbours, c.vote_threshold, c.max_inclination_deg, c.d_thr) == (1, 50, 4, 15, 7)
    with pytest.raises(ValueError, match="unknown planner"):
        PlannerConfig(planner="nbvp")
    with pytest.raises(ValueError):
        PlannerConfig(max_speed=0)
    with pytest.raises(ValueError):
        PlannerConfig(w_d=-1)


def test_greedy_goes_to_only_frontier():
    g = _corridor()
    fs = _frontier_set(g, [g.index(15, 1)])
    plan = greedy_baseline_cycle(g, fs, RobotState((2.5, 1.5)))
    assert plan.goal == (15.5, 1.5)
    assert plan.waypoints[-1] == (15.5, 1.5)


def test_greedy_prefers_shorter_path():
    g = _corridor()
    fs = _frontier_set(g, [g.index(2, 1), g.index(14, 1)])  # path lengths 9 and 5 from x=9
    assert greedy_baseline_cycle(g, fs, RobotState((9.5, 1.5))).goal == (14.5, 1.5)


def test_greedy_tie_goes_to_lower_index():
    g = _corridor()
    fs = _frontier_set(g, [g.index(4, 1), g.index(14, 1)])
    assert greedy_baseline_cycle(g, fs, RobotState((9.5, 1.5))).goal == (4.5, 1.5)


def test_unreachable_frontiers_signal_completion():
    cells = np.full((5, 12), OCCUPIED)
    cells[1:4, 1:5] = FREE
    cells[1:4, 7:11] = FREE
    cells[2, 10] = UNKNOWN
    g = _grid(cells)
    fs = full_scan_frontiers(g)
    state = RobotState((2.5, 2.5))
    with pytest.raises(ExplorationComplete) as exc:
        greedy_baseline_cycle(g, fs, state)
    assert exc.value.remaining == len(fs)
    with pytest.raises(ExplorationComplete):
        plan_cycle(state, g, fs, [], PlannerConfig())


def test_plan_goes_to_its_first_viewpoint():
    cells = np.full((7, 30), OCCUPIED)
    cells[1:6, 1:29] = FREE
    cells[1:6, 25:29] = UNKNOWN
    g = _grid(cells)
    fs = full_scan_frontiers(g)
    plan = plan_cycle(RobotState((2.5, 3.5)), g, fs, [], PlannerConfig(viewpoints=20))
    assert plan.viewpoints
    assert plan.goal == plan.viewpoints[0].position
    # refined viewpoints sit at centroids; the path ends in the goal's cell
    assert g.cell_of(*plan.waypoints[-1]) == g.cell_of(*plan.goal)
    assert plan.viewpoints[0].gain >= 1


def _two_region_map():
    """A walled room holding the robot and an unseen pocket, with a door to a
    hall whose far side is still unknown."""
    h, w = 24, 60
    cells = np.full((h, w), FREE)
    cells[0, :] = cells[-1, :] = OCCUPIED
    cells[:, 0] = cells[:, -1] = OCCUPIED
    cells[:16, 15] = OCCUPIED  # room east wall
    cells[15, :16] = OCCUPIED  # room north wall
    cells[6:9, 15] = FREE  # door
    cells[10:13, 9:12] = OCCUPIED  # pillar
    cells[11:14, 12:14] = UNKNOWN  # pocket behind it
    cells[1:-1, 40:59] = UNKNOWN  # unexplored end of the hall
    return _grid(cells)


def test_enclosed_room_is_finished_first():
    g = _two_region_map()
    fs = full_scan_frontiers(g)
    state = RobotState((5.5, 5.5))
    box = EnclosedRegion(0.0, 16.0, 0.0, 16.0)
    config = PlannerConfig(planner="oto-noenclosed", seed=1)
    plan = plan_cycle(state, g, fs, [box], config)
    assert box.contains(*plan.goal)
    # by hand: viewpoints in the hall pay w_r times their distance to the box
    # centre, which outweighs anything they gain over the pocket
    w = CostWeights()
    for v in plan.viewpoints:
        want = 0.0 if box.contains(*v.position) else math.dist(v.position, box.center)
        assert subregion_cost(v, [box]) == pytest.approx(want)
        assert v.c_total == pytest.approx(w.w_r * v.c_r + w.w_l * v.c_l + w.w_d * v.c_d)
    outside = [v for v in plan.viewpoints if not box.contains(*v.position)]
    inside = [v for v in plan.viewpoints if box.contains(*v.position)]
    assert outside and inside
    assert min(v.c_total for v in outside) > max(v.c_total for v in inside)


@pytest.mark.parametrize("planner", ["oto", "greedy"])
def test_corpus_maze_is_explored(planner):
    sc = scenes.load_corpus("maze_64.txt")
    res = run_exploration(sc, PlannerConfig(planner=planner, seed=3))
    m = res.metrics
    assert m.termination == COMPLETE
    assert m.final_coverage >= 0.99
    # no reachable frontier is left: flood fill from the robot over known-free cells
    ix, iy = res.grid.cell_of(*res.trajectory[-1][1:])
    known = oracles.flood_fill(res.grid.cells == FREE, (ix, iy))
    assert not any(known.reshape(-1)[c] for c in oracles.frontier_cells(res.grid.cells))
    # every pose is truly free, coverage only grows, distance adds up
    for _, x, y in res.trajectory:
        assert not sc.occupied[sc.cell_of(x, y)[::-1]]
    cov = [c for _, c in m.coverage]
    assert all(b >= a for a, b in zip(cov, cov[1:]))
    pts = np.asarray([p[1:] for p in res.trajectory])
    assert m.distance == pytest.approx(np.hypot(*np.diff(pts, axis=0).T).sum())
    assert m.sim_time == pytest.approx(m.distance / 2.0)


def test_replay_is_identical():
    sc = scenes.maze_rooms(5)
    a = run_exploration(sc, PlannerConfig(seed=11))
    b = run_exploration(sc, PlannerConfig(seed=11))
    assert a.trajectory == b.trajectory
    assert a.metrics.to_dict(timing=False) == b.metrics.to_dict(timing=False)


def test_full_scan_mode_drives_the_same_run():
    sc = scenes.random_scene(2, 48, 40, obstacles=20)
    inc = run_exploration(sc, PlannerConfig(seed=2, shadow_full_scan=True))
    full = run_exploration(sc, PlannerConfig(seed=2, frontier_mode="full"))
    assert inc.trajectory == full.trajectory
    assert inc.metrics.frontier_shadow_workload == [sc.width * sc.height] * len(inc.metrics.frontier_workload)


def test_step_cap():
    res = run_exploration(scenes.load_corpus("maze_64.txt"), PlannerConfig(planner="greedy", max_steps=5))
    assert res.metrics.termination == CAP
    assert res.metrics.steps == 5


def test_metrics_round_trip():
    m = run_exploration(scenes.random_scene(1), PlannerConfig(seed=1)).metrics
    assert ExplorationMetrics.from_dict(m.to_dict()) == m
