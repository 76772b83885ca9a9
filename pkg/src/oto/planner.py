"""Receding-horizon exploration loop, the oto pipeline and the greedy baseline."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np

from .frontier import FrontierSet, cluster_frontiers, full_scan_frontiers, update_frontiers
from .routing import FreeGraph, astar, build_atsp_matrix, solve_atsp
from .subregion import DetectionParams, EnclosedRegion, detect_enclosed, registry_merge, registry_retire
from .viewpoint import (CostWeights, Horizon, Viewpoint, evaluate, generate_viewpoints,
                        refine_viewpoints, select_covering, cover_leftovers)
from .world import (FREE, GridMap, RobotState, Scene, raycast_scan, reachable_free, step_robot,
                    synthesize_point_cloud)

PLANNERS = ("oto", "greedy", "oto-noenclosed", "oto-norefine")
FRONTIER_MODES = ("incremental", "full")
SENSOR_HEIGHT = 0.8  # z of the local origin used to orient wall normals
STALL_CYCLES = 2  # cycles without new map cells before a frontier is targeted directly

COMPLETE = "complete"
UNREACHABLE = "unreachable"
CAP = "cap"


class ExplorationComplete(Exception):
    """No reachable frontier is left; ``remaining`` counts unreachable ones."""

    def __init__(self, remaining: int = 0):
        super().__init__(f"{remaining} unreachable frontier cells remain")
        self.remaining = remaining


@dataclass(frozen=True)
class PlannerConfig:
    planner: str = "oto"
    seed: int = 0
    sensor_range: float = 15.0
    n_rays: int = 720
    max_speed: float = 2.0
    dt: float = 0.5
    replan_period: float = 2.0
    cube: tuple[float, float, float] = (20.0, 20.0, 5.0)
    w_r: float = 0.3
    w_l: float = 0.1
    w_d: float = 0.2
    sample_radius: float = 1.0
    neighbours: int = 50
    vote_threshold: int = 4
    max_inclination_deg: float = 15.0
    cloud_density: int = 8  # wall points per cell face per z level
    d_thr: float = 7.0
    viewpoints: int = 100
    clearance: int = 1
    cluster_radius: float = 3.0
    atsp_kicks: Optional[int] = 8
    max_steps: int = 20000
    frontier_mode: str = "incremental"
    shadow_full_scan: bool = False

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ValueError(f"unknown planner {self.planner!r}; expected one of {', '.join(PLANNERS)}")
        if self.frontier_mode not in FRONTIER_MODES:
            raise ValueError(f"unknown frontier mode {self.frontier_mode!r}")
        for name in ("sensor_range", "max_speed", "dt", "replan_period", "d_thr", "sample_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_rays < 1 or self.viewpoints < 1 or self.max_steps < 1:
            raise ValueError("n_rays, viewpoints and max_steps must be at least 1")
        object.__setattr__(self, "cube", tuple(float(c) for c in self.cube))
        CostWeights(self.w_r, self.w_l, self.w_d)  # validates

    @property
    def weights(self) -> CostWeights:
        return CostWeights(self.w_r, self.w_l, self.w_d)

    @property
    def detection(self) -> DetectionParams:
        return DetectionParams(sample_radius=self.sample_radius, neighbours=self.neighbours,
                               vote_threshold=self.vote_threshold,
                               max_inclination_deg=self.max_inclination_deg)

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class ExplorationMetrics:
    planner: str
    seed: int
    distance: float = 0.0
    sim_time: float = 0.0
    steps: int = 0
    cycles: int = 0
    termination: str = ""
    unreachable_frontiers: int = 0
    coverage: list = field(default_factory=list)  # [sim time, fraction of reachable free cells known]
    frontier_workload: list = field(default_factory=list)  # cells examined per step
    frontier_shadow_workload: list = field(default_factory=list)
    stage_wall: dict = field(default_factory=dict)  # stage -> seconds per call

    @property
    def final_coverage(self) -> float:
        return self.coverage[-1][1] if self.coverage else 0.0

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        d["coverage"] = [list(c) for c in self.coverage]
        d["final_coverage"] = self.final_coverage
        if not timing:
            d.pop("stage_wall")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExplorationMetrics":
        names = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in names}
        kw["coverage"] = [list(c) for c in kw.get("coverage", [])]
        return cls(**kw)

    def record_wall(self, stage: str, seconds: float) -> None:
        self.stage_wall.setdefault(stage, []).append(seconds)


@dataclass
class CyclePlan:
    waypoints: list[tuple[float, float]]
    goal: tuple[float, float]
    registry: Optional[list[EnclosedRegion]] = None  # None: leave the registry as it was
    viewpoints: list[Viewpoint] = field(default_factory=list)  # evaluated, tour order
    fallback: bool = False


@dataclass
class ExplorationResult:
    metrics: ExplorationMetrics
    trajectory: list[tuple[float, float, float]]  # (t, x, y)
    grid: GridMap
    frontiers: FrontierSet
    registry: list[EnclosedRegion]


def cycle_seed(seed: int, cycle: int) -> int:
    return int(np.random.SeedSequence([seed, cycle]).generate_state(1)[0])


class _Timer:
    def __init__(self, metrics: Optional[ExplorationMetrics]):
        self.metrics = metrics

    def __call__(self, stage: str):
        return _Stage(self.metrics, stage)


class _Stage:
    def __init__(self, metrics, stage):
        self.metrics, self.stage = metrics, stage

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        if self.metrics is not None:
            self.metrics.record_wall(self.stage, time.perf_counter() - self.t0)


def _reachable(frontiers: FrontierSet, lengths: np.ndarray) -> np.ndarray:
    idx = frontiers.indices()
    return idx[np.isfinite(lengths[idx])]


def _nearest_frontier(frontiers: FrontierSet, lengths: np.ndarray) -> int:
    idx = _reachable(frontiers, lengths)
    if idx.size == 0:
        raise ExplorationComplete(len(frontiers))
    return int(idx[np.argmin(lengths[idx])])  # first minimum is the lowest index


def _path_to_cell(grid: GridMap, state: RobotState, cell: int) -> list[tuple[float, float]]:
    return astar(grid, state.position, grid.center(cell)).waypoints


def greedy_baseline_cycle(grid: GridMap, frontiers: FrontierSet, state: RobotState,
                          graph: Optional[FreeGraph] = None) -> CyclePlan:
    """A* path to the reachable frontier cell with the shortest path length."""
    graph = graph or FreeGraph(grid)
    lengths = graph.lengths([grid.index_of(*state.position)])[0]
    cell = _nearest_frontier(frontiers, lengths)
    return CyclePlan(_path_to_cell(grid, state, cell), grid.center(cell), fallback=True)


def plan_cycle(state: RobotState, grid: GridMap, frontiers: FrontierSet,
               registry: list[EnclosedRegion], config: PlannerConfig, cycle: int = 0,
               metrics: Optional[ExplorationMetrics] = None) -> CyclePlan:
    """One pass of the oto pipeline; returns the path to the first tour viewpoint."""
    if config.planner == "greedy":
        return greedy_baseline_cycle(grid, frontiers, state)
    timer = _Timer(metrics)
    seed = cycle_seed(config.seed, cycle)
    pos = state.position
    graph = FreeGraph(grid)
    robot_cell = grid.index_of(*pos)
    lengths = graph.lengths([robot_cell])[0]
    reach = _reachable(frontiers, lengths)
    if reach.size == 0:
        raise ExplorationComplete(len(frontiers))
    # gains only count frontier cells the robot can actually get to
    target = FrontierSet.empty(grid)
    target.member[reach] = True
    target.cells.update(reach.tolist())

    registry = list(registry)
    if config.planner != "oto-noenclosed":
        with timer("detect"):
            cloud = synthesize_point_cloud(grid, pos, config.cube, seed, config.cloud_density)
            region = detect_enclosed(cloud, (pos[0], pos[1], SENSOR_HEIGHT), config.detection, seed)
            if region is not None:
                registry = registry_merge(registry, region)
            registry = registry_retire(registry, frontiers, grid)

    with timer("viewpoints"):
        horizon = Horizon.around(pos, config.cube[0], config.cube[1])
        clusters = cluster_frontiers(target, grid, config.cluster_radius)
        vps = generate_viewpoints(grid, target, horizon, config.viewpoints, config.clearance,
                                  seed, config.sensor_range, clusters)
    if config.planner != "oto-norefine":
        with timer("refine"):
            vps = refine_viewpoints(vps, config.d_thr, grid)

    with timer("evaluate"):
        weights = config.weights
        scored = []
        for v in vps:
            cell = grid.index_of(*v.position)
            if cell == robot_cell or not np.isfinite(lengths[cell]):
                continue
            scored.append(evaluate(v, state, registry, lengths[cell], weights))
        scored = select_covering(scored, grid, target, config.sensor_range)
        for v in cover_leftovers(scored, grid, target, clusters, horizon, config.sensor_range):
            cell = grid.index_of(*v.position)
            if cell != robot_cell:
                scored.append(evaluate(v, state, registry, lengths[cell], weights))
    if not scored:
        cell = _nearest_frontier(target, lengths)
        return CyclePlan(_path_to_cell(grid, state, cell), grid.center(cell), registry, fallback=True)

    with timer("atsp"):
        matrix = build_atsp_matrix(state, scored, grid, weights.w_l, graph)
        tour = solve_atsp(matrix, config.atsp_kicks, seed)
    ordered = [scored[k - 1] for k in tour.order[1:]]
    with timer("path"):
        path = astar(grid, pos, ordered[0].position).waypoints
    return CyclePlan(path, ordered[0].position, registry, ordered)


def _coverage(grid: GridMap, reach: np.ndarray, n_reach: int) -> float:
    return float(np.count_nonzero(grid.cells[reach] != 0)) / n_reach


def run_exploration(scene: Scene, config: PlannerConfig,
                    on_cycle: Optional[Callable[[int, RobotState, GridMap, FrontierSet], None]] = None
                    ) -> ExplorationResult:
    """Scan, plan and move until no reachable frontier is left or the step cap is hit."""
    metrics = ExplorationMetrics(config.planner, config.seed)
    timer = _Timer(metrics)
    grid = GridMap.unknown_like(scene)
    state = RobotState(scene.start_position, (0.0, 0.0), config.max_speed)
    frontiers = FrontierSet.empty(grid)
    reach = reachable_free(scene)
    n_reach = int(reach.sum())
    registry: list[EnclosedRegion] = []
    trajectory = [(0.0, *state.position)]

    def sense():
        nonlocal frontiers
        with timer("scan"):
            scan = raycast_scan(scene, grid, state, config.sensor_range, config.n_rays)
        if config.frontier_mode == "incremental":
            with timer("frontier"):
                update_frontiers(frontiers, grid, scan.newly_updated)
            if config.shadow_full_scan:
                with timer("frontier_full"):
                    shadow = full_scan_frontiers(grid)
                metrics.frontier_shadow_workload.append(shadow.last_workload)
        else:
            total = frontiers.total_workload
            with timer("frontier"):
                frontiers = full_scan_frontiers(grid)
            frontiers.total_workload += total
        metrics.frontier_workload.append(frontiers.last_workload)
        metrics.coverage.append([metrics.sim_time, _coverage(grid, reach, n_reach)])
        return scan.newly_updated.size

    sense()
    stalled = 0
    while True:
        if not frontiers:
            metrics.termination = COMPLETE
            break
        if metrics.steps >= config.max_steps:
            metrics.termination = CAP
            break
        if on_cycle is not None:
            on_cycle(metrics.cycles, state, grid, frontiers)
        try:
            with timer("plan"):
                if stalled >= STALL_CYCLES and config.planner != "greedy":
                    plan = greedy_baseline_cycle(grid, frontiers, state)
                else:
                    plan = plan_cycle(state, grid, frontiers, registry, config, metrics.cycles, metrics)
        except ExplorationComplete as done:
            metrics.termination = COMPLETE if done.remaining == 0 else UNREACHABLE
            metrics.unreachable_frontiers = done.remaining
            break
        if plan.registry is not None:
            registry = plan.registry
        metrics.cycles += 1
        waypoints = list(plan.waypoints)
        leg_time = 0.0
        gained = 0
        while waypoints and metrics.steps < config.max_steps and leg_time < config.replan_period - 1e-9:
            remaining = config.dt
            start = state.position
            while waypoints and remaining > 1e-12:
                nxt = step_robot(state, waypoints[0], remaining)
                moved = math.dist(state.position, nxt.position)
                remaining -= moved / config.max_speed
                if nxt.position == tuple(waypoints[0]):
                    waypoints.pop(0)
                state = nxt
            shift = math.dist(start, state.position)
            if shift > 0:
                dx, dy = state.position[0] - start[0], state.position[1] - start[1]
                speed = shift / config.dt
                state = replace(state, velocity=(dx / shift * speed, dy / shift * speed))
            else:
                state = replace(state, velocity=(0.0, 0.0))
            metrics.distance += shift
            metrics.sim_time = metrics.distance / config.max_speed
            metrics.steps += 1
            leg_time += config.dt
            gained += sense()
            trajectory.append((metrics.sim_time, *state.position))
        stalled = 0 if gained else stalled + 1
    return ExplorationResult(metrics, trajectory, grid, frontiers, registry)
