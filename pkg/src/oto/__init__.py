"""Frontier exploration planner with enclosed sub-region priorities, plus a
grid-world LiDAR simulator to run it in."""

from .frontier import FrontierSet, full_scan_frontiers, update_frontiers
from .planner import (PLANNERS, ExplorationMetrics, ExplorationResult, PlannerConfig,
                      greedy_baseline_cycle, plan_cycle, run_exploration)
from .routing import astar, brute_force_atsp, build_atsp_matrix, solve_atsp
from .subregion import EnclosedRegion, detect_enclosed
from .viewpoint import CostWeights, Viewpoint
from .world import FREE, OCCUPIED, UNKNOWN, GridMap, PointCloud, RobotState, Scene, load_scene

__all__ = [
    "FREE", "OCCUPIED", "UNKNOWN", "PLANNERS",
    "CostWeights", "EnclosedRegion", "ExplorationMetrics", "ExplorationResult", "FrontierSet",
    "GridMap", "PlannerConfig", "PointCloud", "RobotState", "Scene", "Viewpoint",
    "astar", "brute_force_atsp", "build_atsp_matrix", "detect_enclosed", "full_scan_frontiers",
    "greedy_baseline_cycle", "load_scene", "plan_cycle", "run_exploration", "solve_atsp",
    "update_frontiers",
]
