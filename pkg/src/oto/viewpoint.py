"""Viewpoint sampling, information gain, the three costs, utility and refinement."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .frontier import FrontierCluster, FrontierSet
from .gridline import segments_clear
from .subregion import EnclosedRegion
from .world import FREE, UNKNOWN, GridMap, RobotState

LOCAL = "local"
GLOBAL_PSEUDO = "global-pseudo"


@dataclass(frozen=True)
class CostWeights:
    w_r: float = 0.3
    w_l: float = 0.1
    w_d: float = 0.2

    def __post_init__(self):
        if min(self.w_r, self.w_l, self.w_d) < 0:
            raise ValueError("cost weights must be non-negative")


@dataclass(frozen=True)
class Viewpoint:
    position: tuple[float, float]
    gain: float
    kind: str = LOCAL
    c_r: float = 0.0
    c_l: float = 0.0
    c_d: float = 0.0
    c_total: float = 0.0
    utility: float = 0.0

    def breakdown(self) -> dict:
        return {"x": self.position[0], "y": self.position[1], "kind": self.kind,
                "gain": self.gain, "c_r": self.c_r, "c_l": self.c_l, "c_d": self.c_d,
                "c_total": self.c_total, "utility": self.utility}


@dataclass(frozen=True)
class Horizon:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @classmethod
    def around(cls, center: Sequence[float], size_x: float, size_y: float) -> "Horizon":
        return cls(center[0] - size_x / 2, center[0] + size_x / 2,
                   center[1] - size_y / 2, center[1] + size_y / 2)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


def line_of_sight(grid: GridMap, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Batched visibility through known-Free cells between metre positions."""
    res = grid.resolution
    return segments_clear(grid.cells == FREE, np.asarray(starts) / res, np.asarray(ends) / res)


def visible_pairs(grid: GridMap, frontiers: FrontierSet, positions: np.ndarray,
                  max_range: float = 15.0) -> tuple[np.ndarray, np.ndarray]:
    """(position index, frontier cell index) for every frontier cell each position sees."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    fidx = frontiers.indices()
    none = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    if fidx.size == 0 or len(positions) == 0:
        return none
    targets = grid.centers(fidx)
    d = np.hypot(positions[:, None, 0] - targets[None, :, 0],
                 positions[:, None, 1] - targets[None, :, 1])
    vi, fi = np.nonzero(d <= max_range)
    if vi.size == 0:
        return none
    clear = line_of_sight(grid, positions[vi], targets[fi])
    return vi[clear], fidx[fi[clear]]


def information_gains(grid: GridMap, frontiers: FrontierSet, positions: np.ndarray,
                      max_range: float = 15.0) -> np.ndarray:
    """Visible frontier-cell count for each position, in one batched sweep."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    vi, _ = visible_pairs(grid, frontiers, positions, max_range)
    return np.bincount(vi, minlength=len(positions)).astype(np.int64)


def information_gain(grid: GridMap, frontiers: FrontierSet, p: Sequence[float],
                     max_range: float = 15.0) -> int:
    return int(information_gains(grid, frontiers, np.asarray([p], dtype=float), max_range)[0])


def _clear_cells(grid: GridMap, clearance: int) -> np.ndarray:
    """Free cells whose (2c+1)^2 neighbourhood is entirely known-Free."""
    free = grid.cells == FREE
    if clearance <= 0:
        return free
    padded = np.pad(free, clearance, constant_values=False)
    ok = np.ones_like(free)
    h, w = free.shape
    for dy in range(2 * clearance + 1):
        for dx in range(2 * clearance + 1):
            ok &= padded[dy:dy + h, dx:dx + w]
    return ok


def nearest_free_cell(grid: GridMap, p: Sequence[float]) -> Optional[int]:
    free = np.flatnonzero(grid.flat == FREE)
    if free.size == 0:
        return None
    c = grid.centers(free)
    d2 = (c[:, 0] - p[0]) ** 2 + (c[:, 1] - p[1]) ** 2
    return int(free[np.argmin(d2)])  # argmin keeps the lowest index on ties


def generate_viewpoints(grid: GridMap, frontiers: FrontierSet, horizon: Horizon,
                        count: int = 100, clearance: int = 1, seed: int = 0,
                        max_range: float = 15.0,
                        clusters: Optional[Sequence[FrontierCluster]] = None) -> list[Viewpoint]:
    """Random local viewpoints in the horizon plus one pseudo viewpoint per
    frontier cluster whose centroid lies outside it."""
    if count <= 0:
        raise ValueError("viewpoint count must be positive")
    if not frontiers:
        return []
    res = grid.resolution
    ok = _clear_cells(grid, clearance)
    iy, ix = np.nonzero(ok)
    cx, cy = (ix + 0.5) * res, (iy + 0.5) * res
    inside = (cx >= horizon.x_min) & (cx <= horizon.x_max) & (cy >= horizon.y_min) & (cy <= horizon.y_max)
    cand = (iy * grid.width + ix)[inside]
    if cand.size == 0:
        return []
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(cand, size=min(count, cand.size), replace=False))
    pos = grid.centers(pick)
    gains = information_gains(grid, frontiers, pos, max_range)
    vps = [Viewpoint((float(x), float(y)), float(g)) for (x, y), g in zip(pos, gains) if g > 0]
    for cl in clusters or ():
        if horizon.contains(*cl.centroid):
            continue
        idx = nearest_free_cell(grid, cl.centroid)
        if idx is None:
            continue
        vps.append(Viewpoint(grid.center(idx), float(cl.size), GLOBAL_PSEUDO))
    return vps


def subregion_cost(v: Viewpoint, registry: Sequence[EnclosedRegion]) -> float:
    alive = [r for r in registry if r.alive]
    if not alive:
        return 0.0
    x, y = v.position
    if any(r.contains(x, y) for r in alive):
        return 0.0
    return min(math.hypot(x - r.center[0], y - r.center[1]) for r in alive)


def direction_cost(state: RobotState, v: Viewpoint) -> float:
    """Heading change, in [0, pi], needed to head for ``v`` from the current velocity."""
    vx, vy = state.velocity
    dx, dy = v.position[0] - state.position[0], v.position[1] - state.position[1]
    sv, sd = math.hypot(vx, vy), math.hypot(dx, dy)
    if sv < 1e-6 or sd < 1e-6:
        return 0.0
    c = (dx * vx + dy * vy) / (sd * sv)
    return math.acos(max(-1.0, min(1.0, c)))


def total_cost_and_utility(v: Viewpoint, weights: CostWeights) -> Viewpoint:
    c_total = weights.w_r * v.c_r + weights.w_l * v.c_l + weights.w_d * v.c_d
    return replace(v, c_total=c_total, utility=v.gain * math.exp(-c_total))


def evaluate(v: Viewpoint, state: RobotState, registry: Sequence[EnclosedRegion],
             path_length: float, weights: CostWeights) -> Viewpoint:
    v = replace(v, c_r=subregion_cost(v, registry), c_l=float(path_length),
                c_d=direction_cost(state, v))
    return total_cost_and_utility(v, weights)


def refine_viewpoints(vps: Sequence[Viewpoint], d_thr: float, grid: GridMap) -> list[Viewpoint]:
    """Merge mutually visible local viewpoints closer than ``d_thr`` into their centroid.

    Walks the list in order. Each unmerged local viewpoint gathers the
    unmerged local viewpoints within ``d_thr`` that it and every member
    already gathered can see; a non-empty gathering is replaced, together
    with the seed, by one viewpoint at the centroid carrying the mean gain.
    Clusters whose centroid is not in a Free cell stay as they were. Costs
    are left for the caller to recompute.
    """
    if d_thr <= 0:
        raise ValueError("D_thr must be positive")
    vps = list(vps)
    n = len(vps)
    pos = np.array([v.position for v in vps], dtype=float).reshape(-1, 2)
    local = np.array([v.kind == LOCAL for v in vps], dtype=bool)
    merged = np.zeros(n, dtype=bool)
    out: list[Viewpoint] = []
    placed: dict[int, Viewpoint] = {}
    for i in range(n):
        if merged[i]:
            continue
        if not local[i]:
            placed[i] = vps[i]
            continue
        d = np.hypot(pos[:, 0] - pos[i, 0], pos[:, 1] - pos[i, 1])
        near = [j for j in np.flatnonzero((d < d_thr) & local & ~merged) if j != i]
        cluster: list[int] = []
        if near:
            near = np.asarray(near)
            sees_seed = line_of_sight(grid, np.repeat(pos[i:i + 1], near.size, 0), pos[near])
            for j in near[sees_seed]:
                if cluster and not line_of_sight(grid, np.repeat(pos[j:j + 1], len(cluster), 0),
                                                 pos[cluster]).all():
                    continue
                cluster.append(int(j))
        if not cluster:
            placed[i] = vps[i]
            continue
        members = [i, *cluster]
        c = pos[members].mean(axis=0)
        if not grid.is_free(c[0], c[1]):
            placed[i] = vps[i]
            continue
        merged[members] = True
        for k in cluster:
            placed.pop(k, None)  # an earlier seed left unmerged can still be absorbed
        gain = float(np.mean([vps[k].gain for k in members]))
        placed[i] = Viewpoint((float(c[0]), float(c[1])), gain, LOCAL)
    for i in sorted(placed):
        out.append(placed[i])
    return out


def frontier_unknowns(grid: GridMap, frontiers: FrontierSet) -> np.ndarray:
    """Sorted Unknown cells 4-adjacent to a frontier cell: what a visit should reveal."""
    member = frontiers.member.reshape(grid.height, grid.width)
    m = np.pad(member, 1, constant_values=False)
    touch = m[1:-1, :-2] | m[1:-1, 2:] | m[:-2, 1:-1] | m[2:, 1:-1]
    return np.flatnonzero((touch & (grid.cells == UNKNOWN)).reshape(-1))


def _reveals(grid: GridMap, positions: np.ndarray, unknowns: np.ndarray,
             max_range: float) -> list[np.ndarray]:
    """For each position, the ``unknowns`` a scan from there would reach."""
    out = [np.empty(0, dtype=np.int64)] * len(positions)
    if unknowns.size == 0 or len(positions) == 0:
        return out
    targets = grid.centers(unknowns)
    d = np.hypot(positions[:, None, 0] - targets[None, :, 0],
                 positions[:, None, 1] - targets[None, :, 1])
    vi, ui = np.nonzero(d <= max_range)
    clear = line_of_sight(grid, positions[vi], targets[ui])
    vi, cells = vi[clear], unknowns[ui[clear]]
    return [cells[vi == k] for k in range(len(positions))]


def select_covering(vps: Sequence[Viewpoint], grid: GridMap, frontiers: FrontierSet,
                    max_range: float = 15.0) -> list[Viewpoint]:
    """Greedy weighted set cover of the Unknown cells bordering the frontier.

    A viewpoint reveals such a cell when the straight line to it crosses
    known-Free space only, which is exactly when a scan from there reaches
    it. Local viewpoints are picked one at a time by the number of still
    unrevealed cells they reveal, discounted by ``exp(-c_total)`` like the
    utility, until nothing new is revealed. Pseudo viewpoints stand for
    frontier clusters out of view and are always kept. The survivors come
    back in their original order.
    """
    vps = list(vps)
    if not vps:
        return []
    pos = np.array([v.position for v in vps], dtype=float)
    reveals = _reveals(grid, pos, frontier_unknowns(grid, frontiers), max_range)
    keep = np.array([v.kind != LOCAL for v in vps], dtype=bool)
    discount = np.array([math.exp(-v.c_total) for v in vps])
    covered = np.zeros(grid.size, dtype=bool)
    left = [k for k in range(len(vps)) if not keep[k] and reveals[k].size]
    while left:
        fresh = np.array([np.count_nonzero(~covered[reveals[k]]) for k in left])
        score = fresh * discount[left]
        j = int(np.argmax(score))  # first maximum: lowest index wins ties
        if fresh[j] == 0:
            break
        k = left.pop(j)
        keep[k] = True
        covered[reveals[k]] = True
    return [v for v, kept in zip(vps, keep) if kept]


def cover_leftovers(vps: Sequence[Viewpoint], grid: GridMap, frontiers: FrontierSet,
                    clusters: Sequence[FrontierCluster], horizon: Horizon,
                    max_range: float = 15.0) -> list[Viewpoint]:
    """Local viewpoints for in-horizon clusters that none of ``vps`` would reveal.

    Random sampling can miss a pocket of frontier; it then gets a viewpoint
    on its own frontier cell nearest the cluster centroid, where a scan is
    certain to reach its Unknown neighbours.
    """
    unk = frontier_unknowns(grid, frontiers)
    local = [v for v in vps if v.kind == LOCAL]
    revealed = np.zeros(grid.size, dtype=bool)
    if local:
        pos = np.array([v.position for v in local], dtype=float)
        for r in _reveals(grid, pos, unk, max_range):
            revealed[r] = True
    h, w = grid.height, grid.width
    todo = []
    for cl in clusters:
        if not horizon.contains(*cl.centroid):
            continue
        iy, ix = np.divmod(cl.cells, w)
        near = np.zeros(grid.size, dtype=bool)
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = ix + dx, iy + dy
            ok = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
            near[(ny * w + nx)[ok]] = True
        if (near & revealed).any():
            continue
        c = grid.centers(cl.cells)
        k = int(np.argmin((c[:, 0] - cl.centroid[0]) ** 2 + (c[:, 1] - cl.centroid[1]) ** 2))
        todo.append((float(c[k, 0]), float(c[k, 1])))
    if not todo:
        return []
    gains = information_gains(grid, frontiers, np.array(todo), max_range)
    return [Viewpoint(p, float(g)) for p, g in zip(todo, gains)]
