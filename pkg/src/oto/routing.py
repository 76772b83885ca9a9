"""Grid path planning and tour sequencing.

Paths are 4-connected over known-Free cells. Tours are Hamiltonian paths
from node 0 (the robot); with the open-tour matrix convention (every return
edge to node 0 is zero) this is the same thing as the closed ATSP.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .world import FREE, GridMap, RobotState

MAX_BRUTE_FORCE = 10
IMPROVE_EPS = 1e-12


class Unreachable(Exception):
    pass


@dataclass(frozen=True)
class PathResult:
    length: float
    waypoints: list[tuple[float, float]]


@dataclass(frozen=True)
class TourSolution:
    order: list[int]
    total_cost: float


def _free_cell(grid: GridMap, p: Sequence[float]) -> int:
    idx = grid.index_of(p[0], p[1])
    if grid.flat[idx] != FREE:
        raise ValueError(f"endpoint ({p[0]:.2f}, {p[1]:.2f}) is not in a known-Free cell")
    return idx


def astar(grid: GridMap, start: Sequence[float], goal: Sequence[float]) -> PathResult:
    """Shortest 4-connected path between the cells containing two positions."""
    s = _free_cell(grid, start)
    g = _free_cell(grid, goal)
    w, h, res = grid.width, grid.height, grid.resolution
    flat = grid.flat
    gy, gx = divmod(g, w)

    def heuristic(i: int) -> float:
        iy, ix = divmod(i, w)
        return math.hypot(ix - gx, iy - gy)

    cost = {s: 0}
    parent = {s: -1}
    heap = [(heuristic(s), s)]
    closed = set()
    while heap:
        _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == g:
            break
        closed.add(cur)
        cy, cx = divmod(cur, w)
        nc = cost[cur] + 1
        for nx, ny in ((cx + 1, cy), (cx - 1, cy), (cx, cy + 1), (cx, cy - 1)):
            if 0 <= nx < w and 0 <= ny < h:
                nb = ny * w + nx
                if flat[nb] == FREE and nc < cost.get(nb, 1 << 62):
                    cost[nb] = nc
                    parent[nb] = cur
                    heapq.heappush(heap, (nc + heuristic(nb), nb))
    else:
        raise Unreachable(f"no path from cell {s} to cell {g}")
    cells = []
    cur = g
    while cur != -1:
        cells.append(cur)
        cur = parent[cur]
    cells.reverse()
    pts = grid.centers(cells)
    return PathResult(cost[g] * res, [(float(x), float(y)) for x, y in pts])


class FreeGraph:
    """4-connected graph over the known-Free cells, for batched path lengths."""

    def __init__(self, grid: GridMap):
        self.grid = grid
        free = grid.cells == FREE
        w, n = grid.width, grid.size
        idx = np.arange(n).reshape(grid.height, w)
        right = free[:, :-1] & free[:, 1:]
        up = free[:-1, :] & free[1:, :]
        a = np.concatenate((idx[:, :-1][right], idx[:-1, :][up]))
        b = np.concatenate((idx[:, 1:][right], idx[1:, :][up]))
        self.graph = csr_matrix((np.ones(a.size), (a, b)), shape=(n, n))

    def lengths(self, sources: Sequence[int]) -> np.ndarray:
        """Path lengths in metres from each source cell to every cell (inf if cut off)."""
        src = np.asarray(sources, dtype=np.int64)
        if src.size == 0:
            return np.empty((0, self.grid.size))
        d = dijkstra(self.graph, directed=False, indices=src, unweighted=True)
        return np.atleast_2d(d) * self.grid.resolution


def path_lengths(grid: GridMap, sources: Sequence[int]) -> np.ndarray:
    return FreeGraph(grid).lengths(sources)


def build_atsp_matrix(state: RobotState, viewpoints: Sequence, grid: GridMap,
                      w_l: float, graph: FreeGraph | None = None) -> np.ndarray:
    """Node 0 is the robot. Departure edges carry each viewpoint's total cost,
    viewpoint-to-viewpoint edges the weighted path length, returns are free."""
    n = len(viewpoints) + 1
    m = np.zeros((n, n))
    if n == 1:
        return m
    graph = graph or FreeGraph(grid)
    cells = [grid.index_of(*v.position) for v in viewpoints]
    lengths = graph.lengths(cells)[:, cells]
    if not np.isfinite(lengths).all():
        raise Unreachable("viewpoints are not mutually reachable")
    m[0, 1:] = [v.c_total for v in viewpoints]
    m[1:, 1:] = w_l * lengths
    np.fill_diagonal(m, 0.0)
    m[1:, 0] = 0.0
    return m


def tour_cost(matrix: np.ndarray, order: Sequence[int]) -> float:
    return float(sum(matrix[a, b] for a, b in zip(order[:-1], order[1:])))


def _check_matrix(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("cost matrix must be square")
    if m.shape[0] < 2:
        raise ValueError("need at least two nodes")
    return m


def brute_force_atsp(matrix: np.ndarray) -> TourSolution:
    """Exact optimum by enumerating every visiting order (n <= 10)."""
    m = _check_matrix(matrix)
    n = m.shape[0]
    if n > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force refuses n={n} > {MAX_BRUTE_FORCE}")
    rows = m.tolist()
    best, best_order = math.inf, None
    for perm in itertools.permutations(range(1, n)):
        c = rows[0][perm[0]]
        for a, b in zip(perm, perm[1:]):
            c += rows[a][b]
        if c < best:
            best, best_order = c, perm
    return TourSolution([0, *best_order], float(best))


def _nearest_neighbour(rows: list[list[float]]) -> list[int]:
    n = len(rows)
    order = [0]
    left = set(range(1, n))
    while left:
        cur = rows[order[-1]]
        nxt = min(left, key=lambda j: (cur[j], j))
        order.append(nxt)
        left.remove(nxt)
    return order


def _or_opt(rows: list[list[float]], order: list[int]) -> bool:
    """One first-improvement Or-opt move (segment of 1-3 nodes, kept forward)."""
    n = len(order)
    for seg in (1, 2, 3):
        for i in range(1, n - seg + 1):
            j = i + seg - 1  # segment order[i..j]
            prev, first, last = order[i - 1], order[i], order[j]
            nxt = order[j + 1] if j + 1 < n else None
            removed = rows[prev][first] + (rows[last][nxt] if nxt is not None else 0.0)
            bridged = rows[prev][nxt] if nxt is not None else 0.0
            gain = removed - bridged
            rest = order[:i] + order[j + 1:]
            for k in range(len(rest)):
                # insert between rest[k] and rest[k+1] (or at the end)
                if k == i - 1:
                    continue
                a = rest[k]
                b = rest[k + 1] if k + 1 < len(rest) else None
                added = rows[a][first] + (rows[last][b] if b is not None else 0.0)
                added -= rows[a][b] if b is not None else 0.0
                if added < gain - IMPROVE_EPS:
                    order[:] = rest[:k + 1] + order[i:j + 1] + rest[k + 1:]
                    return True
    return False


def _two_opt(rows: list[list[float]], order: list[int]) -> bool:
    """One first-improvement segment reversal, costing both directions."""
    n = len(order)
    fwd = [0.0] * n
    bwd = [0.0] * n
    for k in range(1, n):
        fwd[k] = fwd[k - 1] + rows[order[k - 1]][order[k]]
        bwd[k] = bwd[k - 1] + rows[order[k]][order[k - 1]]
    for i in range(1, n - 1):
        a = order[i - 1]
        for j in range(i + 1, n):
            oi, oj = order[i], order[j]
            b = order[j + 1] if j + 1 < n else None
            old = rows[a][oi] + (fwd[j] - fwd[i]) + (rows[oj][b] if b is not None else 0.0)
            new = rows[a][oj] + (bwd[j] - bwd[i]) + (rows[oi][b] if b is not None else 0.0)
            if new < old - IMPROVE_EPS:
                order[i:j + 1] = order[i:j + 1][::-1]
                return True
    return False


def _descend(rows: list[list[float]], order: list[int]) -> None:
    while _or_opt(rows, order) or _two_opt(rows, order):
        pass


def _path_cost(rows: list[list[float]], order: list[int]) -> float:
    return sum(rows[a][b] for a, b in zip(order[:-1], order[1:]))


def _double_bridge(order: list[int], rng: np.random.Generator) -> list[int]:
    n = len(order)
    i, j, k = sorted(rng.choice(np.arange(1, n), size=3, replace=False).tolist())
    return order[:i] + order[j:k] + order[i:j] + order[k:]


def solve_atsp(matrix: np.ndarray, kicks: int | None = None, seed: int = 0) -> TourSolution:
    """Nearest-neighbour construction, then Or-opt and 2-opt to a local optimum.

    The descent is then repeated ``kicks`` times (default scales down with
    size), alternating double-bridge perturbations of the best order with
    fresh random orders; only strictly better orders are kept, so the result
    never costs more than the first local optimum.
    """
    m = _check_matrix(matrix)
    rows = m.tolist()
    n = len(rows)
    order = _nearest_neighbour(rows)
    _descend(rows, order)
    best = _path_cost(rows, order)
    if kicks is None:
        kicks = default_kicks(n)
    if n >= 4 and kicks > 0:
        rng = np.random.default_rng(seed)
        for kick in range(kicks):
            if kick % 2 == 0 and n >= 5:
                cand = _double_bridge(order, rng)
            else:
                cand = [0, *(rng.permutation(n - 1) + 1).tolist()]
            _descend(rows, cand)
            c = _path_cost(rows, cand)
            if c < best - IMPROVE_EPS:
                order, best = cand, c
    return TourSolution(order, tour_cost(m, order))


def default_kicks(n: int) -> int:
    return max(4, min(60, 1200 // max(n, 1)))
