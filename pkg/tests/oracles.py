"""Independent reference implementations used as test oracles.

Each one is written the slow, obvious way and shares no code with the
package: exact grid-line crossings instead of incremental DDA, uniform-cost
search instead of A*, per-cell loops instead of array masks.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np

UNKNOWN, FREE, OCCUPIED = 0, 1, 2
VERTEX_EPS = 1e-9


def segment_pieces(ox, oy, dx, dy, t_end):
    """Cells whose interior the ray ``o + t*d`` passes through for t in [0, t_end],
    in order, with the parameter at which each is entered.

    All grid-line crossings are computed directly and sorted; crossings that
    coincide (a vertex) are merged, so cells only touched at a corner never
    appear.
    """
    ts = [0.0, t_end]
    for o, d in ((ox, dx), (oy, dy)):
        if d == 0:
            continue
        k = math.floor(o) + (1 if d > 0 else 0)
        step = 1 if d > 0 else -1
        while True:
            t = (k - o) / d
            if t > t_end:
                break
            if t > 0:
                ts.append(t)
            k += step
    ts.sort()
    merged = [ts[0]]
    for t in ts[1:]:
        if t - merged[-1] > VERTEX_EPS * max(1.0, merged[-1]):
            merged.append(t)
    out = []
    for a, b in zip(merged[:-1], merged[1:]):
        m = 0.5 * (a + b)
        out.append(((math.floor(ox + m * dx), math.floor(oy + m * dy)), a))
    return out


def scan_oracle(occupied, res, position, max_range, n_rays):
    """Expected (free, occupied) cell sets from one scan on an all-unknown map."""
    h, w = occupied.shape
    ox, oy = position[0] / res, position[1] / res
    reach = max_range / res
    free, occ = set(), set()
    for k in range(n_rays):
        th = 2.0 * math.pi * k / n_rays
        dx, dy = math.cos(th), math.sin(th)
        # walk far enough to leave any grid
        for (ix, iy), t_enter in segment_pieces(ox, oy, dx, dy, reach + 2 * (w + h)):
            if t_enter > reach or not (0 <= ix < w and 0 <= iy < h):
                break
            if occupied[iy, ix]:
                occ.add((ix, iy))
                break
            free.add((ix, iy))
    return free, occ


def line_clear(cells, a, b):
    """Every cell strictly between the cells of points ``a`` and ``b`` (cell
    units) is FREE."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    pieces = segment_pieces(a[0], a[1], dx, dy, 1.0)
    start = (math.floor(a[0]), math.floor(a[1]))
    goal = (math.floor(b[0]), math.floor(b[1]))
    h, w = cells.shape
    for (ix, iy), _ in pieces:
        if (ix, iy) in (start, goal):
            continue
        if not (0 <= ix < w and 0 <= iy < h) or cells[iy, ix] != FREE:
            return False
    return True


def frontier_cells(cells):
    """Free cells with an Unknown 4-neighbour, by a per-cell loop."""
    h, w = cells.shape
    out = set()
    for iy in range(h):
        for ix in range(w):
            if cells[iy, ix] != FREE:
                continue
            for nx, ny in ((ix + 1, iy), (ix - 1, iy), (ix, iy + 1), (ix, iy - 1)):
                if 0 <= nx < w and 0 <= ny < h and cells[ny, nx] == UNKNOWN:
                    out.add(iy * w + ix)
                    break
    return out


def visible_frontiers(cells, res, frontier, p, max_range):
    """Frontier cells within range of ``p`` whose centre has line of sight to it."""
    w = cells.shape[1]
    out = set()
    for idx in frontier:
        iy, ix = divmod(idx, w)
        cx, cy = (ix + 0.5) * res, (iy + 0.5) * res
        if math.hypot(cx - p[0], cy - p[1]) > max_range:
            continue
        if line_clear(cells, (p[0] / res, p[1] / res), (cx / res, cy / res)):
            out.add(idx)
    return out


def ucs_length(free, start, goal):
    """Uniform-cost search over 4-connected True cells; steps of 1 cell.
    ``start``/``goal`` are (ix, iy). Returns None when unreachable."""
    h, w = free.shape
    dist = {start: 0}
    heap = [(0, start)]
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if (x, y) == goal:
            return d
        if d > dist[(x, y)]:
            continue
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < w and 0 <= ny < h and free[ny, nx]:
                nd = d + 1
                if nd < dist.get((nx, ny), math.inf):
                    dist[(nx, ny)] = nd
                    heapq.heappush(heap, (nd, (nx, ny)))
    return None


def flood_fill(free, start):
    """Cells 4-connected to ``start`` through True cells, by breadth-first search."""
    h, w = free.shape
    seen = np.zeros_like(free, dtype=bool)
    sx, sy = start
    seen[sy, sx] = True
    q = deque([start])
    while q:
        x, y = q.popleft()
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < w and 0 <= ny < h and free[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                q.append((nx, ny))
    return seen


def random_maze_grid(rng, w, h, density):
    """Random occupancy with a sealed border; returns a bool 'free' array."""
    free = rng.random((h, w)) >= density
    free[0, :] = free[-1, :] = False
    free[:, 0] = free[:, -1] = False
    return free
