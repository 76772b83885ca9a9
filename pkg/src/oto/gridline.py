"""Vectorised grid line traversal (Amanatides-Woo) over many rays at once.

All coordinates here are in *cell units* (metres divided by resolution).
A cell counts as traversed when the ray passes through its interior; a ray
crossing exactly through a cell vertex steps diagonally, so the two side
cells it only touches are not visited.
"""

from __future__ import annotations

import numpy as np

VERTEX_EPS = 1e-9


class Traversal:
    """Lock-step DDA state for a batch of rays."""

    def __init__(self, ox: np.ndarray, oy: np.ndarray, dx: np.ndarray, dy: np.ndarray):
        ox = np.asarray(ox, dtype=float)
        oy = np.asarray(oy, dtype=float)
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        self.ix = np.floor(ox).astype(np.int64)
        self.iy = np.floor(oy).astype(np.int64)
        self.step_x = np.sign(dx).astype(np.int64)
        self.step_y = np.sign(dy).astype(np.int64)
        with np.errstate(divide="ignore"):
            inv_x = np.where(dx != 0, 1.0 / np.abs(dx), np.inf)
            inv_y = np.where(dy != 0, 1.0 / np.abs(dy), np.inf)
        self.t_delta_x = inv_x
        self.t_delta_y = inv_y
        with np.errstate(invalid="ignore"):
            self.t_max_x = np.where(
                dx > 0, (self.ix + 1 - ox) * inv_x, np.where(dx < 0, (ox - self.ix) * inv_x, np.inf)
            )
            self.t_max_y = np.where(
                dy > 0, (self.iy + 1 - oy) * inv_y, np.where(dy < 0, (oy - self.iy) * inv_y, np.inf)
            )
        # parameter at which the ray entered its current cell
        self.t_enter = np.zeros_like(ox)

    def compress(self, keep: np.ndarray) -> None:
        for name in ("ix", "iy", "step_x", "step_y", "t_delta_x", "t_delta_y",
                     "t_max_x", "t_max_y", "t_enter"):
            setattr(self, name, getattr(self, name)[keep])

    def advance(self) -> None:
        tmx, tmy = self.t_max_x, self.t_max_y
        diag = np.abs(tmx - tmy) <= VERTEX_EPS * np.maximum(1.0, np.minimum(tmx, tmy))
        sx = (tmx < tmy) | diag
        sy = (tmy < tmx) | diag
        self.t_enter = np.where(sx, tmx, tmy)
        self.ix = self.ix + sx * self.step_x
        self.iy = self.iy + sy * self.step_y
        self.t_max_x = np.where(sx, tmx + self.t_delta_x, tmx)
        self.t_max_y = np.where(sy, tmy + self.t_delta_y, tmy)


def segments_clear(passable: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Line-of-sight test for many segments between points in cell units.

    ``passable`` is a boolean (height, width) array. A segment is clear when
    every cell it traverses strictly between its start cell and its end cell
    is passable. Returns a boolean array, one entry per segment.
    """
    starts = np.asarray(starts, dtype=float).reshape(-1, 2)
    ends = np.asarray(ends, dtype=float).reshape(-1, 2)
    n = len(starts)
    clear = np.ones(n, dtype=bool)
    if n == 0:
        return clear
    h, w = passable.shape
    d = ends - starts
    tr = Traversal(starts[:, 0], starts[:, 1], d[:, 0], d[:, 1])
    gx = np.floor(ends[:, 0]).astype(np.int64)
    gy = np.floor(ends[:, 1]).astype(np.int64)
    alive = np.arange(n)
    done = (tr.ix == gx) & (tr.iy == gy)
    keep = ~done
    alive, gx, gy = alive[keep], gx[keep], gy[keep]
    tr.compress(keep)
    limit = int(np.max(np.abs(d).sum(axis=1))) + 4 if n else 0
    for _ in range(limit):
        if alive.size == 0:
            break
        tr.advance()
        at_goal = (tr.ix == gx) & (tr.iy == gy)
        inside = (tr.ix >= 0) & (tr.ix < w) & (tr.iy >= 0) & (tr.iy < h)
        ok = np.zeros(alive.size, dtype=bool)
        ok[inside] = passable[tr.iy[inside], tr.ix[inside]]
        blocked = ~at_goal & ~ok
        clear[alive[blocked]] = False
        keep = ~(at_goal | blocked)
        alive, gx, gy = alive[keep], gx[keep], gy[keep]
        tr.compress(keep)
    # anything still walking never reached its goal cell
    clear[alive] = False
    return clear
