"""Frontier maintenance: exhaustive scan and selective (incremental) update.

A frontier cell is a known-Free cell with at least one Unknown 4-neighbour.
The incremental update only looks at the cells whose belief just changed and
their 8-neighbours, so its cost scales with the scan, not with the map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .world import FREE, UNKNOWN, GridMap

NEIGHBOURHOOD = 8  # cells re-examined around each updated cell


@dataclass
class FrontierSet:
    width: int
    height: int
    member: np.ndarray = field(repr=False)  # flat bool bitmap
    cells: set = field(default_factory=set, repr=False)
    last_workload: int = 0
    total_workload: int = 0

    @classmethod
    def empty(cls, grid: GridMap) -> "FrontierSet":
        return cls(grid.width, grid.height, np.zeros(grid.size, dtype=bool))

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, idx: int) -> bool:
        return bool(self.member[idx])

    def __bool__(self) -> bool:
        return bool(self.cells)

    def indices(self) -> np.ndarray:
        """Sorted member indices."""
        return np.flatnonzero(self.member)

    def copy(self) -> "FrontierSet":
        return FrontierSet(self.width, self.height, self.member.copy(), set(self.cells),
                           self.last_workload, self.total_workload)


def frontier_mask(cells: np.ndarray) -> np.ndarray:
    """Frontier test for a whole (h, w) belief grid."""
    unk = np.pad(cells == UNKNOWN, 1, constant_values=False)
    near_unknown = unk[1:-1, :-2] | unk[1:-1, 2:] | unk[:-2, 1:-1] | unk[2:, 1:-1]
    return (cells == FREE) & near_unknown


def _touches_unknown(grid: GridMap, idx: np.ndarray) -> np.ndarray:
    """Whether each known cell in ``idx`` has an Unknown 4-neighbour."""
    w, n = grid.width, grid.size
    ix = idx % w
    # a neighbour off the grid is replaced by the cell itself, which is known
    nb = np.empty((4, idx.size), dtype=np.int64)
    np.add(idx, ix < w - 1, out=nb[0])
    np.subtract(idx, ix > 0, out=nb[1])
    np.multiply(idx < n - w, w, out=nb[2])
    nb[2] += idx
    np.multiply(idx >= w, -w, out=nb[3])
    nb[3] += idx
    return (grid.flat[nb] == UNKNOWN).any(axis=0)


def _neighbourhood(idx: np.ndarray, w: int, h: int) -> np.ndarray:
    """``idx`` and their 8-neighbours, with repeats. Offsets wrap across row
    ends and are clamped at the grid ends, so a few unrelated cells may be
    included; re-checking them is harmless."""
    cand = idx[:, None] + np.array([0, -w - 1, -w, -w + 1, -1, 1, w - 1, w, w + 1])
    np.maximum(cand, 0, out=cand)
    np.minimum(cand, w * h - 1, out=cand)
    return cand.ravel()


def full_scan_frontiers(grid: GridMap) -> FrontierSet:
    member = frontier_mask(grid.cells).reshape(-1)
    n = grid.size
    return FrontierSet(grid.width, grid.height, member, set(np.flatnonzero(member).tolist()),
                       last_workload=n, total_workload=n)


def update_frontiers(current: FrontierSet, grid: GridMap,
                     newly_updated: Iterable[int] | np.ndarray) -> FrontierSet:
    """Bring ``current`` up to date after a scan changed ``newly_updated``.

    Beliefs only ever leave Unknown, so an updated cell can only join the set
    and an untouched neighbour can only leave it (it may have lost its last
    Unknown neighbour). Updates in place and returns the same object.
    """
    nu = np.asarray(newly_updated, dtype=np.int64).reshape(-1)
    if nu.size == 0:
        current.last_workload = 0
        return current
    if nu.min() < 0 or nu.max() >= grid.size:
        raise IndexError("newly_updated contains an out-of-bounds cell index")
    fresh = nu[grid.flat[nu] == FREE]
    near = _neighbourhood(nu, grid.width, grid.height)
    old = near[current.member[near]]
    check = np.concatenate((fresh, old))
    touches = _touches_unknown(grid, check)
    added = fresh[touches[:fresh.size]]
    removed = old[~touches[fresh.size:]]
    current.member[removed] = False
    current.member[added] = True
    current.cells.difference_update(removed.tolist())
    current.cells.update(added.tolist())
    current.last_workload = int(nu.size) * (1 + NEIGHBOURHOOD)
    current.total_workload += current.last_workload
    return current


@dataclass(frozen=True)
class FrontierCluster:
    cells: np.ndarray  # sorted flat indices
    centroid: tuple[float, float]

    @property
    def size(self) -> int:
        return int(self.cells.size)


def cluster_frontiers(frontiers: FrontierSet, grid: GridMap,
                      linkage_radius: float = 3.0) -> list[FrontierCluster]:
    """Single-linkage clusters: cells within ``linkage_radius`` metres join."""
    if linkage_radius <= 0:
        raise ValueError("linkage_radius must be positive")
    idx = frontiers.indices()
    if idx.size == 0:
        return []
    pts = grid.centers(idx)
    pairs = cKDTree(pts).query_pairs(linkage_radius * (1 + 1e-12), output_type="ndarray")
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(idx.size, idx.size))
    n_comp, labels = connected_components(adj, directed=False)
    clusters = []
    for lab in range(n_comp):
        sel = labels == lab
        members = idx[sel]
        c = pts[sel].mean(axis=0)
        clusters.append(FrontierCluster(members, (float(c[0]), float(c[1]))))
    clusters.sort(key=lambda cl: int(cl.cells[0]))
    return clusters
