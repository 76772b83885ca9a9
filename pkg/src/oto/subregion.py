"""Enclosed sub-region detection from a wall point cloud around the robot.

Pipeline: greedy uniform sampling -> PCA normals over the n nearest points ->
quadrant vote on the inward-facing, near-horizontal normals -> one RANSAC
line (vertical plane) per occupied quadrant -> axis-aligned bounding box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .frontier import FrontierSet
from .world import GridMap, PointCloud

# horizontal normals within this angle of an axis are treated as lying on it
AXIS_SNAP_DEG = 5.0
MIN_QUADRANTS = 3


class DegenerateNormal(ValueError):
    pass


@dataclass(frozen=True)
class DetectionParams:
    sample_radius: float = 1.0
    neighbours: int = 50
    vote_threshold: int = 4
    max_inclination_deg: float = 15.0
    ransac_threshold: float = 0.2
    ransac_iterations: int = 100
    min_inliers: int = 5
    segment_gap: float = 1.0  # inlier runs further apart than this are separate walls


@dataclass(frozen=True)
class OrientedNormal:
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]
    inclination: float  # radians above/below the XOY plane
    quadrant: Optional[int]


@dataclass(frozen=True)
class QuadrantVote:
    counts: tuple[int, int, int, int]
    occupied: tuple[bool, bool, bool, bool]

    @classmethod
    def from_counts(cls, counts: Sequence[int], threshold: int) -> "QuadrantVote":
        counts = tuple(int(c) for c in counts)
        return cls(counts, tuple(c > threshold for c in counts))

    @property
    def n_occupied(self) -> int:
        return sum(self.occupied)


@dataclass(frozen=True)
class FittedPlane:
    quadrant: int
    normal: tuple[float, float]  # horizontal unit normal of the vertical plane
    offset: float  # normal . (x, y) = offset
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    inliers: int


@dataclass(frozen=True)
class EnclosedRegion:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    alive: bool = True

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("degenerate enclosed-region box")

    @property
    def box(self) -> tuple[float, float, float, float]:
        return self.x_min, self.x_max, self.y_min, self.y_max

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def iou(self, other: "EnclosedRegion") -> float:
        w = min(self.x_max, other.x_max) - max(self.x_min, other.x_min)
        h = min(self.y_max, other.y_max) - max(self.y_min, other.y_min)
        if w <= 0 or h <= 0:
            return 0.0
        inter = w * h
        return inter / (self.area + other.area - inter)

    def union(self, other: "EnclosedRegion") -> "EnclosedRegion":
        return EnclosedRegion(min(self.x_min, other.x_min), max(self.x_max, other.x_max),
                              min(self.y_min, other.y_min), max(self.y_max, other.y_max),
                              self.alive)


@dataclass
class Detection:
    """Everything the detector computed, for reporting and debugging."""

    samples: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)  # (m, 3), NaN rows where degenerate
    quadrants: np.ndarray = field(repr=False)  # 0 = discarded
    vote: QuadrantVote
    planes: list[FittedPlane]
    region: Optional[EnclosedRegion]


def sample_points(cloud: PointCloud | np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Greedy thinning: keep a point iff no already-kept point lies within ``r``.

    Returns ``(indices, points)`` of the kept points in cloud order.
    """
    if r <= 0:
        raise ValueError("sample radius must be positive")
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if len(pts) == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, 3))
    tree = cKDTree(pts)
    suppressed = np.zeros(len(pts), dtype=bool)
    kept = []
    for i in range(len(pts)):
        if suppressed[i]:
            continue
        kept.append(i)
        suppressed[tree.query_ball_point(pts[i], r)] = True
    kept = np.asarray(kept, dtype=np.int64)
    return kept, pts[kept]


def quadrant_of(nx: float, ny: float, snap_deg: float = AXIS_SNAP_DEG) -> Optional[int]:
    """Quadrant 1..4 of a horizontal direction, half-open counter-clockwise.

    Quadrant j covers polar angles [(j-1)*90deg, j*90deg), so a normal lying on
    an axis belongs to the quadrant it opens counter-clockwise into. Directions
    within ``snap_deg`` of an axis are first snapped onto it.
    """
    norm = math.hypot(nx, ny)
    if norm < 1e-12:
        return None
    snap = math.sin(math.radians(snap_deg)) * norm
    if abs(nx) <= snap:
        nx = 0.0
    if abs(ny) <= snap:
        ny = 0.0
    if ny == 0.0:
        return 1 if nx > 0 else 3
    if nx == 0.0:
        return 2 if ny > 0 else 4
    if nx > 0:
        return 1 if ny > 0 else 4
    return 2 if ny > 0 else 3


def _orient(normal: np.ndarray, p: np.ndarray, origin: np.ndarray) -> np.ndarray:
    if float(np.dot(normal, origin - p)) < 0:
        return -normal
    return normal


def _oriented_normal(n: np.ndarray, p: np.ndarray, origin: np.ndarray,
                     max_inclination: float) -> OrientedNormal:
    n = _orient(n / np.linalg.norm(n), p, origin)
    alpha = math.asin(min(1.0, abs(float(n[2]))))
    quad = None if alpha > max_inclination else quadrant_of(float(n[0]), float(n[1]))
    return OrientedNormal(tuple(map(float, p)), tuple(map(float, n)), alpha, quad)


def estimate_normal(tree: cKDTree, p: Sequence[float], n: int,
                    local_origin: Sequence[float],
                    max_inclination_deg: float = 15.0) -> OrientedNormal:
    """Least-variance direction of the ``n`` points nearest ``p``."""
    pts = tree.data
    if len(pts) < n:
        raise ValueError(f"need at least {n} points, cloud has {len(pts)}")
    p = np.asarray(p, dtype=float)
    _, nb = tree.query(p, k=n)
    local = pts[np.atleast_1d(nb)]
    centred = local - local.mean(axis=0)
    if np.max(np.linalg.norm(centred, axis=1)) < 1e-9:
        raise DegenerateNormal("degenerate normal")
    _, vecs = np.linalg.eigh(centred.T @ centred)
    return _oriented_normal(vecs[:, 0], p, np.asarray(local_origin, dtype=float),
                            math.radians(max_inclination_deg))


def estimate_normals(tree: cKDTree, samples: np.ndarray, n: int, local_origin: Sequence[float],
                     max_inclination_deg: float = 15.0) -> tuple[np.ndarray, np.ndarray]:
    """Batched :func:`estimate_normal`. Returns ``(normals, quadrants)``.

    Degenerate neighbourhoods get a NaN normal and quadrant 0, as do normals
    steeper than the inclination limit (those keep their direction).
    """
    m = len(samples)
    if m == 0:
        return np.empty((0, 3)), np.empty(0, dtype=np.int64)
    pts = tree.data
    k = min(n, len(pts))
    _, nb = tree.query(samples, k=k)
    nb = nb.reshape(m, k)
    local = pts[nb]
    centred = local - local.mean(axis=1, keepdims=True)
    spread = np.max(np.linalg.norm(centred, axis=2), axis=1)
    cov = np.einsum("mki,mkj->mij", centred, centred)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    origin = np.asarray(local_origin, dtype=float)
    flip = np.einsum("mi,mi->m", normals, origin - samples) < 0
    normals[flip] *= -1.0
    alpha = np.arcsin(np.clip(np.abs(normals[:, 2]), 0.0, 1.0))
    max_inc = math.radians(max_inclination_deg)
    quads = np.zeros(m, dtype=np.int64)
    for i in range(m):
        if alpha[i] <= max_inc:
            quads[i] = quadrant_of(normals[i, 0], normals[i, 1]) or 0
    bad = spread < 1e-9
    normals[bad] = np.nan
    quads[bad] = 0
    return normals, quads


def ransac_line(points: np.ndarray, rng: np.random.Generator, threshold: float = 0.2,
                iterations: int = 100, min_inliers: int = 5):
    """Fit a 2-D line ``normal . p = offset``; returns (normal, offset, mask) or None."""
    pts = np.asarray(points, dtype=float)[:, :2]
    n = len(pts)
    if n < max(2, min_inliers):
        return None
    i = rng.integers(0, n, size=iterations)
    j = rng.integers(0, n - 1, size=iterations)
    j = j + (j >= i)  # distinct second index
    d = pts[j] - pts[i]
    length = np.hypot(d[:, 0], d[:, 1])
    ok = length > 1e-9
    if not ok.any():
        return None
    normals = np.column_stack((-d[ok, 1], d[ok, 0])) / length[ok, None]
    offsets = np.einsum("ki,ki->k", normals, pts[i[ok]])
    resid = np.abs(pts @ normals.T - offsets)  # (n, k)
    counts = (resid <= threshold).sum(axis=0)
    best = int(np.argmax(counts))  # first maximum
    mask = resid[:, best] <= threshold
    # least-squares refit on the consensus set
    inl = pts[mask]
    c = inl.mean(axis=0)
    _, vecs = np.linalg.eigh((inl - c).T @ (inl - c))
    normal = vecs[:, 0]
    offset = float(normal @ c)
    mask = np.abs(pts @ normal - offset) <= threshold
    if mask.sum() < min_inliers:
        return None
    return normal, offset, mask


def wall_segment(points: np.ndarray, normal: np.ndarray, origin: np.ndarray,
                 gap: float) -> np.ndarray:
    """The contiguous run of on-line points nearest the foot of ``origin``.

    Points are ordered along the line and split wherever consecutive ones are
    more than ``gap`` apart, so collinear walls of neighbouring rooms do not
    stretch the plane.
    """
    tangent = np.array([-normal[1], normal[0]])
    t = points @ tangent
    order = np.argsort(t, kind="stable")
    ts = t[order]
    cuts = np.flatnonzero(np.diff(ts) > gap) + 1
    runs = np.split(order, cuts)
    foot = float(origin @ tangent)
    lo = np.array([t[r].min() for r in runs])
    hi = np.array([t[r].max() for r in runs])
    dist = np.maximum(0.0, np.maximum(lo - foot, foot - hi))
    return points[runs[int(np.argmin(dist))]]


def run_detection(cloud: PointCloud, local_origin: Sequence[float],
                  params: DetectionParams = DetectionParams(), seed: int = 0) -> Detection:
    pts = cloud.points
    empty = Detection(np.empty((0, 3)), np.empty((0, 3)), np.empty(0, dtype=np.int64),
                      QuadrantVote.from_counts((0, 0, 0, 0), params.vote_threshold), [], None)
    if len(pts) == 0:
        return empty
    _, samples = sample_points(pts, params.sample_radius)
    if len(pts) < params.neighbours:
        empty.samples = samples
        return empty
    tree = cKDTree(pts)
    origin = np.asarray(local_origin, dtype=float)
    if origin.size == 2:
        origin = np.append(origin, 0.0)
    normals, quads = estimate_normals(tree, samples, params.neighbours, origin,
                                      params.max_inclination_deg)
    counts = [int(np.count_nonzero(quads == q)) for q in (1, 2, 3, 4)]
    vote = QuadrantVote.from_counts(counts, params.vote_threshold)
    det = Detection(samples, normals, quads, vote, [], None)
    if vote.n_occupied < MIN_QUADRANTS:
        return det
    rng = np.random.default_rng(seed)
    pts2 = pts[:, :2]
    for q in (1, 2, 3, 4):
        if not vote.occupied[q - 1]:
            continue
        fit = ransac_line(samples[quads == q], rng, params.ransac_threshold,
                          params.ransac_iterations, params.min_inliers)
        if fit is None:
            continue
        normal, offset, mask = fit
        on_plane = pts2[np.abs(pts2 @ normal - offset) <= params.ransac_threshold]
        on_plane = wall_segment(on_plane, normal, origin[:2], params.segment_gap)
        lo = on_plane.min(axis=0)
        hi = on_plane.max(axis=0)
        det.planes.append(FittedPlane(q, (float(normal[0]), float(normal[1])), offset,
                                      float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]),
                                      int(mask.sum())))
    if len(det.planes) < MIN_QUADRANTS:
        return det
    x_min = min(p.x_min for p in det.planes)
    x_max = max(p.x_max for p in det.planes)
    y_min = min(p.y_min for p in det.planes)
    y_max = max(p.y_max for p in det.planes)
    if x_min < x_max and y_min < y_max:
        det.region = EnclosedRegion(x_min, x_max, y_min, y_max)
    return det


def detect_enclosed(cloud: PointCloud, local_origin: Sequence[float],
                    params: DetectionParams = DetectionParams(),
                    seed: int = 0) -> Optional[EnclosedRegion]:
    return run_detection(cloud, local_origin, params, seed).region


def registry_merge(registry: list[EnclosedRegion], candidate: EnclosedRegion,
                   iou_threshold: float = 0.5) -> list[EnclosedRegion]:
    out = list(registry)
    for i, reg in enumerate(out):
        if reg.alive and reg.iou(candidate) > iou_threshold:
            out[i] = reg.union(candidate)
            return out
    out.append(replace(candidate, alive=True))
    return out


def registry_retire(registry: list[EnclosedRegion], frontiers: FrontierSet,
                    grid: GridMap) -> list[EnclosedRegion]:
    """Retire alive regions that no longer contain any frontier cell."""
    if not any(r.alive for r in registry):
        return list(registry)
    pts = grid.centers(frontiers.indices())
    out = []
    for reg in registry:
        if reg.alive:
            inside = ((pts[:, 0] >= reg.x_min) & (pts[:, 0] <= reg.x_max)
                      & (pts[:, 1] >= reg.y_min) & (pts[:, 1] <= reg.y_max))
            if not inside.any():
                reg = replace(reg, alive=False)
        out.append(reg)
    return out
