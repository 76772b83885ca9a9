"""Grid world: scenes, the belief map, planar LiDAR raycasting, wall point
clouds and robot kinematics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .gridline import Traversal

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

DEFAULT_RANGE = 15.0
DEFAULT_RAYS = 720
Z_LEVELS = (0.2, 0.6, 1.0, 1.4)
FACE_JITTER = 0.05

# 4-neighbourhood and 8-neighbourhood offsets as (dx, dy)
N4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
N8 = N4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


class SceneError(ValueError):
    pass


class PoseError(ValueError):
    pass


@dataclass(frozen=True)
class Scene:
    """Ground-truth world. ``occupied`` is indexed ``[iy, ix]`` with y up."""

    width: int
    height: int
    resolution: float
    occupied: np.ndarray = field(repr=False)
    start_pose: tuple[float, float, float]

    @property
    def start_position(self) -> tuple[float, float]:
        return self.start_pose[0], self.start_pose[1]

    @property
    def free_count(self) -> int:
        return int(self.occupied.size - np.count_nonzero(self.occupied))

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def to_text(self) -> str:
        sx, sy = self.cell_of(*self.start_position)
        lines = [f"resolution {self.resolution:g}"]
        for iy in range(self.height - 1, -1, -1):
            row = ["#" if o else "." for o in self.occupied[iy]]
            if iy == sy:
                row[sx] = "S"
            lines.append("".join(row))
        return "\n".join(lines) + "\n"


@dataclass
class GridMap:
    """Tri-state belief grid. ``cells`` is a (height, width) uint8 array."""

    width: int
    height: int
    resolution: float
    cells: np.ndarray = field(repr=False)

    @classmethod
    def unknown_like(cls, scene: Scene) -> "GridMap":
        return cls(scene.width, scene.height, scene.resolution,
                   np.zeros((scene.height, scene.width), dtype=np.uint8))

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def flat(self) -> np.ndarray:
        return self.cells.reshape(-1)

    def copy(self) -> "GridMap":
        return GridMap(self.width, self.height, self.resolution, self.cells.copy())

    def index(self, ix: int, iy: int) -> int:
        return iy * self.width + ix

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def index_of(self, x: float, y: float) -> int:
        ix, iy = self.cell_of(x, y)
        if not self.in_bounds(ix, iy):
            raise PoseError(f"position ({x:.3f}, {y:.3f}) lies outside the grid")
        return self.index(ix, iy)

    def center(self, idx: int) -> tuple[float, float]:
        iy, ix = divmod(int(idx), self.width)
        return (ix + 0.5) * self.resolution, (iy + 0.5) * self.resolution

    def centers(self, idx: Iterable[int] | np.ndarray) -> np.ndarray:
        """(N, 2) array of cell-centre positions in metres."""
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        iy, ix = np.divmod(idx, self.width)
        return np.column_stack(((ix + 0.5) * self.resolution, (iy + 0.5) * self.resolution))

    def is_free(self, x: float, y: float) -> bool:
        ix, iy = self.cell_of(x, y)
        return self.in_bounds(ix, iy) and self.cells[iy, ix] == FREE

    def known_count(self) -> int:
        return int(np.count_nonzero(self.cells))


@dataclass(frozen=True)
class RobotState:
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    max_speed: float = 2.0


@dataclass(frozen=True)
class ScanResult:
    newly_updated: np.ndarray  # sorted flat indices whose belief left Unknown
    hits: np.ndarray  # (k, 2) hit points in metres


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (N, 3)

    def __len__(self) -> int:
        return len(self.points)


def load_scene(text: str) -> Scene:
    """Parse a scene file: a ``resolution <float>`` header then the grid.

    The first grid line is the top (largest y) row.
    """
    lines = [ln.rstrip("\r") for ln in text.split("\n")]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise SceneError("empty scene file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != "resolution":
        raise SceneError("line 1: expected 'resolution <float>'")
    try:
        resolution = float(header[1])
    except ValueError:
        raise SceneError(f"line 1: bad resolution {header[1]!r}") from None
    if not (resolution > 0 and math.isfinite(resolution)):
        raise SceneError("line 1: resolution must be positive")
    rows = lines[1:]
    if not rows:
        raise SceneError("no grid rows")
    width = len(rows[0])
    if width == 0:
        raise SceneError("row 1: empty row")
    height = len(rows)
    occ = np.zeros((height, width), dtype=bool)
    starts = []
    for r, row in enumerate(rows):
        if len(row) != width:
            raise SceneError(f"row {r + 1}: non-rectangular grid (length {len(row)}, expected {width})")
        bad = set(row) - set("#.S")
        if bad:
            raise SceneError(f"row {r + 1}: malformed grid, unexpected characters {sorted(bad)}")
        iy = height - 1 - r
        occ[iy] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("#")
        col = row.find("S")
        while col != -1:
            starts.append((col, iy, r))
            col = row.find("S", col + 1)
    if not starts:
        raise SceneError("no start cell 'S'")
    if len(starts) > 1:
        raise SceneError("multiple start cells")
    for r in (0, height - 1):
        if not occ[height - 1 - r].all():
            raise SceneError(f"row {r + 1}: unsealed boundary")
    if not (occ[:, 0].all() and occ[:, -1].all()):
        bad_r = next(height - iy for iy in range(height) if not (occ[iy, 0] and occ[iy, -1]))
        raise SceneError(f"row {bad_r}: unsealed boundary")
    sx, sy, _ = starts[0]
    pose = ((sx + 0.5) * resolution, (sy + 0.5) * resolution, 0.0)
    occ.setflags(write=False)
    return Scene(width, height, resolution, occ, pose)


def load_scene_file(path: str | Path) -> Scene:
    return load_scene(Path(path).read_text(encoding="utf-8"))


def ray_angles(n_rays: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_rays) / n_rays


def raycast_scan(scene: Scene, grid: GridMap, state: RobotState,
                 max_range: float = DEFAULT_RANGE, n_rays: int = DEFAULT_RAYS) -> ScanResult:
    """Cast ``n_rays`` planar rays from the robot and integrate them into ``grid``.

    Cells traversed before the first truly occupied cell (and entered within
    ``max_range``) become Free, that occupied cell becomes Occupied.
    """
    res = scene.resolution
    x, y = state.position
    ox, oy = x / res, y / res
    if not (0 <= ox < scene.width and 0 <= oy < scene.height):
        raise PoseError(f"pose ({x:.3f}, {y:.3f}) lies outside the grid")
    theta = ray_angles(n_rays)
    dx, dy = np.cos(theta), np.sin(theta)
    tr = Traversal(np.full(n_rays, ox), np.full(n_rays, oy), dx, dy)
    ray = np.arange(n_rays)
    reach = max_range / res
    occ = scene.occupied
    w, h = scene.width, scene.height
    seen: list[np.ndarray] = []
    hit_idx: list[np.ndarray] = []
    hit_pts: list[np.ndarray] = []
    while ray.size:
        inside = (tr.ix >= 0) & (tr.ix < w) & (tr.iy >= 0) & (tr.iy < h)
        if not inside.all():
            tr.compress(inside)
            ray = ray[inside]
            if not ray.size:
                break
        flat = tr.iy * w + tr.ix
        blocked = occ[tr.iy, tr.ix]
        if blocked.any():
            hit_idx.append(flat[blocked])
            t = tr.t_enter[blocked] + 1e-7
            r = ray[blocked]
            hit_pts.append(np.column_stack(((ox + t * dx[r]) * res, (oy + t * dy[r]) * res)))
        seen.append(flat[~blocked])
        keep = ~blocked
        tr.compress(keep)
        ray = ray[keep]
        tr.advance()
        keep = tr.t_enter <= reach
        tr.compress(keep)
        ray = ray[keep]

    cells = grid.flat
    free_idx = np.unique(np.concatenate(seen)) if seen else np.empty(0, np.int64)
    occ_idx = np.unique(np.concatenate(hit_idx)) if hit_idx else np.empty(0, np.int64)
    new_free = free_idx[cells[free_idx] == UNKNOWN]
    new_occ = occ_idx[cells[occ_idx] == UNKNOWN]
    cells[new_free] = FREE
    cells[new_occ] = OCCUPIED
    newly = np.union1d(new_free, new_occ)
    hits = np.concatenate(hit_pts) if hit_pts else np.empty((0, 2))
    return ScanResult(newly, hits)


def synthesize_point_cloud(grid: GridMap, center: tuple[float, float],
                           extent: tuple[float, float, float] = (20.0, 20.0, 5.0),
                           seed: int = 0, per_face: int = 1) -> PointCloud:
    """Extrude the known walls around ``center`` into a 3-D point cloud.

    Every known-Occupied cell whose centre lies inside the horizontal extent
    contributes, for each face bordering a known-Free cell, ``per_face``
    points per z level spread evenly along that face (one point sits at the
    face centre), each jittered along the face by at most 5 cm.
    """
    if per_face < 1:
        raise ValueError("per_face must be at least 1")
    res = grid.resolution
    cx, cy = center
    hx, hy, hz = extent[0] / 2.0, extent[1] / 2.0, extent[2]
    ix0 = max(0, int(math.ceil((cx - hx) / res - 0.5)))
    ix1 = min(grid.width - 1, int(math.floor((cx + hx) / res - 0.5)))
    iy0 = max(0, int(math.ceil((cy - hy) / res - 0.5)))
    iy1 = min(grid.height - 1, int(math.floor((cy + hy) / res - 0.5)))
    z_levels = np.array([z for z in Z_LEVELS if z <= hz])
    if ix1 < ix0 or iy1 < iy0 or z_levels.size == 0:
        return PointCloud(np.empty((0, 3)))
    cells = grid.cells
    padded = np.pad(cells, 1, constant_values=UNKNOWN)
    win = np.s_[iy0 + 1:iy1 + 2, ix0 + 1:ix1 + 2]
    occ = padded[win] == OCCUPIED
    # face order per cell: -x, +x, -y, +y
    neighbours = [
        padded[iy0 + 1:iy1 + 2, ix0:ix1 + 1],
        padded[iy0 + 1:iy1 + 2, ix0 + 2:ix1 + 3],
        padded[iy0:iy1 + 1, ix0 + 1:ix1 + 2],
        padded[iy0 + 2:iy1 + 3, ix0 + 1:ix1 + 2],
    ]
    exposed = np.stack([occ & (nb == FREE) for nb in neighbours], axis=-1)  # (h, w, 4)
    ry, rx, face = np.nonzero(exposed)  # row-major => ascending cell index, then face
    if ry.size == 0:
        return PointCloud(np.empty((0, 3)))
    ix = rx + ix0
    iy = ry + iy0
    x_lo, y_lo = ix * res, iy * res
    fx = np.select([face == 0, face == 1], [x_lo, x_lo + res], x_lo + res / 2)
    fy = np.select([face == 2, face == 3], [y_lo, y_lo + res], y_lo + res / 2)
    along_x = face >= 2  # faces normal to y run along x
    nz = z_levels.size
    k = per_face
    rng = np.random.default_rng(seed)
    # per face: k slots along the face, each at every z level
    slots = ((np.arange(k) + 0.5) / k - 0.5) * res
    shift = np.repeat(slots, nz)[None, :] + rng.uniform(-FACE_JITTER, FACE_JITTER, size=(ry.size, k * nz))
    px = fx[:, None] + np.where(along_x[:, None], shift, 0.0)
    py = fy[:, None] + np.where(along_x[:, None], 0.0, shift)
    pz = np.broadcast_to(np.tile(z_levels, k), px.shape)
    pts = np.column_stack((px.ravel(), py.ravel(), pz.ravel()))
    return PointCloud(pts)


def step_robot(state: RobotState, waypoint: tuple[float, float], dt: float) -> RobotState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    px, py = state.position
    wx, wy = waypoint
    ddx, ddy = wx - px, wy - py
    dist = math.hypot(ddx, ddy)
    if dist == 0.0:
        return replace(state, velocity=(0.0, 0.0))
    travel = min(dist, state.max_speed * dt)
    if travel >= dist:
        pos = (float(wx), float(wy))
    else:
        pos = (px + ddx / dist * travel, py + ddy / dist * travel)
    speed = travel / dt
    return replace(state, position=pos, velocity=(ddx / dist * speed, ddy / dist * speed))


def reachable_free(scene: Scene) -> np.ndarray:
    """Boolean mask of truly-free cells 4-connected to the start cell."""
    from scipy import ndimage

    labels, _ = ndimage.label(~scene.occupied)
    sx, sy = scene.cell_of(*scene.start_position)
    return labels == labels[sy, sx]
