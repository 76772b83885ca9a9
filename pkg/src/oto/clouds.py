"""Crafted wall point clouds with known geometry, and the cloud text format.

A cloud file holds one ``x y z`` triple per line; blank lines and lines
starting with ``#`` are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .world import PointCloud

WALL_HEIGHT = 2.5


class CloudFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class CraftedCloud:
    """A generated cloud plus its ground truth (``box`` is None when no
    enclosure should be reported)."""

    name: str
    cloud: PointCloud
    origin: tuple[float, float, float]
    box: Optional[tuple[float, float, float, float]]


def wall_points(p0: Sequence[float], p1: Sequence[float], rng: np.random.Generator,
                spacing: float = 0.1, height: float = WALL_HEIGHT, jitter: float = 0.02) -> np.ndarray:
    """Points on the vertical wall standing on the segment ``p0 -> p1``."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    n_along = max(2, int(math.ceil(np.linalg.norm(p1 - p0) / spacing)) + 1)
    n_up = max(2, int(math.ceil(height / spacing)) + 1)
    t = np.linspace(0.0, 1.0, n_along)
    xy = p0 + t[:, None] * (p1 - p0)
    z = np.linspace(0.0, height, n_up)
    pts = np.column_stack((np.repeat(xy, n_up, axis=0), np.tile(z, n_along)))
    normal = np.array([-(p1 - p0)[1], (p1 - p0)[0]]) / np.linalg.norm(p1 - p0)
    pts[:, :2] += rng.uniform(-jitter, jitter, size=(len(pts), 1)) * normal
    return pts


def _cloud(walls: list[np.ndarray]) -> PointCloud:
    if not walls:
        return PointCloud(np.empty((0, 3)))
    return PointCloud(np.vstack(walls))


def room_cloud(width: float, depth: float, center: Sequence[float] = (0.0, 0.0),
               open_side: Optional[str] = None, seed: int = 0, spacing: float = 0.1) -> PointCloud:
    """Rectangular room walls; ``open_side`` in {"north", "south", "east", "west"}
    leaves that wall out (a U-shaped room)."""
    rng = np.random.default_rng(seed)
    cx, cy = center
    x0, x1 = cx - width / 2, cx + width / 2
    y0, y1 = cy - depth / 2, cy + depth / 2
    sides = {
        "south": ((x0, y0), (x1, y0)),
        "east": ((x1, y0), (x1, y1)),
        "north": ((x1, y1), (x0, y1)),
        "west": ((x0, y1), (x0, y0)),
    }
    if open_side is not None and open_side not in sides:
        raise ValueError(f"unknown side {open_side!r}")
    return _cloud([wall_points(a, b, rng, spacing) for name, (a, b) in sides.items() if name != open_side])


def corridor_cloud(width: float, length: float, angle: float = 0.0, offset: float = 0.0,
                   seed: int = 0, spacing: float = 0.1) -> PointCloud:
    """Two parallel walls ``width`` apart, centred on the origin and running
    along direction ``angle``; ``offset`` shifts the robot across the corridor."""
    rng = np.random.default_rng(seed)
    d = np.array([math.cos(angle), math.sin(angle)])
    n = np.array([-d[1], d[0]])
    walls = []
    for side in (-1.0, 1.0):
        base = n * (side * width / 2 - offset)
        walls.append(wall_points(base - d * length / 2, base + d * length / 2, rng, spacing))
    return _cloud(walls)


def single_wall_cloud(length: float, distance: float, angle: float = 0.0,
                      seed: int = 0, spacing: float = 0.1) -> PointCloud:
    rng = np.random.default_rng(seed)
    d = np.array([math.cos(angle), math.sin(angle)])
    n = np.array([-d[1], d[0]])
    base = n * distance
    return _cloud([wall_points(base - d * length / 2, base + d * length / 2, rng, spacing)])


def posts_cloud(count: int, extent: float, seed: int = 0, size: float = 0.3,
                min_distance: float = 3.0, spacing: float = 0.1) -> PointCloud:
    """Isolated square posts scattered over an open field."""
    rng = np.random.default_rng(seed)
    walls = []
    placed = 0
    while placed < count:
        c = rng.uniform(-extent / 2, extent / 2, size=2)
        if np.hypot(*c) < min_distance:
            continue
        h = size / 2
        corners = [c + (-h, -h), c + (h, -h), c + (h, h), c + (-h, h)]
        walls += [wall_points(corners[k], corners[(k + 1) % 4], rng, spacing) for k in range(4)]
        placed += 1
    return _cloud(walls)


def crafted_suite(seed: int = 0) -> list[CraftedCloud]:
    """Twelve clouds with ground truth: three closed rooms of different sizes
    and robot offsets, three U-rooms, three corridors, two open fields and a
    single wall. The robot sits at the origin, 1 m above the floor."""
    origin = (0.0, 0.0, 1.0)
    suite = []
    for k, (w, d, c) in enumerate(((10.0, 8.0, (0.0, 0.0)), (6.0, 6.0, (1.5, -1.0)),
                                   (14.0, 9.0, (-3.0, 2.0)))):
        box = (c[0] - w / 2, c[0] + w / 2, c[1] - d / 2, c[1] + d / 2)
        suite.append(CraftedCloud(f"room_{k + 1}", room_cloud(w, d, c, seed=seed + k), origin, box))
    for k, (w, d, c, side) in enumerate(((10.0, 8.0, (0.0, 0.0), "north"), (8.0, 12.0, (1.0, 2.0), "east"),
                                         (12.0, 7.0, (-2.0, -1.0), "south"))):
        box = (c[0] - w / 2, c[0] + w / 2, c[1] - d / 2, c[1] + d / 2)
        suite.append(CraftedCloud(f"u_room_{k + 1}", room_cloud(w, d, c, open_side=side, seed=seed + 10 + k),
                                  origin, box))
    for k, (w, angle, off) in enumerate(((3.0, 0.0, 0.0), (4.0, math.pi / 2, 0.8), (6.0, math.pi / 4, -1.0))):
        suite.append(CraftedCloud(f"corridor_{k + 1}", corridor_cloud(w, 20.0, angle, off, seed=seed + 20 + k),
                                  origin, None))
    suite.append(CraftedCloud("open_field_1", PointCloud(np.empty((0, 3))), origin, None))
    suite.append(CraftedCloud("open_field_2", posts_cloud(6, 18.0, seed=seed + 30), origin, None))
    suite.append(CraftedCloud("single_wall", single_wall_cloud(16.0, 3.0, 0.3, seed=seed + 40), origin, None))
    return suite


def parse_cloud(text: str) -> PointCloud:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 3:
            raise CloudFormatError(lineno, f"expected 3 numbers, got {len(parts)}")
        try:
            xyz = [float(p) for p in parts]
        except ValueError:
            raise CloudFormatError(lineno, f"not a number in {line!r}") from None
        if not all(math.isfinite(v) for v in xyz):
            raise CloudFormatError(lineno, "non-finite coordinate")
        rows.append(xyz)
    return PointCloud(np.array(rows, dtype=float).reshape(-1, 3))


def format_cloud(cloud: PointCloud) -> str:
    return "".join(f"{x:.4f} {y:.4f} {z:.4f}\n" for x, y, z in np.asarray(cloud.points))
