"""Deterministic scene generators used by the test corpus and benchmarks."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .world import Scene, load_scene


def _seal(occ: np.ndarray) -> np.ndarray:
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True
    return occ


def _scene(occ: np.ndarray, resolution: float, start: tuple[int, int]) -> Scene:
    sx, sy = start
    if occ[sy, sx]:
        raise ValueError("start cell is occupied")
    occ = occ.copy()
    occ.setflags(write=False)
    h, w = occ.shape
    return Scene(w, h, resolution, occ, ((sx + 0.5) * resolution, (sy + 0.5) * resolution, 0.0))


def open_room(width: int, height: int, resolution: float = 1.0) -> Scene:
    occ = _seal(np.zeros((height, width), dtype=bool))
    return _scene(occ, resolution, (width // 2, height // 2))


def random_scene(seed: int, width: int = 32, height: int = 32, resolution: float = 0.5,
                 obstacles: int = 10, max_size: int = 6) -> Scene:
    """Sealed box with random rectangular obstacles; start is a random free cell."""
    rng = np.random.default_rng(seed)
    occ = _seal(np.zeros((height, width), dtype=bool))
    for _ in range(obstacles):
        w = int(rng.integers(1, max_size + 1))
        h = int(rng.integers(1, max_size + 1))
        x = int(rng.integers(1, max(2, width - w)))
        y = int(rng.integers(1, max(2, height - h)))
        occ[y:y + h, x:x + w] = True
    free = np.argwhere(~occ)
    sy, sx = free[int(rng.integers(len(free)))]
    return _scene(occ, resolution, (int(sx), int(sy)))


def maze(seed: int, cols: int = 10, rows: int = 10, corridor: int = 5,
         resolution: float = 0.5, loops: float = 0.1) -> Scene:
    """Grid maze with ``corridor``-wide passages and 1-cell walls.

    A depth-first spanning tree over ``cols x rows`` lattice cells, plus a
    fraction ``loops`` of extra openings so the maze has cycles.
    """
    rng = np.random.default_rng(seed)
    pitch = corridor + 1
    w, h = cols * pitch + 1, rows * pitch + 1
    occ = np.ones((h, w), dtype=bool)
    for cy in range(rows):
        for cx in range(cols):
            x0, y0 = cx * pitch + 1, cy * pitch + 1
            occ[y0:y0 + corridor, x0:x0 + corridor] = False

    def open_wall(a, b):
        (ax, ay), (bx, by) = a, b
        if ax == bx:
            y = max(ay, by) * pitch
            occ[y, ax * pitch + 1:ax * pitch + 1 + corridor] = False
        else:
            x = max(ax, bx) * pitch
            occ[ay * pitch + 1:ay * pitch + 1 + corridor, x] = False

    seen = {(0, 0)}
    stack = [(0, 0)]
    while stack:
        cx, cy = stack[-1]
        nbrs = [(cx + dx, cy + dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
                if 0 <= cx + dx < cols and 0 <= cy + dy < rows and (cx + dx, cy + dy) not in seen]
        if not nbrs:
            stack.pop()
            continue
        nxt = nbrs[int(rng.integers(len(nbrs)))]
        open_wall((cx, cy), nxt)
        seen.add(nxt)
        stack.append(nxt)
    for cy in range(rows):
        for cx in range(cols):
            for nb in ((cx + 1, cy), (cx, cy + 1)):
                if nb[0] < cols and nb[1] < rows and rng.random() < loops:
                    open_wall((cx, cy), nb)
    _seal(occ)
    return _scene(occ, resolution, (1 + corridor // 2, 1 + corridor // 2))


def rooms(seed: int, width: int = 96, height: int = 72, resolution: float = 0.5,
          min_room: int = 14, door: int = 3, clutter: int = 2) -> Scene:
    """Office-like layout: recursive splits into walled rooms, one door per wall.

    Every split wall gets a single ``door``-cell opening, so the room graph is a
    tree and each leaf room is an enclosed sub-region with a single entrance.
    Small pillars are scattered inside larger rooms.
    """
    rng = np.random.default_rng(seed)
    occ = _seal(np.zeros((height, width), dtype=bool))
    leaves: list[tuple[int, int, int, int]] = []

    def split(x0, y0, x1, y1):
        # interior spans [x0, x1) x [y0, y1)
        w, h = x1 - x0, y1 - y0
        can_v = w >= 2 * min_room + 1
        can_h = h >= 2 * min_room + 1
        if not (can_v or can_h):
            leaves.append((x0, y0, x1, y1))
            return
        vertical = can_v and (not can_h or (w >= h if rng.random() < 0.8 else rng.random() < 0.5))
        if vertical:
            x = int(rng.integers(x0 + min_room, x1 - min_room))
            occ[y0:y1, x] = True
            d = int(rng.integers(y0 + 1, y1 - door))
            occ[d:d + door, x] = False
            split(x0, y0, x, y1)
            split(x + 1, y0, x1, y1)
        else:
            y = int(rng.integers(y0 + min_room, y1 - min_room))
            occ[y, x0:x1] = True
            d = int(rng.integers(x0 + 1, x1 - door))
            occ[y, d:d + door] = False
            split(x0, y0, x1, y)
            split(x0, y + 1, x1, y1)

    split(1, 1, width - 1, height - 1)
    for (x0, y0, x1, y1) in leaves:
        for _ in range(clutter):
            if x1 - x0 < 10 or y1 - y0 < 10:
                break
            px = int(rng.integers(x0 + 3, x1 - 4))
            py = int(rng.integers(y0 + 3, y1 - 4))
            occ[py:py + 2, px:px + 2] = True
    # start in the middle of the first leaf that has a free centre
    for (x0, y0, x1, y1) in leaves:
        cx, cy = (x0 + x1) // 2, (y0 + y1) // 2
        if not occ[cy, cx]:
            return _scene(occ, resolution, (cx, cy))
    raise ValueError("no free start cell")


def maze_rooms(seed: int, cols: int = 7, rows: int = 7, corridor: int = 5, n_rooms: int = 3,
               room_span: int = 2, door: int = 3, clutter: int = 3, resolution: float = 0.5,
               loops: float = 0.05, max_tries: int = 100) -> Scene:
    """Corridor maze with ``n_rooms`` enclosed sub-rooms.

    Each room merges a ``room_span`` x ``room_span`` block of lattice cells,
    is walled on every side but one ``door``-cell doorway into the maze, and
    holds ``clutter`` small pillars so it cannot be seen whole from the door.
    """
    rng = np.random.default_rng(seed)
    pitch = corridor + 1
    for _ in range(max_tries):
        blocks = []
        taken = np.zeros((rows, cols), dtype=bool)
        for _ in range(50 * n_rooms):
            if len(blocks) == n_rooms:
                break
            bx = int(rng.integers(0, cols - room_span + 1))
            by = int(rng.integers(0, rows - room_span + 1))
            # keep a one-cell margin between rooms so corridors can pass
            y0, y1 = max(0, by - 1), min(rows, by + room_span + 1)
            x0, x1 = max(0, bx - 1), min(cols, bx + room_span + 1)
            if taken[y0:y1, x0:x1].any():
                continue
            taken[by:by + room_span, bx:bx + room_span] = True
            blocks.append((bx, by))
        if len(blocks) < n_rooms:
            continue
        open_cells = [(x, y) for y in range(rows) for x in range(cols) if not taken[y, x]]
        if not open_cells:
            continue
        # the corridor cells must form one 4-connected piece
        seen = {open_cells[0]}
        stack = [open_cells[0]]
        while stack:
            cx, cy = stack.pop()
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nb = (cx + dx, cy + dy)
                if 0 <= nb[0] < cols and 0 <= nb[1] < rows and not taken[nb[1], nb[0]] and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) == len(open_cells):
            break
    else:
        raise ValueError("could not place the rooms")

    w, h = cols * pitch + 1, rows * pitch + 1
    occ = np.ones((h, w), dtype=bool)

    def carve(cx, cy):
        x0, y0 = cx * pitch + 1, cy * pitch + 1
        occ[y0:y0 + corridor, x0:x0 + corridor] = False

    def open_wall(a, b, width=corridor, offset=0):
        (ax, ay), (bx, by) = a, b
        if ax == bx:
            y = max(ay, by) * pitch
            x0 = ax * pitch + 1 + offset
            occ[y, x0:x0 + width] = False
        else:
            x = max(ax, bx) * pitch
            y0 = ay * pitch + 1 + offset
            occ[y0:y0 + width, x] = False

    for x, y in open_cells:
        carve(x, y)
    start_cell = open_cells[0]
    seen = {start_cell}
    stack = [start_cell]
    while stack:
        cx, cy = stack[-1]
        nbrs = [(cx + dx, cy + dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
                if 0 <= cx + dx < cols and 0 <= cy + dy < rows
                and not taken[cy + dy, cx + dx] and (cx + dx, cy + dy) not in seen]
        if not nbrs:
            stack.pop()
            continue
        nxt = nbrs[int(rng.integers(len(nbrs)))]
        open_wall((cx, cy), nxt)
        seen.add(nxt)
        stack.append(nxt)
    for x, y in open_cells:
        for nb in ((x + 1, y), (x, y + 1)):
            if nb[0] < cols and nb[1] < rows and not taken[nb[1], nb[0]] and rng.random() < loops:
                open_wall((x, y), nb)

    for bx, by in blocks:
        x0, y0 = bx * pitch + 1, by * pitch + 1
        size = room_span * pitch - 1
        occ[y0:y0 + size, x0:x0 + size] = False
        # one doorway to a neighbouring corridor cell
        edges = []
        for k in range(room_span):
            edges += [((bx + k, by), (bx + k, by - 1)), ((bx + k, by + room_span - 1), (bx + k, by + room_span)),
                      ((bx, by + k), (bx - 1, by + k)), ((bx + room_span - 1, by + k), (bx + room_span, by + k))]
        edges = [(a, b) for a, b in edges if 0 <= b[0] < cols and 0 <= b[1] < rows and not taken[b[1], b[0]]]
        a, b = edges[int(rng.integers(len(edges)))]
        open_wall(a, b, width=door, offset=(corridor - door) // 2)
        for _ in range(clutter):
            px = int(rng.integers(x0 + 2, x0 + size - 3))
            py = int(rng.integers(y0 + 2, y0 + size - 3))
            occ[py:py + 2, px:px + 2] = True
    _seal(occ)
    sx, sy = start_cell
    return _scene(occ, resolution, (sx * pitch + 1 + corridor // 2, sy * pitch + 1 + corridor // 2))


def corpus_names() -> list[str]:
    root = resources.files("oto") / "data"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".txt"))


def load_corpus(name: str) -> Scene:
    """Load a bundled scene; the ``.txt`` suffix is optional."""
    if not name.endswith(".txt"):
        name += ".txt"
    return load_scene((resources.files("oto") / "data" / name).read_text(encoding="utf-8"))
