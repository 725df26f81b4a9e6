"""Finite-lattice geometry: disks, annuli, boundaries, components, hole
filling, and the two graph metrics (restricted and zero-through).

Regions are plain ``frozenset``/``set`` of integer coordinate tuples; the
dimension is implicit in the tuples.  Infinite sets never appear: callers
pass explicit windows where an operation needs an ambient box.  For d=2 the
heavy operations (components, hole filling, shortest paths) have array fast
paths that are cross-checked against the generic set-based code in tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from collections import deque
from typing import Iterable, Iterator

import numpy as np
from numba import njit
from scipy import ndimage

Vertex = tuple[int, ...]

INF = math.inf

_CROSS2 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def l1(a: Vertex, b: Vertex) -> int:
    return sum(abs(x - y) for x, y in zip(a, b))


def norm1(a: Vertex) -> int:
    return sum(abs(x) for x in a)


def directions(d: int) -> list[Vertex]:
    """The 2d unit steps, axis-major: +e1, -e1, +e2, -e2, ..."""
    out = []
    for axis in range(d):
        for sign in (1, -1):
            step = [0] * d
            step[axis] = sign
            out.append(tuple(step))
    return out


def neighbors(v: Vertex) -> list[Vertex]:
    return [tuple(c + s for c, s in zip(v, step)) for step in directions(len(v))]


def set_distance(a: Iterable[Vertex], b: Iterable[Vertex]) -> int | float:
    """min L1 distance between two finite vertex sets (inf if either empty)."""
    a, b = list(a), list(b)
    if not a or not b:
        return INF
    if len(a) > len(b):
        a, b = b, a
    return min(min(l1(u, v) for v in b) for u in a)


@dataclass(frozen=True)
class Window:
    """Axis-aligned half-open box [lo, hi) used as an ambient region."""

    lo: Vertex
    hi: Vertex

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate window {self.lo}..{self.hi}")

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def contains(self, v: Vertex) -> bool:
        return all(a <= c < b for c, a, b in zip(v, self.lo, self.hi))

    def __iter__(self) -> Iterator[Vertex]:
        return iter(self.vertices())

    def vertices(self) -> list[Vertex]:
        grids = np.meshgrid(*(np.arange(a, b) for a, b in zip(self.lo, self.hi)), indexing="ij")
        stacked = np.stack([g.ravel() for g in grids], axis=1)
        return [tuple(int(c) for c in row) for row in stacked]

    def index(self, v: Vertex) -> int:
        idx = 0
        for c, a, n in zip(v, self.lo, self.shape):
            idx = idx * n + (c - a)
        return idx

    def vertex(self, idx: int) -> Vertex:
        coords = []
        for n in reversed(self.shape):
            coords.append(idx % n)
            idx //= n
        return tuple(c + a for c, a in zip(reversed(coords), self.lo))

    @classmethod
    def centered(cls, half: int, d: int = 2) -> "Window":
        return cls((-half,) * d, (half + 1,) * d)

    @classmethod
    def bounding(cls, points: Iterable[Vertex], margin: int = 0) -> "Window":
        pts = list(points)
        if not pts:
            raise ValueError("no points to bound")
        d = len(pts[0])
        lo = tuple(min(p[i] for p in pts) - margin for i in range(d))
        hi = tuple(max(p[i] for p in pts) + margin + 1 for i in range(d))
        return cls(lo, hi)

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_json(cls, obj: dict) -> "Window":
        return cls(tuple(obj["lo"]), tuple(obj["hi"]))


# ---------------------------------------------------------------------------
# region constructors


def disk(center: Vertex, r: int) -> set[Vertex]:
    """L1 ball {y : |y - center| <= r}; r must be a nonnegative integer."""
    if r < 0:
        raise ValueError("negative radius")
    return annulus(center, 0, r)


def annulus(center: Vertex, r: int, big_r: int) -> set[Vertex]:
    """{y : r <= |y - center| <= R}."""
    if r < 0 or big_r < r:
        raise ValueError(f"bad annulus radii {r}, {big_r}")
    d = len(center)
    out: set[Vertex] = set()

    def rec(prefix: tuple[int, ...], remaining: int):
        axis = len(prefix)
        if axis == d - 1:
            lo_mag = max(r - sum(abs(c) for c in prefix), 0)
            for mag in range(lo_mag, remaining + 1):
                out.add(prefix + (mag,))
                if mag:
                    out.add(prefix + (-mag,))
            return
        for c in range(-remaining, remaining + 1):
            rec(prefix + (c,), remaining - abs(c))

    rec((), big_r)
    return {tuple(c + o for c, o in zip(v, center)) for v in out}


def boundary(region: Iterable[Vertex]) -> set[Vertex]:
    """Inner boundary: vertices of the region adjacent to its complement."""
    reg = set(region)
    return {v for v in reg if any(w not in reg for w in neighbors(v))}


def outer_boundary(region: Iterable[Vertex]) -> set[Vertex]:
    """Vertices outside the region adjacent to it."""
    reg = set(region)
    out: set[Vertex] = set()
    for v in reg:
        for w in neighbors(v):
            if w not in reg:
                out.add(w)
    return out


# ---------------------------------------------------------------------------
# grid <-> set conversion (d=2 fast paths)


def region_to_grid(region: Iterable[Vertex], window: Window) -> np.ndarray:
    grid = np.zeros(window.shape, dtype=bool)
    pts = [v for v in region if window.contains(v)]
    if pts:
        arr = np.asarray(pts, dtype=np.int64) - np.asarray(window.lo, dtype=np.int64)
        grid[tuple(arr.T)] = True
    return grid


def grid_to_region(grid: np.ndarray, window: Window) -> set[Vertex]:
    coords = np.argwhere(grid)
    lo = np.asarray(window.lo, dtype=np.int64)
    return {tuple(map(int, row + lo)) for row in coords}


def stamp_disks(centers: Iterable[Vertex], r: int, window: Window) -> np.ndarray:
    """Boolean grid of the union of L1 balls D(c, r), clipped to the window.

    Vectorized per center: one precomputed diamond mask is OR-ed into a slice.
    """
    if window.d != 2:
        grid = np.zeros(window.shape, dtype=bool)
        for c in centers:
            for v in disk(c, r):
                if window.contains(v):
                    grid[tuple(x - a for x, a in zip(v, window.lo))] = True
        return grid
    side = 2 * r + 1
    ii, jj = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    mask = (np.abs(ii - r) + np.abs(jj - r)) <= r
    grid = np.zeros(window.shape, dtype=bool)
    w, h = window.shape
    for cx, cy in centers:
        x0 = cx - r - window.lo[0]
        y0 = cy - r - window.lo[1]
        sx0, sy0 = max(x0, 0), max(y0, 0)
        sx1, sy1 = min(x0 + side, w), min(y0 + side, h)
        if sx0 >= sx1 or sy0 >= sy1:
            continue
        grid[sx0:sx1, sy0:sy1] |= mask[sx0 - x0 : sx1 - x0, sy0 - y0 : sy1 - y0]
    return grid


# ---------------------------------------------------------------------------
# components / hole filling / diameter


def components(region: Iterable[Vertex]) -> list[set[Vertex]]:
    """Edge-connected components (L1 adjacency)."""
    reg = set(region)
    if not reg:
        return []
    d = len(next(iter(reg)))
    if d == 2 and len(reg) > 256:
        window = Window.bounding(reg)
        grid = region_to_grid(reg, window)
        labels, n = ndimage.label(grid, structure=_CROSS2)
        lo = np.asarray(window.lo, dtype=np.int64)
        out: list[set[Vertex]] = [set() for _ in range(n)]
        for row in np.argwhere(labels > 0):
            out[labels[tuple(row)] - 1].add(tuple(map(int, row + lo)))
        return out
    comps = []
    seen: set[Vertex] = set()
    for start in reg:
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        seen.add(start)
        while queue:
            v = queue.popleft()
            for w in neighbors(v):
                if w in reg and w not in seen:
                    seen.add(w)
                    comp.add(w)
                    queue.append(w)
        comps.append(comp)
    return comps


def fill_holes_grid(grid: np.ndarray) -> np.ndarray:
    """Grid variant of fill_holes (d=2): complement components not touching
    the grid border are filled.  Exact when the true region keeps a one-cell
    margin from the border; callers must inflate accordingly."""
    comp = ~grid
    labels, n = ndimage.label(comp, structure=_CROSS2)
    if n == 0:
        return grid.copy()
    border_labels = set()
    for sl in (labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]):
        border_labels.update(np.unique(sl[sl > 0]).tolist())
    return grid | (comp & ~np.isin(labels, sorted(border_labels)))


def fill_holes(region: Iterable[Vertex]) -> set[Vertex]:
    """Union of the region with all bounded components of its complement.

    Exact on Z^d: any bounded complement component lies inside the bounding
    box, so flood-filling the complement from a one-cell shell around the box
    identifies exactly the unbounded part.
    """
    reg = set(region)
    if not reg:
        return set()
    d = len(next(iter(reg)))
    window = Window.bounding(reg, margin=1)
    if d == 2:
        grid = region_to_grid(reg, window)
        comp = ~grid
        labels, n = ndimage.label(comp, structure=_CROSS2)
        border_labels = set()
        for sl in (labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]):
            border_labels.update(np.unique(sl[sl > 0]).tolist())
        hole = comp & ~np.isin(labels, sorted(border_labels))
        return reg | grid_to_region(hole, window)
    outside: set[Vertex] = set()
    start = window.lo
    queue = deque([start])
    outside.add(start)
    while queue:
        v = queue.popleft()
        for w in neighbors(v):
            if window.contains(w) and w not in reg and w not in outside:
                outside.add(w)
                queue.append(w)
    filled = set(reg)
    for v in window:
        if v not in reg and v not in outside:
            filled.add(v)
    return filled


def diameter(region: Iterable[Vertex]) -> int:
    """Max pairwise L1 distance; 0 for the empty set.

    Linear time: |u-v|_1 = max over sign vectors s of s.(u-v), so the
    diameter is the max over 2^(d-1) sign patterns of range(s.x).
    """
    pts = list(region)
    if not pts:
        return 0
    d = len(pts[0])
    arr = np.asarray(pts, dtype=np.int64)
    best = 0
    for bits in range(1 << (d - 1)):
        signs = np.ones(d, dtype=np.int64)
        for axis in range(d - 1):
            if bits >> axis & 1:
                signs[axis + 1] = -1
        proj = arr @ signs
        best = max(best, int(proj.max() - proj.min()))
    return best


def component_diameters(region: Iterable[Vertex]) -> list[tuple[int, int]]:
    """(size, diameter) per component; vectorized for d=2."""
    reg = set(region)
    if not reg:
        return []
    d = len(next(iter(reg)))
    if d != 2 or len(reg) <= 256:
        return [(len(c), diameter(c)) for c in components(reg)]
    window = Window.bounding(reg)
    grid = region_to_grid(reg, window)
    return component_diameters_grid(grid)


def component_diameters_grid(grid: np.ndarray) -> list[tuple[int, int]]:
    labels, n = ndimage.label(grid, structure=_CROSS2)
    if n == 0:
        return []
    coords = np.argwhere(labels > 0)
    lab = labels[tuple(coords.T)] - 1
    sizes = np.bincount(lab, minlength=n)
    out = []
    u = coords[:, 0] + coords[:, 1]
    v = coords[:, 0] - coords[:, 1]
    for proj in (u, v):
        hi = np.full(n, -(1 << 60), dtype=np.int64)
        lo = np.full(n, 1 << 60, dtype=np.int64)
        np.maximum.at(hi, lab, proj)
        np.minimum.at(lo, lab, proj)
        out.append(hi - lo)
    diams = np.maximum(out[0], out[1])
    return [(int(sizes[i]), int(diams[i])) for i in range(n)]


# ---------------------------------------------------------------------------
# graph metrics


@njit(cache=True)
def _bfs_grid(allowed, sx, sy):  # pragma: no cover - exercised via wrapper
    w, h = allowed.shape
    dist = np.full((w, h), -1, dtype=np.int32)
    if not allowed[sx, sy]:
        return dist
    queue = np.empty(w * h, dtype=np.int64)
    head = 0
    tail = 0
    dist[sx, sy] = 0
    queue[tail] = sx * h + sy
    tail += 1
    while head < tail:
        cur = queue[head]
        head += 1
        x = cur // h
        y = cur % h
        base = dist[x, y] + 1
        if x + 1 < w and allowed[x + 1, y] and dist[x + 1, y] < 0:
            dist[x + 1, y] = base
            queue[tail] = cur + h
            tail += 1
        if x > 0 and allowed[x - 1, y] and dist[x - 1, y] < 0:
            dist[x - 1, y] = base
            queue[tail] = cur - h
            tail += 1
        if y + 1 < h and allowed[x, y + 1] and dist[x, y + 1] < 0:
            dist[x, y + 1] = base
            queue[tail] = cur + 1
            tail += 1
        if y > 0 and allowed[x, y - 1] and dist[x, y - 1] < 0:
            dist[x, y - 1] = base
            queue[tail] = cur - 1
            tail += 1
    return dist


@njit(cache=True)
def _bfs01_grid(zero, sx, sy):  # pragma: no cover - exercised via wrapper
    # 0/1-weight shortest path on the full grid: an edge costs 0 iff either
    # endpoint is in the zero set.  Array-backed deque, push-front for 0-edges.
    w, h = zero.shape
    dist = np.full((w, h), -1, dtype=np.int32)
    cap = 8 * w * h + 4
    dq = np.empty(cap, dtype=np.int64)
    dd = np.empty(cap, dtype=np.int32)
    head = cap // 2
    tail = cap // 2
    dq[tail] = sx * h + sy
    dd[tail] = 0
    tail += 1
    while head < tail:
        cur = dq[head]
        cdist = dd[head]
        head += 1
        x = cur // h
        y = cur % h
        if dist[x, y] >= 0:
            continue
        dist[x, y] = cdist
        zsrc = zero[x, y]
        for k in range(4):
            if k == 0:
                nx, ny = x + 1, y
            elif k == 1:
                nx, ny = x - 1, y
            elif k == 2:
                nx, ny = x, y + 1
            else:
                nx, ny = x, y - 1
            if nx < 0 or nx >= w or ny < 0 or ny >= h:
                continue
            if dist[nx, ny] >= 0:
                continue
            cost = 0 if (zsrc or zero[nx, ny]) else 1
            node = nx * h + ny
            if cost == 0:
                head -= 1
                dq[head] = node
                dd[head] = cdist
            else:
                dq[tail] = node
                dd[tail] = cdist + 1
                tail += 1
    return dist


def _bfs_generic(start: Vertex, allowed: set[Vertex]) -> dict[Vertex, int]:
    if start not in allowed:
        return {}
    dist = {start: 0}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in neighbors(v):
            if w in allowed and w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def _bfs01_generic(start: Vertex, zero: set[Vertex], window: Window) -> dict[Vertex, int]:
    dist: dict[Vertex, int] = {}
    dq = deque([(start, 0)])
    while dq:
        v, dv = dq.popleft()
        if v in dist:
            continue
        dist[v] = dv
        vzero = v in zero
        for w in neighbors(v):
            if not window.contains(w) or w in dist:
                continue
            if vzero or w in zero:
                dq.appendleft((w, dv))
            else:
                dq.append((w, dv + 1))
    return dist


def distances_restricted(src: Vertex, region: Iterable[Vertex], window: Window | None = None) -> dict[Vertex, int]:
    """Graph distances from src within the region's induced subgraph."""
    reg = set(region)
    if window is not None:
        reg = {v for v in reg if window.contains(v)}
    if src not in reg:
        return {}
    d = len(src)
    if d == 2 and len(reg) > 512:
        win = Window.bounding(reg)
        grid = region_to_grid(reg, win)
        dist = _bfs_grid(grid.astype(np.uint8), src[0] - win.lo[0], src[1] - win.lo[1])
        lo = np.asarray(win.lo, dtype=np.int64)
        coords = np.argwhere(dist >= 0)
        vals = dist[tuple(coords.T)]
        return {tuple(map(int, c + lo)): int(v) for c, v in zip(coords, vals)}
    return _bfs_generic(src, reg)


def distance_restricted(y: Vertex, z: Vertex, region: Iterable[Vertex], window: Window | None = None) -> int | float:
    return distances_restricted(y, region, window).get(z, INF)


def distances_zero_through(src: Vertex, zero_region: Iterable[Vertex], window: Window) -> dict[Vertex, int]:
    """Zero-through distances from src: all window vertices usable, edges
    touching the zero region cost 0, all other edges cost 1."""
    if not window.contains(src):
        raise ValueError("source outside window")
    zero = {v for v in zero_region if window.contains(v)}
    if window.d == 2 and window.size > 512:
        grid = region_to_grid(zero, window)
        dist = _bfs01_grid(grid.astype(np.uint8), src[0] - window.lo[0], src[1] - window.lo[1])
        lo = np.asarray(window.lo, dtype=np.int64)
        coords = np.argwhere(dist >= 0)
        vals = dist[tuple(coords.T)]
        return {tuple(map(int, c + lo)): int(v) for c, v in zip(coords, vals)}
    return _bfs01_generic(src, zero, window)


def distance_zero_through(y: Vertex, z: Vertex, zero_region: Iterable[Vertex], window: Window) -> int | float:
    return distances_zero_through(y, zero_region, window).get(z, INF)


def graph_distance(y: Vertex, z: Vertex, mode: tuple[str, Iterable[Vertex]], window: Window) -> int | float:
    """Dispatcher matching the two-metric contract.

    mode = ("restricted", G): BFS within G (intersected with the window).
    mode = ("zero_through", G): 0/1-BFS over the window with G-edges free.
    """
    kind, region = mode
    if kind == "restricted":
        return distance_restricted(y, z, region, window)
    if kind == "zero_through":
        return distance_zero_through(y, z, region, window)
    raise ValueError(f"unknown distance mode {kind!r}")


# ---------------------------------------------------------------------------
# serialization


def region_to_json(region: Iterable[Vertex]) -> list[list[int]]:
    return [list(v) for v in sorted(region)]


def region_from_json(obj: Iterable[Iterable[int]]) -> set[Vertex]:
    return {tuple(int(c) for c in v) for v in obj}


def dump_region(region: Iterable[Vertex], path) -> None:
    with open(path, "w") as fh:
        json.dump(region_to_json(region), fh)


def load_region(path) -> set[Vertex]:
    with open(path) as fh:
        return region_from_json(json.load(fh))
