"""Seed clustering across scales and the protective regions built from it.

A scale sequence r_0 = 1 <= r_1 < r_2 < ... partitions a seed set into
levels: level k keeps the seeds of the level-k residual with no other
residual seed in the annulus {y : r_{k-1} <= |y - x| <= floor(r_k/3)}.
Around level-k seeds three families of L1 balls are stamped:

* protective cores  D-kind, radius floor(r_i/100),
* capture zones     C-kind, radius 100 * r_{i-1},
* outer capture     C+-kind, radius 300 * r_{i-1},

cumulated over levels i <= k.  [X] denotes hole-filling (adding bounded
complement components).  The checks in this module are exact: component
diameters of the cores stay below r_k, distances distorted by the capture
zones stay within the gamma factor of the free metric, blue growth stays
inside the filled capture zone, clustering is local and monotone under seed
subsets, and the halved joint regions of two seed sets obey the same
diameter law.

Regions are kept as exact disk lists; dense boolean grids are materialized
only when the extent is manageable, and the sparse route computes components
and diameters analytically (with an explicit safety condition under which
hole-filling provably neither merges components nor changes diameters).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from . import rng as rngmod
from .lattice import (
    Vertex,
    Window,
    component_diameters_grid,
    fill_holes,
    fill_holes_grid,
    l1,
    region_to_grid,
    stamp_disks,
    _bfs_grid,
    _bfs01_grid,
)

GAMMA_FACTOR = 10**12

_KIND_RADIUS = {
    "D": lambda sc, i: sc.r(i) // 100,
    "C": lambda sc, i: 100 * sc.r(i - 1),
    "Cplus": lambda sc, i: 300 * sc.r(i - 1),
}


@dataclass(frozen=True)
class ScaleSequence:
    """Radii r_0..r_K with r_0 = 1 <= r_1 < r_2 < ...  The gamma product
    gamma_k = prod_{i=1..k} (1 + 10^12 r_{i-1}/r_i) controls the distance
    distortion bounds; sequences with gamma < 2 are flagged faithful."""

    radii: tuple[int, ...]

    def __post_init__(self):
        r = self.radii
        if len(r) < 1 or r[0] != 1:
            raise ValueError("scale sequence must start at r_0 = 1")
        if any(int(x) != x or x < 1 for x in r):
            raise ValueError("radii must be positive integers")
        for i in range(1, len(r) - 1):
            if r[i + 1] <= r[i]:
                raise ValueError("radii must be strictly increasing from r_1")
        if len(r) >= 2 and r[1] < 1:
            raise ValueError("r_1 must be >= 1")

    @property
    def K(self) -> int:
        return len(self.radii) - 1

    def r(self, k: int) -> int:
        return self.radii[k]

    def gamma(self, k: int | None = None) -> Fraction:
        if k is None:
            k = self.K
        g = Fraction(1)
        for i in range(1, k + 1):
            g *= 1 + Fraction(GAMMA_FACTOR * self.radii[i - 1], self.radii[i])
        return g

    @property
    def faithful(self) -> bool:
        return self.gamma() < 2

    def to_json(self) -> dict:
        return {"radii": list(self.radii)}

    @classmethod
    def from_json(cls, obj: dict) -> "ScaleSequence":
        return cls(tuple(int(x) for x in obj["radii"]))


@dataclass
class SeedClustering:
    """levels[j] = A_{j+1}; residuals[j] = level-(j+1) residual before
    extraction (residuals[0] is the full seed set, residuals[K] what is left
    after level K).  exhausted: the final residual is empty."""

    scales: ScaleSequence
    levels: list[set[Vertex]]
    residuals: list[set[Vertex]]
    exhausted: bool

    def level(self, k: int) -> set[Vertex]:
        return self.levels[k - 1]

    def residual(self, k: int) -> set[Vertex]:
        return self.residuals[k - 1]

    def level_of(self, x: Vertex) -> int | None:
        for j, a in enumerate(self.levels):
            if x in a:
                return j + 1
        return None


def _annulus_blocked(pts: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """For each point, whether some other point sits in the [lo, hi] annulus."""
    m = len(pts)
    blocked = np.zeros(m, dtype=bool)
    if hi < lo or m < 2:
        return blocked
    chunk = max(1, 2_000_000 // max(m, 1))
    for s in range(0, m, chunk):
        block = pts[s : s + chunk]
        dist = np.abs(block[:, None, :] - pts[None, :, :]).sum(axis=2)
        hit = (dist >= lo) & (dist <= hi)
        blocked[s : s + chunk] = hit.any(axis=1)
    return blocked


def cluster_seeds(seeds: Iterable[Vertex], scales: ScaleSequence) -> SeedClustering:
    residual = sorted(set(seeds))
    levels: list[set[Vertex]] = []
    residuals: list[set[Vertex]] = [set(residual)]
    for k in range(1, scales.K + 1):
        lo = scales.r(k - 1)
        hi = scales.r(k) // 3
        if residual:
            pts = np.asarray(residual, dtype=np.int64)
            blocked = _annulus_blocked(pts, lo, hi)
            a_k = {residual[i] for i in np.nonzero(~blocked)[0]}
        else:
            a_k = set()
        levels.append(a_k)
        residual = [x for x in residual if x not in a_k]
        residuals.append(set(residual))
    return SeedClustering(scales, levels, residuals, exhausted=not residual)


# ---------------------------------------------------------------------------
# regions


@dataclass
class MultiscaleRegions:
    """Exact union-of-disks representation, one cumulative list per kind and
    level: disks('D', k) covers levels 1..k."""

    scales: ScaleSequence
    clustering: SeedClustering

    def disks(self, kind: str, k: int) -> list[tuple[Vertex, int]]:
        rad = _KIND_RADIUS[kind]
        out = []
        for i in range(1, k + 1):
            r = rad(self.scales, i)
            out.extend((c, r) for c in sorted(self.clustering.level(i)))
        return out

    def extent_window(self, kind: str, k: int, include: Iterable[Vertex] = (),
                      margin: int = 1) -> Window | None:
        pts = list(include)
        disks = self.disks(kind, k)
        if not disks and not pts:
            return None
        lo = [None, None]
        hi = [None, None]

        def feed(x, y, r):
            for ax, c in ((0, x), (1, y)):
                a, b = c - r, c + r
                if lo[ax] is None or a < lo[ax]:
                    lo[ax] = a
                if hi[ax] is None or b > hi[ax]:
                    hi[ax] = b

        for (x, y), r in disks:
            feed(x, y, r)
        for x, y in pts:
            feed(x, y, 0)
        return Window((lo[0] - margin, lo[1] - margin), (hi[0] + margin + 1, hi[1] + margin + 1))

    def grid(self, kind: str, k: int, window: Window | None = None,
             filled: bool = False, max_cells: int = 120_000_000) -> tuple[Window, np.ndarray]:
        if window is None:
            window = self.extent_window(kind, k)
            if window is None:
                window = Window((0, 0), (1, 1))
        if window.size > max_cells:
            raise ValueError(f"region grid would need {window.size} cells")
        g = np.zeros(window.shape, dtype=bool)
        for (c, r) in self.disks(kind, k):
            g |= stamp_disks([c], r, window)
        if filled:
            g = fill_holes_grid(g)
        return window, g

    def contains(self, kind: str, k: int, x: Vertex) -> bool:
        return any(l1(x, c) <= r for c, r in self.disks(kind, k))


def build_regions(clustering: SeedClustering, scales: ScaleSequence | None = None) -> MultiscaleRegions:
    return MultiscaleRegions(scales or clustering.scales, clustering)


# ---------------------------------------------------------------------------
# sparse disk-union analytics


def _disk_components(disks: Sequence[tuple[Vertex, int]]):
    """Union-find over disks: linked when the point sets touch or are
    lattice-adjacent (centre gap <= R_i + R_j + 1).  Also returns the minimal
    centre gap between distinct components (None when fewer than 2)."""
    m = len(disks)
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    gaps = []
    for i in range(m):
        (ci, ri) = disks[i]
        for j in range(i + 1, m):
            (cj, rj) = disks[j]
            g = l1(ci, cj) - ri - rj
            if g <= 1:
                pa, pb = find(i), find(j)
                if pa != pb:
                    parent[pa] = pb
            else:
                gaps.append((g, i, j))
    comps: dict[int, list[int]] = {}
    for i in range(m):
        comps.setdefault(find(i), []).append(i)
    min_cross_gap = None
    for g, i, j in gaps:
        if find(i) != find(j):
            if min_cross_gap is None or g < min_cross_gap:
                min_cross_gap = g
    return list(comps.values()), min_cross_gap


def _component_diameter(disks: Sequence[tuple[Vertex, int]], members: Sequence[int]) -> int:
    best = 0
    for a in range(len(members)):
        ca, ra = disks[members[a]]
        if 2 * ra > best:
            best = 2 * ra
        for b in range(a + 1, len(members)):
            cb, rb = disks[members[b]]
            v = l1(ca, cb) + ra + rb
            if v > best:
                best = v
    return best


@dataclass
class DiameterRow:
    k: int
    r_k: int
    n_disks: int
    diam: int
    diam_filled: int
    route: str
    passed: bool


def check_diameters(regions: MultiscaleRegions, dense_cell_limit: int = 4_000_000) -> list[DiameterRow]:
    """Max component diameter of the core region and its filled variant per
    level, checked against r_k.

    Sparse route: components of a disk union are the union-find closure over
    touching-or-adjacent disks, and the component diameter equals
    max(|c_i - c_j| + R_i + R_j).  Hole-filling can only change anything by
    welding distinct components around a shared pocket, which requires two
    components at centre gap <= 2; when every cross-component gap is >= 3
    every pocket is sealed by a single component and filling preserves both
    the components and their diameters, so the sparse answer is exact.
    """
    sc = regions.scales
    out = []
    for k in range(1, sc.K + 1):
        disks = regions.disks("D", k)
        if not disks:
            out.append(DiameterRow(k, sc.r(k), 0, 0, 0, "empty", True))
            continue
        comps, min_gap = _disk_components(disks)
        sparse_safe = min_gap is None or min_gap >= 3
        win = regions.extent_window("D", k)
        if sparse_safe:
            diam = max(_component_diameter(disks, c) for c in comps)
            row = DiameterRow(k, sc.r(k), len(disks), diam, diam, "sparse", diam <= sc.r(k))
        elif win.size <= dense_cell_limit:
            _, g = regions.grid("D", k, window=win)
            diam = max((d for _, d in component_diameters_grid(g)), default=0)
            gf = fill_holes_grid(g)
            diam_f = max((d for _, d in component_diameters_grid(gf)), default=0)
            row = DiameterRow(k, sc.r(k), len(disks), diam, diam_f, "dense",
                              diam <= sc.r(k) and diam_f <= sc.r(k))
        else:
            raise ValueError("fill safety unprovable sparsely and extent too large for dense route")
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# distance distortion


@dataclass
class DistortionReport:
    k: int
    gamma: Fraction
    rows: list[dict]
    ok: bool
    worst_lower: Fraction | None   # min zero-through / |x-y|
    worst_upper: Fraction | None   # max restricted / |x-y|


def check_distance_distortion(regions: MultiscaleRegions, k: int,
                              pairs: Sequence[tuple[Vertex, Vertex]]) -> DistortionReport:
    """Exact three-part chain per pair (x, y) outside the filled core:

        gamma_k^{-1} |x-y|  <=  |x-y| through the filled outer capture zone
                            <=  |x-y| avoiding it
                            <=  gamma_k |x-y|

    where travel through the filled zone is free (0-weight edges touching
    it) and the avoiding metric forbids it.  Pairs inside the filled core
    are an error.
    """
    sc = regions.scales
    gamma = sc.gamma(k)
    pair_pts = [p for xy in pairs for p in xy]

    dwin = regions.extent_window("D", k, include=pair_pts)
    _, dgrid = regions.grid("D", k, window=dwin, filled=True)
    cwin = regions.extent_window("Cplus", k, include=pair_pts)
    _, cgrid = regions.grid("Cplus", k, window=cwin, filled=True)
    free = ~cgrid

    def in_core(p):
        return dgrid[p[0] - dwin.lo[0], p[1] - dwin.lo[1]]

    rows = []
    worst_lower = None
    worst_upper = None
    ok = True
    for x, y in pairs:
        if in_core(x) or in_core(y):
            raise ValueError(f"pair {x}, {y} meets the filled core region")
        base = l1(x, y)
        dz_grid = _bfs01_grid(cgrid, x[0] - cwin.lo[0], x[1] - cwin.lo[1])
        dz = int(dz_grid[y[0] - cwin.lo[0], y[1] - cwin.lo[1]])
        dr_grid = _bfs_grid(free.astype(np.uint8), x[0] - cwin.lo[0], x[1] - cwin.lo[1])
        drv = int(dr_grid[y[0] - cwin.lo[0], y[1] - cwin.lo[1]])
        dr = math.inf if drv < 0 else drv
        lower_ok = Fraction(dz) * gamma >= base
        middle_ok = dz <= dr
        upper_ok = dr != math.inf and Fraction(int(dr)) <= gamma * base
        rows.append({
            "x": x, "y": y, "l1": base, "zero_through": dz, "restricted": dr,
            "lower_ok": lower_ok, "middle_ok": middle_ok, "upper_ok": upper_ok,
        })
        ok = ok and lower_ok and middle_ok and upper_ok
        if base > 0:
            rl = Fraction(dz, base)
            if worst_lower is None or rl < worst_lower:
                worst_lower = rl
            if dr != math.inf:
                ru = Fraction(int(dr), base)
                if worst_upper is None or ru > worst_upper:
                    worst_upper = ru
    return DistortionReport(k, gamma, rows, ok, worst_lower, worst_upper)


def sample_distortion_pairs(regions: MultiscaleRegions, k: int, window: Window,
                            n_pairs: int, master_seed: int,
                            clearance: int = 2) -> list[tuple[Vertex, Vertex]]:
    """Admissible pairs: outside the filled core, at L1 distance >=
    ``clearance`` from the filled outer capture zone, inside the window."""
    gen = rngmod.philox(master_seed, 11)
    dwin = regions.extent_window("D", k, include=[window.lo, (window.hi[0] - 1, window.hi[1] - 1)])
    _, dgrid = regions.grid("D", k, window=dwin, filled=True)
    cwin = regions.extent_window("Cplus", k, include=[window.lo, (window.hi[0] - 1, window.hi[1] - 1)])
    _, cgrid = regions.grid("Cplus", k, window=cwin, filled=True)
    if clearance > 1 and cgrid.any():
        banned = ndimage.binary_dilation(
            cgrid, structure=ndimage.generate_binary_structure(2, 1),
            iterations=clearance - 1)
    else:
        banned = cgrid

    def admissible(p):
        if dgrid[p[0] - dwin.lo[0], p[1] - dwin.lo[1]]:
            return False
        return not banned[p[0] - cwin.lo[0], p[1] - cwin.lo[1]]

    pairs = []
    attempts = 0
    while len(pairs) < n_pairs and attempts < 1000 * n_pairs:
        attempts += 1
        xs = gen.integers(window.lo[0], window.hi[0], size=4)
        x = (int(xs[0]), int(xs[1]))
        y = (int(xs[2]), int(xs[3]))
        if x == y or not admissible(x) or not admissible(y):
            continue
        pairs.append((x, y))
    if len(pairs) < n_pairs:
        raise RuntimeError("could not sample enough admissible pairs")
    return pairs


# ---------------------------------------------------------------------------
# encapsulation checks


def _rim_distance(v: Vertex, window: Window) -> int:
    return min(min(c - a, b - 1 - c) for c, a, b in zip(v, window.lo, window.hi))


def check_encapsulation_hypotheses(V: Window, clustering: SeedClustering,
                                   regions: MultiscaleRegions,
                                   origin: Vertex = (0, 0),
                                   outcome=None) -> dict:
    """Exact evaluation of the capture theorem's hypotheses: (2) clustering
    exhausts the seeds, (3) the filled core avoids the boundary, the window
    complement, and the origin.  (1), boundary all red in the limit, is
    evaluated only when an outcome is supplied."""
    sc = regions.scales
    cond3 = True
    any_disks = False
    for k in range(1, sc.K + 1):
        r = sc.r(k) // 100
        for c in sorted(clustering.level(k)):
            any_disks = True
            if not V.contains(c) or _rim_distance(c, V) <= r:
                cond3 = False
    if cond3 and any_disks:
        _, g = regions.grid("D", sc.K, window=V, filled=True)
        if V.contains(origin) and g[origin[0] - V.lo[0], origin[1] - V.lo[1]]:
            cond3 = False
    cond1 = None
    if outcome is not None:
        cond1 = True
        for v in V.vertices():
            if _rim_distance(v, V) == 0 and outcome.colour(v) != "red":
                cond1 = False
                break
    return {"cond1": cond1, "cond2": clustering.exhausted, "cond3": cond3}


def verify_containment(outcome, regions: MultiscaleRegions, V: Window):
    """Every blue vertex must lie in the filled capture zone (or outside V).
    Returns (ok, witness)."""
    sc = regions.scales
    blue = [v for v in V.vertices()
            if outcome.colour(v) == "blue"] if outcome is not None else []
    if not blue:
        return True, None
    disks = regions.disks("C", sc.K)
    corners = [(V.lo[0], V.lo[1]), (V.lo[0], V.hi[1] - 1),
               (V.hi[0] - 1, V.lo[1]), (V.hi[0] - 1, V.hi[1] - 1)]
    for c, r in disks:
        if all(l1(c, q) <= r for q in corners):
            return True, None  # one capture disk swallows the whole window
    win = regions.extent_window("C", sc.K, include=[corner for corner in corners])
    _, g = regions.grid("C", sc.K, window=win, filled=True)
    for v in blue:
        if not g[v[0] - win.lo[0], v[1] - win.lo[1]]:
            return False, v
    return True, None


# ---------------------------------------------------------------------------
# locality and monotonicity


def protected_ball(X: Iterable[Vertex], k: int, scales: ScaleSequence) -> tuple[set[Vertex], int]:
    """The determining neighbourhood of X for level-k membership: radius
    ceil(r_{k-1}/2) around X."""
    radius = -((-scales.r(k - 1)) // 2)
    xs = list(X)
    return set(xs), radius


def seed_level_locality(seeds_a: Iterable[Vertex], seeds_b: Iterable[Vertex],
                        X: Iterable[Vertex], k: int, scales: ScaleSequence) -> dict:
    """Level-k residual membership on X depends only on seeds within
    ceil(r_{k-1}/2) of X.  Returns whether the inputs agree there and whether
    the memberships match (the check is the implication)."""
    xs, radius = protected_ball(X, k, scales)
    sa, sb = set(seeds_a), set(seeds_b)

    def inside(p):
        return any(l1(p, x) <= radius for x in xs)

    agree = {p for p in sa if inside(p)} == {p for p in sb if inside(p)}
    ca = cluster_seeds(sa, scales)
    cb = cluster_seeds(sb, scales)
    ma = {x for x in xs if x in ca.residual(k)}
    mb = {x for x in xs if x in cb.residual(k)}
    return {"agree_inside": agree, "match": ma == mb,
            "ok": (not agree) or ma == mb}


def monotonicity_check(seeds_sub: Iterable[Vertex], seeds: Iterable[Vertex],
                       scales: ScaleSequence) -> dict:
    """Subset seeds give subset residuals at every level; when both
    clusterings exhaust, every seed's level can only rise with more seeds,
    hence all three region kinds are nested."""
    sub, full = set(seeds_sub), set(seeds)
    if not sub <= full:
        raise ValueError("first argument must be a subset of the second")
    ca, cb = cluster_seeds(sub, scales), cluster_seeds(full, scales)
    residuals_ok = all(ca.residual(k) <= cb.residual(k)
                       for k in range(1, scales.K + 2))
    levels_ok = None
    if ca.exhausted and cb.exhausted:
        levels_ok = all(
            (ca.level_of(x) or 0) <= (cb.level_of(x) or 0) for x in sub
        )
    return {"residuals_ok": residuals_ok, "levels_ok": levels_ok,
            "regions_ok": levels_ok}


# ---------------------------------------------------------------------------
# coarsening and joint regions


def coarsen(v: Vertex) -> Vertex:
    return tuple(c // 2 for c in v)


def coarsen_region(region: Iterable[Vertex]) -> set[Vertex]:
    return {coarsen(v) for v in region}


def joint_region(regions_fine: MultiscaleRegions, regions_coarse: MultiscaleRegions,
                 k: int, max_cells: int = 40_000_000) -> set[Vertex]:
    """The level-k joint set: halved fine cores united with coarse cores."""
    fw = regions_fine.extent_window("D", k)
    pts: set[Vertex] = set()
    if fw is not None:
        win, g = regions_fine.grid("D", k, max_cells=max_cells)
        for i, j in np.argwhere(g):
            pts.add(coarsen((int(i) + win.lo[0], int(j) + win.lo[1])))
    cw = regions_coarse.extent_window("D", k)
    if cw is not None:
        win, g = regions_coarse.grid("D", k, max_cells=max_cells)
        for i, j in np.argwhere(g):
            pts.add((int(i) + win.lo[0], int(j) + win.lo[1]))
    return pts


def joint_diameter_report(regions_fine, regions_coarse) -> list[dict]:
    sc = regions_fine.scales
    rows = []
    for k in range(1, sc.K + 1):
        f = joint_region(regions_fine, regions_coarse, k)
        if f:
            diams = [d for _, d in _component_rows(f)]
            diam = max(diams)
        else:
            diam = 0
        rows.append({"k": k, "r_k": sc.r(k), "diam": diam, "passed": diam <= sc.r(k)})
    return rows


def _component_rows(region: set[Vertex]):
    if not region:
        return []
    win = Window.bounding(region, margin=1)
    return component_diameters_grid(region_to_grid(region, win))


def largest_component_stat(joint: set[Vertex], x: Vertex, r: int) -> int:
    """Diameter of the largest component of the filled joint set that meets
    D(x, r); 0 when none does."""
    filled = fill_holes(joint)
    if not filled:
        return 0
    best = 0
    from .lattice import components as _components, diameter as _diam

    for comp in _components(filled):
        if any(l1(p, x) <= r for p in comp):
            best = max(best, _diam(comp))
    return best


# ---------------------------------------------------------------------------
# coupled-trace predicate


def pair_interaction_check(fine_outcome, coarse_outcome, shift: Fraction,
                           fine_seeds: set[Vertex]) -> dict:
    """Trace containment for a coupled pair of runs at lattice scales L and
    2L: whenever the coarse run colours v red at time t, all four fine
    preimages of v must be fine seeds or red by t + shift.  Reports the
    first violation in coarse-time order."""
    fw = fine_outcome.window
    events = []
    for idx, t in enumerate(coarse_outcome.times_num):
        if t is None or coarse_outcome.colours[idx] != 0:
            continue
        events.append((Fraction(int(t), coarse_outcome.denom), coarse_outcome.window.vertex(idx)))
    events.sort()
    checked = 0
    for t2, v in events:
        (X, Y) = v
        for u in ((2 * X, 2 * Y), (2 * X + 1, 2 * Y), (2 * X, 2 * Y + 1), (2 * X + 1, 2 * Y + 1)):
            if not fw.contains(u):
                continue
            checked += 1
            if u in fine_seeds:
                continue
            cu = fine_outcome.colour(u)
            tu = fine_outcome.time(u)
            if cu == "red" and tu is not None and tu <= t2 + shift:
                continue
            return {"ok": False, "first_violation": {"t": t2, "coarse": v, "fine": u},
                    "checked": checked}
    return {"ok": True, "first_violation": None, "checked": checked}


# ---------------------------------------------------------------------------
# random seeds and the level-2 density statistic


def bernoulli_seeds(window: Window, p: float, master_seed: int) -> set[Vertex]:
    gen = rngmod.philox(master_seed, 5)
    mask = gen.random(window.size) < p
    return {window.vertex(int(i)) for i in np.nonzero(mask)[0]}


def residual2_rate(p: float, r1: int, side: int, master_seed: int) -> dict:
    """Empirical probability that a site stays clustered past level 1 under
    i.i.d. Bernoulli(p) seeds: a seed with another seed within floor(r1/3).
    Counted on the interior (full-disk visibility), one big square sample."""
    iso = r1 // 3
    gen = rngmod.philox(master_seed, 6)
    grid = gen.random((side, side)) < p
    span = 2 * iso + 1
    ii, jj = np.meshgrid(np.arange(span), np.arange(span), indexing="ij")
    kernel = ((np.abs(ii - iso) + np.abs(jj - iso)) <= iso).astype(np.int32)
    counts = ndimage.convolve(grid.astype(np.int32), kernel, mode="constant", cval=0)
    resid2 = grid & (counts >= 2)
    interior = (slice(iso, side - iso),) * 2
    n_sites = (side - 2 * iso) ** 2
    hits = int(resid2[interior].sum())
    rate = hits / n_sites
    return {"rate": rate, "sites": n_sites, "hits": hits,
            "bound": (r1 * p) ** 2, "seed_rate": float(grid[interior].mean())}
