import heapq
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spreadlab import lattice as lat

# ---------------------------------------------------------------------------
# oracles


def brute_ball(center, r):
    d = len(center)
    out = set()
    for delta in itertools.product(range(-r, r + 1), repeat=d):
        if sum(abs(c) for c in delta) <= r:
            out.add(tuple(c + o for c, o in zip(delta, center)))
    return out


def brute_annulus(center, r, R):
    return {v for v in brute_ball(center, R) if lat.l1(v, center) >= r}


def brute_fill(region):
    region = set(region)
    if not region:
        return set()
    win = lat.Window.bounding(region, margin=1)
    outside = set()
    stack = [win.lo]
    outside.add(win.lo)
    while stack:
        v = stack.pop()
        for w in lat.neighbors(v):
            if win.contains(w) and w not in region and w not in outside:
                outside.add(w)
                stack.append(w)
    return region | {v for v in win if v not in region and v not in outside}


def brute_components(region):
    region = set(region)
    comps = []
    while region:
        start = next(iter(region))
        comp = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in lat.neighbors(v):
                if w in region and w not in comp:
                    comp.add(w)
                    stack.append(w)
        comps.append(comp)
        region -= comp
    return comps


def brute_diameter(region):
    pts = list(region)
    if not pts:
        return 0
    return max(lat.l1(a, b) for a in pts for b in pts)


def dijkstra_zero_through(src, zero, window):
    dist = {src: 0}
    heap = [(0, src)]
    done = set()
    while heap:
        dv, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for w in lat.neighbors(v):
            if not window.contains(w):
                continue
            cost = 0 if (v in zero or w in zero) else 1
            nd = dv + cost
            if nd < dist.get(w, math.inf):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


# ---------------------------------------------------------------------------
# constructors

points2 = st.tuples(st.integers(-8, 8), st.integers(-8, 8))


def test_disk_examples():
    assert lat.disk((0, 0), 0) == {(0, 0)}
    assert lat.disk((0, 0), 1) == {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}
    r = 3
    assert len(lat.disk((0, 0), r)) == 2 * r * r + 2 * r + 1
    assert len(lat.disk((0, 0), 4)) == len(brute_ball((0, 0), 4))


def test_annulus_examples():
    assert lat.annulus((0, 0), 0, 0) == {(0, 0)}
    assert len(lat.annulus((0, 0), 1, 1)) == 4
    assert len(lat.annulus((0, 0), 2, 3)) == 20
    with pytest.raises(ValueError):
        lat.annulus((0, 0), 3, 2)


@given(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), st.integers(0, 5), st.integers(0, 5))
def test_annulus_matches_brute(center, r, extra):
    R = r + extra
    assert lat.annulus(center, r, R) == brute_annulus(center, r, R)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_disk_other_dims(d):
    center = (0,) * d
    assert lat.disk(center, 2) == brute_ball(center, 2)


def test_boundaries():
    assert lat.boundary({(0, 0)}) == {(0, 0)}
    assert lat.outer_boundary({(0, 0)}) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    d2 = lat.disk((0, 0), 2)
    assert lat.boundary(d2) == {v for v in d2 if lat.norm1(v) == 2}
    assert lat.outer_boundary(d2) == lat.annulus((0, 0), 3, 3)


# ---------------------------------------------------------------------------
# fill / components / diameter

region2 = st.sets(points2, max_size=40)


@given(region2)
@settings(max_examples=150)
def test_fill_holes_matches_brute(region):
    assert lat.fill_holes(region) == brute_fill(region)


def test_fill_holes_examples():
    assert lat.fill_holes(set()) == set()
    ring = lat.boundary(lat.disk((0, 0), 2))
    assert lat.fill_holes(ring) == lat.disk((0, 0), 2)
    convex = lat.disk((1, 1), 3)
    assert lat.fill_holes(convex) == convex


@given(region2)
@settings(max_examples=100)
def test_fill_holes_idempotent_and_monotone(region):
    filled = lat.fill_holes(region)
    assert region <= filled
    assert lat.fill_holes(filled) == filled
    assert lat.diameter(filled) <= lat.diameter(region) or not region
    # equality in fact: filling adds no vertex outside the original hull
    assert lat.diameter(filled) == lat.diameter(region)


def test_fill_holes_large_grid_path():
    # force the array fast path with a big hollow square
    side = 60
    sq = {(x, y) for x in range(side) for y in range(side)}
    ring = sq - {(x, y) for x in range(1, side - 1) for y in range(1, side - 1)}
    assert lat.fill_holes(ring) == sq


@given(region2)
@settings(max_examples=100)
def test_components_match_brute(region):
    got = sorted(map(sorted, lat.components(region)))
    want = sorted(map(sorted, brute_components(region)))
    assert got == want


def test_components_fast_path_matches_generic():
    rng = np.random.default_rng(0)
    pts = {(int(x), int(y)) for x, y in rng.integers(-20, 20, size=(600, 2))}
    got = sorted(map(sorted, lat.components(pts)))
    want = sorted(map(sorted, brute_components(pts)))
    assert got == want


@given(st.sets(points2, max_size=25))
@settings(max_examples=100)
def test_diameter_matches_brute(region):
    assert lat.diameter(region) == brute_diameter(region)


@pytest.mark.parametrize("d", [1, 3])
def test_diameter_other_dims(d):
    rng = np.random.default_rng(d)
    pts = {tuple(map(int, row)) for row in rng.integers(-6, 6, size=(30, d))}
    assert lat.diameter(pts) == brute_diameter(pts)


def test_diameter_conventions():
    assert lat.diameter(set()) == 0
    assert lat.diameter(lat.disk((3, -1), 4)) == 8


def test_component_diameters_grid_matches_setwise():
    rng = np.random.default_rng(5)
    pts = {(int(x), int(y)) for x, y in rng.integers(-25, 25, size=(900, 2))}
    fast = sorted(lat.component_diameters(pts))
    slow = sorted((len(c), brute_diameter(c)) for c in brute_components(pts))
    assert fast == slow


# ---------------------------------------------------------------------------
# distances


def random_case(seed, halfwidth=5, p=0.3):
    r = np.random.default_rng(seed)
    window = lat.Window.centered(halfwidth)
    cells = window.vertices()
    zero = {v for v in cells if r.random() < p}
    y, z = [cells[i] for i in r.choice(len(cells), size=2, replace=False)]
    return window, zero, y, z


@pytest.mark.parametrize("seed", range(25))
def test_zero_through_matches_dijkstra(seed):
    window, zero, y, z = random_case(seed)
    oracle = dijkstra_zero_through(y, zero, window)
    got = lat.distances_zero_through(y, zero, window)
    assert got == oracle


@pytest.mark.parametrize("seed", range(25))
def test_restricted_matches_bfs_oracle(seed):
    window, obst, y, z = random_case(seed, p=0.25)
    allowed = set(window.vertices()) - obst
    # plain Dijkstra with unit weights restricted to allowed vertices
    oracle = {}
    if y in allowed:
        oracle = {y: 0}
        frontier = [y]
        while frontier:
            nxt = []
            for v in frontier:
                for w in lat.neighbors(v):
                    if w in allowed and w not in oracle:
                        oracle[w] = oracle[v] + 1
                        nxt.append(w)
            frontier = nxt
    got = lat.distances_restricted(y, allowed)
    assert got == oracle


def test_grid_fast_paths_match_generic():
    window = lat.Window.centered(20)
    r = np.random.default_rng(7)
    zero = {(int(x), int(y)) for x, y in r.integers(-20, 20, size=(300, 2))}
    src = (0, 0)
    fast = lat.distances_zero_through(src, zero, window)
    slow = lat._bfs01_generic(src, {v for v in zero if window.contains(v)}, window)
    assert fast == slow
    allowed = set(window.vertices()) - zero
    if src in allowed:
        fast_r = lat.distances_restricted(src, allowed)
        slow_r = lat._bfs_generic(src, allowed)
        assert fast_r == slow_r


def test_graph_distance_contract():
    window = lat.Window.centered(6)
    g = {(x, 0) for x in range(-3, 4)}
    assert lat.graph_distance((0, 0), (0, 0), ("restricted", window.vertices()), window) == 0
    assert lat.graph_distance((-3, 0), (3, 0), ("restricted", g), window) == 6
    # line fully covered by the zero set: endpoints adjacent to it travel free
    assert lat.graph_distance((-4, 0), (4, 0), ("zero_through", g), window) == 0
    assert lat.graph_distance((-3, 1), (3, 1), ("zero_through", g), window) == 0
    # one plain step on each side of the free segment
    assert lat.graph_distance((-3, 2), (3, 2), ("zero_through", g), window) == 2
    # unreachable under restricted mode -> inf
    assert lat.graph_distance((0, 0), (5, 5), ("restricted", g | {(5, 5)}), window) == math.inf


@pytest.mark.parametrize("seed", range(10))
def test_metric_axioms_and_ordering(seed):
    window, zero, y, z = random_case(seed, halfwidth=6, p=0.2)
    dz = lat.distances_zero_through(y, zero, window)
    dz_back = lat.distances_zero_through(z, zero, window)
    assert dz.get(z, math.inf) == dz_back.get(y, math.inf)
    free = set(window.vertices()) - zero
    dr = lat.distances_restricted(y, free)
    # chain: zero-through <= restricted-to-complement wherever both defined
    for v, dv in dr.items():
        assert dz[v] <= dv
    # triangle inequality for the zero-through metric through a random w
    cells = window.vertices()
    r = np.random.default_rng(seed + 1000)
    for _ in range(20):
        w = cells[r.integers(len(cells))]
        dw = lat.distances_zero_through(w, zero, window)
        assert dz.get(z, math.inf) <= dz.get(w, math.inf) + dw.get(z, math.inf)


def test_stamp_disks_matches_union():
    window = lat.Window.centered(15)
    centers = [(0, 0), (4, 5), (-10, 2), (14, 14), (-20, 0)]
    grid = lat.stamp_disks(centers, 3, window)
    want = set()
    for c in centers:
        want |= {v for v in lat.disk(c, 3) if window.contains(v)}
    assert lat.grid_to_region(grid, window) == want


def test_window_indexing_roundtrip():
    window = lat.Window((-3, 2, 0), (1, 5, 4))
    for i, v in enumerate(window.vertices()):
        assert window.index(v) == i
        assert window.vertex(i) == v
    assert window.size == len(window.vertices())


def test_region_json_roundtrip(tmp_path):
    region = lat.disk((2, -3), 2) | {(9, 9)}
    path = tmp_path / "r.json"
    lat.dump_region(region, path)
    assert lat.load_region(path) == region
    w = lat.Window.centered(4)
    assert lat.Window.from_json(w.to_json()) == w


def test_set_distance():
    assert lat.set_distance([], [(0, 0)]) == math.inf
    assert lat.set_distance([(0, 0)], [(3, 4)]) == 7
    assert lat.set_distance(lat.disk((0, 0), 1), lat.disk((5, 0), 1)) == 3
