"""Two-colour competing growth engine on finite pieces of Z^d.

Model: every directed edge (u, v) between adjacent vertices carries a red
clock X_R(u,v) in [0, s] (s = the red time unit), a blue clock
X_B(u,v) in [0, kappa(u,v)*s], and a speed ratio kappa(u,v) >= 1.  Vertices
activate from sources (explicit activation times) and then assign colours to
uncoloured neighbours when their clocks fire:

* a red vertex coloured at time t assigns at t + X_R(u,v);
* a blue vertex assigns at t + X_B(u,v): the assignment is blue when the
  blue clock fired at its maximum kappa*s ("full firing"), red otherwise
  (the infection tunnels through the slow vertex);
* a vertex in the seed set always turns blue when assigned;
* when several assignments land at the same instant, blue wins if any of
  them is blue;
* source activations behave like red assignments (a seed source vertex
  still turns blue).

Zero-delay assignments cascade within a single time instant; instances must
not contain directed cycles whose edges all have min(X_R, X_B) = 0, and
validation computes a topological order of the zero-min subgraph that the
engine uses to finalize simultaneous candidates consistently.

All arithmetic is exact: public values are fractions, internally rescaled to
a common integer grain.  A numba kernel handles instances whose time values
fit comfortably in int64; a pure-python twin (same algorithm, arbitrary
precision) covers the rest and serves as an internal cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from heapq import heappush, heappop, heapify
from typing import Iterable, Mapping

import numpy as np
from numba import njit

from .lattice import Window, Vertex, directions
from . import rng as rngmod

RED = 0
BLUE = 1
_REDF = 1
_BLUEF = 2

_INT64_SAFE = 1 << 62


class ValidationError(ValueError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected exact number, got {type(x)}")


def _frac_str(x: Fraction) -> str:
    return str(x)


@dataclass(frozen=True)
class SSPInstance:
    """Exact dict-backed instance; edges are directed pairs of vertices.

    ``active`` restricts the vertex set to a subset of the window (None =
    whole window).  Clock maps must cover every directed edge between active
    vertices; ``kappa`` and the clocks may be given as a single Fraction to
    mean a constant map.
    """

    window: Window
    seeds: frozenset[Vertex]
    sources: Mapping[Vertex, Fraction]
    red: Mapping[tuple[Vertex, Vertex], Fraction] | Fraction
    blue: Mapping[tuple[Vertex, Vertex], Fraction] | Fraction
    kappa: Mapping[tuple[Vertex, Vertex], Fraction] | Fraction
    red_unit: Fraction = Fraction(1)
    active: frozenset[Vertex] | None = None
    # sources normally live off the seed set; the one sanctioned exception is
    # an origin-style source on a seed, which activates BLUE
    allow_blue_sources: bool = False

    @property
    def d(self) -> int:
        return self.window.d

    def vertices(self) -> list[Vertex]:
        if self.active is None:
            return self.window.vertices()
        return [v for v in self.window.vertices() if v in self.active]

    def edge_value(self, table, u: Vertex, v: Vertex) -> Fraction:
        if isinstance(table, (Fraction, int)):
            return _frac(table)
        return _frac(table[(u, v)])

    def compile(self) -> "CompiledInstance":
        return compile_instance(self)


@dataclass
class CompiledInstance:
    """Array instance on an integer time grain (denominator ``denom``).

    Layout: flat vertex index over the window; per-vertex out-edge arrays in
    axis-major direction order (+e1, -e1, +e2, -e2, ...).  ``blue_full`` holds
    kappa*s per edge (the full-firing threshold) on the same grain.
    """

    window: Window
    nbr: np.ndarray        # int32 (n, 2d), -1 where absent/inactive
    red: np.ndarray        # int64 (n, 2d)
    blue: np.ndarray       # int64 (n, 2d)
    blue_full: np.ndarray  # int64 (n, 2d)
    seeds: np.ndarray      # uint8 (n,)
    source: np.ndarray     # int64 (n,), -1 = no source
    active: np.ndarray     # uint8 (n,)
    denom: int
    red_unit_num: int
    zorder: np.ndarray | None = None  # int32 (n,), filled by validate()
    allow_blue_sources: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.seeds)

    @property
    def d(self) -> int:
        return self.window.d

    def vertex(self, idx: int) -> Vertex:
        return self.window.vertex(idx)


def _build_neighbors(window: Window, active: np.ndarray) -> np.ndarray:
    n = window.size
    d = window.d
    shape = window.shape
    strides = []
    acc = 1
    for s in reversed(shape):
        strides.append(acc)
        acc *= s
    strides = list(reversed(strides))
    nbr = np.full((n, 2 * d), -1, dtype=np.int32)
    idx = np.arange(n)
    coords = []
    rem = idx.copy()
    for s, st in zip(shape, strides):
        coords.append(rem // st)
        rem = rem % st
    for axis in range(d):
        for k, sign in enumerate((1, -1)):
            col = 2 * axis + k
            ok = (coords[axis] + sign >= 0) & (coords[axis] + sign < shape[axis])
            tgt = idx + sign * strides[axis]
            sel = ok & (active[idx] > 0)
            tgt_ok = np.where(sel, tgt, 0)
            sel &= active[tgt_ok] > 0
            nbr[sel, col] = tgt[sel]
    return nbr


def compile_instance(inst: SSPInstance) -> CompiledInstance:
    window = inst.window
    n = window.size
    d = window.d
    verts = window.vertices()
    active = np.ones(n, dtype=np.uint8)
    if inst.active is not None:
        for i, v in enumerate(verts):
            active[i] = 1 if v in inst.active else 0
    nbr = _build_neighbors(window, active)
    dirs = directions(d)

    values: list[Fraction] = [inst.red_unit]
    entries = []
    for i, u in enumerate(verts):
        if not active[i]:
            continue
        for col, step in enumerate(dirs):
            j = nbr[i, col]
            if j < 0:
                continue
            v = verts[j]
            r = inst.edge_value(inst.red, u, v)
            b = inst.edge_value(inst.blue, u, v)
            k = inst.edge_value(inst.kappa, u, v)
            entries.append((i, col, r, b, k * inst.red_unit))
            values.extend((r, b, k * inst.red_unit))
    src_items = [(window.index(v), _frac(t)) for v, t in inst.sources.items()]
    values.extend(t for _, t in src_items)

    denom = 1
    for val in values:
        denom = denom * val.denominator // math.gcd(denom, val.denominator)

    # object dtype keeps arbitrary-precision ints when the grain overflows int64
    peak = max((abs(int(v * denom)) for v in values), default=0)
    dt = np.int64 if peak < _INT64_SAFE else object
    red = np.zeros((n, 2 * d), dtype=dt)
    blue = np.zeros((n, 2 * d), dtype=dt)
    full = np.zeros((n, 2 * d), dtype=dt)
    for i, col, r, b, ks in entries:
        red[i, col] = int(r * denom)
        blue[i, col] = int(b * denom)
        full[i, col] = int(ks * denom)
    seeds = np.zeros(n, dtype=np.uint8)
    for v in inst.seeds:
        if window.contains(v):
            seeds[window.index(v)] = 1
    source = np.full(n, -1, dtype=dt)
    for i, t in src_items:
        source[i] = int(t * denom)
    return CompiledInstance(
        window=window, nbr=nbr, red=red, blue=blue, blue_full=full,
        seeds=seeds, source=source, active=active, denom=denom,
        red_unit_num=int(inst.red_unit * denom),
        allow_blue_sources=inst.allow_blue_sources,
    )


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str]
    zero_edges: int
    zero_vertices: int

    def raise_if_failed(self):
        if not self.ok:
            raise ValidationError("; ".join(self.problems))


def validate(ci: CompiledInstance) -> ValidationReport:
    """Checks clock ranges, source times, and zero-cycle freedom.

    Side effect: fills ``ci.zorder`` with a topological index of the
    min-clock-zero subgraph (0 for uninvolved vertices).
    """
    problems = []
    act = ci.active > 0
    live = ci.nbr >= 0
    if np.any((ci.red < 0) & live):
        problems.append("negative red clock")
    if np.any((ci.red > ci.red_unit_num) & live):
        problems.append("red clock above the red unit")
    if np.any((ci.blue < 0) & live):
        problems.append("negative blue clock")
    if np.any((ci.blue_full <= 0) & live):
        problems.append("kappa*s must be positive")
    if np.any((ci.blue > ci.blue_full) & live):
        problems.append("blue clock above kappa*s")
    if np.any((ci.source < -1) | ((ci.source >= 0) & ~act)):
        problems.append("source on inactive vertex or negative marker")
    if np.any((ci.seeds > 0) & ~act):
        problems.append("seed on inactive vertex")
    if not np.any(ci.source >= 0):
        problems.append("no finite source activation")
    if not ci.allow_blue_sources and np.any((ci.seeds > 0) & (ci.source >= 0)):
        problems.append("source on a seed vertex")

    zero_mask = live & ((ci.red == 0) | (ci.blue == 0))
    zero_edges = int(zero_mask.sum())
    zorder = np.zeros(ci.n, dtype=np.int32)
    zero_vertices = 0
    if zero_edges:
        us, cols = np.nonzero(zero_mask)
        vs = ci.nbr[us, cols]
        graph: dict[int, list[int]] = {}
        indeg: dict[int, int] = {}
        for u, v in zip(us.tolist(), vs.tolist()):
            graph.setdefault(u, []).append(v)
            indeg[v] = indeg.get(v, 0) + 1
            indeg.setdefault(u, indeg.get(u, 0))
        order = [u for u in indeg if indeg[u] == 0]
        heapify(order)
        topo = []
        while order:
            u = heappop(order)
            topo.append(u)
            for v in graph.get(u, ()):  # noqa: B905
                indeg[v] -= 1
                if indeg[v] == 0:
                    heappush(order, v)
        zero_vertices = len(indeg)
        if len(topo) != zero_vertices:
            problems.append("directed cycle of zero-min clocks")
        else:
            for rank, u in enumerate(topo, start=1):
                zorder[u] = rank
    ci.zorder = zorder
    return ValidationReport(not problems, problems, zero_edges, zero_vertices)


# ---------------------------------------------------------------------------
# outcome


@dataclass
class SSPOutcome:
    window: Window
    times_num: list            # python ints (grain units), None if uncoloured
    colours: np.ndarray        # int8: -1 uncoloured, 0 red, 1 blue
    denom: int
    order: list[int]           # finalization order (flat indices)
    stats: dict
    mode: str

    def time(self, v: Vertex) -> Fraction | None:
        t = self.times_num[self.window.index(v)]
        return None if t is None else Fraction(t, self.denom)

    def colour(self, v: Vertex) -> str | None:
        c = self.colours[self.window.index(v)]
        return None if c < 0 else ("red" if c == RED else "blue")

    def _set(self, colour: int, upto: Fraction | None) -> set[Vertex]:
        out = set()
        for idx, t in enumerate(self.times_num):
            if t is None or self.colours[idx] != colour:
                continue
            if upto is not None and Fraction(t, self.denom) > upto:
                continue
            out.add(self.window.vertex(idx))
        return out

    def red_set(self, upto: Fraction | None = None) -> set[Vertex]:
        return self._set(RED, upto)

    def blue_set(self, upto: Fraction | None = None) -> set[Vertex]:
        return self._set(BLUE, upto)

    def events(self):
        """Finalization log: (time, seq, vertex, colour) sorted by firing."""
        out = []
        for seq, idx in enumerate(self.order):
            t = self.times_num[idx]
            col = "red" if self.colours[idx] == RED else "blue"
            out.append((Fraction(t, self.denom), seq, self.window.vertex(idx), col))
        return out

    def to_json(self) -> dict:
        return {
            "window": self.window.to_json(),
            "denom": self.denom,
            "T": [None if t is None else int(t) for t in self.times_num],
            "C": self.colours.tolist(),
            "stats": self.stats,
            "mode": self.mode,
        }


def colour_sets_at(outcome: SSPOutcome, t) -> tuple[set[Vertex], set[Vertex]]:
    t = _frac(t)
    return outcome.red_set(t), outcome.blue_set(t)


# ---------------------------------------------------------------------------
# pure-python engine


def _run_python(ci: CompiledInstance) -> SSPOutcome:
    n = ci.n
    two_d = ci.nbr.shape[1]
    nbr = ci.nbr
    red = ci.red
    blue = ci.blue
    full = ci.blue_full
    seeds = ci.seeds
    zorder = ci.zorder
    times: list = [None] * n
    colours = np.full(n, -1, dtype=np.int8)
    order: list[int] = []
    heap: list[tuple[int, int, int]] = []
    for idx in np.nonzero(ci.source >= 0)[0]:
        heappush(heap, (int(ci.source[idx]), int(idx), _REDF))
    stats = {"batches": 0, "ties": 0, "zero_rings": 0, "blue_full_fires": 0, "max_batch": 0}

    while heap:
        t = heap[0][0]
        bflag: dict[int, int] = {}
        while heap and heap[0][0] == t:
            _, idx, fl = heappop(heap)
            if times[idx] is not None:
                continue
            bflag[idx] = bflag.get(idx, 0) | fl
        cand = [(int(zorder[idx]), idx) for idx in bflag]
        heapify(cand)
        stats["batches"] += 1
        batch_size = 0
        while cand:
            _, v = heappop(cand)
            if times[v] is not None:
                continue
            fl = bflag[v]
            if fl == (_REDF | _BLUEF):
                stats["ties"] += 1
            col = BLUE if (seeds[v] or fl & _BLUEF) else RED
            times[v] = t
            colours[v] = col
            order.append(v)
            batch_size += 1
            for k in range(two_d):
                w = int(nbr[v, k])
                if w < 0:
                    continue
                clock = int(blue[v, k]) if col == BLUE else int(red[v, k])
                if col == BLUE and blue[v, k] == full[v, k]:
                    aflag = _BLUEF
                    stats["blue_full_fires"] += 1
                else:
                    aflag = _REDF
                if times[w] is not None:
                    if clock == 0 and times[w] == t:
                        raise AssertionError("zero-ring hit a finalized vertex")
                    continue
                if clock == 0:
                    stats["zero_rings"] += 1
                    prev = bflag.get(w, 0)
                    bflag[w] = prev | aflag
                    if not prev:
                        heappush(cand, (int(zorder[w]), w))
                else:
                    heappush(heap, (t + clock, w, aflag))
        stats["max_batch"] = max(stats["max_batch"], batch_size)
    return SSPOutcome(ci.window, times, colours, ci.denom, order, stats, "python")


# ---------------------------------------------------------------------------
# numba engine (same algorithm on int64)


@njit(cache=True)
def _kernel(nbr, red, blue, full, seeds, source, zorder):  # pragma: no cover
    n, two_d = nbr.shape
    times = np.full(n, -1, dtype=np.int64)
    colours = np.full(n, -1, dtype=np.int8)
    order = np.empty(n, dtype=np.int32)
    n_order = 0

    cap = n * (two_d + 1) + 8
    ht = np.empty(cap, dtype=np.int64)
    hv = np.empty(cap, dtype=np.int32)
    hf = np.empty(cap, dtype=np.uint8)
    hsize = 0

    ck = np.empty(n * (two_d + 1) + 8, dtype=np.int64)
    csize = 0

    bflag = np.zeros(n, dtype=np.uint8)
    touched = np.empty(n, dtype=np.int32)

    stats = np.zeros(8, dtype=np.int64)

    for idx in range(n):
        if source[idx] >= 0:
            # heap push (source time, idx, red flag)
            i = hsize
            ht[i] = source[idx]
            hv[i] = idx
            hf[i] = _REDF
            hsize += 1
            while i > 0:
                p = (i - 1) >> 1
                if ht[p] > ht[i]:
                    ht[p], ht[i] = ht[i], ht[p]
                    hv[p], hv[i] = hv[i], hv[p]
                    hf[p], hf[i] = hf[i], hf[p]
                    i = p
                else:
                    break

    while hsize > 0:
        t = ht[0]
        ntouch = 0
        while hsize > 0 and ht[0] == t:
            idx = hv[0]
            fl = hf[0]
            hsize -= 1
            ht[0] = ht[hsize]
            hv[0] = hv[hsize]
            hf[0] = hf[hsize]
            i = 0
            while True:
                l = 2 * i + 1
                r2 = l + 1
                m = i
                if l < hsize and ht[l] < ht[m]:
                    m = l
                if r2 < hsize and ht[r2] < ht[m]:
                    m = r2
                if m == i:
                    break
                ht[m], ht[i] = ht[i], ht[m]
                hv[m], hv[i] = hv[i], hv[m]
                hf[m], hf[i] = hf[i], hf[m]
                i = m
            if times[idx] >= 0:
                continue
            if bflag[idx] == 0:
                touched[ntouch] = idx
                ntouch += 1
                key = (np.int64(zorder[idx]) << np.int64(32)) | np.int64(idx)
                j = csize
                ck[j] = key
                csize += 1
                while j > 0:
                    p = (j - 1) >> 1
                    if ck[p] > ck[j]:
                        ck[p], ck[j] = ck[j], ck[p]
                        j = p
                    else:
                        break
            bflag[idx] |= fl
        stats[0] += 1
        batch_size = 0
        while csize > 0:
            key = ck[0]
            csize -= 1
            ck[0] = ck[csize]
            j = 0
            while True:
                l = 2 * j + 1
                r2 = l + 1
                m = j
                if l < csize and ck[l] < ck[m]:
                    m = l
                if r2 < csize and ck[r2] < ck[m]:
                    m = r2
                if m == j:
                    break
                ck[m], ck[j] = ck[j], ck[m]
                j = m
            v = np.int32(key & np.int64(0xFFFFFFFF))
            if times[v] >= 0:
                continue
            fl = bflag[v]
            if fl == (_REDF | _BLUEF):
                stats[1] += 1
            col = np.int8(BLUE) if (seeds[v] != 0 or (fl & _BLUEF) != 0) else np.int8(RED)
            times[v] = t
            colours[v] = col
            order[n_order] = v
            n_order += 1
            batch_size += 1
            for k in range(two_d):
                w = nbr[v, k]
                if w < 0:
                    continue
                if col == BLUE:
                    clock = blue[v, k]
                    if blue[v, k] == full[v, k]:
                        aflag = np.uint8(_BLUEF)
                        stats[3] += 1
                    else:
                        aflag = np.uint8(_REDF)
                else:
                    clock = red[v, k]
                    aflag = np.uint8(_REDF)
                if times[w] >= 0:
                    if clock == 0 and times[w] == t:
                        stats[5] += 1
                    continue
                if clock == 0:
                    stats[2] += 1
                    if bflag[w] == 0:
                        touched[ntouch] = w
                        ntouch += 1
                        key2 = (np.int64(zorder[w]) << np.int64(32)) | np.int64(w)
                        j = csize
                        ck[j] = key2
                        csize += 1
                        while j > 0:
                            p = (j - 1) >> 1
                            if ck[p] > ck[j]:
                                ck[p], ck[j] = ck[j], ck[p]
                                j = p
                            else:
                                break
                    bflag[w] |= aflag
                else:
                    rt = t + clock
                    i = hsize
                    ht[i] = rt
                    hv[i] = w
                    hf[i] = aflag
                    hsize += 1
                    while i > 0:
                        p = (i - 1) >> 1
                        if ht[p] > ht[i]:
                            ht[p], ht[i] = ht[i], ht[p]
                            hv[p], hv[i] = hv[i], hv[p]
                            hf[p], hf[i] = hf[i], hf[p]
                            i = p
                        else:
                            break
        if batch_size > stats[4]:
            stats[4] = batch_size
        for j in range(ntouch):
            bflag[touched[j]] = 0
    return times, colours, order[:n_order], stats


def _run_numba(ci: CompiledInstance) -> SSPOutcome:
    times, colours, order, stats = _kernel(
        ci.nbr, ci.red, ci.blue, ci.blue_full, ci.seeds, ci.source, ci.zorder
    )
    if stats[5] != 0:
        raise AssertionError("zero-ring hit a finalized vertex")
    tl = [None if t < 0 else int(t) for t in times]
    sd = {
        "batches": int(stats[0]),
        "ties": int(stats[1]),
        "zero_rings": int(stats[2]),
        "blue_full_fires": int(stats[3]),
        "max_batch": int(stats[4]),
    }
    return SSPOutcome(ci.window, tl, colours, ci.denom, [int(x) for x in order], sd, "numba")


def run_ssp(instance: SSPInstance | CompiledInstance, mode: str = "auto") -> SSPOutcome:
    """Run the growth process to completion.

    mode: "auto" picks the numba path when every possible time fits in
    int64; "python" and "numba" force a path (numba refuses unsafe ranges).
    """
    ci = instance.compile() if isinstance(instance, SSPInstance) else instance
    report = validate(ci)
    report.raise_if_failed()
    max_src = int(ci.source.max()) if ci.source.size else 0
    live = ci.nbr >= 0
    max_clock = 0
    if live.any():
        max_clock = max(int(ci.red[live].max()), int(ci.blue[live].max()))
    bound = max(max_src, 0) + (int(ci.active.sum()) + 1) * (max_clock + 1)
    fits = bound < _INT64_SAFE
    if mode == "auto":
        mode = "numba" if fits else "python"
    if mode == "numba":
        if not fits:
            raise ValidationError("time range too large for the int64 path")
        return _run_numba(ci)
    if mode == "python":
        return _run_python(ci)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# instance generation (named generators, JSON-stable)


def bernoulli_grid_instance(
    window: Window,
    seed_p: float,
    kappa: Fraction | int,
    master_seed: int,
    grain_bits: int = 20,
    source: str = "boundary",
    blue_kind: str = "full",
    exclude_seed_at: Iterable[Vertex] = (),
) -> CompiledInstance:
    """Random instance: Bernoulli(seed_p) seeds, red clocks uniform on the
    dyadic grid {0, 1/G, ..., 1} (G = 2^grain_bits), constant kappa, blue
    clocks at full firing kappa*s (blue_kind="full") or uniform on
    [0, kappa] (blue_kind="uniform"), red unit s = 1.

    source: "boundary" (all boundary vertices at time 0) or "origin".
    """
    kappa = _frac(kappa)
    if kappa.denominator != 1:
        raise ValidationError("grid generator expects integer kappa")
    g = 1 << grain_bits
    n = window.size
    d = window.d
    active = np.ones(n, dtype=np.uint8)
    nbr = _build_neighbors(window, active)
    gen = rngmod.philox(master_seed, 0)
    red = gen.integers(0, g + 1, size=(n, 2 * d), dtype=np.int64)
    full = np.full((n, 2 * d), int(kappa) * g, dtype=np.int64)
    if blue_kind == "full":
        blue = full.copy()
    elif blue_kind == "uniform":
        blue = gen.integers(0, int(kappa) * g + 1, size=(n, 2 * d), dtype=np.int64)
    else:
        raise ValueError(blue_kind)
    seeds = (gen.random(n) < seed_p).astype(np.uint8)
    for v in exclude_seed_at:
        if window.contains(v):
            seeds[window.index(v)] = 0
    source_arr = np.full(n, -1, dtype=np.int64)
    allow_blue = False
    if source == "boundary":
        # subset-style run: seeds live strictly inside, sources on the rim
        for i in range(n):
            v = window.vertex(i)
            if any(c == a or c == b - 1 for c, a, b in zip(v, window.lo, window.hi)):
                source_arr[i] = 0
                seeds[i] = 0
    elif source == "origin":
        origin = (0,) * d
        if not window.contains(origin):
            raise ValidationError("origin outside window")
        source_arr[window.index(origin)] = 0
        allow_blue = True  # an origin seed activates blue
    else:
        raise ValueError(source)
    mask = nbr < 0
    red[mask] = 0
    blue[mask] = 0
    full_masked = full.copy()
    ci = CompiledInstance(
        window=window, nbr=nbr, red=red, blue=blue, blue_full=full_masked,
        seeds=seeds, source=source_arr, active=active, denom=g,
        red_unit_num=g, allow_blue_sources=allow_blue,
        meta={
            "generator": "bernoulli_grid",
            "seed_p": seed_p,
            "kappa": str(kappa),
            "master_seed": master_seed,
            "grain_bits": grain_bits,
            "source": source,
            "blue_kind": blue_kind,
        },
    )
    return ci


def instance_to_json(ci: CompiledInstance) -> dict:
    """Schema: {dimension, window, seeds, source, red_clocks, blue_clocks,
    kappa, red_unit}.  Generator-backed instances store the generator name +
    RNG seed instead of dense clock maps; explicit instances store per-edge
    entries [[u, v, value], ...] with exact fraction strings."""
    if ci.meta.get("generator") == "bernoulli_grid":
        m = ci.meta
        return {
            "dimension": ci.d,
            "window": ci.window.to_json(),
            "red_unit": "1",
            "seeds": {"kind": "bernoulli", "p": m["seed_p"]},
            "source": {"kind": m["source"]},
            "red_clocks": {"kind": "uniform_grid", "grain_bits": m["grain_bits"]},
            "blue_clocks": {"kind": m["blue_kind"]},
            "kappa": {"kind": "constant", "value": m["kappa"]},
            "rng_seed": m["master_seed"],
        }
    win = ci.window
    denom = ci.denom

    def vtx(i):
        return [int(c) for c in win.vertex(int(i))]

    def edges(arr):
        out = []
        for i in range(ci.n):
            for k in range(arr.shape[1]):
                j = int(ci.nbr[i, k])
                if j < 0:
                    continue
                out.append([vtx(i), vtx(j), _frac_str(Fraction(int(arr[i, k]), denom))])
        return out

    src = []
    for i in range(ci.n):
        if ci.source[i] >= 0:
            src.append([vtx(i), _frac_str(Fraction(int(ci.source[i]), denom))])
    return {
        "dimension": ci.d,
        "window": win.to_json(),
        "red_unit": _frac_str(Fraction(ci.red_unit_num, denom)),
        "seeds": {"kind": "explicit",
                  "vertices": [vtx(i) for i in np.nonzero(ci.seeds)[0]]},
        "source": {"kind": "explicit", "values": src,
                   "allow_blue": bool(ci.allow_blue_sources)},
        "red_clocks": {"kind": "explicit", "entries": edges(ci.red)},
        "blue_clocks": {"kind": "explicit", "entries": edges(ci.blue)},
        "kappa": {"kind": "explicit",
                  "entries": [[u, v, _frac_str(Fraction(x) / Fraction(ci.red_unit_num, denom))]
                              for (u, v, x) in
                              ((e[0], e[1], Fraction(e[2])) for e in edges(ci.blue_full))]},
        "active": [vtx(i) for i in np.nonzero(ci.active)[0]]
        if not ci.active.all() else None,
    }


def instance_from_json(obj: dict) -> CompiledInstance:
    window = Window.from_json(obj["window"])
    if obj["red_clocks"]["kind"] == "uniform_grid":
        return bernoulli_grid_instance(
            window,
            seed_p=obj["seeds"]["p"],
            kappa=Fraction(obj["kappa"]["value"]),
            master_seed=obj["rng_seed"],
            grain_bits=obj["red_clocks"]["grain_bits"],
            source=obj["source"]["kind"],
            blue_kind=obj["blue_clocks"]["kind"],
        )
    seeds = frozenset(tuple(v) for v in obj["seeds"]["vertices"])
    sources = {tuple(v): Fraction(t) for v, t in obj["source"]["values"]}
    red = {(tuple(u), tuple(v)): Fraction(x) for u, v, x in obj["red_clocks"]["entries"]}
    blue = {(tuple(u), tuple(v)): Fraction(x) for u, v, x in obj["blue_clocks"]["entries"]}
    kappa = {(tuple(u), tuple(v)): Fraction(x) for u, v, x in obj["kappa"]["entries"]}
    active = obj.get("active")
    inst = SSPInstance(
        window, seeds, sources, red, blue, kappa,
        red_unit=Fraction(obj["red_unit"]),
        active=None if active is None else frozenset(tuple(v) for v in active),
        allow_blue_sources=bool(obj["source"].get("allow_blue", False)),
    )
    return compile_instance(inst)


def save_instance(ci: CompiledInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_json(ci), fh, sort_keys=True)


def load_instance(path) -> CompiledInstance:
    with open(path) as fh:
        return instance_from_json(json.load(fh))


def random_dict_instance(master_seed: int, max_side: int = 7) -> SSPInstance:
    """Small adversarial instance for oracle comparisons: random window up to
    max_side^2, random rational clocks on a coarse grid (many exact ties and
    zeros), random integer-or-half kappa in [1, 10], random seeds/sources.

    Zero-cycle rejections resample deterministically (seed chaining).
    """
    for attempt in range(64):
        gen = rngmod.philox(master_seed, 101, attempt)
        w = int(gen.integers(2, max_side + 1))
        h = int(gen.integers(2, max_side + 1))
        window = Window((0, 0), (w, h))
        verts = window.vertices()
        unit = Fraction(int(gen.integers(1, 4)))
        grid = int(gen.integers(2, 6))  # clock resolution: coarse -> ties
        red = {}
        blue = {}
        kap = {}
        dirs = directions(2)
        fast_blue = gen.random() < 0.3  # kappa 1 everywhere: red/blue races tie often
        for u in verts:
            for step in dirs:
                v = (u[0] + step[0], u[1] + step[1])
                if not window.contains(v):
                    continue
                if fast_blue:
                    k = Fraction(1)
                else:
                    k = Fraction(int(gen.integers(2, 21)), 2)  # 1..10 step 1/2
                red[(u, v)] = unit * int(gen.integers(0, grid + 1)) / grid
                if gen.random() < 0.3:
                    blue[(u, v)] = k * unit  # full firing: blue assigns blue
                else:
                    blue[(u, v)] = k * unit * int(gen.integers(0, grid + 1)) / grid
                kap[(u, v)] = k
        seeds = frozenset(v for v in verts if gen.random() < 0.15)
        n_src = int(gen.integers(1, 4))
        order = gen.permutation(len(verts))
        sources = {}
        for i in order:
            if len(sources) == n_src:
                break
            v = verts[int(i)]
            if v in seeds:
                continue  # sources stay off the seed set
            sources[v] = Fraction(int(gen.integers(0, 3)), 2)
        if not sources:
            continue
        inst = SSPInstance(window, seeds, sources, red, blue, kap, red_unit=unit)
        ci = inst.compile()
        rep = validate(ci)
        if rep.ok:
            return inst
    raise RuntimeError("could not draw a zero-acyclic instance")
