"""Block-scale colouring of an SI run and its reduction to a spread process.

The simulation box is tiled by axis-aligned blocks of side L (a power of
two), block coordinate z covering sites z*L + [-L/2, L/2).  A colouring
time tau_B is attached to every block inside the box: the blocks holding
time-zero infected particles start coloured, and a block becomes coloured
when

  (a) a timer expires: a neighbouring block was coloured exactly one band
      delay earlier (chi within radius r of the origin, 8*xi within R,
      xi outside), or
  (b) an infected particle enters it for the first time (ignition, with
      the entry site recorded), or
  (c) a block is ignited by rule (b) and the entering particle is within
      alpha*L of this block too (satellite ignition at the same instant).

From a finished colouring the module derives red/blue clocks on directed
edges of the block-coordinate lattice whose two-colour growth process
reproduces tau exactly (``check_si_to_ssp``), evaluates the per-block
fast-spread events that decide which blocks are blue seeds, classifies
principal particles, and provides a lazily generated twin of the direct
simulation plus Monte Carlo estimators for the seed probability.

Times: SI event times are float64 and exact binary rationals; all block
colouring arithmetic is done in ``Fraction`` so timer sums, band delays
and the derived clocks are exact and the equivalence check is an exact
rational identity, not a tolerance comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from heapq import heappush, heappop

import numpy as np

from . import rng as rngmod
from . import si as simod
from . import ssp as sspmod
from .lattice import Vertex, Window

__all__ = [
    "ColouringParams", "BlockInfo", "ColouringRecord", "DerivedClocks",
    "EpidemicRun", "CheckReport", "ColouringHorizonError",
    "LazyOversamplingError",
    "block_of", "block_bounds", "dist_to_block", "block_gap", "block_window",
    "inner_boundary", "boundary_hash", "covering_blocks", "half_blocks",
    "half_block_bounds",
    "run_colouring", "principal_particles", "evaluate_seed_events",
    "derive_clocks", "check_si_to_ssp", "infection_completion_stats",
    "event_O", "event_Q", "event_Z", "lazy_generate", "sample_run",
    "estimate_seed_probability", "channel_grid",
]


class ColouringHorizonError(RuntimeError):
    """The run ended before every block in the window was coloured."""

    def __init__(self, uncoloured, horizon):
        self.uncoloured = sorted(uncoloured)
        self.horizon = horizon
        preview = ", ".join(map(str, self.uncoloured[:4]))
        super().__init__(
            f"{len(self.uncoloured)} block(s) uncoloured at horizon "
            f"{horizon} (first: {preview})")


class LazyOversamplingError(RuntimeError):
    """A lazily revealed particle started in the outer safety shell."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    raise TypeError(f"exact number required, got {type(x).__name__}")


# ---------------------------------------------------------------------------
# block geometry


def block_of(v: Vertex, L: int) -> Vertex:
    """Coordinate of the block containing site v."""
    h = L // 2
    return tuple((c + h) // L for c in v)


def block_bounds(z: Vertex, L: int) -> tuple:
    """Per-axis inclusive (lo, hi) of the block cube."""
    h = L // 2
    return tuple((zi * L - h, zi * L + h - 1) for zi in z)


def _gap(c: int, lo: int, hi: int) -> int:
    if c < lo:
        return lo - c
    if c > hi:
        return c - hi
    return 0


def dist_to_block(x: Vertex, z: Vertex, L: int) -> int:
    """L1 distance from site x to the block cube z."""
    return sum(_gap(c, lo, hi) for c, (lo, hi) in zip(x, block_bounds(z, L)))


def block_gap(z: Vertex, w: Vertex, L: int, Lw: int | None = None) -> int:
    """L1 set distance between block z at scale L and block w at scale Lw."""
    bz = block_bounds(z, L)
    bw = block_bounds(w, L if Lw is None else Lw)
    out = 0
    for (alo, ahi), (blo, bhi) in zip(bz, bw):
        if blo > ahi:
            out += blo - ahi
        elif alo > bhi:
            out += alo - bhi
    return out


def block_window(box: Window, L: int) -> Window:
    """Window of block coordinates whose cubes lie fully inside ``box``."""
    h = L // 2
    lo, hi = [], []
    for a, b in zip(box.lo, box.hi):
        zmin = math.ceil((a + h) / L)
        zmax = math.floor((b - h) / L)
        if zmax < zmin:
            raise ValueError("box too small for a single block")
        lo.append(zmin)
        hi.append(zmax + 1)
    return Window(tuple(lo), tuple(hi))


def inner_boundary(z: Vertex, L: int) -> list[Vertex]:
    """Sites of the block cube adjacent to its complement."""
    (xlo, xhi), (ylo, yhi) = block_bounds(z, L)
    out = []
    for x in range(xlo, xhi + 1):
        for y in range(ylo, yhi + 1):
            if x in (xlo, xhi) or y in (ylo, yhi):
                out.append((x, y))
    return out


def boundary_hash(z: Vertex, L: int, alphaL: Fraction) -> list[tuple[Vertex, Vertex]]:
    """All (x, B_x) with x on the inner boundary of a block B_x and
    d(x, block z) <= alpha*L; the possible ignition sites of z."""
    reach = math.floor((alphaL + L - 1) / L) + 1
    out = []
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            w = (z[0] + dx, z[1] + dy)
            if block_gap(z, w, L) > alphaL:
                continue
            for x in inner_boundary(w, L):
                if dist_to_block(x, z, L) <= alphaL:
                    out.append((x, w))
    return out


def covering_blocks(x: Vertex, L: int, alphaL: Fraction) -> set[Vertex]:
    """Blocks within distance alpha*L of site x (always includes x's own)."""
    reach = math.floor((alphaL + L - 1) / L) + 1
    zx = block_of(x, L)
    out = set()
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            w = (zx[0] + dx, zx[1] + dy)
            if dist_to_block(x, w, L) <= alphaL:
                out.add(w)
    return out


def half_blocks(z: Vertex) -> list[Vertex]:
    """Half-scale blocks within set distance 1 of block z (the 3x3 family
    {2z-1, 2z, 2z+1} per axis; the next ones are L/4 + 1 away)."""
    return [(2 * z[0] + dx, 2 * z[1] + dy)
            for dx in (-1, 0, 1) for dy in (-1, 0, 1)]


def half_block_bounds(w: Vertex, L: int) -> tuple:
    return block_bounds(w, L // 2)


def _in_bounds(v: Vertex, bounds) -> bool:
    return all(lo <= c <= hi for c, (lo, hi) in zip(v, bounds))


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ColouringParams:
    """Block-colouring parameters.  ``alpha``, ``chi``, ``r``, ``R`` must be
    exact (int, str or Fraction); xi = alpha * L**2 is derived.  kappa0 is
    the red/blue speed ratio; values <= 4000 are permitted surrogates and
    clear the ``faithful`` flag."""

    L: int
    alpha: Fraction
    chi: Fraction
    r: Fraction
    R: Fraction
    kappa0: int = 4001

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frac(self.alpha))
        object.__setattr__(self, "chi", _frac(self.chi))
        object.__setattr__(self, "r", _frac(self.r))
        object.__setattr__(self, "R", _frac(self.R))
        L = self.L
        if L < 16 or (L & (L - 1)) != 0:
            raise ValueError("L must be a power of two, at least 16")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.chi < 8 * self.xi:
            raise ValueError("chi must be >= 8*xi")
        if self.r < 0:
            raise ValueError("r must be >= 0")
        if self.xi > 0 and self.R < 2 * self.r * self.chi / self.xi:
            raise ValueError("R must be >= 2*r*chi/xi")
        if self.kappa0 < 1:
            raise ValueError("kappa0 must be >= 1")

    @property
    def xi(self) -> Fraction:
        return self.alpha * self.L * self.L

    @property
    def alphaL(self) -> Fraction:
        return self.alpha * self.L

    @property
    def unit(self) -> Fraction:
        """Red time unit s = xi / kappa0."""
        return self.xi / self.kappa0

    @property
    def Xi(self) -> float:
        """Seed-event time window xi / max(log log L, 1)."""
        return float(self.xi) / max(math.log(math.log(self.L)), 1.0)

    @property
    def faithful(self) -> bool:
        return self.kappa0 > 4000

    def band(self, z: Vertex) -> int:
        """0 within r of the origin, 1 within R, 2 outside."""
        d = dist_to_block((0, 0), z, self.L)
        if d <= self.r:
            return 0
        if d <= self.R:
            return 1
        return 2

    def delay(self, z: Vertex) -> Fraction:
        """Timer delay of the receiving block: chi / 8*xi / xi by band."""
        return (self.chi, 8 * self.xi, self.xi)[self.band(z)]

    def kappa_band(self, z: Vertex) -> Fraction:
        """Blue clock bound multiplier of the receiving block."""
        b = self.band(z)
        if b == 0:
            return self.chi * self.kappa0 / self.xi
        return Fraction((8 if b == 1 else 1) * self.kappa0)

    def rescale(self, factor: int) -> "ColouringParams":
        """Same geometry at block side L*factor (alpha fixed)."""
        return ColouringParams(self.L * factor, self.alpha, self.chi,
                               self.r, self.R, self.kappa0)

    def to_json(self) -> dict:
        return {"L": self.L, "alpha": str(self.alpha), "chi": str(self.chi),
                "r": str(self.r), "R": str(self.R), "kappa0": self.kappa0}

    @classmethod
    def from_json(cls, obj: dict) -> "ColouringParams":
        return cls(int(obj["L"]), obj["alpha"], obj["chi"], obj["r"],
                   obj["R"], int(obj.get("kappa0", 4001)))


# ---------------------------------------------------------------------------
# run container
#
# Per-particle trajectories in CSR layout so block passes can be vectorised;
# jump rows are (time, position after the jump).


@dataclass
class _Segments:
    """Flat piecewise-constant presence intervals [t0, t1) at one scale."""

    pid: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    x: np.ndarray
    y: np.ndarray
    zx: np.ndarray
    zy: np.ndarray
    first: np.ndarray  # True on birth segments


@dataclass
class EpidemicRun:
    params: simod.SIParams
    horizon: float
    birth: np.ndarray          # (n, 2) int32
    iota: np.ndarray           # (n,) float64, inf if never infected
    initial_infected: np.ndarray  # (n,) uint8
    ignition: np.ndarray       # (n,) uint8
    frozen: np.ndarray         # (n,) uint8
    freeze_time: np.ndarray    # (n,) float64
    jump_t: np.ndarray         # (m,) float64
    jump_xy: np.ndarray        # (m, 2) int32
    jump_ptr: np.ndarray       # (n+1,) int64
    diagnostics: dict = field(default_factory=dict)
    _segs: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.iota)

    @property
    def box(self) -> Window:
        return self.params.box

    @classmethod
    def from_state(cls, state: simod.SIState, log: simod.RunLog) -> "EpidemicRun":
        if state.params.log_level < 3:
            raise ValueError("full jump records need log_level = 3")
        box = state.box
        n = state.n
        jm = log.kind == simod.KIND_JUMP
        jp = log.pid[jm]
        jt = log.t[jm]
        js = log.site[jm]
        order = np.lexsort((np.arange(len(jp)), jp))
        jp, jt, js = jp[order], jt[order], js[order]
        ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(ptr, jp + 1, 1)
        np.cumsum(ptr, out=ptr)
        side = box.shape[-1]
        xy = np.empty((len(js), 2), dtype=np.int32)
        xy[:, 0] = js // side + box.lo[0]
        xy[:, 1] = js % side + box.lo[1]
        birth = np.empty((n, 2), dtype=np.int32)
        birth[:, 0] = state.birth_pos // side + box.lo[0]
        birth[:, 1] = state.birth_pos % side + box.lo[1]
        return cls(state.params, float(state.time), birth,
                   state.iota.astype(np.float64), state.initial_infected.copy(),
                   state.ignition.copy(), state.frozen.copy(),
                   state.freeze_time.astype(np.float64),
                   jt.astype(np.float64), xy, ptr)

    @classmethod
    def from_parts(cls, params, horizon, parts: list[dict], diagnostics=None) -> "EpidemicRun":
        """Assemble from per-particle dicts with keys birth/iota/jumps/...."""
        n = len(parts)
        birth = np.zeros((n, 2), dtype=np.int32)
        iota = np.full(n, np.inf)
        init = np.zeros(n, dtype=np.uint8)
        ign = np.zeros(n, dtype=np.uint8)
        frozen = np.zeros(n, dtype=np.uint8)
        ftime = np.full(n, np.inf)
        ptr = np.zeros(n + 1, dtype=np.int64)
        for i, p in enumerate(parts):
            ptr[i + 1] = ptr[i] + len(p["jumps"])
            birth[i] = p["birth"]
            iota[i] = p.get("iota", np.inf)
            init[i] = 1 if p.get("initial_infected") else 0
            ign[i] = 1 if p.get("ignition") else 0
            frozen[i] = 1 if p.get("frozen") else 0
            ftime[i] = p.get("freeze_time", np.inf)
        jt = np.empty(ptr[-1])
        xy = np.empty((ptr[-1], 2), dtype=np.int32)
        for i, p in enumerate(parts):
            for k, (t, v) in enumerate(p["jumps"]):
                jt[ptr[i] + k] = t
                xy[ptr[i] + k] = v
        return cls(params, horizon, birth, iota, init, ign, frozen, ftime,
                   jt, xy, ptr, diagnostics or {})

    def records(self) -> list[simod.ParticleRecord]:
        out = []
        for i in range(self.n):
            a, b = int(self.jump_ptr[i]), int(self.jump_ptr[i + 1])
            jumps = [(float(self.jump_t[k]),
                      (int(self.jump_xy[k, 0]), int(self.jump_xy[k, 1])))
                     for k in range(a, b)]
            out.append(simod.ParticleRecord(
                i, (int(self.birth[i, 0]), int(self.birth[i, 1])), jumps,
                float(self.iota[i]), bool(self.initial_infected[i]),
                bool(self.ignition[i]), bool(self.frozen[i]),
                float(self.freeze_time[i])))
        return out

    def jumps_of(self, pid: int):
        a, b = int(self.jump_ptr[pid]), int(self.jump_ptr[pid + 1])
        return self.jump_t[a:b], self.jump_xy[a:b]

    def _count_le(self, times: np.ndarray, t) -> int:
        """Number of jump times <= t, exact for Fraction t."""
        tf = float(t)
        i = int(np.searchsorted(times, tf, side="right"))
        if isinstance(t, Fraction) and Fraction(tf) != t:
            while i > 0 and Fraction(float(times[i - 1])) > t:
                i -= 1
            while i < len(times) and Fraction(float(times[i])) <= t:
                i += 1
        return i

    def position(self, pid: int, t) -> Vertex:
        """Position at time t (right-continuous at jumps); exact if t is a
        Fraction."""
        jt, xy = self.jumps_of(pid)
        i = self._count_le(jt, t)
        if i == 0:
            return (int(self.birth[pid, 0]), int(self.birth[pid, 1]))
        return (int(xy[i - 1, 0]), int(xy[i - 1, 1]))

    def segments(self, L: int) -> _Segments:
        if L in self._segs:
            return self._segs[L]
        n, m = self.n, len(self.jump_t)
        M = n + m
        ptr2 = self.jump_ptr + np.arange(n + 1, dtype=np.int64)
        t0 = np.empty(M)
        x = np.empty(M, dtype=np.int64)
        y = np.empty(M, dtype=np.int64)
        first = np.zeros(M, dtype=bool)
        first[ptr2[:-1]] = True
        t0[first] = 0.0
        x[first] = self.birth[:, 0]
        y[first] = self.birth[:, 1]
        rest = ~first
        t0[rest] = self.jump_t
        x[rest] = self.jump_xy[:, 0]
        y[rest] = self.jump_xy[:, 1]
        t1 = np.empty(M)
        t1[:-1] = t0[1:]
        t1[ptr2[1:] - 1] = self.horizon * (1 + 1e-12) + 1.0
        pid = np.repeat(np.arange(n, dtype=np.int64), np.diff(ptr2))
        h = L // 2
        segs = _Segments(pid, t0, t1, x, y,
                         (x + h) // L, (y + h) // L, first)
        self._segs[L] = segs
        return segs

    def to_json(self) -> dict:
        none_inf = lambda a: [None if math.isinf(v) else v for v in a.tolist()]
        return {
            "params": self.params.to_json(),
            "horizon": self.horizon,
            "birth": self.birth.tolist(),
            "iota": none_inf(self.iota),
            "initial_infected": self.initial_infected.tolist(),
            "ignition": self.ignition.tolist(),
            "frozen": self.frozen.tolist(),
            "freeze_time": none_inf(self.freeze_time),
            "jump_ptr": self.jump_ptr.tolist(),
            "jump_t": self.jump_t.tolist(),
            "jump_xy": self.jump_xy.tolist(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EpidemicRun":
        inf_none = lambda a: np.array([np.inf if v is None else v for v in a])
        return cls(simod.SIParams.from_json(obj["params"]), float(obj["horizon"]),
                   np.array(obj["birth"], dtype=np.int32), inf_none(obj["iota"]),
                   np.array(obj["initial_infected"], dtype=np.uint8),
                   np.array(obj["ignition"], dtype=np.uint8),
                   np.array(obj["frozen"], dtype=np.uint8),
                   inf_none(obj["freeze_time"]),
                   np.array(obj["jump_t"], dtype=np.float64),
                   np.array(obj["jump_xy"], dtype=np.int32).reshape(-1, 2),
                   np.array(obj["jump_ptr"], dtype=np.int64),
                   obj.get("diagnostics", {}))


def sample_run(params: simod.SIParams, until: float | None = None,
               mode: str = "auto", extra_susceptibles=(), extra_infected=()) -> EpidemicRun:
    """Direct simulation wrapped into an EpidemicRun (log_level 3)."""
    if params.log_level < 3:
        raise ValueError("colouring replay needs log_level = 3")
    state, log = simod.simulate(params, until=until, mode=mode,
                                extra_susceptibles=extra_susceptibles,
                                extra_infected=extra_infected)
    return EpidemicRun.from_state(state, log)


# ---------------------------------------------------------------------------
# colouring record


@dataclass
class BlockInfo:
    tau: Fraction
    rule: str                      # 'o' initial, 'a' timer, 'b' entry, 'c' satellite
    x: Vertex | None = None        # ignition site (o/b/c)
    pid: int | None = None         # ignition particle (o/b/c)
    parent: Vertex | None = None   # timer source block (rule a)
    group: tuple | None = None     # simultaneously ignited blocks, entry first
    rank: int = 0                  # position within the group
    H: frozenset | None = None     # particles first coloured here
    Hm: frozenset | None = None    # principal subset
    seed: bool | None = None
    A1: bool | None = None
    A2: dict | None = None

    def to_json(self) -> dict:
        out = {"tau": str(self.tau), "rule": self.rule, "rank": self.rank}
        if self.x is not None:
            out["x"] = list(self.x)
        if self.pid is not None:
            out["pid"] = self.pid
        if self.parent is not None:
            out["parent"] = list(self.parent)
        if self.group is not None:
            out["group"] = [list(g) for g in self.group]
        if self.H is not None:
            out["H"] = sorted(self.H)
        if self.Hm is not None:
            out["Hm"] = sorted(self.Hm)
        if self.seed is not None:
            out["seed"] = self.seed
        if self.A1 is not None:
            out["A1"] = self.A1
        if self.A2 is not None:
            out["A2"] = [[list(bp), list(x), v] for (bp, x), v in self.A2.items()]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "BlockInfo":
        a2 = obj.get("A2")
        return cls(Fraction(obj["tau"]), obj["rule"],
                   tuple(obj["x"]) if "x" in obj else None,
                   obj.get("pid"),
                   tuple(obj["parent"]) if "parent" in obj else None,
                   tuple(tuple(g) for g in obj["group"]) if "group" in obj else None,
                   obj.get("rank", 0),
                   frozenset(obj["H"]) if "H" in obj else None,
                   frozenset(obj["Hm"]) if "Hm" in obj else None,
                   obj.get("seed"), obj.get("A1"),
                   {(tuple(bp), tuple(x)): v for bp, x, v in a2} if a2 else None)


@dataclass
class ColouringRecord:
    params: ColouringParams
    window: Window                  # block coordinates
    horizon: float
    blocks: dict                    # Vertex -> BlockInfo
    ties: list = field(default_factory=list)

    def tau(self, z: Vertex) -> Fraction:
        return self.blocks[z].tau

    def ignited(self) -> list[Vertex]:
        return [z for z, b in sorted(self.blocks.items()) if b.rule in "obc"]

    def sources(self) -> list[Vertex]:
        return [z for z, b in sorted(self.blocks.items()) if b.tau == 0]

    def seeds(self) -> frozenset:
        return frozenset(z for z, b in self.blocks.items() if b.seed)

    def far_blocks(self) -> list[Vertex]:
        """Blocks with d(0, block) >= r*chi/xi, where the principal subset
        is guaranteed to consist of first-coloured particles."""
        p = self.params
        cut = p.r * p.chi / p.xi
        return [z for z in sorted(self.blocks)
                if dist_to_block((0, 0), z, p.L) >= cut]

    def with_tau(self, z: Vertex, delta) -> "ColouringRecord":
        """Copy with one colouring time shifted (negative-control helper)."""
        blocks = dict(self.blocks)
        b = blocks[z]
        blocks[z] = BlockInfo(b.tau + _frac(delta), b.rule, b.x, b.pid,
                              b.parent, b.group, b.rank, b.H, b.Hm,
                              b.seed, b.A1, b.A2)
        return ColouringRecord(self.params, self.window, self.horizon,
                               blocks, list(self.ties))

    def to_json(self) -> dict:
        return {"params": self.params.to_json(),
                "window": self.window.to_json(),
                "horizon": self.horizon,
                "blocks": {f"{z[0]},{z[1]}": b.to_json()
                           for z, b in sorted(self.blocks.items())},
                "ties": self.ties}

    @classmethod
    def from_json(cls, obj: dict) -> "ColouringRecord":
        blocks = {}
        for key, b in obj["blocks"].items():
            z = tuple(int(c) for c in key.split(","))
            blocks[z] = BlockInfo.from_json(b)
        return cls(ColouringParams.from_json(obj["params"]),
                   Window.from_json(obj["window"]), float(obj["horizon"]),
                   blocks, obj.get("ties", []))


def channel_grid(record: ColouringRecord, t=None) -> np.ndarray:
    """Block raster: 0 uncoloured, 1 timer-coloured, 2 ignited, 3 seed."""
    bw = record.window
    grid = np.zeros(bw.shape, dtype=np.uint8)
    cut = None if t is None else _frac(t)
    for z, b in record.blocks.items():
        if cut is not None and b.tau > cut:
            continue
        if b.seed:
            c = 3
        elif b.rule in "obc":
            c = 2
        else:
            c = 1
        grid[z[0] - bw.lo[0], z[1] - bw.lo[1]] = c
    return grid


# ---------------------------------------------------------------------------
# replay


def _check_run_compat(run: EpidemicRun, params: ColouringParams) -> None:
    p = run.params
    if p.dim != 2:
        raise ValueError("block colouring is two-dimensional")
    if p.variant != "instant":
        raise ValueError("block colouring requires the instant variant")
    if p.d_s != 1.0:
        raise ValueError("run must be normalised to d_s = 1")
    if p.log_level < 3:
        raise ValueError("replay needs full jump logs (log_level = 3)")


def run_colouring(run: EpidemicRun, params: ColouringParams,
                  evaluate: str = "full") -> ColouringRecord:
    """Replay the run's block colouring and annotate the record.

    ``evaluate``: 'tau' computes colouring times only, 'seeds' adds seed
    flags (principal/first-coloured sets only where ignition needs them),
    'full' additionally stores H and the principal subset for every block.
    Raises ColouringHorizonError when the window cannot be fully coloured
    from data within the run horizon.
    """
    if evaluate not in ("tau", "seeds", "full"):
        raise ValueError(f"unknown evaluate mode {evaluate!r}")
    _check_run_compat(run, params)
    L = params.L
    bw = block_window(run.box, L)
    horizon = Fraction(run.horizon)

    segs = run.segments(L)
    inw = ((segs.zx >= bw.lo[0]) & (segs.zx < bw.hi[0])
           & (segs.zy >= bw.lo[1]) & (segs.zy < bw.hi[1]))

    # candidate ignition events: cross-block jumps of already infected particles
    prev_same = np.zeros(len(segs.pid), dtype=bool)
    prev_same[1:] = segs.pid[1:] == segs.pid[:-1]
    moved = np.zeros(len(segs.pid), dtype=bool)
    moved[1:] = (segs.zx[1:] != segs.zx[:-1]) | (segs.zy[1:] != segs.zy[:-1])
    cand = (~segs.first) & prev_same & moved & inw & (segs.t0 > run.iota[segs.pid])
    eb = (segs.zx[cand] - bw.lo[0]) * bw.shape[1] + (segs.zy[cand] - bw.lo[1])
    et = segs.t0[cand]
    epid = segs.pid[cand]
    ex = segs.x[cand]
    ey = segs.y[cand]
    order = np.lexsort((epid, et, eb))
    eb, et, epid, ex, ey = eb[order], et[order], epid[order], ex[order], ey[order]
    estart = np.searchsorted(eb, np.arange(bw.size))
    eend = np.searchsorted(eb, np.arange(bw.size) + 1)

    blocks: dict[Vertex, BlockInfo] = {}
    ties: list[dict] = []
    bound: dict[Vertex, Fraction] = {}
    heap: list = []
    seq = 0

    def push_entry(bidx: int) -> None:
        nonlocal seq
        k = int(estart[bidx])
        if k < int(eend[bidx]):
            heappush(heap, (Fraction(float(et[k])), 0, seq, "entry", bidx, k))
            seq += 1

    def relax_from(u: Vertex) -> None:
        nonlocal seq
        tu = blocks[u].tau
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            z = (u[0] + dx, u[1] + dy)
            if not bw.contains(z) or z in blocks:
                continue
            t = tu + params.delay(z)
            if z not in bound or t < bound[z]:
                bound[z] = t
                heappush(heap, (t, 1, z, "relax", u, None))
                seq += 1

    def satellites_of(x: Vertex, entered: Vertex) -> list[Vertex]:
        out = []
        for w in covering_blocks(x, L, params.alphaL):
            if w != entered and bw.contains(w) and w not in blocks:
                out.append(w)
        out.sort(key=lambda w: (dist_to_block(x, w, L), w))
        for a, b in zip(out, out[1:]):
            if dist_to_block(x, a, L) == dist_to_block(x, b, L):
                ties.append({"kind": "satellite-order", "blocks": [a, b],
                             "x": x, "note": "equal distance, lexicographic"})
        return out

    def ignite(z: Vertex, t: Fraction, x: Vertex, pid: int) -> None:
        if z in bound and bound[z] == t:
            ties.append({"kind": "entry-timer", "block": z, "t": float(t)})
        sats = satellites_of(x, z)
        group = (z,) + tuple(sats) if sats else None
        blocks[z] = BlockInfo(t, "b", x, pid, group=group, rank=0)
        for i, w in enumerate(sats, start=1):
            blocks[w] = BlockInfo(t, "c", x, pid, group=group, rank=i)
        relax_from(z)
        for w in sats:
            relax_from(w)

    for pid0 in np.nonzero(run.iota == 0.0)[0]:
        z = block_of(tuple(int(c) for c in run.birth[pid0]), L)
        if bw.contains(z) and z not in blocks:
            blocks[z] = BlockInfo(Fraction(0), "o",
                                  tuple(int(c) for c in run.birth[pid0]),
                                  int(pid0))
    for z in list(blocks):
        relax_from(z)
    for bidx in range(bw.size):
        push_entry(bidx)

    while heap:
        item = heappop(heap)
        t = item[0]
        if t > horizon:
            break
        if item[3] == "entry":
            bidx, k = item[4], item[5]
            z = bw.vertex(bidx)
            if z in blocks:
                continue
            ignite(z, t, (int(ex[k]), int(ey[k])), int(epid[k]))
        else:
            z = item[2]
            if z in blocks or bound.get(z) != t:
                continue
            blocks[z] = BlockInfo(t, "a", parent=item[4])
            relax_from(z)

    missing = [z for z in bw if z not in blocks]
    if missing:
        raise ColouringHorizonError(missing, run.horizon)

    record = ColouringRecord(params, bw, run.horizon, blocks, ties)
    _annotate(record, run, evaluate)
    return record


# ---------------------------------------------------------------------------
# H, principal particles, seed events


def _sigma_pass(record: ColouringRecord, run: EpidemicRun) -> dict:
    """First-coloured-block of every particle; returns {block: set(pid)}."""
    bw = record.window
    L = record.params.L
    segs = run.segments(L)
    tauf = np.full(bw.shape, np.inf)
    for z, b in record.blocks.items():
        tauf[z[0] - bw.lo[0], z[1] - bw.lo[1]] = float(b.tau)
    inw = ((segs.zx >= bw.lo[0]) & (segs.zx < bw.hi[0])
           & (segs.zy >= bw.lo[1]) & (segs.zy < bw.hi[1]))
    tseg = np.full(len(segs.pid), np.inf)
    ix = np.clip(segs.zx - bw.lo[0], 0, bw.shape[0] - 1)
    iy = np.clip(segs.zy - bw.lo[1], 0, bw.shape[1] - 1)
    tseg[inw] = tauf[ix[inw], iy[inw]]
    cand = np.maximum(segs.t0, tseg)
    cand[cand >= segs.t1] = np.inf
    order = np.lexsort((np.arange(len(cand)), cand, segs.pid))
    firsts = order[np.searchsorted(segs.pid[order], np.arange(run.n))]
    H: dict[Vertex, set] = {z: set() for z in record.blocks}
    for pid, row in enumerate(firsts):
        if math.isinf(cand[row]):
            continue
        H[(int(segs.zx[row]), int(segs.zy[row]))].add(pid)
    return H


def _in_H(record: ColouringRecord, run: EpidemicRun, z: Vertex, pid: int) -> bool:
    """True when the particle's first coloured-block presence is z at tau_z
    (assumes it is in z at tau_z).  Exact at block boundaries."""
    tau = record.blocks[z].tau
    L = record.params.L
    jt, xy = run.jumps_of(pid)
    pos = (int(run.birth[pid, 0]), int(run.birth[pid, 1]))
    t_lo = Fraction(0)
    for k in range(len(jt) + 1):
        t_hi = Fraction(float(jt[k])) if k < len(jt) else tau
        if t_hi > tau:
            t_hi = tau
        if t_hi > t_lo:
            w = block_of(pos, L)
            info = record.blocks.get(w)
            if info is not None and max(t_lo, info.tau) < t_hi:
                return False
        if k < len(jt):
            t_lo = Fraction(float(jt[k]))
            pos = (int(xy[k, 0]), int(xy[k, 1]))
        if t_lo >= tau:
            break
    return True


def principal_particles(B: Vertex, record: ColouringRecord,
                        run: EpidemicRun) -> frozenset:
    """Particles in B at tau_B whose whole past stays inside the cone
    d(position at tau_B - u, B) <= (L/20) * floor(u / xi)."""
    params = record.params
    L = params.L
    tau = record.blocks[B].tau
    xi = params.xi
    slope = Fraction(L, 20)
    segs = run.segments(L)
    mask = (segs.zx == B[0]) & (segs.zy == B[1])
    tf = float(tau)
    present = mask & (segs.t0 <= tf) & (segs.t1 > tf)
    cands = set(segs.pid[present].tolist())
    # exact re-check near the float boundary
    edge = mask & ((np.abs(segs.t0 - tf) < 1e-9) | (np.abs(segs.t1 - tf) < 1e-9))
    for row in np.nonzero(edge)[0]:
        cands.add(int(segs.pid[row]))
    out = set()
    for pid in sorted(cands):
        if block_of(run.position(pid, tau), L) != B:
            continue
        if _principal_cone_ok(run, pid, B, tau, xi, slope, L):
            out.add(pid)
    return frozenset(out)


def _principal_cone_ok(run, pid, B, tau, xi, slope, L) -> bool:
    jt, xy = run.jumps_of(pid)
    pos = (int(run.birth[pid, 0]), int(run.birth[pid, 1]))
    t_lo = Fraction(0)
    k = 0
    while t_lo < tau:
        t_hi = Fraction(float(jt[k])) if k < len(jt) else tau
        if t_hi > tau:
            t_hi = tau
        if t_hi > t_lo:
            d = dist_to_block(pos, B, L)
            if d > 0:
                # binding cone index over (tau - t_hi, tau - t_lo]
                kk = (tau - t_hi) / xi
                allowed = slope * math.floor(kk)
                if d > allowed:
                    return False
        if k < len(jt):
            t_lo = Fraction(float(jt[k]))
            pos = (int(xy[k, 0]), int(xy[k, 1]))
            k += 1
        else:
            break
    return True


def _rate1_path(run: EpidemicRun, pid: int, t0: Fraction, s_max: float,
                beta: float) -> tuple[list, float]:
    """Rate-1 reparametrised path from t0: local clock runs with real time
    while the particle is susceptible and beta times faster after infection.
    Returns (breakpoints [(s, pos)], evaluable cap <= s_max)."""
    iota = float(run.iota[pid])
    t0f = float(t0)
    s_turn = max(0.0, iota - t0f)   # local clock at the infection time

    def to_s(t: float) -> float:
        if t <= iota:
            return t - t0f
        return s_turn + beta * (t - max(iota, t0f))

    def to_t(s: float) -> float:
        if s <= s_turn:
            return t0f + s
        return max(iota, t0f) + (s - s_turn) / beta

    t_need = to_t(s_max)
    cap = s_max if t_need <= run.horizon else to_s(run.horizon)
    jt, xy = run.jumps_of(pid)
    i = run._count_le(jt, t0)
    out = [(0.0, run.position(pid, t0))]
    while i < len(jt):
        s = to_s(float(jt[i]))
        if s >= cap:
            break
        out.append((s, (int(xy[i, 0]), int(xy[i, 1]))))
        i += 1
    return out, cap


def _real_path(run: EpidemicRun, pid: int, t0: Fraction, span: float) -> tuple[list, float]:
    """Breakpoints [(dt, pos)] over real time [t0, t0 + span]."""
    cap = min(span, run.horizon - float(t0))
    jt, xy = run.jumps_of(pid)
    i = run._count_le(jt, t0)
    out = [(0.0, run.position(pid, t0))]
    while i < len(jt) and float(jt[i]) - float(t0) < cap:
        out.append((float(jt[i]) - float(t0), (int(xy[i, 0]), int(xy[i, 1]))))
        i += 1
    return out, cap


def evaluate_seed_events(B: Vertex, record: ColouringRecord, run: EpidemicRun,
                         params: ColouringParams | None = None,
                         candidates: frozenset | None = None) -> dict:
    """Fast-spread events of block B at its recorded ignition site.

    A1: all nine neighbouring blocks have a recorded ignition walk staying
    within alpha*L/2 of its start over the window Xi.  A2 (per half-scale
    block B', keyed (B', x)): some principal first-coloured particle's
    rate-1 path meets the ignition walk and then enters B' before leaving
    the covering region of x.  seed = not (A1 and all A2).  Events that
    cannot be verified from the run count as failed, so the seed flag only
    errs towards more seeds.
    """
    params = params or record.params
    info = record.blocks[B]
    L = params.L
    Xi = params.Xi
    beta = run.params.d_i

    a1 = True
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            w = (B[0] + dx, B[1] + dy)
            nb = record.blocks.get(w)
            if nb is None or nb.rule == "a" or nb.x is None:
                a1 = False
                break
            path, cap = _real_path(run, nb.pid, nb.tau, Xi)
            if cap < Xi:
                a1 = False
                break
            x0 = nb.x
            half = params.alphaL / 2
            if any(abs(p[0] - x0[0]) + abs(p[1] - x0[1]) > half
                   for _, p in path):
                a1 = False
                break
        if not a1:
            break

    if info.rule == "a" or info.x is None:
        return {"A1": a1, "A2": {}, "seed": True}

    x = info.x
    if candidates is None:
        hm = info.Hm if info.Hm is not None else principal_particles(B, record, run)
        if info.H is not None:
            candidates = frozenset(hm & info.H)
        else:
            candidates = frozenset(p for p in hm if _in_H(record, run, B, p))

    wpath, wcap = _real_path(run, info.pid, info.tau, Xi)
    ux = covering_blocks(x, L, params.alphaL)
    # per candidate: rate-1 path, meeting time with the walk, U_x exit time
    tours = []
    for pid in sorted(candidates):
        apath, acap = _rate1_path(run, pid, info.tau, Xi, beta)
        cap = min(acap, wcap)
        times = sorted({s for s, _ in apath} | {s for s, _ in wpath})
        meet = None
        for s in times:
            if s >= cap:
                break
            if _at(apath, s) == _at(wpath, s):
                meet = s
                break
        if meet is None:
            continue
        exit_s = cap
        for s, p in apath:
            if block_of(p, L) not in ux:
                exit_s = s
                break
        tours.append((apath, cap, meet, exit_s))
    a2: dict = {}
    for w in half_blocks(B):
        hb = half_block_bounds(w, L)
        ok = False
        for apath, cap, meet, exit_s in tours:
            entry = None
            for s, p in apath:
                if s < meet or s > exit_s or s >= cap:
                    continue
                if _in_bounds(p, hb):
                    entry = s
                    break
            if entry is None and meet <= exit_s and _in_bounds(_at(apath, meet), hb):
                entry = meet
            if entry is not None:
                ok = True
                break
        a2[(w, x)] = ok
    seed = not (a1 and all(a2.values()))
    return {"A1": a1, "A2": a2, "seed": seed}


def _at(path: list, s: float):
    pos = path[0][1]
    for t, p in path:
        if t <= s:
            pos = p
        else:
            break
    return pos


def _annotate(record: ColouringRecord, run: EpidemicRun, evaluate: str) -> None:
    if evaluate == "tau":
        return
    H = None
    if evaluate == "full":
        H = _sigma_pass(record, run)
        for z, b in record.blocks.items():
            b.H = frozenset(H[z])
            b.Hm = principal_particles(z, record, run)
    for z, b in sorted(record.blocks.items()):
        if b.rule == "a":
            b.seed = True
            continue
        if b.Hm is None:
            b.Hm = principal_particles(z, record, run)
        ev = evaluate_seed_events(z, record, run)
        b.A1, b.A2, b.seed = ev["A1"], ev["A2"], ev["seed"]


# ---------------------------------------------------------------------------
# derived clocks


@dataclass
class DerivedClocks:
    params: ColouringParams
    window: Window
    red: dict                    # directed edge -> Fraction in [0, s]
    blue: dict                   # directed edge -> Fraction in [0, kappa*s]
    kappa: dict                  # directed edge -> Fraction
    order: set                   # (u, v) pairs with u before v at equal tau
    seeds: frozenset
    sources: dict                # block -> Fraction activation time

    def to_ssp_instance(self) -> sspmod.SSPInstance:
        return sspmod.SSPInstance(
            window=self.window, seeds=self.seeds, sources=self.sources,
            red=self.red, blue=self.blue, kappa=self.kappa,
            red_unit=self.params.unit,
            allow_blue_sources=any(z in self.seeds for z in self.sources))

    def to_json(self) -> dict:
        return {"params": self.params.to_json(),
                "window": self.window.to_json(),
                "unit": str(self.params.unit),
                "edges": [[list(u), list(v), str(self.red[(u, v)]),
                           str(self.blue[(u, v)]), str(self.kappa[(u, v)])]
                          for (u, v) in sorted(self.red)],
                "order": [[list(u), list(v)] for u, v in sorted(self.order)],
                "seeds": [list(z) for z in sorted(self.seeds)],
                "sources": {f"{z[0]},{z[1]}": str(t)
                            for z, t in sorted(self.sources.items())}}


def _si_order(record: ColouringRecord) -> set:
    """Pairs (u, v) of simultaneously ignited blocks with u closer to the
    shared ignition site (exact ties broken lexicographically and flagged
    at colouring time)."""
    out = set()
    seen = set()
    for z, b in record.blocks.items():
        if b.group is None or b.group in seen:
            continue
        seen.add(b.group)
        g = list(b.group)
        for i in range(len(g)):
            for j in range(i + 1, len(g)):
                out.add((g[i], g[j]))
    return out


def derive_clocks(record: ColouringRecord,
                  params: ColouringParams | None = None) -> DerivedClocks:
    """Clocks on directed block-lattice edges reproducing the colouring:
    red is the tau increment capped at the unit s; blue is the increment
    (full at exactly one band delay); both are zero inside simultaneous
    ignition groups along the recorded order."""
    params = params or record.params
    if any(b.seed is None for b in record.blocks.values()):
        raise ValueError("record lacks seed evaluation; rerun with evaluate != 'tau'")
    bw = record.window
    s = params.unit
    order = _si_order(record)
    red: dict = {}
    blue: dict = {}
    kap: dict = {}
    for u in bw:
        tu = record.blocks[u].tau
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            v = (u[0] + dx, u[1] + dy)
            if not bw.contains(v):
                continue
            k = params.kappa_band(v)
            kap[(u, v)] = k
            diff = record.blocks[v].tau - tu
            if diff > 0:
                red[(u, v)] = min(diff, s)
                blue[(u, v)] = diff
            elif diff == 0 and (u, v) in order:
                red[(u, v)] = Fraction(0)
                blue[(u, v)] = Fraction(0)
            else:
                red[(u, v)] = s
                blue[(u, v)] = k * s
    sources = {z: Fraction(0) for z in record.sources()}
    return DerivedClocks(params, bw, red, blue, kap, order,
                         record.seeds(), sources)


# ---------------------------------------------------------------------------
# equivalence check


@dataclass
class CheckReport:
    ok: bool
    witness: dict | None
    n_blocks: int = 0
    n_red: int = 0
    n_blue: int = 0
    n_seeds: int = 0
    n_ignited: int = 0

    def __bool__(self) -> bool:
        return self.ok


def check_si_to_ssp(record: ColouringRecord,
                    params: ColouringParams | None = None) -> CheckReport:
    """Feed the derived clocks into the spread-process engine and verify

    * timer closure: every block is coloured no later than any coloured
      neighbour plus the receiving band delay (exact),
    * the compiled instance validates (clock ranges, zero-edge acyclicity),
    * the engine colouring time equals tau on every window block (exact),
    * red blocks are exactly ignited non-seeds, and every non-ignited block
      is blue with a full blue firing from some blue neighbour.

    Returns the first failure as a witness dict.
    """
    params = params or record.params
    bw = record.window
    fail = lambda w: CheckReport(False, w, n_blocks=bw.size)
    for u in bw:
        tu = record.blocks[u].tau
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            v = (u[0] + dx, u[1] + dy)
            if not bw.contains(v):
                continue
            tv = record.blocks[v].tau
            if tv - tu > params.delay(v):
                return fail({"kind": "closure", "block": v, "neighbour": u,
                             "gap": str(tv - tu), "delay": str(params.delay(v))})
    clocks = derive_clocks(record, params)
    inst = clocks.to_ssp_instance()
    ci = inst.compile()
    rep = sspmod.validate(ci)
    if not rep.ok:
        return fail({"kind": "invalid-instance", "problems": rep.problems})
    out = sspmod.run_ssp(ci, mode="python")
    for z in bw:
        T = out.time(z)
        tau = record.blocks[z].tau
        if T != tau:
            return fail({"kind": "time-mismatch", "block": z,
                         "engine": None if T is None else str(T),
                         "colouring": str(tau)})
    ign = set(record.ignited())
    seeds = clocks.seeds
    n_red = n_blue = 0
    for z in bw:
        col = out.colour(z)
        if col == "red":
            n_red += 1
            if z not in ign or z in seeds:
                return fail({"kind": "red-not-ignited-nonseed", "block": z,
                             "ignited": z in ign, "seed": z in seeds})
        else:
            n_blue += 1
        if z not in ign:
            if col != "blue":
                return fail({"kind": "nonignited-not-blue", "block": z})
            if z in clocks.sources:
                continue
            Tz = out.time(z)
            witness = False
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                u = (z[0] + dx, z[1] + dy)
                if bw.contains(u) and out.colour(u) == "blue" \
                        and out.time(u) + clocks.blue[(u, z)] == Tz:
                    witness = True
                    break
            if not witness:
                return fail({"kind": "no-blue-firing", "block": z})
    return CheckReport(True, None, bw.size, n_red, n_blue,
                       len(seeds), len(ign))


@dataclass(frozen=True)
class TraceReport:
    """Outcome of the interacting-pair containment check."""

    ok: bool
    witness: dict | None
    n_checked: int = 0
    n_skipped: int = 0
    tau_exit: Fraction | None = None

    def __bool__(self) -> bool:
        return self.ok


def _cube_inside_disk(z: Vertex, L: int, radius) -> bool:
    bounds = block_bounds(z, L)
    far = sum(max(abs(lo), abs(hi)) for lo, hi in bounds)
    return far <= radius


def check_two_scale_trace(fine: ColouringRecord, coarse: ColouringRecord,
                          tau_cap=None) -> TraceReport:
    """Check the fine/coarse containment on two colourings of one run.

    ``fine`` is a record at scale L with timer speed 8x that of ``coarse``
    at scale 2L, with ``coarse.R + 2L <= fine.r``.  Every fine block whose
    coarse parent (under coordinate halving) turned red by time t must be
    red by t + xi_{2L}/kappa0 or be a seed, for all t before the fine
    colouring first leaves D(0, fine.R).

    That exit is rarely observable in a finite window (fine.R is at least
    512 * fine.r whenever fine.r > 0), so the caller may pass ``tau_cap``,
    a justified lower bound on the exit time; the check then runs up to
    min(cap, first recorded exit).  Raises when neither bound exists.
    """
    pf, pc = fine.params, coarse.params
    if pc.L != 2 * pf.L:
        raise ValueError("coarse scale must be twice the fine scale")
    if pf.alpha != pc.alpha or pf.kappa0 != pc.kappa0:
        raise ValueError("records must share alpha and kappa0")
    if pf.chi != 8 * pc.chi:
        raise ValueError("fine timer delay must be 8x the coarse one")
    if pc.R + pc.L > pf.r:
        raise ValueError("need coarse.R + 2L <= fine.r")
    bounds = [fine.tau(u) for u in fine.blocks
              if not _cube_inside_disk(u, pf.L, pf.R)]
    if tau_cap is not None:
        bounds.append(Fraction(tau_cap))
    if not bounds:
        raise ValueError("exit time unobservable in window; pass tau_cap")
    tau_exit = min(bounds)
    slack = pc.xi / pf.kappa0
    checked = skipped = 0
    witness = None
    for t2, w in sorted((info.tau, z) for z, info in coarse.blocks.items()):
        info = coarse.blocks[w]
        if info.rule == "a":
            continue
        if info.seed is None:
            raise ValueError("coarse record lacks seed annotations")
        if info.seed or t2 + slack > tau_exit:
            continue
        for dx in (0, 1):
            for dy in (0, 1):
                u = (2 * w[0] + dx, 2 * w[1] + dy)
                fu = fine.blocks.get(u)
                if fu is None:
                    skipped += 1
                    continue
                checked += 1
                if fu.seed is None:
                    raise ValueError("fine record lacks seed annotations")
                if fu.seed:
                    continue
                if fu.rule != "a" and fu.tau <= t2 + slack:
                    continue
                if witness is None:
                    witness = {"kind": "trace-violation", "coarse": w,
                               "fine": u, "coarse_tau": t2,
                               "bound": t2 + slack, "fine_tau": fu.tau,
                               "fine_rule": fu.rule}
    return TraceReport(witness is None, witness, checked, skipped, tau_exit)


# ---------------------------------------------------------------------------
# infection completion


def infection_completion_stats(record: ColouringRecord, run: EpidemicRun) -> dict:
    """Per-block delay between colouring and the infection of every particle
    first coloured there; blocks with never-infected members are censored."""
    if any(b.H is None for b in record.blocks.values()):
        raise ValueError("record lacks H; rerun with evaluate='full'")
    delays = {}
    censored = []
    for z, b in sorted(record.blocks.items()):
        worst = 0.0
        bad = False
        for pid in b.H:
            it = float(run.iota[pid])
            if math.isinf(it):
                bad = True
                break
            worst = max(worst, it - float(b.tau))
        if bad:
            censored.append(z)
        else:
            delays[z] = worst
    return {"delays": delays, "censored": censored}


def _blocks_within(record: ColouringRecord, B: Vertex, radius: float) -> list[Vertex]:
    """Blocks whose cubes lie inside the radius-ball around B's cube; raises
    when the ball is not fully covered by the record's window."""
    L = record.params.L
    bw = record.window
    bb = block_bounds(B, L)
    reach = math.ceil(radius / L) + 2
    out = []
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            z = (B[0] + dx, B[1] + dy)
            zb = block_bounds(z, L)
            worst = 0
            for (alo, ahi), (blo, bhi) in zip(zb, bb):
                worst += max(_gap(alo, blo, bhi), _gap(ahi, blo, bhi))
            if worst <= radius:
                if not bw.contains(z):
                    raise ValueError(
                        f"block ball of radius {radius} around {B} leaves the window")
                out.append(z)
    return out


def _ball_block_count(B: Vertex, radius: float, L: int) -> int:
    """Number of blocks (full lattice) whose cubes lie in D(B, radius)."""
    bb = block_bounds(B, L)
    reach = math.ceil(radius / L) + 2
    n = 0
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            zb = block_bounds((B[0] + dx, B[1] + dy), L)
            worst = 0
            for (alo, ahi), (blo, bhi) in zip(zb, bb):
                worst += max(_gap(alo, blo, bhi), _gap(ahi, blo, bhi))
            if worst <= radius:
                n += 1
    return n


def _confined(run: EpidemicRun, pid: int, t0: Fraction, span: float,
              bound: float) -> bool:
    """True when the particle verifiably stays within ``bound`` (L1) of its
    position at t0 over [t0, t0 + span]; False when the run ends earlier."""
    path, cap = _real_path(run, pid, t0, span)
    if cap < span:
        return False
    p0 = path[0][1]
    return all(abs(p[0] - p0[0]) + abs(p[1] - p0[1]) <= bound for _, p in path)


def event_O(B: Vertex, y: float, record: ColouringRecord, run: EpidemicRun) -> bool:
    """All particles first coloured in blocks within 2y of B move at most
    y**(7/20) over the y**(2/3) window after their block's colouring."""
    for z in _blocks_within(record, B, 2 * y):
        b = record.blocks[z]
        if b.H is None:
            raise ValueError("record lacks H; rerun with evaluate='full'")
        for pid in sorted(b.H):
            if not _confined(run, pid, b.tau, y ** (2 / 3), y ** 0.35):
                return False
    return True


def event_Q(B: Vertex, y: float, record: ColouringRecord, run: EpidemicRun) -> bool:
    """All particles first coloured in B move at most y**(11/20) over the
    y window after tau_B."""
    b = record.blocks[B]
    if b.H is None:
        raise ValueError("record lacks H; rerun with evaluate='full'")
    return all(_confined(run, pid, b.tau, y, y ** 0.55) for pid in sorted(b.H))


def event_Z(B: Vertex, y: float, record: ColouringRecord, run: EpidemicRun) -> bool:
    """Every block within y**(5/9) of B has, at time tau_B + y**(3/5), at
    least half as many nearby infected particles (within 2 y**(2/5) of it)
    as there are blocks within y**(2/5) of it."""
    t = float(record.blocks[B].tau) + y ** 0.6
    if t > run.horizon:
        return False
    inf_pids = np.nonzero(run.iota <= t)[0]
    pos = [run.position(int(p), Fraction(t)) for p in inf_pids]
    for z in _blocks_within(record, B, y ** (5 / 9)):
        need = _ball_block_count(z, y ** 0.4, record.params.L) / 2
        count = sum(1 for p in pos
                    if dist_to_block(p, z, record.params.L) <= 2 * y ** 0.4)
        if count < need:
            return False
    return True


# ---------------------------------------------------------------------------
# lazy generation

_WALKER_SID = 1 << 62


class _Lazy:
    """Event-driven twin of the direct simulation: particles are revealed
    per block when it colours (present-at-colouring via exact backward
    rejection; later entrants via an oversampled pool on D(B, h))."""

    def __init__(self, sip: simod.SIParams, cp: ColouringParams, until: float):
        _check_run_compat_lazy(sip)
        self.sip = sip
        self.cp = cp
        self.until = float(until)
        self.box = sip.box
        self.bw = block_window(self.box, cp.L)
        self.h = math.ceil(6 * math.sqrt(sip.d_s * float(cp.chi)) + cp.L)
        self.master = sip.rng_seed
        # particle arrays (python lists; lazy populations are small)
        self.key: list[int] = []
        self.ctr: list[int] = []
        self.pos: list[Vertex] = []
        self.infected: list[bool] = []
        self.iota: list[float] = []
        self.frozen: list[bool] = []
        self.freeze_t: list[float] = []
        self.next_t: list[float] = []
        self.seq: list[int] = []
        self.jumps: list[list] = []
        self.birth: list[Vertex] = []
        self.init_inf: list[bool] = []
        self.occ: dict[Vertex, set] = {}
        self.inf_at: dict[Vertex, int] = {}
        self.blocks: dict[Vertex, BlockInfo] = {}
        self.bound: dict[Vertex, Fraction] = {}
        self.heap: list = []
        self.hseq = 0
        self.ties: list = []
        self.diag = {"case1_sampled": 0, "case1_accepted": 0,
                     "case1_deep_sampled": 0, "case1_deep_accepted": 0,
                     "pool_sampled": 0, "pool_revealed": 0, "wall_rejects": 0}

    # -- particle plumbing

    def _push(self, t: Fraction, rank: int, kind: str, data) -> None:
        heappush(self.heap, (t, rank, self.hseq, kind, data))
        self.hseq += 1

    def add_particle(self, key, ctr, pos, t, infected, jumps, birth,
                     next_t, init=False) -> int:
        pid = len(self.key)
        self.key.append(key)
        self.ctr.append(ctr)
        self.pos.append(pos)
        self.infected.append(infected)
        self.iota.append(t if infected else math.inf)
        self.frozen.append(False)
        self.freeze_t.append(math.inf)
        self.next_t.append(next_t)
        self.seq.append(0)
        self.jumps.append(jumps)
        self.birth.append(birth)
        self.init_inf.append(init)
        self.occ.setdefault(pos, set()).add(pid)
        if infected:
            self.inf_at[pos] = self.inf_at.get(pos, 0) + 1
        self._push(Fraction(next_t), 0, "jump", pid)
        return pid

    def _infect(self, pid: int, t: float) -> None:
        self.infected[pid] = True
        self.iota[pid] = t
        p = self.pos[pid]
        self.inf_at[p] = self.inf_at.get(p, 0) + 1
        ratio = self.sip.d_s / self.sip.d_i
        if not self.frozen[pid] and ratio != 1.0:
            self.next_t[pid] = t + (self.next_t[pid] - t) * ratio
            self.seq[pid] += 1
            self._push(Fraction(self.next_t[pid]), 0, "jump", pid)

    def _contact(self, pid: int, t: float) -> None:
        """Instant-variant infections at the particle's site."""
        p = self.pos[pid]
        if self.infected[pid]:
            for b in sorted(self.occ.get(p, ())):
                if not self.infected[b]:
                    self._infect(b, t)
        elif self.inf_at.get(p, 0) > 0:
            self._infect(pid, t)

    # -- colouring

    def relax_from(self, u: Vertex) -> None:
        tu = self.blocks[u].tau
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            z = (u[0] + dx, u[1] + dy)
            if not self.bw.contains(z) or z in self.blocks:
                continue
            t = tu + self.cp.delay(z)
            if z not in self.bound or t < self.bound[z]:
                self.bound[z] = t
                self._push(t, 2, "relax", (z, u))

    def colour(self, z: Vertex, tau: Fraction, rule: str, x, pid, parent=None) -> None:
        sats = []
        if rule == "b":
            if self.bound.get(z) == tau:
                self.ties.append({"kind": "entry-timer", "block": z, "t": float(tau)})
            for w in sorted(covering_blocks(x, self.cp.L, self.cp.alphaL),
                            key=lambda w: (dist_to_block(x, w, self.cp.L), w)):
                if w != z and self.bw.contains(w) and w not in self.blocks:
                    sats.append(w)
        group = (z,) + tuple(sats) if sats else None
        self.blocks[z] = BlockInfo(tau, rule, x, pid, parent=parent,
                                   group=group, rank=0)
        newly = [z]
        for i, w in enumerate(sats, start=1):
            self.blocks[w] = BlockInfo(tau, "c", x, pid, group=group, rank=i)
            newly.append(w)
        for w in newly:
            self.relax_from(w)
            self.reveal_case1(w)
            self.spawn_pool(w)

    # -- backward sampling

    def _backward(self, key: int, p0: Vertex, tau: Fraction) -> tuple | None:
        """Walk the past [0, tau] from p0; None when the particle would have
        been in a block coloured strictly before its stay there ended (or
        would have left the box, an accepted finite-box discrepancy counted
        in the diagnostics).  Returns (jumps ascending from time 0, birth
        position, ctr used)."""
        tau_f = float(tau)
        ctr = 0
        u = 0.0
        pos = p0
        trail = []  # (forward jump time, destination)
        while True:
            gap = rngmod.stream_exp(key, ctr, self.sip.d_s)
            ctr += 1
            u_next = u + gap
            # forward end of the current presence interval, exact at u = 0
            end = tau if u == 0.0 else Fraction(tau_f - u)
            info = self.blocks.get(block_of(pos, self.cp.L))
            if info is not None and info.tau < end:
                return None
            if u_next >= tau_f:
                return list(reversed(trail)), pos, ctr
            nd, used = rngmod.stream_direction(key, ctr, 2)
            ctr += used
            axis, sign = nd >> 1, 1 - 2 * (nd & 1)
            prev = pos
            # stepping back in time: invert the jump direction
            cand = (pos[0] - sign, pos[1]) if axis == 0 else (pos[0], pos[1] - sign)
            if not self.box.contains(cand):
                self.diag["wall_rejects"] += 1
                return None
            trail.append((tau_f - u_next, prev))
            pos = cand
            u = u_next

    def reveal_case1(self, z: Vertex) -> None:
        info = self.blocks[z]
        tau_f = float(info.tau)
        mu = self.sip.mu
        if mu == 0:
            return
        bidx = self.bw.index(z)
        gen = rngmod.philox(self.master, 7, bidx, 0)
        (xlo, xhi), (ylo, yhi) = block_bounds(z, self.cp.L)
        counts = gen.poisson(mu, size=(xhi - xlo + 1, yhi - ylo + 1))
        j = 0
        for ix in range(counts.shape[0]):
            for iy in range(counts.shape[1]):
                depth = min(ix, counts.shape[0] - 1 - ix, iy, counts.shape[1] - 1 - iy) + 1
                deep = depth >= self.cp.L // 4
                for _ in range(int(counts[ix, iy])):
                    self.diag["case1_sampled"] += 1
                    if deep:
                        self.diag["case1_deep_sampled"] += 1
                    key = rngmod.derive_key(self.master, "case1", bidx, j)
                    j += 1
                    p0 = (xlo + ix, ylo + iy)
                    back = self._backward(key, p0, info.tau)
                    if back is None:
                        continue
                    hist, birth, ctr = back
                    self.diag["case1_accepted"] += 1
                    if deep:
                        self.diag["case1_deep_accepted"] += 1
                    gap = rngmod.stream_exp(key, ctr, self.sip.d_s)
                    pid = self.add_particle(key, ctr + 1, p0, tau_f, False,
                                            list(hist), birth, tau_f + gap)
                    self._contact(pid, tau_f)

    def spawn_pool(self, z: Vertex) -> None:
        info = self.blocks[z]
        tau_f = float(info.tau)
        chi_f = float(self.cp.chi)
        mu = self.sip.mu
        if mu == 0:
            return
        bidx = self.bw.index(z)
        gen = rngmod.philox(self.master, 7, bidx, 1)
        bb = block_bounds(z, self.cp.L)
        (xlo, xhi), (ylo, yhi) = bb
        sites = []
        for x in range(max(xlo - self.h, self.box.lo[0]),
                       min(xhi + self.h, self.box.hi[0] - 1) + 1):
            for y in range(max(ylo - self.h, self.box.lo[1]),
                           min(yhi + self.h, self.box.hi[1] - 1) + 1):
                v = (x, y)
                d = dist_to_block(v, z, self.cp.L)
                if d == 0 or d > self.h:
                    continue
                w = self.blocks.get(block_of(v, self.cp.L))
                if w is not None:
                    continue
                sites.append(v)
        counts = gen.poisson(mu, size=len(sites))
        j = 0
        for v, c in zip(sites, counts):
            for _ in range(int(c)):
                self.diag["pool_sampled"] += 1
                key = rngmod.derive_key(self.master, "case2", bidx, j)
                j += 1
                self._pool_particle(z, key, v, info.tau, chi_f, bb)

    def _pool_particle(self, z, key, p0, tau, chi_f, bb) -> None:
        """Forward-walk a pool candidate; on first entry into z within the
        window schedule a reveal (validity and the backward past are checked
        at reveal time)."""
        ctr = 0
        pos = p0
        tau_f = float(tau)
        t = tau_f
        path = [(tau_f, p0)]
        entry = None
        while True:
            gap = rngmod.stream_exp(key, ctr, self.sip.d_s)
            ctr += 1
            t += gap
            if t > tau_f + chi_f:
                break
            nd, used = rngmod.stream_direction(key, ctr, 2)
            ctr += used
            axis, sign = nd >> 1, 1 - 2 * (nd & 1)
            cand = (pos[0] + sign, pos[1]) if axis == 0 else (pos[0], pos[1] + sign)
            if not self.box.contains(cand):
                self.diag["wall_rejects"] += 1
                break
            pos = cand
            path.append((t, pos))
            if _in_bounds(pos, bb):
                entry = (t, ctr)
                break
        if entry is None:
            return
        te, ctr_e = entry
        if dist_to_block(p0, z, self.cp.L) > self.h - self.cp.L:
            raise LazyOversamplingError(
                f"pool particle for block {z} started {dist_to_block(p0, z, self.cp.L)}"
                f" away (shell limit {self.h - self.cp.L})")
        self._push(Fraction(te), 1, "reveal",
                   (z, key, ctr_e, path, p0, tau))

    def _reveal_pool(self, data) -> None:
        z, key, ctr_e, path, p0, tau = data
        te, pe = path[-1]
        # killed when any pre-entry presence interval lies in a block that
        # coloured before the interval ended
        for k in range(len(path) - 1):
            t0, p = path[k]
            t1 = path[k + 1][0]
            info = self.blocks.get(block_of(p, self.cp.L))
            if info is not None and info.tau < Fraction(t1):
                return
        back = self._backward(rngmod.derive_key(key, "past"), p0, tau)
        if back is None:
            return
        hist, birth, _ = back
        self.diag["pool_revealed"] += 1
        hist = list(hist) + [(t, p) for t, p in path[1:]]
        gap = rngmod.stream_exp(key, ctr_e, self.sip.d_s)
        pid = self.add_particle(key, ctr_e + 1, pe, te, False, hist, birth,
                                te + gap)
        self._contact(pid, te)

    # -- main loop

    def _jump(self, pid: int, t: float) -> None:
        nd, used = rngmod.stream_direction(self.key[pid], self.ctr[pid], 2)
        self.ctr[pid] += used
        axis, sign = nd >> 1, 1 - 2 * (nd & 1)
        p = self.pos[pid]
        cand = (p[0] + sign, p[1]) if axis == 0 else (p[0], p[1] + sign)
        if not self.box.contains(cand):
            self.frozen[pid] = True
            self.freeze_t[pid] = t
            return
        self.occ[p].discard(pid)
        self.occ.setdefault(cand, set()).add(pid)
        was_inf = self.infected[pid]
        if was_inf:
            self.inf_at[p] = self.inf_at.get(p, 0) - 1
            self.inf_at[cand] = self.inf_at.get(cand, 0) + 1
        self.pos[pid] = cand
        self.jumps[pid].append((t, cand))
        rate = self.sip.d_i if was_inf else self.sip.d_s
        gap = rngmod.stream_exp(self.key[pid], self.ctr[pid], rate)
        self.ctr[pid] += 1
        self.next_t[pid] = t + gap
        self.seq[pid] += 1
        self._push(Fraction(self.next_t[pid]), 0, "jump", pid)
        if was_inf and t > self.iota[pid]:
            z = block_of(cand, self.cp.L)
            if self.bw.contains(z) and z not in self.blocks:
                self.colour(z, Fraction(t), "b", cand, pid)
        self._contact(pid, t)

    def run(self) -> tuple[EpidemicRun, ColouringRecord]:
        key0 = rngmod.derive_key(self.master, "particle", _WALKER_SID)
        origin = (0,) * 2
        first = rngmod.stream_exp(key0, 0, self.sip.d_i)
        self.add_particle(key0, 1, origin, 0.0, True, [], origin, first, init=True)
        b0 = block_of(origin, self.cp.L)
        if self.bw.contains(b0):
            self.colour(b0, Fraction(0), "o", origin, 0)
        horizon = Fraction(self.until)
        while self.heap:
            t, rank, _, kind, data = self.heap[0]
            if t > horizon:
                break
            heappop(self.heap)
            if kind == "jump":
                pid = data
                tf = float(t)
                if self.frozen[pid] or tf != self.next_t[pid]:
                    continue
                self._jump(pid, tf)
            elif kind == "reveal":
                self._reveal_pool(data)
            else:
                z, u = data
                if z in self.blocks or self.bound.get(z) != t:
                    continue
                self.blocks[z] = BlockInfo(t, "a", parent=u)
                self.relax_from(z)
                self.reveal_case1(z)
                self.spawn_pool(z)
        missing = [z for z in self.bw if z not in self.blocks]
        if missing:
            raise ColouringHorizonError(missing, self.until)
        parts = [{"birth": self.birth[i], "iota": self.iota[i],
                  "initial_infected": self.init_inf[i], "frozen": self.frozen[i],
                  "freeze_time": self.freeze_t[i], "jumps": self.jumps[i]}
                 for i in range(len(self.key))]
        run = EpidemicRun.from_parts(self.sip, self.until, parts, dict(self.diag))
        record = ColouringRecord(self.cp, self.bw, self.until, self.blocks,
                                 self.ties)
        return run, record


def _check_run_compat_lazy(sip: simod.SIParams) -> None:
    if sip.dim != 2 or sip.variant != "instant" or sip.d_s != 1.0:
        raise ValueError("lazy generation supports the 2d instant variant "
                         "normalised to d_s = 1")


def lazy_generate(sip: simod.SIParams, params: ColouringParams,
                  until: float | None = None,
                  evaluate: str = "tau") -> tuple[EpidemicRun, ColouringRecord]:
    """Generate a run by revealing particles block by block instead of
    simulating the whole box.  Present-at-colouring particles are sampled
    with exact backward rejection against earlier-coloured blocks; later
    entrants come from an oversampled pool on D(B, h), h = ceil(6*sqrt(D_S
    chi) + L), with a hard error when a revealed particle starts in the
    outermost shell of width L.  The ignition walk of each block is the
    ignition particle's own continued trajectory.
    """
    until = sip.t_max if until is None else until
    run, record = _Lazy(sip, params, until).run()
    _annotate(record, run, evaluate)
    return run, record


# ---------------------------------------------------------------------------
# Monte Carlo seed probability


def _walk_path(gen, rate: float, span: float, start=(0, 0)) -> list:
    """Continuous-time walk breakpoints [(t, pos)] over [0, span]."""
    t = 0.0
    pos = start
    out = [(0.0, pos)]
    while True:
        t += gen.exponential(1.0 / rate) if rate > 0 else math.inf
        if t >= span:
            return out
        step = int(gen.integers(0, 4))
        axis, sign = step >> 1, 1 - 2 * (step & 1)
        pos = (pos[0] + sign, pos[1]) if axis == 0 else (pos[0], pos[1] + sign)
        out.append((t, pos))


def estimate_seed_probability(L: int, alpha, mu: float, beta: float,
                              n_samples: int, seed: int,
                              back_windows: int = 16) -> dict:
    """Monte Carlo estimate of the blue-seed probability of a far block at
    scale L: fresh ignition walks for the nine neighbouring blocks, a fresh
    Poisson cloud of rate-1 particles in B with the principal backward cone
    checked over ``back_windows`` cone windows (truncation can only
    overestimate the principal set, so the estimate is a lower bound on the
    seed probability), and the fast-entry events evaluated over every
    potential ignition site and all nine half-scale blocks."""
    cp = ColouringParams(L, alpha, 8 * _frac(alpha) * L * L, 0, 0, 4001)
    Xi = cp.Xi
    alphaL = cp.alphaL
    xi_f = float(cp.xi)
    B = (0, 0)
    bb = block_bounds(B, L)
    bhash = boundary_hash(B, L, alphaL)
    bxs = sorted({bx for _, bx in bhash})
    halves = [(w, half_block_bounds(w, L)) for w in half_blocks(B)]
    nine = [(B[0] + dx, B[1] + dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]
    walk_blocks = sorted(set(bxs) | set(nine))
    n_seed = 0
    a1_fail = 0
    for rep in range(n_samples):
        gen = rngmod.philox(seed, 11, rep)
        walks = {w: _walk_path(gen, beta, Xi) for w in walk_blocks}
        a1 = all(not any(abs(p[0]) + abs(p[1]) > alphaL / 2 for _, p in walks[w])
                 for w in nine)
        if not a1:
            a1_fail += 1
            n_seed += 1
            continue
        # principal cloud: positions at local time 0, backward cone check
        counts = gen.poisson(mu, size=(L, L))
        principals = []
        for ix in range(L):
            for iy in range(L):
                for _ in range(int(counts[ix, iy])):
                    p0 = (bb[0][0] + ix, bb[1][0] + iy)
                    back = _walk_path(gen, 1.0, back_windows * xi_f)
                    ok = True
                    for t, d in _cone_profile(back, p0, B, L):
                        if d > (L / 20) * math.floor(t / xi_f):
                            ok = False
                            break
                    if ok:
                        principals.append((p0, _walk_path(gen, 1.0, Xi)))
        seed_flag = False
        for x, bx in bhash:
            ux = covering_blocks(x, L, alphaL)
            wpath = walks[bx]
            for w, hb in halves:
                ok = False
                for p0, fwd in principals:
                    apath = [(t, (p0[0] + p[0], p0[1] + p[1])) for t, p in fwd]
                    wp = [(t, (x[0] + p[0], x[1] + p[1])) for t, p in wpath]
                    times = sorted({t for t, _ in apath} | {t for t, _ in wp})
                    meet = None
                    for s in times:
                        if _at(apath, s) == _at(wp, s):
                            meet = s
                            break
                    if meet is None:
                        continue
                    exit_s = Xi
                    for s, p in apath:
                        if block_of(p, L) not in ux:
                            exit_s = s
                            break
                    for s, p in apath:
                        if meet <= s <= exit_s and _in_bounds(p, hb):
                            ok = True
                            break
                    if not ok and meet <= exit_s and _in_bounds(_at(apath, meet), hb):
                        ok = True
                    if ok:
                        break
                if not ok:
                    seed_flag = True
                    break
            if seed_flag:
                break
        if seed_flag:
            n_seed += 1
    p_hat = n_seed / n_samples
    return {"L": L, "n": n_samples, "n_seed": n_seed, "p_hat": p_hat,
            "a1_fail": a1_fail, "ci95": _wilson(n_seed, n_samples)}


def _cone_profile(back: list, p0: Vertex, B: Vertex, L: int):
    """(backward time, distance) pairs at the binding end of each backward
    presence interval."""
    out = []
    for k, (t, p) in enumerate(back):
        pos = (p0[0] + p[0], p0[1] + p[1])
        out.append((t, dist_to_block(pos, B, L)))
    return out


def _wilson(k: int, n: int, z: float = 1.959964) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))
