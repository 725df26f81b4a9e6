"""Event-driven epidemic among random walkers in a finite box.

A Poisson(mu)-per-site sea of susceptible particles performs rate-``d_s``
continuous-time simple random walks; one infected particle is planted at
the origin and walks at rate ``d_i``.  Infection happens on co-location
and is absorbing: an infected particle keeps its embedded walk but its
clock switches to rate ``d_i`` (the residual waiting time is rescaled by
``d_s/d_i``, which preserves the exponential law).  Three infection rules
are supported:

* ``instant``  - every susceptible sharing a site with an infected particle
  is infected immediately and transitively;
* ``prob``     - each time a susceptible and an infected particle start
  sharing a site, the susceptible is infected with probability p (one coin
  per such meeting, drawn when the meeting starts);
* ``radius``   - like instant but with L1 contact radius rho (rho = 0 is
  exactly the instant rule).

Particles attempting to leave the box are frozen in place and flagged;
frozen particles still occupy their site (and can infect or be infected),
so runs where a frozen particle was ever infected carry a taint flag for
truncation diagnostics.

Every particle draws its jumps from a private counter-based stream keyed
by a stable identity, so adding particles never perturbs the trajectories
of existing ones.  The loop exists twice: a pure-python reference and a
numba kernel; both consume the streams identically and must produce
bit-identical logs (tested).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from . import rng as rngmod
from .lattice import Vertex, Window, disk

_U = np.uint64
_GAMMA = _U(rngmod.GAMMA)
_M30, _M27, _M31, _M11 = _U(30), _U(27), _U(31), _U(11)
_X1 = _U(0xBF58476D1CE4E5B9)
_X2 = _U(0x94D049BB133111EB)
_TWO53 = 2.0**-53

KIND_JUMP, KIND_INFECT, KIND_FREEZE = 0, 1, 2
KIND_NAMES = {KIND_JUMP: "jump", KIND_INFECT: "infect", KIND_FREEZE: "freeze"}
_VARIANT_CODES = {"instant": 0, "prob": 1, "radius": 2}

_MAX_SITES = 32_000_000


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class SIParams:
    """Model parameters.  ``log_level`` selects event verbosity: 0 nothing,
    1 infections and freezes, 2 also jumps of infected particles, 3 all
    jumps (required to rebuild full particle records)."""

    mu: float
    d_s: float
    d_i: float
    half_width: int
    t_max: float
    rng_seed: int
    dim: int = 2
    variant: str = "instant"
    p: float = 0.0
    rho: int = 0
    log_level: int = 1

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.d_s <= 0 or self.d_i <= 0:
            raise ValueError("jump rates must be > 0")
        if self.half_width < 1 or not (1 <= self.dim <= 3):
            raise ValueError("bad box geometry")
        if self.t_max <= 0:
            raise ValueError("t_max must be > 0")
        if self.variant not in _VARIANT_CODES:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "prob" and not (0.0 < self.p < 1.0):
            raise ValueError("prob variant needs p in (0, 1)")
        if self.variant == "radius" and (self.rho < 0 or self.rho != int(self.rho)):
            raise ValueError("radius variant needs integer rho >= 0")
        if self.box.size > _MAX_SITES:
            raise ValueError("box too large")

    @property
    def box(self) -> Window:
        return Window.centered(self.half_width, self.dim)

    def normalized(self) -> "SIParams":
        """Equivalent parameters with d_s = 1: rates divided by d_s and the
        horizon stretched by the same factor (pure time rescaling)."""
        theta = self.d_s
        return SIParams(self.mu, 1.0, self.d_i / theta, self.half_width,
                        self.t_max * theta, self.rng_seed, self.dim,
                        self.variant, self.p, self.rho, self.log_level)

    def to_json(self) -> dict:
        variant = self.variant
        if variant == "prob":
            variant = ["prob", self.p]
        elif variant == "radius":
            variant = ["radius", self.rho]
        return {"mu": self.mu, "D_S": self.d_s, "D_I": self.d_i,
                "d": self.dim, "half_width": self.half_width,
                "T_max": self.t_max, "rng_seed": self.rng_seed,
                "variant": variant, "log_level": self.log_level}

    @classmethod
    def from_json(cls, obj: dict) -> "SIParams":
        variant = obj.get("variant", "instant")
        p, rho = 0.0, 0
        if isinstance(variant, (list, tuple)):
            kind, arg = variant
            if kind == "prob":
                p = float(arg)
            elif kind == "radius":
                rho = int(arg)
            variant = kind
        return cls(float(obj["mu"]), float(obj["D_S"]), float(obj["D_I"]),
                   int(obj["half_width"]), float(obj["T_max"]),
                   int(obj["rng_seed"]), int(obj.get("d", 2)),
                   variant, p, rho, int(obj.get("log_level", 1)))


def suggested_half_width(params: SIParams, gamma_est: float) -> int:
    """Half-width fitting a linear front plus a diffusive tail."""
    t = params.t_max
    return math.ceil(gamma_est * t + 6.0 * math.sqrt(max(params.d_s, params.d_i) * t))


# ---------------------------------------------------------------------------
# state


class SIState:
    """Mutable simulation state; all per-particle data lives in arrays so
    the python and numba engines can share it."""

    def __init__(self, params: SIParams, pos, key, ctr, infected, frozen,
                 iota, freeze_time, next_time, seq, birth_pos,
                 initial_infected, ignition, coin_key, coin_ctr, time=0.0):
        self.params = params
        self.box = params.box
        self.pos = pos                      # flat site index, int64
        self.key = key                      # per-particle stream key, uint64
        self.ctr = ctr                      # stream counter, uint64
        self.infected = infected            # uint8
        self.frozen = frozen                # uint8
        self.iota = iota                    # float64, inf if never infected
        self.freeze_time = freeze_time      # float64, inf if never frozen
        self.next_time = next_time          # float64 pending jump time
        self.seq = seq                      # int64 pending-event validity tag
        self.birth_pos = birth_pos          # int64 flat site at t=0
        self.initial_infected = initial_infected  # uint8
        self.ignition = ignition            # uint8
        self.coin_key = coin_key
        self.coin_ctr = coin_ctr            # python int, advances per coin
        self.time = time

    @property
    def n(self) -> int:
        return len(self.pos)

    def position(self, pid: int) -> Vertex:
        return self.box.vertex(int(self.pos[pid]))

    def susceptible_ids(self) -> list[int]:
        return [int(i) for i in np.nonzero(self.infected == 0)[0]]

    def infected_ids(self) -> list[int]:
        return [int(i) for i in np.nonzero(self.infected == 1)[0]]

    @property
    def tainted(self) -> bool:
        return bool(np.any((self.frozen == 1) & (self.infected == 1)))

    def site_counts(self) -> np.ndarray:
        grid = np.zeros(self.box.size, dtype=np.int64)
        np.add.at(grid, self.pos, 1)
        return grid.reshape(self.box.shape)

    def copy(self) -> "SIState":
        return SIState(self.params, self.pos.copy(), self.key.copy(),
                       self.ctr.copy(), self.infected.copy(),
                       self.frozen.copy(), self.iota.copy(),
                       self.freeze_time.copy(), self.next_time.copy(),
                       self.seq.copy(), self.birth_pos.copy(),
                       self.initial_infected.copy(), self.ignition.copy(),
                       self.coin_key, self.coin_ctr, self.time)


@dataclass
class RunLog:
    """Flat event log: one row per jump/infection/freeze."""

    t: np.ndarray
    pid: np.ndarray
    site: np.ndarray
    kind: np.ndarray
    snapshots: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def empty(cls) -> "RunLog":
        return cls(np.empty(0), np.empty(0, np.int64),
                   np.empty(0, np.int64), np.empty(0, np.int8))

    @classmethod
    def concat(cls, chunks: Sequence["RunLog"]) -> "RunLog":
        if not chunks:
            return cls.empty()
        snaps = [s for c in chunks for s in c.snapshots]
        return cls(np.concatenate([c.t for c in chunks]),
                   np.concatenate([c.pid for c in chunks]),
                   np.concatenate([c.site for c in chunks]),
                   np.concatenate([c.kind for c in chunks]), snaps)

    def rows(self, box: Window) -> list[tuple]:
        return [(float(t), int(p), box.vertex(int(s)), KIND_NAMES[int(k)])
                for t, p, s, k in zip(self.t, self.pid, self.site, self.kind)]


@dataclass
class ParticleRecord:
    id: int
    birth: Vertex
    jumps: list                 # [(time, new position), ...]
    infection_time: float       # inf if never infected
    initial_infected: bool
    ignition: bool
    frozen: bool
    frozen_time: float


# ---------------------------------------------------------------------------
# initialisation


def init(params: SIParams, extra_susceptibles: Iterable[Vertex] = (),
         extra_infected: Iterable[Vertex] = (), plant: bool = True) -> SIState:
    """Poisson(mu) susceptibles per box site plus one infected planted at
    the origin.  Extra particles (appended after the sea, with stream
    identities disjoint from it) and ``plant=False`` are testing hooks.
    Time-zero co-locations are resolved before the state is returned."""
    box = params.box
    counts = rngmod.philox(params.rng_seed, 2).poisson(params.mu, size=box.size)
    sites = np.repeat(np.arange(box.size, dtype=np.int64), counts)
    sea_n = len(sites)
    within = np.concatenate([np.arange(c) for c in counts if c > 0]) if sea_n else np.empty(0, np.int64)
    stream_ids = [int(s) * 4096 + int(k) for s, k in zip(sites, within)]
    if np.any(counts >= 4096):
        raise ValueError("site occupancy exceeds the stream identity budget")

    origin = box.index((0,) * params.dim)
    pos = list(sites)
    inf0 = [0] * sea_n
    ignition = [0] * sea_n
    inject = 1 << 62
    if plant:
        pos.append(origin)
        inf0.append(1)
        ignition.append(1)
        stream_ids.append(inject)
        inject += 1
    for v in extra_susceptibles:
        pos.append(box.index(v))
        inf0.append(0)
        ignition.append(0)
        stream_ids.append(inject)
        inject += 1
    for v in extra_infected:
        pos.append(box.index(v))
        inf0.append(1)
        ignition.append(1)
        stream_ids.append(inject)
        inject += 1

    n = len(pos)
    pos = np.array(pos, dtype=np.int64)
    infected = np.array(inf0, dtype=np.uint8)
    key = np.array([rngmod.derive_key(params.rng_seed, "particle", sid)
                    for sid in stream_ids], dtype=np.uint64)
    ctr = np.zeros(n, dtype=np.uint64)
    iota = np.where(infected == 1, 0.0, np.inf)
    next_time = np.empty(n, dtype=np.float64)
    for i in range(n):
        rate = params.d_i if infected[i] else params.d_s
        next_time[i] = rngmod.stream_exp(int(key[i]), 0, rate)
    ctr[:] = 1

    state = SIState(params, pos, key, ctr, infected,
                    np.zeros(n, dtype=np.uint8), iota,
                    np.full(n, np.inf), next_time,
                    np.zeros(n, dtype=np.int64), pos.copy(),
                    infected.copy(), np.array(ignition, dtype=np.uint8),
                    rngmod.derive_key(params.rng_seed, "coin"), 0)
    _resolve_initial(state)
    return state


def _offsets(params: SIParams) -> list[Vertex]:
    if params.variant == "radius" and params.rho > 0:
        return sorted(disk((0,) * params.dim, params.rho))
    return [(0,) * params.dim]


def _resolve_initial(state: SIState) -> None:
    p = state.params
    occ: dict[int, set[int]] = {}
    inf_cnt: dict[int, int] = {}
    for i in range(state.n):
        occ.setdefault(int(state.pos[i]), set()).add(i)
        if state.infected[i]:
            s = int(state.pos[i])
            inf_cnt[s] = inf_cnt.get(s, 0) + 1
    queue = sorted(int(i) for i in np.nonzero(state.infected == 1)[0])
    sink: list[tuple] = []
    for a in queue:
        _scan_after_infection(state, occ, inf_cnt, a, 0.0, queue, sink)
    # sink rows at t=0 are implicit in iota; no log is produced by init


def _shifted_site(box: Window, site: int, off: Vertex) -> int | None:
    v = box.vertex(site)
    w = tuple(c + o for c, o in zip(v, off))
    if not box.contains(w):
        return None
    return box.index(w)


def _infect(state: SIState, inf_cnt, b: int, t: float, sink) -> None:
    p = state.params
    state.infected[b] = 1
    state.iota[b] = t
    s = int(state.pos[b])
    inf_cnt[s] = inf_cnt.get(s, 0) + 1
    sink.append((t, b, s, KIND_INFECT))
    ratio = p.d_s / p.d_i
    if not state.frozen[b] and ratio != 1.0:
        state.next_time[b] = t + (state.next_time[b] - t) * ratio
        state.seq[b] += 1


def _scan_after_infection(state, occ, inf_cnt, a, t, queue, sink) -> None:
    """Particle ``a`` is infected (or just arrived infected) at time t:
    apply the variant's contact rule around its site and extend the cascade
    queue with every particle it infects."""
    p = state.params
    s = int(state.pos[a])
    if p.variant == "prob":
        cands = sorted(b for b in occ.get(s, ()) if not state.infected[b])
        for b in cands:
            u = rngmod.stream_uniform(state.coin_key, state.coin_ctr)
            state.coin_ctr += 1
            if u < p.p:
                _infect(state, inf_cnt, b, t, sink)
                queue.append(b)
        return
    cands = []
    for off in _offsets(p):
        s2 = _shifted_site(state.box, s, off)
        if s2 is None:
            continue
        cands.extend(b for b in occ.get(s2, ()) if not state.infected[b])
    for b in sorted(cands):
        if state.infected[b]:
            continue
        _infect(state, inf_cnt, b, t, sink)
        queue.append(b)


def _arrival_check(state, occ, inf_cnt, a, t, queue, sink) -> None:
    """Susceptible ``a`` just landed: decide whether the neighbourhood
    infects it, then let the cascade run."""
    p = state.params
    s = int(state.pos[a])
    if p.variant == "prob":
        k = inf_cnt.get(s, 0)
        hit = False
        for _ in range(k):
            u = rngmod.stream_uniform(state.coin_key, state.coin_ctr)
            state.coin_ctr += 1
            if u < p.p:
                hit = True
        if not hit:
            return
    else:
        near = False
        for off in _offsets(p):
            s2 = _shifted_site(state.box, s, off)
            if s2 is not None and inf_cnt.get(s2, 0) > 0:
                near = True
                break
        if not near:
            return
    _infect(state, inf_cnt, a, t, sink)
    queue.append(a)
    qi = len(queue) - 1
    while qi < len(queue):
        _scan_after_infection(state, occ, inf_cnt, queue[qi], t, queue, sink)
        qi += 1


# ---------------------------------------------------------------------------
# python engine


def _advance_python(state: SIState, until: float) -> list[tuple]:
    p = state.params
    box = state.box
    d = p.dim
    side = 2 * p.half_width + 1
    strides = [side ** (d - 1 - i) for i in range(d)]
    level = p.log_level
    ratio = p.d_s / p.d_i

    occ: dict[int, set[int]] = {}
    inf_cnt: dict[int, int] = {}
    for i in range(state.n):
        occ.setdefault(int(state.pos[i]), set()).add(i)
        if state.infected[i]:
            s = int(state.pos[i])
            inf_cnt[s] = inf_cnt.get(s, 0) + 1

    heap = [(state.next_time[i], i, int(state.seq[i]))
            for i in range(state.n) if not state.frozen[i]]
    heapq.heapify(heap)
    rows: list[tuple] = []

    while heap:
        t, a, sq = heap[0]
        if t > until:
            break
        heapq.heappop(heap)
        if sq != state.seq[a] or state.frozen[a]:
            continue
        # direction draw, then wall check
        nd, used = rngmod.stream_direction(int(state.key[a]), int(state.ctr[a]), d)
        state.ctr[a] += used
        axis, sign = nd >> 1, 1 - 2 * (nd & 1)
        s = int(state.pos[a])
        c = (s // strides[axis]) % side
        if not (0 <= c + sign < side):
            state.frozen[a] = 1
            state.freeze_time[a] = t
            if level >= 1:
                rows.append((t, a, s, KIND_FREEZE))
            continue
        s2 = s + sign * strides[axis]
        occ[s].discard(a)
        occ.setdefault(s2, set()).add(a)
        state.pos[a] = s2
        was_infected = bool(state.infected[a])
        if was_infected:
            inf_cnt[s] = inf_cnt.get(s, 0) - 1
            inf_cnt[s2] = inf_cnt.get(s2, 0) + 1
        if level >= 3 or (level == 2 and was_infected):
            rows.append((t, a, s2, KIND_JUMP))
        rate = p.d_i if was_infected else p.d_s
        gap = rngmod.stream_exp(int(state.key[a]), int(state.ctr[a]), rate)
        state.ctr[a] += 1
        state.next_time[a] = t + gap
        state.seq[a] += 1
        heapq.heappush(heap, (state.next_time[a], a, int(state.seq[a])))

        sink: list[tuple] = []
        if was_infected:
            queue = [a]
            qi = 0
            while qi < len(queue):
                _scan_after_infection(state, occ, inf_cnt, queue[qi], t, queue, sink)
                qi += 1
        else:
            queue: list[int] = []
            _arrival_check(state, occ, inf_cnt, a, t, queue, sink)
        for (ti, b, sb, k) in sink:
            if not state.frozen[b] and ratio != 1.0:
                heapq.heappush(heap, (state.next_time[b], b, int(state.seq[b])))
            if level >= 1:
                rows.append((ti, b, sb, k))
    state.time = until
    return rows


# ---------------------------------------------------------------------------
# numba engine


@njit(cache=True, inline="always")
def _nb_u64(key, ctr):
    z = key + ctr * _GAMMA
    z = (z ^ (z >> _M30)) * _X1
    z = (z ^ (z >> _M27)) * _X2
    return z ^ (z >> _M31)


@njit(cache=True, inline="always")
def _nb_uniform(key, ctr):
    return np.float64(_nb_u64(key, ctr) >> _M11) * _TWO53


@njit(cache=True, inline="always")
def _heap_lt(ht, hp, i, j):
    return ht[i] < ht[j] or (ht[i] == ht[j] and hp[i] < hp[j])


@njit(cache=True)
def _heap_push(ht, hp, hs, nbox, t, pid, sq):
    i = nbox[0]
    ht[i] = t
    hp[i] = pid
    hs[i] = sq
    nbox[0] = i + 1
    while i > 0:
        par = (i - 1) >> 1
        if not _heap_lt(ht, hp, i, par):
            break
        ht[par], ht[i] = ht[i], ht[par]
        hp[par], hp[i] = hp[i], hp[par]
        hs[par], hs[i] = hs[i], hs[par]
        i = par
    return None


@njit(cache=True)
def _heap_pop(ht, hp, hs, nbox):
    n = nbox[0] - 1
    t, pid, sq = ht[0], hp[0], hs[0]
    ht[0], hp[0], hs[0] = ht[n], hp[n], hs[n]
    nbox[0] = n
    i = 0
    while True:
        l, r = 2 * i + 1, 2 * i + 2
        m = i
        if l < n and _heap_lt(ht, hp, l, m):
            m = l
        if r < n and _heap_lt(ht, hp, r, m):
            m = r
        if m == i:
            break
        ht[m], ht[i] = ht[i], ht[m]
        hp[m], hp[i] = hp[i], hp[m]
        hs[m], hs[i] = hs[i], hs[m]
        i = m
    return t, pid, sq


@njit(cache=True)
def _si_kernel(pos, key, ctr, infected, frozen, iota, freeze_t, next_t, seq,
               head, nxt, prv, inf_cnt,
               ht, hp, hs, hn,
               strides, side, d, rate_s, rate_i, ratio,
               variant, coin_p, offs, coin_key, coin_box,
               until, level,
               log_t, log_p, log_s, log_k, used_box,
               queue, cand):
    n = pos.shape[0]
    cap = log_t.shape[0]
    used = used_box[0]
    m = offs.shape[0]
    while hn[0] > 0:
        if used + n + 4 > cap:
            used_box[0] = used
            return 1
        if ht[0] > until:
            break
        t, a, sq = _heap_pop(ht, hp, hs, hn)
        if sq != seq[a] or frozen[a] == 1:
            continue
        # direction
        bits = _nb_u64(key[a], ctr[a]) & _U(7)
        ctr[a] += _U(1)
        if d == 3:
            while bits >= _U(6):
                bits = _nb_u64(key[a], ctr[a]) & _U(7)
                ctr[a] += _U(1)
            nd = np.int64(bits)
        else:
            nd = np.int64(bits) % (2 * d)
        axis = nd >> 1
        sign = 1 - 2 * (nd & 1)
        s = pos[a]
        c = (s // strides[axis]) % side
        c2 = c + sign
        if c2 < 0 or c2 >= side:
            frozen[a] = 1
            freeze_t[a] = t
            if level >= 1:
                log_t[used] = t
                log_p[used] = a
                log_s[used] = s
                log_k[used] = 2
                used += 1
            continue
        s2 = s + sign * strides[axis]
        # unlink from s
        if prv[a] >= 0:
            nxt[prv[a]] = nxt[a]
        else:
            head[s] = nxt[a]
        if nxt[a] >= 0:
            prv[nxt[a]] = prv[a]
        # link into s2
        nxt[a] = head[s2]
        prv[a] = -1
        if head[s2] >= 0:
            prv[head[s2]] = a
        head[s2] = a
        pos[a] = s2
        was_inf = infected[a] == 1
        if was_inf:
            inf_cnt[s] -= 1
            inf_cnt[s2] += 1
        if level >= 3 or (level == 2 and was_inf):
            log_t[used] = t
            log_p[used] = a
            log_s[used] = s2
            log_k[used] = 0
            used += 1
        rate = rate_i if was_inf else rate_s
        u = _nb_uniform(key[a], ctr[a])
        ctr[a] += _U(1)
        next_t[a] = t - np.log1p(-u) / rate
        seq[a] += 1
        _heap_push(ht, hp, hs, hn, next_t[a], a, seq[a])

        # infection resolution
        qlen = 0
        if was_inf:
            queue[0] = a
            qlen = 1
        else:
            # does the neighbourhood infect the arriving susceptible?
            go = False
            if variant == 1:
                k = inf_cnt[s2]
                for _ in range(k):
                    u = _nb_uniform(coin_key, coin_box[0])
                    coin_box[0] += _U(1)
                    if u < coin_p:
                        go = True
            else:
                for j in range(m):
                    ok = True
                    for ax in range(d):
                        cc = (s2 // strides[ax]) % side + offs[j, ax]
                        if cc < 0 or cc >= side:
                            ok = False
                            break
                    if not ok:
                        continue
                    s3 = s2
                    for ax in range(d):
                        s3 += offs[j, ax] * strides[ax]
                    if inf_cnt[s3] > 0:
                        go = True
                        break
            if go:
                infected[a] = 1
                iota[a] = t
                inf_cnt[s2] += 1
                if level >= 1:
                    log_t[used] = t
                    log_p[used] = a
                    log_s[used] = s2
                    log_k[used] = 1
                    used += 1
                if frozen[a] == 0 and ratio != 1.0:
                    next_t[a] = t + (next_t[a] - t) * ratio
                    seq[a] += 1
                    _heap_push(ht, hp, hs, hn, next_t[a], a, seq[a])
                queue[0] = a
                qlen = 1
        qi = 0
        while qi < qlen:
            b = queue[qi]
            qi += 1
            sb = pos[b]
            ncand = 0
            if variant == 1:
                w = head[sb]
                while w >= 0:
                    if infected[w] == 0:
                        cand[ncand] = w
                        ncand += 1
                    w = nxt[w]
                # sort ascending (insertion)
                for i1 in range(1, ncand):
                    v1 = cand[i1]
                    j1 = i1 - 1
                    while j1 >= 0 and cand[j1] > v1:
                        cand[j1 + 1] = cand[j1]
                        j1 -= 1
                    cand[j1 + 1] = v1
                for i1 in range(ncand):
                    w = cand[i1]
                    if infected[w] == 1:
                        continue
                    u = _nb_uniform(coin_key, coin_box[0])
                    coin_box[0] += _U(1)
                    if u >= coin_p:
                        continue
                    infected[w] = 1
                    iota[w] = t
                    inf_cnt[pos[w]] += 1
                    if level >= 1:
                        log_t[used] = t
                        log_p[used] = w
                        log_s[used] = pos[w]
                        log_k[used] = 1
                        used += 1
                    if frozen[w] == 0 and ratio != 1.0:
                        next_t[w] = t + (next_t[w] - t) * ratio
                        seq[w] += 1
                        _heap_push(ht, hp, hs, hn, next_t[w], w, seq[w])
                    queue[qlen] = w
                    qlen += 1
            else:
                for j in range(m):
                    ok = True
                    for ax in range(d):
                        cc = (sb // strides[ax]) % side + offs[j, ax]
                        if cc < 0 or cc >= side:
                            ok = False
                            break
                    if not ok:
                        continue
                    s3 = sb
                    for ax in range(d):
                        s3 += offs[j, ax] * strides[ax]
                    w = head[s3]
                    while w >= 0:
                        if infected[w] == 0:
                            cand[ncand] = w
                            ncand += 1
                        w = nxt[w]
                for i1 in range(1, ncand):
                    v1 = cand[i1]
                    j1 = i1 - 1
                    while j1 >= 0 and cand[j1] > v1:
                        cand[j1 + 1] = cand[j1]
                        j1 -= 1
                    cand[j1 + 1] = v1
                for i1 in range(ncand):
                    w = cand[i1]
                    if infected[w] == 1:
                        continue
                    infected[w] = 1
                    iota[w] = t
                    inf_cnt[pos[w]] += 1
                    if level >= 1:
                        log_t[used] = t
                        log_p[used] = w
                        log_s[used] = pos[w]
                        log_k[used] = 1
                        used += 1
                    if frozen[w] == 0 and ratio != 1.0:
                        next_t[w] = t + (next_t[w] - t) * ratio
                        seq[w] += 1
                        _heap_push(ht, hp, hs, hn, next_t[w], w, seq[w])
                    queue[qlen] = w
                    qlen += 1
    used_box[0] = used
    return 0


def _advance_numba(state: SIState, until: float) -> list[tuple]:
    p = state.params
    d = p.dim
    side = 2 * p.half_width + 1
    sites = state.box.size
    n = state.n
    strides = np.array([side ** (d - 1 - i) for i in range(d)], dtype=np.int64)
    offs = np.array(_offsets(p), dtype=np.int64).reshape(-1, d)

    head = np.full(sites, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    prv = np.full(n, -1, dtype=np.int64)
    inf_cnt = np.zeros(sites, dtype=np.int64)
    for i in range(n):
        s = int(state.pos[i])
        nxt[i] = head[s]
        if head[s] >= 0:
            prv[head[s]] = i
        head[s] = i
        if state.infected[i]:
            inf_cnt[s] += 1

    live = np.nonzero(state.frozen == 0)[0]
    cap_h = 2 * n + 16
    ht = np.empty(cap_h, dtype=np.float64)
    hp = np.empty(cap_h, dtype=np.int64)
    hs = np.empty(cap_h, dtype=np.int64)
    hn = np.zeros(1, dtype=np.int64)
    order = np.lexsort((live, state.next_time[live]))
    k = len(live)
    ht[:k] = state.next_time[live][order]
    hp[:k] = live[order]
    hs[:k] = state.seq[live][order]
    hn[0] = k  # sorted array satisfies the heap property

    est = int(max(p.d_s, p.d_i) * n * max(until - state.time, 0.0) * 1.3) + 4 * n + 1024
    if p.log_level <= 1:
        est = 4 * n + 1024
    # bound each log buffer; the kernel re-enters with the state advanced
    cap = max(1 << 24, 4 * n + 1024)
    est = min(est, cap)
    coin_box = np.array([state.coin_ctr], dtype=np.uint64)
    queue = np.empty(max(n, 1), dtype=np.int64)
    cand = np.empty(max(n, 1), dtype=np.int64)
    chunks = []
    while True:
        log_t = np.empty(est, dtype=np.float64)
        log_p = np.empty(est, dtype=np.int64)
        log_s = np.empty(est, dtype=np.int64)
        log_k = np.empty(est, dtype=np.int8)
        used_box = np.zeros(1, dtype=np.int64)
        status = _si_kernel(
            state.pos, state.key, state.ctr, state.infected, state.frozen,
            state.iota, state.freeze_time, state.next_time, state.seq,
            head, nxt, prv, inf_cnt, ht, hp, hs, hn,
            strides, side, d, p.d_s, p.d_i, p.d_s / p.d_i,
            _VARIANT_CODES[p.variant], p.p, offs,
            _U(state.coin_key), coin_box, until, p.log_level,
            log_t, log_p, log_s, log_k, used_box, queue, cand)
        u = int(used_box[0])
        if u:
            chunks.append((log_t[:u].copy(), log_p[:u].copy(),
                           log_s[:u].copy(), log_k[:u].copy()))
        del log_t, log_p, log_s, log_k
        if status == 0:
            break
        est = min(est * 2, cap)
    state.coin_ctr = int(coin_box[0])
    state.time = until
    return chunks


# ---------------------------------------------------------------------------
# public driver


def run(state: SIState, until: float, mode: str = "auto",
        snapshot_times: Sequence[float] = ()) -> RunLog:
    """Advance the state to ``until`` (events with time <= until fire).
    Snapshot times inside (state.time, until] record front metrics."""
    p = state.params
    if until > p.t_max + 1e-12:
        raise ValueError("until exceeds the configured horizon")
    if until < state.time:
        raise ValueError("cannot run backwards")
    if mode == "auto":
        mode = "numba"
    snaps_at = sorted({float(s) for s in snapshot_times
                       if state.time < s <= until})
    segments = snaps_at + ([until] if until not in snaps_at else [])
    chunks: list[tuple] = []
    snapshots = []
    for tau in segments:
        if mode == "numba":
            chunks.extend(_advance_numba(state, tau))
        else:
            rows = _advance_python(state, tau)
            if rows:
                chunks.append((
                    np.array([r[0] for r in rows], dtype=np.float64),
                    np.array([r[1] for r in rows], dtype=np.int64),
                    np.array([r[2] for r in rows], dtype=np.int64),
                    np.array([r[3] for r in rows], dtype=np.int8)))
        if tau in snaps_at:
            snapshots.append({"t": tau, **front_metrics(state)})
    if not chunks:
        return RunLog(np.empty(0, dtype=np.float64), np.empty(0, dtype=np.int64),
                      np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int8),
                      snapshots)
    if len(chunks) == 1:
        lt, lp, ls, lk = chunks[0]
    else:
        lt = np.concatenate([c[0] for c in chunks])
        lp = np.concatenate([c[1] for c in chunks])
        ls = np.concatenate([c[2] for c in chunks])
        lk = np.concatenate([c[3] for c in chunks])
    return RunLog(lt, lp, ls, lk, snapshots)


def simulate(params: SIParams, until: float | None = None, mode: str = "auto",
             snapshot_times: Sequence[float] = (),
             extra_susceptibles: Iterable[Vertex] = (),
             extra_infected: Iterable[Vertex] = ()) -> tuple[SIState, RunLog]:
    state = init(params, extra_susceptibles, extra_infected)
    log = run(state, params.t_max if until is None else until, mode, snapshot_times)
    return state, log


# ---------------------------------------------------------------------------
# observables


def front_metrics(state: SIState) -> dict:
    """Innermost susceptible radius, outermost infected radius (L1), and
    the infected count; empty sets map to inf / 0."""
    p = state.params
    side = 2 * p.half_width + 1
    r = np.zeros(state.n, dtype=np.int64)
    rem = state.pos.copy()
    for _ in range(p.dim):
        r += np.abs(rem % side - p.half_width)
        rem //= side
    sus = state.infected == 0
    sus_r = float(r[sus].min()) if sus.any() else math.inf
    inf_r = int(r[~sus].max()) if (~sus).any() else 0
    return {"inf_susceptible_radius": sus_r,
            "sup_infected_radius": inf_r,
            "n_infected": int(np.sum(state.infected == 1)),
            "n_frozen": int(np.sum(state.frozen == 1)),
            "tainted": state.tainted}


def build_records(state: SIState, log: RunLog) -> list[ParticleRecord]:
    """Assemble per-particle records; complete jump logs require
    log_level = 3 on the run(s) that produced ``log``."""
    jumps: dict[int, list] = {i: [] for i in range(state.n)}
    for t, pid, site, kind in zip(log.t, log.pid, log.site, log.kind):
        if int(kind) == KIND_JUMP:
            jumps[int(pid)].append((float(t), state.box.vertex(int(site))))
    out = []
    for i in range(state.n):
        out.append(ParticleRecord(
            i, state.box.vertex(int(state.birth_pos[i])), jumps[i],
            float(state.iota[i]), bool(state.initial_infected[i]),
            bool(state.ignition[i]), bool(state.frozen[i]),
            float(state.freeze_time[i])))
    return out


def trajectory(record: ParticleRecord, horizon: float) -> list[tuple[float, Vertex]]:
    """Piecewise-constant path breakpoints on [0, horizon]."""
    out = [(0.0, record.birth)]
    for (t, v) in record.jumps:
        if t > horizon:
            break
        out.append((t, v))
    return out


def hitting_statistics(H: Iterable[ParticleRecord], T: float, U, x) -> dict:
    """N = number of particles meeting the path ``x`` before leaving ``U``
    within [0, T]; R = their aggregate co-location time.  ``U`` may be a
    vertex set, a predicate, or None for no restriction; ``x`` is a list of
    (time, vertex) breakpoints."""
    if U is None:
        inside = lambda v: True
    elif callable(U):
        inside = U
    else:
        uset = set(U)
        inside = lambda v: v in uset

    xb = sorted(x)
    N = 0
    R = 0.0
    for rec in H:
        segs = trajectory(rec, T)
        stop = T
        for (t, v) in segs:
            if not inside(v):
                stop = t
                break
        # sweep both piecewise-constant paths up to `stop`
        r = 0.0
        i = j = 0
        t_cur = 0.0
        while t_cur < stop:
            pa = segs[i][1]
            px = xb[j][1]
            t_next_a = segs[i + 1][0] if i + 1 < len(segs) else math.inf
            t_next_x = xb[j + 1][0] if j + 1 < len(xb) else math.inf
            t_next = min(t_next_a, t_next_x, stop, T)
            if pa == px and t_next > t_cur:
                r += t_next - t_cur
            if t_next == t_next_a:
                i += 1
            if t_next == t_next_x:
                j += 1
            t_cur = t_next
        if r > 0.0:
            N += 1
            R += r
    return {"N": N, "R": R}
