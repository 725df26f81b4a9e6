"""Deterministic random number plumbing.

Two generator families, both counter-based so that replicas and particles
get independent substreams that never shift when unrelated draws are added:

* ``philox(master, *spawn)`` wraps numpy's Philox bit generator behind a
  SeedSequence spawn key.  Used for instance-level sampling (Poisson fields,
  Bernoulli seed sets, clock arrays).
* splitmix64 streams: ``stream_u64(key, counter)`` is a pure function of
  (key, counter).  Per-particle trajectory noise uses these inside numba
  kernels; the reference implementations here are the test oracle for the
  kernel copies.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
KEY_GAMMA = 0xBF58476D1CE4E5B9


def mix64(z: int) -> int:
    """splitmix64 finalizer: bijective avalanche mix on 64-bit ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_key(master: int, *parts: int | str) -> int:
    """Derive a substream key from a master seed and a label path.

    String labels are folded through blake2b so call sites can use readable
    stream names without coordinating integer namespaces.
    """
    k = mix64((master & MASK64) ^ GAMMA)
    for part in parts:
        if isinstance(part, str):
            digest = hashlib.blake2b(part.encode(), digest_size=8).digest()
            part = int.from_bytes(digest, "little")
        k = mix64((k + KEY_GAMMA + (part & MASK64)) & MASK64)
    return k


def stream_u64(key: int, counter: int) -> int:
    return mix64((key + (counter & MASK64) * GAMMA) & MASK64)


def stream_uniform(key: int, counter: int) -> float:
    """Uniform in [0, 1) with 53-bit resolution."""
    return (stream_u64(key, counter) >> 11) * 2.0**-53


def stream_exp(key: int, counter: int, rate: float) -> float:
    """Exponential(rate) draw; uses -log(1-u) so u=0 is safe.  math.log1p
    (libm) rather than np.log1p: the jitted copies lower to the same libm
    symbol, keeping twin engines bit-identical."""
    u = stream_uniform(key, counter)
    return -math.log1p(-u) / rate


def stream_direction(key: int, counter: int, d: int) -> tuple[int, int]:
    """Unbiased direction index in [0, 2d) plus the number of counter slots
    consumed (rejection sampling keeps the modulus exact for d=3)."""
    n = 2 * d
    used = 0
    while True:
        bits = stream_u64(key, counter + used) & 7
        used += 1
        if n in (2, 4):
            return bits % n, used
        if bits < 6:
            return bits, used


def philox(master: int, *spawn: int) -> np.random.Generator:
    """Instance-level generator: numpy Philox keyed by a spawn path."""
    seq = np.random.SeedSequence(entropy=master & MASK64, spawn_key=tuple(spawn))
    return np.random.Generator(np.random.Philox(seq))
