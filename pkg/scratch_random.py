"""Parameter shakedown for the random-run test scenarios."""
import time
from fractions import Fraction

from spreadlab.blocks import (
    ColouringParams, block_of, check_si_to_ssp, check_two_scale_trace,
    infection_completion_stats, lazy_generate, run_colouring, sample_run)
from spreadlab.si import SIParams

# --- S1: mu=0 walker, three bands
t0 = time.perf_counter()
sip1 = SIParams(0.0, 1.0, 1.0, 60, 300.0, 20260814, log_level=3)
run1 = sample_run(sip1)
cp1 = ColouringParams(16, Fraction(1, 64), 64, 0, 40, 4096)
rec1 = run_colouring(run1, cp1, evaluate="full")
print("S1", time.perf_counter() - t0, "s; rules:",
      {r: sum(1 for b in rec1.blocks.values() if b.rule == r) for r in "oabc"},
      "max tau", max(float(b.tau) for b in rec1.blocks.values()))
print("S1 check:", check_si_to_ssp(rec1).ok)
print("S1 window", rec1.window.lo, rec1.window.hi)
far_a = [(u, v) for u in rec1.window for v in [(u[0] + 1, u[1])]
         if rec1.window.contains(v)
         and rec1.blocks[u].rule == "a" and rec1.blocks[v].rule == "a"
         and cp1.band(v) == 2 and rec1.blocks[u].tau > rec1.blocks[v].tau]
print("S1 far reversed-a edges:", len(far_a))

# lazy identity
t0 = time.perf_counter()
run1l, rec1l = lazy_generate(sip1, cp1, evaluate="tau")
import numpy as np
print("S1 lazy identity:", np.array_equal(run1.jump_t, run1l.jump_t),
      np.array_equal(run1.jump_xy, run1l.jump_xy),
      all(rec1.blocks[z].tau == rec1l.blocks[z].tau
          and rec1.blocks[z].rule == rec1l.blocks[z].rule
          and rec1.blocks[z].parent == rec1l.blocks[z].parent
          for z in rec1.blocks), time.perf_counter() - t0, "s")

# --- S2: ignition-rich coupled equivalence
t0 = time.perf_counter()
nb = nc = nties = 0
bad = None
for i in range(6):
    sip = SIParams(0.2, 1.0, 16.0, 40, 120.0, 300 + i, log_level=3)
    run = sample_run(sip)
    cp = ColouringParams(16, Fraction(1, 16), 128, 0, 0, 4096)
    rec = run_colouring(run, cp, evaluate="seeds")
    rep = check_si_to_ssp(rec)
    if not rep.ok and bad is None:
        bad = (i, rep.witness)
    nb += sum(1 for b in rec.blocks.values() if b.rule == "b")
    nc += sum(1 for b in rec.blocks.values() if b.rule == "c")
    nties += len(rec.ties)
print("S2 6 runs", time.perf_counter() - t0, "s; b", nb, "c", nc,
      "ties", nties, "bad", bad)

# --- S3: Hm subset H
t0 = time.perf_counter()
viol = 0
for i in range(5):
    sip = SIParams(0.5, 1.0, 1.0, 40, 60.0, 400 + i, log_level=3)
    run = sample_run(sip)
    cp = ColouringParams(16, Fraction(1, 64), 32, 0, 0, 4096)
    rec = run_colouring(run, cp, evaluate="full")
    for z in rec.far_blocks():
        b = rec.blocks[z]
        if not b.Hm <= b.H:
            viol += 1
print("S3 5 runs", time.perf_counter() - t0, "s; violations", viol)

# --- S11: two scales of one run, entry-site half-block ordering
t0 = time.perf_counter()
cnt = ok = 0
for i in range(3):
    sip = SIParams(0.4, 1.0, 8.0, 88, 150.0, 500 + i, log_level=3)
    run = sample_run(sip)
    p32 = ColouringParams(32, Fraction(1, 32), 256, 0, 0, 4096)
    p16 = ColouringParams(16, Fraction(1, 32), 256, 0, 0, 4096)
    r32 = run_colouring(run, p32, evaluate="tau")
    r16 = run_colouring(run, p16, evaluate="tau")
    for z, b in r32.blocks.items():
        if b.rule in "bc":
            h = block_of(b.x, 16)
            if r16.window.contains(h):
                cnt += 1
                if r16.blocks[h].tau <= b.tau:
                    ok += 1
print("S11 3 runs", time.perf_counter() - t0, "s; instances", cnt, "ok", ok)

# --- S10: random two-scale trace (expected vacuous)
t0 = time.perf_counter()
pf = ColouringParams(16, Fraction(1, 256), 256, 32, 16384, 4096)
pc = ColouringParams(32, Fraction(1, 256), 32, 0, 0, 4096)
for i in range(2):
    sip = SIParams(0.3, 1.0, 2.0, 56, 400.0, 600 + i, log_level=3)
    run = sample_run(sip)
    rf = run_colouring(run, pf, evaluate="seeds")
    rc = run_colouring(run, pc, evaluate="seeds")
    tr = check_two_scale_trace(rf, rc, tau_cap=400)
    print("S10", i, tr.ok, "checked", tr.n_checked, "exit", float(tr.tau_exit),
          time.perf_counter() - t0, "s")

# --- delay tail
t0 = time.perf_counter()
sip = SIParams(1.0, 1.0, 1.0, 40, 150.0, 700, log_level=3)
run = sample_run(sip)
cp = ColouringParams(16, Fraction(1, 16), 128, 0, 0, 4096)
rec = run_colouring(run, cp, evaluate="full")
st = infection_completion_stats(rec, run)
ds = sorted(st["delays"].values())
print("delaytail", time.perf_counter() - t0, "s; n", len(ds), "censored",
      len(st["censored"]), "max", ds[-1] if ds else None, "pos",
      sum(1 for v in ds if v > 0))
