"""Dry run of the hand-built two-scale scenario planned for tests/test_blocks.py."""
from fractions import Fraction

from spreadlab.blocks import (
    ColouringParams, EpidemicRun, block_gap, block_of, block_bounds,
    boundary_hash, check_si_to_ssp, check_two_scale_trace, derive_clocks,
    dist_to_block, infection_completion_stats, run_colouring,
    event_O, event_Q, event_Z, channel_grid)
from spreadlab.si import SIParams

Q = Fraction(1, 1024)


def _cast(stray=False):
    parts = []
    parts.append({"birth": (0, 0), "iota": 0.0, "initial_infected": True, "jumps": []})
    # corner tour: east to (7,0), north to (7,6), crossing east at (8,6)
    jumps = [(float(k * Q), (k, 0)) for k in range(1, 8)]
    jumps += [(float((7 + k) * Q), (7, k)) for k in range(1, 7)]
    jumps += [(float(14 * Q), (8, 6))]
    if stray:
        jumps += [(float(200 * Q), (11, 6))]
    parts.append({"birth": (0, 0), "iota": 0.0, "jumps": jumps})
    # straight tours west / south (early), north (late)
    parts.append({"birth": (0, 0), "iota": 0.0,
                  "jumps": [(float(k * Q), (-k, 0)) for k in range(1, 11)]})
    parts.append({"birth": (0, 0), "iota": 0.0,
                  "jumps": [(float(k * Q), (0, -k)) for k in range(1, 11)]})
    parts.append({"birth": (0, 0), "iota": 0.0,
                  "jumps": [(float((30 + k) * Q), (0, k)) for k in range(1, 11)]})
    # diagonal staircases: 18 nearest-neighbour steps to (+-9, +-9)
    def stair(sx, sy, t0):
        out = []
        for k in range(1, 10):
            out.append((float((t0 + 2 * k - 1) * Q), (sx * k, sy * (k - 1))))
            out.append((float((t0 + 2 * k) * Q), (sx * k, sy * k)))
        return out
    parts.append({"birth": (0, 0), "iota": 0.0, "jumps": stair(-1, -1, 40)})
    parts.append({"birth": (0, 0), "iota": 0.0, "jumps": stair(1, -1, 60)})
    parts.append({"birth": (0, 0), "iota": 0.0, "jumps": stair(-1, 1, 80)})
    parts.append({"birth": (0, 0), "iota": 0.0, "jumps": stair(1, 1, 100)})
    for v in ((32, 0), (-32, 0), (0, 32), (0, -32),
              (32, 32), (32, -32), (-32, 32), (-32, -32)):
        parts.append({"birth": v, "iota": 0.0, "initial_infected": True, "jumps": []})
    sip = SIParams(0.0, 1.0, 1.0, 56, 20000.0, 1, log_level=3)
    return EpidemicRun.from_parts(sip, 20000.0, parts)


fine_cp = ColouringParams(16, Fraction(1, 4), 16384, 32, 16384, 4096)
coarse_cp = ColouringParams(32, Fraction(1, 4), 2048, 0, 0, 4096)
print("fine xi", fine_cp.xi, "unit", fine_cp.unit, "Xi", fine_cp.Xi, "alphaL", fine_cp.alphaL)
print("coarse xi", coarse_cp.xi, "unit", coarse_cp.unit, "Xi", coarse_cp.Xi, "alphaL", coarse_cp.alphaL)

run = _cast()
fine = run_colouring(run, fine_cp, evaluate="full")
coarse = run_colouring(run, coarse_cp, evaluate="full")

print("\n--- fine window", fine.window.lo, fine.window.hi, "blocks", len(fine.blocks))
expect = {}
for z in fine.window:
    pass
print("ties:", fine.ties)
for z, b in sorted(fine.blocks.items()):
    print(z, b.rule, b.tau, "seed" if b.seed else "-", "A1", b.A1,
          "x", b.x, "pid", b.pid, "group", b.group, "rank", b.rank,
          "parent", b.parent)

print("\n--- coarse window", coarse.window.lo, coarse.window.hi)
print("ties:", coarse.ties)
for z, b in sorted(coarse.blocks.items()):
    print(z, b.rule, b.tau, "seed" if b.seed else "-", "A1", b.A1,
          "A2ok", None if b.A2 is None else all(b.A2.values()),
          "nA2", None if b.A2 is None else len(b.A2))

print("\nfine (0,0):", fine.blocks[(0, 0)].A1, fine.blocks[(0, 0)].A2)
print("fine (-1,0) A2:", fine.blocks[(-1, 0)].A2)
print("fine Hm(0,0)", sorted(fine.blocks[(0, 0)].Hm), "H", sorted(fine.blocks[(0, 0)].H))

rep_f = check_si_to_ssp(fine)
rep_c = check_si_to_ssp(coarse)
print("\nfine check:", rep_f.ok, rep_f.witness, "red", rep_f.n_red,
      "seeds", rep_f.n_seeds, "ignited", rep_f.n_ignited)
print("coarse check:", rep_c.ok, rep_c.witness, "red", rep_c.n_red,
      "seeds", rep_c.n_seeds, "ignited", rep_c.n_ignited)

tr = check_two_scale_trace(fine, coarse, tau_cap=20000)
print("trace:", tr.ok, tr.witness, "checked", tr.n_checked,
      "skipped", tr.n_skipped, "tau_exit", tr.tau_exit)

bad = fine.with_tau((0, 0), Fraction(1, 8))
tr2 = check_two_scale_trace(bad, coarse, tau_cap=20000)
print("trace neg:", tr2.ok, tr2.witness)

stats = infection_completion_stats(fine, run)
print("completion: delays all zero:", all(v == 0.0 for v in stats["delays"].values()),
      "censored", stats["censored"])

print("eventQ (2,2) y=1:", event_Q((2, 2), 1.0, fine, run))
print("eventQ (0,0) y=1:", event_Q((0, 0), 1.0, fine, run))
print("eventO (2,2) y=1:", event_O((2, 2), 1.0, fine, run))
print("eventO (0,0) y=1:", event_O((0, 0), 1.0, fine, run))
print("eventZ (0,0) y=1:", event_Z((0, 0), 1.0, fine, run))
print("eventZ (0,0) y=1e8:", event_Z((0, 0), 1.0e8, fine, run))

clk = derive_clocks(fine)
print("\nzero edges:", [(u, v) for (u, v) in sorted(clk.red) if clk.red[(u, v)] == 0])
print("order:", sorted(clk.order))
print("red((0,0)->(1,0))", clk.red[((0, 0), (1, 0))],
      "blue", clk.blue[((0, 0), (1, 0))])
print("red((1,0)->(0,0))", clk.red[((1, 0), (0, 0))],
      "blue", clk.blue[((1, 0), (0, 0))], "kappa", clk.kappa[((1, 0), (0, 0))])

neg1 = fine.with_tau((3, 3), fine_cp.xi)
r = check_si_to_ssp(neg1)
print("neg closure:", r.ok, r.witness)
neg2 = fine.with_tau((0, 1), fine_cp.xi)
r = check_si_to_ssp(neg2)
print("neg cap:", r.ok, r.witness)

run_s = _cast(stray=True)
fine_s = run_colouring(run_s, fine_cp, evaluate="full")
print("\nstray: fine (0,0) A1", fine_s.blocks[(0, 0)].A1, "seed", fine_s.blocks[(0, 0)].seed)
print("stray check:", check_si_to_ssp(fine_s).ok)

g_tau = channel_grid(run_colouring(run, fine_cp, evaluate="tau"))
g_full = channel_grid(fine)
print("grid tau centre row:", g_tau[3])
print("grid full centre row:", g_full[3])

# geometry spot values the unit tests will assert
print("\nblock_gap checks:", block_gap((0, 0), (0, 0), 16), block_gap((0, 0), (1, 0), 16),
      block_gap((0, 0), (1, 1), 16))
print("half gap:", [block_gap((2, -1), w, 16, 8) for w in
                    __import__("spreadlab.blocks", fromlist=["half_blocks"]).half_blocks((2, -1))])
print("bhash sample:", boundary_hash((0, 0), 16, Fraction(4))[:4], "len",
      len(boundary_hash((0, 0), 16, Fraction(4))))
