"""Independent fixed-point solver for the two-colour growth process.

Relaxation oracle: repeatedly recompute every vertex's (time, colour) from
the current state of its neighbours until nothing changes.  Completely
different computational principle from the event-driven engine (no heap, no
batches, no grain rescaling: pure Fraction arithmetic), so agreement is
meaningful evidence.
"""

from fractions import Fraction

from spreadlab.lattice import neighbors
from spreadlab.ssp import SSPInstance


def oracle_solve(inst: SSPInstance):
    """Returns ({vertex: Fraction time}, {vertex: 'red'|'blue'}) for coloured
    vertices, by iterating the assignment rules to their fixed point."""
    verts = inst.vertices()
    vset = set(verts)
    unit = inst.red_unit
    srcs = {v: Fraction(t) for v, t in inst.sources.items()}

    T: dict = {v: None for v in verts}
    C: dict = {}

    max_sweeps = 4 * len(verts) + 20
    for sweep in range(max_sweeps):
        changed = False
        for v in verts:
            cands = []
            if v in srcs:
                cands.append((srcs[v], False))
            for u in neighbors(v):
                if u not in vset or T[u] is None:
                    continue
                if C[u] == "red":
                    x = inst.edge_value(inst.red, u, v)
                    blue_assign = False
                else:
                    x = inst.edge_value(inst.blue, u, v)
                    full = inst.edge_value(inst.kappa, u, v) * unit
                    blue_assign = x == full
                cands.append((T[u] + x, blue_assign))
            if not cands:
                new = (None, None)
            else:
                tstar = min(t for t, _ in cands)
                blue = v in inst.seeds or any(b for t, b in cands if t == tstar)
                new = (tstar, "blue" if blue else "red")
            if (T[v], C.get(v)) != new:
                T[v], C[v] = new
                if new == (None, None):
                    C.pop(v, None)
                changed = True
        if not changed:
            break
    else:
        raise AssertionError("fixed-point iteration did not converge")

    times = {v: t for v, t in T.items() if t is not None}
    colours = {v: C[v] for v in times}
    return times, colours
