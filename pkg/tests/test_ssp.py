"""Engine tests: hand-built rule cases, the fixed-point oracle, the twin
python/numba paths, validation, and serialization."""

import json
from fractions import Fraction

import numpy as np
import pytest

from spreadlab.lattice import Window
from spreadlab.ssp import (
    SSPInstance,
    ValidationError,
    bernoulli_grid_instance,
    colour_sets_at,
    compile_instance,
    instance_from_json,
    instance_to_json,
    random_dict_instance,
    run_ssp,
    validate,
)
from oracle_ssp import oracle_solve

F = Fraction


def line_instance(n, seeds=(), sources=None, red=None, blue=None, kappa=4, unit=1):
    """1xn strip with per-edge overrides (dict keyed by ((x1,0),(x2,0)))."""
    window = Window((0, 0), (n, 1))
    verts = window.vertices()
    red_map = {}
    blue_map = {}
    kap_map = {}
    for u in verts:
        for v in verts:
            if abs(u[0] - v[0]) == 1:
                red_map[(u, v)] = F(1)
                blue_map[(u, v)] = F(kappa) * unit
                kap_map[(u, v)] = F(kappa)
    if red:
        red_map.update({k: F(v) for k, v in red.items()})
    if blue:
        blue_map.update({k: F(v) for k, v in blue.items()})
    return SSPInstance(
        window,
        frozenset(seeds),
        sources if sources is not None else {(0, 0): F(0)},
        red_map,
        blue_map,
        kap_map,
        red_unit=F(unit),
        allow_blue_sources=True,
    )


class TestRules:
    def test_source_assigns_red(self):
        out = run_ssp(line_instance(3))
        assert out.colour((0, 0)) == "red"
        assert out.time((0, 0)) == 0
        assert out.colour((1, 0)) == "red"
        assert out.time((1, 0)) == 1

    def test_seed_turns_blue_on_red_assignment(self):
        out = run_ssp(line_instance(3, seeds=[(1, 0)]))
        assert out.colour((1, 0)) == "blue"
        assert out.time((1, 0)) == 1

    def test_seed_source_is_blue_at_activation(self):
        out = run_ssp(line_instance(3, seeds=[(0, 0)]))
        assert out.colour((0, 0)) == "blue"
        assert out.time((0, 0)) == 0

    def test_full_firing_spreads_blue(self):
        # blue clock at its cap kappa*s fires blue
        out = run_ssp(line_instance(3, seeds=[(0, 0)]))
        assert out.colour((1, 0)) == "blue"
        assert out.time((1, 0)) == 4

    def test_tunneling_assigns_red(self):
        # blue clock below the cap fires red through the blue vertex
        inst = line_instance(3, seeds=[(0, 0)], blue={((0, 0), (1, 0)): F(3)})
        out = run_ssp(inst)
        assert out.colour((1, 0)) == "red"
        assert out.time((1, 0)) == 3

    def test_simultaneous_conflict_blue_wins(self):
        # red reaches x=2 from the left exactly when blue full-fires from the right
        inst = line_instance(
            5,
            seeds=[(4, 0)],
            sources={(0, 0): F(0), (4, 0): F(0)},
            red={((1, 0), (2, 0)): F(1)},
            blue={((4, 0), (3, 0)): F(1), ((3, 0), (2, 0)): F(1)},
            kappa=1,
        )
        # left: red at 0,1,2...; right: blue seed at 0, full fire (kappa=1) at 1, 2
        out = run_ssp(inst)
        assert out.time((2, 0)) == 2
        assert out.colour((2, 0)) == "blue"
        assert out.stats["ties"] >= 1

    def test_simultaneous_red_assigners_stay_red(self):
        inst = line_instance(3, sources={(0, 0): F(0), (2, 0): F(0)})
        out = run_ssp(inst)
        assert out.time((1, 0)) == 1
        assert out.colour((1, 0)) == "red"

    def test_zero_red_cascade_single_instant(self):
        inst = line_instance(
            4,
            red={((0, 0), (1, 0)): F(0), ((1, 0), (2, 0)): F(0)},
        )
        out = run_ssp(inst)
        assert [out.time((x, 0)) for x in range(4)] == [0, 0, 0, 1]
        assert all(out.colour((x, 0)) == "red" for x in range(4))

    def test_zero_blue_tunnel_same_instant(self):
        # blue seed with a zero blue clock (below cap): red at the same time
        inst = line_instance(3, seeds=[(0, 0)], blue={((0, 0), (1, 0)): F(0)})
        out = run_ssp(inst)
        assert out.time((1, 0)) == 0
        assert out.colour((1, 0)) == "red"

    def test_late_source_loses_to_growth(self):
        inst = line_instance(3, sources={(0, 0): F(0), (2, 0): F(10)})
        out = run_ssp(inst)
        assert out.time((2, 0)) == 2
        assert out.colour((2, 0)) == "red"

    def test_fractional_times_exact(self):
        inst = line_instance(3, red={((0, 0), (1, 0)): F(1, 3), ((1, 0), (2, 0)): F(1, 7)})
        out = run_ssp(inst)
        assert out.time((2, 0)) == F(1, 3) + F(1, 7)

    def test_colour_sets_at(self):
        out = run_ssp(line_instance(4, seeds=[(1, 0)]))
        red, blue = colour_sets_at(out, 1)
        assert red == {(0, 0)}
        assert blue == {(1, 0)}


class TestValidation:
    def test_zero_cycle_rejected(self):
        inst = line_instance(
            2, red={((0, 0), (1, 0)): F(0), ((1, 0), (0, 0)): F(0)}
        )
        with pytest.raises(ValidationError, match="cycle"):
            run_ssp(inst)

    def test_zero_cycle_via_blue_rejected(self):
        inst = line_instance(
            2, blue={((0, 0), (1, 0)): F(0), ((1, 0), (0, 0)): F(0)}
        )
        with pytest.raises(ValidationError, match="cycle"):
            run_ssp(inst)

    def test_red_clock_above_unit_rejected(self):
        inst = line_instance(2, red={((0, 0), (1, 0)): F(2)})
        with pytest.raises(ValidationError, match="red clock"):
            run_ssp(inst)

    def test_blue_clock_above_cap_rejected(self):
        inst = line_instance(2, blue={((0, 0), (1, 0)): F(5)})
        with pytest.raises(ValidationError, match="blue clock"):
            run_ssp(inst)

    def test_negative_clock_rejected(self):
        inst = line_instance(2, red={((0, 0), (1, 0)): F(-1)})
        with pytest.raises(ValidationError):
            run_ssp(inst)

    def test_zero_chain_accepted_and_ordered(self):
        ci = compile_instance(line_instance(4, red={((0, 0), (1, 0)): F(0)}))
        rep = validate(ci)
        assert rep.ok and rep.zero_edges == 1 and rep.zero_vertices == 2
        zo = ci.zorder
        assert zo[ci.window.index((0, 0))] < zo[ci.window.index((1, 0))]

    def test_source_on_seed_rejected_unless_allowed(self):
        inst = line_instance(3, seeds=[(0, 0)])
        object.__setattr__(inst, "allow_blue_sources", False)
        with pytest.raises(ValidationError, match="seed"):
            run_ssp(inst)

    def test_no_source_rejected(self):
        inst = line_instance(3, sources={})
        with pytest.raises(ValidationError, match="source"):
            run_ssp(inst)


class TestEngineProperties:
    def test_finalization_times_nondecreasing(self):
        for k in range(30):
            out = run_ssp(random_dict_instance(3000 + k))
            ts = [out.times_num[v] for v in out.order]
            assert all(a <= b for a, b in zip(ts, ts[1:]))

    def test_seedless_times_bounded_by_unit_times_hops(self):
        # without seeds, growth is plain first passage: T(u) <= s * hops(u)
        from spreadlab.lattice import distances_restricted

        for k in range(10):
            inst = random_dict_instance(4000 + k)
            inst = SSPInstance(
                inst.window, frozenset(), inst.sources, inst.red, inst.blue,
                inst.kappa, red_unit=inst.red_unit,
            )
            out = run_ssp(inst)
            region = set(inst.vertices())
            start = min(F(t) for t in inst.sources.values())
            for src, t0 in inst.sources.items():
                assert out.time(src) <= F(t0)
            bound = {v: None for v in region}
            for src, t0 in inst.sources.items():
                hops = distances_restricted(src, region)
                for v, h in hops.items():
                    b = F(t0) + inst.red_unit * h
                    if bound[v] is None or b < bound[v]:
                        bound[v] = b
            for v in region:
                t = out.time(v)
                assert t is not None
                assert t <= bound[v]
                assert t >= start


class TestOracleAgreement:
    def _compare(self, inst):
        times, colours = oracle_solve(inst)
        for mode in ("python", "numba"):
            out = run_ssp(inst, mode=mode)
            got_t = {v: out.time(v) for v in inst.vertices() if out.time(v) is not None}
            got_c = {v: out.colour(v) for v in got_t}
            assert got_t == times, f"time mismatch ({mode})"
            assert got_c == colours, f"colour mismatch ({mode})"

    def test_hand_cases_match_oracle(self):
        cases = [
            line_instance(5),
            line_instance(5, seeds=[(2, 0)]),
            line_instance(4, seeds=[(0, 0)], blue={((0, 0), (1, 0)): F(0)}),
            line_instance(
                5,
                seeds=[(4, 0)],
                sources={(0, 0): F(0), (4, 0): F(0)},
                kappa=1,
            ),
            line_instance(4, red={((0, 0), (1, 0)): F(0), ((1, 0), (2, 0)): F(0)}),
        ]
        for inst in cases:
            self._compare(inst)

    def test_random_instances_match_oracle(self):
        for k in range(120):
            self._compare(random_dict_instance(900 + k))

    def test_random_instances_exercise_ties_and_zeros(self):
        ties = zeros = blues = 0
        for k in range(120):
            out = run_ssp(random_dict_instance(900 + k))
            ties += out.stats["ties"]
            zeros += out.stats["zero_rings"]
            blues += int(np.sum(out.colours == 1))
        assert ties > 0 and zeros > 0 and blues > 0


class TestEnginePaths:
    def test_python_numba_identical_on_grid(self):
        ci = bernoulli_grid_instance(
            Window.centered(8, 2), seed_p=0.1, kappa=3, master_seed=77
        )
        a = run_ssp(ci, mode="python")
        ci2 = bernoulli_grid_instance(
            Window.centered(8, 2), seed_p=0.1, kappa=3, master_seed=77
        )
        b = run_ssp(ci2, mode="numba")
        assert a.times_num == b.times_num
        assert np.array_equal(a.colours, b.colours)
        assert a.order == b.order

    def test_auto_falls_back_to_python_on_huge_times(self):
        inst = line_instance(3, sources={(0, 0): F(2**70)})
        out = run_ssp(inst)
        assert out.mode == "python"
        assert out.time((2, 0)) == F(2**70) + 2
        with pytest.raises(ValidationError, match="int64"):
            run_ssp(inst, mode="numba")

    def test_determinism_same_seed_same_json(self):
        outs = []
        for _ in range(2):
            ci = bernoulli_grid_instance(
                Window.centered(6, 2), seed_p=0.2, kappa=2, master_seed=5
            )
            outs.append(json.dumps(run_ssp(ci).to_json(), sort_keys=True))
        assert outs[0] == outs[1]


class TestGridInstances:
    def test_boundary_source_covers_window(self):
        ci = bernoulli_grid_instance(
            Window.centered(10, 2), seed_p=0.0, kappa=5, master_seed=3
        )
        out = run_ssp(ci)
        assert all(t is not None for t in out.times_num)
        assert np.all(out.colours == 0)

    def test_origin_source(self):
        ci = bernoulli_grid_instance(
            Window.centered(6, 2), seed_p=0.0, kappa=5, master_seed=3, source="origin"
        )
        out = run_ssp(ci)
        assert out.time((0, 0)) == 0
        assert all(t is not None for t in out.times_num)

    def test_seed_becomes_blue_and_stalls_under_fast_red(self):
        # an isolated seed with a huge kappa never fires before red surrounds it
        ci = bernoulli_grid_instance(
            Window.centered(8, 2), seed_p=0.0, kappa=1001, master_seed=11,
        )
        ci.seeds[ci.window.index((0, 0))] = 1
        out = run_ssp(ci)
        assert out.colour((0, 0)) == "blue"
        blue = out.blue_set()
        assert blue == {(0, 0)}

    def test_json_roundtrip_generator(self):
        ci = bernoulli_grid_instance(
            Window.centered(5, 2), seed_p=0.1, kappa=4, master_seed=9
        )
        ci2 = instance_from_json(json.loads(json.dumps(instance_to_json(ci))))
        assert np.array_equal(ci.red, ci2.red)
        assert np.array_equal(ci.blue, ci2.blue)
        assert np.array_equal(ci.seeds, ci2.seeds)
        assert ci.denom == ci2.denom

    def test_json_roundtrip_explicit(self):
        ci = compile_instance(line_instance(4, seeds=[(1, 0)]))
        obj = instance_to_json(ci)
        assert {"dimension", "window", "seeds", "source", "red_clocks",
                "blue_clocks", "kappa", "red_unit"} <= set(obj)
        ci2 = instance_from_json(json.loads(json.dumps(obj)))
        a = run_ssp(ci)
        b = run_ssp(ci2)
        assert a.times_num == b.times_num
        assert a.denom == b.denom
        assert np.array_equal(a.colours, b.colours)
