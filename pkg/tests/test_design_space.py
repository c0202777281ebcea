import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from oopstiff.design_space import (
    DesignSpace,
    ParameterDef,
    StrictLinearConstraint,
    denormalize,
    dump_space,
    full_space,
    is_feasible,
    load_space,
    normalize,
    parse_constraint,
    parse_space,
    perturb_around,
    reduced_space,
    sobol_sample,
    sobol_sample_with_stats,
)
from oopstiff.exceptions import ConfigError, DomainError, PerturbationFailedError, SamplingExhaustedError


def unit_box(d=4):
    return DesignSpace(tuple(ParameterDef(f"x{i}", 0.0, 1.0) for i in range(d)))


# Independent Sobol generator for the first four dimensions (Joe-Kuo
# new-joe-kuo-6.21201 entries for dims 2..4), Gray-code ordering.
_JK = [(1, 0, [1]), (2, 1, [1, 3]), (3, 1, [1, 3, 1])]


def _direction_numbers(bits=32):
    V = [[1 << (bits - 1 - k) for k in range(bits)]]
    for s, a, m in _JK:
        v = [m[k] << (bits - 1 - k) for k in range(s)]
        for k in range(s, bits):
            x = v[k - s] ^ (v[k - s] >> s)
            for j in range(1, s):
                if (a >> (s - 1 - j)) & 1:
                    x ^= v[k - j]
            v.append(x)
        V.append(v)
    return V


def reference_sobol(n, bits=32):
    V = _direction_numbers(bits)
    x = [0] * 4
    out = [[0.0] * 4]
    for i in range(1, n):
        c = ((~(i - 1)) & i).bit_length() - 1  # lowest zero bit of i - 1
        for d in range(4):
            x[d] ^= V[d][c]
        out.append([v / 2.0 ** bits for v in x])
    return np.array(out)


class TestNormalize:
    def test_median_maps_to_centre(self):
        sp = reduced_space()
        np.testing.assert_allclose(normalize([19, 6, 1.5, 22], sp), [0.5] * 4)

    def test_corners(self):
        sp = reduced_space()
        np.testing.assert_array_equal(normalize(sp.lower, sp), np.zeros(4))
        np.testing.assert_array_equal(normalize([30, 10, 2, 30], sp), np.ones(4))

    def test_out_of_box_names_parameter(self):
        with pytest.raises(DomainError, match="H_C"):
            normalize([31, 6, 1.5, 22], reduced_space())

    def test_denormalize_centre(self):
        np.testing.assert_allclose(denormalize([0.5] * 4, reduced_space()), [19, 6, 1.5, 22])

    def test_denormalize_rejects_outside_unit_cube(self):
        with pytest.raises(DomainError):
            denormalize([0.5, 1.2, 0.5, 0.5], reduced_space())

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
    def test_round_trip(self, u):
        sp = reduced_space()
        u = np.array(u)
        back = normalize(denormalize(u, sp), sp)
        assert np.all(np.abs(back - u) <= 1e-12 * np.maximum(1.0, np.abs(u)))
        x = denormalize(u, sp)
        assert np.all(np.abs(denormalize(normalize(x, sp), sp) - x) <= 1e-12 * np.abs(x))


class TestFeasibility:
    def test_paper_initial_design(self):
        assert is_feasible([19, 6, 1.5, 22], reduced_space())

    def test_strict_coupling_boundary(self):
        assert not is_feasible([19, 4, 2.0, 22], reduced_space())
        assert is_feasible([19, 4.000001, 2.0, 22], reduced_space())

    def test_box_violation(self):
        assert not is_feasible([31, 6, 1.5, 22], reduced_space())

    def test_open_upper_bound(self):
        sp = reduced_space()
        assert not is_feasible([19, 10.0, 1.5, 22], sp)
        assert is_feasible([19, 9.999, 1.5, 22], sp)
        assert is_feasible([30, 9.0, 2.0, 30], sp)

    def test_batch_mask(self):
        mask = is_feasible(np.array([[19, 6, 1.5, 22], [19, 4, 2.0, 22]]), reduced_space())
        assert mask.tolist() == [True, False]


class TestSobol:
    def test_first_point_after_skip(self):
        np.testing.assert_array_equal(sobol_sample(unit_box(), 1), [[0.5] * 4])

    def test_matches_independent_joe_kuo_reference(self):
        ref = reference_sobol(257)
        got = sobol_sample(unit_box(), 256)
        np.testing.assert_array_equal(got, ref[1:])

    def test_all_feasible_and_deterministic(self):
        sp = reduced_space()
        a = sobol_sample(sp, 4096)
        assert a.shape == (4096, 4)
        assert is_feasible(a, sp).all()
        np.testing.assert_array_equal(a, sobol_sample(sp, 4096))

    def test_stream_order_is_filtered_raw_stream(self):
        sp = reduced_space()
        raw = qmc.Sobol(4, scramble=False).random(1024)[1:]
        X = denormalize(raw, sp)
        expect = X[is_feasible(X, sp)][:500]
        np.testing.assert_array_equal(sobol_sample(sp, 500), expect)

    def test_gap_smaller_than_random(self):
        # both sets go through the same feasibility filter, compared axis by axis
        sp = reduced_space()
        u = normalize(sobol_sample(sp, 4096), sp)
        rng = np.random.default_rng(0)
        r = []
        while len(r) < 4096:
            c = rng.random(4)
            if is_feasible(denormalize(c, sp), sp):
                r.append(c)
        r = np.array(r)

        def max_gap(a):
            s = np.sort(a, axis=0)
            s = np.vstack([np.zeros(4), s, np.ones(4)])
            return np.diff(s, axis=0).max(axis=0)

        assert np.all(max_gap(u) < max_gap(r))

    @pytest.mark.filterwarnings("ignore:The balance properties")
    def test_reject_fraction(self):
        sp = reduced_space()
        pts, consumed = sobol_sample_with_stats(sp, 8750)
        frac = 1 - len(pts) / consumed
        raw = denormalize(qmc.Sobol(4, scramble=False).random(10001)[1:], sp)
        frac10k = 1 - is_feasible(raw, sp).mean()
        assert 0.05 <= frac10k <= 0.20
        # frozen regression value for the unscrambled Joe-Kuo stream
        assert frac10k == pytest.approx(0.125, abs=0.005)
        assert frac == pytest.approx(frac10k, abs=0.01)

    def test_budget_exhaustion(self):
        impossible = DesignSpace((ParameterDef("a", 0, 1), ParameterDef("b", 0, 1)),
                                 (StrictLinearConstraint({"a": 1, "b": 1}, -1.0),))
        with pytest.raises(SamplingExhaustedError):
            sobol_sample(impossible, 5, budget=2000)

    def test_bad_n(self):
        with pytest.raises(DomainError):
            sobol_sample(reduced_space(), 0)


class TestPerturb:
    def test_zero_scale_identity(self, rng):
        x = np.array([19, 6, 1.5, 22.0])
        np.testing.assert_array_equal(perturb_around(x, reduced_space(), 0.0, rng), x)

    def test_feasible_draws(self, rng):
        sp = reduced_space()
        for _ in range(1000):
            y = perturb_around(sp.median, sp, 0.02, rng)
            assert is_feasible(y, sp)

    def test_mean_offset_magnitude(self):
        # E|N(0, s^2)| = s sqrt(2/pi); box and coupling never bind near the centre
        sp = reduced_space()
        rng = np.random.default_rng(7)
        off = np.array([perturb_around(sp.median, sp, 0.02, rng) for _ in range(100_000)]) - sp.median
        expect = 0.02 * sp.span * np.sqrt(2 / np.pi)
        np.testing.assert_allclose(np.abs(off).mean(axis=0), expect, rtol=0.05)

    def test_failure_after_cap(self, rng):
        # feasible set is the sliver |a - b| < 1e-9
        sp = DesignSpace((ParameterDef("a", 0, 1), ParameterDef("b", 0, 1)),
                         (StrictLinearConstraint({"a": 1, "b": -1}, 1e-9),
                          StrictLinearConstraint({"a": -1, "b": 1}, 1e-9)))
        with pytest.raises(PerturbationFailedError):
            perturb_around([0.5, 0.5], sp, 0.01, rng, max_tries=20)


class TestSpaces:
    def test_presets(self):
        assert reduced_space().names == ["H_C", "L_A", "T_A", "W_B"]
        fs = full_space()
        assert fs.dim == 8
        assert fs.parameter("R_D").upper == 1.8

    def test_validation(self):
        with pytest.raises(ConfigError):
            DesignSpace((ParameterDef("a", 0, 1), ParameterDef("a", 0, 2)))
        with pytest.raises(ConfigError):
            DesignSpace((ParameterDef("a", 0, 1),), (StrictLinearConstraint({"b": 1.0}, 0.0),))
        with pytest.raises(ConfigError):
            ParameterDef("a", 1.0, 1.0)

    def test_restrict_folds_constraint(self):
        fs = full_space()
        red = fs.restrict(["H_C", "L_A", "T_A", "W_B"])
        assert red.names == ["H_C", "L_A", "T_A", "W_B"]
        assert red.frozen == {"R_A": 0.9, "R_B": 0.9, "R_C": 0.9, "R_D": 0.9}
        assert not is_feasible([17, 4, 2, 22], red)

    def test_restrict_freezing_coupled_parameter(self):
        red = reduced_space().restrict(["H_C", "L_A", "W_B"], {"T_A": 1.5})
        assert is_feasible([19, 3.5, 22], red)
        assert not is_feasible([19, 2.9, 22], red)


class TestConfigFiles:
    TEXT = """
[parameter H_C]
lower = 8
upper = 30
unit = mm

[parameter L_A]
lower = 2
upper = 10
upper_strict = true

[parameter T_A]
lower = 1
upper = 2

[parameter W_B]
lower = 14
upper = 30

[constraints]
wall_vs_length = T_A:2 L_A:-1 < 0
"""

    def test_parse_equals_preset(self):
        sp = parse_space(self.TEXT)
        assert sp.parameters == reduced_space().parameters
        assert sp.constraints == reduced_space().constraints

    def test_dump_round_trip(self, tmp_path):
        p = tmp_path / "space.cfg"
        p.write_text(dump_space(full_space()))
        back = load_space(p)
        assert back.parameters == full_space().parameters
        assert back.constraints == full_space().constraints

    def test_bad_constraint(self):
        with pytest.raises(ConfigError):
            parse_constraint("T_A 2 < 0")
        with pytest.raises(ConfigError):
            parse_constraint("T_A:2 L_A:-1")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_space(tmp_path / "nope.cfg")
