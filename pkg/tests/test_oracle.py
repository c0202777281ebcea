import numpy as np
import pytest

from oopstiff.design_space import full_space, is_feasible, reduced_space
from oopstiff.exceptions import DatasetParseError, DomainError, LookupMissError, OracleExhaustedError
from oopstiff.oracle import (
    DatasetOracle,
    FunctionOracle,
    NonConvergence,
    RetryPolicy,
    SampleRecord,
    SyntheticOracle,
    evaluate_with_retry,
    generate_dataset,
    load_dataset,
    write_dataset,
)

CENTRE = np.array([19.0, 6.0, 1.5, 22.0])


class TestSampleRecord:
    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            SampleRecord(CENTRE, -1.0, 1.0, 1.0)

    def test_equality_and_hash(self):
        a = SampleRecord(CENTRE, 1.0, 2.0, 3.0)
        b = SampleRecord(CENTRE.copy(), 1.0, 2.0, 3.0)
        assert a == b and hash(a) == hash(b)
        assert a != SampleRecord(CENTRE, 1.0, 2.0, 3.5)

    def test_value(self):
        r = SampleRecord(CENTRE, 1.0, 2.0, 3.0)
        assert r.value("F") == 2.0
        with pytest.raises(DomainError):
            r.value("k")


class TestSynthetic:
    def test_centre_closed_form(self, synthetic):
        # hand evaluation at h = l = t = w = 1/2
        r = synthetic.evaluate(CENTRE)
        assert r.theta == pytest.approx(1.25 + 0.4 + 0.35 - 0.25 - 0.25 + 0.05, abs=1e-15)
        assert r.F == pytest.approx(1.0 + 0.75 - 0.3 + 0.075, abs=1e-15)
        assert r.U == pytest.approx(1.0 + 0.6 - 0.3 + 0.125 + 0.1, abs=1e-15)
        assert (r.U, r.F, r.theta) == pytest.approx((1.525, 1.525, 1.55))

    def test_pure(self, synthetic):
        assert synthetic.evaluate(CENTRE) == synthetic.evaluate(CENTRE.copy())

    def test_positive_on_box(self, synthetic, space):
        rng = np.random.default_rng(1)
        for u in rng.random((2000, 4)):
            U, F, th = SyntheticOracle.closed_form(*u)
            assert U > 0 and F > 0 and th > 0

    @pytest.mark.parametrize("param,series,sign", [
        ("L_A", "theta", +1), ("T_A", "theta", -1), ("W_B", "ko", +1), ("H_C", "ko", -1),
    ])
    def test_monotone_trends(self, param, series, sign):
        rng = np.random.default_rng(3)
        i = ["H_C", "L_A", "T_A", "W_B"].index(param)
        for base in rng.random((50, 4)):
            grid = np.tile(base, (21, 1))
            grid[:, i] = np.linspace(0, 1, 21)
            U, F, th = SyntheticOracle.closed_form(*grid.T)
            y = th if series == "theta" else F / (U + 1.0)
            assert np.all(sign * np.diff(y) > 0)

    def test_failure_ball(self, space):
        orc = SyntheticOracle(space, failure_balls=[(CENTRE, 0.05)])
        assert isinstance(orc.evaluate(CENTRE), NonConvergence)
        assert isinstance(orc.evaluate([19, 7.0, 1.5, 22]), SampleRecord)

    def test_minor_weights_on_full_space(self):
        fs = full_space()
        orc = SyntheticOracle(fs)
        a = orc.evaluate(fs.median)
        x = fs.median.copy()
        x[fs.index("R_D")] = 1.8
        b = orc.evaluate(x)
        assert b.theta - a.theta == pytest.approx(0.015)
        assert b.F - a.F == pytest.approx(0.0075)
        assert b.U == a.U


class TestDatasetOracle:
    def test_lookup(self, space):
        recs = [SampleRecord(CENTRE, 1.1, 2.2, 3.3, "dataset"), SampleRecord([20, 6, 1.5, 22], 1, 1, 1)]
        orc = DatasetOracle(recs, space)
        assert orc.evaluate(CENTRE) is recs[0]
        assert orc.evaluate(CENTRE * (1 + 1e-12)) is recs[0]

    def test_miss(self, space):
        orc = DatasetOracle([SampleRecord(CENTRE, 1, 1, 1)], space)
        with pytest.raises(LookupMissError):
            orc.evaluate(CENTRE * (1 + 1e-6))


class FailOnce:
    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def evaluate(self, x):
        self.calls += 1
        if self.calls == 1:
            return NonConvergence(tuple(x))
        return self.inner.evaluate(x)


class TestRetry:
    def test_converging_oracle_unchanged(self, synthetic, space, rng):
        assert evaluate_with_retry(synthetic, CENTRE, space, RetryPolicy(), rng) == synthetic.evaluate(CENTRE)

    def test_fail_once(self, synthetic, space, rng):
        rec = evaluate_with_retry(FailOnce(synthetic), CENTRE, space, RetryPolicy(), rng)
        assert not np.array_equal(rec.x, CENTRE)
        assert is_feasible(rec.x, space)
        assert rec == synthetic.evaluate(rec.x)

    def test_large_failure_ball_exhausts(self, space):
        orc = SyntheticOracle(space, failure_balls=[(CENTRE, 0.5)])
        rng = np.random.default_rng(0)
        exhausted = 0
        for _ in range(1000):
            try:
                evaluate_with_retry(orc, CENTRE, space, RetryPolicy(5, 0.02), rng)
            except OracleExhaustedError as exc:
                exhausted += 1
                assert len(exc.attempted) == 6
        assert exhausted >= 990

    def test_zero_retries(self, space, rng):
        orc = SyntheticOracle(space, failure_balls=[(CENTRE, 0.01)])
        with pytest.raises(OracleExhaustedError):
            evaluate_with_retry(orc, CENTRE, space, RetryPolicy(0), rng)


class TestDatasetIO:
    def test_generate_feasible(self, space, synthetic):
        recs = generate_dataset(space, synthetic, 100)
        assert len(recs) == 100
        assert all(is_feasible(r.x, space) for r in recs)

    def test_retry_replacement_in_generation(self, space):
        first = generate_dataset(space, SyntheticOracle(space), 1)[0]
        orc = SyntheticOracle(space, failure_balls=[(first.x, 1e-6)])
        recs = generate_dataset(space, orc, 5, seed=4)
        assert not np.array_equal(recs[0].x, first.x)
        assert is_feasible(recs[0].x, space)

    def test_round_trip_and_bytes(self, tmp_path, space, synthetic):
        recs = generate_dataset(space, synthetic, 50)
        a = write_dataset(recs, tmp_path / "a.csv", space, {"pressure": "100 kPa"})
        b = write_dataset(generate_dataset(space, synthetic, 50), tmp_path / "b.csv", space,
                          {"pressure": "100 kPa"})
        assert a.read_bytes() == b.read_bytes()
        text = a.read_text().splitlines()
        assert text[0] == "# pressure: 100 kPa"
        assert text[1] == "H_C,L_A,T_A,W_B,U,F,theta"
        back, warns = load_dataset(a, space)
        assert warns == []
        assert [np.array_equal(r.x, s.x) and r.U == s.U and r.F == s.F and r.theta == s.theta
                for r, s in zip(back, recs)] == [True] * 50

    def _write(self, path, body):
        path.write_text(body)
        return path

    def test_three_rows(self, tmp_path, space):
        p = self._write(tmp_path / "d.csv", "H_C,L_A,T_A,W_B,U,F,theta\n"
                        "19,6,1.5,22,1.1,2.2,3.3\n20,6,1.5,22,1,1,1\n21,6,1.5,22,1,1,1\n")
        recs, _ = load_dataset(p, space)
        assert len(recs) == 3
        assert DatasetOracle(recs, space).evaluate(CENTRE).theta == 3.3

    def test_missing_column(self, tmp_path, space):
        p = self._write(tmp_path / "d.csv", "H_C,L_A,T_A,W_B,U,F\n19,6,1.5,22,1,1\n")
        with pytest.raises(DatasetParseError, match="theta"):
            load_dataset(p, space)

    def test_non_numeric_with_line(self, tmp_path, space):
        p = self._write(tmp_path / "d.csv", "H_C,L_A,T_A,W_B,U,F,theta\n19,6,1.5,22,1,1,1\n20,6,x,22,1,1,1\n")
        with pytest.raises(DatasetParseError, match=r":3: .*T_A"):
            load_dataset(p, space)

    def test_duplicate(self, tmp_path, space):
        p = self._write(tmp_path / "d.csv", "H_C,L_A,T_A,W_B,U,F,theta\n19,6,1.5,22,1,1,1\n19,6,1.5,22,2,2,2\n")
        with pytest.raises(DatasetParseError, match="duplicate"):
            load_dataset(p, space)

    def test_infeasible_row_warned(self, tmp_path, space):
        p = self._write(tmp_path / "d.csv", "H_C,L_A,T_A,W_B,U,F,theta\n19,4,2.0,22,1,1,1\n19,6,1.5,22,1,1,1\n")
        recs, warns = load_dataset(p, space)
        assert len(recs) == 2
        assert len(warns) == 1 and "line 2" in warns[0]

    def test_nan_row_is_nonconvergence(self, tmp_path, space):
        p = self._write(tmp_path / "d.csv", "H_C,L_A,T_A,W_B,U,F,theta\n19,6,1.5,22,nan,nan,nan\n")
        recs, _ = load_dataset(p, space)
        assert isinstance(recs[0], NonConvergence)

    def test_column_order_and_comments(self, tmp_path, space):
        p = self._write(tmp_path / "d.csv", "# from FE\ntheta,F,U,W_B,T_A,L_A,H_C,note\n3,2,1,22,1.5,6,19,ok\n")
        recs, warns = load_dataset(p, space)
        np.testing.assert_array_equal(recs[0].x, CENTRE)
        assert (recs[0].U, recs[0].F, recs[0].theta) == (1, 2, 3)
        assert any("note" in w for w in warns)

    def test_missing_file(self, tmp_path, space):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "none.csv", space)


class TestFunctionOracle:
    def test_custom_function(self, space):
        orc = FunctionOracle(space, lambda u: (u[0], u[1], u[2]))
        r = orc.evaluate(CENTRE)
        assert (r.U, r.F, r.theta) == (0.5, 0.5, 0.5)
