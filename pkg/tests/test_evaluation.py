import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oopstiff.evaluation import (
    SplitSpec,
    cov_error,
    error_report,
    learning_curve,
    split,
    validate,
    write_learning_curve_csv,
)
from oopstiff.exceptions import SplitError, UndefinedMetricError


class TestSplit:
    def test_sizes(self):
        tr, te = split(list(range(10)), SplitSpec(0.8, 0))
        assert (len(tr), len(te)) == (8, 2)

    def test_paper_size(self):
        tr, te = split(list(range(5400)))
        assert len(tr) == 4320 and len(te) == 1080

    def test_seeded(self):
        assert split(list(range(50)), SplitSpec(0.8, 4)) == split(list(range(50)), SplitSpec(0.8, 4))
        assert split(list(range(50)), SplitSpec(0.8, 4)) != split(list(range(50)), SplitSpec(0.8, 5))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 300), st.floats(0.05, 0.95), st.integers(0, 10))
    def test_partition(self, n, f, seed):
        k = int(np.floor(f * n))
        if k in (0, n):
            with pytest.raises(SplitError):
                split(list(range(n)), SplitSpec(f, seed))
            return
        tr, te = split(list(range(n)), SplitSpec(f, seed))
        assert sorted(tr + te) == list(range(n))
        assert not set(tr) & set(te)

    def test_degenerate(self):
        with pytest.raises(SplitError):
            split([1])
        with pytest.raises(SplitError):
            SplitSpec(1.0)


class TestCovError:
    def test_hand_example(self):
        assert cov_error([1, 1, 2, 2], [1, 1, 1, 1]) == 0.5

    def test_perfect_and_bias(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        assert cov_error(a, a) == 0.0
        assert cov_error(a + 0.25, a) == 0.0

    def test_population_convention(self):
        p, a = np.array([1.0, 2.0, 4.0]), np.array([1.0, 1.0, 1.0])
        assert cov_error(p, a) == pytest.approx(np.sqrt(((p - a - 4 / 3) ** 2).mean()))

    def test_zero_mean(self):
        with pytest.raises(UndefinedMetricError):
            cov_error([1, -1], [1, -1])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cov_error([1, 2], [1])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.1, 10), min_size=2, max_size=30), st.floats(-5, 5), st.floats(0.1, 10))
    def test_translation_and_scaling(self, act, c, k):
        a = np.array(act)
        noise = np.sin(np.arange(len(a)))
        base = cov_error(a + noise, a)
        assert cov_error(a + noise + c, a) == pytest.approx(base, rel=1e-9, abs=1e-12)
        assert cov_error(a + k * noise, a) == pytest.approx(k * base, rel=1e-9, abs=1e-12)


class TestValidate:
    def test_report(self, space, dataset800):
        models, rep = validate(dataset800[:500], space)
        assert (rep.n_train, rep.n_test) == (400, 100)
        for t in ("U", "F", "theta"):
            assert rep.cov_error[t] == pytest.approx(rep.sigma[t] / rep.mu[t])
            assert 0 <= rep.cov_error[t] <= 0.02

    def test_reload_reproduces_errors(self, tmp_path, space, dataset800):
        from oopstiff.surrogate import SurrogateTriple, load_model, save_model

        models, rep = validate(dataset800[:300], space)
        back = SurrogateTriple(*(load_model(save_model(m, tmp_path / f"{m.target}.rbf")) for m in models))
        _, test = split(dataset800[:300])
        assert error_report(back, test, rep.n_train).cov_error == rep.cov_error


class TestLearningCurve:
    def test_small_size_row_reports_error(self, space, synthetic):
        rows = learning_curve(space, synthetic, [5, 60])
        assert np.isnan(rows[0]["theta"]) and rows[0]["error"]
        assert rows[1]["error"] == "" and rows[1]["theta"] > 0

    def test_rows_independent(self, space, synthetic):
        rows = learning_curve(space, synthetic, [100, 300])
        alone = learning_curve(space, synthetic, [100])
        assert alone[0] == rows[0]

    def test_ascending_required(self, space, synthetic):
        with pytest.raises(ValueError):
            learning_curve(space, synthetic, [300, 100])

    def test_csv(self, tmp_path, space, synthetic):
        rows = learning_curve(space, synthetic, [60, 120])
        lines = write_learning_curve_csv(rows, tmp_path / "lc.csv").read_text().splitlines()
        assert lines[0] == "size,U_error,F_error,theta_error,error"
        assert lines[1].startswith("60,")
