import numpy as np
import pytest

from oopstiff import SyntheticOracle, fit_triple, generate_dataset, reduced_space


@pytest.fixture(scope="session")
def space():
    return reduced_space()


@pytest.fixture(scope="session")
def synthetic(space):
    return SyntheticOracle(space)


@pytest.fixture(scope="session")
def dataset800(space, synthetic):
    return generate_dataset(space, synthetic, 800)


@pytest.fixture(scope="session")
def models800(space, dataset800):
    return fit_triple(dataset800, space)


@pytest.fixture(scope="session")
def small_models(space, synthetic):
    return fit_triple(generate_dataset(space, synthetic, 120), space)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
