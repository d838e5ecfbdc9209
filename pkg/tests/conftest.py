import numpy as np
import pytest

from vmprandtl import benchmark_setup, derivative_diagnostics, march, separable_initial_profile
from vmprandtl.vm_march import GridConfig

BENCH_EPS = 1e-3
BENCH_NS = 512

ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    """Collect one line per acceptance criterion for the terminal summary."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture(scope="session")
def bench_setup():
    return benchmark_setup()


@pytest.fixture(scope="session")
def sep_profile():
    return separable_initial_profile(2.5, 1.0)


@pytest.fixture(scope="session")
def bench_field(bench_setup, sep_profile):
    """The separable benchmark march (eps = 1e-3, 512 cells) with derivative diagnostics."""
    field = march(sep_profile, bench_setup, BENCH_EPS, GridConfig(BENCH_NS), output_y=(0.25, 0.5, 1.0))
    return derivative_diagnostics(field, bench_setup, mu=0.1)


@pytest.fixture(scope="session")
def coarse_field(bench_setup, sep_profile):
    field = march(sep_profile, bench_setup, BENCH_EPS, GridConfig(128))
    return derivative_diagnostics(field, bench_setup)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
