import numpy as np
import pytest

from asgdlab.kfp import GaussianMeasure

# criterion id -> (description, passed); filled by the acceptance tests
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


@pytest.fixture
def record_criterion():
    def record(num: int, description: str, passed: bool) -> bool:
        ACCEPTANCE[num] = (description, bool(passed))
        print(f"{'PASS' if passed else 'FAIL'} criterion {num}: {description}")
        return passed
    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_measure():
    """beta = 2, omega0 = 1: variances 1/2 in both variables."""
    return GaussianMeasure(beta=2.0, omega0=1.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        desc, ok = ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {num:>2}  {desc}")
