import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asgdlab.errors import DomainError
from asgdlab.harness.rates import first_crossing, fit_rate, proportional_fit


def test_exact_exponential():
    t = np.linspace(0, 10, 101)
    fit = fit_rate(t, 5.0 * np.exp(-0.7 * t))
    assert fit.rate == pytest.approx(0.7, abs=1e-10)
    assert fit.intercept == pytest.approx(np.log(5.0), abs=1e-10)
    assert fit.r_squared == 1.0 and fit.n_points == 101


def test_constant_series():
    fit = fit_rate(np.arange(5.0), np.full(5, 2.0))
    assert fit.rate == 0.0 and fit.r_squared == 1.0


def test_window():
    t = np.linspace(0, 10, 101)
    y = np.where(t < 5, np.exp(-3 * t), np.exp(-15) * np.exp(-(t - 5)))
    fit = fit_rate(t, y, window=(5.0, 10.0))
    assert fit.rate == pytest.approx(1.0, abs=1e-10) and fit.window == (5.0, 10.0)


@given(st.floats(-5, 5), st.floats(-3, 3))
def test_recovers_any_line(rate, log_a):
    t = np.linspace(0, 2, 9)
    assert fit_rate(t, np.exp(log_a - rate * t)).rate == pytest.approx(rate, abs=1e-9)


def test_noisy_stderr_covers_truth(rng):
    t = np.linspace(0, 5, 200)
    fit = fit_rate(t, np.exp(-0.4 * t + 0.01 * rng.standard_normal(t.size)))
    assert abs(fit.rate - 0.4) < 4 * fit.rate_stderr and fit.r_squared < 1.0


def test_errors():
    with pytest.raises(DomainError, match="nonpositive sample"):
        fit_rate([0, 1, 2], [1.0, 0.0, 0.5])
    with pytest.raises(DomainError, match="insufficient points"):
        fit_rate([0, 1, 2, 3], [1, 1, 1, 1], window=(2.5, 10))
    with pytest.raises(DomainError):
        fit_rate([0, 1], [1, 1, 1])


def test_proportional_fit():
    b, r2 = proportional_fit([0.25, 0.5, 0.75], [0.125, 0.25, 0.375])
    assert b == pytest.approx(0.5) and r2 == pytest.approx(1.0)
    _, r2 = proportional_fit([1, 2, 3], [3, 1, 2])
    assert r2 < 0.5


def test_first_crossing():
    t = [0.0, 1.0, 2.0, 3.0]
    assert first_crossing(t, [4.0, 3.0, 1.0, 0.5], 2.0) == pytest.approx(1.5)
    assert first_crossing(t, [1.0, 0.5, 0.2, 0.1], 2.0) == 0.0
    assert first_crossing(t, [4.0, 3.0, 3.0, 3.0], 2.0) is None
