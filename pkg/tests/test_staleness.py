import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asgdlab.errors import DomainError
from asgdlab.staleness import (StalenessModel, geometric_pmf, sample_staleness, staleness_stats,
                               write_trace_csv)


def test_zero_kappa_is_always_fresh(rng):
    assert np.all(sample_staleness(StalenessModel.geometric(0.0), rng, 1000) == 0)


def test_pmf_value():
    assert geometric_pmf(3, 0.5) == pytest.approx(0.0625)
    assert geometric_pmf(np.arange(200), 0.7).sum() == pytest.approx(1.0)


@pytest.fixture(scope="module")
def million_half():
    return sample_staleness(StalenessModel.geometric(0.5), np.random.default_rng(1), 10**6)


def test_geometric_mean(million_half):
    # pmf mean kappa/(1-kappa) = 1, standard error sqrt(kappa)/(1-kappa)/sqrt(n)
    se = np.sqrt(0.5) / 0.5 / 1e3
    assert abs(million_half.mean() - 1.0) < 3 * se


def test_stats_recovers_kappa(million_half):
    s = staleness_stats(million_half)
    assert s.kappa_hat == pytest.approx(0.5, abs=0.002)
    assert s.p_value > 0.01
    assert s.pmf_mean == pytest.approx(1.0, abs=0.01)
    assert s.expected_staleness == pytest.approx(s.pmf_mean + 1.0)


@pytest.mark.parametrize("kappa", [0.25, 0.5, 0.75])
def test_low_bins_within_five_se(kappa):
    n = 10**6
    tau = sample_staleness(StalenessModel.geometric(kappa), np.random.default_rng(int(kappa * 100)), n)
    for l in range(3):
        p = geometric_pmf(l, kappa)
        se = np.sqrt(p * (1 - p) / n)
        assert abs(np.mean(tau == l) - p) < 5 * se


def test_all_fresh_trace():
    s = staleness_stats([0, 0, 0, 0])
    assert s.mean == 0 and s.kappa_hat == 0


def test_empty_trace():
    with pytest.raises(ValueError, match="empty"):
        staleness_stats([])


def test_fixed_lag(rng):
    assert np.all(sample_staleness(StalenessModel.fixed(3), rng, 10) == 3)
    assert sample_staleness(StalenessModel.fixed(2), rng) == 2


def test_single_worker_queue_is_fresh(rng):
    for service in ("deterministic", "exponential"):
        tau = sample_staleness(StalenessModel.worker_queue(1, service), rng, 500)
        assert np.all(tau == 0)


def test_deterministic_queue_lag(rng):
    # m workers in lock-step: after the first round every commit saw m - 1 others
    tau = sample_staleness(StalenessModel.worker_queue(4, "deterministic"), rng, 40)
    assert list(tau[:4]) == [0, 1, 2, 3]
    assert np.all(tau[4:] == 3)


def test_exponential_queue_is_reported(rng):
    s = staleness_stats(sample_staleness(StalenessModel.worker_queue(4), rng, 20000))
    # m workers sharing a counter: on average the other m - 1 commit in between
    assert s.mean == pytest.approx(3.0, rel=0.05)
    assert 0 < s.kappa_hat < 1 and np.isfinite(s.chi2)


@given(st.integers(0, 2**32), st.floats(0.0, 0.95))
def test_same_seed_same_trace(seed, kappa):
    model = StalenessModel.geometric(kappa)
    a = sample_staleness(model, np.random.default_rng(seed), 50)
    b = sample_staleness(model, np.random.default_rng(seed), 50)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("build", [lambda: StalenessModel.geometric(1.0), lambda: StalenessModel.fixed(-1),
                                   lambda: StalenessModel.worker_queue(0),
                                   lambda: StalenessModel.worker_queue(2, service_mean=0.0),
                                   lambda: StalenessModel("poisson")])
def test_invalid_models(build):
    with pytest.raises(DomainError):
        build()


def test_trace_csv(tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_csv(path, [0, 2, 1])
    assert path.read_text().splitlines() == ["k,tau", "0,0", "1,2", "2,1"]
