import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asgdlab.errors import CertificateError, DomainError
from asgdlab.hypo import (build_matrices, certified_rate_sup, check_certificate, constants,
                          find_C_Chat, hypo_report)
from asgdlab.params import CRITICAL, OVERDAMPED, UNDERDAMPED, theorem_rate


class TestMatrices:
    def test_underdamped_K(self):
        m = build_matrices(1.0, 1.0, 1.0, 0.5)
        assert np.allclose(m.K2, [[1.0, 0.5], [0.5, 1.0]])

    def test_overdamped_K(self):
        m = build_matrices(2.5, 1.0, 2.125, 1.25)
        assert np.allclose(m.K2, [[2.5, 4.25], [4.25, 8.125]])

    @given(st.floats(0.01, 20), st.floats(0.01, 10), st.floats(0.0, 50), st.floats(-5, 5))
    def test_decomposition(self, gamma, omega0, C, C_hat):
        m = build_matrices(gamma, omega0, C, C_hat)
        assert np.allclose(m.K2, m.Q2 @ m.P2 + m.P2 @ m.Q2.T, rtol=0, atol=1e-12 * max(1, np.abs(m.K2).max()))

    @given(st.floats(0.01, 5), st.floats(-2, 2))
    def test_p_definite_iff(self, C, C_hat):
        m = build_matrices(1.0, 1.0, C, C_hat)
        assert m.p_positive_definite == (np.linalg.eigvalsh(m.P2).min() > 0)


class TestCertificate:
    def test_underdamped_sharp(self):
        assert check_certificate(build_matrices(1.0, 1.0, 1.0, 0.5), 0.5) == pytest.approx(0.0, abs=1e-14)

    def test_overdamped_sharp(self):
        m = build_matrices(2.5, 1.0, 2.125, 1.25)
        diff = m.K2 - 2 * 0.5 * m.P2
        assert np.allclose(diff, [[1.5, 3.0], [3.0, 6.0]])
        assert check_certificate(m, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_theorem_mu_overshoots(self):
        m = build_matrices(1.0, 1.0, 1.0, 0.5)
        assert np.allclose(m.K2 - 2 * m.P2, [[-1.0, -0.5], [-0.5, -1.0]])
        assert check_certificate(m, 1.0) < 0

    def test_not_definite(self):
        with pytest.raises(CertificateError, match="P not positive definite"):
            check_certificate(build_matrices(1.0, 1.0, 0.25, 0.5), 0.1)

    def test_matches_eigvalsh(self, rng):
        for _ in range(50):
            g, w = rng.uniform(0.1, 5, 2)
            C_hat = rng.uniform(-1, 1)
            m = build_matrices(g, w, C_hat**2 + rng.uniform(0.01, 3), C_hat)
            mu = rng.uniform(0, 2)
            assert check_certificate(m, mu) == pytest.approx(np.linalg.eigvalsh(m.K2 - 2 * mu * m.P2).min(),
                                                             abs=1e-12)

    def test_random_pairs(self):
        rng = np.random.default_rng(99)
        overshoot = {UNDERDAMPED: False, OVERDAMPED: False}
        for _ in range(1000):
            gamma, omega0 = rng.uniform(0.05, 10), rng.uniform(0.05, 5)
            r = theorem_rate(gamma, omega0)
            if r.regime == CRITICAL or abs(gamma - 2 * omega0) < 1e-6 * gamma:
                continue
            m = build_matrices(gamma, omega0, r.C, r.C_hat)
            assert m.p_positive_definite
            assert check_certificate(m, r.mu_matrix) >= -1e-10 * max(1.0, np.abs(m.K2).max())
            overshoot[r.regime] |= check_certificate(m, r.mu_thm) < 0
        assert all(overshoot.values())

    @pytest.mark.parametrize("gamma, omega0", [(1.0, 1.0), (2.5, 1.0), (4.0, 1.5), (0.3, 1.0), (7.0, 0.5)])
    def test_sup_is_mu_matrix(self, gamma, omega0):
        r = theorem_rate(gamma, omega0)
        assert certified_rate_sup(build_matrices(gamma, omega0, r.C, r.C_hat)) == pytest.approx(
            r.mu_matrix, abs=1e-6)


class TestCritical:
    def test_search(self):
        C, C_hat = find_C_Chat(2.0, 1.0, 0.2)
        assert C > C_hat**2
        assert check_certificate(build_matrices(2.0, 1.0, C, C_hat), 0.8) >= 0

    def test_nearly_trivial_rate(self):
        C, C_hat = find_C_Chat(2.0, 1.0, 0.99)
        assert C > C_hat**2
        assert check_certificate(build_matrices(2.0, 1.0, C, C_hat), 0.01) >= 0

    @pytest.mark.parametrize("delta", [0.05, 0.01])
    def test_small_delta(self, delta):
        C, C_hat = find_C_Chat(3.0, 1.5, delta)
        assert check_certificate(build_matrices(3.0, 1.5, C, C_hat), 1.5 - delta) >= 0

    @pytest.mark.parametrize("args", [(2.5, 1.0, 0.1), (2.0, 1.0, 0.0), (2.0, 1.0, 1.0)])
    def test_rejects(self, args):
        with pytest.raises(DomainError):
            find_C_Chat(*args)


class TestConstants:
    def test_C2(self):
        assert constants(1.0, 2.0, 1.0, 1.0, 0.5, 0.0)["C2"] == 2.0

    def test_eps_shift(self):
        c = constants(1.0, 2.0, 1.0, 1.0, 0.5, 1e-4)
        assert c["eps_shift"] == pytest.approx(29.5 * 1e-4 * 4 / 0.75, rel=1e-12)
        assert c["eps_shift"] == pytest.approx(0.0157333, abs=1e-7)

    def test_unperturbed(self):
        c = constants(1.0, 2.0, 1.0, 1.0, 0.5, 0.0, mu=0.5)
        assert c["eps_shift"] == 0 and c["net_rate"] == 1.0

    @given(st.floats(1e-8, 1.0), st.floats(0.1, 5), st.floats(0.1, 100), st.floats(0.1, 3))
    def test_linear_in_eps0(self, eps0, gamma, beta, omega0):
        one = constants(gamma, beta, omega0, 2.0, 0.5, eps0)["eps_shift"]
        two = constants(gamma, beta, omega0, 2.0, 0.5, 2 * eps0)["eps_shift"]
        assert two == pytest.approx(2 * one, rel=1e-12) and one >= 0

    def test_guards(self):
        with pytest.raises(CertificateError):
            constants(1.0, 2.0, 1.0, 0.25, 0.5, 0.0)
        with pytest.raises(DomainError):
            constants(1.0, 2.0, 1.0, 1.0, 0.5, -1.0)


class TestReport:
    def test_fields(self):
        rep = hypo_report(1.0, 1.0, 2.0, eps0=1e-4)
        d = json.loads(rep.to_json())
        for key in ("mu_matrix", "mu_thm", "C", "C_hat", "psd_margin", "C2", "eps_shift", "net_rate"):
            assert key in d
        assert d["psd_margin"] >= -1e-10 and d["psd_margin_at_mu_thm"] < 0
        assert d["net_rate"] == pytest.approx(2 * (0.5 - d["eps_shift"]))

    def test_critical(self):
        rep = hypo_report(2.0, 1.0, 2.0)
        assert rep.regime == CRITICAL
        assert rep.mu_thm == pytest.approx(2.0 - 0.1)
        assert rep.psd_margin >= 0 and rep.C > rep.C_hat**2
