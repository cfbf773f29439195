"""Evolution operators, weights, and the amplified block encoding."""

from __future__ import annotations

import math
from itertools import product

import numpy as np
import pytest

from pmrsim.divdiff import KTuple
from pmrsim.errors import BudgetExceededError, ValidationError
from pmrsim.lcu import (
    AncillaLayout,
    SimParams,
    build_oaa_operator,
    build_U_series_exact,
    build_U_tilde,
    build_V,
    choose_params,
    exact_step_unitary,
    is_z_dependent,
    lcu_weights,
    normalization_constant,
    simulate,
    spectral_distance,
)
from pmrsim.paulis import PauliHamiltonian
from pmrsim.pmr import pmr_decompose

from conftest import random_pauli_terms

LN2 = math.log(2.0)


def ham(terms):
    return pmr_decompose(PauliHamiltonian.from_strings(terms))


def series_tail(x, q_from, terms=60):
    return sum(x**q / math.factorial(q) for q in range(q_from, q_from + terms))


def random_bounded_ham(rng, n, target_gamma=2.0, diag_scale=0.15):
    """Random PMR Hamiltonian rescaled to Gamma = target and small dE."""
    while True:
        terms = random_pauli_terms(rng, n, int(rng.integers(3, 8)))
        h = ham(terms)
        if h.m >= 1 and h.gamma_total > 0:
            break
    scale_off = target_gamma / h.gamma_total
    out = {}
    for s, c in terms.items():
        if "X" in s or "Y" in s:
            out[s] = c * scale_off
        else:
            out[s] = c * diag_scale
    return ham(out)


class TestChooseParams:
    def test_worked_example(self):
        h = ham({"X" + "I" * 3: 1.0, "IXII": 1.0, "Z" + "I" * 3: 0.5})
        # force the exact published numbers: Gamma=2, dE=1
        assert h.gamma_total == pytest.approx(2.0)
        assert h.delta_e == pytest.approx(1.0)
        p = choose_params(0.01, 10.0, h)
        assert (p.r, p.Q, p.K, p.kappa) == (29, 6, 32, 5)
        assert p.dt == pytest.approx(0.344828, abs=1e-6)
        assert p.mu == pytest.approx(0.5)

    def test_zero_gap_means_no_subdivision(self):
        h = ham({"XI": 1.0, "IX": 0.4})
        assert h.delta_e == 0.0
        for eps in (0.3, 1e-4):
            p = choose_params(eps, 5.0, h)
            assert p.K == 1 and p.kappa == 0

    def test_r_scales_linearly_in_t(self):
        h = ham({"X": 2.0})
        r1 = choose_params(0.01, 8.0, h).r
        r2 = choose_params(0.01, 4.0, h).r
        assert r2 in (math.ceil(r1 / 2), math.ceil(r1 / 2) + 1) and abs(2 * r2 - r1) <= 2

    def test_invariants_on_random_instances(self, rng):
        for _ in range(10):
            h = random_bounded_ham(rng, int(rng.integers(2, 4)))
            eps = float(rng.uniform(0.005, 0.3))
            t = float(rng.uniform(0.2, 4.0))
            p = choose_params(eps, t, h)
            assert h.gamma_total * p.dt <= LN2 + 1e-12
            budget = eps / (2 * p.r)
            assert series_tail(h.gamma_total * p.dt, p.Q + 1) <= budget
            assert (p.dt * h.delta_e) ** 2 / (2 * p.K**2) <= budget + 1e-18
            assert p.r == math.ceil(t * h.gamma_total / LN2)

    def test_validation(self):
        h = ham({"X": 1.0})
        with pytest.raises(ValidationError):
            choose_params(0.0, 1.0, h)
        with pytest.raises(ValidationError):
            choose_params(0.1, -1.0, h)
        hdiag = ham({"Z": 1.0})
        with pytest.raises(ValidationError, match="Gamma"):
            choose_params(0.1, 1.0, hdiag)


class TestExactStep:
    def test_z_at_pi(self):
        u = exact_step_unitary(ham({"Z": 1.0}), math.pi)
        np.testing.assert_allclose(u, -np.eye(2), atol=1e-12)

    def test_rabi_closed_form(self):
        om, dt = 0.8, 0.55
        u = exact_step_unitary(ham({"X": om}), dt)
        expect = math.cos(om * dt) * np.eye(2) - 1j * math.sin(om * dt) * np.array(
            [[0, 1], [1, 0]]
        )
        np.testing.assert_allclose(u, expect, atol=1e-12)

    def test_unitarity(self, rng):
        h = random_bounded_ham(rng, 3)
        u = exact_step_unitary(h, 0.37)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(8), atol=1e-11)


class TestSeriesExact:
    def test_q0_is_diagonal_evolution(self):
        h = ham({"Z": 0.5, "X": 0.3})
        u0 = build_U_series_exact(h, 0.9, 0)
        np.testing.assert_allclose(
            u0, np.diag(np.exp(-1j * 0.9 * np.array([0.5, -0.5]))), atol=1e-13
        )

    def test_pure_x_is_truncated_taylor(self):
        om, dt, Q = 0.6, 0.5, 4
        h = ham({"X": om})
        u = build_U_series_exact(h, dt, Q)
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        expect = sum(
            (-1j * om * dt) ** q / math.factorial(q) * np.linalg.matrix_power(x, q)
            for q in range(Q + 1)
        )
        np.testing.assert_allclose(u, expect, atol=1e-12)

    def test_high_order_converges_to_exact(self):
        h = ham({"XZ": 0.45, "IX": 0.35, "ZZ": 0.2, "ZI": 0.15})
        u = build_U_series_exact(h, 0.3, 13)
        # tail at Gamma*dt = 0.24 beyond order 13 is ~1e-14
        np.testing.assert_allclose(u, exact_step_unitary(h, 0.3), atol=1e-11)

    def test_truncation_error_within_tail(self, rng):
        for _ in range(5):
            h = random_bounded_ham(rng, int(rng.integers(2, 4)))
            p = choose_params(0.04, 0.25, h)
            err = spectral_distance(
                build_U_series_exact(h, p.dt, p.Q), exact_step_unitary(h, p.dt)
            )
            assert err <= 2.0 * series_tail(h.gamma_total * p.dt, p.Q + 1)

    def test_budget_refusal(self):
        h = ham({"XI": 1.0, "IX": 1.0, "XX": 0.5})
        with pytest.raises(BudgetExceededError):
            build_U_series_exact(h, 0.1, 10, budget=100)


class TestBuildV:
    def test_q0_is_diagonal_evolution(self):
        h = ham({"Z": 0.5, "X": 0.3})
        v = build_V(h, (), KTuple((), 4), 0.8)
        np.testing.assert_allclose(
            v, np.diag(np.exp(-1j * 0.8 * np.array([0.5, -0.5]))), atol=1e-13
        )

    def test_q1_zero_diagonal(self):
        h = ham({"X": 0.3})
        v = build_V(h, (0,), KTuple((1,), 2), 0.8)
        np.testing.assert_allclose(v, -1j * np.array([[0, 1], [1, 0]]), atol=1e-14)

    def test_hand_evaluated_single_hop(self):
        # E = (0.5, -0.5); alpha = (1/2, 1/2); phases e^{-i(E_z+E_{z^1})/2} = 1
        h = ham({"Z": 0.5, "X": 0.3})
        v = build_V(h, (0,), KTuple((1,), 1), 1.0)
        np.testing.assert_allclose(v, -1j * np.array([[0, 1], [1, 0]]), atol=1e-14)

    def test_unitarity_random_branches(self, rng):
        h = random_bounded_ham(rng, 3)
        for _ in range(20):
            q = int(rng.integers(0, 4))
            iq = tuple(int(i) for i in rng.integers(0, h.m, size=q))
            K = int(rng.choice([1, 2, 4]))
            kt = KTuple(tuple(int(k) for k in rng.integers(1, K + 1, size=q)), K)
            v = build_V(h, iq, kt, 0.7)
            np.testing.assert_allclose(
                v.conj().T @ v, np.eye(1 << h.n), atol=1e-12
            )


class TestBuildUTilde:
    def test_pure_x_matches_truncated_taylor_exactly(self):
        om = 0.9
        h = ham({"X": om})
        p = choose_params(0.01, 1.2, h)
        u = build_U_tilde(h, p)
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        expect = sum(
            (-1j * om * p.dt) ** q / math.factorial(q) * np.linalg.matrix_power(x, q)
            for q in range(p.Q + 1)
        )
        np.testing.assert_allclose(u, expect, atol=1e-13)

    def test_q0_param_is_diagonal_evolution(self):
        h = ham({"Z": 1.1, "X": 0.4})
        p = SimParams(eps=0.5, t=0.3, r=1, dt=0.3, Q=0, K=2, kappa=1, mu=0.0)
        np.testing.assert_allclose(
            build_U_tilde(h, p),
            np.diag(np.exp(-1j * 0.3 * np.array([1.1, -1.1]))),
            atol=1e-13,
        )

    def test_step_error_within_budget(self, rng):
        for _ in range(5):
            h = random_bounded_ham(rng, int(rng.integers(2, 4)))
            p = choose_params(0.04, 0.3, h)
            err = spectral_distance(build_U_tilde(h, p), exact_step_unitary(h, p.dt))
            assert err <= p.eps / p.r

    def test_stacking_bound(self, rng):
        # || U_tilde - U_series_exact || <= (1/2)(dt dE / K)^2 with slack 2
        for _ in range(5):
            h = random_bounded_ham(rng, 2)
            p = choose_params(0.04, 0.3, h)
            gap = spectral_distance(
                build_U_tilde(h, p), build_U_series_exact(h, p.dt, p.Q)
            )
            assert gap <= 2.0 * 0.5 * (p.dt * h.delta_e / p.K) ** 2 + 1e-15

    def test_weighted_branch_sum_equals_u_tilde(self, rng):
        # dual route: sum of s * amp^2 * V over all branches
        for terms in ({"XZ": 0.4, "ZI": 0.3, "IX": 0.5},      # z-dependent
                      {"XI": 0.6, "IX": 0.3, "ZZ": 0.2}):     # constant diag
            h = ham(terms)
            p = SimParams(eps=0.1, t=0.4, r=1, dt=0.4, Q=2, K=2, kappa=1,
                          mu=h.delta_e / h.gamma_total)
            w = lcu_weights(h, p)
            dim = 1 << h.n
            acc = np.zeros((dim, dim), dtype=complex)
            for key, amp in w.amplitudes.items():
                q, iq, kq = key[0], key[1], key[2]
                pm = key[3] if w.zdep else None
                acc += w.s * amp**2 * build_V(h, iq, KTuple(kq, p.K), p.dt, pm)
            np.testing.assert_allclose(acc, build_U_tilde(h, p), atol=1e-11)

    def test_determinism(self, rng):
        h = random_bounded_ham(rng, 3)
        p = choose_params(0.05, 0.3, h)
        a = build_U_tilde(h, p)
        b = build_U_tilde(h, p)
        assert np.array_equal(a, b)

    def test_budget_refusal_names_count(self):
        h = ham({"XI": 1.0, "IX": 1.0})
        p = SimParams(eps=0.1, t=1.0, r=1, dt=1.0, Q=6, K=8, kappa=3, mu=0.0)
        with pytest.raises(BudgetExceededError):
            build_U_tilde(h, p, budget=1000)


class TestLcuWeights:
    def test_normalization_constant_values(self):
        assert normalization_constant(LN2, 6) == pytest.approx(1.9999833164100729)
        assert normalization_constant(LN2, 40) == pytest.approx(2.0)

    def test_two_term_amplitudes(self):
        h = ham({"X": 0.5})
        p = SimParams(eps=0.1, t=1.0, r=1, dt=1.0, Q=1, K=1, kappa=0, mu=0.0)
        w = lcu_weights(h, p)
        s = 1 + 0.5
        assert w.s == pytest.approx(s)
        assert w.amplitudes[(0, (), ())] == pytest.approx(math.sqrt(1 / s))
        assert w.amplitudes[(1, (0,), (1,))] == pytest.approx(math.sqrt(0.5 / s))

    def test_sum_of_squares_is_one(self, rng):
        for _ in range(5):
            h = random_bounded_ham(rng, 2)
            p = choose_params(0.2, 0.2, h)
            w = lcu_weights(h, p)
            assert sum(a * a for a in w.amplitudes.values()) == pytest.approx(
                1.0, abs=1e-12
            )
            assert w.s == pytest.approx(
                normalization_constant(h.gamma_total * p.dt, p.Q), abs=1e-12
            )

    def test_zdep_branch_doubling(self):
        h = ham({"XZ": 0.4, "ZI": 0.3})
        assert is_z_dependent(h)
        p = SimParams(eps=0.1, t=0.5, r=1, dt=0.5, Q=2, K=2, kappa=1, mu=1.0)
        w = lcu_weights(h, p)
        assert w.zdep
        q2_keys = [k for k in w.amplitudes if k[0] == 2]
        # M=1: K^2 * 2^2 = 16 branches at order 2
        assert len(q2_keys) == 16
        assert sum(a * a for a in w.amplitudes.values()) == pytest.approx(1.0)


class TestOaa:
    def tiny(self):
        h = ham({"X": 1.0, "Z": 0.05})
        dt = LN2 / h.gamma_total
        p = SimParams(eps=0.3, t=2 * dt, r=2, dt=dt, Q=2, K=2, kappa=1,
                      mu=h.delta_e / h.gamma_total)
        return h, p

    def test_reflection_semantics(self):
        h, p = self.tiny()
        W, A = build_oaa_operator(h, p)
        dim_s = 1 << h.n
        dim = W.shape[0]
        R = np.eye(dim, dtype=complex)
        R[:dim_s, :dim_s] -= 2 * np.eye(dim_s)
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        np.testing.assert_allclose(R @ v, -v, atol=0)
        v2 = np.zeros(dim, dtype=complex)
        v2[dim_s + 1] = 1.0
        np.testing.assert_allclose(R @ v2, v2, atol=0)

    def test_block_encoding_identity(self):
        h, p = self.tiny()
        W, _ = build_oaa_operator(h, p)
        dim_s = 1 << h.n
        u_tilde = build_U_tilde(h, p)
        s = normalization_constant(h.gamma_total * p.dt, p.Q)
        np.testing.assert_allclose(W[:dim_s, :dim_s], u_tilde / s, atol=1e-11)
        np.testing.assert_allclose(
            W.conj().T @ W, np.eye(W.shape[0]), atol=1e-11
        )

    def test_projected_amplified_output(self, rng):
        h, p = self.tiny()
        W, A = build_oaa_operator(h, p)
        dim_s = 1 << h.n
        u_tilde = build_U_tilde(h, p)
        s = normalization_constant(h.gamma_total * p.dt, p.Q)
        for _ in range(50):
            psi = rng.standard_normal(dim_s) + 1j * rng.standard_normal(dim_s)
            psi /= np.linalg.norm(psi)
            inp = np.zeros(A.shape[0], dtype=complex)
            inp[:dim_s] = psi
            out = (A @ inp)[:dim_s]
            assert np.linalg.norm(out - u_tilde @ psi) <= 5 * abs(s - 2)

    def test_zdep_block_encoding(self):
        # z-dependent hopping diagonal: D = 0.5 + 0.25 Z_1 on an X_0 hop
        h = ham({"XI": 0.5, "XZ": 0.25, "ZI": 0.1})
        assert is_z_dependent(h)
        dt = LN2 / h.gamma_total
        p = SimParams(eps=0.3, t=dt, r=1, dt=dt, Q=2, K=2, kappa=1,
                      mu=h.delta_e / h.gamma_total)
        W, _ = build_oaa_operator(h, p)
        dim_s = 1 << h.n
        u_tilde = build_U_tilde(h, p)
        s = normalization_constant(h.gamma_total * p.dt, p.Q)
        np.testing.assert_allclose(W[:dim_s, :dim_s], u_tilde / s, atol=1e-10)

    def test_refuses_large_joint_space(self):
        h = ham({"XIIII": 1.0, "IXIII": 1.0, "IIXII": 1.0})
        p = SimParams(eps=0.1, t=1.0, r=1, dt=0.3, Q=4, K=4, kappa=2, mu=0.0)
        with pytest.raises(Exception, match="limit|qubits"):
            build_oaa_operator(h, p)


class TestSimulate:
    def test_rabi_oscillation(self):
        om = 0.7
        h = ham({"X": om})
        t = 3.0 / om
        psi, report = simulate(h, np.array([1, 0], dtype=complex), 1e-3, t)
        expect = np.array([math.cos(om * t), -1j * math.sin(om * t)])
        assert np.linalg.norm(psi - expect) <= 1e-3
        assert report.accumulated_bound <= 1e-3

    def test_t_zero_identity(self):
        h = ham({"X": 1.0})
        psi0 = np.array([0.6, 0.8j])
        psi, report = simulate(h, psi0, 0.01, 0.0)
        assert np.array_equal(psi, psi0)

    def test_diagonal_hamiltonian_exact(self):
        h = ham({"ZZ": 0.8, "ZI": 0.3})
        rng = np.random.default_rng(3)
        psi0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi0 /= np.linalg.norm(psi0)
        t = 2.7
        psi, report = simulate(h, psi0, 0.5, t)
        expect = np.exp(-1j * t * h.energies()) * psi0
        assert np.linalg.norm(psi - expect) <= 1e-12
        assert report.params["r"] == 1

    def test_norm_drift_bounded(self, rng):
        h = random_bounded_ham(rng, 2)
        psi0 = np.zeros(4, dtype=complex)
        psi0[0] = 1.0
        psi, report = simulate(h, psi0, 0.01, 1.0)
        u_norm_dev = report.per_step_spectral_errors[0]
        assert abs(report.final_norm - 1.0) <= (u_norm_dev + 1e-12) * report.params["r"] * 2


class TestSpectralDistance:
    def test_equal(self):
        a = np.eye(4, dtype=complex)
        assert spectral_distance(a, a) == 0.0

    def test_uniform_phase(self):
        rng = np.random.default_rng(0)
        q, _ = np.linalg.qr(rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
        theta = 0.3
        assert spectral_distance(np.exp(1j * theta) * q, q) == pytest.approx(
            abs(np.exp(1j * theta) - 1), abs=1e-12
        )

    def test_power_iteration_matches_svd(self, rng):
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        b = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        dense = spectral_distance(a, b)
        power = spectral_distance(a, b, dense_dim_limit=4)
        assert power == pytest.approx(dense, abs=1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            spectral_distance(np.eye(2), np.eye(4))
