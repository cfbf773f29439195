"""Divided-difference machinery against hand values and independent oracles.

The test-side oracle evaluates the recursive difference table in 60-digit
mpmath arithmetic with tiny symbolic separations for repeated inputs; the
package never uses this path, so agreement is meaningful.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from itertools import product

import mpmath
import numpy as np
import pytest

from pmrsim.divdiff import (
    AlphaWorkspace,
    DdInput,
    KTuple,
    alpha_coeffs,
    dd_error_bound,
    dd_exp_exact,
    dd_exp_oracle,
    dd_exp_ratio_form,
    ehat_ktuple,
    ehat_partition,
    leibniz_kfold_split,
    mean_phase_approx,
    worst_case_closed_forms,
)
from pmrsim.errors import BudgetExceededError, ValidationError


def table_oracle(xs, tau, dps=60):
    """Recursive divided-difference table in high precision.

    Repeated values are separated by 10^-(dps/2), which perturbs the result
    by O(separation); at dps=60 that is far below double precision.
    """
    with mpmath.workdps(dps):
        eps = mpmath.mpf(10) ** (-dps // 2)
        seen = {}
        sep = []
        for x in xs:
            k = seen.get(x, 0)
            seen[x] = k + 1
            sep.append(mpmath.mpf(x) + k * eps)
        f = [mpmath.e ** (-1j * mpmath.mpf(tau) * x) for x in sep]
        n = len(f)
        for j in range(1, n):
            for i in range(n - j):
                f[i] = (f[i + 1] - f[i]) / (sep[i + j] - sep[i])
            f = f[: n - j]
        return complex(f[0])


class TestExact:
    def test_q0_is_plain_exponential(self):
        assert dd_exp_exact(DdInput((1.5,), 2.0)) == pytest.approx(cmath.exp(-3j))

    def test_triple_zero_is_second_derivative_over_2(self):
        # f''(0)/2! with f = e^{-i x}: (-i)^2/2 = -0.5
        assert dd_exp_exact(DdInput((0.0, 0.0, 0.0), 1.0)) == pytest.approx(-0.5)

    def test_two_point_definition(self):
        val = dd_exp_exact(DdInput((0.0, 1.0), 1.0))
        assert val == pytest.approx(cmath.exp(-1j) - 1.0)
        assert val == pytest.approx(-0.45969769413186 - 0.84147098480790j, abs=1e-11)

    def test_agrees_with_ratio_form_when_separated(self):
        xs = (0.3, -1.1, 2.0, 0.9)
        exact = dd_exp_exact(DdInput(xs, 1.3))
        assert exact == pytest.approx(dd_exp_ratio_form(DdInput(xs, 1.3)), abs=1e-11)

    def test_clustered_inputs_match_table_oracle(self):
        xs = (0.5, 0.5 + 1e-9, 0.5 + 2e-9, 0.5000001)
        exact = dd_exp_exact(DdInput(xs, 1.7))
        assert exact == pytest.approx(table_oracle(xs, 1.7), abs=1e-12)

    def test_span_guard(self):
        with pytest.raises(ValidationError, match="range"):
            dd_exp_exact(DdInput((0.0, 1e6), 1.0), span_limit=1e4)

    @pytest.mark.parametrize("seed", range(20))
    def test_random_against_table_oracle(self, seed):
        rng = np.random.default_rng(seed)
        q = int(rng.integers(1, 9))
        xs = tuple(rng.uniform(-2, 2, size=q + 1))
        tau = float(rng.uniform(0.1, 2))
        exact = dd_exp_exact(DdInput(xs, tau))
        assert abs(exact - table_oracle(xs, tau)) < 1e-12


class TestOracle:
    def test_single_zero(self):
        assert dd_exp_oracle(DdInput((0.0,), 1.0)) == pytest.approx(1.0)

    def test_repeated_pair_is_derivative(self):
        # f'(2)/1! with f = e^{-i x}: -i e^{-2i}
        val = dd_exp_oracle(DdInput((2.0, 2.0), 1.0))
        assert val == pytest.approx(-1j * cmath.exp(-2j), abs=1e-13)

    def test_cross_agreement_with_exact(self):
        val_o = dd_exp_oracle(DdInput((0.0, 1.0), 1.0))
        val_e = dd_exp_exact(DdInput((0.0, 1.0), 1.0))
        assert abs(val_o - val_e) < 1e-12

    def test_1000_random_cross_agreements(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            q = int(rng.integers(0, 9))
            xs = tuple(rng.uniform(-2, 2, size=q + 1))
            tau = float(rng.uniform(0.1, 2))
            din = DdInput(xs, tau)
            worst = max(worst, abs(dd_exp_exact(din) - dd_exp_oracle(din, digits=20)))
        assert worst <= 1e-11


class TestLeibnizSplit:
    def test_k1_identity(self):
        din = DdInput((0.2, -0.4, 1.1), 0.9)
        assert leibniz_kfold_split(din, 1) == dd_exp_exact(din)

    def test_two_point_k2(self):
        din = DdInput((0.0, 1.0), 1.0)
        assert leibniz_kfold_split(din, 2) == pytest.approx(cmath.exp(-1j) - 1, abs=1e-12)

    def test_three_point_k4(self):
        din = DdInput((0.0, 0.5, 1.2), 0.7)
        assert leibniz_kfold_split(din, 4) == pytest.approx(dd_exp_exact(din), abs=1e-11)

    def test_budget_refusal(self):
        with pytest.raises(BudgetExceededError, match="terms"):
            leibniz_kfold_split(DdInput(tuple(range(30)), 0.01), 30, budget=1000)

    @pytest.mark.parametrize("K", [1, 2, 4])
    def test_split_exactness_random(self, K, rng):
        for _ in range(30):
            q = int(rng.integers(0, 7))
            xs = tuple(rng.uniform(-2, 2, size=q + 1))
            tau = float(rng.uniform(0.1, 2))
            din = DdInput(xs, tau)
            exact = dd_exp_exact(din)
            assert abs(leibniz_kfold_split(din, K) - exact) <= 1e-10 * max(1e-30, abs(exact))


class TestMeanPhase:
    def test_q0_exact(self):
        assert mean_phase_approx(DdInput((0.7,), 1.3)) == pytest.approx(cmath.exp(-0.91j))

    def test_zero_variance_exact(self):
        for q in range(5):
            din = DdInput((0.0,) * (q + 1), 1.0)
            assert mean_phase_approx(din) == pytest.approx(dd_exp_exact(din), abs=1e-14)

    def test_small_tau_error_bound(self):
        din = DdInput((0.0, 1.0), 0.1)
        approx = mean_phase_approx(din)
        assert approx == pytest.approx(-0.1j * cmath.exp(-0.05j))
        err = abs(approx - dd_exp_exact(din))
        assert err <= (0.1 * 1 / 2) ** 2 * 0.1 / math.factorial(1)


class TestAlphaCoeffs:
    def test_split_tuple(self):
        ws = alpha_coeffs(KTuple((1, 2), 2))
        assert ws.sigma == (0, 1, 2)
        assert ws.alpha == (Fraction(1, 2), Fraction(1, 1), Fraction(1, 2))

    def test_stacked_tuple(self):
        ws = alpha_coeffs(KTuple((1, 1), 2))
        assert ws.alpha == (Fraction(1, 3), Fraction(1, 3), Fraction(4, 3))

    def test_q0_any_K(self):
        for K in (1, 2, 4, 8):
            ws = alpha_coeffs(KTuple((), K))
            assert ws.alpha == (Fraction(K),)

    def test_weight_conservation_exhaustive(self):
        for K in (1, 2, 4):
            for q in range(5):
                for k in product(range(1, K + 1), repeat=q):
                    ws = alpha_coeffs(KTuple(k, K))
                    assert sum(ws.alpha) == K
                    assert all(a > 0 for a in ws.alpha)

    def test_minmax_shortcut_diagnostic(self):
        # The literal min/max shortcut matches the membership sum only when
        # s is shared by at least two blocks; single-block s over-counts.
        ws = alpha_coeffs(KTuple((1, 1), 2))
        assert not ws.minmax_agrees
        assert ws.alpha_minmax[1] != ws.alpha[1]
        ws2 = alpha_coeffs(KTuple((1, 2), 2))
        assert ws2.alpha_minmax[1] == ws2.alpha[1]  # s=1 sits on the block seam
        assert ws2.alpha_minmax[0] != ws2.alpha[0]  # s=0 is single-block
        # q=0: every s is in all K blocks, so the shortcut is exact
        assert alpha_coeffs(KTuple((), 4)).minmax_agrees

    def test_phase_product_identity_exhaustive(self, rng):
        # product of block-mean phases == product of alpha-weighted phases
        for K in (2, 4):
            for q in range(1, 5):
                xs = rng.uniform(-2, 2, size=q + 1)
                delta = 0.37
                for k in product(range(1, K + 1), repeat=q):
                    ws = alpha_coeffs(KTuple(k, K))
                    lhs = 1.0 + 0.0j
                    for ell in range(1, K + 1):
                        lo, hi = ws.sigma[ell - 1], ws.sigma[ell]
                        mean = xs[lo : hi + 1].mean()
                        lhs *= cmath.exp(-1j * delta * mean)
                    rhs = cmath.exp(
                        -1j * delta * sum(float(a) * x for a, x in zip(ws.alpha, xs))
                    )
                    assert abs(lhs - rhs) < 1e-13


class TestEhatForms:
    def test_partition_q0(self):
        assert ehat_partition(DdInput((0.4,), 1.1), 4) == pytest.approx(
            cmath.exp(-1j * 0.44)
        )

    def test_partition_constant_inputs(self):
        q, c, tau, K = 3, 0.8, 1.2, 4
        val = ehat_partition(DdInput((c,) * (q + 1), tau), K)
        expected = ((-1j * tau) ** q / math.factorial(q)) * cmath.exp(-1j * tau * c)
        assert val == pytest.approx(expected, abs=1e-14)

    def test_ktuple_k1_two_point(self):
        # single tuple, alpha = (1/2, 1/2): -i e^{-i/2}
        val = ehat_ktuple(DdInput((0.0, 1.0), 1.0), 1)
        assert val == pytest.approx(-1j * cmath.exp(-0.5j), abs=1e-14)

    def test_ktuple_q0(self):
        assert ehat_ktuple(DdInput((0.3,), 0.9), 2) == pytest.approx(
            cmath.exp(-1j * 0.27)
        )

    @pytest.mark.parametrize("K", [2, 4])
    def test_form_equivalence_exhaustive(self, K, rng):
        for q in range(5):
            xs = tuple(rng.uniform(-2, 2, size=q + 1))
            tau = float(rng.uniform(0.1, 2))
            din = DdInput(xs, tau)
            a = ehat_partition(din, K)
            b = ehat_ktuple(din, K)
            assert abs(a - b) < 1e-13

    def test_budget_refusals_name_the_count(self):
        with pytest.raises(BudgetExceededError, match="1024"):
            ehat_ktuple(DdInput((0.0,) * 11, 1.0), 2, budget=1000)

    def test_magnitude_cap(self, rng):
        # |ehat| <= dt^q / q! on every instance
        for _ in range(50):
            q = int(rng.integers(0, 6))
            K = int(rng.choice([1, 2, 4]))
            xs = tuple(rng.uniform(-2, 2, size=q + 1))
            tau = float(rng.uniform(0.1, 2))
            val = ehat_partition(DdInput(xs, tau), K)
            assert abs(val) <= tau**q / math.factorial(q) + 1e-12


class TestBoundAndWorstCase:
    def test_zero_gap(self):
        assert dd_error_bound(3, 1.0, 0.0, 2) == 0.0

    def test_hand_value(self):
        assert dd_error_bound(1, 1.0, 1.0, 2) == pytest.approx(0.0625)

    def test_k_doubling_quarters_the_bound(self):
        assert dd_error_bound(2, 0.7, 1.3, 4) == pytest.approx(
            dd_error_bound(2, 0.7, 1.3, 2) / 4
        )

    def test_sinc_ratio(self):
        _, _, ratio = worst_case_closed_forms(1, 1.0, 1.0, 1)
        assert ratio == pytest.approx(math.sin(0.5) / 0.5)
        assert ratio == pytest.approx(0.958851, abs=1e-6)

    def test_exact_modulus(self):
        exact, _, _ = worst_case_closed_forms(1, 1.0, 1.0, 1)
        assert abs(exact) == pytest.approx(2 * math.sin(0.5))

    def test_ratio_tends_to_one(self):
        _, _, ratio = worst_case_closed_forms(3, 1.0, 1.0, 1 << 20)
        assert ratio == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("q,K", [(1, 1), (2, 2), (3, 4), (4, 2), (5, 8)])
    def test_closed_forms_match_direct_computation(self, q, K):
        dt, de = 0.8, 1.1
        exact_cf, ehat_cf, ratio = worst_case_closed_forms(q, dt, de, K)
        xs = tuple(j * de for j in range(q + 1))
        assert abs(exact_cf - dd_exp_exact(DdInput(xs, dt))) < 1e-12
        assert abs(ehat_cf - ehat_partition(DdInput(xs, dt), K)) < 1e-12
        assert exact_cf / ehat_cf == pytest.approx(ratio, abs=1e-12)

    def test_bound_validity_random(self, rng):
        # |exact - ehat| <= bound for consecutive-gap-limited inputs, q <= 6
        worst_ratio = 0.0
        for _ in range(200):
            q = int(rng.integers(1, 7))
            K = int(rng.choice([1, 2, 4]))
            de = float(rng.uniform(0.3, 1.5))
            dt = float(rng.uniform(0.2, 1.2))
            steps = rng.uniform(-de, de, size=q)
            xs = tuple(np.concatenate([[0.0], np.cumsum(steps)]))
            din = DdInput(xs, dt)
            err = abs(dd_exp_exact(din) - ehat_partition(din, K))
            bound = dd_error_bound(q, dt, de, K)
            assert err <= bound * (1 + 1e-9)
            if bound > 0:
                worst_ratio = max(worst_ratio, err / bound)
        assert worst_ratio <= 1.0 + 1e-9

    def test_worst_case_dominance(self, rng):
        # random gap-limited instances never beat the equally spaced error
        for _ in range(300):
            q = int(rng.integers(1, 7))
            K = int(rng.choice([1, 2, 4]))
            de = float(rng.uniform(0.3, 1.5))
            dt = float(rng.uniform(0.2, 1.2))
            steps = rng.uniform(-de, de, size=q)
            xs = tuple(np.concatenate([[0.0], np.cumsum(steps)]))
            din = DdInput(xs, dt)
            err = abs(dd_exp_exact(din) - ehat_partition(din, K))
            exact_cf, ehat_cf, _ = worst_case_closed_forms(q, dt, de, K)
            assert err <= abs(exact_cf - ehat_cf) * (1 + 1e-9)
