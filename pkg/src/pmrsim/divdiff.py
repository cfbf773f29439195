"""Divided differences of e^{-i tau x}: exact evaluation, phase-sum
approximants, and the machinery behind the per-input alpha weights.

Exact values come from the superdiagonal-of-matrix-exponential identity:
for the upper bidiagonal matrix T with the inputs on revealed diagonal and
ones above it, f(T)[0, q] is exactly f[x_0, ..., x_q].  scipy's expm
(scaling and squaring) evaluates f(T) stably for clustered or repeated
inputs, where the textbook ratio formula disintegrates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

import mpmath
import numpy as np
from scipy.linalg import expm

from .errors import BudgetExceededError, ValidationError

TERM_BUDGET = 10**7
SPAN_LIMIT = 1e4


@dataclass(frozen=True)
class DdInput:
    """Real inputs x_0..x_q (repeats allowed) and the time parameter tau."""

    inputs: tuple[float, ...]
    tau: float

    def __post_init__(self):
        if len(self.inputs) == 0:
            raise ValidationError("need at least one input value")
        if not all(math.isfinite(x) for x in self.inputs):
            raise ValidationError("non-finite divided-difference input")
        object.__setattr__(self, "inputs", tuple(float(x) for x in self.inputs))

    @property
    def q(self) -> int:
        return len(self.inputs) - 1


def dd_exp_exact(din: DdInput, span_limit: float = SPAN_LIMIT) -> complex:
    """e^{-i tau [x_0, ..., x_q]} via the bidiagonal exponential."""
    return complex(dd_exp_exact_stack(np.array([din.inputs]), din.tau, span_limit)[0])


def dd_exp_exact_stack(xs: np.ndarray, tau: float,
                       span_limit: float = SPAN_LIMIT) -> np.ndarray:
    """Vectorized exact divided differences, one per row of ``xs``.

    The inputs are shifted by their row mean before exponentiation; the
    scalar phase e^{-i tau mean} multiplies back on, which keeps the matrix
    argument small for energy walks with a large common offset.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise ValidationError("expected a (batch, q+1) array of inputs")
    q = xs.shape[1] - 1
    span = float(np.max(xs, axis=1).max() - np.min(xs, axis=1).min()) if xs.size else 0.0
    if abs(tau) * span > span_limit:
        raise ValidationError(
            f"|tau|*span = {abs(tau) * span:.3e} exceeds the configured "
            f"evaluation range {span_limit:.3e}"
        )
    means = xs.mean(axis=1)
    if q == 0:
        return np.exp(-1j * tau * means)
    shifted = xs - means[:, None]
    mats = np.zeros(xs.shape[:1] + (q + 1, q + 1), dtype=complex)
    idx = np.arange(q + 1)
    mats[:, idx, idx] = -1j * tau * shifted
    mats[:, idx[:-1], idx[:-1] + 1] = -1j * tau
    # expm of -i tau T has (0, q) entry equal to (-i tau)^q ... folded in by
    # scaling the superdiagonal, so the entry is directly the divided
    # difference of e^{-i tau x} (chain rule on f(x) = g(-i tau x)).
    ex = expm(mats)
    return np.exp(-1j * tau * means) * ex[:, 0, q]


def dd_exp_ratio_form(din: DdInput) -> complex:
    """Textbook ratio formula; only trustworthy for well-separated inputs."""
    xs = din.inputs
    acc = 0.0 + 0.0j
    for j, xj in enumerate(xs):
        denom = 1.0
        for k, xk in enumerate(xs):
            if k != j:
                denom *= xj - xk
        if denom == 0.0:
            raise ValidationError("repeated inputs: ratio form is undefined")
        acc += np.exp(-1j * din.tau * xj) / denom
    return complex(acc)


def dd_exp_oracle(din: DdInput, digits: int = 25) -> complex:
    """High-precision independent evaluation via the Taylor form.

    Uses f[x_0..x_q] = sum_m f^(q+m)(0)/(q+m)! * h_m(x_0..x_q) where h_m is
    the complete homogeneous symmetric polynomial (the monomial sums of the
    power identity for [x_0..x_q]^{q+n}).
    """
    if din.q > 12:
        raise ValidationError(f"oracle limited to q <= 12, got q = {din.q}")
    with mpmath.workdps(digits + 15):
        xs = [mpmath.mpf(x) for x in din.inputs]
        mit = -1j * mpmath.mpf(din.tau)
        q = din.q
        # Complete homogeneous symmetric sums h_m grow one degree per term
        # via Newton's identity m h_m = sum_k p_k h_{m-k} (power sums p_k).
        h = [mpmath.mpf(1)]
        pows = list(xs)
        psums: list = []
        acc = mpmath.mpc(0)
        coeff = mit**q / mpmath.factorial(q)
        stop = mpmath.mpf(10) ** (-(digits + 8))
        quiet = 0
        for m in range(5001):
            term = coeff * h[m]
            acc += term
            if abs(term) < stop * max(1, abs(acc)):
                quiet += 1
                if quiet >= 4:
                    return complex(acc)
            else:
                quiet = 0
            psums.append(mpmath.fsum(pows))
            pows = [p * x for p, x in zip(pows, xs)]
            h.append(
                mpmath.fsum(psums[k] * h[m - k] for k in range(m + 1)) / (m + 1)
            )
            coeff *= mit / (q + m + 1)
        raise ValidationError("oracle series failed to settle")


def mean_phase_approx(din: DdInput) -> complex:
    """((-i tau)^q / q!) e^{-i tau mean(x)}: the single-block phase form."""
    q = din.q
    mean = sum(din.inputs) / (q + 1)
    return ((-1j * din.tau) ** q / math.factorial(q)) * np.exp(-1j * din.tau * mean)


def _composition_count(q: int, K: int) -> int:
    return math.comb(q + K - 1, K - 1)


def leibniz_kfold_split(din: DdInput, K: int, budget: int = TERM_BUDGET) -> complex:
    """K-fold split of the divided difference via the Leibniz rule.

    Sums over non-decreasing split points 0 <= j_1 <= ... <= j_{K-1} <= q the
    product of exact sub-divided-differences at tau/K; equal to
    dd_exp_exact for every K >= 1.
    """
    if K < 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    q = din.q
    count = _composition_count(q, K)
    if count > budget:
        raise BudgetExceededError(count, budget, "Leibniz split sum")
    if K == 1:
        return dd_exp_exact(din)
    tau_k = din.tau / K
    xs = din.inputs
    acc = 0.0 + 0.0j
    for bars in combinations(range(q + K - 1), K - 1):
        cuts = [b - i for i, b in enumerate(bars)]  # non-decreasing in [0, q]
        bounds = [0, *cuts, q]
        prod = 1.0 + 0.0j
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            prod *= dd_exp_exact(DdInput(xs[lo : hi + 1], tau_k))
        acc += prod
    return acc


def ehat_partition(din: DdInput, K: int, budget: int = TERM_BUDGET) -> complex:
    """The ordered-partition form of the ê_K approximant.

    Each block of the composition is replaced by a phase at its mean (blocks
    share endpoints), weighted by the inverse factorials of the block
    occupations.
    """
    if K < 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    q = din.q
    count = _composition_count(q, K)
    if count > budget:
        raise BudgetExceededError(count, budget, "partition sum")
    delta = din.tau / K
    xs = np.asarray(din.inputs)
    prefix = np.concatenate([[0.0], np.cumsum(xs)])
    acc = 0.0 + 0.0j
    for bars in combinations(range(q + K - 1), K - 1):
        cuts = [b - i for i, b in enumerate(bars)]
        bounds = [0, *cuts, q]
        phase = 0.0
        weight = 1.0
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            phase += (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1)
            weight *= math.factorial(hi - lo)
        acc += np.exp(-1j * delta * phase) / weight
    return complex((-1j * delta) ** q * acc)


@dataclass(frozen=True)
class KTuple:
    """Ordered subdivision indices k_1..k_q, each in [1, K], K a power of two."""

    k: tuple[int, ...]
    K: int

    def __post_init__(self):
        if self.K < 1 or (self.K & (self.K - 1)) != 0:
            raise ValidationError(f"K must be a positive power of two, got {self.K}")
        if not all(1 <= km <= self.K for km in self.k):
            raise ValidationError(f"k indices must lie in [1, {self.K}]: {self.k}")

    @property
    def q(self) -> int:
        return len(self.k)

    def occupations(self) -> tuple[int, ...]:
        """j_l = number of indices equal to l, for l = 1..K."""
        occ = [0] * self.K
        for km in self.k:
            occ[km - 1] += 1
        return tuple(occ)


@dataclass(frozen=True)
class AlphaWorkspace:
    """Partial sums, membership weights, and block indices for one KTuple."""

    sigma: tuple[int, ...]          # Sigma_0 .. Sigma_K
    alpha: tuple[Fraction, ...]     # alpha_0 .. alpha_q, exact rationals
    lmin: tuple[int, ...]           # per s: min l with s in [Sigma_l, Sigma_{l+1}]
    lmax: tuple[int, ...]           # per s: max l with s in [Sigma_{l-1}, Sigma_l]
    alpha_minmax: tuple[Fraction, ...]  # the literal min/max-form values
    minmax_agrees: bool             # diagnostic: min/max form matched everywhere


def alpha_coeffs(kt: KTuple) -> AlphaWorkspace:
    """Per-input weights alpha_s from the block-membership sum.

    The membership sum (each block [Sigma_{l-1}, Sigma_l] containing s
    contributes 1/(block size + 1)) is normative.  The min/max shortcut is
    evaluated alongside purely as a diagnostic: its -2 correction term
    over-counts when a single block contains s, so disagreement there is
    expected and flagged, not fatal.
    """
    occ = kt.occupations()
    sigma = [0]
    for j in occ:
        sigma.append(sigma[-1] + j)
    q = kt.q
    alphas, lmins, lmaxs, shortcut = [], [], [], []
    for s in range(q + 1):
        a = Fraction(0)
        for ell in range(1, kt.K + 1):
            if sigma[ell - 1] <= s <= sigma[ell]:
                a += Fraction(1, sigma[ell] - sigma[ell - 1] + 1)
        alphas.append(a)
        lmin = min(
            ell for ell in range(kt.K) if sigma[ell] <= s <= sigma[ell + 1]
        )
        lmax = max(
            ell for ell in range(1, kt.K + 1) if sigma[ell - 1] <= s <= sigma[ell]
        )
        lmins.append(lmin)
        lmaxs.append(lmax)
        mm = (
            Fraction(1, sigma[lmin + 1] - sigma[lmin] + 1)
            + Fraction(1, sigma[lmax] - sigma[lmax - 1] + 1)
            + (lmax - lmin - 2)
        )
        shortcut.append(mm)
    return AlphaWorkspace(
        sigma=tuple(sigma),
        alpha=tuple(alphas),
        lmin=tuple(lmins),
        lmax=tuple(lmaxs),
        alpha_minmax=tuple(shortcut),
        minmax_agrees=all(a == b for a, b in zip(alphas, shortcut)),
    )


def ehat_ktuple(din: DdInput, K: int, budget: int = TERM_BUDGET) -> complex:
    """ê_K as the flat sum over all K^q ordered index tuples.

    Exactly equal to ehat_partition: regrouping the tuples by occupation
    recovers the multinomial weights.
    """
    q = din.q
    count = K**q
    if count > budget:
        raise BudgetExceededError(count, budget, "k-tuple sum")
    delta = din.tau / K
    xs = din.inputs
    acc = 0.0 + 0.0j
    for k in product(range(1, K + 1), repeat=q):
        ws = alpha_coeffs(KTuple(k, K))
        phase = sum(float(a) * x for a, x in zip(ws.alpha, xs))
        acc += np.exp(-1j * delta * phase)
    return complex((-1j * delta) ** q / math.factorial(q) * acc)


def dd_error_bound(q: int, dt: float, de: float, K: int) -> float:
    """(dt^q / q!) * (dt * de / (2K))^2: the approximation error budget."""
    return (dt**q / math.factorial(q)) * (dt * de / (2 * K)) ** 2


def worst_case_closed_forms(q: int, dt: float, de: float,
                            K: int) -> tuple[complex, complex, float]:
    """Closed forms at the maximizing equally spaced inputs 0, de, ..., q*de.

    Returns (exact divided difference, ê_K, exact/ê_K ratio).  The ratio is
    (sin th / th)^q with th = dt*de/(2K); doubling K divides the defect
    1 - ratio by about four.
    """
    if not de > 0:
        raise ValidationError("worst-case forms need de > 0")
    half = dt * de / 2.0
    base = (-2j * np.exp(-1j * half) / de) * math.sin(half)
    exact = base**q / math.factorial(q)
    th = half / K
    ehat_base = (-2j * dt * np.exp(-1j * half) / (2 * K * math.sin(th))) * math.sin(half)
    ehat = ehat_base**q / math.factorial(q)
    ratio = (math.sin(th) / th) ** q if th != 0 else 1.0
    return complex(exact), complex(ehat), float(ratio)
