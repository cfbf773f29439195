"""Permutation-matrix-representation form of a qubit Hamiltonian.

The decomposition splits H into a diagonal part D0 plus a sum of terms
D_i P_i where P_i flips the bits in ``x_mask`` (a Pauli-X string) and D_i
is diagonal.  All types are immutable after construction and safe to share.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolationError, DenseLimitError, ValidationError
from .paulis import DENSE_LIMIT, PRUNE_TOL, PauliHamiltonian, parity_signs

ENUM_LIMIT = 20


@dataclass(frozen=True)
class DiagonalOperator:
    """Linear combination of Pauli-Z strings, stored as (z_mask, coeff) pairs."""

    n: int
    terms: tuple[tuple[int, complex], ...]

    def value(self, z: int) -> complex:
        """Exact evaluation at basis state z."""
        return sum(c * (1 - 2 * ((m & z).bit_count() % 2)) for m, c in self.terms)

    def values(self, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
        """Vector of values over all 2^n basis states."""
        if self.n > dense_limit:
            raise DenseLimitError(self.n, dense_limit, "diagonal expansion")
        out = np.zeros(1 << self.n, dtype=complex)
        for m, c in self.terms:
            out += c * parity_signs(m, self.n)
        return out

    @property
    def support(self) -> int:
        """OR of all z-masks: the qubits this diagonal actually depends on."""
        s = 0
        for m, _ in self.terms:
            s |= m
        return s

    def support_values(self, enum_limit: int = ENUM_LIMIT) -> np.ndarray | None:
        """All distinct values, enumerating only the support bits.

        Returns None when the support is too wide to enumerate.
        """
        bits = [p for p in range(self.n) if (self.support >> p) & 1]
        if len(bits) > enum_limit:
            return None
        pos = {p: i for i, p in enumerate(bits)}
        out = np.zeros(1 << len(bits), dtype=complex)
        for m, c in self.terms:
            small = 0
            for p in range(self.n):
                if (m >> p) & 1:
                    small |= 1 << pos[p]
            out += c * parity_signs(small, len(bits))
        return out

    def is_constant(self, tol: float = 1e-12) -> bool:
        return all(abs(c) <= tol for m, c in self.terms if m != 0)

    def constant_part(self) -> complex:
        return sum(c for m, c in self.terms if m == 0)

    def __bool__(self) -> bool:
        return bool(self.terms)


@dataclass(frozen=True)
class PmrTerm:
    """One off-diagonal PMR term: permutation ``x_mask`` with diagonal weight."""

    x_mask: int
    diag: DiagonalOperator
    gamma: float
    gamma_exact: bool = True

    def __post_init__(self):
        if self.x_mask == 0:
            raise ValidationError("PMR term with identity permutation; belongs in d0")
        if not self.gamma > 0:
            raise ValidationError(f"PMR term with nonpositive gamma {self.gamma}")


@dataclass(frozen=True)
class PmrHamiltonian:
    n: int
    d0: DiagonalOperator
    terms: tuple[PmrTerm, ...]
    gamma_total: float
    delta_e: float
    gamma_exact: bool
    delta_e_exact: bool

    @property
    def m(self) -> int:
        return len(self.terms)

    def energies(self, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
        """Real diagonal energies E_z over all basis states."""
        return self.d0.values(dense_limit).real


def _diag_from_groups(n: int, group: dict[int, complex]) -> DiagonalOperator:
    terms = tuple((m, c) for m, c in sorted(group.items()) if abs(c) > PRUNE_TOL)
    return DiagonalOperator(n, terms)


def diag_energy(d0: DiagonalOperator, z: int) -> float:
    """Diagonal energy <z|D0|z>; D0 is required to be real-valued."""
    if z >> d0.n:
        raise ValidationError(f"basis index {z} out of range for {d0.n} qubits")
    return complex(d0.value(z)).real


def _diag_gamma(diag: DiagonalOperator, enum_limit: int) -> tuple[float, bool]:
    vals = diag.support_values(enum_limit)
    if vals is None:
        return float(sum(abs(c) for _, c in diag.terms)), False
    return float(np.max(np.abs(vals))), True


def gamma_norms(h: PmrHamiltonian) -> tuple[list[float], float, bool]:
    """Per-term hopping norms and their sum, with an exactness flag."""
    gammas = [t.gamma for t in h.terms]
    return gammas, float(sum(gammas)), all(t.gamma_exact for t in h.terms)


def compute_delta_e(d0: DiagonalOperator, x_masks: Sequence[int],
                    enum_limit: int = ENUM_LIMIT) -> tuple[float, bool]:
    """Largest |E(z xor m) - E(z)| over all basis states and permutations.

    The difference under a hop m is -2 * sum over z-terms with odd overlap
    with m of J_k (-1)^(b_k . z), so only the support bits of those terms
    need enumerating.  When any support is too wide, falls back to the
    analytic bound 2 * sum |J_k| over terms overlapping any x_mask.
    """
    if not x_masks or not d0:
        return 0.0, True
    best = 0.0
    for m in x_masks:
        sub_terms = tuple(
            (bm, c) for bm, c in d0.terms if ((bm & m).bit_count() % 2) == 1
        )
        if not sub_terms:
            continue
        sub = DiagonalOperator(d0.n, sub_terms)
        vals = sub.support_values(enum_limit)
        if vals is None:
            overlap = sum(
                abs(c) for bm, c in d0.terms if any((bm & mm) for mm in x_masks)
            )
            return 2.0 * float(overlap), False
        best = max(best, 2.0 * float(np.max(np.abs(vals.real))))
    return best, True


def pmr_decompose(h: PauliHamiltonian, enum_limit: int = ENUM_LIMIT,
                  dense_limit: int = DENSE_LIMIT) -> PmrHamiltonian:
    """Group Pauli terms by X-mask into D0 + sum_i D_i P_i.

    A term c * X^a Z^b contributes c * (-1)^popcount(a & b) * Z^b to the
    diagonal D_a (the diagonal acts after the permutation, so the sign
    moves the Z-evaluation from z to z xor a).
    """
    groups: dict[int, dict[int, complex]] = {}
    for t in h.terms:
        sign = -1.0 if (t.x_mask & t.z_mask).bit_count() % 2 else 1.0
        g = groups.setdefault(t.x_mask, {})
        g[t.z_mask] = g.get(t.z_mask, 0.0) + t.coeff * sign
    d0 = _diag_from_groups(h.n, groups.pop(0, {}))
    imag_residue = max((abs(complex(c).imag) for _, c in d0.terms), default=0.0)
    if imag_residue > 1e-12:
        raise ValidationError(
            f"diagonal part D0 has complex residue {imag_residue:.3e}; "
            "diagonal energies must be real"
        )
    d0 = DiagonalOperator(h.n, tuple((m, complex(c.real)) for m, c in d0.terms))
    terms = []
    for x_mask in sorted(groups):
        diag = _diag_from_groups(h.n, groups[x_mask])
        if not diag.terms:
            continue  # vacuous term: zero diagonal everywhere
        gamma, exact = _diag_gamma(diag, enum_limit)
        if gamma <= PRUNE_TOL:
            continue
        terms.append(PmrTerm(x_mask, diag, gamma, exact))
    delta_e, de_exact = compute_delta_e(d0, [t.x_mask for t in terms], enum_limit)
    return PmrHamiltonian(
        n=h.n,
        d0=d0,
        terms=tuple(terms),
        gamma_total=float(sum(t.gamma for t in terms)),
        delta_e=delta_e,
        gamma_exact=all(t.gamma_exact for t in terms),
        delta_e_exact=de_exact,
    )


def pmr_reconstruct(h: PmrHamiltonian, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense D0 + sum_i D_i P_i with P_i |z> = |z xor x_mask>."""
    if h.n > dense_limit:
        raise DenseLimitError(h.n, dense_limit, "PMR dense reconstruction")
    dim = 1 << h.n
    out = np.zeros((dim, dim), dtype=complex)
    z = np.arange(dim)
    np.fill_diagonal(out, h.d0.values(dense_limit))
    for t in h.terms:
        vals = t.diag.values(dense_limit)
        rows = z ^ t.x_mask
        out[rows, z] += vals[rows]
    return out


def hop_phases(term: PmrTerm, z: int) -> tuple[float, float]:
    """Split d(z)/gamma into the average of two phases.

    Returns (theta, phi) with d(z)/gamma = (e^{i(theta+phi)} + e^{i(theta-phi)})/2,
    i.e. theta = arg d(z) and phi = arccos(|d(z)|/gamma).
    """
    if term.gamma <= 0:
        raise ContractViolationError("hop_phases on a term with gamma = 0; prune it")
    d = complex(term.diag.value(z))
    ratio = abs(d) / term.gamma
    if ratio > 1.0 + 1e-9:
        raise ContractViolationError(
            f"|diag(z)| = {abs(d)} exceeds gamma = {term.gamma} at z = {z}"
        )
    theta = cmath.phase(d) if d != 0 else 0.0
    phi = math.acos(min(1.0, ratio))
    return theta, phi
