"""Shared test oracles built independently of the package internals.

The dense Pauli constructions here go through explicit Kronecker products
so that package-side bitmask arithmetic is checked against a different
code path.
"""

from __future__ import annotations

import numpy as np
import pytest

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_pauli(string: str) -> np.ndarray:
    """Dense matrix of a Pauli string; char p acts on qubit p = index bit p.

    Basis index bit p is qubit p, so qubit 0 must be the *last* factor in
    the Kronecker product (numpy kron makes the first factor most
    significant).
    """
    out = np.array([[1.0 + 0.0j]])
    for ch in reversed(string):
        out = np.kron(out, PAULIS[ch])
    return out


def kron_hamiltonian(terms: dict[str, complex]) -> np.ndarray:
    n = len(next(iter(terms)))
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    for s, c in terms.items():
        h += complex(c) * kron_pauli(s)
    return h


def random_pauli_terms(rng: np.random.Generator, n: int, n_terms: int,
                       hermitian: bool = True) -> dict[str, complex]:
    """Random real-coefficient Pauli strings (real coefficients => Hermitian)."""
    terms: dict[str, complex] = {}
    while len(terms) < n_terms:
        s = "".join(rng.choice(list("IXYZ"), size=n))
        if s == "I" * n:
            continue
        coeff = complex(rng.uniform(-1.5, 1.5))
        if not hermitian:
            coeff += 1j * rng.uniform(-1.5, 1.5)
        terms[s] = coeff
    return terms


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)
