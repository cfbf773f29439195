"""Pauli-string Hamiltonians in bitmask form.

Conventions used throughout the package:

* Qubit p corresponds to bit p of a basis-state index z (qubit 0 is the
  least significant bit).  Character p of a Pauli string labels qubit p.
* Every Pauli string is normalized at ingestion to the canonical product
  ``coeff * X^a * Z^b`` with Y = i X Z applied per qubit, the i-phases
  absorbed into ``coeff``.  The matrix action is then
  ``|z> -> coeff * (-1)^popcount(b & z) |z XOR a>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DenseLimitError, NonHermitianError, ValidationError

DENSE_LIMIT = 12
PRUNE_TOL = 1e-14


@dataclass(frozen=True)
class PauliTerm:
    """One weighted Pauli string in (x_mask, z_mask) bit-pair form."""

    coeff: complex
    x_mask: int
    z_mask: int

    def pauli_string(self, n: int) -> str:
        """Recover the I/X/Y/Z character string (the absorbed Y-phase not included)."""
        table = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
        return "".join(
            table[((self.x_mask >> p) & 1, (self.z_mask >> p) & 1)] for p in range(n)
        )


class PauliHamiltonian:
    """Hermitian operator given as a merged list of weighted Pauli strings."""

    def __init__(self, n: int, terms: Iterable[PauliTerm], validate: bool = True,
                 dense_limit: int = DENSE_LIMIT):
        if n < 1:
            raise ValidationError(f"need at least one qubit, got n={n}")
        merged: dict[tuple[int, int], complex] = {}
        for t in terms:
            if not np.isfinite(t.coeff):
                raise ValidationError(f"non-finite coefficient in term {t}")
            if t.x_mask >> n or t.z_mask >> n:
                raise ValidationError(
                    f"term masks ({t.x_mask:b}, {t.z_mask:b}) do not fit in {n} bits"
                )
            key = (t.x_mask, t.z_mask)
            merged[key] = merged.get(key, 0.0) + complex(t.coeff)
        self.n = n
        self.terms = tuple(
            PauliTerm(c, x, z) for (x, z), c in sorted(merged.items()) if abs(c) > PRUNE_TOL
        )
        if validate:
            self._check_hermitian(dense_limit)

    def _check_hermitian(self, dense_limit: int) -> None:
        # X^a Z^b is Hermitian up to (-1)^popcount(a & b); since distinct
        # (a, b) strings are linearly independent the check is per-term.
        for t in self.terms:
            phase = -1 if bin(t.x_mask & t.z_mask).count("1") % 2 else 1
            if abs(t.coeff - phase * np.conj(t.coeff)) > 1e-12 * max(1.0, abs(t.coeff)):
                raise NonHermitianError(
                    f"term (x={t.x_mask:b}, z={t.z_mask:b}, coeff={t.coeff}) breaks "
                    f"Hermiticity: need coeff == {phase:+d} * conj(coeff)"
                )
        if self.n <= dense_limit:
            h = self.dense(dense_limit=dense_limit)
            if np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
                raise NonHermitianError("dense reconstruction is not Hermitian")

    @classmethod
    def from_strings(cls, terms: Mapping[str, complex], n: int | None = None,
                     validate: bool = True) -> "PauliHamiltonian":
        """Build from {'XIZ...': coeff} with Y normalized via Y = iXZ."""
        items = list(terms.items())
        if not items:
            raise ValidationError("empty term map")
        lengths = {len(s) for s, _ in items}
        if len(lengths) != 1:
            raise ValidationError(f"Pauli strings of unequal length: {sorted(lengths)}")
        n_str = lengths.pop()
        if n is not None and n != n_str:
            raise ValidationError(f"declared n={n} but strings have length {n_str}")
        out = []
        for s, c in items:
            x_mask = z_mask = 0
            phase = 1.0 + 0.0j
            for p, ch in enumerate(s.upper()):
                if ch == "I":
                    continue
                if ch == "X":
                    x_mask |= 1 << p
                elif ch == "Z":
                    z_mask |= 1 << p
                elif ch == "Y":
                    x_mask |= 1 << p
                    z_mask |= 1 << p
                    phase *= 1j
                else:
                    raise ValidationError(f"invalid Pauli character {ch!r} in {s!r}")
            out.append(PauliTerm(complex(c) * phase, x_mask, z_mask))
        return cls(n_str, out, validate=validate)

    def dense(self, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
        """Full 2^n x 2^n matrix; refuses above the dense limit."""
        if self.n > dense_limit:
            raise DenseLimitError(self.n, dense_limit, "Pauli dense reconstruction")
        dim = 1 << self.n
        z = np.arange(dim)
        h = np.zeros((dim, dim), dtype=complex)
        for t in self.terms:
            signs = parity_signs(t.z_mask, self.n)
            h[z ^ t.x_mask, z] += t.coeff * signs
        return h

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"PauliHamiltonian(n={self.n}, terms={len(self.terms)})"


def parity_signs(mask: int, n: int) -> np.ndarray:
    """(-1)^popcount(mask & z) for every basis index z, as a float array."""
    x = np.arange(1 << n, dtype=np.uint64) & np.uint64(mask)
    for shift in (32, 16, 8, 4, 2, 1):
        x ^= x >> np.uint64(shift)
    return 1.0 - 2.0 * (x & np.uint64(1)).astype(float)
