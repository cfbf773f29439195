"""Classical reference semantics for the select network's alpha machinery.

Both the dense controlled-unitary builder and the compiled reversible
circuits answer to the functions here, so the two agree on every ancilla
basis state, including patterns outside the valid unary/one-hot encodings.

Register conventions: the Q subdivision registers store k_m - 1 (0-based,
kappa bits each); ``active[m]`` mirrors bit m of the unary order register;
the repetition index s is a classical constant per repetition.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


def sigma_prefix_count(k_values: Sequence[int], active: Sequence[bool], c: int) -> int:
    """G(c): how many active registers store a value <= c (G(-1) = 0)."""
    if c < 0:
        return 0
    return sum(1 for v, a in zip(k_values, active) if a and v <= c)


def alpha_membership(k_values: Sequence[int], active: Sequence[bool], s: int,
                     K: int) -> Fraction:
    """The normative block-membership weight for input position s.

    Blocks are the closed index ranges [Sigma_{l-1}, Sigma_l] of the
    occupation partial sums over active registers; each block containing s
    contributes the reciprocal of its size + 1.  Zero when s exceeds the
    active count (no containing block).
    """
    occ = [0] * K
    for v, a in zip(k_values, active):
        if a:
            occ[v] += 1
    total = Fraction(0)
    sigma = 0
    for j in occ:
        lo, hi = sigma, sigma + j
        if lo <= s <= hi:
            total += Fraction(1, j + 1)
        sigma = hi
    return total


@dataclass(frozen=True)
class AlphaUnitOut:
    """Register contents the reversible alpha unit leaves before uncompute."""

    first_block: int   # 0-based index of the first block containing s (mod K)
    last_block: int    # 0-based index of the last block containing s
    count_first: int   # occupation of the first block
    count_last: int    # occupation of the last block
    equal: bool        # single containing block
    overflow: bool     # s exceeds the active count: no containing block

    def alpha(self) -> Fraction:
        """Reconstruct alpha_s from the register contents."""
        if self.overflow:
            return Fraction(0)
        if self.equal:
            return Fraction(1, self.count_first + 1)
        return (
            Fraction(1, self.count_first + 1)
            + Fraction(1, self.count_last + 1)
            + (self.last_block - self.first_block - 1)
        )


def alpha_unit_outputs(k_values: Sequence[int], active: Sequence[bool], s: int,
                       K: int) -> AlphaUnitOut:
    """Mirror of the reversible unit: two greedy searches plus count passes.

    The searches run most-significant-bit first exactly as the circuit does,
    so wrap-around on overflow matches the kappa-bit registers.
    """
    def g(c: int) -> int:
        return sigma_prefix_count(k_values, active, c)

    # first containing block: max{c: G(c) <= s-1}, then +1 if G(0) <= s-1
    x = 0
    bit = K >> 1
    while bit:
        c = x | bit
        if c <= K - 1 and g(c) <= s - 1:
            x = c
        bit >>= 1
    p0 = 1 if g(0) <= s - 1 else 0
    first = (x + p0) % K
    # last containing block: max{u: G(u-1) <= s} (u = 0 predicate always true)
    u = 0
    bit = K >> 1
    while bit:
        c = u | bit
        if c <= K - 1 and g(c - 1) <= s:
            u = c
        bit >>= 1
    count_first = sum(1 for v, a in zip(k_values, active) if a and v == first)
    count_last = sum(1 for v, a in zip(k_values, active) if a and v == u)
    overflow = g(K - 1) <= s - 1
    return AlphaUnitOut(
        first_block=first,
        last_block=u,
        count_first=count_first,
        count_last=count_last,
        equal=first == u,
        overflow=overflow,
    )
