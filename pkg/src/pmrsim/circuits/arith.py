"""Reversible arithmetic building blocks: controlled flips, ripple
increments, constant loads, and a clean-ancilla comparator network.

Everything here emits only X / CNOT / MCX gates, so any block can be
inverted by reversing its gate list.
"""

from __future__ import annotations

from .ir import Gate


def flip(target: int, controls: tuple[int, ...] = ()) -> Gate:
    """X on target conditioned on all control bits."""
    if not controls:
        return Gate("X", (target,))
    if len(controls) == 1:
        return Gate("CNOT", (target,), controls)
    return Gate("MCX", (target,), tuple(controls))


def increment_gates(reg_bits, ctrl: int | None = None) -> list[Gate]:
    """+1 mod 2^w on the register, optionally conditioned on one bit.

    Emitted most-significant-bit first so lower carries are still intact
    when each flip fires; the reversed list is the decrement.
    """
    pre = (ctrl,) if ctrl is not None else ()
    bits = tuple(reg_bits)
    out = []
    for i in range(len(bits) - 1, 0, -1):
        out.append(flip(bits[i], (*pre, *bits[:i])))
    out.append(flip(bits[0], pre))
    return out


def decrement_gates(reg_bits, ctrl: int | None = None) -> list[Gate]:
    return list(reversed(increment_gates(reg_bits, ctrl)))


def load_const_gates(reg_bits, value: int) -> list[Gate]:
    """X the bits of ``value`` into a zeroed register (self-inverse)."""
    bits = tuple(reg_bits)
    if value < 0 or value >> len(bits):
        raise ValueError(f"constant {value} does not fit in {len(bits)} bits")
    return [Gate("X", (b,)) for i, b in enumerate(bits) if (value >> i) & 1]


def comparator_leq_gates(a_bits, b_bits, out: int, xor_scratch, eq_scratch) -> list[Gate]:
    """out ^= (a <= b) from X/CNOT/MCX only, restoring all scratch.

    Needs w scratch bits for the XOR column and w-1 for the equality-prefix
    chain (w the common register width).  Computes a > b by scanning from
    the most significant bit with prefix-equality conditioning, then flips.
    """
    a = tuple(a_bits)
    b = tuple(b_bits)
    if len(a) != len(b):
        raise ValueError("comparator operands must have equal width")
    w = len(a)
    s = tuple(xor_scratch)
    e = tuple(eq_scratch)
    if len(s) < w or len(e) < max(0, w - 1):
        raise ValueError("insufficient comparator scratch")
    fwd: list[Gate] = []
    for i in range(w):
        fwd.append(Gate("CNOT", (s[i],), (a[i],)))
        fwd.append(Gate("CNOT", (s[i],), (b[i],)))
    # equality-prefix chain over descending bits: e[j] = all higher bits equal
    for j in range(w - 1):
        i = w - 1 - j  # bit whose equality extends the prefix
        prev = (e[j - 1],) if j > 0 else ()
        fwd.append(Gate("X", (s[i],)))
        fwd.append(flip(e[j], (*prev, s[i])))
        fwd.append(Gate("X", (s[i],)))
    gates = list(fwd)
    # a > b accumulation: prefix-equal and a_i=1, b_i=0 (i.e. a_i and xor_i)
    for i in range(w - 1, -1, -1):
        j = w - 1 - i  # prefix index guarding bit i
        prev = (e[j - 1],) if j > 0 else ()
        gates.append(flip(out, (*prev, a[i], s[i])))
    gates.append(Gate("X", (out,)))  # a <= b = not (a > b)
    gates.extend(reversed(fwd))
    return gates
