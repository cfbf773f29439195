"""Gate-level compilation of the LCU building blocks.

The select network is statically unrolled over the Q repetitions; the
repetition index s is classical, so comparisons against s compile to
constant loads.  All alpha machinery is compute / phase / uncompute with
every scratch bit restored, and the compiled networks realize exactly the
block-membership weights of the dense reference semantics on every basis
state (the min/max path carries an overflow guard so the two agree even on
ancilla patterns outside the valid encodings).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ValidationError
from ..lcu import AncillaLayout, SimParams, is_z_dependent, state_prep_steps
from ..pmr import PmrHamiltonian
from .arith import decrement_gates, flip, increment_gates, load_const_gates
from .ir import Circuit, Gate, inverted


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit assignment of a compiled select network.

    The system, unary order register, one-hot index blocks, and binary
    subdivision blocks coincide with the dense layout (system in the low
    bits); the repetition counter, alpha workspace, and scratch flags
    follow.
    """

    n_system: int
    Q: int
    M: int
    kappa: int
    system: tuple[int, ...]
    q_reg: tuple[int, ...]
    i_regs: tuple[tuple[int, ...], ...]
    k_regs: tuple[tuple[int, ...], ...]
    s_counter: tuple[int, ...]
    workspace: dict[str, tuple[int, ...]] = field(default_factory=dict)
    flags: dict[str, int] = field(default_factory=dict)

    @property
    def encoding_qubits(self) -> int:
        return self.Q * (1 + self.M + self.kappa)

    @property
    def workspace_qubits(self) -> int:
        return sum(len(v) for v in self.workspace.values())

    @property
    def scratch_qubits(self) -> int:
        return len(self.flags)

    @property
    def total_qubits(self) -> int:
        return (self.n_system + self.encoding_qubits + len(self.s_counter)
                + self.workspace_qubits + self.scratch_qubits)

    def ancilla_summary(self) -> dict:
        return {
            "encoding": self.encoding_qubits,
            "s_counter": len(self.s_counter),
            "alpha_workspace": self.workspace_qubits,
            "scratch": self.scratch_qubits,
            "total": self.encoding_qubits + len(self.s_counter)
                     + self.workspace_qubits + self.scratch_qubits,
        }


def _sig_width(Q: int) -> int:
    return max(1, Q.bit_length())


RECIP_BITS = 40


def build_register_layout(n_system: int, Q: int, M: int, kappa: int,
                          tables: bool = False,
                          recip_bits: int = RECIP_BITS) -> RegisterLayout:
    if Q < 1 or M < 1 or kappa < 1:
        raise ValidationError(f"need Q, M, kappa >= 1, got ({Q}, {M}, {kappa})")
    cursor = n_system
    def take(w):
        nonlocal cursor
        out = tuple(range(cursor, cursor + w))
        cursor += w
        return out
    system = tuple(range(n_system))
    q_reg = take(Q)
    i_regs = tuple(take(M) for _ in range(Q))
    k_regs = tuple(take(kappa) for _ in range(Q))
    s_counter = take(Q)
    w = _sig_width(Q)
    workspace = {
        "first": take(kappa), "last": take(kappa), "cand": take(kappa),
        "sig": take(w), "const": take(w),
        "count_first": take(w), "count_last": take(w),
    }
    if tables:
        for c in range(1 << kappa):
            workspace[f"occ{c}"] = take(w)
            workspace[f"pre{c}"] = take(w)
            workspace[f"recip{c}"] = take(recip_bits)
        workspace["recip_first"] = take(recip_bits)
        workspace["recip_last"] = take(recip_bits)
    flag_names = ["f1", "f2", "fs", "g", "p0", "ov", "eq", "ctrl", "ctrl2",
                  "vflag", "par"]
    flags = {name: take(1)[0] for name in flag_names}
    return RegisterLayout(
        n_system=n_system, Q=Q, M=M, kappa=kappa, system=system, q_reg=q_reg,
        i_regs=i_regs, k_regs=k_regs, s_counter=s_counter,
        workspace=workspace, flags=flags,
    )


def _declare_registers(c: Circuit, lay: RegisterLayout) -> None:
    c.add_register("q", lay.q_reg)
    for j, bits in enumerate(lay.i_regs):
        c.add_register(f"i{j}", bits)
    for j, bits in enumerate(lay.k_regs):
        c.add_register(f"k{j}", bits)
    c.add_register("s_counter", lay.s_counter)
    for name, bits in lay.workspace.items():
        c.add_register(name, bits)


# ---------------------------------------------------------------------------
# Alpha unit building blocks (all X/CNOT/MCX/CMP: invert by reversing)
# ---------------------------------------------------------------------------

def _sigma_gates(lay: RegisterLayout, cand_reg: str) -> list[Gate]:
    """sig += #{active m with k_m <= cand} (the Sigma prefix-count oracle).

    Uses its own comparator scratch flag so callers may hold results in
    f1/f2 across a later oracle uncompute.
    """
    fs, g = lay.flags["fs"], lay.flags["g"]
    out: list[Gate] = []
    for m in range(lay.Q):
        out.append(Gate("CMP", (fs,), reg=f"k{m}", reg2=cand_reg))
        out.append(flip(g, (fs, lay.q_reg[m])))
        out.extend(increment_gates(lay.workspace["sig"], ctrl=g))
        out.append(flip(g, (fs, lay.q_reg[m])))
        out.append(Gate("CMP", (fs,), reg=f"k{m}", reg2=cand_reg))
    return out


def _count_equal_gates(lay: RegisterLayout, value_reg: str,
                       counter_bits: tuple[int, ...]) -> list[Gate]:
    """counter += #{active m with k_m == value_reg}."""
    f1, f2, g = lay.flags["f1"], lay.flags["f2"], lay.flags["g"]
    out: list[Gate] = []
    for m in range(lay.Q):
        out.append(Gate("CMP", (f1,), reg=f"k{m}", reg2=value_reg))
        out.append(Gate("CMP", (f2,), reg=value_reg, reg2=f"k{m}"))
        out.append(flip(g, (f1, f2, lay.q_reg[m])))
        out.extend(increment_gates(counter_bits, ctrl=g))
        out.append(flip(g, (f1, f2, lay.q_reg[m])))
        out.append(Gate("CMP", (f2,), reg=value_reg, reg2=f"k{m}"))
        out.append(Gate("CMP", (f1,), reg=f"k{m}", reg2=value_reg))
    return out


def _search_gates(lay: RegisterLayout, s: int, which: str) -> list[Gate]:
    """Greedy MSB-first monotone search writing the result register.

    which='first': max{c: G(c) <= s-1} then +1 if G(0) <= s-1 (the first
    containing block); which='last': max{u: G(u-1) <= s}.
    """
    kappa = lay.kappa
    res_name = "first" if which == "first" else "last"
    res = lay.workspace[res_name]
    cand = lay.workspace["cand"]
    const = lay.workspace["const"]
    f1, p0 = lay.flags["f1"], lay.flags["p0"]
    threshold = s - 1 if which == "first" else s
    out: list[Gate] = []
    if threshold < 0:
        return out  # predicate never true: result stays 0
    const_load = load_const_gates(const, threshold)
    for beta in range(kappa - 1, -1, -1):
        copies = [Gate("CNOT", (cand[j],), (res[j],)) for j in range(beta + 1, kappa)]
        out.extend(copies)
        out.append(Gate("X", (cand[beta],)))
        if which == "last":
            out.extend(decrement_gates(cand))
        sigma = _sigma_gates(lay, "cand")
        out.extend(sigma)
        out.extend(const_load)
        out.append(Gate("CMP", (f1,), reg="sig", reg2="const"))
        out.append(Gate("CNOT", (res[beta],), (f1,)))
        out.append(Gate("CMP", (f1,), reg="sig", reg2="const"))
        out.extend(const_load)
        out.extend(inverted(sigma))
        if which == "last":
            out.extend(increment_gates(cand))
        out.append(Gate("X", (cand[beta],)))
        out.extend(copies)
    if which == "first":
        # cand is zero here: G(0) decides the +1 boundary correction
        sigma = _sigma_gates(lay, "cand")
        out.extend(sigma)
        out.extend(const_load)
        out.append(Gate("CMP", (p0,), reg="sig", reg2="const"))
        out.extend(increment_gates(res, ctrl=p0))
        out.append(Gate("CMP", (p0,), reg="sig", reg2="const"))
        out.extend(const_load)
        out.extend(inverted(sigma))
    return out


def _overflow_gates(lay: RegisterLayout, s: int) -> list[Gate]:
    """ov = [G(K-1) <= s-1]: s exceeds the active register count."""
    if s < 1:
        return []
    cand = lay.workspace["cand"]
    const = lay.workspace["const"]
    out: list[Gate] = []
    load_cand = load_const_gates(cand, (1 << lay.kappa) - 1)
    load_c = load_const_gates(const, s - 1)
    out.extend(load_cand)
    sigma = _sigma_gates(lay, "cand")
    out.extend(sigma)
    out.extend(load_c)
    out.append(Gate("CMP", (lay.flags["ov"],), reg="sig", reg2="const"))
    out.extend(load_c)
    out.extend(inverted(sigma))
    out.extend(load_cand)
    return out


def _equal_flag_gates(lay: RegisterLayout) -> list[Gate]:
    f1, f2, eq = lay.flags["f1"], lay.flags["f2"], lay.flags["eq"]
    return [
        Gate("CMP", (f1,), reg="first", reg2="last"),
        Gate("CMP", (f2,), reg="last", reg2="first"),
        flip(eq, (f1, f2)),
        Gate("CMP", (f2,), reg="last", reg2="first"),
        Gate("CMP", (f1,), reg="first", reg2="last"),
    ]


def alpha_minmax_compute_gates(lay: RegisterLayout, s: int) -> list[Gate]:
    """Populate first/last block registers, their occupations, eq and ov."""
    out: list[Gate] = []
    out.extend(_search_gates(lay, s, "first"))
    out.extend(_search_gates(lay, s, "last"))
    out.extend(_count_equal_gates(lay, "first", lay.workspace["count_first"]))
    out.extend(_count_equal_gates(lay, "last", lay.workspace["count_last"]))
    out.extend(_overflow_gates(lay, s))
    out.extend(_equal_flag_gates(lay))
    return out


def alpha_membership_compute_gates(lay: RegisterLayout, s: int,
                                   ell: int) -> list[Gate]:
    """Membership flag and occupation for one block ell in [1, K].

    eq <- [Sigma_{ell-1} <= s <= Sigma_ell].  Each threshold flag block is
    sigma-clean and self-cancelling when replayed, so the f1/f2 scratch
    flags are cleared by repeating their blocks after the AND.
    """
    if not (1 <= ell <= (1 << lay.kappa)):
        raise ValidationError(f"block index {ell} outside [1, {1 << lay.kappa}]")
    cand = lay.workspace["cand"]
    const = lay.workspace["const"]
    f1, f2, eq = lay.flags["f1"], lay.flags["f2"], lay.flags["eq"]
    load_s = load_const_gates(const, s)

    def threshold_block(c_val: int, out_flag: int, le_sig: bool) -> list[Gate]:
        # le_sig: flag = [const <= G(c_val)]; else flag = [G(c_val) <= const]
        blk: list[Gate] = []
        load_cand = load_const_gates(cand, c_val)
        blk.extend(load_cand)
        sigma = _sigma_gates(lay, "cand")
        blk.extend(sigma)
        blk.extend(load_s)
        if le_sig:
            blk.append(Gate("CMP", (out_flag,), reg="const", reg2="sig"))
        else:
            blk.append(Gate("CMP", (out_flag,), reg="sig", reg2="const"))
        blk.extend(load_s)
        blk.extend(inverted(sigma))
        blk.extend(load_cand)
        return blk

    blk1 = threshold_block(ell - 1, f1, le_sig=True)      # s <= Sigma_ell
    blk2 = (threshold_block(ell - 2, f2, le_sig=False)    # Sigma_{ell-1} <= s
            if ell >= 2 else [Gate("X", (f2,))])
    out: list[Gate] = []
    out.extend(blk1)
    out.extend(blk2)
    out.append(flip(eq, (f1, f2)))
    out.extend(blk2)  # replay clears f2
    out.extend(blk1)  # replay clears f1
    return out


def _cond_parity_phase(angle: float, par: int, ctrl: int | None) -> list[Gate]:
    """e^{-i angle (-1)^par}, optionally only when ctrl is set."""
    if ctrl is None:
        return [Gate("ZPHASE", (par,), angle=angle)]
    return [
        Gate("ZPHASE", (par,), angle=angle / 2),
        Gate("ZPHASE", (par, ctrl), angle=-angle / 2),
    ]


def _value_recip_phases(lay: RegisterLayout, counter_bits: tuple[int, ...],
                        base_angle: float, extra: tuple[int, ...],
                        denominator_offset: int = 1) -> list[Gate]:
    """Phase e^{-i base/(v+offset) (-1)^par} for the counter value v.

    One multi-controlled flag per possible value; exact angles, no binary
    truncation of the reciprocals.
    """
    par, vflag = lay.flags["par"], lay.flags["vflag"]
    out: list[Gate] = []
    for v in range(lay.Q + 1):
        sandwich = [Gate("X", (b,)) for i, b in enumerate(counter_bits)
                    if not (v >> i) & 1]
        out.extend(sandwich)
        out.append(flip(vflag, (*extra, *counter_bits)))
        out.extend(_cond_parity_phase(base_angle / (v + denominator_offset),
                                      par, vflag))
        out.append(flip(vflag, (*extra, *counter_bits)))
        out.extend(sandwich)
    return out


def _integer_diff_phases(lay: RegisterLayout, base_angle: float,
                         ctrl2: int) -> list[Gate]:
    """e^{-i base (last - first - 1) (-1)^par} conditioned on ctrl2."""
    par, vflag = lay.flags["par"], lay.flags["vflag"]
    out: list[Gate] = []
    for sign, reg in ((1.0, "last"), (-1.0, "first")):
        for beta, bit in enumerate(lay.workspace[reg]):
            out.append(flip(vflag, (ctrl2, bit)))
            out.extend(_cond_parity_phase(sign * base_angle * (1 << beta),
                                          par, vflag))
            out.append(flip(vflag, (ctrl2, bit)))
    out.extend(_cond_parity_phase(-base_angle, par, ctrl2))
    return out


def _diag_phase_block(lay: RegisterLayout, d0_terms, delta: float, s: int,
                      mode: str) -> list[Gate]:
    """All diagonal-phase gadgets of one repetition (parity in, ladders,
    parity out), conditioned so garbage ancilla patterns stay phase-free."""
    par = lay.flags["par"]
    ctrl, ctrl2 = lay.flags["ctrl"], lay.flags["ctrl2"]
    eq, ov = lay.flags["eq"], lay.flags["ov"]
    out: list[Gate] = []
    base: tuple[int, ...] = ()
    if s >= 1:
        # ctrl = q_bit and not ov
        out.append(Gate("X", (ov,)))
        out.append(flip(ctrl, (lay.q_reg[s - 1], ov)))
        out.append(Gate("X", (ov,)))
        base = (ctrl,)
    if mode == "minmax":
        # ctrl2 = base and not eq
        out.append(Gate("X", (eq,)))
        out.append(flip(ctrl2, (*base, eq)))
        out.append(Gate("X", (eq,)))
    body: list[Gate] = []
    for z_mask, coeff in d0_terms:
        angle = delta * float(coeff.real)
        parity_cnots = [Gate("CNOT", (par,), (lay.system[b],))
                        for b in range(lay.n_system) if (z_mask >> b) & 1]
        body.extend(parity_cnots)
        if mode == "minmax":
            body.extend(_value_recip_phases(
                lay, lay.workspace["count_first"], angle, base))
            body.extend(_value_recip_phases(
                lay, lay.workspace["count_last"], angle, (ctrl2,)))
            body.extend(_integer_diff_phases(lay, angle, ctrl2))
        else:  # membership: one flagged reciprocal per block
            body.extend(_value_recip_phases(
                lay, lay.workspace["count_first"], angle, (*base, eq)))
        body.extend(parity_cnots)
    out.extend(body)
    if mode == "minmax":
        out.append(Gate("X", (eq,)))
        out.append(flip(ctrl2, (*base, eq)))
        out.append(Gate("X", (eq,)))
    if s >= 1:
        out.append(Gate("X", (ov,)))
        out.append(flip(ctrl, (lay.q_reg[s - 1], ov)))
        out.append(Gate("X", (ov,)))
    return out


def _membership_rep_gates(lay: RegisterLayout, d0_terms, delta: float,
                          s: int) -> list[Gate]:
    """Membership-path phases of one repetition: loop blocks, flag, phase."""
    K = 1 << lay.kappa
    out: list[Gate] = []
    for ell in range(1, K + 1):
        compute = alpha_membership_compute_gates(lay, s, ell)
        count = _count_equal_loaded(lay, ell - 1)
        out.extend(compute)
        out.extend(count)
        out.extend(_diag_phase_block(lay, d0_terms, delta, s, "membership"))
        out.extend(inverted(count))
        out.extend(inverted(compute))
    return out


def _count_equal_loaded(lay: RegisterLayout, value: int) -> list[Gate]:
    """count_first += occupation of the constant block index ``value``."""
    cand = lay.workspace["cand"]
    load = load_const_gates(cand, value)
    return load + _count_equal_gates(lay, "cand", lay.workspace["count_first"]) \
        + load


# ---------------------------------------------------------------------------
# Table-driven alpha unit: one-time occupation / prefix / reciprocal tables
# make every repetition's cost independent of Q, so gate totals follow the
# advertised linear law.  Reciprocals are fixed-point registers of
# ``recip_bits`` bits; the phase ladders halve the angle per bit.
# ---------------------------------------------------------------------------

def _count_leq_loaded(lay: RegisterLayout, value: int,
                      counter_bits: tuple[int, ...]) -> list[Gate]:
    """counter += #{active m with k_m <= value} (constant threshold)."""
    cand = lay.workspace["cand"]
    load = load_const_gates(cand, value)
    out: list[Gate] = list(load)
    fs, g = lay.flags["fs"], lay.flags["g"]
    for m in range(lay.Q):
        out.append(Gate("CMP", (fs,), reg=f"k{m}", reg2="cand"))
        out.append(flip(g, (fs, lay.q_reg[m])))
        out.extend(increment_gates(counter_bits, ctrl=g))
        out.append(flip(g, (fs, lay.q_reg[m])))
        out.append(Gate("CMP", (fs,), reg=f"k{m}", reg2="cand"))
    out.extend(load)
    return out


def _table_precompute_gates(lay: RegisterLayout, recip_bits: int) -> list[Gate]:
    """Fill occ_c, pre_c and recip_c = round(2^P/(occ_c+1)) for every block."""
    K = 1 << lay.kappa
    vflag = lay.flags["vflag"]
    out: list[Gate] = []
    for c in range(K):
        out.extend(_count_equal_loaded_into(lay, c, lay.workspace[f"occ{c}"]))
        out.extend(_count_leq_loaded(lay, c, lay.workspace[f"pre{c}"]))
        occ = lay.workspace[f"occ{c}"]
        recip = lay.workspace[f"recip{c}"]
        for v in range(lay.Q + 1):
            word = round((1 << recip_bits) / (v + 1))
            word = min(word, (1 << recip_bits) - 1)  # 1/1 saturates the register
            sandwich = [Gate("X", (b,)) for i, b in enumerate(occ)
                        if not (v >> i) & 1]
            out.extend(sandwich)
            out.append(flip(vflag, occ))
            for i, b in enumerate(recip):
                if (word >> i) & 1:
                    out.append(Gate("CNOT", (b,), (vflag,)))
            out.append(flip(vflag, occ))
            out.extend(sandwich)
    return out


def _count_equal_loaded_into(lay: RegisterLayout, value: int,
                             counter_bits: tuple[int, ...]) -> list[Gate]:
    cand = lay.workspace["cand"]
    load = load_const_gates(cand, value)
    return load + _count_equal_gates(lay, "cand", counter_bits) + load


def _table_select_register(lay: RegisterLayout, index_reg: str, source: str,
                           dest: str) -> list[Gate]:
    """dest |= table[index] via one match flag per block (exactly one fires)."""
    K = 1 << lay.kappa
    g = lay.flags["g"]
    idx_bits = lay.workspace[index_reg]
    out: list[Gate] = []
    for c in range(K):
        sandwich = [Gate("X", (b,)) for i, b in enumerate(idx_bits)
                    if not (c >> i) & 1]
        out.extend(sandwich)
        out.append(flip(g, idx_bits))
        for i, b in enumerate(lay.workspace[dest]):
            out.append(flip(b, (g, lay.workspace[f"{source}{c}"][i])))
        out.append(flip(g, idx_bits))
        out.extend(sandwich)
    return out


def alpha_table_compute_gates(lay: RegisterLayout, s: int) -> list[Gate]:
    """Per-repetition register fill from the tables, cost independent of Q.

    The first containing block index is the count of blocks c with
    G(c) <= s-1 (monotone threshold flags), the last is the count of
    u >= 1 with G(u-1) <= s; both coincide with the greedy searches,
    including wrap-around on overflow.
    """
    K = 1 << lay.kappa
    const = lay.workspace["const"]
    f1, ov = lay.flags["f1"], lay.flags["ov"]
    out: list[Gate] = []
    if s >= 1:
        load = load_const_gates(const, s - 1)
        out.extend(load)
        for c in range(K):
            out.append(Gate("CMP", (f1,), reg=f"pre{c}", reg2="const"))
            out.extend(increment_gates(lay.workspace["first"], ctrl=f1))
            out.append(Gate("CMP", (f1,), reg=f"pre{c}", reg2="const"))
        out.append(Gate("CMP", (ov,), reg=f"pre{K - 1}", reg2="const"))
        out.extend(load)
    load = load_const_gates(const, s)
    out.extend(load)
    for u in range(1, K):
        out.append(Gate("CMP", (f1,), reg=f"pre{u - 1}", reg2="const"))
        out.extend(increment_gates(lay.workspace["last"], ctrl=f1))
        out.append(Gate("CMP", (f1,), reg=f"pre{u - 1}", reg2="const"))
    out.extend(load)
    out.extend(_table_select_register(lay, "first", "occ", "count_first"))
    out.extend(_table_select_register(lay, "last", "occ", "count_last"))
    out.extend(_table_select_register(lay, "first", "recip", "recip_first"))
    out.extend(_table_select_register(lay, "last", "recip", "recip_last"))
    out.extend(_equal_flag_gates(lay))
    return out


def _recip_ladder_phases(lay: RegisterLayout, recip_reg: str, base_angle: float,
                         extra: tuple[int, ...], recip_bits: int) -> list[Gate]:
    """e^{-i base * recip/2^P (-1)^par}: one conditioned pair per recip bit."""
    par, vflag = lay.flags["par"], lay.flags["vflag"]
    out: list[Gate] = []
    for beta, bit in enumerate(lay.workspace[recip_reg]):
        scale = base_angle * (2.0 ** (beta - recip_bits))
        if extra:
            out.append(flip(vflag, (*extra, bit)))
            out.extend(_cond_parity_phase(scale, par, vflag))
            out.append(flip(vflag, (*extra, bit)))
        else:
            out.extend(_cond_parity_phase(scale, par, bit))
    return out


def _table_phase_block(lay: RegisterLayout, d0_terms, delta: float, s: int,
                       recip_bits: int) -> list[Gate]:
    """Diagonal phases of one repetition from the reciprocal registers."""
    par = lay.flags["par"]
    ctrl, ctrl2 = lay.flags["ctrl"], lay.flags["ctrl2"]
    eq, ov = lay.flags["eq"], lay.flags["ov"]
    out: list[Gate] = []
    base: tuple[int, ...] = ()
    if s >= 1:
        out.append(Gate("X", (ov,)))
        out.append(flip(ctrl, (lay.q_reg[s - 1], ov)))
        out.append(Gate("X", (ov,)))
        base = (ctrl,)
    out.append(Gate("X", (eq,)))
    out.append(flip(ctrl2, (*base, eq)))
    out.append(Gate("X", (eq,)))
    for z_mask, coeff in d0_terms:
        angle = delta * float(coeff.real)
        parity_cnots = [Gate("CNOT", (par,), (lay.system[b],))
                        for b in range(lay.n_system) if (z_mask >> b) & 1]
        out.extend(parity_cnots)
        out.extend(_recip_ladder_phases(lay, "recip_first", angle, base,
                                        recip_bits))
        out.extend(_recip_ladder_phases(lay, "recip_last", angle, (ctrl2,),
                                        recip_bits))
        out.extend(_integer_diff_phases(lay, angle, ctrl2))
        out.extend(parity_cnots)
    out.append(Gate("X", (eq,)))
    out.append(flip(ctrl2, (*base, eq)))
    out.append(Gate("X", (eq,)))
    if s >= 1:
        out.append(Gate("X", (ov,)))
        out.append(flip(ctrl, (lay.q_reg[s - 1], ov)))
        out.append(Gate("X", (ov,)))
    return out


# ---------------------------------------------------------------------------
# Public compilers
# ---------------------------------------------------------------------------

def compile_diag_phase(z_mask: int, coeff: complex, angle: float,
                       n_system: int) -> Circuit:
    """Fig.-3 style gadget: parity into one ancilla, phase, uncompute.

    Realizes e^{-i angle * coeff * Z^mask} with exactly 2m CNOTs for an
    m-qubit mask.
    """
    m = z_mask.bit_count()
    if m < 1:
        raise ValidationError("diagonal phase gadget needs a nonempty Z mask")
    if z_mask >> n_system:
        raise ValidationError("z_mask outside the system register")
    c = Circuit(n_system + 1, meta={"ancillas": {"scratch": 1, "total": 1}})
    anc = n_system
    cnots = [Gate("CNOT", (anc,), (b,)) for b in range(n_system)
             if (z_mask >> b) & 1]
    c.extend(cnots)
    c.zphase(angle * float(coeff.real), (anc,))
    c.extend(cnots)
    return c


def compile_state_prep(p: SimParams, gammas, n_system: int = 0,
                       zdep: bool = False) -> Circuit:
    """Three-stage preparation of the LCU ancilla state.

    Stage 1: the unary order ladder (controlled RY chain); stage 2: one-hot
    index chains, activated per block by a CNOT from the order bit; stage
    3: controlled Hadamards over the subdivision registers.
    """
    gammas = list(gammas)
    if p.Q < 1 or len(gammas) < 1 or p.kappa < 0:
        raise ValidationError("state preparation needs Q, M >= 1")
    layout = AncillaLayout(Q=p.Q, M=len(gammas), kappa=p.kappa, zdep=zdep)
    gamma_dt = sum(gammas) * p.dt
    c = Circuit(n_system + layout.n_ancilla,
                meta={"ancillas": {"encoding": layout.n_ancilla,
                                   "total": layout.n_ancilla}})
    c.add_register("q", tuple(n_system + layout.q_bit(j) for j in range(p.Q)))
    for j in range(p.Q):
        c.add_register(f"i{j}", tuple(n_system + b for b in layout.i_bits(j)))
        c.add_register(f"k{j}", tuple(n_system + b for b in layout.k_bits(j)))
    gates = []
    for step in state_prep_steps(layout, gammas, gamma_dt):
        kind = step[0]
        if kind == "ry":
            gates.append(Gate("RY", (n_system + step[1],), angle=step[2]))
        elif kind == "cry":
            gates.append(Gate("CRY", (n_system + step[2],),
                              (n_system + step[1],), angle=step[3]))
        elif kind == "cnot":
            gates.append(Gate("CNOT", (n_system + step[2],),
                              (n_system + step[1],)))
        elif kind == "ch":
            gates.append(Gate("CH", (n_system + step[2],),
                              (n_system + step[1],)))
    c.macro("state_prep", gates)
    return c


def compile_select(h: PmrHamiltonian, p: SimParams, mode: str = "table",
                   recip_bits: int = RECIP_BITS) -> Circuit:
    """The full select network: Q Fig.-2 repetitions plus the leading
    order-zero diagonal phase.

    Three alpha realizations: 'table' (default; one-time occupation, prefix
    and fixed-point reciprocal tables keep every repetition's cost
    independent of Q, giving the linear gate law), 'minmax' (per-repetition
    greedy block searches with exact value-enumerated reciprocals), and
    'membership' (the O(K) per-block flag alternative).  Constant hopping
    diagonals only; the z-dependent two-phase extension is handled by the
    dense builder, not the compiler.
    """
    if mode not in ("table", "minmax", "membership"):
        raise ValidationError(f"unknown alpha mode {mode!r}")
    if is_z_dependent(h):
        raise ValidationError(
            "select compilation covers constant hopping diagonals; "
            "z-dependent instances are served by the dense OAA builder"
        )
    lay = build_register_layout(h.n, p.Q, h.m, p.kappa,
                                tables=(mode == "table"),
                                recip_bits=recip_bits)
    c = Circuit(lay.total_qubits, meta={
        "ancillas": lay.ancilla_summary(),
        "layout": lay,
        "mode": mode,
        "recip_bits": recip_bits if mode == "table" else None,
    })
    _declare_registers(c, lay)
    delta = p.dt / p.K
    d0_terms = list(h.d0.terms)

    def alpha_phase_macro(s: int) -> list[Gate]:
        if mode == "minmax":
            compute = alpha_minmax_compute_gates(lay, s)
            phases = _diag_phase_block(lay, d0_terms, delta, s, "minmax")
        elif mode == "table":
            compute = alpha_table_compute_gates(lay, s)
            phases = _table_phase_block(lay, d0_terms, delta, s, recip_bits)
        else:
            return [Gate("MACRO", name=f"alpha_membership_s{s}", body=tuple(
                _membership_rep_gates(lay, d0_terms, delta, s)))]
        return [
            Gate("MACRO", name=f"alpha_compute_s{s}", body=tuple(compute)),
            Gate("MACRO", name=f"alpha_phases_s{s}", body=tuple(phases)),
            Gate("MACRO", name=f"alpha_uncompute_s{s}",
                 body=tuple(inverted(compute))),
        ]

    if d0_terms and mode == "table":
        c.macro("alpha_tables", _table_precompute_gates(lay, recip_bits))
    if d0_terms:
        c.macro("diag_phase_order0",
                [g for blk in alpha_phase_macro(0) for g in blk.body])
    for s in range(1, p.Q + 1):
        rep: list[Gate] = []
        fan = []
        for i, term in enumerate(h.terms):
            ib = lay.i_regs[s - 1][i]
            for b in range(h.n):
                if (term.x_mask >> b) & 1:
                    fan.append(Gate("CNOT", (lay.system[b],), (ib,)))
        rep.append(Gate("MACRO", name=f"fanout_s{s}", body=tuple(fan)))
        rep.append(Gate("ZPHASE", (), angle=math.pi / 4))
        rep.append(Gate("ZPHASE", (lay.q_reg[s - 1],), angle=-math.pi / 4))
        if d0_terms:
            rep.extend(alpha_phase_macro(s))
        rep.append(Gate("SHIFTL", reg="s_counter"))
        c.macro(f"rep_s{s}", rep)
    if d0_terms and mode == "table":
        c.macro("alpha_tables_inv",
                inverted(_table_precompute_gates(lay, recip_bits)))
    return c


def select_gate_counts(h: PmrHamiltonian, p: SimParams, mode: str = "table",
                       recip_bits: int = RECIP_BITS) -> dict:
    """Exact per-kind counts of compile_select without materializing Q reps.

    Repetitions share structure; only the constant-load X gates differ with
    the popcount of the repetition index, so one compiled repetition plus
    exact X-count corrections reproduces the full tally.
    """
    from collections import Counter

    from .ir import flatten, gate_count

    if mode != "table":
        return gate_count(compile_select(h, p, mode=mode))
    lay = build_register_layout(h.n, p.Q, h.m, p.kappa, tables=True,
                                recip_bits=recip_bits)
    delta = p.dt / p.K
    d0_terms = list(h.d0.terms)
    counts: Counter = Counter()
    if d0_terms:
        pre = _table_precompute_gates(lay, recip_bits)
        counts.update(g.kind for g in flatten(pre))
        counts.update(g.kind for g in flatten(pre))  # the closing inverse
        prefix = (alpha_table_compute_gates(lay, 0)
                  + _table_phase_block(lay, d0_terms, delta, 0, recip_bits))
        counts.update(g.kind for g in flatten(prefix))
        counts.update(g.kind for g in
                      flatten(alpha_table_compute_gates(lay, 0)))  # uncompute
        rep1 = (alpha_table_compute_gates(lay, 1)
                + _table_phase_block(lay, d0_terms, delta, 1, recip_bits))
        rep1_counts = Counter(g.kind for g in flatten(rep1))
        rep1_counts.update(g.kind for g in
                           flatten(alpha_table_compute_gates(lay, 1)))
        for s in range(1, p.Q + 1):
            counts.update(rep1_counts)
            # compute and uncompute each reload the two constants s-1 and s
            dx = 4 * (bin(s - 1).count("1") - 0) + 4 * (bin(s).count("1") - 1)
            counts["X"] += dx
    fanout = sum(t.x_mask.bit_count() for t in h.terms)
    counts["CNOT"] += p.Q * fanout
    counts["ZPHASE"] += 2 * p.Q
    counts["SHIFTL"] += p.Q
    counts += Counter()  # drop zero entries
    return {
        "counts": dict(sorted(counts.items())),
        "total": int(sum(counts.values())),
        "ancillas": lay.ancilla_summary(),
    }


def compile_alpha_unit(p: SimParams, s: int = 1, mode: str = "minmax",
                       ell: int = 1, uncompute: bool = True,
                       Q: int | None = None,
                       recip_bits: int = RECIP_BITS) -> Circuit:
    """Standalone alpha workspace unit for one repetition index.

    With ``uncompute=False`` the output registers stay populated for basis
    readout; meta['out'] maps logical names to qubit tuples.
    """
    Q = p.Q if Q is None else Q
    lay = build_register_layout(0, Q, 1, p.kappa, tables=(mode == "table"),
                                recip_bits=recip_bits)
    c = Circuit(lay.total_qubits, meta={"ancillas": lay.ancilla_summary()})
    _declare_registers(c, lay)
    if mode in ("minmax", "table"):
        if mode == "minmax":
            gates = alpha_minmax_compute_gates(lay, s)
        else:
            gates = (_table_precompute_gates(lay, recip_bits)
                     + alpha_table_compute_gates(lay, s))
        c.meta["out"] = {
            "first": lay.workspace["first"],
            "last": lay.workspace["last"],
            "count_first": lay.workspace["count_first"],
            "count_last": lay.workspace["count_last"],
            "eq": (lay.flags["eq"],),
            "ov": (lay.flags["ov"],),
        }
    elif mode == "membership":
        gates = alpha_membership_compute_gates(lay, s, ell)
        gates += _count_equal_loaded(lay, ell - 1)
        c.meta["out"] = {
            "member": (lay.flags["eq"],),
            "count": lay.workspace["count_first"],
        }
    else:
        raise ValidationError(f"unknown alpha mode {mode!r}")
    c.meta["inputs"] = {
        "q": lay.q_reg,
        **{f"k{m}": lay.k_regs[m] for m in range(Q)},
    }
    c.macro(f"alpha_{mode}_s{s}", gates)
    if uncompute:
        c.macro(f"alpha_{mode}_s{s}_inv", inverted(gates))
    return c
