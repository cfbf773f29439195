"""Gate-level intermediate representation with two evaluators.

Gate kinds and their operands:

=========  ============================================================
X          targets=(t,)
CNOT       controls=(c,), targets=(t,)
MCX        controls=(c1, ...), targets=(t,)   multi-controlled X
H          targets=(t,)
CH         controls=(c,), targets=(t,)
RY         targets=(t,), angle
CRY        controls=(c,), targets=(t,), angle
ZPHASE     targets=parity set (may be empty), angle: applies the phase
           e^{-i angle (-1)^parity}; the empty set is a global phase
SHIFTL     reg: cyclic shift of the register's bit values upward
CMP        reg, reg2, targets=(out,): out ^= (value(reg) <= value(reg2))
MACRO      name, body: inline group, expanded for counting and export
=========  ============================================================

Registers are named tuples of qubit indices, least significant first.
Qubit b of the circuit is bit b of a basis index.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DenseLimitError, NonBasisGateError, ValidationError
from ..paulis import parity_signs

RUN_DENSE_LIMIT = 14

_BASIS_KINDS = frozenset({"X", "CNOT", "MCX", "ZPHASE", "SHIFTL", "CMP", "MACRO"})
_MIXING_KINDS = frozenset({"H", "CH", "RY", "CRY"})


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...] = ()
    controls: tuple[int, ...] = ()
    angle: float = 0.0
    reg: str = ""
    reg2: str = ""
    name: str = ""
    body: tuple["Gate", ...] = ()


class Circuit:
    """A gate list over n qubits plus named registers."""

    def __init__(self, n_qubits: int, registers: dict[str, tuple[int, ...]] | None = None,
                 meta: dict | None = None):
        self.n_qubits = n_qubits
        self.registers: dict[str, tuple[int, ...]] = dict(registers or {})
        self.gates: list[Gate] = []
        self.meta: dict = dict(meta or {})

    # -- construction helpers ------------------------------------------------
    def add_register(self, name: str, qubits) -> tuple[int, ...]:
        qubits = tuple(qubits)
        if name in self.registers:
            raise ValidationError(f"register {name!r} already declared")
        self.registers[name] = qubits
        return qubits

    def _check(self, gate: Gate) -> Gate:
        ops = set(gate.targets) | set(gate.controls)
        for q in ops:
            if not (0 <= q < self.n_qubits):
                raise ValidationError(f"qubit {q} outside circuit of {self.n_qubits}")
        if set(gate.targets) & set(gate.controls):
            raise ValidationError(f"control and target overlap in {gate}")
        for rname in (gate.reg, gate.reg2):
            if rname and rname not in self.registers:
                raise ValidationError(f"gate references undeclared register {rname!r}")
        return gate

    def append(self, gate: Gate) -> None:
        self.gates.append(self._check(gate))

    def extend(self, gates) -> None:
        for g in gates:
            self.append(g)

    def x(self, t): self.append(Gate("X", (t,)))
    def cnot(self, c, t): self.append(Gate("CNOT", (t,), (c,)))
    def mcx(self, controls, t): self.append(Gate("MCX", (t,), tuple(controls)))
    def h(self, t): self.append(Gate("H", (t,)))
    def ch(self, c, t): self.append(Gate("CH", (t,), (c,)))
    def ry(self, angle, t): self.append(Gate("RY", (t,), angle=angle))
    def cry(self, angle, c, t): self.append(Gate("CRY", (t,), (c,), angle=angle))
    def zphase(self, angle, qubits=()): self.append(Gate("ZPHASE", tuple(qubits), angle=angle))
    def shiftl(self, reg): self.append(Gate("SHIFTL", reg=reg))
    def cmp(self, reg_a, reg_b, out): self.append(Gate("CMP", (out,), reg=reg_a, reg2=reg_b))
    def macro(self, name, gates): self.append(Gate("MACRO", name=name, body=tuple(gates)))


def flatten(gates) -> list[Gate]:
    out = []
    for g in gates:
        if g.kind == "MACRO":
            out.extend(flatten(g.body))
        else:
            out.append(g)
    return out


def inverted(gates) -> list[Gate]:
    """Reverse of a gate list built from self-inverse basis gates."""
    out = []
    for g in reversed(list(gates)):
        if g.kind == "MACRO":
            out.append(Gate("MACRO", name=g.name + "_inv", body=tuple(inverted(g.body))))
        elif g.kind in ("X", "CNOT", "MCX", "CMP", "ZPHASE", "SHIFTL"):
            if g.kind == "ZPHASE":
                out.append(replace(g, angle=-g.angle))
            elif g.kind == "SHIFTL":
                raise ValidationError("SHIFTL has no single-gate inverse in this IR")
            else:
                out.append(g)
        else:
            raise ValidationError(f"cannot invert mixing gate {g.kind}")
    return out


# ---------------------------------------------------------------------------
# Classical-reversible evaluation
# ---------------------------------------------------------------------------

def _reg_value(state: int, qubits: tuple[int, ...]) -> int:
    return sum(((state >> q) & 1) << i for i, q in enumerate(qubits))


def run_reversible(circuit: Circuit, basis: int) -> tuple[int, complex]:
    """Propagate one basis state through a phase-diagonal permutation circuit.

    Cost is linear in the gate count; mixing gates raise NonBasisGateError.
    """
    if basis >> circuit.n_qubits:
        raise ValidationError(f"basis state {basis} outside {circuit.n_qubits} qubits")
    state = basis
    phase = 1.0 + 0.0j

    def walk(gates):
        nonlocal state, phase
        for g in gates:
            if g.kind == "MACRO":
                walk(g.body)
                continue
            if g.kind in _MIXING_KINDS:
                raise NonBasisGateError(g.kind)
            if g.kind == "X":
                state ^= 1 << g.targets[0]
            elif g.kind == "CNOT" or g.kind == "MCX":
                if all((state >> c) & 1 for c in g.controls):
                    state ^= 1 << g.targets[0]
            elif g.kind == "ZPHASE":
                par = sum((state >> q) & 1 for q in g.targets) % 2
                phase *= np.exp(-1j * g.angle * (1 - 2 * par))
            elif g.kind == "SHIFTL":
                qs = circuit.registers[g.reg]
                w = len(qs)
                vals = [(state >> q) & 1 for q in qs]
                for i, q in enumerate(qs):
                    state &= ~(1 << q)
                    if vals[(i - 1) % w]:
                        state |= 1 << q
            elif g.kind == "CMP":
                a = _reg_value(state, circuit.registers[g.reg])
                b = _reg_value(state, circuit.registers[g.reg2])
                if a <= b:
                    state ^= 1 << g.targets[0]
            else:
                raise ValidationError(f"unknown gate kind {g.kind!r}")

    walk(circuit.gates)
    return state, complex(phase)


# ---------------------------------------------------------------------------
# Dense evaluation
# ---------------------------------------------------------------------------

def _perm_phase(circuit: Circuit, g: Gate, z: np.ndarray):
    """(permutation, phase) arrays of one basis-preserving gate."""
    if g.kind == "X":
        return z ^ (1 << g.targets[0]), None
    if g.kind in ("CNOT", "MCX"):
        ctrl = np.ones_like(z)
        for c in g.controls:
            ctrl &= (z >> c) & 1
        return z ^ (ctrl << g.targets[0]), None
    if g.kind == "ZPHASE":
        mask = 0
        for q in g.targets:
            mask |= 1 << q
        signs = parity_signs(mask, circuit.n_qubits)
        return z, np.exp(-1j * g.angle * signs)
    if g.kind == "SHIFTL":
        qs = circuit.registers[g.reg]
        w = len(qs)
        clear = ~sum(1 << q for q in qs)
        p = z & clear
        for i, q in enumerate(qs):
            p |= ((z >> qs[(i - 1) % w]) & 1) << q
        return p, None
    if g.kind == "CMP":
        a = sum(((z >> q) & 1) << i for i, q in enumerate(circuit.registers[g.reg]))
        b = sum(((z >> q) & 1) << i for i, q in enumerate(circuit.registers[g.reg2]))
        return z ^ ((a <= b).astype(z.dtype) << g.targets[0]), None
    raise ValidationError(f"unknown gate kind {g.kind!r}")


def _apply_mixing(U: np.ndarray, g: Gate) -> None:
    dim = U.shape[0]
    idx = np.arange(dim)
    t = g.targets[0]
    sel = (idx >> t) & 1 == 1
    for c in g.controls:
        sel &= (idx >> c) & 1 == 1
    rows1 = idx[sel]
    rows0 = rows1 ^ (1 << t)
    a = U[rows0, :].copy()
    b = U[rows1, :].copy()
    if g.kind in ("H", "CH"):
        inv = 1.0 / math.sqrt(2.0)
        U[rows0, :] = inv * (a + b)
        U[rows1, :] = inv * (a - b)
    else:  # RY / CRY
        c_, s_ = math.cos(g.angle / 2), math.sin(g.angle / 2)
        U[rows0, :] = c_ * a - s_ * b
        U[rows1, :] = s_ * a + c_ * b


def run_dense(circuit: Circuit, dense_limit: int = RUN_DENSE_LIMIT) -> np.ndarray:
    """Full unitary of the circuit; refuses above the qubit limit."""
    if circuit.n_qubits > dense_limit:
        raise DenseLimitError(circuit.n_qubits, dense_limit, "dense circuit evaluation")
    dim = 1 << circuit.n_qubits
    U = np.eye(dim, dtype=complex)
    z = np.arange(dim)
    for g in flatten(circuit.gates):
        if g.kind in _MIXING_KINDS:
            _apply_mixing(U, g)
        else:
            perm, phase = _perm_phase(circuit, g, z)
            rows = U[z, :] if phase is None else phase[:, None] * U[z, :]
            U2 = np.empty_like(U)
            U2[perm, :] = rows
            U = U2
    return U


def dense_on_basis_columns(circuit: Circuit, columns: list[int],
                           rows: list[int] | None = None) -> np.ndarray:
    """Submatrix of a basis-preserving circuit via per-column propagation.

    Lets tests evaluate wide circuits (scratch registers included) without
    materializing the full 2^n unitary; raises on mixing gates.
    """
    cols = list(columns)
    rows = cols if rows is None else list(rows)
    row_pos = {r: i for i, r in enumerate(rows)}
    out = np.zeros((len(rows), len(cols)), dtype=complex)
    for j, c in enumerate(cols):
        s, ph = run_reversible(circuit, c)
        if s in row_pos:
            out[row_pos[s], j] = ph
    return out


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------

def gate_count(circuit: Circuit) -> dict:
    """Exact per-kind gate counts with macros expanded, plus ancilla tally."""
    counts: Counter = Counter(g.kind for g in flatten(circuit.gates))
    out = {
        "counts": dict(sorted(counts.items())),
        "total": int(sum(counts.values())),
    }
    if "ancillas" in circuit.meta:
        out["ancillas"] = circuit.meta["ancillas"]
    return out


def fit_linear_model(xs, ys) -> tuple[float, float, float]:
    """Least-squares y = a + b x; returns (a, b, r_squared)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    b, a = np.polyfit(x, y, 1)
    pred = a + b * x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(a), float(b), r2


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def to_text(circuit: Circuit) -> str:
    """One gate per line; registers and qubit count in header lines."""
    lines = [f"QUBITS {circuit.n_qubits}"]
    for name, qs in circuit.registers.items():
        lines.append(f"REG {name} {','.join(str(q) for q in qs)}")

    def emit(gates, indent):
        pad = "  " * indent
        for g in gates:
            if g.kind == "MACRO":
                lines.append(f"{pad}MACRO {g.name} {{")
                emit(g.body, indent + 1)
                lines.append(f"{pad}}}")
            elif g.kind == "X":
                lines.append(f"{pad}X {g.targets[0]}")
            elif g.kind == "CNOT":
                lines.append(f"{pad}CNOT {g.controls[0]} {g.targets[0]}")
            elif g.kind == "MCX":
                cs = ",".join(str(c) for c in g.controls)
                lines.append(f"{pad}MCX {cs} {g.targets[0]}")
            elif g.kind == "H":
                lines.append(f"{pad}H {g.targets[0]}")
            elif g.kind == "CH":
                lines.append(f"{pad}CH {g.controls[0]} {g.targets[0]}")
            elif g.kind == "RY":
                lines.append(f"{pad}RY {g.angle:.17g} {g.targets[0]}")
            elif g.kind == "CRY":
                lines.append(f"{pad}CRY {g.angle:.17g} {g.controls[0]} {g.targets[0]}")
            elif g.kind == "ZPHASE":
                qs = ",".join(str(q) for q in g.targets)
                lines.append(f"{pad}ZPHASE {g.angle:.17g} {qs}".rstrip())
            elif g.kind == "SHIFTL":
                lines.append(f"{pad}SHIFTL {g.reg}")
            elif g.kind == "CMP":
                lines.append(f"{pad}CMP {g.reg} {g.reg2} {g.targets[0]}")
            else:
                raise ValidationError(f"cannot serialize gate {g.kind!r}")

    emit(circuit.gates, 0)
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Circuit:
    """Parse the text format back into a Circuit."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("QUBITS "):
        raise ValidationError("circuit text must start with a QUBITS line")
    circuit = Circuit(int(lines[0].split()[1]))
    pos = 1
    while pos < len(lines) and lines[pos].startswith("REG "):
        _, name, qs = lines[pos].split(maxsplit=2)
        circuit.add_register(name, (int(q) for q in qs.split(",")))
        pos += 1

    def parse_block(pos):
        gates = []
        while pos < len(lines):
            ln = lines[pos]
            if ln == "}":
                return gates, pos + 1
            m = re.match(r"MACRO (\S+) \{$", ln)
            if m:
                body, pos = parse_block(pos + 1)
                gates.append(Gate("MACRO", name=m.group(1), body=tuple(body)))
                continue
            parts = ln.split()
            kind = parts[0]
            if kind == "X":
                gates.append(Gate("X", (int(parts[1]),)))
            elif kind == "CNOT":
                gates.append(Gate("CNOT", (int(parts[2]),), (int(parts[1]),)))
            elif kind == "MCX":
                cs = tuple(int(c) for c in parts[1].split(","))
                gates.append(Gate("MCX", (int(parts[2]),), cs))
            elif kind == "H":
                gates.append(Gate("H", (int(parts[1]),)))
            elif kind == "CH":
                gates.append(Gate("CH", (int(parts[2]),), (int(parts[1]),)))
            elif kind == "RY":
                gates.append(Gate("RY", (int(parts[2]),), angle=float(parts[1])))
            elif kind == "CRY":
                gates.append(Gate("CRY", (int(parts[3]),), (int(parts[2]),),
                                  angle=float(parts[1])))
            elif kind == "ZPHASE":
                qs = ()
                if len(parts) > 2:
                    qs = tuple(int(q) for q in parts[2].split(","))
                gates.append(Gate("ZPHASE", qs, angle=float(parts[1])))
            elif kind == "SHIFTL":
                gates.append(Gate("SHIFTL", reg=parts[1]))
            elif kind == "CMP":
                gates.append(Gate("CMP", (int(parts[3]),), reg=parts[1], reg2=parts[2]))
            else:
                raise ValidationError(f"unknown gate line {ln!r}")
            pos += 1
        return gates, pos

    gates, pos = parse_block(pos)
    if pos != len(lines):
        raise ValidationError("unbalanced MACRO braces")
    for g in gates:
        circuit.append(g)
    return circuit
