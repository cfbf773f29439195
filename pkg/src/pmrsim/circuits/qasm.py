"""OpenQASM-2 export.

Macros are expanded; CMP and SHIFTL lower to X/CNOT/MCX networks first;
multi-controlled X beyond two controls uses the standard clean-ancilla
Toffoli cascade with a shared scratch pool appended as ``scr``.  ZPHASE on
an empty set is a global phase and exports as a comment.
"""

from __future__ import annotations

from ..errors import ValidationError
from .arith import comparator_leq_gates
from .ir import Circuit, Gate, flatten


def _lower(circuit: Circuit) -> tuple[list[Gate], int]:
    """Rewrite CMP/SHIFTL into flip networks; returns (gates, total_qubits).

    Comparator scratch is allocated once, sized for the widest CMP, and is
    restored by construction after every use.
    """
    widths = [
        max(len(circuit.registers[g.reg]), len(circuit.registers[g.reg2]))
        for g in flatten(circuit.gates) if g.kind == "CMP"
    ]
    w = max(widths, default=0)
    base = circuit.n_qubits
    xor_scratch = tuple(range(base, base + w))
    eq_scratch = tuple(range(base + w, base + w + max(0, w - 1)))
    total = base + len(xor_scratch) + len(eq_scratch)
    out: list[Gate] = []
    for g in flatten(circuit.gates):
        if g.kind == "CMP":
            a = circuit.registers[g.reg]
            b = circuit.registers[g.reg2]
            if len(a) != len(b):
                raise ValidationError(
                    "QASM export requires equal-width comparator operands"
                )
            out.extend(comparator_leq_gates(a, b, g.targets[0],
                                            xor_scratch[: len(a)],
                                            eq_scratch[: len(a) - 1]))
        elif g.kind == "SHIFTL":
            qs = circuit.registers[g.reg]
            for i in range(len(qs) - 1, 0, -1):
                lo, hi = qs[i - 1], qs[i]
                out.append(Gate("CNOT", (hi,), (lo,)))
                out.append(Gate("CNOT", (lo,), (hi,)))
                out.append(Gate("CNOT", (hi,), (lo,)))
        else:
            out.append(g)
    return out, total


def to_qasm(circuit: Circuit) -> str:
    gates, total = _lower(circuit)
    mcx_extra = max((len(g.controls) - 2 for g in gates if g.kind == "MCX"),
                    default=0)
    lines = ['OPENQASM 2.0;', 'include "qelib1.inc";', f"qreg q[{total}];"]
    if mcx_extra > 0:
        lines.append(f"qreg mcx[{mcx_extra}];")

    def q(i: int) -> str:
        return f"q[{i}]"

    for g in gates:
        if g.kind == "X":
            lines.append(f"x {q(g.targets[0])};")
        elif g.kind == "CNOT":
            lines.append(f"cx {q(g.controls[0])},{q(g.targets[0])};")
        elif g.kind == "H":
            lines.append(f"h {q(g.targets[0])};")
        elif g.kind == "CH":
            lines.append(f"ch {q(g.controls[0])},{q(g.targets[0])};")
        elif g.kind == "RY":
            lines.append(f"ry({g.angle:.17g}) {q(g.targets[0])};")
        elif g.kind == "CRY":
            c, t = g.controls[0], g.targets[0]
            lines.append(f"ry({g.angle / 2:.17g}) {q(t)};")
            lines.append(f"cx {q(c)},{q(t)};")
            lines.append(f"ry({-g.angle / 2:.17g}) {q(t)};")
            lines.append(f"cx {q(c)},{q(t)};")
        elif g.kind == "ZPHASE":
            if not g.targets:
                lines.append(f"// global phase exp(-i*{g.angle:.17g})")
                continue
            chain = list(g.targets)
            last = chain[-1]
            for a in chain[:-1]:
                lines.append(f"cx {q(a)},{q(last)};")
            lines.append(f"rz({2 * g.angle:.17g}) {q(last)};")
            for a in reversed(chain[:-1]):
                lines.append(f"cx {q(a)},{q(last)};")
        elif g.kind == "MCX":
            cs = list(g.controls)
            t = g.targets[0]
            if len(cs) == 1:
                lines.append(f"cx {q(cs[0])},{q(t)};")
            elif len(cs) == 2:
                lines.append(f"ccx {q(cs[0])},{q(cs[1])},{q(t)};")
            else:
                # clean-ancilla cascade: AND pairs into mcx[], fire, uncompute
                ands = []
                prev = cs[0]
                for j, c in enumerate(cs[1:-1]):
                    anc = f"mcx[{j}]"
                    lines.append(f"ccx {q(prev) if j == 0 else ands[-1]},{q(c)},{anc};")
                    ands.append(anc)
                    prev = c
                lines.append(f"ccx {ands[-1]},{q(cs[-1])},{q(t)};")
                for j in range(len(ands) - 1, -1, -1):
                    c = cs[1 + j]
                    lines.append(
                        f"ccx {q(cs[0]) if j == 0 else ands[j - 1]},{q(c)},{ands[j]};"
                    )
        else:
            raise ValidationError(f"cannot export gate {g.kind!r} to QASM")
    return "\n".join(lines) + "\n"
