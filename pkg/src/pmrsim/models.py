"""Benchmark Hamiltonians and PMR-versus-Pauli resource accounting.

Two generator families: the driven Rydberg-blockade Hamiltonian and
dipolar fermions on an optical lattice (mapped to qubits by Jordan-Wigner
within each spin sector).  The resource sweeps reproduce the headline
scaling comparison: the PMR cost proxy M*Gamma*t grows quadratically with
system size while the Pauli-baseline proxy M'*Gamma'*t picks up the
diagonal couplings and grows much faster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuits.compile import select_gate_counts
from .circuits import compile_state_prep, gate_count
from .errors import ValidationError
from .lcu import SimParams, choose_params
from .paulis import PRUNE_TOL, PauliHamiltonian, PauliTerm
from .pmr import PmrHamiltonian, pmr_decompose


@dataclass(frozen=True)
class RydbergSpec:
    """Driven atoms with van der Waals couplings.

    geometry 'chain': unit-spaced line, true 1/r^6 couplings (their sums
    stay O(N)).  geometry 'clustered': the idealized blockade ball where
    every pair sits at the blockade diameter, so all couplings equal
    c6/diameter^6 and their sum grows as N^2; literal point sets cannot
    keep all pairwise distances of order the diameter once N is large, so
    the cluster is defined by its couplings while the stored positions
    (a Fibonacci sphere) only serve distinctness.
    """

    n_atoms: int
    positions: tuple[tuple[float, float, float], ...]
    omega: tuple[float, ...]
    delta: float
    c6: float
    geometry: str = "chain"
    diameter: float = 1.0

    def __post_init__(self):
        if self.n_atoms < 2:
            raise ValidationError("need at least two atoms")
        if len(self.positions) != self.n_atoms or len(self.omega) != self.n_atoms:
            raise ValidationError("positions and omega must have one entry per atom")
        if len(set(self.positions)) != self.n_atoms:
            raise ValidationError("coincident atom positions")
        if self.geometry not in ("chain", "clustered"):
            raise ValidationError(f"unknown geometry {self.geometry!r}")

    def coupling(self, i: int, j: int) -> float:
        if self.geometry == "clustered":
            return self.c6 / self.diameter**6
        ri = np.array(self.positions[i])
        rj = np.array(self.positions[j])
        return self.c6 / float(np.linalg.norm(ri - rj) ** 6)


def rydberg_chain(n_atoms: int, omega: float = 1.0, delta: float = 0.5,
                  c6: float = 1.0) -> RydbergSpec:
    positions = tuple((float(i), 0.0, 0.0) for i in range(n_atoms))
    return RydbergSpec(n_atoms, positions, (omega,) * n_atoms, delta, c6,
                       geometry="chain")


def rydberg_clustered(n_atoms: int, omega: float = 1.0, delta: float = 0.5,
                      c6: float = 1.0, diameter: float = 1.0) -> RydbergSpec:
    golden = math.pi * (3.0 - math.sqrt(5.0))
    positions = []
    for i in range(n_atoms):
        y = 1.0 - 2.0 * (i + 0.5) / n_atoms
        r = math.sqrt(max(0.0, 1.0 - y * y))
        positions.append((0.5 * diameter * r * math.cos(golden * i),
                          0.5 * diameter * y,
                          0.5 * diameter * r * math.sin(golden * i)))
    return RydbergSpec(n_atoms, tuple(positions), (omega,) * n_atoms, delta,
                       c6, geometry="clustered", diameter=diameter)


@dataclass(frozen=True)
class ModelBuild:
    pauli: PauliHamiltonian
    pmr: PmrHamiltonian
    dropped_constant: float


def rydberg_hamiltonian(spec: RydbergSpec) -> ModelBuild:
    """(1/2) sum (Omega_i X_i - delta Z_i) + sum_{i<j} V_ij n_i n_j.

    The occupation products expand through n = (1+Z)/2; the all-identity
    piece is dropped and reported.
    """
    n = spec.n_atoms
    terms: dict[tuple[int, int], complex] = {}

    def add(x_mask, z_mask, coeff):
        key = (x_mask, z_mask)
        terms[key] = terms.get(key, 0.0) + coeff

    for i in range(n):
        add(1 << i, 0, spec.omega[i] / 2.0)
        add(0, 1 << i, -spec.delta / 2.0)
    constant = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            v = spec.coupling(i, j)
            constant += v / 4.0
            add(0, 1 << i, v / 4.0)
            add(0, 1 << j, v / 4.0)
            add(0, (1 << i) | (1 << j), v / 4.0)
    pauli = PauliHamiltonian(
        n, [PauliTerm(c, x, z) for (x, z), c in terms.items()]
    )
    return ModelBuild(pauli, pmr_decompose(pauli), constant)


@dataclass(frozen=True)
class DipolarSpec:
    """Extended Fermi-Hubbard with dipolar tails on a d-dimensional lattice.

    Sites are laid out row-major on a near-cubic grid; 'boundary' controls
    the hopping bonds only (interactions always use open distances).  The
    worked term-count examples assume open chains; the scaling sweeps use
    periodic bonds so the bond count is exactly N*d.
    """

    dims: int
    sites: int
    t_h: float
    u: float
    c_dd: float
    dipole: tuple[float, float, float] = (0.0, 0.0, 1.0)
    boundary: str = "open"

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise ValidationError("lattice dimension must be 1, 2 or 3")
        if self.sites < 2:
            raise ValidationError("need at least two sites")
        if self.boundary not in ("open", "periodic"):
            raise ValidationError(f"unknown boundary {self.boundary!r}")
        norm = math.sqrt(sum(c * c for c in self.dipole))
        if norm < 1e-12:
            raise ValidationError("dipole orientation must be a nonzero vector")

    def side(self) -> int:
        return max(2, round(self.sites ** (1.0 / self.dims)))

    def coords(self, site: int) -> tuple[int, ...]:
        side = self.side()
        out = []
        for _ in range(self.dims):
            out.append(site % side)
            site //= side
        return tuple(out)

    def bonds(self) -> list[tuple[int, int]]:
        side = self.side()
        out = []
        for s in range(self.sites):
            c = self.coords(s)
            for axis in range(self.dims):
                nb = list(c)
                nb[axis] += 1
                if nb[axis] >= side or self._index(nb) >= self.sites:
                    if self.boundary == "periodic":
                        nb[axis] = 0
                        t = self._index(nb)
                        if t != s and t < self.sites:
                            out.append((min(s, t), max(s, t)))
                    continue
                out.append((s, self._index(nb)))
        return sorted(set(out))

    def _index(self, coords) -> int:
        side = self.side()
        idx = 0
        for c in reversed(coords):
            idx = idx * side + c
        return idx

    def gamma_ij(self, i: int, j: int) -> float:
        ri = np.array(self.coords(i), dtype=float)
        rj = np.array(self.coords(j), dtype=float)
        rij = ri - rj
        dist = float(np.linalg.norm(rij))
        d = np.array(self.dipole, dtype=float)
        d = d[: self.dims] if self.dims < 3 else d
        dn = np.zeros(self.dims)
        dn[:] = np.array(self.dipole[: self.dims])
        nrm = float(np.linalg.norm(np.array(self.dipole)))
        proj = float(np.dot(dn, rij)) / (nrm * dist)
        return (self.c_dd / dist**3) * (1.0 - 3.0 * proj * proj)


def _pauli_product(a: tuple[int, int, complex], b: tuple[int, int, complex]):
    """(X^ax Z^az)(X^bx Z^bz) with the sign from commuting Z past X."""
    ax, az, ac = a
    bx, bz, bc = b
    sign = -1.0 if (az & bx).bit_count() % 2 else 1.0
    return (ax ^ bx, az ^ bz, ac * bc * sign)


def _annihilator(site_qubit: int, chain_below: int) -> list[tuple[int, int, complex]]:
    """JWT image of c: Z-string times X(1+Z)/2 on the site qubit."""
    x = 1 << site_qubit
    return [(x, chain_below, 0.5), (x, chain_below | x, 0.5)]


def _creator(site_qubit: int, chain_below: int) -> list[tuple[int, int, complex]]:
    x = 1 << site_qubit
    return [(x, chain_below, 0.5), (x, chain_below | x, -0.5)]


def dipolar_jwt_hamiltonian(spec: DipolarSpec) -> ModelBuild:
    """Hopping + on-site + dipolar terms on 2N qubits (spin sectors stacked).

    Qubit j holds (site j, spin up) and qubit N+j holds (site j, spin
    down); the Jordan-Wigner strings run within each sector.  Occupation
    follows the n = (1+Z)/2 convention, and the all-identity piece is
    dropped and reported.
    """
    n_sites = spec.sites
    nq = 2 * n_sites
    acc: dict[tuple[int, int], complex] = {}

    def add(x, z, c):
        if abs(c) <= PRUNE_TOL:
            return
        key = (x, z)
        acc[key] = acc.get(key, 0.0) + c

    def add_product(terms_a, terms_b, scale):
        for a in terms_a:
            for b in terms_b:
                x, z, c = _pauli_product(a, b)
                add(x, z, c * scale)

    constant = 0.0
    for sigma in range(2):
        offset = sigma * n_sites
        for (i, j) in spec.bonds():
            chain_i = sum(1 << (offset + k) for k in range(i))
            chain_j = sum(1 << (offset + k) for k in range(j))
            ci_dag = _creator(offset + i, chain_i)
            cj = _annihilator(offset + j, chain_j)
            cj_dag = _creator(offset + j, chain_j)
            ci = _annihilator(offset + i, chain_i)
            add_product(ci_dag, cj, -spec.t_h)
            add_product(cj_dag, ci, -spec.t_h)
    # occupation numbers: n_{j sigma} = (1 + Z)/2 per the JWT convention
    def occupation(site, sigma):
        q = sigma * n_sites + site
        return [(0, 0, 0.5), (0, 1 << q, 0.5)]

    for j in range(n_sites):
        add_product(occupation(j, 0), occupation(j, 1), spec.u)
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            g = spec.gamma_ij(i, j)
            ni = occupation(i, 0) + occupation(i, 1)
            nj = occupation(j, 0) + occupation(j, 1)
            add_product(ni, nj, g)
    constant = float(acc.pop((0, 0), 0.0).real) if (0, 0) in acc else 0.0
    pauli = PauliHamiltonian(
        nq, [PauliTerm(c, x, z) for (x, z), c in acc.items()]
    )
    return ModelBuild(pauli, pmr_decompose(pauli), constant)


def pauli_baseline(h: PauliHamiltonian) -> tuple[int, float]:
    """Merged non-identity term count and the sum of coefficient magnitudes."""
    live = [t for t in h.terms if (t.x_mask, t.z_mask) != (0, 0)]
    return len(live), float(sum(abs(t.coeff) for t in live))


@dataclass
class ResourceReport:
    n: int
    m: int
    gamma: float
    delta_e: float
    r: int
    Q: int
    kappa: int
    per_step_gates: int
    per_step_counts: dict
    cost_proxy: float          # M * Gamma * t
    gate_cost: float           # r * per-step gate total
    baseline_m: int
    baseline_gamma: float
    baseline_proxy: float      # M' * Gamma' * t

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _loglog_slope(ns, ys) -> float:
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ResourceSweep:
    family: str
    geometry: str
    reports: list[ResourceReport]
    slopes: dict

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "geometry": self.geometry,
            "reports": [r.as_dict() for r in self.reports],
            "slopes": self.slopes,
        }


def _build_model(family: str, n: int, geometry: str, params: dict) -> ModelBuild:
    if family == "rydberg":
        maker = rydberg_clustered if geometry == "clustered" else rydberg_chain
        return rydberg_hamiltonian(maker(
            n,
            omega=params.get("omega", 1.0),
            delta=params.get("delta", 0.5),
            c6=params.get("c6", 1.0),
        ))
    if family == "dipolar":
        spec = DipolarSpec(
            dims=params.get("dims", 1), sites=n,
            t_h=params.get("t_h", 1.0), u=params.get("u", 0.5),
            c_dd=params.get("c_dd", 0.3),
            dipole=tuple(params.get("dipole", (0.0, 0.0, 1.0))),
            boundary=params.get("boundary", "periodic"),
        )
        return dipolar_jwt_hamiltonian(spec)
    raise ValidationError(f"unknown model family {family!r}")


def resource_report(family: str, n_list, t: float, eps: float,
                    geometry: str = "chain",
                    params: dict | None = None) -> ResourceSweep:
    """Per-size PMR and baseline costs with fitted log-log slopes.

    The PMR proxy is M*Gamma*t (the quantity the scaling claims are about);
    the gate proxy r * per-step gate count is reported alongside.  Per-step
    gates count one amplified step: three W applications (prepare, select,
    unprepare each) plus the two ancilla reflections.
    """
    if len(n_list) < 4:
        raise ValidationError("need at least four sizes for a slope fit")
    params = dict(params or {})
    reports = []
    for n in n_list:
        build = _build_model(family, int(n), geometry, params)
        h = build.pmr
        p = choose_params(eps, t, h)
        sel = select_gate_counts(h, p, mode="table")
        prep = gate_count(compile_state_prep(p, [tt.gamma for tt in h.terms],
                                             n_system=h.n))
        n_anc = p.Q * (1 + h.m + p.kappa)
        reflection = 2 * n_anc + 1
        per_step = 3 * (2 * prep["total"] + sel["total"]) + 2 * reflection
        m_base, gamma_base = pauli_baseline(build.pauli)
        reports.append(ResourceReport(
            n=int(n), m=h.m, gamma=h.gamma_total, delta_e=h.delta_e,
            r=p.r, Q=p.Q, kappa=p.kappa,
            per_step_gates=per_step, per_step_counts=sel["counts"],
            cost_proxy=h.m * h.gamma_total * t,
            gate_cost=p.r * per_step,
            baseline_m=m_base, baseline_gamma=gamma_base,
            baseline_proxy=m_base * gamma_base * t,
        ))
    ns = [r.n for r in reports]
    slopes = {
        "pmr_cost_proxy": _loglog_slope(ns, [r.cost_proxy for r in reports]),
        "pmr_gate_cost": _loglog_slope(ns, [r.gate_cost for r in reports]),
        "baseline_proxy": _loglog_slope(ns, [r.baseline_proxy for r in reports]),
    }
    return ResourceSweep(family=family, geometry=geometry, reports=reports,
                         slopes=slopes)


def report_table(sweep: ResourceSweep) -> str:
    """Aligned-column text table of a resource sweep."""
    cols = ["n", "m", "gamma", "delta_e", "r", "Q", "kappa",
            "per_step_gates", "cost_proxy", "gate_cost",
            "baseline_m", "baseline_gamma", "baseline_proxy"]
    rows = [[_fmt(getattr(r, c)) for c in cols] for r in sweep.reports]
    widths = [max(len(c), *(len(row[i]) for row in rows))
              for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    for row in rows:
        lines.append("  ".join(v.rjust(w) for v, w in zip(row, widths)))
    lines.append("")
    for k, v in sweep.slopes.items():
        lines.append(f"log-log slope {k}: {v:.4f}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)
