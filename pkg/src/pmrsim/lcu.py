"""Parameter selection, dense evolution operators, LCU weights, and the
amplified block encoding.

Everything here is desk-scale: operators are dense numpy matrices, built
deterministically (fixed lexicographic term order) so repeated runs are
bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .divdiff import (
    DdInput,
    alpha_coeffs,
    KTuple,
    TERM_BUDGET,
    dd_exp_exact_stack,
    worst_case_closed_forms,
)
from .errors import (
    BudgetExceededError,
    ContractViolationError,
    ConvergenceError,
    DenseLimitError,
    ValidationError,
)
from .paulis import DENSE_LIMIT
from .pmr import PmrHamiltonian, hop_phases
from .select_rules import alpha_membership

LN2 = math.log(2.0)
OAA_QUBIT_LIMIT = 12
ZDEP_TOL = 1e-12


@dataclass(frozen=True)
class SimParams:
    """Per-run approximation parameters.

    dt = t/r with r chosen so Gamma*dt <= ln 2; Q and K are the smallest
    truncation order and subdivision keeping each approximation within
    eps/(2r) per step.
    """

    eps: float
    t: float
    r: int
    dt: float
    Q: int
    K: int
    kappa: int
    mu: float

    def as_dict(self) -> dict:
        return {
            "eps": self.eps, "t": self.t, "r": self.r, "dt": self.dt,
            "Q": self.Q, "K": self.K, "kappa": self.kappa, "mu": self.mu,
        }


def _series_tail(x: float, q_from: int, terms: int = 80) -> float:
    """sum_{q >= q_from} x^q / q! by direct summation (no cancellation)."""
    acc = 0.0
    term = x**q_from / math.factorial(q_from)
    for q in range(q_from, q_from + terms):
        acc += term
        term *= x / (q + 1)
        if term < 1e-30 * max(acc, 1.0):
            break
    return acc


def normalization_constant(gamma_dt: float, Q: int) -> float:
    """s = sum_{q<=Q} (Gamma dt)^q / q!."""
    return sum(gamma_dt**q / math.factorial(q) for q in range(Q + 1))


def _dd_phase_budget(gamma: float, dt: float, de: float, K: int, Q: int) -> float:
    """Exact worst-case phase-sum error summed over kept orders.

    Per order q the divided-difference error is at most the equally spaced
    closed-form defect, so the operator-level error is bounded by
    sum_q Gamma^q |exact_q - ehat_q|.
    """
    if de <= 0:
        return 0.0
    total = 0.0
    for q in range(1, Q + 1):
        exact, ehat, _ = worst_case_closed_forms(q, dt, de, K)
        total += gamma**q * abs(exact - ehat)
    return total


def choose_params(eps: float, t: float, h: PmrHamiltonian) -> SimParams:
    """Select (r, dt, Q, K) per the cost analysis.

    r = ceil(t Gamma / ln 2); Q is the smallest order whose kept-plus-tail
    sum from Q on is within eps/(2r) (this matches the worked convention;
    the dropped tail sum_{q>Q} then satisfies the budget with margin); K is
    the smallest power of two meeting the per-step divided-difference
    budget, then verified a posteriori against the exact worst-case closed
    forms and bumped if the quadratic bound was optimistic.
    """
    if not (0.0 < eps < 1.0):
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    if not t > 0:
        raise ValidationError(f"t must be positive, got {t}")
    gamma = h.gamma_total
    if not gamma > 0:
        raise ValidationError("off-diagonal norm Gamma must be positive")
    r = max(1, math.ceil(t * gamma / LN2))
    dt = t / r
    budget = eps / (2 * r)
    x = gamma * dt
    Q = 0
    while _series_tail(x, Q) > budget:
        Q += 1
        if Q > 400:
            raise ContractViolationError("truncation order did not settle")
    de = h.delta_e
    kappa = 0
    if de > 0:
        while (dt * de) ** 2 / (2 * (1 << kappa) ** 2) > budget:
            kappa += 1
        while _dd_phase_budget(gamma, dt, de, 1 << kappa, Q) > budget:
            kappa += 1
            if kappa > 60:
                raise ContractViolationError("subdivision depth did not settle")
    K = 1 << kappa
    return SimParams(eps=eps, t=t, r=r, dt=dt, Q=Q, K=K, kappa=kappa,
                     mu=de / gamma)


def exact_step_unitary(h: PmrHamiltonian, dt: float,
                       dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Ground-truth e^{-i H dt} via eigendecomposition."""
    from .pmr import pmr_reconstruct

    hm = pmr_reconstruct(h, dense_limit)
    w, v = np.linalg.eigh(hm)
    return (v * np.exp(-1j * dt * w)) @ v.conj().T


def _walk_arrays(h: PmrHamiltonian, iq: tuple[int, ...], energies: np.ndarray,
                 diag_values: list[np.ndarray]):
    """Energy walks, hopping products, and final permutation for one tuple.

    Returns (E, d, z_final): E[z, j] is the energy after the first j hops
    starting from z, d[z] the product of hop amplitudes, z_final the image
    basis states.
    """
    dim = energies.shape[0]
    z = np.arange(dim)
    q = len(iq)
    E = np.empty((dim, q + 1))
    E[:, 0] = energies
    d = np.ones(dim, dtype=complex)
    cum = 0
    for j, i in enumerate(iq):
        cum ^= h.terms[i].x_mask
        zj = z ^ cum
        E[:, j + 1] = energies[zj]
        d *= diag_values[i][zj]
    return E, d, z ^ cum


def build_U_series_exact(h: PmrHamiltonian, dt: float, Q: int,
                         dense_limit: int = DENSE_LIMIT,
                         budget: int = TERM_BUDGET) -> np.ndarray:
    """Partial sum of the off-diagonal series with exact divided differences.

    Isolates the truncation error: the only approximation is cutting the
    series after order Q.
    """
    if h.n > dense_limit:
        raise DenseLimitError(h.n, dense_limit, "series operator")
    m = h.m
    count = sum(m**q for q in range(Q + 1))
    if count > budget:
        raise BudgetExceededError(count, budget, "off-diagonal series")
    dim = 1 << h.n
    energies = h.energies(dense_limit)
    diag_values = [t.diag.values(dense_limit) for t in h.terms]
    out = np.zeros((dim, dim), dtype=complex)
    z = np.arange(dim)
    for q in range(Q + 1):
        for iq in product(range(m), repeat=q):
            E, d, zq = _walk_arrays(h, iq, energies, diag_values)
            dd = dd_exp_exact_stack(E, dt)
            out[zq, z] += d * dd
    return out


def _ehat_stack(E: np.ndarray, tau: float, K: int) -> np.ndarray:
    """Vectorized ehat over rows of E via the composition form.

    For each composition the block-mean sum equals an alpha-weighted input
    sum, so the phase is a single matrix-vector product.
    """
    from itertools import combinations

    q = E.shape[1] - 1
    delta = tau / K
    acc = np.zeros(E.shape[0], dtype=complex)
    for bars in combinations(range(q + K - 1), K - 1):
        cuts = [b - i for i, b in enumerate(bars)]
        bounds = [0, *cuts, q]
        w = np.zeros(q + 1)
        weight = 1.0
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            w[lo : hi + 1] += 1.0 / (hi - lo + 1)
            weight *= math.factorial(hi - lo)
        acc += np.exp(-1j * delta * (E @ w)) / weight
    return (-1j * delta) ** q * acc


def lcu_term_count(m: int, K: int, Q: int) -> int:
    return sum((m * K) ** q for q in range(Q + 1))


def is_z_dependent(h: PmrHamiltonian, tol: float = ZDEP_TOL) -> bool:
    """True when any hopping diagonal deviates from a constant."""
    return any(not t.diag.is_constant(tol) for t in h.terms)


def build_U_tilde(h: PmrHamiltonian, p: SimParams,
                  dense_limit: int = DENSE_LIMIT,
                  budget: int = TERM_BUDGET) -> np.ndarray:
    """The truncated phase-sum evolution operator.

    Identical to build_U_series_exact with every divided difference replaced
    by its ehat approximant; z-dependent hopping diagonals enter through the
    exact per-hop ratio (the two-phase average collapses back to d/Gamma).
    """
    if h.n > dense_limit:
        raise DenseLimitError(h.n, dense_limit, "phase-sum operator")
    count = lcu_term_count(h.m, p.K, p.Q)
    if count > budget:
        raise BudgetExceededError(count, budget, "LCU term sum")
    dim = 1 << h.n
    energies = h.energies(dense_limit)
    diag_values = [t.diag.values(dense_limit) for t in h.terms]
    out = np.zeros((dim, dim), dtype=complex)
    z = np.arange(dim)
    for q in range(p.Q + 1):
        for iq in product(range(h.m), repeat=q):
            E, d, zq = _walk_arrays(h, iq, energies, diag_values)
            eh = _ehat_stack(E, p.dt, p.K)
            out[zq, z] += d * eh
    return out


def build_V(h: PmrHamiltonian, iq: tuple[int, ...], kt: KTuple, dt: float,
            pm: tuple[int, ...] | None = None,
            dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """One branch unitary: hops with alpha-weighted diagonal phases.

    With ``pm`` given (one +1/-1 per hop), each hop also carries its
    two-phase factor e^{i(theta +- phi)} evaluated at the post-hop state;
    that is the z-dependent branch family whose average restores d/Gamma.
    """
    if h.n > dense_limit:
        raise DenseLimitError(h.n, dense_limit, "branch unitary")
    q = len(iq)
    if kt.q != q:
        raise ValidationError(f"index tuple ({q}) and k tuple ({kt.q}) disagree")
    if pm is not None and len(pm) != q:
        raise ValidationError("pm branch tuple must have one sign per hop")
    dim = 1 << h.n
    delta = dt / kt.K
    energies = h.energies(dense_limit)
    alphas = [float(a) for a in alpha_coeffs(kt).alpha]
    z = np.arange(dim)
    phase = np.exp(-1j * delta * alphas[0] * energies).astype(complex)
    cum = 0
    for j, i in enumerate(iq):
        cum ^= h.terms[i].x_mask
        zj = z ^ cum
        phase *= np.exp(-1j * delta * alphas[j + 1] * energies[zj])
        if pm is not None:
            term = h.terms[i]
            tp = np.array([_hop_phase_factor(term, int(w), pm[j]) for w in zj])
            phase *= tp
    out = np.zeros((dim, dim), dtype=complex)
    out[z ^ cum, z] = (-1j) ** q * phase
    return out


def _hop_phase_factor(term, z: int, sign: int) -> complex:
    theta, phi = hop_phases(term, z)
    return complex(np.exp(1j * (theta + sign * phi)))


@dataclass(frozen=True)
class LcuWeights:
    """Nonnegative LCU amplitudes keyed by branch, plus the normalization s.

    Keys are (q, i_tuple, k_tuple) in constant-diagonal mode and
    (q, i_tuple, k_tuple, pm_tuple) when any hopping diagonal is
    z-dependent (the two-phase branch doubling with dt -> dt/2).
    """

    amplitudes: dict
    s: float
    zdep: bool


def lcu_weights(h: PmrHamiltonian, p: SimParams,
                budget: int = TERM_BUDGET) -> LcuWeights:
    zdep = is_z_dependent(h)
    count = lcu_term_count(h.m, p.K, p.Q) * (2**p.Q if zdep else 1)
    if count > budget:
        raise BudgetExceededError(count, budget, "LCU weight enumeration")
    gammas = [t.gamma for t in h.terms]
    s = normalization_constant(h.gamma_total * p.dt, p.Q)
    dt_eff = p.dt / 2 if zdep else p.dt
    amps = {}
    for q in range(p.Q + 1):
        for iq in product(range(h.m), repeat=q):
            gprod = math.prod(gammas[i] for i in iq)
            base = gprod * dt_eff**q / (s * p.K**q * math.factorial(q))
            for kq in product(range(1, p.K + 1), repeat=q):
                if zdep:
                    for pm in product((1, -1), repeat=q):
                        amps[(q, iq, kq, pm)] = math.sqrt(base)
                else:
                    amps[(q, iq, kq)] = math.sqrt(base)
    return LcuWeights(amplitudes=amps, s=s, zdep=zdep)


# --------------------------------------------------------------------------
# Ancilla register layout and the dense LCU/OAA construction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AncillaLayout:
    """Qubit map for the unary/one-hot ancilla state.

    Within the ancilla space: bits [0, Q) hold the unary order register;
    block j of the one-hot index registers occupies [Q + jM, Q + (j+1)M);
    block j of the subdivision registers occupies kappa bits starting at
    Q(1+M) + j*kappa; with z-dependent diagonals one sign qubit per
    repetition follows.  Globally the system occupies the low n bits and
    the ancillas sit above.
    """

    Q: int
    M: int
    kappa: int
    zdep: bool = False

    @property
    def n_ancilla(self) -> int:
        return self.Q * (1 + self.M + self.kappa) + (self.Q if self.zdep else 0)

    def q_bit(self, j: int) -> int:
        return j

    def i_bits(self, j: int) -> range:
        start = self.Q + j * self.M
        return range(start, start + self.M)

    def k_bits(self, j: int) -> range:
        start = self.Q * (1 + self.M) + j * self.kappa
        return range(start, start + self.kappa)

    def pm_bit(self, j: int) -> int:
        return self.Q * (1 + self.M + self.kappa) + j

    def encode(self, q: int, iq: tuple[int, ...], kq: tuple[int, ...],
               pm: tuple[int, ...] | None = None) -> int:
        """Basis index of the ancilla state for one LCU branch."""
        b = (1 << q) - 1
        for j, i in enumerate(iq):
            b |= 1 << (self.Q + j * self.M + i)
        for j, k in enumerate(kq):
            b |= (k - 1) << (self.Q * (1 + self.M) + j * self.kappa)
        if pm is not None:
            for j, sign in enumerate(pm):
                if sign < 0:
                    b |= 1 << self.pm_bit(j)
        return b

    def fields(self, b: int):
        """Raw register contents of an arbitrary ancilla basis state."""
        active = tuple(bool((b >> self.q_bit(j)) & 1) for j in range(self.Q))
        i_sets = tuple(
            tuple(i for i in range(self.M) if (b >> (self.Q + j * self.M + i)) & 1)
            for j in range(self.Q)
        )
        k_vals = tuple(
            (b >> (self.Q * (1 + self.M) + j * self.kappa)) & ((1 << self.kappa) - 1)
            for j in range(self.Q)
        )
        pm = tuple(
            -1 if self.zdep and ((b >> self.pm_bit(j)) & 1) else 1
            for j in range(self.Q)
        )
        return active, i_sets, k_vals, pm


def state_prep_steps(layout: AncillaLayout, gammas: list[float],
                     gamma_dt: float) -> list[tuple]:
    """Abstract rotation program preparing the LCU ancilla state.

    Steps are ('ry', t, angle), ('cry', c, t, angle), ('cnot', c, t),
    ('ch', c, t) over ancilla-local qubit indices; the compiled circuit and
    the dense builder both execute this exact sequence.
    """
    Q, M = layout.Q, layout.M
    w = [gamma_dt**q / math.factorial(q) for q in range(Q + 1)]
    tails = list(np.cumsum(w[::-1])[::-1]) + [0.0]
    steps: list[tuple] = []
    for j in range(Q):
        angle = 2.0 * math.atan2(math.sqrt(max(tails[j + 1], 0.0)), math.sqrt(w[j]))
        if j == 0:
            steps.append(("ry", layout.q_bit(0), angle))
        else:
            steps.append(("cry", layout.q_bit(j - 1), layout.q_bit(j), angle))
    total = sum(gammas)
    rest = list(np.cumsum(gammas[::-1])[::-1])
    for j in range(Q):
        bits = list(layout.i_bits(j))
        steps.append(("cnot", layout.q_bit(j), bits[0]))
        for i in range(1, M):
            angle = 2.0 * math.atan2(math.sqrt(rest[i] / total), math.sqrt(gammas[i - 1] / total))
            steps.append(("cry", bits[i - 1], bits[i], angle))
            steps.append(("cnot", bits[i], bits[i - 1]))
    for j in range(Q):
        for kb in layout.k_bits(j):
            steps.append(("ch", layout.q_bit(j), kb))
    if layout.zdep:
        for j in range(Q):
            steps.append(("ch", layout.q_bit(j), layout.pm_bit(j)))
    return steps


def _apply_step(U: np.ndarray, step: tuple) -> None:
    """Apply one rotation step in place, acting on the row index."""
    dim = U.shape[0]
    idx = np.arange(dim)
    kind = step[0]
    if kind in ("ry", "h"):
        t = step[1]
        rows1 = idx[(idx >> t) & 1 == 1]
        rows0 = rows1 ^ (1 << t)
    else:
        c, t = step[1], step[2]
        sel = ((idx >> c) & 1 == 1) & ((idx >> t) & 1 == 1)
        rows1 = idx[sel]
        rows0 = rows1 ^ (1 << t)
    if kind == "cnot":
        U[[*rows0, *rows1], :] = U[[*rows1, *rows0], :]
        return
    if kind == "ry" or kind == "cry":
        ang = step[-1]
        c_, s_ = math.cos(ang / 2), math.sin(ang / 2)
        a = U[rows0, :].copy()
        b = U[rows1, :].copy()
        U[rows0, :] = c_ * a - s_ * b
        U[rows1, :] = s_ * a + c_ * b
        return
    if kind == "ch" or kind == "h":
        inv = 1.0 / math.sqrt(2.0)
        a = U[rows0, :].copy()
        b = U[rows1, :].copy()
        U[rows0, :] = inv * (a + b)
        U[rows1, :] = inv * (a - b)
        return
    raise ValidationError(f"unknown preparation step {kind!r}")


def dense_prep_unitary(layout: AncillaLayout, gammas: list[float],
                       gamma_dt: float) -> np.ndarray:
    """Dense ancilla-space unitary executing the preparation program."""
    dim = 1 << layout.n_ancilla
    U = np.eye(dim, dtype=complex)
    for step in state_prep_steps(layout, gammas, gamma_dt):
        _apply_step(U, step)
    return U


def select_branch_action(h: PmrHamiltonian, layout: AncillaLayout, b: int,
                         dt: float, energies: np.ndarray):
    """(permutation, phases) of the select network on ancilla basis state b.

    Valid encodings reproduce the branch unitaries; arbitrary patterns
    follow the literal gate rules (multi-hot index bits XOR their masks,
    phases fire only where the unary order bit is set), which is what the
    compiled network does.
    """
    K = 1 << layout.kappa
    delta = dt / K
    active, i_sets, k_vals, pm = layout.fields(b)
    dim = energies.shape[0]
    cur = np.arange(dim)
    a0 = float(alpha_membership(k_vals, active, 0, K))
    phases = np.exp(-1j * delta * a0 * energies).astype(complex)
    for s in range(1, layout.Q + 1):
        for i in i_sets[s - 1]:
            cur = cur ^ h.terms[i].x_mask
            if layout.zdep:
                term = h.terms[i]
                fac = np.array(
                    [_hop_phase_factor(term, int(w), pm[s - 1]) for w in cur]
                )
                phases = phases * fac
        if active[s - 1]:
            a_s = float(alpha_membership(k_vals, active, s, K))
            phases = phases * (-1j) * np.exp(-1j * delta * a_s * energies[cur])
    return cur, phases


def build_oaa_operator(h: PmrHamiltonian, p: SimParams,
                       qubit_limit: int = OAA_QUBIT_LIMIT,
                       budget: int = TERM_BUDGET):
    """Dense W = B† U_C B and its amplified form A = -W R W† R W.

    The joint index is ancilla-major: global = anc * 2^n + sys.  Returns
    (W, A); the top-left system block of W is U_tilde / s.
    """
    zdep = is_z_dependent(h)
    layout = AncillaLayout(Q=p.Q, M=h.m, kappa=p.kappa, zdep=zdep)
    total_qubits = h.n + layout.n_ancilla
    if total_qubits > qubit_limit:
        raise DenseLimitError(total_qubits, qubit_limit, "joint OAA space")
    weights = lcu_weights(h, p, budget)
    dim_a = 1 << layout.n_ancilla
    dim_s = 1 << h.n
    psi0 = np.zeros(dim_a)
    for key, amp in weights.amplitudes.items():
        q, iq, kq = key[0], key[1], key[2]
        pm = key[3] if zdep else None
        psi0[layout.encode(q, iq, kq, pm)] = amp
    B = dense_prep_unitary(layout, [t.gamma for t in h.terms],
                           h.gamma_total * p.dt)
    prep_err = np.linalg.norm(B[:, 0] - psi0)
    if prep_err > 1e-9:
        raise ContractViolationError(
            f"preparation program misses the weight vector by {prep_err:.3e}"
        )
    energies = h.energies()
    dim = dim_a * dim_s
    U_C = np.zeros((dim, dim), dtype=complex)
    z = np.arange(dim_s)
    for b in range(dim_a):
        perm, phases = select_branch_action(h, layout, b, p.dt, energies)
        U_C[b * dim_s + perm, b * dim_s + z] = phases
    Bg = np.kron(B, np.eye(dim_s))
    W = Bg.conj().T @ U_C @ Bg
    R = np.eye(dim, dtype=complex)
    R[:dim_s, :dim_s] -= 2 * np.eye(dim_s)
    A = -W @ R @ W.conj().T @ R @ W
    return W, A


def spectral_distance(a: np.ndarray, b: np.ndarray,
                      dense_dim_limit: int = 1024,
                      tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value of a - b.

    Dense SVD up to dense_dim_limit; deterministic power iteration on the
    Gram matrix above it.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    if d.shape[0] <= dense_dim_limit:
        return float(np.linalg.svd(d, compute_uv=False)[0])
    rng = np.random.default_rng(0)
    v = rng.standard_normal(d.shape[1]) + 1j * rng.standard_normal(d.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = d.conj().T @ (d @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new_sigma = math.sqrt(nw)
        v = w / nw
        if abs(new_sigma - sigma) <= tol * max(1.0, new_sigma):
            return float(new_sigma)
        sigma = new_sigma
    raise ConvergenceError("power iteration did not converge",
                           abs(new_sigma - sigma))


@dataclass
class SimReport:
    params: dict
    per_step_spectral_errors: list
    accumulated_bound: float
    final_norm: float
    zdep: bool

    def as_dict(self) -> dict:
        return {
            "params": self.params,
            "per_step_spectral_errors": self.per_step_spectral_errors,
            "accumulated_bound": self.accumulated_bound,
            "final_norm": self.final_norm,
            "z_dependent_mode": self.zdep,
        }


def simulate(h: PmrHamiltonian, psi0: np.ndarray, eps: float, t: float,
             dense_limit: int = DENSE_LIMIT, budget: int = TERM_BUDGET):
    """Apply the phase-sum step operator r times (dense operator mode)."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (1 << h.n,):
        raise ValidationError(
            f"state has dimension {psi0.shape}, expected {(1 << h.n,)}"
        )
    if t == 0.0:
        report = SimReport(
            params=SimParams(eps=eps, t=0.0, r=0, dt=0.0, Q=0, K=1, kappa=0,
                             mu=0.0).as_dict(),
            per_step_spectral_errors=[], accumulated_bound=0.0,
            final_norm=float(np.linalg.norm(psi0)), zdep=is_z_dependent(h),
        )
        return psi0.copy(), report
    if h.m == 0:
        # Diagonal Hamiltonian: the q=0 term is the whole (exact) evolution.
        params = SimParams(eps=eps, t=t, r=1, dt=t, Q=0, K=1, kappa=0, mu=0.0)
        psi = np.exp(-1j * t * h.energies(dense_limit)) * psi0
        report = SimReport(params=params.as_dict(),
                           per_step_spectral_errors=[0.0],
                           accumulated_bound=0.0,
                           final_norm=float(np.linalg.norm(psi)),
                           zdep=False)
        return psi, report
    try:
        params = choose_params(eps, t, h)
        u_tilde = build_U_tilde(h, params, dense_limit, budget)
    except BudgetExceededError as exc:
        raise BudgetExceededError(
            exc.count, exc.budget,
            "simulation step operator (increase eps or reduce t)"
        ) from exc
    step_err = spectral_distance(u_tilde, exact_step_unitary(h, params.dt,
                                                             dense_limit))
    psi = psi0.copy()
    for _ in range(params.r):
        psi = u_tilde @ psi
    report = SimReport(
        params=params.as_dict(),
        per_step_spectral_errors=[step_err] * params.r,
        accumulated_bound=step_err * params.r,
        final_norm=float(np.linalg.norm(psi)),
        zdep=is_z_dependent(h),
    )
    return psi, report
