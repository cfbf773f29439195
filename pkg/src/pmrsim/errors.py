"""Exception types shared across the toolkit.

Each class maps to a distinct CLI exit code (see cli.py), so library code
should raise the most specific one that applies.
"""


class PmrsimError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PmrsimError):
    """Malformed input: bad file contents, bad parameters, failed preconditions."""


class NonHermitianError(ValidationError):
    """Hamiltonian input is not Hermitian; carries the offending term description."""


class DenseLimitError(PmrsimError):
    """A dense-matrix operation was requested above the configured qubit limit."""

    def __init__(self, n_qubits: int, limit: int, what: str = "dense operation"):
        self.n_qubits = n_qubits
        self.limit = limit
        super().__init__(
            f"{what} refused: {n_qubits} qubits exceeds the dense limit {limit} "
            f"(raise the limit explicitly if this is intended)"
        )


class BudgetExceededError(PmrsimError):
    """A combinatorial sum would exceed the configured term budget."""

    def __init__(self, count: int, budget: int, what: str = "term sum"):
        self.count = count
        self.budget = budget
        super().__init__(f"{what} refused: {count} terms exceeds budget {budget}")


class ContractViolationError(PmrsimError):
    """An internal invariant that callers must maintain was violated."""


class ConvergenceError(PmrsimError):
    """An iterative method failed to converge; carries the final residual."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class NonBasisGateError(PmrsimError):
    """A basis-state evaluator met a gate that creates superposition."""

    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(
            f"gate {kind!r} is not basis-preserving; use the dense evaluator"
        )
