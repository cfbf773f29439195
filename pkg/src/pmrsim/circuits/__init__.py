from .ir import (
    Circuit,
    Gate,
    dense_on_basis_columns,
    fit_linear_model,
    flatten,
    from_text,
    gate_count,
    inverted,
    run_dense,
    run_reversible,
    to_text,
)
from .compile import (
    RegisterLayout,
    build_register_layout,
    compile_alpha_unit,
    compile_diag_phase,
    compile_select,
    compile_state_prep,
)
from .qasm import to_qasm

__all__ = [
    "Circuit", "Gate", "RegisterLayout", "build_register_layout",
    "compile_alpha_unit", "compile_diag_phase", "compile_select",
    "compile_state_prep", "dense_on_basis_columns", "fit_linear_model",
    "flatten", "from_text", "gate_count", "inverted", "run_dense",
    "run_reversible", "to_text", "to_qasm",
]
