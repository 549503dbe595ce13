"""Feynman-Kac Monte Carlo for matrix-valued Schrodinger semigroups."""

from .errors import (
    ConfigError,
    DiagnosticError,
    DomainError,
    FieldError,
    FkmatError,
    NumericError,
    SampleError,
    SizeError,
    UnsupportedOperationError,
    ValidationError,
)
from .fields import GaugeField, Potential, kato_diagnostic, make_gauge, make_potential, truncated
from .linalg import (
    classify,
    hermitian_eigendecomposition,
    matrix_exp,
    operator_norm,
    truncate_nonnegative,
)
from .paths import DiscretePath, RandomnessSpec, TimeGrid, heat_kernel, reverse, sample_bridge, sample_brownian
from .semigroup import (
    VectorField,
    apply_semigroup,
    kernel,
    kernel_consistency,
    make_vector_field,
    semigroup_domination_check,
    trace_estimate,
)
from .transport import Scheme, adjoint_reversal_check, b_increment, transport, transport_inverse

__version__ = "0.1.0"
