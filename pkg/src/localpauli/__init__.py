"""Clifford-algebra generator sets, their intertwiners, and frame fields over R^r.

The package is layered bottom-up: :mod:`~localpauli.algebra` (dense Cl(p, q)
arithmetic), :mod:`~localpauli.pauli` (algebraic intertwiners between
generator sets), :mod:`~localpauli.fields` (frame fields, spin connections,
curvature), :mod:`~localpauli.transport` (global solutions ``T(x) = S(x) K``)
and :mod:`~localpauli.cli`.
"""

from .algebra import (
    Multivector,
    Signature,
    blade_product,
    commutator,
    exp,
    geometric_product,
    grade_involute,
    grade_project,
    hermitian_conjugate,
    inverse,
    is_central,
    norm,
    random_multivector,
    reverse,
    trace,
)
from .exceptions import CliffordError
from .fields import (
    ConnectionField,
    CurvatureField,
    FrameField,
    FrameMatrixField,
    Grid,
    MultivectorField,
    curvature,
    field_equation_residual,
    frame_from_matrix,
    gauge_transform,
    hbasis_project,
    mu_coefficient,
    partial_derivative,
    spin_connection_general,
    spin_connection_grade1,
)
from .pauli import (
    Case,
    GeneratorSet,
    IntertwinerResult,
    check_generators,
    intertwiner,
    intertwiner_to_standard,
)
from .transport import (
    TransportResult,
    find_potential,
    solve_global,
    solve_ode_line,
    transport_path_ordered,
    transport_potential,
)

__version__ = "0.1.0"

__all__ = [
    "Case",
    "CliffordError",
    "ConnectionField",
    "CurvatureField",
    "FrameField",
    "FrameMatrixField",
    "GeneratorSet",
    "Grid",
    "IntertwinerResult",
    "Multivector",
    "MultivectorField",
    "Signature",
    "TransportResult",
    "blade_product",
    "check_generators",
    "commutator",
    "curvature",
    "exp",
    "field_equation_residual",
    "find_potential",
    "frame_from_matrix",
    "gauge_transform",
    "geometric_product",
    "grade_involute",
    "grade_project",
    "hbasis_project",
    "hermitian_conjugate",
    "intertwiner",
    "intertwiner_to_standard",
    "inverse",
    "is_central",
    "mu_coefficient",
    "norm",
    "partial_derivative",
    "random_multivector",
    "reverse",
    "solve_global",
    "solve_ode_line",
    "spin_connection_general",
    "spin_connection_grade1",
    "trace",
    "transport_path_ordered",
    "transport_potential",
]
