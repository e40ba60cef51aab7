"""Trace expansions of pseudodifferential operators on the flat torus."""

from ._core import (
    DomainError,
    Operator,
    ParseError,
    Symbol,
    TestFunction,
    __version__,
    canonical_trace,
    hs_matrix_function,
    lattice_trace,
    matrix_traces,
    mellin_moment,
    normalize_config,
    operator_matrix,
    predict,
    residue,
    run,
    smoothing_trace,
)

__all__ = [
    "DomainError",
    "Operator",
    "ParseError",
    "Symbol",
    "TestFunction",
    "__version__",
    "canonical_trace",
    "hs_matrix_function",
    "lattice_trace",
    "matrix_traces",
    "mellin_moment",
    "normalize_config",
    "operator_matrix",
    "predict",
    "residue",
    "run",
    "smoothing_trace",
]
