"""Total-variation data completion from random samples, with its error bounds."""
from .grid import (
    ParameterError,
    SampleSet,
    clamp_box,
    forward_diff,
    forward_diff_adjoint,
    grad_support,
    masked_mse,
    sample_uniform_subset,
    tv_aniso,
    variance_on,
)
from .phantom import shepp_logan
from .solver import SolverConfig, SolveResult, TVProblem, solve, solve_equality

__all__ = [
    "ParameterError",
    "SampleSet",
    "SolveResult",
    "SolverConfig",
    "TVProblem",
    "clamp_box",
    "forward_diff",
    "forward_diff_adjoint",
    "grad_support",
    "masked_mse",
    "sample_uniform_subset",
    "shepp_logan",
    "solve",
    "solve_equality",
    "tv_aniso",
    "variance_on",
]
