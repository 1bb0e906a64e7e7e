"""Collocation LS-SVR solver for nonlinear ODEs on [0, inf) with rational Jacobi bases,
plus parallel grid and random search over kernel, mapping and length scale."""

from .basis import CHEBYSHEV, LEGENDRE, Kernel, eval_kernel, gauss_weights, roots
from .hpo import SearchReport, SearchSpace, run_search, sensitivity_sweep
from .mapping import Mapping, MappingKind, RationalBasis, forward, inverse
from .problems import Benchmark, benchmark, kidder_problem, tebeest_umax, volterra_problem
from .solver import Condition, ProblemSpec, Solution, SolverConfig, evaluate, newton_solve

__version__ = "0.1.0"

__all__ = [
    "CHEBYSHEV",
    "LEGENDRE",
    "Benchmark",
    "Condition",
    "Kernel",
    "Mapping",
    "MappingKind",
    "ProblemSpec",
    "RationalBasis",
    "SearchReport",
    "SearchSpace",
    "Solution",
    "SolverConfig",
    "benchmark",
    "eval_kernel",
    "evaluate",
    "forward",
    "gauss_weights",
    "inverse",
    "kidder_problem",
    "newton_solve",
    "roots",
    "run_search",
    "sensitivity_sweep",
    "tebeest_umax",
    "volterra_problem",
]
