"""Grid and random search over (kernel, mapping, theta), run on a process pool."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .basis import CHEBYSHEV, LEGENDRE
from .mapping import Mapping, MappingKind, RationalBasis
from .problems import CriterionResult
from .solver import SolverConfig, newton_solve

__all__ = [
    "SearchReport",
    "SearchSpace",
    "SweepPoint",
    "TrialConfig",
    "TrialResult",
    "cartesian_product",
    "default_theta_grid",
    "run_search",
    "run_trial",
    "sample_configs",
    "sensitivity_sweep",
]

_KERNEL_RANK = {"legendre": 0, "chebyshev": 1, "jacobi": 2}
_MAPPING_RANK = {k: i for i, k in enumerate(MappingKind)}


def default_theta_grid(n=100, step_den=10):
    """theta = k/10 for k = 1..100, each value rounded once."""
    return tuple(k / step_den for k in range(1, n + 1))


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    mode: str = "grid"
    kernels: tuple = (LEGENDRE, CHEBYSHEV)
    mappings: tuple = tuple(MappingKind)
    theta_grid: tuple = default_theta_grid()
    theta_range: tuple = (0.0, 10.0)
    budget: int = 600
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("grid", "random"):
            raise ConfigurationError(f"unknown search mode {self.mode!r}")
        lo, hi = self.theta_range
        if not (0 <= lo < hi and math.isfinite(hi)):
            raise ConfigurationError(f"bad theta range {self.theta_range}")
        if self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")

    @classmethod
    def grid(cls, kernels=None, mappings=None, theta_grid=None):
        return cls(
            mode="grid",
            kernels=tuple(kernels) if kernels is not None else (LEGENDRE, CHEBYSHEV),
            mappings=tuple(mappings) if mappings is not None else tuple(MappingKind),
            theta_grid=tuple(float(t) for t in theta_grid) if theta_grid is not None else default_theta_grid(),
        )

    @classmethod
    def random(cls, kernels=None, mappings=None, theta_range=(0.0, 10.0), budget=600, seed=0):
        return cls(
            mode="random",
            kernels=tuple(kernels) if kernels is not None else (LEGENDRE, CHEBYSHEV),
            mappings=tuple(mappings) if mappings is not None else tuple(MappingKind),
            theta_range=tuple(float(t) for t in theta_range),
            budget=int(budget),
            seed=int(seed),
        )

    def ordered_kernels(self):
        return sorted(set(self.kernels), key=lambda k: (_KERNEL_RANK[k.name], str(k)))

    def ordered_mappings(self):
        return sorted(set(self.mappings), key=_MAPPING_RANK.__getitem__)

    def describe(self):
        out = {
            "mode": self.mode,
            "kernels": [str(k) for k in self.ordered_kernels()],
            "mappings": [m.value for m in self.ordered_mappings()],
        }
        if self.mode == "grid":
            out["theta_grid"] = list(self.theta_grid)
        else:
            out.update(theta_range=list(self.theta_range), budget=self.budget, seed=self.seed,
                       generator="numpy PCG64")
        return out


@dataclass(frozen=True)
class TrialConfig:
    index: int
    kernel: object
    mapping: MappingKind
    theta: float


@dataclass(frozen=True)
class TrialResult:
    config: TrialConfig
    criterion: CriterionResult
    converged: bool
    iterations: int
    residual_norm: float
    wall_time: float
    error: str | None = None

    @property
    def failed(self):
        return self.criterion.failed

    @property
    def solve_diagnostics(self):
        return self.converged, self.iterations, self.residual_norm


@dataclass(frozen=True)
class SearchReport:
    trials: tuple
    best: TrialResult
    space: SearchSpace
    problem: dict


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    value: float
    converged: bool

    @property
    def failed(self):
        return math.isinf(self.value)


def cartesian_product(space):
    """All grid configurations, kernel-major, then mapping, then ascending theta."""
    if space.mode != "grid":
        raise ConfigurationError("cartesian_product needs a grid-mode space")
    kernels, mappings = space.ordered_kernels(), space.ordered_mappings()
    thetas = sorted(set(float(t) for t in space.theta_grid))
    for name, axis in (("kernels", kernels), ("mappings", mappings), ("theta_grid", thetas)):
        if not axis:
            raise ConfigurationError(f"search axis {name} is empty")
    if thetas[0] <= 0:
        raise ConfigurationError("theta grid values must be positive")
    out = []
    for k in kernels:
        for mk in mappings:
            for th in thetas:
                out.append(TrialConfig(len(out), k, mk, th))
    return out


def sample_configs(space):
    """``budget`` configurations from a PCG64 stream seeded with ``space.seed``.

    Per trial the draws are, in order: kernel index, mapping index, and a
    uniform theta in (low, high].
    """
    if space.mode != "random":
        raise ConfigurationError("sample_configs needs a random-mode space")
    if space.budget <= 0:
        raise ConfigurationError("random search budget must be positive")
    kernels, mappings = space.ordered_kernels(), space.ordered_mappings()
    if not kernels or not mappings:
        raise ConfigurationError("kernel and mapping sets must be non-empty")
    lo, hi = space.theta_range
    rng = np.random.Generator(np.random.PCG64(space.seed))
    out = []
    for i in range(space.budget):
        k = kernels[int(rng.integers(len(kernels)))]
        mk = mappings[int(rng.integers(len(mappings)))]
        th = lo + (hi - lo) * (1.0 - rng.random())
        out.append(TrialConfig(i, k, mk, float(th)))
    return out


def run_trial(config, benchmark, m, solver_config):
    """Solve one configuration; any failure becomes the inf-criterion sentinel."""
    t0 = time.perf_counter()
    converged, iterations, residual = False, 0, math.inf
    error = None
    try:
        basis = RationalBasis(config.kernel, Mapping(config.mapping, config.theta), m)
        sol = newton_solve(benchmark.problem, basis, solver_config)
        converged, iterations, residual = sol.converged, sol.newton_iterations, sol.final_residual_norm
        crit = benchmark.criterion(sol, basis)
    except Exception as exc:  # a failed trial must not abort the search
        error = f"{type(exc).__name__}: {exc}"
        try:
            ref = benchmark.reference
        except Exception:
            ref = math.nan
        crit = CriterionResult.failure(ref, error)
    return TrialResult(config, crit, converged, iterations, residual, time.perf_counter() - t0, error)


def _best(trials):
    return min(trials, key=lambda r: (r.criterion.value, r.config.index))


def _execute(configs, benchmark, m, solver_config, workers):
    fn = partial(run_trial, benchmark=benchmark, m=m, solver_config=solver_config)
    if workers <= 1 or len(configs) <= 1:
        return [fn(c) for c in configs]
    slots = [None] * len(configs)
    chunk = max(1, len(configs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for cfg, res in zip(configs, pool.map(fn, configs, chunksize=chunk)):
            slots[cfg.index] = res
    return slots


def run_search(space, benchmark, m, solver_config=None, workers=1):
    """Evaluate every configuration of ``space`` and pick the lowest criterion.

    Results are stored by trial index, so the report does not depend on the
    order in which workers finish. Ties go to the lowest index.
    """
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    solver_config = solver_config or SolverConfig()
    configs = cartesian_product(space) if space.mode == "grid" else sample_configs(space)
    if not configs:
        raise ConfigurationError("search space produced no trials")
    trials = _execute(configs, benchmark, m, solver_config, workers)
    return SearchReport(tuple(trials), _best(trials), space, benchmark.describe())


def sensitivity_sweep(kernel, mapping, thetas, benchmark, m, solver_config=None, workers=1):
    """Criterion as a function of theta with kernel and mapping fixed."""
    thetas = [float(t) for t in thetas]
    if any(t <= 0 for t in thetas) or thetas != sorted(thetas):
        raise ConfigurationError("sweep thetas must be positive and ascending")
    solver_config = solver_config or SolverConfig()
    configs = [TrialConfig(i, kernel, mapping, t) for i, t in enumerate(thetas)]
    trials = _execute(configs, benchmark, m, solver_config, workers)
    return [SweepPoint(r.config.theta, r.criterion.value, r.converged) for r in trials]


def default_workers():
    return max(1, os.cpu_count() or 1)
