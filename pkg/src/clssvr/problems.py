"""Benchmark ODEs on the half line: Volterra's population model and the Kidder equation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.integrate import solve_ivp

from .mapping import DomainError, inverse
from .solver import Condition, ProblemSpec, evaluate

__all__ = [
    "Benchmark",
    "CriterionResult",
    "KIDDER_REFERENCE_SLOPES",
    "KidderParams",
    "VolterraParams",
    "benchmark",
    "find_population_peak",
    "kidder_criterion",
    "kidder_problem",
    "tebeest_umax",
    "volterra_criterion",
    "volterra_problem",
]

# Initial slopes u'(0) of the Kidder equation, keyed by kappa.
KIDDER_REFERENCE_SLOPES = {
    0.1: -1.13900720617830,
    0.3: -1.16294145829591,
    0.5: -1.19179064971942,
    0.9: -1.28188132220336,
}


@dataclass(frozen=True)
class VolterraParams:
    kappa: float
    u0: float = 0.1

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"Volterra kappa must be > 0, got {self.kappa}")
        if not 0 < self.u0 < 1:
            raise ValueError(f"Volterra u0 must lie in (0, 1), got {self.u0}")


@dataclass(frozen=True)
class KidderParams:
    kappa: float

    def __post_init__(self):
        if not 0 < self.kappa < 1:
            raise ValueError(f"Kidder kappa must lie in (0, 1), got {self.kappa}")


@dataclass(frozen=True)
class CriterionResult:
    """Absolute error of a scalar accuracy measure; ``value`` is inf for failed solves."""

    value: float
    reference: float
    achieved: float
    detail: str = ""
    location: float | None = None

    @property
    def failed(self):
        return math.isinf(self.value)

    @classmethod
    def failure(cls, reference, detail):
        return cls(math.inf, reference, math.nan, detail)


# Volterra: kappa u'' = u' - u'^2 - u u'

def _volterra_residual(x, u, du, d2u, kappa):
    return kappa * d2u - du + du * du + u * du


def _volterra_jacobian(x, u, du, d2u, kappa):
    return du, -1.0 + 2.0 * du + u, np.full_like(np.asarray(u, dtype=float), kappa)


def _volterra_hessian(x, u, du, d2u, kappa):
    z = np.zeros_like(np.asarray(u, dtype=float))
    one = z + 1.0
    return ((z, one, z), (one, 2.0 * one, z), (z, z, z))


@dataclass
class _VolterraProfile:
    """Coarse marching solution used only to seed Newton."""

    kappa: float
    u0: float
    x_end: float = 200.0
    rtol: float = 1e-3
    _sol: object = field(default=None, repr=False, compare=False)

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_sol"] = None
        return state

    def _dense(self):
        if self._sol is None:
            k = self.kappa
            self._sol = solve_ivp(
                lambda x, y: (y[1], (y[1] - y[1] ** 2 - y[0] * y[1]) / k),
                (0.0, self.x_end),
                (0.0, self.u0),
                rtol=self.rtol,
                atol=self.rtol * 1e-3,
                dense_output=True,
            ).sol
        return self._sol

    def __call__(self, x):
        x = np.minimum(np.asarray(x, dtype=float), self.x_end)
        return self._dense()(x)[0]


def volterra_problem(params):
    k = params.kappa
    return ProblemSpec(
        name=f"volterra(kappa={k:g})",
        residual=partial(_volterra_residual, kappa=k),
        residual_jacobian=partial(_volterra_jacobian, kappa=k),
        residual_hessian=partial(_volterra_hessian, kappa=k),
        conditions=(Condition(0.0, 0, 0.0), Condition(0.0, 1, params.u0)),
        initial_guess=_VolterraProfile(k, params.u0),
    )


def tebeest_umax(params):
    """Peak population 1 + kappa ln(kappa / (1 + kappa - u0))."""
    arg = params.kappa / (1.0 + params.kappa - params.u0)
    if not arg > 0:
        raise DomainError(f"log argument {arg} is not positive")
    return 1.0 + params.kappa * math.log(arg)


def _golden_max(f, lo, hi, xtol):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def find_population_peak(solution, basis, n_scan=4096, t_max=0.9999, xtol=1e-12):
    """Location and value of the global maximum of u' on [0, inf).

    Dense scan in the mapped variable followed by golden-section refinement
    of the bracket around the best scan point.
    """
    xs = inverse(basis.mapping, np.linspace(-1.0, t_max, n_scan))
    du = evaluate(solution, basis, xs)[1]
    i = int(np.argmax(du))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, n_scan - 1)]

    def f(x):
        return float(evaluate(solution, basis, np.array([x]))[1][0])

    x_best, v_best = _golden_max(f, lo, hi, xtol * max(1.0, xs[i]))
    if du[i] > v_best:
        x_best, v_best = float(xs[i]), float(du[i])
    return x_best, v_best


def volterra_criterion(solution, basis, params):
    """|u_max - max u'|, where u' is the population."""
    ref = tebeest_umax(params)
    if not solution.converged:
        return CriterionResult.failure(ref, "solve did not converge")
    x_peak, peak = find_population_peak(solution, basis)
    if not math.isfinite(peak):
        return CriterionResult.failure(ref, "non-finite population peak")
    return CriterionResult(abs(ref - peak), ref, peak, f"peak of u' at x={x_peak:.17g}", x_peak)


# Kidder: sqrt(1 - kappa u) u'' + 2 x u' = 0 (multiplied through by the root)

def _kidder_residual(x, u, du, d2u, kappa):
    return np.sqrt(1.0 - kappa * u) * d2u + 2.0 * x * du


def _kidder_jacobian(x, u, du, d2u, kappa):
    s = np.sqrt(1.0 - kappa * u)
    return -kappa * d2u / (2.0 * s), 2.0 * np.broadcast_to(x, np.shape(u)), s


def _kidder_hessian(x, u, du, d2u, kappa):
    s = np.sqrt(1.0 - kappa * u)
    z = np.zeros_like(s)
    cross = -kappa / (2.0 * s)
    return ((-(kappa**2) * d2u / (4.0 * s**3), z, cross), (z, z, z), (cross, z, z))


def kidder_problem(params):
    k = params.kappa
    # n = m - 2: the two conditions close the system exactly
    return ProblemSpec(
        name=f"kidder(kappa={k:g})",
        residual=partial(_kidder_residual, kappa=k),
        residual_jacobian=partial(_kidder_jacobian, kappa=k),
        residual_hessian=partial(_kidder_hessian, kappa=k),
        conditions=(Condition(0.0, 0, 1.0), Condition(math.inf, 0, 0.0)),
        collocation_offset=-2,
    )


def kidder_reference_slope(kappa):
    for k, v in KIDDER_REFERENCE_SLOPES.items():
        if math.isclose(k, kappa, rel_tol=0, abs_tol=1e-12):
            return v
    raise KeyError(f"no built-in Kidder reference slope for kappa={kappa}")


def kidder_criterion(solution, basis, params, reference_slope=None):
    """|reference - u'(0)|."""
    ref = kidder_reference_slope(params.kappa) if reference_slope is None else reference_slope
    if not solution.converged:
        return CriterionResult.failure(ref, "solve did not converge")
    slope = float(evaluate(solution, basis, np.array([0.0]))[1][0])
    if not math.isfinite(slope):
        return CriterionResult.failure(ref, "non-finite initial slope")
    return CriterionResult(abs(ref - slope), ref, slope, "u'(0)", 0.0)


@dataclass(frozen=True)
class Benchmark:
    """A problem together with its accuracy criterion; picklable for worker pools."""

    name: str
    kappa: float
    problem: ProblemSpec
    params: object

    @property
    def reference(self):
        if self.name == "volterra":
            return tebeest_umax(self.params)
        return kidder_reference_slope(self.kappa)

    def criterion(self, solution, basis):
        if self.name == "volterra":
            return volterra_criterion(solution, basis, self.params)
        return kidder_criterion(solution, basis, self.params)

    def describe(self):
        return {"problem": self.name, "kappa": self.kappa}


def benchmark(name, kappa):
    name = name.strip().lower()
    if name == "volterra":
        params = VolterraParams(kappa)
        return Benchmark(name, kappa, volterra_problem(params), params)
    if name == "kidder":
        params = KidderParams(kappa)
        kidder_reference_slope(kappa)
        return Benchmark(name, kappa, kidder_problem(params), params)
    raise ValueError(f"unknown problem {name!r} (expected 'volterra' or 'kidder')")
