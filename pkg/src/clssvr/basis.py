"""Jacobi-family polynomials on [-1, 1]: values, derivatives, roots and Gauss rules.

Every evaluator returns a :class:`PolyValues` whose arrays have shape
``(m + 1, *t.shape)``; row ``i`` holds degree ``i``. Derivatives are carried
through the three-term recurrences term by term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CHEBYSHEV",
    "LEGENDRE",
    "JacobiParams",
    "Kernel",
    "NumericalOverflowError",
    "PolyValues",
    "RootFindingError",
    "eval_chebyshev",
    "eval_jacobi",
    "eval_kernel",
    "eval_legendre",
    "gauss_weights",
    "roots",
]


class NumericalOverflowError(ArithmeticError):
    """A recurrence produced a non-finite value."""


class RootFindingError(RuntimeError):
    """Newton iteration for a polynomial root did not converge."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class JacobiParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > -1.0):
            raise ValueError(f"alpha must be > -1, got {self.alpha}")
        if not (self.beta > -1.0):
            raise ValueError(f"beta must be > -1, got {self.beta}")


@dataclass(frozen=True)
class Kernel:
    """Polynomial family used as the basis kernel.

    ``name`` is ``"legendre"``, ``"chebyshev"`` or ``"jacobi"``; only the
    latter reads ``params``.
    """

    name: str
    params: JacobiParams | None = None

    def __post_init__(self):
        if self.name not in ("legendre", "chebyshev", "jacobi"):
            raise ValueError(f"unknown kernel {self.name!r}")
        if self.name == "jacobi" and self.params is None:
            raise ValueError("jacobi kernel needs JacobiParams")

    @classmethod
    def jacobi(cls, alpha, beta):
        return cls("jacobi", JacobiParams(alpha, beta))

    @classmethod
    def from_tag(cls, tag):
        tag = tag.strip().lower()
        if tag == "legendre":
            return LEGENDRE
        if tag == "chebyshev":
            return CHEBYSHEV
        raise ValueError(f"unknown kernel tag {tag!r} (expected 'legendre' or 'chebyshev')")

    @property
    def tag(self):
        return self.name

    def __str__(self):
        if self.name == "jacobi":
            return f"jacobi({self.params.alpha:g},{self.params.beta:g})"
        return self.name


LEGENDRE = Kernel("legendre")
CHEBYSHEV = Kernel("chebyshev")


@dataclass(frozen=True)
class PolyValues:
    values: np.ndarray
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None


def _alloc(m, t, derivatives):
    t = np.asarray(t, dtype=float)
    if m < 0:
        raise ValueError(f"degree count must be >= 0, got {m}")
    shape = (m + 1,) + t.shape
    p = np.zeros(shape)
    d1 = np.zeros(shape) if derivatives >= 1 else None
    d2 = np.zeros(shape) if derivatives >= 2 else None
    return t, p, d1, d2


def _check_finite(p, d1, d2):
    for arr in (p, d1, d2):
        if arr is not None and not np.all(np.isfinite(arr)):
            raise NumericalOverflowError("non-finite value in polynomial recurrence")


def eval_jacobi(params, m, t, derivatives=2):
    """Evaluate J_0..J_m of the Jacobi family (alpha, beta) at ``t``.

    Parameters
    ----------
    params : JacobiParams
    m : int
        Highest degree.
    t : float or ndarray
        Evaluation point(s); nominally in [-1, 1].
    derivatives : int
        Number of t-derivatives to carry (0, 1 or 2).

    Returns
    -------
    PolyValues
    """
    t, p, d1, d2 = _alloc(m, t, derivatives)
    a, b = float(params.alpha), float(params.beta)
    p[0] = 1.0
    if m >= 1:
        p[1] = 0.5 * (a + b + 2.0) * t + 0.5 * (a - b)
        if d1 is not None:
            d1[1] = 0.5 * (a + b + 2.0)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(2, m + 1):
            s = a + b + 2.0 * i
            den = 2.0 * i * (a + b + i) * (s - 2.0)
            # J_i = (c0 + c1 t) J_{i-1} - c2 J_{i-2}
            c0 = (s - 1.0) * (a * a - b * b) / den
            c1 = (s - 1.0) * s * (s - 2.0) / den
            c2 = 2.0 * (a + i - 1.0) * (b + i - 1.0) * s / den
            lin = c0 + c1 * t
            p[i] = lin * p[i - 1] - c2 * p[i - 2]
            if d1 is not None:
                d1[i] = c1 * p[i - 1] + lin * d1[i - 1] - c2 * d1[i - 2]
            if d2 is not None:
                d2[i] = 2.0 * c1 * d1[i - 1] + lin * d2[i - 1] - c2 * d2[i - 2]
    _check_finite(p, d1, d2)
    return PolyValues(p, d1, d2)


def eval_legendre(m, t, derivatives=2):
    """Legendre polynomials P_0..P_m via (n+1)P_{n+1} = (2n+1)tP_n - nP_{n-1}."""
    t, p, d1, d2 = _alloc(m, t, derivatives)
    p[0] = 1.0
    if m >= 1:
        p[1] = t
        if d1 is not None:
            d1[1] = 1.0
    for n in range(1, m):
        k0 = (2.0 * n + 1.0) / (n + 1.0)
        k1 = n / (n + 1.0)
        p[n + 1] = k0 * t * p[n] - k1 * p[n - 1]
        if d1 is not None:
            d1[n + 1] = k0 * (p[n] + t * d1[n]) - k1 * d1[n - 1]
        if d2 is not None:
            d2[n + 1] = k0 * (2.0 * d1[n] + t * d2[n]) - k1 * d2[n - 1]
    _check_finite(p, d1, d2)
    return PolyValues(p, d1, d2)


def eval_chebyshev(m, t, derivatives=2):
    """Chebyshev polynomials T_0..T_m via T_{n+1} = 2tT_n - T_{n-1}."""
    t, p, d1, d2 = _alloc(m, t, derivatives)
    p[0] = 1.0
    if m >= 1:
        p[1] = t
        if d1 is not None:
            d1[1] = 1.0
    for n in range(1, m):
        p[n + 1] = 2.0 * t * p[n] - p[n - 1]
        if d1 is not None:
            d1[n + 1] = 2.0 * (p[n] + t * d1[n]) - d1[n - 1]
        if d2 is not None:
            d2[n + 1] = 2.0 * (2.0 * d1[n] + t * d2[n]) - d2[n - 1]
    _check_finite(p, d1, d2)
    return PolyValues(p, d1, d2)


def eval_kernel(kernel, m, t, derivatives=2):
    """Dispatch to the evaluator of ``kernel``."""
    if kernel.name == "legendre":
        return eval_legendre(m, t, derivatives)
    if kernel.name == "chebyshev":
        return eval_chebyshev(m, t, derivatives)
    return eval_jacobi(kernel.params, m, t, derivatives)


def _legendre_roots(n, tol=1e-14, max_iter=100):
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        pv = eval_legendre(n, x[active], derivatives=1)
        dx = pv.values[n] / pv.d1[n]
        x[active] -= dx
        done = np.abs(dx) <= tol * np.maximum(1.0, np.abs(x[active]))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    else:
        bad = int(np.flatnonzero(active)[0])
        raise RootFindingError(
            f"Legendre root {bad} of degree {n} did not converge in {max_iter} iterations",
            bad,
        )
    return np.sort(x)


def roots(kernel, n):
    """The ``n`` roots of the degree-``n`` polynomial of ``kernel``, ascending."""
    if n < 1:
        raise ValueError(f"root count must be >= 1, got {n}")
    if kernel.name == "chebyshev":
        k = np.arange(n, 0, -1)
        x = np.cos((2.0 * k - 1.0) * np.pi / (2.0 * n))
        # exact symmetry and an exact zero for odd n
        x = 0.5 * (x - x[::-1])
        return x
    if kernel.name == "legendre":
        x = _legendre_roots(n)
        return 0.5 * (x - x[::-1])
    raise NotImplementedError("roots are only provided for legendre and chebyshev kernels")


def gauss_weights(kernel, n):
    """Gauss rule with ``n`` nodes for the weight function of ``kernel``.

    Legendre uses weight 1, Chebyshev uses (1 - t^2)^(-1/2).

    Returns
    -------
    nodes, weights : ndarray
    """
    x = roots(kernel, n)
    if kernel.name == "chebyshev":
        return x, np.full(n, np.pi / n)
    d = eval_legendre(n, x, derivatives=1).d1[n]
    return x, 2.0 / ((1.0 - x * x) * d * d)
