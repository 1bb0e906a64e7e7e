"""Collocation least-squares SVR: the KKT system of the primal problem and its Newton solve.

The model is ``u(x) = sum_i w_i J_i(phi(x)) + b``. Collocated operator
residuals are tied to slack variables ``e`` (penalised by ``gamma/2 |e|^2``)
and point conditions are imposed exactly through multipliers ``beta``.

Newton runs on the KKT system written in the multipliers ``alpha/gamma`` and
``beta/gamma`` with the stationarity rows for ``w, b, e`` divided by
``gamma``. That is a diagonal rescaling of rows and columns, so the Newton
steps are unchanged, but the residual norm used for the line search and the
convergence test no longer carries entries of size ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .mapping import RationalBasis, eval_rational, inverse
from .basis import roots

__all__ = [
    "Condition",
    "EvaluationError",
    "KKTState",
    "ProblemSpec",
    "Solution",
    "SolverConfig",
    "StepFailure",
    "collocation_grid",
    "evaluate",
    "kkt_residual",
    "lagrangian",
    "newton_solve",
]


class EvaluationError(ArithmeticError):
    """The operator residual is not finite at a collocation node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class StepFailure(ArithmeticError):
    """The Newton matrix is singular or produced a non-finite step."""


@dataclass(frozen=True)
class Condition:
    """``u^(order)(point) = value``; ``point`` may be ``math.inf`` (order 0 only)."""

    point: float
    order: int = 0
    value: float = 0.0

    def __post_init__(self):
        if self.order not in (0, 1):
            raise ValueError(f"condition derivative order must be 0 or 1, got {self.order}")
        if math.isinf(self.point):
            if self.point < 0:
                raise ValueError("condition point must be >= 0")
            if self.order != 0:
                raise ValueError("conditions at infinity must have order 0")
        elif not self.point >= 0:
            raise ValueError(f"condition point must be >= 0, got {self.point}")


@dataclass(frozen=True)
class ProblemSpec:
    """A nonlinear ODE ``r(x, u, u', u'') = 0`` on [0, inf) with point conditions.

    ``residual_jacobian`` returns the partials of ``r`` with respect to
    ``(u, u', u'')``; ``residual_hessian`` (optional) returns the symmetric
    3x3 nesting of second partials. Without it the solver differences the
    jacobian. ``initial_guess`` (optional) maps x to a rough profile of u
    that seeds Newton; ``collocation_offset`` sets the default node count
    to ``m + collocation_offset``.
    """

    name: str
    residual: Callable
    residual_jacobian: Callable
    conditions: tuple
    residual_hessian: Callable | None = None
    initial_guess: Callable | None = None
    collocation_offset: int = 0


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 1e10
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    damping: float = 0.5
    min_step: float = 2.0**-30
    n_collocation: int | None = None
    jacobian: str = "analytic"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be > 0")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if self.newton_max_iter < 0:
            raise ValueError("newton_max_iter must be >= 0")
        if self.n_collocation is not None and self.n_collocation < 1:
            raise ValueError("n_collocation must be >= 1")
        if self.jacobian not in ("analytic", "fd"):
            raise ValueError("jacobian must be 'analytic' or 'fd'")

    def collocation_count(self, problem, m):
        if self.n_collocation is not None:
            return self.n_collocation
        n = m + problem.collocation_offset
        if n < 1:
            raise ValueError(f"basis size m={m} leaves no collocation nodes for {problem.name}")
        return n


@dataclass(frozen=True)
class KKTState:
    w: np.ndarray
    b: float
    e: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def flat(self):
        return np.concatenate([self.w, [self.b], self.e, self.alpha, self.beta])

    @classmethod
    def from_flat(cls, z, m, n, d):
        z = np.asarray(z, dtype=float)
        if z.shape != (m + 1 + 2 * n + d,):
            raise ValueError(f"state vector has shape {z.shape}, expected ({m + 1 + 2 * n + d},)")
        return cls(z[:m], float(z[m]), z[m + 1 : m + 1 + n], z[m + 1 + n : m + 1 + 2 * n], z[m + 1 + 2 * n :])


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Solution:
    weights: np.ndarray
    bias: float
    slack: np.ndarray
    duals_alpha: np.ndarray
    duals_beta: np.ndarray
    converged: bool
    final_residual_norm: float
    newton_iterations: int
    nodes: np.ndarray
    residual_history: tuple = field(default=())

    def __call__(self, basis, x):
        return evaluate(self, basis, x)


def collocation_grid(basis, n):
    """Roots of the kernel's degree-n polynomial pulled back to [0, inf)."""
    return inverse(basis.mapping, roots(basis.kernel, n))


def _condition_row(basis, cond):
    if math.isinf(cond.point):
        return np.append(basis.at_infinity(), 1.0)
    v, d1, _ = eval_rational(basis, np.array([cond.point]))
    if cond.order == 0:
        return np.append(v[0], 1.0)
    return np.append(d1[0], 0.0)


def _fd_hessian(jac, x, u, du, d2u, h=1e-7):
    args = [u, du, d2u]
    cols = []
    for j in range(3):
        step = h * np.maximum(1.0, np.abs(args[j]))
        plus = list(args)
        minus = list(args)
        plus[j] = args[j] + step
        minus[j] = args[j] - step
        jp, jm = jac(x, *plus), jac(x, *minus)
        cols.append([(np.asarray(jp[i]) - np.asarray(jm[i])) / (2 * step) for i in range(3)])
    # cols[j][i] = d(r_i)/d(arg_j)
    return [[0.5 * (cols[j][i] + cols[i][j]) for j in range(3)] for i in range(3)]


class _KKTSystem:
    """Collocation matrices and residual/jacobian evaluation for one solve."""

    def __init__(self, problem, basis, config, nodes=None):
        self.problem = problem
        self.basis = basis
        self.config = config
        m = basis.m
        if nodes is None:
            nodes = collocation_grid(basis, config.collocation_count(problem, m))
        self.nodes = np.asarray(nodes, dtype=float)
        n = self.nodes.size
        v, d1, d2 = eval_rational(basis, self.nodes)
        self.V = np.hstack([v, np.ones((n, 1))])
        self.D1 = np.hstack([d1, np.zeros((n, 1))])
        self.D2 = np.hstack([d2, np.zeros((n, 1))])
        self.C = np.array([_condition_row(basis, c) for c in problem.conditions]).reshape(-1, m + 1)
        self.u_cond = np.array([c.value for c in problem.conditions], dtype=float)
        self.m, self.n, self.d = m, n, len(problem.conditions)
        self.P = np.ones(m + 1)
        self.P[-1] = 0.0
        self.size = m + 1 + 2 * n + self.d
        N = m + 1
        self.sl_theta = slice(0, N)
        self.sl_e = slice(N, N + n)
        self.sl_a = slice(N + n, N + 2 * n)
        self.sl_b = slice(N + 2 * n, self.size)

    def split(self, z):
        return z[self.sl_theta], z[self.sl_e], z[self.sl_a], z[self.sl_b]

    def operator(self, theta, strict=True):
        u, du, d2u = self.V @ theta, self.D1 @ theta, self.D2 @ theta
        with np.errstate(all="ignore"):
            r = np.asarray(self.problem.residual(self.nodes, u, du, d2u), dtype=float)
        r = np.broadcast_to(r, u.shape)
        if strict and not np.all(np.isfinite(r)):
            k = int(np.flatnonzero(~np.isfinite(r))[0])
            raise EvaluationError(
                f"{self.problem.name}: non-finite residual at node x={self.nodes[k]:.17g}",
                node=float(self.nodes[k]),
            )
        return u, du, d2u, r

    def operator_gradient(self, u, du, d2u):
        with np.errstate(all="ignore"):
            ju, jd, jdd = self.problem.residual_jacobian(self.nodes, u, du, d2u)
        ju, jd, jdd = (np.broadcast_to(np.asarray(j, dtype=float), u.shape) for j in (ju, jd, jdd))
        return ju[:, None] * self.V + jd[:, None] * self.D1 + jdd[:, None] * self.D2

    def lagrangian(self, z):
        theta, e, a, b = self.split(z)
        *_, r = self.operator(theta)
        w = theta[:-1]
        g = self.config.gamma
        return 0.5 * w @ w + 0.5 * g * e @ e - a @ (r - e) - b @ (self.C @ theta - self.u_cond)

    def raw_residual(self, z):
        theta, e, a, b = self.split(z)
        u, du, d2u, r = self.operator(theta)
        A = self.operator_gradient(u, du, d2u)
        return np.concatenate([
            self.P * theta - A.T @ a - self.C.T @ b,
            self.config.gamma * e + a,
            e - r,
            self.u_cond - self.C @ theta,
        ])

    def scaled_residual(self, y, strict=True):
        theta, e, a, b = self.split(y)
        u, du, d2u, r = self.operator(theta, strict=strict)
        A = self.operator_gradient(u, du, d2u)
        return np.concatenate([
            self.P * theta / self.config.gamma - A.T @ a - self.C.T @ b,
            e + a,
            e - r,
            self.u_cond - self.C @ theta,
        ])

    def scaled_jacobian(self, y):
        if self.config.jacobian == "fd":
            return self._fd_jacobian(y)
        theta, e, a, b = self.split(y)
        u, du, d2u, _ = self.operator(theta)
        A = self.operator_gradient(u, du, d2u)
        if self.problem.residual_hessian is not None:
            with np.errstate(all="ignore"):
                H = self.problem.residual_hessian(self.nodes, u, du, d2u)
        else:
            H = _fd_hessian(self.problem.residual_jacobian, self.nodes, u, du, d2u)
        B = (self.V, self.D1, self.D2)
        N = self.m + 1
        curv = np.zeros((N, N))
        for i in range(3):
            for j in range(3):
                hij = np.broadcast_to(np.asarray(H[i][j], dtype=float), u.shape)
                if np.any(hij):
                    curv += (B[i] * (a * hij)[:, None]).T @ B[j]
        n = self.n
        K = np.zeros((self.size, self.size))
        st, se, sa, sb = self.sl_theta, self.sl_e, self.sl_a, self.sl_b
        K[st, st] = np.diag(self.P / self.config.gamma) - curv
        K[st, sa] = -A.T
        K[st, sb] = -self.C.T
        K[se, se] = np.eye(n)
        K[se, sa] = np.eye(n)
        K[sa, st] = -A
        K[sa, se] = np.eye(n)
        K[sb, st] = -self.C
        return K

    def _fd_jacobian(self, y, h=1e-7):
        f0 = self.scaled_residual(y)
        K = np.empty((f0.size, y.size))
        for j in range(y.size):
            step = h * max(1.0, abs(y[j]))
            yp = y.copy()
            yp[j] += step
            K[:, j] = (self.scaled_residual(yp) - f0) / step
        return K

    def seed(self):
        theta = np.linalg.lstsq(self.C, self.u_cond, rcond=None)[0] if self.d else np.zeros(self.m + 1)
        guess = self.problem.initial_guess
        if guess is not None:
            target = np.asarray(guess(self.nodes), dtype=float)
            N = self.m + 1
            G = self.V.T @ self.V
            G[np.diag_indices(N)] += 1e-12 * np.trace(G) / N
            K = np.block([[G, self.C.T], [self.C, np.zeros((self.d, self.d))]])
            rhs = np.concatenate([self.V.T @ target, self.u_cond])
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            if np.all(np.isfinite(sol)):
                theta = sol[:N]
        y = np.zeros(self.size)
        y[self.sl_theta] = theta
        return y

    def to_state(self, y):
        theta, e, a, b = self.split(y)
        g = self.config.gamma
        return KKTState(theta[:-1].copy(), float(theta[-1]), e.copy(), g * a, g * b)


def kkt_residual(problem, basis, config, state, nodes=None):
    """Gradient of the Lagrangian with respect to (w, b, e, alpha, beta).

    ``state`` is a :class:`KKTState` or its flat vector.
    """
    system = _KKTSystem(problem, basis, config, nodes)
    z = state.flat() if isinstance(state, KKTState) else np.asarray(state, dtype=float)
    KKTState.from_flat(z, system.m, system.n, system.d)
    return system.raw_residual(z)


def lagrangian(problem, basis, config, state, nodes=None):
    system = _KKTSystem(problem, basis, config, nodes)
    z = state.flat() if isinstance(state, KKTState) else np.asarray(state, dtype=float)
    return system.lagrangian(z)


def newton_solve(problem, basis, config=None, nodes=None):
    """Drive the KKT system to stationarity with backtracking Newton.

    Returns a :class:`Solution` whether or not the tolerance was met; raises
    :class:`StepFailure` on a singular Newton matrix and
    :class:`EvaluationError` if the starting point is not evaluable.
    """
    config = config or SolverConfig()
    system = _KKTSystem(problem, basis, config, nodes)
    y = system.seed()
    g = system.scaled_residual(y)
    norm = float(np.linalg.norm(g))
    history = [norm]
    iterations = 0
    while norm > config.newton_tol and iterations < config.newton_max_iter:
        K = system.scaled_jacobian(y)
        try:
            with np.errstate(all="ignore"):
                lu = scipy.linalg.lu_factor(K, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise StepFailure(f"Newton matrix could not be factored: {exc}") from exc
        if np.any(np.diag(lu[0]) == 0.0):
            raise StepFailure("singular Newton matrix")
        step = scipy.linalg.lu_solve(lu, -g)
        if not np.all(np.isfinite(step)):
            raise StepFailure("non-finite Newton step")
        s = 1.0
        accepted = False
        while s >= config.min_step:
            trial = y + s * step
            g_trial = system.scaled_residual(trial, strict=False)
            n_trial = float(np.linalg.norm(g_trial))
            if np.isfinite(n_trial) and n_trial < norm:
                accepted = True
                break
            s *= config.damping
        if not accepted:
            break
        y, g, norm = trial, g_trial, n_trial
        history.append(norm)
        iterations += 1
    state = system.to_state(y)
    return Solution(
        weights=_frozen(state.w),
        bias=state.b,
        slack=_frozen(state.e),
        duals_alpha=_frozen(state.alpha),
        duals_beta=_frozen(state.beta),
        converged=bool(norm <= config.newton_tol),
        final_residual_norm=norm,
        newton_iterations=iterations,
        nodes=_frozen(system.nodes),
        residual_history=tuple(history),
    )


def evaluate(solution, basis, x):
    """u, u', u'' of the learned model at ``x``."""
    v, d1, d2 = eval_rational(basis, x)
    w = solution.weights
    return v @ w + solution.bias, d1 @ w, d2 @ w
