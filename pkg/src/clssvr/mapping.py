"""Maps from the half line [0, inf) onto [-1, 1) and the rational basis built on them."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .basis import Kernel, eval_kernel

__all__ = [
    "DomainError",
    "Mapping",
    "MappingKind",
    "RationalBasis",
    "derivatives",
    "eval_rational",
    "forward",
    "inverse",
]


class DomainError(ValueError):
    """Argument outside the domain of a map."""


class MappingKind(enum.Enum):
    ALGEBRAIC = "algebraic"
    EXPONENTIAL = "exponential"
    LOGARITHMIC = "logarithmic"

    @classmethod
    def from_tag(cls, tag):
        try:
            return cls(tag.strip().lower())
        except ValueError:
            valid = ", ".join(repr(k.value) for k in cls)
            raise ValueError(f"unknown mapping tag {tag!r} (expected one of {valid})") from None

    @property
    def tag(self):
        return self.value

    @property
    def formula(self):
        return {
            MappingKind.ALGEBRAIC: "(x-theta)/(x+theta)",
            MappingKind.EXPONENTIAL: "1-2exp(-x/theta)",
            MappingKind.LOGARITHMIC: "2tanh(x/theta)-1",
        }[self]


@dataclass(frozen=True)
class Mapping:
    kind: MappingKind
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.theta) and self.theta > 0):
            raise ValueError(f"length scale theta must be positive, got {self.theta}")


def _as_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise DomainError("mapping argument must satisfy x >= 0")
    return x


def forward(mapping, x):
    """t = phi(x) for x >= 0."""
    x = _as_x(x)
    th = mapping.theta
    kind = mapping.kind
    if kind is MappingKind.ALGEBRAIC:
        with np.errstate(invalid="ignore"):
            t = (x - th) / (x + th)
        return np.where(np.isinf(x), 1.0, t)
    if kind is MappingKind.EXPONENTIAL:
        return 1.0 - 2.0 * np.exp(-x / th)
    return 2.0 * np.tanh(x / th) - 1.0


def inverse(mapping, t):
    """x = phi^{-1}(t) for -1 <= t < 1."""
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < -1.0) or np.any(t >= 1.0):
        raise DomainError("inverse map needs -1 <= t < 1")
    th = mapping.theta
    kind = mapping.kind
    if kind is MappingKind.ALGEBRAIC:
        return th * (1.0 + t) / (1.0 - t)
    if kind is MappingKind.EXPONENTIAL:
        return -th * np.log1p(-0.5 * (1.0 + t))
    # atanh(y) with y = (1 + t)/2, written through 1 - t to stay accurate as t -> 1
    return 0.5 * th * np.log1p(2.0 * (1.0 + t) / (1.0 - t))


def derivatives(mapping, x):
    """First and second x-derivatives of phi."""
    x = _as_x(x)
    th = mapping.theta
    kind = mapping.kind
    if kind is MappingKind.ALGEBRAIC:
        s = x + th
        return 2.0 * th / s**2, -4.0 * th / s**3
    if kind is MappingKind.EXPONENTIAL:
        e = np.exp(-x / th)
        return 2.0 / th * e, -2.0 / th**2 * e
    th_ = np.tanh(x / th)
    q = np.exp(-2.0 * x / th)
    sech2 = 4.0 * q / (1.0 + q) ** 2
    return 2.0 / th * sech2, -4.0 / th**2 * sech2 * th_


@dataclass(frozen=True)
class RationalBasis:
    """The m functions J_i(phi(x)), i = 0..m-1."""

    kernel: Kernel
    mapping: Mapping
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"basis needs m >= 1 functions, got {self.m}")

    def __call__(self, x):
        return eval_rational(self, x)

    def at_infinity(self):
        """Basis values in the limit x -> inf (t = 1)."""
        return eval_kernel(self.kernel, self.m - 1, 1.0, derivatives=0).values.copy()


def eval_rational(basis, x):
    """Values and first two x-derivatives of the rational basis.

    Returns
    -------
    values, d1x, d2x : ndarray
        Shape ``(*x.shape, m)``.
    """
    x = _as_x(x)
    t = forward(basis.mapping, x)
    p1, p2 = derivatives(basis.mapping, x)
    pv = eval_kernel(basis.kernel, basis.m - 1, t, derivatives=2)
    values = pv.values
    d1x = pv.d1 * p1
    d2x = pv.d2 * p1**2 + pv.d1 * p2
    return np.moveaxis(values, 0, -1), np.moveaxis(d1x, 0, -1), np.moveaxis(d2x, 0, -1)
