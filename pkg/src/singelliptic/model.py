"""Problem instance and the model operator.

The operator is ``a(x, t, xi) = b(|t|) |xi|^(p-2) xi`` with the degenerate
coercivity ``b(t) = alpha / (1 + t)^(theta (p-1))`` and the singular source
``f(x) h(u)``, ``h(s) = C / s^gamma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

SOURCE_KINDS = ("constant", "radial_power", "tabulated", "callable")

# stand-in exponent for bounded (m = inf) data inside closed-form bounds
M_INFINITY_SURROGATE = 1.0e6


@dataclass(frozen=True)
class SourceSpec:
    """Nonnegative datum ``f`` together with the Lebesgue exponent it is claimed in.

    ``constant`` uses ``value``; ``radial_power`` is ``value * |x - center|^(-exponent)``;
    ``tabulated`` carries samples on a regular grid (``grid`` axes and ``samples``)
    interpolated piecewise linearly; ``callable`` wraps a vectorized function and is
    only available programmatically.
    """

    kind: str = "constant"
    value: float = 1.0
    exponent: float = 0.0
    center: Optional[tuple[float, ...]] = None
    m: float = math.inf
    grid: Optional[tuple[np.ndarray, ...]] = field(default=None, compare=False)
    samples: Optional[np.ndarray] = field(default=None, compare=False)
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ConfigurationError(f"unknown source kind {self.kind!r}")
        if not self.m >= 1:
            raise ConfigurationError("source exponent m must be >= 1")
        if self.kind in ("constant", "radial_power") and not (
            math.isfinite(self.value) and self.value >= 0
        ):
            raise ConfigurationError("source value must be finite and nonnegative")
        if self.kind == "radial_power" and self.exponent < 0:
            raise ConfigurationError("radial_power exponent must be nonnegative")
        if self.kind == "tabulated":
            if self.grid is None or self.samples is None:
                raise ConfigurationError("tabulated source needs grid and samples")
            if np.any(np.asarray(self.samples) < 0):
                raise ConfigurationError("tabulated source has negative samples")
        if self.kind == "callable" and self.func is None:
            raise ConfigurationError("callable source needs func")

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray], m: float = math.inf):
        return cls(kind="callable", func=func, m=m)

    @property
    def is_zero(self) -> bool:
        if self.kind in ("constant", "radial_power"):
            return self.value == 0.0
        if self.kind == "tabulated":
            return not np.any(self.samples)
        return False

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate ``f`` at points ``x`` of shape (npts, dim)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        npts, dim = x.shape
        if self.kind == "constant":
            return np.full(npts, self.value)
        if self.kind == "radial_power":
            center = np.zeros(dim) if self.center is None else np.asarray(self.center)
            r = np.linalg.norm(x - center, axis=1)
            with np.errstate(divide="ignore"):
                out = self.value * r ** (-self.exponent)
            if self.exponent == 0:
                out = np.full(npts, self.value)
            return out
        if self.kind == "tabulated":
            from scipy.interpolate import RegularGridInterpolator

            interp = RegularGridInterpolator(
                self.grid, self.samples, method="linear", bounds_error=False, fill_value=None
            )
            return np.maximum(interp(x), 0.0)
        out = np.asarray(self.func(x), dtype=float).reshape(npts)
        if np.any(out < 0):
            raise DomainError("callable source returned negative values")
        return out


@dataclass(frozen=True)
class ProblemSpec:
    """Parameters of ``-div(b(|u|)|grad u|^(p-2) grad u) = f h(u)`` on a box."""

    p: float = 2.0
    theta: float = 0.0
    alpha: float = 1.0
    gamma: float = 1.0
    dim: int = 1
    domain: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    source: SourceSpec = field(default_factory=SourceSpec)
    C: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigurationError("requires p > 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigurationError("requires 0 <= theta <= 1")
        if not self.alpha > 0:
            raise ConfigurationError("requires alpha > 0")
        if not self.gamma > 0:
            raise ConfigurationError("requires gamma > 0")
        if not self.C > 0:
            raise ConfigurationError("requires C > 0")
        if self.dim not in (1, 2, 3):
            raise ConfigurationError("dim must be 1, 2 or 3")
        domain = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if len(domain) != self.dim:
            raise ConfigurationError("domain must give one (lo, hi) pair per axis")
        if any(hi <= lo for lo, hi in domain):
            raise ConfigurationError("domain extents must be strictly positive")
        object.__setattr__(self, "domain", domain)
        src = self.source
        if src.kind == "radial_power" and src.exponent * min(src.m, M_INFINITY_SURROGATE) >= self.dim:
            raise ConfigurationError(
                "radial_power source needs exponent * m < N to lie in L^m"
            )

    @property
    def volume(self) -> float:
        return math.prod(hi - lo for lo, hi in self.domain)

    @property
    def m(self) -> float:
        return self.source.m

    @property
    def m_eff(self) -> float:
        """``m`` with infinity replaced by a large finite surrogate."""
        return min(self.source.m, M_INFINITY_SURROGATE)

    @property
    def gamma_critical(self) -> float:
        return self.theta * (self.p - 1.0) + 1.0

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        x = np.atleast_2d(x)
        lo = np.array([d[0] for d in self.domain])
        hi = np.array([d[1] for d in self.domain])
        return np.all((x >= lo - tol) & (x <= hi + tol), axis=1)

    def replace(self, **changes) -> "ProblemSpec":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class OperatorSpec:
    """Growth-envelope data of the operator; for the model ``a0 = 0`` and ``beta = alpha``."""

    p: float
    theta: float
    alpha: float
    beta: float
    a0: float = 0.0

    @classmethod
    def from_problem(cls, spec: ProblemSpec) -> "OperatorSpec":
        return cls(p=spec.p, theta=spec.theta, alpha=spec.alpha, beta=spec.alpha)

    def b(self, t):
        return self.alpha / (1.0 + np.abs(t)) ** (self.theta * (self.p - 1.0))


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError("non-finite input")


def flux(op: OperatorSpec, t: float, xi: Sequence[float]) -> np.ndarray:
    """``b(|t|) |xi|^(p-2) xi``, with the zero vector at ``xi = 0``."""
    xi = np.asarray(xi, dtype=float)
    _check_finite(t, xi)
    norm = float(np.linalg.norm(xi))
    if norm == 0.0:
        return np.zeros_like(xi)
    return op.b(t) * norm ** (op.p - 2.0) * xi


def coercivity_b(spec: ProblemSpec, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("coercivity_b needs t >= 0")
    out = spec.alpha / (1.0 + t) ** (spec.theta * (spec.p - 1.0))
    return float(out) if out.ndim == 0 else out


def primitive_B(spec: ProblemSpec, t):
    """Closed form of the primitive of ``b^(1/(p-1))`` vanishing at 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("primitive_B needs t >= 0")
    scale = spec.alpha ** (1.0 / (spec.p - 1.0))
    if spec.theta == 1.0:
        out = scale * np.log1p(t)
    else:
        k = 1.0 - spec.theta
        # expm1 keeps accuracy near theta -> 1 and t -> 0
        out = scale * np.expm1(k * np.log1p(t)) / k
    return float(out) if out.ndim == 0 else out


def inverse_B(spec: ProblemSpec, s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("inverse_B needs s >= 0")
    s = s / spec.alpha ** (1.0 / (spec.p - 1.0))
    if spec.theta == 1.0:
        out = np.expm1(s)
    else:
        k = 1.0 - spec.theta
        out = np.expm1(np.log1p(k * s) / k)
    return float(out) if out.ndim == 0 else out


def truncate_T(n: float, s):
    out = np.clip(s, -n, n)
    return float(out) if np.ndim(out) == 0 else out


def regularized_h(spec: ProblemSpec, n: float, s):
    """``min(n, C/s^gamma)`` for ``s > 0`` and ``n`` otherwise (``h(0) = inf``)."""
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, float(n))
    pos = s > 0
    with np.errstate(over="ignore"):
        out[pos] = np.minimum(n, spec.C / s[pos] ** spec.gamma)
    return float(out) if out.ndim == 0 else out


def regularized_h_derivative(spec: ProblemSpec, n: float, s):
    """Derivative of ``regularized_h`` in ``s``; the uncapped branch is used at the kink."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    pos = s > 0
    with np.errstate(over="ignore"):
        sp = s[pos]
        h = spec.C / sp**spec.gamma
        out[pos] = np.where(h <= n, -spec.gamma * h / sp, 0.0)
    return out


def regularized_source(spec: ProblemSpec, n: float, x, s):
    """``T_n(f(x)) h_n(s)``; bounded by ``n**2``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(spec.contains(x)):
        raise DomainError("point outside the domain")
    fx = truncate_T(n, spec.source(x))
    out = fx * regularized_h(spec, n, s)
    out = np.asarray(out)
    return float(out.reshape(-1)[0]) if out.size == 1 else out
