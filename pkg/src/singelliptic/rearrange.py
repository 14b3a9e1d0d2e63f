"""Distribution functions and decreasing rearrangements of piecewise-linear fields.

All quantities are computed from the exact level-set geometry of the P1
interpolant: on a simplex where ``u`` is linear, the measure of ``{u > t}``
is a piecewise polynomial of degree ``dim`` in ``t`` with breaks at the
vertex values.  Between consecutive breakpoints of the whole field the
distribution function is therefore a single polynomial, which is stored by
three samples and inverted by bisection.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from . import kernels
from .errors import DomainError
from .grid import FLOAT_FMT, DiscreteField, simplex_rule, split_by_sign


@dataclass(frozen=True, eq=False)
class PiecewiseField:
    """A field given directly by value-simplices: vertex values (P, k) and volumes (P,).

    Constant pieces (all vertex values equal) describe step functions.
    """

    values: np.ndarray
    vols: np.ndarray

    @classmethod
    def steps(cls, levels: Sequence[float], measures: Sequence[float]) -> "PiecewiseField":
        """Step function taking ``levels[i]`` on a set of measure ``measures[i]``."""
        lv = np.asarray(levels, dtype=float)
        return cls(np.column_stack([lv, lv]), np.asarray(measures, dtype=float))

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.vols))


Field = Union[DiscreteField, PiecewiseField]


def value_simplices(u: Field) -> tuple[np.ndarray, np.ndarray]:
    """Sign-split pieces of ``|u|`` as (sorted vertex values, volumes)."""
    if isinstance(u, DiscreteField):
        vals, vols = u.values[u.mesh.cells], u.mesh.vols
    else:
        vals, vols = u.values, u.vols
    vals, vols = split_by_sign(vals, vols)
    keep = vols > 0
    return np.sort(np.abs(vals[keep]), axis=1), vols[keep]


def _total_measure(u: Field) -> float:
    return u.mesh.volume if isinstance(u, DiscreteField) else u.total_measure


def distribution_function(u: Field, t):
    """``mu_u(t) = |{|u| > t}|`` evaluated exactly; ``t`` may be an array."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise DomainError("distribution_function needs t >= 0")
    vals, vols = value_simplices(u)
    out = kernels.superlevel_measure(vals, vols, t_arr)
    return float(out[0]) if np.ndim(t) == 0 else out


@dataclass(frozen=True, eq=False)
class RearrangementProfile:
    """Exact description of ``mu_u`` and ``u*``.

    ``levels`` ascend from 0 to ``ess sup |u|``; ``measures[k] = mu_u(levels[k])``.
    On ``[levels[k-1], levels[k])`` the distribution function is the
    polynomial through ``samples[k-1]`` taken at local positions 0, 1/3, 2/3.
    """

    levels: np.ndarray
    measures: np.ndarray
    samples: np.ndarray
    total_measure: float

    @property
    def breakpoints(self) -> np.ndarray:
        """Value levels in decreasing order."""
        return self.levels[::-1]

    @property
    def sup(self) -> float:
        return float(self.levels[-1])

    def _poly(self, k, tau):
        """Distribution function on interval ``k`` (1-based) at local position ``tau``."""
        y0, y1, y2 = self.samples[k - 1].T
        # Lagrange basis on nodes 0, 1/3, 2/3
        l0 = (tau - 1 / 3) * (tau - 2 / 3) / ((0 - 1 / 3) * (0 - 2 / 3))
        l1 = tau * (tau - 2 / 3) / ((1 / 3) * (1 / 3 - 2 / 3))
        l2 = tau * (tau - 1 / 3) / ((2 / 3) * (2 / 3 - 1 / 3))
        return y0 * l0 + y1 * l1 + y2 * l2

    def left_limits(self) -> np.ndarray:
        """``mu(levels[k]^-)`` for k >= 1."""
        k = np.arange(1, len(self.levels))
        # mu is nonincreasing, so the limit lies between the interval's end values
        left = np.clip(self._poly(k, 1.0), self.measures[1:], self.samples[:, 0])
        # extrapolation rounding is not a jump
        cont = np.abs(left - self.measures[1:]) <= 1e-13 * self.total_measure
        return np.where(cont, self.measures[1:], left)

    def mu(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        inside = t < self.levels[-1]
        k = np.searchsorted(self.levels, t[inside], side="right")
        lo, hi = self.levels[k - 1], self.levels[k]
        out[inside] = self._poly(k, (t[inside] - lo) / (hi - lo))
        return out

    def u_star(self, s):
        """``u*(s) = inf{t >= 0 : mu(t) <= s}`` for ``s`` in ``[0, |Omega|]``."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros_like(s_arr)
        active = s_arr < self.measures[0]
        if np.any(active):
            sa = s_arr[active]
            # first level whose measure is <= s; measures are nonincreasing
            k = np.searchsorted(-self.measures, -sa, side="left")
            left = self.left_limits()[k - 1]
            lo, hi = self.levels[k - 1], self.levels[k]
            jump = sa < left
            res = np.where(jump, hi, 0.0)
            solve = ~jump
            if np.any(solve):
                kk, ss = k[solve], sa[solve]
                a = np.zeros_like(ss)
                b = np.ones_like(ss)
                for _ in range(64):
                    mid = 0.5 * (a + b)
                    above = self._poly(kk, mid) > ss
                    a = np.where(above, mid, a)
                    b = np.where(above, b, mid)
                res[solve] = lo[solve] + b * (hi[solve] - lo[solve])
            out[active] = res
        # the bisection only resolves a double root to ~sqrt(eps)
        out[s_arr <= 0] = self.sup
        return float(out[0]) if np.ndim(s) == 0 else out

    def integral(self, phi: Callable[[np.ndarray], np.ndarray], npts: int = 8) -> float:
        """``int_0^|Omega| phi(u*(s)) ds`` by the substitution ``s = mu(t)``.

        Exact for polynomial ``phi`` of degree up to ``2*npts - 2`` (plus jumps).
        Intervals reaching down towards ``t = 0`` get a geometrically graded
        rule, so powers ``t^q`` with fractional ``q`` are integrated accurately.
        """
        K = len(self.levels) - 1
        if K == 0:
            return float(phi(np.zeros(1))[0] * self.total_measure)
        lo, hi = self.levels[:-1], self.levels[1:]
        graded = lo <= _GRADE_RATIO * hi
        smooth = 0.0
        for mask, (tau, w) in ((~graded, _gauss01(npts)), (graded, _graded01(npts))):
            if not mask.any():
                continue
            # derivative of the interpolating quadratic in tau
            y0, y1, y2 = self.samples[mask].T
            c2 = 4.5 * (y0 - 2 * y1 + y2)
            c1 = 3.0 * (y1 - y0) - c2 / 3.0
            dmu = c1[:, None] + 2.0 * c2[:, None] * tau[None, :]
            t = lo[mask, None] + tau[None, :] * (hi - lo)[mask, None]
            smooth += np.sum(-dmu * phi(t) * w[None, :])
        jumps = np.sum((self.left_limits() - self.measures[1:]) * phi(hi))
        zero_part = (self.total_measure - self.measures[0]) * float(phi(np.zeros(1))[0])
        return float(smooth + jumps + zero_part)


_GRADE_RATIO = 0.5
_GRADE_LEVELS = 40


def _gauss01(npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _graded01(npts):
    """Composite Gauss rule on [0, 1] with pieces [2^-(j+1), 2^-j] and [0, 2^-J]."""
    x, w = _gauss01(npts)
    edges = np.concatenate([[0.0], 0.5 ** np.arange(_GRADE_LEVELS, -1, -1)])
    a, b = edges[:-1, None], edges[1:, None]
    return (a + (b - a) * x).ravel(), ((b - a) * w).ravel()


def decreasing_rearrangement(u: Field) -> RearrangementProfile:
    vals, vols = value_simplices(u)
    total = _total_measure(u)
    levels = np.unique(np.concatenate([[0.0], vals.ravel()]))
    if len(levels) == 1:
        return RearrangementProfile(levels, np.array([0.0]), np.zeros((0, 3)), total)
    lo, hi = levels[:-1], levels[1:]
    probes = np.concatenate([levels, lo + (hi - lo) / 3.0, lo + 2.0 * (hi - lo) / 3.0])
    mu = kernels.superlevel_measure(vals, vols, probes)
    K = len(levels)
    measures = np.minimum.accumulate(np.maximum(mu[:K], 0.0))
    samples = np.column_stack([measures[:-1], mu[K : 2 * K - 1], mu[2 * K - 1 :]])
    return RearrangementProfile(levels, measures, samples, total)


def _phi_from_samples(ts, phis):
    ts = np.asarray(ts, dtype=float)
    phis = np.asarray(phis, dtype=float)
    if ts.ndim != 1 or ts.shape != phis.shape or len(ts) < 2:
        raise DomainError("phi samples must be two equal-length 1D arrays")
    if np.any(np.diff(ts) <= 0) or np.any(np.diff(phis) < 0):
        raise DomainError("phi samples must be increasing")
    if ts[0] != 0 or phis[0] != 0:
        raise DomainError("phi must satisfy phi(0) = 0")
    slope = (phis[-1] - phis[-2]) / (ts[-1] - ts[-2])

    def phi(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= ts[-1], np.interp(t, ts, phis), phis[-1] + slope * (t - ts[-1]))

    return phi


def equimeasurability_check(u: Field, phi, npts: int = 8) -> tuple[float, float]:
    """Return ``(int_Omega phi(|u|) dx, int_0^|Omega| phi(u*(s)) ds)``.

    ``phi`` is a vectorized increasing callable with ``phi(0) = 0`` or a pair
    ``(t_samples, phi_samples)`` interpolated piecewise linearly.
    """
    if not callable(phi):
        phi = _phi_from_samples(*phi)
    else:
        probe = np.linspace(0.0, 1.0, 33)
        vals = np.asarray(phi(probe), dtype=float)
        if abs(vals[0]) > 0 or np.any(np.diff(vals) < 0):
            raise DomainError("phi must be increasing with phi(0) = 0")
    vals, vols = value_simplices(u)
    lam, w = simplex_rule(vals.shape[1] - 1, npts)
    flat = vals[:, 0] == vals[:, -1]
    # constant pieces exactly; the rule's weights only sum to 1 up to rounding
    lhs = float(np.sum(vols[flat] * phi(vals[flat, 0])))
    lhs += float(np.sum(vols[~flat] * (phi(vals[~flat] @ lam.T) @ w)))
    rhs = decreasing_rearrangement(u).integral(phi, npts=npts)
    return lhs, rhs


def rearranged_norm(profile: RearrangementProfile, q: float) -> float:
    if q == math.inf:
        return profile.sup
    return profile.integral(lambda t: np.abs(t) ** q) ** (1.0 / q)


def write_profile_csv(profile: RearrangementProfile, path, n_samples: int = 201) -> None:
    """Write ``(s, u*(s))`` at the breakpoint measures and on a uniform grid."""
    s = np.unique(np.concatenate([
        np.linspace(0.0, profile.total_measure, n_samples),
        profile.measures,
        profile.left_limits() if len(profile.levels) > 1 else [],
    ]))
    s = s[(s >= 0) & (s <= profile.total_measure)]
    us = profile.u_star(s)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s", "u_star"])
        for a, b in zip(s, us):
            writer.writerow([FLOAT_FMT.format(a), FLOAT_FMT.format(b)])


def read_cell_csv(path) -> PiecewiseField:
    """Step field from a ``measure,value`` CSV."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or [h.strip() for h in rows[0]] != ["measure", "value"]:
        raise DomainError(f"{path}: expected header measure,value")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r])
    except ValueError as exc:
        raise DomainError(f"{path}: non-numeric entry") from exc
    if data.ndim != 2 or data.shape[1] != 2 or np.any(data[:, 0] < 0) or not np.all(np.isfinite(data)):
        raise DomainError(f"{path}: malformed rows")
    return PiecewiseField.steps(data[:, 1], data[:, 0])
