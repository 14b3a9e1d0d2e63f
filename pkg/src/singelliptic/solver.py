"""Regularized problems and the outer ``n -> infinity`` loop.

For a fixed level ``n`` the discrete weak form is

    sum_K |K| mean_K b(|T_n(u_h)|) |grad u_h|^(p-2) grad u_h . grad phi_i
        = M_i T_n(f(x_i)) h_n(u_i)

for every interior node ``i``, where ``M_i`` is the lumped (vertex quadrature)
mass.  Evaluating the singular factor at the nodes keeps the discrete problem
well posed as ``n`` grows: interior nodal values are positive, so ``h_n(u_i)``
stops depending on ``n`` once ``n`` exceeds every ``C / u_i^gamma``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import ConfigurationError, NewtonDivergence, SingularJacobian
from .grid import DiscreteField, Mesh, lebesgue_norm, simplex_rule
from .model import ProblemSpec, regularized_h, regularized_h_derivative, truncate_T

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonConfig:
    residual_tol: float = 1e-10
    max_iter: int = 100
    damping: float = 0.5
    positivity_floor: float = 1e-12
    # |grad u|^2 -> |grad u|^2 + delta^2 in the Jacobian when p < 2
    delta: float = 1e-10
    max_backtracks: int = 40
    picard_after: int = 3
    quad_points: int = 2
    backend: Optional[str] = None

    def __post_init__(self):
        if not (self.residual_tol > 0 and self.max_iter > 0 and self.positivity_floor > 0):
            raise ConfigurationError("Newton tolerances and limits must be positive")
        if not 0 < self.damping < 1:
            raise ConfigurationError("damping must lie in (0, 1)")


@dataclass(frozen=True)
class RegularizationSchedule:
    n_values: tuple[float, ...] = tuple(float(2**k) for k in range(15))
    outer_tol: float = 1e-8
    max_outer: Optional[int] = None
    # increments excluded from the monotonicity diagnostic
    warmup: int = 3

    def __post_init__(self):
        vals = tuple(float(v) for v in self.n_values)
        if not vals:
            raise ConfigurationError("schedule must contain at least one n")
        if any(v <= 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigurationError("schedule n values must be positive and strictly increasing")
        if not self.outer_tol > 0:
            raise ConfigurationError("outer_tol must be positive")
        object.__setattr__(self, "n_values", vals)

    @classmethod
    def doubling(cls, k_max: int, start: float = 1.0, **kw) -> "RegularizationSchedule":
        return cls(n_values=tuple(start * 2.0**k for k in range(k_max + 1)), **kw)


@dataclass
class SolveResult:
    field: DiscreteField
    n_values: list[float]
    n_history: list[DiscreteField]
    increments: list[float]
    newton_iters: list[int]
    residual: float
    converged: bool
    non_contractive: bool = False
    picard_steps: list[int] = field(default_factory=list)
    min_value: float = 0.0

    @property
    def final_n(self) -> float:
        return self.n_values[-1]


class RegularizedProblem:
    """Discrete residual and Jacobian of the level-``n`` problem."""

    def __init__(self, spec: ProblemSpec, mesh: Mesh, n: float, cfg: NewtonConfig = NewtonConfig()):
        if mesh.dim != spec.dim:
            raise ConfigurationError("mesh and problem dimensions differ")
        if not n > 0:
            raise ConfigurationError("n must be positive")
        self.spec, self.mesh, self.n, self.cfg = spec, mesh, float(n), cfg
        self.lam, self.w = simplex_rule(mesh.dim, cfg.quad_points)
        self.expo = spec.theta * (spec.p - 1.0)
        self.mass = mesh.lumped_mass
        f_nodes = spec.source(mesh.nodes)
        self.f_n = np.asarray(truncate_T(self.n, f_nodes), dtype=float)
        self.interior = mesh.interior_nodes
        k = mesh.dim + 1
        self._rows = np.repeat(mesh.cells, k, axis=1).ravel()
        self._cols = np.tile(mesh.cells, (1, k)).ravel()

    def _elements(self, u):
        return kernels.assemble_elements(
            self.mesh.grads,
            self.mesh.vols,
            u[self.mesh.cells],
            self.lam,
            self.w,
            self.spec.p,
            self.spec.alpha,
            self.expo,
            self.n,
            self.cfg.delta,
            backend=self.cfg.backend,
        )

    def _scatter(self, res_el):
        return np.bincount(self.mesh.cells.ravel(), weights=res_el.ravel(), minlength=self.mesh.n_nodes)

    def _matrix(self, data):
        N = self.mesh.n_nodes
        A = sp.coo_matrix((data, (self._rows, self._cols)), shape=(N, N)).tocsr()
        I = self.interior
        return A[I][:, I]

    def source(self, u):
        s = np.maximum(u, self.cfg.positivity_floor)
        return self.mass * self.f_n * regularized_h(self.spec, self.n, s)

    def residual(self, u) -> np.ndarray:
        """Interior residual vector (stiffness minus source)."""
        res_el, _, _ = self._elements(u)
        return (self._scatter(res_el) - self.source(u))[self.interior]

    def residual_and_jacobian(self, u):
        res_el, jac_el, _ = self._elements(u)
        r = (self._scatter(res_el) - self.source(u))[self.interior]
        J = self._matrix(jac_el.ravel())
        s = np.maximum(u, self.cfg.positivity_floor)
        dsrc = self.mass * self.f_n * regularized_h_derivative(self.spec, self.n, s)
        dsrc = np.where(u > self.cfg.positivity_floor, dsrc, 0.0)
        J = J - sp.diags(dsrc[self.interior])
        return r, J.tocsc()

    def picard_matrix(self, u):
        _, _, kcoef = self._elements(u)
        G = self.mesh.grads
        K_el = (self.mesh.vols * kcoef)[:, None, None] * np.einsum("eid,ejd->eij", G, G)
        return self._matrix(K_el.ravel()).tocsc()


def _solve_linear(A, b):
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(A, b)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularJacobian(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularJacobian("linear solve produced non-finite values")
    return x


def linear_initial_guess(spec: ProblemSpec, mesh: Mesh, n: float) -> DiscreteField:
    """Solve ``-div(alpha grad u) = n T_n(f)`` with lumped load."""
    prob = RegularizedProblem(spec.replace(p=2.0, theta=0.0), mesh, n)
    K = prob.picard_matrix(np.zeros(mesh.n_nodes))
    load = (n * prob.mass * prob.f_n)[prob.interior]
    u = np.zeros(mesh.n_nodes)
    if np.any(load):
        u[prob.interior] = _solve_linear(K, load)
    return DiscreteField(mesh, np.maximum(u, 0.0))


def _newton(prob: RegularizedProblem, u0: np.ndarray):
    cfg = prob.cfg
    I = prob.interior
    u = u0.copy()
    u[prob.mesh.boundary_nodes] = 0.0
    r = prob.residual(u)
    rnorm = float(np.linalg.norm(r))
    failures = 0
    picard_steps = 0
    it = 0
    while rnorm > cfg.residual_tol:
        if it >= cfg.max_iter:
            raise NewtonDivergence(
                f"no convergence in {cfg.max_iter} iterations at n={prob.n:g} (residual {rnorm:.3e})",
                residual=rnorm,
                n=prob.n,
            )
        it += 1
        use_picard = failures >= cfg.picard_after
        if not use_picard:
            r, J = prob.residual_and_jacobian(u)
            step = _solve_linear(J, -r)
            accepted, u_new, r_new = _line_search(prob, u, step, rnorm)
            if not accepted:
                failures += 1
                use_picard = True
        if use_picard:
            picard_steps += 1
            K = prob.picard_matrix(u)
            target = _solve_linear(K, prob.source(u)[I])
            step = target - u[I]
            accepted, u_new, r_new = _line_search(prob, u, step, rnorm)
            if not accepted:
                raise NewtonDivergence(
                    f"line search failed after full damping at n={prob.n:g} (residual {rnorm:.3e})",
                    residual=rnorm,
                    n=prob.n,
                )
        u, r = u_new, r_new
        rnorm = float(np.linalg.norm(r))
    return u, rnorm, it, picard_steps


def _line_search(prob, u, step, rnorm):
    I = prob.interior
    lam = 1.0
    for _ in range(prob.cfg.max_backtracks):
        trial = u.copy()
        trial[I] += lam * step
        r = prob.residual(trial)
        rn = float(np.linalg.norm(r))
        if rn < (1.0 - 1e-4 * lam) * rnorm or rn <= prob.cfg.residual_tol:
            return True, trial, r
        lam *= prob.cfg.damping
    return False, u, None


def solve_regularized(
    spec: ProblemSpec,
    mesh: Mesh,
    n: float,
    init: Optional[DiscreteField] = None,
    cfg: NewtonConfig = NewtonConfig(),
    return_stats: bool = False,
):
    """Solve the level-``n`` regularized problem by damped Newton.

    Raises ``NewtonDivergence`` when the residual cannot be driven below
    ``cfg.residual_tol`` and ``SingularJacobian`` when a linear solve fails.
    """
    prob = RegularizedProblem(spec, mesh, n, cfg)
    if init is None:
        init = linear_initial_guess(spec, mesh, n)
    u, rnorm, iters, picard = _newton(prob, init.values)
    min_value = float(u.min())
    u = np.where(u < 0.0, 0.0, u)
    u[mesh.boundary_nodes] = 0.0
    out = DiscreteField(mesh, u)
    if return_stats:
        return out, {"residual": rnorm, "newton_iters": iters, "picard_steps": picard, "min_value": min_value}
    return out


def residual_of(spec: ProblemSpec, mesh: Mesh, n: float, u: DiscreteField) -> float:
    """Euclidean norm of the level-``n`` weak-form residual over interior test functions."""
    return float(np.linalg.norm(RegularizedProblem(spec, mesh, n).residual(u.values)))


def _is_monotone(incs: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(incs, incs[1:]))


def solve_singular(
    spec: ProblemSpec,
    mesh: Mesh,
    schedule: RegularizationSchedule = RegularizationSchedule(),
    cfg: NewtonConfig = NewtonConfig(),
) -> SolveResult:
    """Run the regularized solves along ``schedule`` until successive fields agree.

    The stopping test is ``||u_{n_k} - u_{n_{k-1}}||_{L^p} <= outer_tol``.
    ``non_contractive`` is set when, past the warm-up increments, the last
    three increments fail to be nonincreasing.
    """
    n_values = list(schedule.n_values)
    if schedule.max_outer is not None:
        n_values = n_values[: schedule.max_outer]
    fields: list[DiscreteField] = []
    incs: list[float] = []
    iters: list[int] = []
    picard: list[int] = []
    used: list[float] = []
    prev: Optional[DiscreteField] = None
    converged = False
    non_contractive = False
    rnorm = math.nan
    min_value = 0.0
    for n in n_values:
        u, stats = solve_regularized(spec, mesh, n, init=prev, cfg=cfg, return_stats=True)
        fields.append(u)
        used.append(n)
        iters.append(stats["newton_iters"])
        picard.append(stats["picard_steps"])
        rnorm = stats["residual"]
        min_value = min(min_value, stats["min_value"])
        if prev is not None:
            inc = lebesgue_norm(u - prev, spec.p)
            incs.append(inc)
            log.debug("n=%g increment=%.3e newton=%d", n, inc, stats["newton_iters"])
            tail = incs[schedule.warmup:][-3:]
            if len(tail) == 3 and not _is_monotone(tail):
                non_contractive = True
            if inc <= schedule.outer_tol:
                converged = True
                break
        elif spec.source.is_zero:
            # u_n = 0 for every n
            converged = True
            break
        prev = u
    return SolveResult(
        field=fields[-1],
        n_values=used,
        n_history=fields,
        increments=incs,
        newton_iters=iters,
        residual=rnorm,
        converged=converged,
        non_contractive=non_contractive,
        picard_steps=picard,
        min_value=min_value,
    )
