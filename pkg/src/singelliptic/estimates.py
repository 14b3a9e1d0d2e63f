"""Summability exponents, explicit a-priori bounds and their verification."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, OutOfRegime
from .grid import Mesh, lebesgue_norm, power_transform, simplex_rule, sobolev_seminorm
from .model import M_INFINITY_SURROGATE, ProblemSpec, coercivity_b, inverse_B, primitive_B

REGIMES = (
    "bounded",
    "energy",
    "below_energy",
    "critical_gamma",
    "supercritical_gamma",
    "uncovered",
)

# marker for a bound whose proof gives no finite constant
UNBOUNDED = math.inf

_EQ_TOL = 1e-12


@dataclass(frozen=True)
class GeometryConstants:
    N: int
    C_N: float

    @classmethod
    def for_dim(cls, N: int) -> "GeometryConstants":
        return cls(N=N, C_N=unit_ball_measure(N))


def unit_ball_measure(N: int) -> float:
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


@dataclass(frozen=True)
class ExponentSet:
    N: int
    p: float
    theta: float
    gamma: float
    m: float
    p_star: float
    p_prime: float
    regime: str
    m1: Optional[float] = None
    m_floor: Optional[float] = None
    r: Optional[float] = None
    sigma: Optional[float] = None
    nu: Optional[float] = None
    lam: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def _gamma_regime(p, theta, gamma):
    crit = theta * (p - 1.0) + 1.0
    if abs(gamma - crit) <= _EQ_TOL * max(1.0, crit):
        return "critical_gamma"
    if gamma > crit:
        return "supercritical_gamma"
    return None


def critical_m1(N, p, theta, gamma):
    """Lower end of the finite-energy range, ``(p* / (theta(p-1)+1-gamma))'``.

    Like the other exponent formulas it only uses ``+ - * /``, so Fraction
    inputs give exact rational results.
    """
    return N * p / (N * p - (N - p) * (theta * (p - 1) + 1 - gamma))


def below_energy_floor(N, p, theta, gamma):
    return max(1.0, N / ((p - 1.0) * (N * (1.0 - theta) + theta) + 1.0 + gamma * (N - 1.0)))


def regime_for(N, p, theta, gamma, m) -> str:
    tag = _gamma_regime(p, theta, gamma)
    if tag:
        return tag
    if N <= p or m > N / p:
        # for N <= p every W^{1,p}_0 function is bounded
        return "bounded"
    m1 = critical_m1(N, p, theta, gamma)
    if m1 <= m < N / p:
        return "energy"
    if below_energy_floor(N, p, theta, gamma) <= m < m1:
        return "below_energy"
    return "uncovered"


def classify_regime(spec: ProblemSpec) -> str:
    return regime_for(spec.dim, spec.p, spec.theta, spec.gamma, spec.m)


def exponents_for(N: int, p: float, theta: float, gamma: float, m: float) -> ExponentSet:
    """All derived exponents for one parameter tuple; undefined entries are None."""
    if not N > p:
        raise ConfigurationError(f"requires N > p (got N={N}, p={p})")
    if not p > 1:
        raise ConfigurationError("requires p > 1")
    if not 0 <= theta <= 1:
        raise ConfigurationError("requires 0 <= theta <= 1")
    if not gamma > 0:
        raise ConfigurationError("requires gamma > 0")
    if not m >= 1:
        raise ConfigurationError("requires m >= 1")
    p_star = N * p / (N - p)
    p_prime = p / (p - 1.0)
    regime = regime_for(N, p, theta, gamma, m)
    m1 = m_floor = None
    if gamma < theta * (p - 1.0) + 1.0 and regime not in ("critical_gamma",):
        m1 = critical_m1(N, p, theta, gamma)
        m_floor = below_energy_floor(N, p, theta, gamma)
    r = sigma = nu = lam = None
    if m < N / p:
        r = r_exponent(N, p, theta, gamma, m)
        nu = nu_exponent(N, p, theta, gamma, m)
        lam = nu
        denom = N - m * (theta * (p - 1.0) + 1.0 - gamma)
        if denom > 0:
            sigma = sigma_exponent(N, p, theta, gamma, m)
    return ExponentSet(
        N=N, p=p, theta=theta, gamma=gamma, m=m, p_star=p_star, p_prime=p_prime,
        regime=regime, m1=m1, m_floor=m_floor, r=r, sigma=sigma, nu=nu, lam=lam,
    )


def exponents(spec: ProblemSpec) -> ExponentSet:
    return exponents_for(spec.dim, spec.p, spec.theta, spec.gamma, spec.m)


def r_exponent(N, p, theta, gamma, m):
    if not m < N / p:
        raise OutOfRegime("r needs m < N/p")
    return N * m * ((p - 1) * (1 - theta) + gamma) / (N - p * m)


def sigma_exponent(N, p, theta, gamma, m):
    if not m < N / p:
        raise OutOfRegime("sigma needs m < N/p")
    return N * m * ((p - 1) * (1 - theta) + gamma) / (N - m * ((p - 1) * theta + 1 - gamma))


def nu_exponent(N, p, theta, gamma, m):
    """Power in the test function ``(1+u)^nu - 1`` giving the ``L^r`` estimate."""
    if not m < N / p:
        raise OutOfRegime("nu needs m < N/p")
    return (N * (m - 1) * (1 - theta) * (p - 1) + gamma * m * (N - p)) / (N - p * m)


# --------------------------------------------------------------------------
# explicit bounds


def linf_bracket(spec: ProblemSpec, f_norm_m: float, geo: Optional[GeometryConstants] = None) -> float:
    """The argument of ``B^{-1}`` in the L-infinity bound."""
    N = spec.dim if geo is None else geo.N
    geo = geo or GeometryConstants.for_dim(N)
    p, m = spec.p, spec.m_eff
    if not m > N / p:
        raise OutOfRegime(f"L-infinity bound needs m > N/p (m={m}, N/p={N / p})")
    if f_norm_m < 0:
        raise ConfigurationError("norm of f must be nonnegative")
    pp = p / (p - 1.0)
    vol = spec.volume
    return (
        spec.C ** (1.0 / (p - 1.0))
        * vol ** (pp / N - pp / (p * m))
        / (N * geo.C_N ** (1.0 / N)) ** pp
        * (N * m * (p - 1.0) / (p * m - N))
        * f_norm_m ** (pp / p)
    )


def linf_bound(spec: ProblemSpec, f_norm_m: float, geo: Optional[GeometryConstants] = None) -> float:
    return inverse_B(spec, linf_bracket(spec, f_norm_m, geo))


def linf_bound_from_level_one(spec: ProblemSpec, f_norm_m: float, geo=None) -> float:
    """Same comparison started at the level ``u = 1``, where ``h <= C`` really holds."""
    return inverse_B(spec, primitive_B(spec, 1.0) + linf_bracket(spec, f_norm_m, geo))


@dataclass(frozen=True)
class EnergyBound:
    printed: float
    sharp: float


def energy_bound(spec: ProblemSpec, c_inf: float, f_norm_m: float) -> EnergyBound:
    """Gradient bound in the bounded regime, with ``b(c_inf)^p`` and with ``b(c_inf)``."""
    base = c_inf * spec.volume ** (1.0 - 1.0 / spec.m_eff) * f_norm_m
    b = coercivity_b(spec, c_inf)
    return EnergyBound(printed=base / b**spec.p, sharp=base / b)


def power_energy_bound(spec: ProblemSpec, f_l1: float) -> tuple[float, float]:
    """Exponent ``e`` and the bound on ``int |grad(u^e)|^p`` for supercritical ``gamma``."""
    if not spec.gamma > spec.gamma_critical * (1 + _EQ_TOL):
        raise OutOfRegime("power energy bound needs gamma > theta(p-1)+1")
    p = spec.p
    s = spec.gamma + (p - 1.0) * (1.0 - spec.theta)
    e = s / p
    return e, f_l1 / (spec.alpha * spec.gamma * (p / s) ** p)


def critical_energy_bound(spec: ProblemSpec, f_l1: float) -> float:
    """Bound on ``int |grad u|^p`` at ``gamma = theta(p-1)+1``; ``UNBOUNDED`` when theta = 0."""
    if _gamma_regime(spec.p, spec.theta, spec.gamma) != "critical_gamma":
        raise OutOfRegime("critical energy bound needs gamma = theta(p-1)+1")
    pref = spec.theta * (spec.p - 1.0)
    if pref == 0.0:
        return UNBOUNDED
    return spec.C * f_l1 / pref


# --------------------------------------------------------------------------
# norms of the datum


def source_norm(spec: ProblemSpec, q: float, mesh: Optional[Mesh] = None) -> float:
    """``||f||_{L^q(Omega)}`` of the continuous datum (exact where a closed form exists)."""
    src = spec.source
    vol = spec.volume
    if src.kind == "constant":
        return src.value if q == math.inf else src.value * vol ** (1.0 / q)
    if src.kind == "radial_power" and src.exponent == 0:
        return src.value if q == math.inf else src.value * vol ** (1.0 / q)
    if src.kind == "radial_power":
        if q == math.inf:
            return math.inf
        center = src.center or (0.0,) * spec.dim
        if all(lo <= c <= hi for c, (lo, hi) in zip(center, spec.domain)):
            s = src.exponent * q
            return src.value * _radial_integral(spec.domain, center, s) ** (1.0 / q)
    if mesh is None:
        raise ConfigurationError("a mesh is needed to integrate this source")
    return _quadrature_norm(src, mesh, q)


def _radial_integral(domain, center, s):
    """``int_box |x - c|^{-s} dx`` for a center inside the box (s < dim)."""
    from scipy.integrate import quad

    if len(domain) == 1:
        (lo, hi), (c,) = domain[0], center
        return sum(L ** (1.0 - s) / (1.0 - s) for L in (c - lo, hi - c) if L > 0)
    (x0, x1), (y0, y1) = domain
    cx, cy = center
    total = 0.0
    for X in (cx - x0, x1 - cx):
        for Y in (cy - y0, y1 - cy):
            if X <= 0 or Y <= 0:
                continue
            split = math.atan2(Y, X)
            g = lambda phi, R: R(phi) ** (2.0 - s) / (2.0 - s)
            a, _ = quad(g, 0.0, split, args=(lambda phi: X / math.cos(phi),), epsabs=0, epsrel=1e-13, limit=200)
            b, _ = quad(g, split, math.pi / 2, args=(lambda phi: Y / math.sin(phi),), epsabs=0, epsrel=1e-13, limit=200)
            total += a + b
    return total


def _quadrature_norm(src, mesh: Mesh, q: float) -> float:
    lam, w = simplex_rule(mesh.dim, 5)
    x = np.einsum("qk,ekd->eqd", lam, mesh.nodes[mesh.cells])
    fx = src(x.reshape(-1, mesh.dim)).reshape(x.shape[:2])
    if q == math.inf:
        return float(max(np.max(fx), np.max(src(mesh.nodes))))
    return float(np.sum(mesh.vols * ((fx**q) @ w)) ** (1.0 / q))


# --------------------------------------------------------------------------
# verification


@dataclass
class Check:
    name: str
    status: str  # pass | fail | skipped | info
    predicted: Optional[float] = None
    observed: Optional[float] = None
    slack: float = 0.0
    reason: str = ""
    gating: bool = True

    @property
    def margin(self) -> Optional[float]:
        if self.predicted is None or self.observed is None or not math.isfinite(self.predicted):
            return None
        return self.predicted * (1.0 + self.slack) - self.observed


def _compare(name, predicted, observed, slack, gating=True, reason=""):
    ok = observed <= predicted * (1.0 + slack)
    status = ("pass" if ok else "fail") if gating else "info"
    if not gating:
        reason = reason or ("within bound" if ok else "exceeds bound")
    return Check(name, status, predicted, observed, slack, reason, gating)


@dataclass
class EstimateReport:
    regime: str
    checks: list[Check] = field(default_factory=list)
    c_inf: Optional[float] = None
    linf_observed: Optional[float] = None
    energy_bound: Optional[float] = None
    energy_bound_sharp: Optional[float] = None
    energy_observed: Optional[float] = None
    lr_norm_observed: Optional[float] = None
    power_energy_bound: Optional[float] = None
    power_energy_observed: Optional[float] = None
    critical_energy_bound: Optional[float] = None
    critical_energy_observed: Optional[float] = None
    exponents: Optional[dict] = None
    increments: list[float] = field(default_factory=list)
    non_contractive: bool = False

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks if c.gating)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checks"] = [dict(asdict(c), margin=c.margin) for c in self.checks]
        d["passed"] = self.passed
        return d


def verify(spec: ProblemSpec, result, geo: Optional[GeometryConstants] = None, slack: float = 0.05,
           energy_slack: float = 0.0) -> EstimateReport:
    """Compare a converged solve against every applicable closed-form bound.

    Checks whose derivation needs ``N > p`` (the L-infinity bound and the
    ``L^r`` summability) are skipped on meshes with ``dim <= p``.
    """
    u = result.field
    mesh = u.mesh
    N = spec.dim
    geo = geo or GeometryConstants.for_dim(N)
    regime = classify_regime(spec)
    rep = EstimateReport(regime=regime, increments=list(result.increments),
                         non_contractive=result.non_contractive)
    rep.linf_observed = u.max()
    rep.energy_observed = sobolev_seminorm(u, spec.p) ** spec.p
    f_l1 = source_norm(spec, 1.0, mesh)
    dim_ok = N > spec.p
    if dim_ok:
        rep.exponents = exponents(spec).to_dict()

    rep.checks.append(Check("converged", "pass" if result.converged else "fail",
                            reason="" if result.converged else "outer loop did not reach outer_tol"))
    rep.checks.append(Check("contractive", "fail" if result.non_contractive else "pass",
                            reason="increments not monotone" if result.non_contractive else ""))

    if regime == "bounded":
        if spec.m == math.inf:
            # formulas run at m = 1e6, and ||f||_q <= ||f||_inf |Omega|^(1/q)
            f_m = source_norm(spec, math.inf, mesh) * spec.volume ** (1.0 / M_INFINITY_SURROGATE)
        else:
            f_m = source_norm(spec, spec.m, mesh)
        rep.c_inf = linf_bound(spec, f_m, geo)
        if dim_ok:
            rep.checks.append(_compare("linf", rep.c_inf, rep.linf_observed, slack))
            rep.checks.append(_compare("linf_from_level_one", linf_bound_from_level_one(spec, f_m, geo),
                                       rep.linf_observed, slack, gating=False))
        else:
            rep.checks.append(Check("linf", "skipped", rep.c_inf, rep.linf_observed,
                                    reason="dimension mismatch: bound needs N > p"))
        eb = energy_bound(spec, rep.c_inf, f_m)
        rep.energy_bound, rep.energy_bound_sharp = eb.printed, eb.sharp
        rep.checks.append(_compare("energy", eb.printed, rep.energy_observed, energy_slack))
        rep.checks.append(_compare("energy_sharp", eb.sharp, rep.energy_observed, energy_slack, gating=False))
    else:
        rep.checks.append(Check("linf", "skipped", reason=f"regime {regime}: needs m > N/p"))
        rep.checks.append(Check("energy", "skipped", reason=f"regime {regime}: needs m > N/p"))

    if regime in ("energy", "below_energy"):
        if dim_ok and rep.exponents and rep.exponents.get("r"):
            r = rep.exponents["r"]
            rep.lr_norm_observed = lebesgue_norm(u, r)
            rep.checks.append(Check("lr_norm", "info", observed=rep.lr_norm_observed, gating=False,
                                    reason=f"L^{r:.6g} norm; uniform bound has no explicit constant"))
        else:
            rep.checks.append(Check("lr_norm", "skipped", reason="dimension mismatch: r, sigma need N > p"))

    if regime == "supercritical_gamma":
        e, bound = power_energy_bound(spec, f_l1)
        rep.power_energy_bound = bound
        rep.power_energy_observed = sobolev_seminorm(power_transform(u, e), spec.p) ** spec.p
        rep.checks.append(_compare("power_energy", bound, rep.power_energy_observed, slack))
    else:
        rep.checks.append(Check("power_energy", "skipped", reason="needs gamma > theta(p-1)+1"))

    if regime == "critical_gamma":
        bound = critical_energy_bound(spec, f_l1)
        rep.critical_energy_observed = rep.energy_observed
        if bound == UNBOUNDED:
            rep.checks.append(Check("critical_energy", "skipped", observed=rep.energy_observed,
                                    reason="unverifiable: prefactor theta(p-1) vanishes for theta = 0"))
        else:
            rep.critical_energy_bound = bound
            rep.checks.append(_compare("critical_energy", bound, rep.energy_observed, slack))
    else:
        rep.checks.append(Check("critical_energy", "skipped", reason="needs gamma = theta(p-1)+1"))
    return rep
