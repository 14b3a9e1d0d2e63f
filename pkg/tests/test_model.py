import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from singelliptic.errors import ConfigurationError, DomainError
from singelliptic.model import (
    OperatorSpec,
    ProblemSpec,
    SourceSpec,
    coercivity_b,
    flux,
    inverse_B,
    primitive_B,
    regularized_h,
    regularized_h_derivative,
    regularized_source,
    truncate_T,
)


def op(p, theta, alpha):
    return OperatorSpec.from_problem(ProblemSpec(p=p, theta=theta, alpha=alpha, dim=2, domain=((0, 1), (0, 1))))


def test_flux_identity_for_laplacian():
    np.testing.assert_allclose(flux(op(2, 0, 1), 5.0, [3, 4]), [3, 4])


def test_flux_scaled_by_b():
    np.testing.assert_allclose(flux(op(2, 1, 1), 1.0, [2, 0]), [1, 0])


def test_flux_p3():
    # b(0) = 2, |xi| = sqrt 2
    np.testing.assert_allclose(flux(op(3, 1, 2), 0.0, [1, 1]), [2 * math.sqrt(2)] * 2, rtol=1e-14)


def test_flux_zero_gradient_and_bad_input():
    np.testing.assert_array_equal(flux(op(1.5, 0, 1), 1.0, [0, 0]), [0, 0])
    with pytest.raises(DomainError):
        flux(op(2, 0, 1), math.nan, [1, 0])


@pytest.mark.parametrize("alpha,theta,p,t,expected", [
    (1, 0, 2, 7, 1.0),
    (1, 1, 2, 3, 0.25),
    (2, 0.5, 3, 1, 1.0),
])
def test_coercivity_b(alpha, theta, p, t, expected):
    spec = ProblemSpec(p=p, theta=theta, alpha=alpha)
    assert coercivity_b(spec, t) == pytest.approx(expected, rel=1e-15)


def test_coercivity_rejects_negative():
    with pytest.raises(DomainError):
        coercivity_b(ProblemSpec(), -1.0)


@pytest.mark.parametrize("theta,p,t,expected", [
    (0.0, 2.0, 5.0, 5.0),
    (1.0, 2.0, math.e - 1.0, 1.0),
    (0.5, 2.0, 3.0, 2.0),
])
def test_primitive_examples(theta, p, t, expected):
    spec = ProblemSpec(p=p, theta=theta)
    assert primitive_B(spec, t) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("theta,p,alpha", [(0.3, 1.5, 1.0), (1.0, 3.0, 2.0), (0.9, 2.5, 0.5)])
def test_primitive_matches_quadrature(theta, p, alpha):
    spec = ProblemSpec(p=p, theta=theta, alpha=alpha)
    for t in (0.1, 1.0, 17.0):
        ref, _ = quad(lambda s: coercivity_b(spec, s) ** (1 / (p - 1)), 0, t, epsabs=0, epsrel=1e-13)
        assert primitive_B(spec, t) == pytest.approx(ref, rel=1e-11)


def test_primitive_continuous_at_theta_one():
    eps = 1e-6
    lim = ProblemSpec(p=2.0, theta=1.0)
    near = ProblemSpec(p=2.0, theta=1.0 - eps)
    for t in (0.01, 0.1):
        assert abs(primitive_B(near, t) - primitive_B(lim, t)) <= 1e-8
    # further out the two closed forms differ by (eps/2) log(1+t)^2 + O(eps^2) analytically
    for t in (0.5, 1.0, 10.0, 100.0):
        gap = primitive_B(near, t) - primitive_B(lim, t)
        assert gap == pytest.approx(0.5 * eps * math.log1p(t) ** 2, rel=1e-5)


@settings(max_examples=200, deadline=None)
@given(theta=st.floats(0, 1), p=st.floats(1.1, 5), alpha=st.floats(0.1, 10), t=st.floats(0, 1e4))
def test_inverse_roundtrip(theta, p, alpha, t):
    spec = ProblemSpec(p=p, theta=theta, alpha=alpha)
    assert inverse_B(spec, primitive_B(spec, t)) == pytest.approx(t, rel=1e-9, abs=1e-12)


def test_primitive_rejects_negative():
    with pytest.raises(DomainError):
        primitive_B(ProblemSpec(), -0.1)
    with pytest.raises(DomainError):
        inverse_B(ProblemSpec(), -0.1)


@pytest.mark.parametrize("s,expected", [(7, 5), (-7, -5), (3, 3)])
def test_truncate(s, expected):
    assert truncate_T(5, s) == expected


@pytest.mark.parametrize("gamma,n,s,expected", [(1, 10, 0.5, 2.0), (1, 10, 0.05, 10.0), (2, 4, 0.0, 4.0)])
def test_regularized_h(gamma, n, s, expected):
    assert regularized_h(ProblemSpec(gamma=gamma), n, s) == pytest.approx(expected)


@settings(max_examples=200, deadline=None)
@given(gamma=st.floats(0.1, 4), n=st.floats(1, 1e6), s=st.floats(1e-6, 1e3), C=st.floats(0.1, 10))
def test_h_envelope(gamma, n, s, C):
    spec = ProblemSpec(gamma=gamma, C=C)
    assert regularized_h(spec, n, s) <= min(n, C / s**gamma) * (1 + 1e-15)


def test_h_pointwise_limit():
    spec = ProblemSpec(gamma=1.5, C=2.0)
    assert regularized_h(spec, 1e12, 0.3) == pytest.approx(2.0 / 0.3**1.5, rel=1e-15)


def test_h_derivative_matches_difference():
    spec = ProblemSpec(gamma=1.5)
    s = np.array([0.5, 1.0, 2.0])
    eps = 1e-7
    fd = (regularized_h(spec, 10.0, s + eps) - regularized_h(spec, 10.0, s - eps)) / (2 * eps)
    np.testing.assert_allclose(regularized_h_derivative(spec, 10.0, s), fd, rtol=1e-6)
    # capped branch is flat
    assert regularized_h_derivative(spec, 10.0, np.array([0.01]))[0] == 0.0


def test_regularized_source_examples():
    spec = ProblemSpec(gamma=1.0, source=SourceSpec(value=2.0))
    assert regularized_source(spec, 10, [[0.5]], 1.0) == pytest.approx(2.0)
    spec = ProblemSpec(gamma=1.0, source=SourceSpec(value=20.0))
    assert regularized_source(spec, 10, [[0.5]], 0.1) == pytest.approx(100.0)
    spec = ProblemSpec(gamma=1.0, source=SourceSpec(kind="radial_power", value=1.0, exponent=0.5,
                                                    center=(0.5,), m=1.5))
    # f(0.75) = 0.25^(-1/2) = 2 and h(2) = 1/2
    assert regularized_source(spec, 100, [[0.75]], 2.0) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(DomainError):
        regularized_source(spec, 100, [[1.5]], 2.0)


def test_regularized_source_bounded_by_n_squared():
    spec = ProblemSpec(gamma=2.0, source=SourceSpec(value=1e9))
    assert regularized_source(spec, 7.0, [[0.2]], 1e-9) <= 49.0


@pytest.mark.parametrize("kw", [
    dict(p=1.0), dict(theta=1.5), dict(theta=-0.1), dict(alpha=0.0), dict(gamma=0.0), dict(C=-1.0),
    dict(dim=2), dict(domain=((1.0, 0.0),)),
])
def test_problem_validation(kw):
    with pytest.raises(ConfigurationError):
        ProblemSpec(**kw)


def test_radial_source_must_lie_in_Lm():
    with pytest.raises(ConfigurationError):
        ProblemSpec(source=SourceSpec(kind="radial_power", exponent=0.5, m=2.0))


def test_source_validation():
    with pytest.raises(ConfigurationError):
        SourceSpec(kind="nope")
    with pytest.raises(ConfigurationError):
        SourceSpec(value=-1.0)
    with pytest.raises(ConfigurationError):
        SourceSpec(m=0.5)
    with pytest.raises(ConfigurationError):
        SourceSpec(kind="tabulated")


def test_tabulated_source_interpolates():
    grid = (np.linspace(0, 1, 5),)
    src = SourceSpec(kind="tabulated", grid=grid, samples=grid[0] ** 2)
    np.testing.assert_allclose(src(np.array([[0.25], [0.375]])), [0.0625, (0.0625 + 0.25) / 2])


def test_problem_properties():
    spec = ProblemSpec(p=3.0, theta=0.5, dim=2, domain=((0, 2), (0, 3)), source=SourceSpec(m=4.0))
    assert spec.volume == 6.0
    assert spec.m == 4.0 and spec.m_eff == 4.0
    assert spec.gamma_critical == 2.0
    assert ProblemSpec().m_eff == 1e6
