import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singelliptic.errors import DomainError
from singelliptic.grid import DiscreteField, build_mesh, interpolate, lebesgue_norm
from singelliptic.rearrange import (
    PiecewiseField,
    decreasing_rearrangement,
    distribution_function,
    equimeasurability_check,
    read_cell_csv,
    rearranged_norm,
    write_profile_csv,
)


@pytest.fixture
def step():
    return PiecewiseField.steps([2.0, 1.0, 0.0], [0.3, 0.5, 0.2])


@pytest.fixture
def linear():
    mesh = build_mesh([(0, 1)], 8)
    return interpolate(mesh, lambda x: x[:, 0])


def test_step_distribution(step):
    assert distribution_function(step, 0.5) == 0.8
    assert distribution_function(step, 1.5) == 0.3
    assert distribution_function(step, 2.0) == 0.0


def test_step_rearrangement(step):
    prof = decreasing_rearrangement(step)
    s = np.array([0.0, 0.1, 0.299, 0.3, 0.5, 0.799, 0.8, 1.0])
    assert prof.u_star(s).tolist() == [2, 2, 2, 1, 1, 1, 0, 0]


def test_step_equimeasurable(step):
    assert equimeasurability_check(step, lambda t: t) == pytest.approx((1.1, 1.1), abs=1e-15)


def test_linear_distribution(linear):
    assert distribution_function(linear, 0.25) == pytest.approx(0.75, abs=1e-15)


def test_linear_rearrangement(linear):
    prof = decreasing_rearrangement(linear)
    s = np.linspace(0, 1, 41)
    np.testing.assert_allclose(prof.u_star(s), 1 - s, atol=1e-14)
    assert prof.u_star(0.0) == 1.0


def test_linear_equimeasurable(linear):
    lhs, rhs = equimeasurability_check(linear, lambda t: t**2)
    assert lhs == pytest.approx(1 / 3, abs=1e-14) and rhs == pytest.approx(1 / 3, abs=1e-14)


def test_zero_field():
    mesh = build_mesh([(0, 1), (0, 1)], 3)
    zero = DiscreteField(mesh, np.zeros(mesh.n_nodes))
    prof = decreasing_rearrangement(zero)
    assert not prof.u_star(np.linspace(0, 1, 5)).any()
    assert equimeasurability_check(zero, lambda t: t**3) == (0.0, 0.0)


def test_sampled_phi(linear):
    lhs, rhs = equimeasurability_check(linear, ([0, 0.5, 1], [0, 0.25, 1]))
    assert lhs == pytest.approx(rhs, abs=1e-14)
    with pytest.raises(DomainError):
        equimeasurability_check(linear, ([0, 0.5, 1], [0, 0.5, 0.25]))
    with pytest.raises(DomainError):
        equimeasurability_check(linear, lambda t: 1 - t)


def test_negative_level_rejected(linear):
    with pytest.raises(DomainError):
        distribution_function(linear, -1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), dim=st.sampled_from([1, 2]), q=st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_norms_equimeasurable(seed, dim, q):
    rng = np.random.default_rng(seed)
    mesh = build_mesh([(0, 1)] * dim, 7)
    u = DiscreteField(mesh, rng.normal(size=mesh.n_nodes))
    prof = decreasing_rearrangement(u)
    assert rearranged_norm(prof, q) == pytest.approx(lebesgue_norm(u, q), rel=1e-12)
    assert rearranged_norm(prof, np.inf) == pytest.approx(np.abs(u.values).max(), rel=1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), dim=st.sampled_from([1, 2]))
def test_profile_properties(seed, dim):
    rng = np.random.default_rng(seed)
    mesh = build_mesh([(0, 2)] * dim, 5)
    u = DiscreteField(mesh, rng.normal(size=mesh.n_nodes))
    prof = decreasing_rearrangement(u)
    s = np.linspace(0, prof.total_measure, 50)
    us = prof.u_star(s)
    assert np.all(np.diff(us) <= 1e-15)
    t = rng.uniform(0, prof.sup, 30)
    assert np.all(prof.u_star(distribution_function(u, t)) <= t + 1e-12)
    np.testing.assert_allclose(prof.mu(t), distribution_function(u, t), atol=1e-12)


def test_profile_csv(tmp_path, step):
    write_profile_csv(decreasing_rearrangement(step), tmp_path / "p.csv", n_samples=11)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "s,u_star"
    assert lines[1] == "0,2" and lines[-1] == "1,0"


def test_read_cell_csv(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("measure,value\n0.3,2\n0.5,1\n0.2,0\n")
    f = read_cell_csv(p)
    assert f.total_measure == pytest.approx(1.0)
    p.write_text("measure,value\n-0.3,2\n")
    with pytest.raises(DomainError):
        read_cell_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DomainError):
        read_cell_csv(p)
