import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singelliptic.errors import ConfigurationError, DomainError
from singelliptic.grid import (
    DiscreteField,
    build_mesh,
    field_from_csv,
    interpolate,
    lebesgue_norm,
    power_transform,
    read_field_csv,
    simplex_rule,
    sobolev_seminorm,
    split_by_sign,
    write_field_csv,
    write_mesh_json,
)


def test_mesh_1d_counts():
    mesh = build_mesh([(0, 1)], 4)
    assert mesh.n_nodes == 5 and mesh.n_cells == 4
    assert sorted(mesh.boundary_nodes.tolist()) == [0, 4]


def test_mesh_2d_counts():
    mesh = build_mesh([(0, 1), (0, 1)], 2)
    assert mesh.n_nodes == 9 and mesh.n_cells == 8
    assert len(mesh.boundary_nodes) == 8
    assert mesh.vols.sum() == pytest.approx(1.0)


def test_mesh_h():
    assert build_mesh([(0, 2)], 4).h == 0.5


def test_mesh_resolution_guard():
    with pytest.raises(ConfigurationError):
        build_mesh([(0, 1)], 1)


def test_lumped_mass_sums_to_volume():
    mesh = build_mesh([(0, 2), (0, 1)], (4, 3))
    assert mesh.lumped_mass.sum() == pytest.approx(2.0)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("npts", [1, 2, 3, 5, 8])
def test_simplex_rule_exactness(dim, npts):
    lam, w = simplex_rule(dim, npts)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    deg = 2 * npts - 1 if dim == 1 else 2 * npts - 1
    # mean of lambda_0^k over the reference simplex is k! dim! / (k + dim)!
    for k in range(deg + 1):
        exact = math.factorial(k) * math.factorial(dim) / math.factorial(k + dim)
        assert np.dot(w, lam[:, 0] ** k) == pytest.approx(exact, rel=1e-12)


def test_norm_examples():
    mesh = build_mesh([(0, 1)], 8)
    assert lebesgue_norm(DiscreteField(mesh, np.full(9, 3.0)), 2) == pytest.approx(3.0, rel=1e-14)
    x = interpolate(mesh, lambda p: p[:, 0])
    assert abs(lebesgue_norm(x, 1) - 0.5) <= 1e-12
    zero = DiscreteField(mesh, np.zeros(9))
    for q in (1, 1.5, 2, math.inf):
        assert lebesgue_norm(zero, q) == 0.0
    with pytest.raises(DomainError):
        lebesgue_norm(x, 0.5)


def test_fractional_norm_of_linear_function():
    mesh = build_mesh([(0, 1)], 3)
    x = interpolate(mesh, lambda p: p[:, 0])
    # int_0^1 x^1.5 = 1/2.5
    assert lebesgue_norm(x, 1.5) == pytest.approx(0.4 ** (1 / 1.5), rel=1e-14)


def test_fractional_norm_2d_against_fine_rule(rng):
    mesh = build_mesh([(0, 1), (0, 1)], 6)
    u = DiscreteField(mesh, rng.normal(size=mesh.n_nodes))
    vals, vols = split_by_sign(u.values[mesh.cells], mesh.vols)
    lam, w = simplex_rule(2, 40)
    ref = np.sum(vols * (np.abs(vals @ lam.T) ** 1.7 @ w)) ** (1 / 1.7)
    assert lebesgue_norm(u, 1.7) == pytest.approx(ref, rel=1e-9)


def test_norm_error_estimate_reported(rng):
    mesh = build_mesh([(0, 1)], 16)
    u = DiscreteField(mesh, rng.normal(size=17))
    norm, err = lebesgue_norm(u, 1.5, return_error=True)
    assert norm > 0 and err >= 0
    assert lebesgue_norm(u, 2, return_error=True)[1] == 0.0


def test_split_by_sign_preserves_integral(rng):
    mesh = build_mesh([(0, 1), (0, 1)], 5)
    u = rng.normal(size=mesh.n_nodes)
    vals, vols = split_by_sign(u[mesh.cells], mesh.vols)
    assert vols.sum() == pytest.approx(1.0)
    # each piece keeps one sign
    assert np.all((vals >= -1e-15).all(axis=1) | (vals <= 1e-15).all(axis=1))
    lam, w = simplex_rule(2, 3)
    assert np.sum(vols * ((vals @ lam.T) @ w)) == pytest.approx(np.sum(mesh.vols * u[mesh.cells].mean(1)))


def test_seminorm_examples():
    mesh = build_mesh([(0, 1)], 2)
    assert sobolev_seminorm(DiscreteField(mesh, np.array([0.0, 0.5, 1.0])), 2) == pytest.approx(1.0)
    assert sobolev_seminorm(DiscreteField(mesh, np.array([0.0, 1.0, 0.0])), 2) == pytest.approx(2.0)
    assert sobolev_seminorm(DiscreteField(mesh, np.full(3, 4.0)), 3) == 0.0


def test_seminorm_2d_linear():
    mesh = build_mesh([(0, 1), (0, 1)], 4)
    u = interpolate(mesh, lambda p: 3 * p[:, 0] + 4 * p[:, 1])
    assert sobolev_seminorm(u, 1.5) == pytest.approx(5.0, rel=1e-13)


def test_power_transform():
    mesh = build_mesh([(0, 1)], 2)
    np.testing.assert_allclose(power_transform(DiscreteField(mesh, np.full(3, 4.0)), 0.5).values, 2.0)
    np.testing.assert_allclose(power_transform(DiscreteField(mesh, np.array([0.0, 1, 4])), 2).values, [0, 1, 16])
    assert not power_transform(DiscreteField(mesh, np.zeros(3)), 0.3).values.any()
    with pytest.raises(DomainError):
        power_transform(DiscreteField(mesh, np.array([0.0, -1, 0])), 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.floats(-2, 2), st.floats(-2, 2))
def test_at_reproduces_linear_functions(nx, ny, a, b):
    mesh = build_mesh([(0, 1), (0, 2)], (nx, ny))
    u = interpolate(mesh, lambda p: a * p[:, 0] + b * p[:, 1] + 1)
    pts = np.random.default_rng(0).random((20, 2)) * [1, 2]
    np.testing.assert_allclose(u.at(pts), a * pts[:, 0] + b * pts[:, 1] + 1, atol=1e-12)


@pytest.mark.parametrize("domain,res", [([(0, 1)], 7), ([(0, 1), (0, 2)], (3, 4))])
def test_csv_roundtrip_bit_exact(tmp_path, rng, domain, res):
    mesh = build_mesh(domain, res)
    u = DiscreteField(mesh, rng.random(mesh.n_nodes))
    write_field_csv(u, tmp_path / "u.csv")
    v = field_from_csv(tmp_path / "u.csv")
    np.testing.assert_array_equal(v.values, u.values)
    np.testing.assert_array_equal(v.mesh.nodes, mesh.nodes)
    write_mesh_json(mesh, tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text())["n_nodes"] == mesh.n_nodes


def test_csv_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,value\n0,1\n0.5,oops\n")
    with pytest.raises(DomainError):
        read_field_csv(p)
    p.write_text("x,value\n")
    with pytest.raises(DomainError):
        read_field_csv(p)
    with pytest.raises(DomainError):
        read_field_csv(tmp_path / "missing.csv")
