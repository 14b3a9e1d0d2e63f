"""Structured simplicial meshes, P1 fields and their norms."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

FLOAT_FMT = "{:.17g}"


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform simplicial mesh of an axis-aligned box.

    Attributes
    ----------
    nodes : (n_nodes, dim) coordinates
    cells : (n_cells, dim + 1) connectivity
    boundary_nodes : sorted indices of nodes on the box boundary
    grads : (n_cells, dim + 1, dim) gradients of the P1 basis functions
    vols : (n_cells,) element volumes
    """

    dim: int
    domain: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    nodes: np.ndarray
    cells: np.ndarray
    boundary_nodes: np.ndarray
    grads: np.ndarray
    vols: np.ndarray
    h: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def volume(self) -> float:
        return math.prod(hi - lo for lo, hi in self.domain)

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @property
    def lumped_mass(self) -> np.ndarray:
        """Vertex-quadrature weights: each node gets 1/(dim+1) of its cells' volume."""
        out = np.zeros(self.n_nodes)
        share = np.repeat(self.vols / (self.dim + 1), self.dim + 1)
        np.add.at(out, self.cells.ravel(), share)
        return out

    def metadata(self) -> dict:
        return {
            "dim": self.dim,
            "domain": [list(d) for d in self.domain],
            "resolution": list(self.resolution),
            "h": self.h,
            "n_nodes": self.n_nodes,
            "n_cells": self.n_cells,
        }


def build_mesh(domain: Sequence[Sequence[float]], resolution) -> Mesh:
    """Uniform mesh of ``domain`` with ``resolution`` cells per axis.

    In 2D each grid square is split into two triangles along its
    lower-left/upper-right diagonal.
    """
    domain = tuple((float(lo), float(hi)) for lo, hi in domain)
    dim = len(domain)
    if isinstance(resolution, (int, np.integer)):
        resolution = (int(resolution),) * dim
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != dim:
        raise ConfigurationError("resolution must give one entry per axis")
    if min(resolution) < 2:
        raise ConfigurationError("resolution must be >= 2")
    if any(hi <= lo for lo, hi in domain):
        raise ConfigurationError("domain extents must be strictly positive")

    axes = [np.linspace(lo, hi, r + 1) for (lo, hi), r in zip(domain, resolution)]
    if dim == 1:
        (nx,) = resolution
        nodes = axes[0][:, None]
        cells = np.column_stack([np.arange(nx), np.arange(1, nx + 1)])
        boundary = np.array([0, nx])
    elif dim == 2:
        nx, ny = resolution
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        i, j = i.ravel(), j.ravel()
        n00 = j * (nx + 1) + i
        n10 = n00 + 1
        n01 = n00 + nx + 1
        n11 = n01 + 1
        lower = np.column_stack([n00, n10, n11])
        upper = np.column_stack([n00, n11, n01])
        cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
        ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
        on_bdry = (ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)
        boundary = np.flatnonzero(on_bdry.ravel())
    else:
        raise ConfigurationError("only 1D and 2D meshes are supported")

    grads, vols = _p1_geometry(nodes, cells)
    spacing = [(hi - lo) / r for (lo, hi), r in zip(domain, resolution)]
    h = float(math.sqrt(sum(s * s for s in spacing)))
    return Mesh(
        dim=dim,
        domain=domain,
        resolution=resolution,
        nodes=nodes,
        cells=cells.astype(np.int64),
        boundary_nodes=np.asarray(boundary, dtype=np.int64),
        grads=grads,
        vols=vols,
        h=h,
    )


def _p1_geometry(nodes, cells):
    x = nodes[cells]  # (E, d+1, d)
    d = nodes.shape[1]
    B = x[:, 1:, :] - x[:, :1, :]  # rows are edge vectors
    det = np.linalg.det(B)
    vols = np.abs(det) / math.factorial(d)
    if np.any(vols <= 0):
        raise ConfigurationError("degenerate element")
    Binv = np.linalg.inv(B)  # columns give grads of lambda_1..lambda_d
    g = np.transpose(Binv, (0, 2, 1))
    grads = np.concatenate([-g.sum(axis=1, keepdims=True), g], axis=1)
    return grads, vols


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """Nodal values of a P1 function on ``mesh``."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.mesh.n_nodes:
            raise DomainError("field length does not match mesh")
        if not np.all(np.isfinite(values)):
            raise DomainError("field values must be finite")
        object.__setattr__(self, "values", values)

    def __mul__(self, c: float) -> "DiscreteField":
        return DiscreteField(self.mesh, c * self.values)

    __rmul__ = __mul__

    def __sub__(self, other: "DiscreteField") -> "DiscreteField":
        return DiscreteField(self.mesh, self.values - other.values)

    def gradients(self) -> np.ndarray:
        """Element-wise constant gradient, shape (n_cells, dim)."""
        return np.einsum("ekd,ek->ed", self.mesh.grads, self.values[self.mesh.cells])

    def max(self) -> float:
        return float(np.max(np.abs(self.values)))

    def at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the P1 interpolant at points of a 1D mesh or a structured 2D mesh."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = self.mesh
        if m.dim == 1:
            return np.interp(pts[:, 0], m.nodes[:, 0], self.values)
        (x0, x1), (y0, y1) = m.domain
        nx, ny = m.resolution
        sx = (pts[:, 0] - x0) / (x1 - x0) * nx
        sy = (pts[:, 1] - y0) / (y1 - y0) * ny
        i = np.clip(np.floor(sx).astype(int), 0, nx - 1)
        j = np.clip(np.floor(sy).astype(int), 0, ny - 1)
        a, b = sx - i, sy - j
        v = self.values.reshape(ny + 1, nx + 1)
        v00, v10, v01, v11 = v[j, i], v[j, i + 1], v[j + 1, i], v[j + 1, i + 1]
        lower = a >= b
        return np.where(
            lower,
            v00 + a * (v10 - v00) + b * (v11 - v10),
            v00 + b * (v01 - v00) + a * (v11 - v01),
        )


def interpolate(mesh: Mesh, func) -> DiscreteField:
    return DiscreteField(mesh, np.asarray(func(mesh.nodes), dtype=float).reshape(-1))


# --------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=None)
def simplex_rule(dim: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on the reference simplex as (barycentric coords, weights summing to 1).

    1D uses ``npts``-point Gauss-Legendre; 2D the collapsed (Duffy) tensor rule
    with ``npts`` points per direction.  Both are exact to degree ``2*npts - 1``.
    """
    if dim == 1:
        x, w = np.polynomial.legendre.leggauss(npts)
        s = 0.5 * (x + 1.0)
        lam = np.column_stack([1.0 - s, s])
        return lam, 0.5 * w
    if dim == 2:
        x, w = np.polynomial.legendre.leggauss(npts)
        s = 0.5 * (x + 1.0)
        wx = 0.5 * w
        # Gauss-Jacobi in the collapsed direction absorbs the Jacobian (1 - b)
        xj, wj = _gauss_jacobi_10(npts)
        a, b = np.meshgrid(s, xj, indexing="ij")
        wa, wb = np.meshgrid(wx, wj, indexing="ij")
        l1 = (a * (1.0 - b)).ravel()
        l2 = b.ravel()
        lam = np.column_stack([1.0 - l1 - l2, l1, l2])
        weights = (wa * wb).ravel()
        return lam, weights / weights.sum()
    raise ConfigurationError("quadrature only for dim 1 and 2")


def _gauss_jacobi_10(npts):
    """Nodes/weights on [0, 1] for the weight ``1 - t`` (unnormalized)."""
    from scipy.special import roots_jacobi

    x, w = roots_jacobi(npts, 1.0, 0.0)
    return 0.5 * (x + 1.0), w


def split_by_sign(values: np.ndarray, vols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split linear simplices so that no piece changes sign.

    Works on value simplices only: an integral of ``g(u)`` over a simplex with
    linear ``u`` depends on vertex values and volume alone.  Returns arrays of
    the same layout, (n_pieces, dim + 1) and (n_pieces,).
    """
    values = np.asarray(values, dtype=float)
    k = values.shape[1]
    pos = values > 0
    neg = values < 0
    mixed = pos.any(axis=1) & neg.any(axis=1)
    if not mixed.any():
        return values, vols
    keep_v, keep_w = values[~mixed], vols[~mixed]
    mv, mw = values[mixed], vols[mixed]
    if k == 2:
        a, b = mv[:, 0], mv[:, 1]
        s = a / (a - b)
        z = np.zeros_like(a)
        pieces_v = [np.column_stack([a, z]), np.column_stack([z, b])]
        pieces_w = [mw * s, mw * (1.0 - s)]
    elif k == 3:
        # isolated vertex: nonzero, and no other vertex shares its sign
        sgn = np.sign(mv)
        iso = np.full(len(mv), -1)
        for r in range(3):
            o1, o2 = (r + 1) % 3, (r + 2) % 3
            cond = (sgn[:, r] != 0) & (sgn[:, o1] * sgn[:, r] <= 0) & (sgn[:, o2] * sgn[:, r] <= 0)
            iso = np.where((iso < 0) & cond, r, iso)
        rows = np.arange(len(mv))
        a = mv[rows, iso]
        b = mv[rows, (iso + 1) % 3]
        c = mv[rows, (iso + 2) % 3]
        s1 = a / (a - b)
        s2 = a / (a - c)
        z = np.zeros_like(a)
        pieces_v = [
            np.column_stack([a, z, z]),
            np.column_stack([b, c, z]),
            np.column_stack([c, z, z]),
        ]
        pieces_w = [mw * s1 * s2, mw * (1.0 - s1), mw * s1 * (1.0 - s2)]
    else:
        raise ConfigurationError("sign splitting only for dim 1 and 2")
    return (
        np.concatenate([keep_v] + pieces_v),
        np.concatenate([keep_w] + pieces_w),
    )


def _integrate_abs_power(values, vols, q, npts):
    lam, w = simplex_rule(values.shape[1] - 1, npts)
    at_q = np.abs(values @ lam.T)  # (E, Q)
    return float(np.sum(vols * ((at_q**q) @ w)))


# relative spread below which a piece is integrated by Gauss instead of closed forms
_NARROW = 0.1


def _weighted_power(a, b, q, rising):
    """``int_0^1 (a + (b-a)s)^q w(s) ds`` with ``w = s`` (rising) or ``1 - s``, for 0 <= a < b."""
    d = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        i1 = (b ** (q + 1) - a ** (q + 1)) / ((q + 1) * d)
        i_s = ((b ** (q + 2) - a ** (q + 2)) / ((q + 2) * d) - a * i1) / d
    return i_s if rising else i1 - i_s


def _exact_abs_power(values, vols, q):
    """Closed-form ``int |u|^q`` over sign-split pieces; narrow pieces fall back to Gauss."""
    v = np.sort(np.abs(values), axis=1)
    lo, hi = v[:, 0], v[:, -1]
    narrow = (hi - lo) <= _NARROW * hi
    total = _integrate_abs_power(v[narrow], vols[narrow], q, 5) if narrow.any() else 0.0
    v, w = v[~narrow], vols[~narrow]
    if len(v) == 0:
        return total
    if v.shape[1] == 2:
        a, b = v[:, 0], v[:, 1]
        mean = (b ** (q + 1) - a ** (q + 1)) / ((q + 1) * (b - a))
        return total + float(np.sum(w * mean))
    # the value of a linear function on a triangle has a triangular density on [a, c] with mode b
    a, b, c = v[:, 0], v[:, 1], v[:, 2]
    mean = np.zeros(len(v))
    left = b > a
    right = c > b
    if left.any():
        aa, bb, cc = a[left], b[left], c[left]
        part = _piece(aa, bb, q, rising=True)
        mean[left] += 2.0 * (bb - aa) * part / (cc - aa)
    if right.any():
        aa, bb, cc = a[right], b[right], c[right]
        part = _piece(bb, cc, q, rising=False)
        mean[right] += 2.0 * (cc - bb) * part / (cc - aa)
    return total + float(np.sum(w * mean))


def _piece(a, b, q, rising):
    """``_weighted_power`` with a Gauss fallback where ``[a, b]`` is narrow."""
    out = np.empty(len(a))
    narrow = (b - a) <= _NARROW * b
    if narrow.any():
        x, wg = np.polynomial.legendre.leggauss(8)
        s = 0.5 * (x + 1.0)
        wg = 0.5 * wg
        weight = s if rising else 1.0 - s
        an, bn = a[narrow, None], b[narrow, None]
        out[narrow] = ((an + (bn - an) * s) ** q * weight) @ wg
    if (~narrow).any():
        out[~narrow] = _weighted_power(a[~narrow], b[~narrow], q, rising)
    return out


def lebesgue_norm(u: DiscreteField, q: float, return_error: bool = False):
    """``L^q`` norm of the P1 interpolant; ``q = inf`` gives the nodal maximum.

    Elements are first split where ``u`` changes sign so ``|u|`` is linear on
    every piece.  Integer ``q`` is integrated exactly by Gauss rules.  For
    fractional ``q`` closed forms are used piece by piece (Gauss on nearly
    constant pieces); ``return_error=True`` also returns the gap to the plain
    5-point Gauss rule as a quadrature error indicator.
    """
    if q == math.inf:
        val = u.max()
        return (val, 0.0) if return_error else val
    if not q >= 1:
        raise DomainError("lebesgue_norm needs q >= 1")
    values, vols = split_by_sign(u.values[u.mesh.cells], u.mesh.vols)
    if float(q).is_integer():
        npts = max(5, math.ceil((q + 1) / 2))
        norm = _integrate_abs_power(values, vols, q, npts) ** (1.0 / q)
        return (norm, 0.0) if return_error else norm
    norm = _exact_abs_power(values, vols, q) ** (1.0 / q)
    if not return_error:
        return norm
    gauss = _integrate_abs_power(values, vols, q, 5) ** (1.0 / q)
    return norm, abs(norm - gauss)


def sobolev_seminorm(u: DiscreteField, p: float) -> float:
    if not p >= 1:
        raise DomainError("sobolev_seminorm needs p >= 1")
    g = np.linalg.norm(u.gradients(), axis=1)
    return float(np.sum(g**p * u.mesh.vols) ** (1.0 / p))


def power_transform(u: DiscreteField, e: float) -> DiscreteField:
    if not e > 0:
        raise DomainError("power_transform needs e > 0")
    if np.any(u.values < 0):
        raise DomainError("power_transform needs nonnegative nodal values")
    return DiscreteField(u.mesh, u.values**e)


# --------------------------------------------------------------------------
# I/O


def write_field_csv(u: DiscreteField, path, value_name: str = "value") -> None:
    path = Path(path)
    axes = ["x", "y", "z"][: u.mesh.dim]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(axes + [value_name])
        for coords, v in zip(u.mesh.nodes, u.values):
            writer.writerow([FLOAT_FMT.format(c) for c in coords] + [FLOAT_FMT.format(v)])


def write_mesh_json(mesh: Mesh, path) -> None:
    Path(path).write_text(json.dumps(mesh.metadata(), indent=2, sort_keys=True) + "\n")


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (coords, values) from a field CSV; raises DomainError when malformed."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DomainError(f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    ncol = len(header)
    if ncol not in (2, 3):
        raise DomainError(f"{path}: expected 2 or 3 columns, got {ncol}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DomainError(f"{path}: non-numeric entry") from exc
    if data.ndim != 2 or data.shape[1] != ncol or not np.all(np.isfinite(data)):
        raise DomainError(f"{path}: ragged or non-finite rows")
    return data[:, :-1], data[:, -1]


def field_from_csv(path) -> DiscreteField:
    """Rebuild a field on the structured mesh implied by the CSV coordinates."""
    coords, values = read_field_csv(path)
    dim = coords.shape[1]
    axes = [np.unique(coords[:, k]) for k in range(dim)]
    domain = [(a[0], a[-1]) for a in axes]
    resolution = [len(a) - 1 for a in axes]
    mesh = build_mesh(domain, resolution)
    if mesh.n_nodes != len(values):
        raise DomainError("CSV does not describe a full structured grid")
    # match rows to mesh nodes
    idx = [np.searchsorted(a, coords[:, k]) for k, a in enumerate(axes)]
    if dim == 1:
        flat = idx[0]
    else:
        flat = idx[1] * (resolution[0] + 1) + idx[0]
    if len(np.unique(flat)) != len(flat):
        raise DomainError("CSV has duplicate grid points")
    out = np.empty(mesh.n_nodes)
    out[flat] = values
    return DiscreteField(mesh, out)
