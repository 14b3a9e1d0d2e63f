"""Run configuration read from INI-style key/value files.

See the README for the full list of sections and keys.  Relative paths are
resolved against the directory holding the config file.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import read_field_csv
from .model import ProblemSpec, SourceSpec
from .solver import NewtonConfig, RegularizationSchedule

SWEEP_AXES = ("gamma", "theta", "m", "resolution")


@dataclass(frozen=True)
class SweepGrid:
    gamma: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    m: tuple[float, ...] = ()
    resolution: tuple[int, ...] = ()

    def cells(self) -> list[dict]:
        """Cartesian product in fixed axis order; any empty axis gives no cells."""
        out = [{}]
        for name in SWEEP_AXES:
            out = [dict(c, **{name: v}) for c in out for v in getattr(self, name)]
        return out


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    resolutions: tuple[int, ...] = (64,)
    schedule: RegularizationSchedule = field(default_factory=RegularizationSchedule)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    output: Path = Path("out")
    seed: int = 0
    slack: float = 0.05
    energy_slack: float = 0.0
    exact: Optional[Path] = None
    sweep: Optional[SweepGrid] = None

    def __post_init__(self):
        if not self.resolutions or any(r < 2 for r in self.resolutions):
            raise ConfigurationError("resolutions must be >= 2")

    def with_cell(self, cell: dict) -> "RunConfig":
        """Copy with one sweep cell's (gamma, theta, m, resolution) applied."""
        src = replace(self.problem.source, m=cell["m"])
        prob = replace(self.problem, gamma=cell["gamma"], theta=cell["theta"], source=src)
        return replace(self, problem=prob, resolutions=(int(cell["resolution"]),), sweep=None)


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"not a number: {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    return tuple(_float(t) for t in text.replace(",", " ").split())


def _int(text: str) -> int:
    val = _float(text)
    if not val.is_integer():
        raise ConfigurationError(f"not an integer: {text!r}")
    return int(val)


def _domain(text: str, dim: int):
    vals = _floats(text)
    if len(vals) != 2 * dim:
        raise ConfigurationError(f"domain needs {2 * dim} numbers for dim={dim}")
    return tuple((vals[2 * k], vals[2 * k + 1]) for k in range(dim))


def _tabulated(path: Path, m: float, dim: int) -> SourceSpec:
    try:
        coords, values = read_field_csv(path)
    except DomainError as exc:
        raise ConfigurationError(str(exc)) from exc
    if coords.shape[1] != dim:
        raise ConfigurationError(f"{path}: source table has dimension {coords.shape[1]}, expected {dim}")
    axes = tuple(np.unique(coords[:, k]) for k in range(dim))
    shape = tuple(len(a) for a in axes)
    if math.prod(shape) != len(values):
        raise ConfigurationError(f"{path}: source samples do not fill a regular grid")
    idx = tuple(np.searchsorted(a, coords[:, k]) for k, a in enumerate(axes))
    samples = np.zeros(shape)
    samples[idx] = values
    return SourceSpec(kind="tabulated", grid=axes, samples=samples, m=m, path=str(path))


def _source(sec, dim: int, base: Path) -> SourceSpec:
    kind = sec.get("source.kind", "constant").strip()
    m = _float(sec.get("source.m", "inf"))
    if kind == "constant":
        return SourceSpec(kind="constant", value=_float(sec.get("source.value", "1")), m=m)
    if kind == "radial_power":
        center = sec.get("source.center")
        return SourceSpec(
            kind="radial_power",
            value=_float(sec.get("source.value", "1")),
            exponent=_float(sec.get("source.exponent", "0")),
            center=_floats(center) if center else None,
            m=m,
        )
    if kind == "tabulated":
        if "source.path" not in sec:
            raise ConfigurationError("tabulated source needs source.path")
        return _tabulated(base / sec["source.path"].strip(), m, dim)
    raise ConfigurationError(f"unknown source kind {kind!r}")


def _problem(cp, base: Path) -> ProblemSpec:
    if not cp.has_section("problem"):
        raise ConfigurationError("missing [problem] section")
    sec = cp["problem"]
    dim = _int(sec.get("dim", "1"))
    kw = {k: _float(sec[k]) for k in ("p", "theta", "alpha", "gamma", "C") if k in sec}
    domain = _domain(sec["domain"], dim) if "domain" in sec else tuple((0.0, 1.0) for _ in range(dim))
    return ProblemSpec(dim=dim, domain=domain, source=_source(sec, dim, base), **kw)


_NEWTON_CASTS = {f.name: f.type for f in fields(NewtonConfig)}


def _newton(cp) -> NewtonConfig:
    if not cp.has_section("newton"):
        return NewtonConfig()
    kw = {}
    for key, text in cp["newton"].items():
        if key not in _NEWTON_CASTS:
            raise ConfigurationError(f"unknown [newton] key {key!r}")
        if key == "backend":
            kw[key] = text.strip() or None
        elif key in ("max_iter", "max_backtracks", "picard_after", "quad_points"):
            kw[key] = _int(text)
        else:
            kw[key] = _float(text)
    return NewtonConfig(**kw)


def _schedule(cp) -> RegularizationSchedule:
    if not cp.has_section("schedule"):
        return RegularizationSchedule()
    sec = cp["schedule"]
    kw = {}
    if "outer_tol" in sec:
        kw["outer_tol"] = _float(sec["outer_tol"])
    if "warmup" in sec:
        kw["warmup"] = _int(sec["warmup"])
    if "max_outer" in sec:
        kw["max_outer"] = _int(sec["max_outer"])
    if "n_values" in sec:
        return RegularizationSchedule(n_values=_floats(sec["n_values"]), **kw)
    k_max = _int(sec.get("k_max", "14"))
    return RegularizationSchedule.doubling(k_max, start=_float(sec.get("n_start", "1")), **kw)


def _sweep(cp) -> Optional[SweepGrid]:
    if not cp.has_section("sweep"):
        return None
    sec = cp["sweep"]
    unknown = set(sec) - set(SWEEP_AXES)
    if unknown:
        raise ConfigurationError(f"unknown [sweep] keys {sorted(unknown)}")
    return SweepGrid(
        gamma=_floats(sec.get("gamma", "")),
        theta=_floats(sec.get("theta", "")),
        m=_floats(sec.get("m", "")),
        resolution=tuple(_int(t) for t in sec.get("resolution", "").replace(",", " ").split()),
    )


def _apply_overrides(cp, overrides):
    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not (sep and dot and section and key):
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp[section][key] = value.strip()


def load_config(path, output: Optional[str] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """Parse ``path``; raises ConfigurationError for every kind of bad input.

    ``overrides`` are ``section.key=value`` strings applied after reading.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case sensitive (C)
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    _apply_overrides(cp, overrides)
    base = path.parent
    mesh = cp["mesh"] if cp.has_section("mesh") else {}
    if "resolutions" in mesh:
        res = tuple(_int(t) for t in mesh["resolutions"].replace(",", " ").split())
    else:
        res = (_int(mesh.get("resolution", "64")),)
    out = cp["output"] if cp.has_section("output") else {}
    verify = cp["verify"] if cp.has_section("verify") else {}
    exact = out.get("exact")
    return RunConfig(
        problem=_problem(cp, base),
        resolutions=res,
        schedule=_schedule(cp),
        newton=_newton(cp),
        output=Path(output) if output else base / out.get("directory", "out"),
        seed=_int(out.get("seed", "0")),
        slack=_float(verify.get("slack", "0.05")),
        energy_slack=_float(verify.get("energy_slack", "0")),
        exact=base / exact if exact else None,
        sweep=_sweep(cp),
    )
