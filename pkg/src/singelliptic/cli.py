"""Command line entry point: ``singelliptic solve | sweep | verify | exponents | rearrange``.

Exit codes: 0 success, 1 a gating bound check failed (verify), 2 bad
configuration or input file, 3 solver failure (Newton divergence, singular
Jacobian, or the outer loop not converging), 4 non-contractive outer loop.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import serialize
from .config import RunConfig, load_config
from .errors import ConfigurationError, DomainError, NewtonDivergence, SingularJacobian
from .estimates import exponents_for, verify
from .grid import build_mesh, field_from_csv, lebesgue_norm, read_field_csv, write_field_csv, write_mesh_json
from .rearrange import (
    PiecewiseField,
    decreasing_rearrangement,
    distribution_function,
    read_cell_csv,
    rearranged_norm,
    write_profile_csv,
)
from .solver import solve_singular

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_NON_CONTRACTIVE = 4

log = logging.getLogger("singelliptic")

SWEEP_COLUMNS = (
    "index", "gamma", "theta", "m", "resolution", "status", "error", "regime",
    "m1", "r", "sigma", "nu", "lambda", "c_inf", "linf_observed", "energy_observed",
    "energy_bound", "energy_bound_sharp", "power_energy_observed", "power_energy_bound",
    "critical_energy_observed", "critical_energy_bound", "converged", "non_contractive",
    "final_n", "linf", "energy", "power_energy", "critical_energy", "passed",
)
CONVERGENCE_COLUMNS = ("resolution", "h", "max_u", "linf_error", "ratio")


class SolverFailure(Exception):
    def __init__(self, info: dict):
        super().__init__(info.get("message", ""))
        self.info = info


def _run(cfg: RunConfig, resolution: int):
    mesh = build_mesh(cfg.problem.domain, resolution)
    try:
        return solve_singular(cfg.problem, mesh, cfg.schedule, cfg.newton)
    except (NewtonDivergence, SingularJacobian) as exc:
        info = {"error": type(exc).__name__, "message": str(exc), "resolution": resolution}
        if isinstance(exc, NewtonDivergence):
            info.update(n=exc.n, residual=exc.residual)
        raise SolverFailure(info) from exc


def _outdir(cfg: RunConfig, resolution: int) -> Path:
    d = cfg.output if len(cfg.resolutions) == 1 else cfg.output / f"res{resolution}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _status(result) -> int:
    if not result.converged:
        return EXIT_SOLVER
    if result.non_contractive:
        return EXIT_NON_CONTRACTIVE
    return EXIT_OK


def _exact_error(result, exact_path: Path) -> float:
    coords, values = read_field_csv(exact_path)
    return float(np.max(np.abs(result.field.at(coords) - values)))


def cmd_solve(args) -> int:
    cfg = load_config(args.config, args.output, args.set)
    code = EXIT_OK
    table = []
    for res in cfg.resolutions:
        out = _outdir(cfg, res)
        try:
            result = _run(cfg, res)
        except SolverFailure as exc:
            serialize.write_json(exc.info, out / "failure.json")
            print(f"solver failure at resolution {res}: {exc.info['message']}", file=sys.stderr)
            return EXIT_SOLVER
        write_field_csv(result.field, out / "solution.csv", "u")
        write_mesh_json(result.field.mesh, out / "mesh.json")
        serialize.write_json(serialize.result_summary(result), out / "result.json")
        serialize.write_rows(out / "history.csv", serialize.HISTORY_COLUMNS, serialize.history_rows(result))
        err = _exact_error(result, cfg.exact) if cfg.exact else None
        ratio = table[-1]["linf_error"] / err if table and err else None
        table.append({"resolution": res, "h": result.field.mesh.h, "max_u": result.field.max(),
                      "linf_error": err, "ratio": ratio})
        print(f"resolution {res}: max u = {result.field.max():.6g}, n = {result.final_n:g}, "
              f"converged = {result.converged}, non_contractive = {result.non_contractive}"
              + (f", linf error = {err:.3e}" if err is not None else ""))
        code = max(code, _status(result))
    cfg.output.mkdir(parents=True, exist_ok=True)
    serialize.write_rows(cfg.output / "convergence.csv", CONVERGENCE_COLUMNS, table)
    return code


def cmd_verify(args) -> int:
    cfg = load_config(args.config, args.output, args.set)
    code = EXIT_OK
    for res in cfg.resolutions:
        out = _outdir(cfg, res)
        try:
            result = _run(cfg, res)
        except SolverFailure as exc:
            serialize.write_json(exc.info, out / "failure.json")
            print(f"solver failure at resolution {res}: {exc.info['message']}", file=sys.stderr)
            return EXIT_SOLVER
        report = verify(cfg.problem, result, slack=cfg.slack, energy_slack=cfg.energy_slack)
        serialize.write_json(report.to_dict(), out / "report.json")
        serialize.write_rows(out / "report.csv", serialize.REPORT_COLUMNS, serialize.report_rows(report))
        print(f"resolution {res}: regime {report.regime}")
        for c in report.checks:
            extra = f" predicted={c.predicted:.6g} observed={c.observed:.6g}" if (
                c.predicted is not None and c.observed is not None) else ""
            print(f"  {c.name:22s} {c.status}{extra}" + (f" ({c.reason})" if c.reason else ""))
        status = _status(result)
        if status != EXIT_OK:
            code = max(code, status)
        elif not report.passed:
            code = max(code, EXIT_CHECK_FAILED)
    return code


def cmd_exponents(args) -> int:
    es = exponents_for(args.N, args.p, args.theta, args.gamma, args.m)
    print(serialize.dumps(es.to_dict()), end="")
    return EXIT_OK


def _sweep_cell(job) -> dict:
    """Run one sweep cell; every failure is captured in the returned row."""
    index, cfg, cell = job
    row = dict(cell, index=index)
    try:
        ccfg = cfg.with_cell(cell)
        result = _run(ccfg, ccfg.resolutions[0])
        rep = verify(ccfg.problem, result, slack=ccfg.slack, energy_slack=ccfg.energy_slack)
    except SolverFailure as exc:
        return dict(row, status="error", error=f"{exc.info['error']}: {exc.info['message']}")
    except (ConfigurationError, DomainError) as exc:
        return dict(row, status="error", error=f"{type(exc).__name__}: {exc}")
    row.update(status="ok", error="", regime=rep.regime, converged=result.converged,
               non_contractive=result.non_contractive, final_n=result.final_n, passed=rep.passed)
    for key in ("c_inf", "linf_observed", "energy_observed", "energy_bound", "energy_bound_sharp",
                "power_energy_observed", "power_energy_bound", "critical_energy_observed",
                "critical_energy_bound"):
        row[key] = getattr(rep, key)
    if rep.exponents:
        for key in ("m1", "r", "sigma", "nu", "lambda"):
            row[key] = rep.exponents.get(key)
    for c in rep.checks:
        if c.name in ("linf", "energy", "power_energy", "critical_energy"):
            row[c.name] = c.status
    return row


def _jobs(value: Optional[int]) -> int:
    if value is None:
        env = os.environ.get("SINGELLIPTIC_JOBS", "1")
        try:
            value = int(env)
        except ValueError:
            raise ConfigurationError(f"SINGELLIPTIC_JOBS must be an integer, got {env!r}") from None
    if value < 1:
        raise ConfigurationError("--jobs must be >= 1")
    return value


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.output, args.set)
    if cfg.sweep is None:
        raise ConfigurationError("sweep needs a [sweep] section")
    jobs = _jobs(args.jobs)
    work = [(k, cfg, cell) for k, cell in enumerate(cfg.sweep.cells())]
    if jobs == 1 or len(work) <= 1:
        rows = [_sweep_cell(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            # map keeps submission order, so the table does not depend on scheduling
            rows = list(pool.map(_sweep_cell, work))
    cfg.output.mkdir(parents=True, exist_ok=True)
    path = cfg.output / "sweep.csv"
    serialize.write_rows(path, SWEEP_COLUMNS, rows)
    ok = sum(r["status"] == "ok" for r in rows)
    print(f"{len(rows)} cells, {ok} succeeded -> {path}")
    return EXIT_OK if ok or not rows else EXIT_SOLVER


def _load_rearrange_input(path: Path):
    with path.open() as fh:
        header = fh.readline().strip().replace(" ", "")
    if header == "measure,value":
        return read_cell_csv(path)
    return field_from_csv(path)


def cmd_rearrange(args) -> int:
    path = Path(args.field)
    if not path.is_file():
        raise ConfigurationError(f"file not found: {path}")
    u = _load_rearrange_input(path)
    prof = decreasing_rearrangement(u)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_profile_csv(prof, out, n_samples=args.samples)
    checks = []
    for q in args.q:
        if isinstance(u, PiecewiseField):
            # step input: every piece is constant
            lhs = float(np.sum(u.vols * np.abs(u.values[:, 0]) ** q)) ** (1.0 / q)
        else:
            lhs = lebesgue_norm(u, q)
        rhs = rearranged_norm(prof, q)
        checks.append({"q": q, "norm_field": lhs, "norm_rearranged": rhs, "difference": abs(lhs - rhs)})
    ts = np.linspace(0.0, prof.sup, 101)[1:-1] if prof.sup > 0 else np.zeros(0)
    excess = float(np.max(prof.u_star(distribution_function(u, ts)) - ts)) if len(ts) else 0.0
    summary = {
        "total_measure": prof.total_measure,
        "sup": prof.sup,
        "breakpoints": len(prof.levels),
        "norms": checks,
        "max_ustar_of_mu_minus_t": excess,
    }
    text = serialize.dumps(summary)
    if args.summary:
        Path(args.summary).write_text(text)
    print(text, end="")
    return EXIT_OK


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return val


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="singelliptic", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="INI configuration file")
        sp.add_argument("-o", "--output", help="output directory (overrides [output] directory)")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config entry; repeatable")
        return sp

    with_config("solve", "solve the singular problem for each configured resolution").set_defaults(func=cmd_solve)
    with_config("verify", "solve and check the a priori bounds").set_defaults(func=cmd_verify)
    sp = with_config("sweep", "run the [sweep] parameter grid")
    sp.add_argument("-j", "--jobs", type=_positive_int, default=None,
                    help="worker processes (default: $SINGELLIPTIC_JOBS or 1)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("exponents", help="print the derived exponents and regime as JSON")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--m", type=float, default=math.inf)
    sp.set_defaults(func=cmd_exponents)

    sp = sub.add_parser("rearrange", help="decreasing rearrangement of a field CSV")
    sp.add_argument("field", help="field CSV (x[,y],value) or step CSV (measure,value)")
    sp.add_argument("-o", "--out", default="profile.csv", help="profile CSV path")
    sp.add_argument("--summary", help="also write the JSON summary here")
    sp.add_argument("--samples", type=_positive_int, default=201)
    sp.add_argument("--q", type=float, action="append", default=None,
                    help="norm exponents for the equimeasurability summary (default 1 and 2)")
    sp.set_defaults(func=cmd_rearrange)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "q", None) is None and args.command == "rearrange":
        args.q = [1.0, 2.0]
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
