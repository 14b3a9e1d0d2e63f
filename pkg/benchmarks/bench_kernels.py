"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--resolution 128] [--repeat 5] [--json out.json]

Reports the best wall time per kernel and backend, the speedup, and the
largest absolute difference between the two backends' outputs.  A full
2D solve is timed with each backend as well.
"""
import argparse
import json
import sys
import time

import numpy as np

from singelliptic import kernels
from singelliptic.grid import build_mesh, simplex_rule, split_by_sign
from singelliptic.model import ProblemSpec, SourceSpec
from singelliptic.solver import NewtonConfig, RegularizationSchedule, solve_singular


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--levels", type=int, default=256, help="thresholds for the level-set kernel")
    ap.add_argument("--solve-resolution", type=int, default=32)
    ap.add_argument("--json", help="write the results here as well")
    args = ap.parse_args(argv)

    try:
        kernels.get_backend("cython")
    except ImportError:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    rng = np.random.default_rng(0)
    mesh = build_mesh([(0, 1), (0, 1)], args.resolution)
    uel = rng.random(mesh.n_nodes)[mesh.cells]
    lam, w = simplex_rule(2, 2)
    vals, vols = split_by_sign(uel - 0.3, mesh.vols)
    ts = np.linspace(0.0, 0.7, args.levels)

    cases = {
        "assemble_elements": lambda b: kernels.assemble_elements(
            mesh.grads, mesh.vols, uel, lam, w, 1.5, 1.0, 0.5, 64.0, 1e-10, backend=b),
        "superlevel_measure": lambda b: kernels.superlevel_measure(np.sort(np.abs(vals), axis=1), vols, ts, backend=b),
    }
    results = {"resolution": args.resolution, "cells": mesh.n_cells, "kernels": {}}
    print(f"mesh {args.resolution}^2: {mesh.n_cells} cells, best of {args.repeat}")
    print(f"{'kernel':22s} {'cython [s]':>12s} {'python [s]':>12s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in cases.items():
        tc, oc = best_of(lambda: fn("cython"), args.repeat)
        tp, op = best_of(lambda: fn("python"), args.repeat)
        diff = max_diff(oc, op)
        results["kernels"][name] = {"cython": tc, "python": tp, "speedup": tp / tc, "max_abs_diff": diff}
        print(f"{name:22s} {tc:12.4g} {tp:12.4g} {tp / tc:8.2f} {diff:11.2e}")

    spec = ProblemSpec(p=1.5, theta=1.0, gamma=0.5, dim=2, domain=((0, 1), (0, 1)),
                       source=SourceSpec(value=1.0, m=10.0))
    smesh = build_mesh(spec.domain, args.solve_resolution)
    sched = RegularizationSchedule()
    solves = {}
    for b in ("cython", "python"):
        t, res = best_of(lambda: solve_singular(spec, smesh, sched, NewtonConfig(backend=b)), 1)
        solves[b] = (t, res.field.values)
    diff = max_diff(solves["cython"][1], solves["python"][1])
    tc, tp = solves["cython"][0], solves["python"][0]
    results["solve"] = {"resolution": args.solve_resolution, "cython": tc, "python": tp,
                        "speedup": tp / tc, "max_abs_diff": diff}
    print(f"{'solve_singular':22s} {tc:12.4g} {tp:12.4g} {tp / tc:8.2f} {diff:11.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
