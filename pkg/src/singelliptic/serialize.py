"""JSON and CSV writers with a fixed key order and 17 significant digits."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import FLOAT_FMT

REPORT_COLUMNS = ("name", "status", "gating", "predicted", "observed", "slack", "margin", "reason")
HISTORY_COLUMNS = ("step", "n", "increment", "newton_iters", "picard_steps")


def fmt(x) -> str:
    """CSV cell text: floats at 17 significant digits, None as empty."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT.format(float(x))
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # strict JSON has no inf/nan
        if not math.isfinite(x):
            return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
        # round-trip through 17 digits; repr of the result is then exact and stable
        return float(FLOAT_FMT.format(x))
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def write_rows(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])


def result_summary(result) -> dict:
    """Scalars and histories of a SolveResult (fields go to CSV separately)."""
    return {
        "converged": result.converged,
        "non_contractive": result.non_contractive,
        "final_n": result.final_n,
        "max_u": result.field.max(),
        "min_value": result.min_value,
        "residual": result.residual,
        "n_values": list(result.n_values),
        "increments": list(result.increments),
        "newton_iters": list(result.newton_iters),
        "picard_steps": list(result.picard_steps),
        "mesh": result.field.mesh.metadata(),
    }


def history_rows(result) -> list[dict]:
    rows = []
    for k, n in enumerate(result.n_values):
        rows.append({
            "step": k,
            "n": n,
            "increment": result.increments[k - 1] if k > 0 else None,
            "newton_iters": result.newton_iters[k],
            "picard_steps": result.picard_steps[k] if k < len(result.picard_steps) else None,
        })
    return rows


def report_rows(report) -> list[dict]:
    return [
        {
            "name": c.name, "status": c.status, "gating": c.gating, "predicted": c.predicted,
            "observed": c.observed, "slack": c.slack, "margin": c.margin, "reason": c.reason,
        }
        for c in report.checks
    ]
