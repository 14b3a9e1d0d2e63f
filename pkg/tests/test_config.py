import math
from pathlib import Path

import numpy as np
import pytest

from singelliptic.config import SweepGrid, load_config
from singelliptic.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_shipped_configs_load():
    for p in sorted(CONFIGS.glob("*.ini")):
        cfg = load_config(p)
        assert cfg.resolutions
    cfg = load_config(CONFIGS / "manufactured.ini")
    assert cfg.problem.source.kind == "tabulated"
    assert cfg.resolutions == (64, 128, 256, 512)
    x = np.linspace(0, 1, 9)[:, None]
    np.testing.assert_allclose(cfg.problem.source(x), 2 * x[:, 0] * (1 - x[:, 0]), atol=1e-15)
    assert cfg.exact is not None and cfg.exact.is_file()


def test_full_config(tmp_path):
    p = write(tmp_path, """
[problem]
p = 1.5
theta = 0.25
alpha = 2
gamma = 0.5
C = 3
dim = 2
domain = 0 2, 0 1
source.kind = radial_power
source.value = 2
source.exponent = 0.1
source.center = 1 0.5
source.m = 10   ; inline comment

[mesh]
resolution = 8

[schedule]
n_values = 1 4 16
outer_tol = 1e-6
warmup = 1

[newton]
residual_tol = 1e-9
max_iter = 50
backend = python

[output]
directory = results
seed = 7

[verify]
slack = 0.1
""")
    cfg = load_config(p)
    pr = cfg.problem
    assert (pr.p, pr.theta, pr.alpha, pr.gamma, pr.C, pr.dim) == (1.5, 0.25, 2.0, 0.5, 3.0, 2)
    assert pr.domain == ((0.0, 2.0), (0.0, 1.0))
    assert pr.source.center == (1.0, 0.5) and pr.source.m == 10.0
    assert cfg.schedule.n_values == (1.0, 4.0, 16.0) and cfg.schedule.outer_tol == 1e-6
    assert cfg.newton.max_iter == 50 and cfg.newton.backend == "python"
    assert cfg.output == tmp_path / "results" and cfg.seed == 7 and cfg.slack == 0.1


def test_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "[problem]\ngamma = 2\n"))
    assert cfg.problem.dim == 1 and cfg.problem.source.m == math.inf
    assert cfg.schedule.n_values[-1] == 2.0**14
    assert cfg.resolutions == (64,)


def test_overrides(tmp_path):
    p = write(tmp_path, "[problem]\ngamma = 2\n")
    cfg = load_config(p, overrides=["problem.gamma=0.5", "problem.source.value=3", "mesh.resolution=12"])
    assert cfg.problem.gamma == 0.5 and cfg.problem.source.value == 3.0 and cfg.resolutions == (12,)
    with pytest.raises(ConfigurationError):
        load_config(p, overrides=["gamma=1"])


@pytest.mark.parametrize("text", [
    "[mesh]\nresolution = 8\n",
    "[problem]\np = abc\n",
    "[problem]\np = 0.5\n",
    "[problem]\ndim = 2\ndomain = 0 1\n",
    "[problem]\nsource.kind = weird\n",
    "[problem]\nsource.kind = tabulated\n",
    "[problem]\nsource.kind = tabulated\nsource.path = nope.csv\n",
    "[problem]\n[mesh]\nresolution = 1\n",
    "[problem]\n[mesh]\nresolution = 2.5\n",
    "[problem]\n[newton]\nbogus = 1\n",
    "[problem]\n[sweep]\ndelta = 1\n",
    "not an ini file",
])
def test_bad_configs(tmp_path, text):
    with pytest.raises(ConfigurationError):
        load_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.ini")


def test_sweep_cells_order():
    grid = SweepGrid(gamma=(0.5, 1.0), theta=(0.0, 1.0), m=(10.0,), resolution=(8,))
    cells = grid.cells()
    assert [(c["gamma"], c["theta"]) for c in cells] == [(0.5, 0.0), (0.5, 1.0), (1.0, 0.0), (1.0, 1.0)]
    assert SweepGrid(gamma=(1.0,), theta=(), m=(2.0,), resolution=(8,)).cells() == []
