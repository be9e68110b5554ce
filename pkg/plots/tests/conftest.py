import subprocess
import sys

import pytest

BASE = """
game = connectivity
N = 3
n_per = 4
d = {d}
graph = ring
self_weight = 0.5
mu = 1e-4
alpha = 0.1 0.08 0.06
T = {T}
seed = 1
seeds = 1
out = {out}
"""


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "clusternash.cli", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def sweep_csvs(tmp_path_factory):
    """Step-size sweep outputs produced through the experiment CLI."""
    root = tmp_path_factory.mktemp("sweep")
    cfg = root / "sweep.cfg"
    cfg.write_text(BASE.format(d=2, T=400, out=root / "fig4a") + "alpha_scale = 1.2 1.0 0.6\n")
    run_cli("sweep", str(cfg))
    return [root / f"fig4a_scale{s}_avg.csv" for s in ("1.2", "1", "0.6")]


@pytest.fixture(scope="session")
def baseline_run(tmp_path_factory):
    """Baseline run with logged positions, produced through the experiment CLI."""
    root = tmp_path_factory.mktemp("baseline")
    cfg = root / "run.cfg"
    cfg.write_text(BASE.format(d=2, T=800, out=root / "base"))
    run_cli("run", str(cfg), "--log-positions")
    return {"csv": root / "base_seed1.csv", "meta": root / "base_meta.txt"}


@pytest.fixture(scope="session")
def flat_run(tmp_path_factory):
    """One-dimensional run; trajectory plots must reject it."""
    root = tmp_path_factory.mktemp("flat")
    cfg = root / "run.cfg"
    cfg.write_text(BASE.format(d=1, T=20, out=root / "flat"))
    run_cli("run", str(cfg), "--log-positions")
    return {"csv": root / "flat_seed1.csv", "meta": root / "flat_meta.txt"}
