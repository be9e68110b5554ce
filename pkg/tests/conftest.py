import pytest

from clusternash import (
    StepSizes,
    build_connectivity_game,
    ring_graph,
    solve_ne,
)
from clusternash.experiments import RunConfig, SweepConfig, sweep_experiment

# One sweep covers every step-size configuration the behavioral tests need;
# settings are selected from it by label.
ACCEPTANCE_ALPHA_SETS = {
    "set0": (0.12, 0.096, 0.072),  # baseline scaled 1.2
    "set1": (0.1, 0.08, 0.06),  # baseline
    "set2": (0.06, 0.048, 0.036),  # baseline scaled 0.6
    "set3": (0.05, 0.04, 0.03),  # baseline scaled 0.5 (halved largest step)
    "set4": (0.1, 0.04, 0.04),  # heterogeneity 0.4714
    "set5": (0.1, 0.05, 0.03),  # heterogeneity 0.4907
    "set6": (0.1, 0.06, 0.02),  # heterogeneity 0.5443
}


@pytest.fixture(scope="session")
def sv_game():
    return build_connectivity_game(3, 4, 2)


@pytest.fixture(scope="session")
def sv_graphs():
    return [ring_graph(4, 0.5, cluster=i) for i in range(3)]


@pytest.fixture(scope="session")
def sv_ne(sv_game):
    return solve_ne(sv_game)


@pytest.fixture(scope="session")
def sv_steps(sv_game):
    return StepSizes((0.1, 0.08, 0.06), sv_game.sizes, sv_game.dim)


@pytest.fixture(scope="session")
def acceptance_sweep(tmp_path_factory):
    """20-seed, 2000-iteration runs of every acceptance step-size setting."""
    out = tmp_path_factory.mktemp("acceptance") / "acc"
    base = RunConfig(iters=2000, seed=1, n_seeds=20, out=str(out))
    sweep = SweepConfig(base=base, axis="alpha_sets", values=list(ACCEPTANCE_ALPHA_SETS.values()))
    result = sweep_experiment(sweep)
    by_label = {}
    for label, alphas, steps, fit, plateau, res in result.settings:
        by_label[label] = {
            "alphas": alphas,
            "steps": steps,
            "fit": fit,
            "plateau": plateau,
            "result": res,
        }
    return by_label
