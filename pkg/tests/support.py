"""Shared generators for randomized analysis tests."""

import numpy as np

from clusternash import (
    QuadraticGame,
    StepSizes,
    certificate,
    compute_constants,
    game_jacobian,
    ring_graph,
)


def random_monotone_game(rng, max_agents=5, min_monotone=0.3):
    """Random quadratic game with a strongly monotone mapping, plus ring graphs."""
    n_clusters = int(rng.integers(2, 4))
    sizes = tuple(int(s) for s in rng.integers(1, max_agents + 1, size=n_clusters))
    nd = sum(sizes)

    def build(ridge):
        qs, bs, cs = [], [], []
        for idx, n_i in enumerate(sizes):
            raw = rng_cache[idx]
            q = 0.5 * (raw + raw.transpose(0, 2, 1)) + ridge * np.eye(nd)
            qs.append(q)
            bs.append(b_cache[idx])
            cs.append(np.zeros(n_i))
        return QuadraticGame(sizes, 1, qs, bs, cs)

    rng_cache = [rng.normal(size=(n_i, nd, nd)) / np.sqrt(nd) for n_i in sizes]
    b_cache = [rng.normal(size=(n_i, nd)) for n_i in sizes]
    game = build(0.0)
    jac = game_jacobian(game)
    base = float(np.linalg.eigvalsh(0.5 * (jac + jac.T)).min())
    ridge = max(0.0, (min_monotone - base) / 2.0)
    if ridge > 0:
        game = build(ridge)
    graphs = [
        ring_graph(n_i, float(rng.uniform(0.2, 0.8)), cluster=i) for i, n_i in enumerate(sizes)
    ]
    return game, graphs


def steps_inside_region(game, constants, rng):
    """Step sizes satisfying the certificate preconditions for the game.

    Heterogeneity is drawn below its admissible bound, then the whole vector
    is scaled so the largest step sits strictly inside the step bound
    (uniform scaling leaves the heterogeneity unchanged).
    """
    eps_bound = constants.monotone / (2.0 * np.sqrt(constants.n) * constants.lipschitz)
    deltas = rng.uniform(-1.0, 1.0, size=game.n_clusters)
    target = float(rng.uniform(0.05, 0.8)) * eps_bound
    spread = 1e-3
    for _ in range(60):
        trial = StepSizes(1.0 + spread * deltas, game.sizes, game.dim)
        if trial.heterogeneity == 0:
            break
        spread *= target / trial.heterogeneity
        trial = StepSizes(1.0 + spread * deltas, game.sizes, game.dim)
        if abs(trial.heterogeneity - target) / eps_bound < 1e-6:
            break
    cert = certificate(constants, trial)
    scale = float(rng.uniform(0.1, 0.9)) * cert.alpha_bound / trial.alpha_max
    return StepSizes(tuple(scale * a for a in trial.per_cluster), game.sizes, game.dim)


def certified_setup(rng, mu=1e-4):
    game, graphs = random_monotone_game(rng)
    constants = compute_constants(game, graphs, mu)
    steps = steps_inside_region(game, constants, rng)
    return game, graphs, constants, steps


def mean_squared_tail(per_seed, frac=0.1):
    """Plateau of the seed-averaged squared error gap (trailing fraction)."""
    avg_sq = np.mean([m.err_gap**2 for m in per_seed], axis=0)
    tail = max(1, int(round(len(avg_sq) * frac)))
    return float(avg_sq[-tail:].mean())
