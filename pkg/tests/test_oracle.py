import numpy as np
import pytest

from clusternash import (
    GameSpec,
    QuadraticGame,
    agent_perturbation,
    evaluate_local,
    gradient_oracle,
    initialize,
    local_oracle_rows,
    oracle_rows,
    oracle_samples,
    perturbation_block,
    perturbation_stream,
    sample_perturbation,
    smoothed_gradient_reference,
    smoothed_value,
    step,
    StepSizes,
    ring_graph,
)


def test_stream_addressing_deterministic():
    a = sample_perturbation(perturbation_stream(7, 3, 1), 24)
    b = sample_perturbation(perturbation_stream(7, 3, 1), 24)
    assert np.array_equal(a, b)
    c = sample_perturbation(perturbation_stream(7, 4, 1), 24)
    assert not np.array_equal(a, c)


def test_block_rows_match_agent_perturbation():
    block = perturbation_block(5, 2, 0, 4, 6)
    assert block.shape == (4, 6)
    for j in range(4):
        assert np.array_equal(agent_perturbation(5, 2, 0, j, 4, 6), block[j])


def test_single_coordinate_sample():
    z = sample_perturbation(perturbation_stream(0, 0, 0), 1)
    assert z.shape == (1,)


def test_sample_moments():
    z = perturbation_stream(11, 0, 0).standard_normal(1_000_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1.0) < 0.02


def test_constant_cost_gives_zero_estimate():
    game = GameSpec([2], 1, [[lambda x: 3.5, lambda x: -1.0]])
    zeta = sample_perturbation(perturbation_stream(1, 0, 0), 2)
    assert np.array_equal(gradient_oracle(game, 0, 0, np.zeros(2), zeta, 0.05), np.zeros(2))


def test_linear_cost_estimate_exact():
    a = np.array([1.5, -2.0, 0.25])
    game = GameSpec([3], 1, [[lambda x, c=a: float(c @ x)] * 3])
    rng = np.random.default_rng(3)
    x, zeta = rng.normal(size=3), rng.normal(size=3)
    for mu in (1e-6, 1e-2, 1.0):
        est = gradient_oracle(game, 0, 1, x, zeta, mu)
        assert np.allclose(est, (a @ zeta) * zeta, atol=1e-6)


def test_oracle_requires_positive_mu(sv_game):
    zeta = np.zeros(24)
    for mu in (0.0, -1e-3):
        with pytest.raises(ValueError):
            gradient_oracle(sv_game, 0, 0, np.zeros(24), zeta, mu)


def test_oracle_rejects_wrong_perturbation_shape(sv_game):
    with pytest.raises(ValueError):
        gradient_oracle(sv_game, 0, 0, np.zeros(24), np.zeros(23), 0.1)


def counting_game(sizes, dim, base):
    calls = {"n": 0}

    def make(i, j):
        def cost(x):
            calls["n"] += 1
            return evaluate_local(base, i, j, x)

        return cost

    costs = [[make(i, j) for j in range(n)] for i, n in enumerate(sizes)]
    return GameSpec(sizes, dim, costs), calls


def test_two_evaluations_per_oracle_call(sv_game):
    game, calls = counting_game(sv_game.sizes, sv_game.dim, sv_game)
    zeta = sample_perturbation(perturbation_stream(2, 0, 0), 24)
    gradient_oracle(game, 1, 2, np.zeros(24), zeta, 1e-3)
    assert calls["n"] == 2


def test_two_evaluations_per_agent_per_step(sv_game, sv_graphs):
    for estimator in ("local", "global"):
        game, calls = counting_game(sv_game.sizes, sv_game.dim, sv_game)
        steps = StepSizes((0.01, 0.01, 0.01), game.sizes, game.dim)
        state = initialize(game, sv_graphs, steps, 1e-3, seed=0, estimator=estimator)
        assert calls["n"] == 2 * 12  # tracker start-up
        calls["n"] = 0
        step(state)
        assert calls["n"] == 2 * 12


def test_batched_rows_match_single_calls(sv_game):
    zetas = perturbation_block(9, 1, 1, 4, 24)
    rows = oracle_rows(sv_game, 1, np.zeros(24), zetas, 1e-4)
    for j in range(4):
        single = gradient_oracle(sv_game, 1, j, np.zeros(24), zetas[j], 1e-4)
        assert np.allclose(rows[j], single, atol=1e-12)


def test_local_rows_supported_on_own_block(sv_game):
    zetas = perturbation_block(9, 1, 1, 4, 2)
    rows = local_oracle_rows(sv_game, 1, np.zeros(24), zetas, 1e-4)
    assert rows.shape == (4, 8)
    for j in range(4):
        mask = np.zeros(8, dtype=bool)
        mask[2 * j : 2 * j + 2] = True
        assert np.all(rows[j][~mask] == 0.0)
        assert np.any(rows[j][mask] != 0.0)


def test_local_rows_match_quotient_formula(sv_game):
    rng = np.random.default_rng(12)
    x = rng.normal(size=24)
    mu = 1e-3
    zetas = rng.standard_normal((4, 2))
    rows = local_oracle_rows(sv_game, 1, x, zetas, mu)
    for j in range(4):
        perturbed = x.copy()
        own = slice(sv_game.offsets[1] + 2 * j, sv_game.offsets[1] + 2 * j + 2)
        perturbed[own] += mu * zetas[j]
        quot = (evaluate_local(sv_game, 1, j, perturbed) - evaluate_local(sv_game, 1, j, x))
        quot /= mu * float(zetas[j] @ zetas[j])
        assert np.allclose(rows[j, 2 * j : 2 * j + 2], quot * zetas[j], atol=1e-12)


def test_local_rows_mean_is_scaled_own_gradient(sv_game):
    # For quadratic costs the own-action estimate averages to the own-block
    # gradient divided by the action dimension.
    rng = np.random.default_rng(4)
    x = rng.normal(size=24)
    i = 2
    draws = 40_000
    zet = rng.standard_normal((draws, 4, 2))
    for j in range(4):
        own = slice(sv_game.offsets[i] + 2 * j, sv_game.offsets[i] + 2 * j + 2)
        points = np.tile(x, (draws, 1))
        points[:, own] += 1e-4 * zet[:, j]
        vals = sv_game.agent_values(i, j, points)
        base = evaluate_local(sv_game, i, j, x)
        quot = (vals - base) / (1e-4 * (zet[:, j] ** 2).sum(axis=1))
        est = (quot[:, None] * zet[:, j]).mean(axis=0)
        own_grad = sv_game.agent_gradient(i, j, x)[own]
        se = (quot[:, None] * zet[:, j]).std(axis=0) / np.sqrt(draws)
        assert np.all(np.abs(est - own_grad / 2.0) < 5 * se + 1e-9)


def test_sample_batch_matches_formula(sv_game):
    draws = 64
    samples = oracle_samples(sv_game, 0, 1, np.zeros(24), 1e-4, perturbation_stream(3, 0, 0), draws)
    zetas = perturbation_stream(3, 0, 0).standard_normal((draws, 24))
    for m in (0, 17, 63):
        ref = gradient_oracle(sv_game, 0, 1, np.zeros(24), zetas[m], 1e-4)
        assert np.allclose(samples[m], ref, atol=1e-10)


def test_smoothed_value_zero_mu_is_exact(sv_game):
    x = np.random.default_rng(5).normal(size=24)
    assert smoothed_value(sv_game, 2, 1, x, 0.0) == pytest.approx(evaluate_local(sv_game, 2, 1, x))


def test_smoothed_value_isotropic_quadratic():
    q = np.eye(2)[None]
    game = QuadraticGame([1], 2, [q], [np.zeros((1, 2))], [np.zeros(1)])
    x = np.array([0.3, -0.7])
    val = smoothed_value(game, 0, 0, x, 0.1)
    assert val == pytest.approx(float(x @ x) + 0.01 * 2.0, abs=1e-12)


def test_smoothed_value_matches_monte_carlo():
    q = np.eye(2)[None]
    game = QuadraticGame([1], 2, [q], [np.zeros((1, 2))], [np.zeros(1)])
    x = np.array([0.3, -0.7])
    mu = 0.1
    rng = np.random.default_rng(6)
    zets = rng.standard_normal((1_000_000, 2))
    vals = ((x + mu * zets) ** 2).sum(axis=1)
    se = vals.std() / np.sqrt(len(vals))
    assert abs(vals.mean() - smoothed_value(game, 0, 0, x, mu)) < 3 * se


def test_gradient_reference_examples(sv_game):
    q = np.eye(3)[None]
    game = QuadraticGame([1], 3, [q], [np.zeros((1, 3))], [np.zeros(1)])
    assert np.array_equal(smoothed_gradient_reference(game, 0, 0, np.zeros(3)), np.zeros(3))
    grad = smoothed_gradient_reference(sv_game, 0, 0, np.zeros(24))
    assert np.allclose(grad[0:2], [1.0, 1.0])  # own-position linear term
    assert np.allclose(grad[2:], 0.0)


def test_gradient_reference_finite_differences(sv_game):
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = rng.normal(size=24)
        i, j = int(rng.integers(3)), int(rng.integers(4))
        ref = smoothed_gradient_reference(sv_game, i, j, x)
        h = 1e-5
        fd = np.zeros(24)
        for k in range(24):
            e = np.zeros(24)
            e[k] = h
            fd[k] = (evaluate_local(sv_game, i, j, x + e) - evaluate_local(sv_game, i, j, x - e)) / (2 * h)
        assert np.linalg.norm(fd - ref) <= 1e-6 * max(1.0, np.linalg.norm(ref))
