"""Two-point randomized gradient estimation from cost values only.

Two estimators are provided, both costing exactly two cost evaluations per
agent per step.

Joint-action estimator (gradient_oracle / oracle_rows): agent (i, j)
perturbs the *entire* joint action with a standard Gaussian vector zeta and
scales the single difference quotient by each of its cluster's coordinates:

    g_k = [f(x + mu * zeta) - f(x)] / mu * zeta[offset_i + k]

In expectation over zeta this equals the gradient of the Gaussian-smoothed
cost (smoothing scale mu); for quadratic costs that gradient coincides with
the true gradient at every mu. Its variance grows with the joint dimension
and the full gradient norm, so descent schemes built on it need step sizes
well below the certificate bound to stay stable.

Own-action estimator (local_oracle_rows): agent (i, j) perturbs only the
block of coordinates it controls and normalizes the quotient by the
perturbation energy:

    g_k = [f(x + mu * z) - f(x)] / (mu * ||z||^2) * z_k,   z on own block

The estimate is bounded by the agent's local gradient norm, which keeps the
tracking loop stable at practical step sizes; its expectation is the own-
block gradient scaled by 1/dim (the isotropic projection factor) for
quadratic costs. When every agent's cost depends on in-cluster actions only
through its own block (true for the connectivity family), the cluster
averages of these estimates point along the exact game mapping.

Randomness is counter-addressed: the perturbations of cluster i's agents at
step t are a deterministic function of (seed, t, i), so runs reproduce
regardless of execution order and no generator state is shared.
"""

from __future__ import annotations

import numpy as np

from .game import GameSpec, QuadraticGame, evaluate_local


def perturbation_stream(seed: int, t: int, i: int) -> np.random.Generator:
    """Independent RNG stream for cluster i at step t under the given seed."""
    if seed < 0 or t < 0 or i < 0:
        raise ValueError("seed, step and cluster indices must be non-negative")
    counter = np.array([0, 0, i, t], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def sample_perturbation(stream: np.random.Generator, nd: int) -> np.ndarray:
    """Draw one standard-normal perturbation of dimension nd from a stream."""
    if nd < 1:
        raise ValueError(f"perturbation dimension must be >= 1, got {nd}")
    return stream.standard_normal(nd)


def perturbation_block(seed: int, t: int, i: int, n_agents: int, nd: int) -> np.ndarray:
    """Perturbations of all agents of cluster i at step t; row j belongs to agent j."""
    stream = perturbation_stream(seed, t, i)
    return sample_perturbation(stream, n_agents * nd).reshape(n_agents, nd)


def agent_perturbation(seed: int, t: int, i: int, j: int, n_agents: int, nd: int) -> np.ndarray:
    return perturbation_block(seed, t, i, n_agents, nd)[j]


def gradient_oracle(
    game: GameSpec, i: int, j: int, x: np.ndarray, zeta: np.ndarray, mu: float
) -> np.ndarray:
    """Agent (i, j)'s gradient estimate for all of its cluster's coordinates.

    Exactly two cost evaluations; non-finite cost values propagate into the
    returned vector.
    """
    if mu <= 0:
        raise ValueError(f"smoothing parameter must be > 0 for oracle calls, got {mu}")
    x = game.check_joint(x)
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != x.shape:
        raise ValueError(f"perturbation must match joint dimension {x.shape}, got {zeta.shape}")
    quotient = (evaluate_local(game, i, j, x + mu * zeta) - evaluate_local(game, i, j, x)) / mu
    return quotient * zeta[game.cluster_slice(i)]


def oracle_rows(game: GameSpec, i: int, x: np.ndarray, zetas: np.ndarray, mu: float) -> np.ndarray:
    """Stacked estimates for all agents of cluster i; row j is agent j's estimate.

    zetas holds one perturbation per agent (n_i, coords). Two cost
    evaluations per agent, batched through the game's vectorized path.
    """
    if mu <= 0:
        raise ValueError(f"smoothing parameter must be > 0 for oracle calls, got {mu}")
    perturbed = game.cluster_values(i, x[None, :] + mu * zetas)
    base = game.cluster_values_at(i, x)
    quotients = (perturbed - base) / mu
    return quotients[:, None] * zetas[:, game.cluster_slice(i)]


def local_oracle_rows(game: GameSpec, i: int, x: np.ndarray, zetas: np.ndarray, mu: float) -> np.ndarray:
    """Own-action estimates for all agents of cluster i; row j is agent j's.

    zetas holds one own-block perturbation per agent (n_i, dim). Row j of
    the result is supported on agent j's own columns and equals the energy-
    normalized difference quotient times the perturbation. Two cost
    evaluations per agent.
    """
    if mu <= 0:
        raise ValueError(f"smoothing parameter must be > 0 for oracle calls, got {mu}")
    n_agents, dim = game.sizes[i], game.dim
    zetas = np.asarray(zetas, dtype=float)
    if zetas.shape != (n_agents, dim):
        raise ValueError(f"need one own-block perturbation per agent {(n_agents, dim)}, got {zetas.shape}")
    width = game.cluster_width(i)
    own_cols = np.arange(width).reshape(n_agents, dim)
    full = np.zeros((n_agents, game.coords))
    full[np.arange(n_agents)[:, None], game.offsets[i] + own_cols] = zetas
    perturbed = game.cluster_values(i, x[None, :] + mu * full)
    base = game.cluster_values_at(i, x)
    energy = (zetas * zetas).sum(axis=1)
    quotients = (perturbed - base) / (mu * energy)
    rows = np.zeros((n_agents, width))
    rows[np.arange(n_agents)[:, None], own_cols] = quotients[:, None] * zetas
    return rows


def oracle_samples(
    game: GameSpec,
    i: int,
    j: int,
    x: np.ndarray,
    mu: float,
    stream: np.random.Generator,
    draws: int,
) -> np.ndarray:
    """Monte-Carlo batch of agent (i, j)'s estimates over i.i.d. perturbations.

    Returns (draws, n_i * dim); row m uses the m-th perturbation from the
    stream. Vectorized convenience for sampling studies, computing the same
    difference-quotient formula as gradient_oracle row by row.
    """
    if mu <= 0:
        raise ValueError(f"smoothing parameter must be > 0 for oracle calls, got {mu}")
    x = game.check_joint(x)
    zetas = stream.standard_normal((draws, game.coords))
    vals = game.agent_values(i, j, x[None, :] + mu * zetas)
    base = evaluate_local(game, i, j, x)
    quotients = (vals - base) / mu
    return quotients[:, None] * zetas[:, game.cluster_slice(i)]


def smoothed_value(game: QuadraticGame, i: int, j: int, x: np.ndarray, mu: float) -> float:
    """Gaussian-smoothed cost of a quadratic agent, in closed form.

    Convolving x'Qx + b'x + c with an isotropic Gaussian of scale mu adds
    the constant mu^2 * tr(Q); mu = 0 recovers the raw cost.
    """
    if mu < 0:
        raise ValueError(f"smoothing parameter must be >= 0, got {mu}")
    q, _, _ = game.quadratic(i, j)
    return evaluate_local(game, i, j, x) + mu * mu * float(np.trace(q))


def smoothed_gradient_reference(game: QuadraticGame, i: int, j: int, x: np.ndarray) -> np.ndarray:
    """Analytic gradient 2 Q x + b of agent (i, j)'s cost.

    For quadratic costs the smoothed gradient equals this for every mu, so
    it serves as the unbiasedness target for the oracle.
    """
    return game.agent_gradient(i, j, x)
