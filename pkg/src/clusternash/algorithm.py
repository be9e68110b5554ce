"""Gradient-tracking equilibrium-seeking iteration with per-cluster step sizes.

Every agent j of cluster i keeps a row of estimates y for *all* of its
cluster's coordinates plus a tracker row phi of the same width. One
synchronous round does, per cluster with mixing matrix A and step size a:

    Y   <- A Y - a * Phi                 (estimate mixing + tracker descent)
    x_i <- ownership diagonal of new Y   (agent j publishes its own block)
    Phi <- A Phi + G(x_new) - G(x_old)   (tracker mixing + estimate refresh)

where G stacks the agents' two-point gradient estimates and G(x_old) reuses
the exact perturbations and values from the previous round, which keeps the
column means of Phi equal to the column means of the current G at every step.

Two estimator wirings are supported (see the oracle module): "local"
(default), where each agent perturbs only the action block it controls and
normalizes by the perturbation energy, and "global", where each agent
perturbs the whole joint action. The local estimator is bounded by local
gradient norms and stays stable at practical step sizes; the global one is
the textbook unbiased smoothed-gradient estimate but requires much smaller
steps before the tracking loop stops amplifying its noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .game import GameSpec
from .network import CommGraph
from .oracle import local_oracle_rows, oracle_rows, perturbation_block

DIVERGENCE_LIMIT = 1e12
ESTIMATORS = ("local", "global")


class DivergenceError(RuntimeError):
    """Iteration produced values beyond the divergence guard."""

    def __init__(self, iteration: int, metrics: "RunMetrics | None" = None):
        super().__init__(f"state magnitude exceeded {DIVERGENCE_LIMIT:g} at iteration {iteration}")
        self.iteration = iteration
        self.metrics = metrics


class StepSizes:
    """Per-cluster constant step sizes and their heterogeneity statistics.

    alpha_bar is the coordinate-weighted average of the per-cluster values;
    heterogeneity is the relative spread ||stacked - alpha_bar|| /
    ||alpha_bar * ones|| of the coordinate-stacked step vector.
    """

    def __init__(self, alphas: Sequence[float], sizes: Sequence[int], dim: int = 1):
        alphas = tuple(float(a) for a in alphas)
        if len(alphas) != len(sizes):
            raise ValueError(f"need one step size per cluster: {len(alphas)} != {len(sizes)}")
        if any(a <= 0 for a in alphas):
            raise ValueError(f"step sizes must be positive, got {alphas}")
        weights = np.array([s * dim for s in sizes], dtype=float)
        self.per_cluster = alphas
        self.alpha_max = max(alphas)
        self.alpha_bar = float(weights @ alphas / weights.sum())
        spread = np.sqrt(float(weights @ (np.array(alphas) - self.alpha_bar) ** 2))
        self.heterogeneity = spread / (self.alpha_bar * np.sqrt(weights.sum()))

    def __repr__(self):
        return (
            f"StepSizes({self.per_cluster}, max={self.alpha_max:g}, "
            f"bar={self.alpha_bar:g}, eps={self.heterogeneity:.4f})"
        )


class MetricsRow(NamedTuple):
    t: int
    err_gap: float
    consensus: float
    opt_gap: float
    tracking: float


@dataclass
class RunMetrics:
    """Per-iteration trajectory of the four error measures."""

    t: np.ndarray
    err_gap: np.ndarray
    consensus: np.ndarray
    opt_gap: np.ndarray
    tracking: np.ndarray
    positions: Optional[np.ndarray] = None

    @classmethod
    def from_rows(cls, rows, positions=None):
        cols = np.array(rows, dtype=float).T
        return cls(
            t=cols[0].astype(int),
            err_gap=cols[1],
            consensus=cols[2],
            opt_gap=cols[3],
            tracking=cols[4],
            positions=None if positions is None else np.array(positions),
        )

    def __len__(self):
        return len(self.t)


@dataclass
class AlgorithmState:
    """One run's mutable state; owned by a single run at a time."""

    game: GameSpec
    graphs: tuple
    steps: StepSizes
    mu: float
    seed: int
    y: list  # per cluster (n_i, n_i * dim)
    trackers: list  # same shapes as y
    x: np.ndarray
    t: int = 0
    estimator: str = "local"
    last_oracle: list = field(default_factory=list)
    _owners: tuple = ()  # per cluster, row index of the agent owning each column


def _ownership(game: GameSpec) -> tuple:
    return tuple(
        np.arange(game.cluster_width(i)) // game.dim for i in range(game.n_clusters)
    )


def _estimate_rows(state: AlgorithmState, i: int, t: int) -> np.ndarray:
    game = state.game
    if state.estimator == "local":
        zetas = perturbation_block(state.seed, t, i, game.sizes[i], game.dim)
        return local_oracle_rows(game, i, state.x, zetas, state.mu)
    zetas = perturbation_block(state.seed, t, i, game.sizes[i], game.coords)
    return oracle_rows(game, i, state.x, zetas, state.mu)


def initialize(
    game: GameSpec,
    graphs: Sequence[CommGraph],
    steps: StepSizes,
    mu: float,
    x0: Optional[np.ndarray] = None,
    y0: Optional[Sequence[np.ndarray]] = None,
    seed: int = 0,
    estimator: str = "local",
) -> AlgorithmState:
    """Set up estimates, actions, and trackers; trackers start at the oracle
    output for the initial joint action (step index 0 of the seed's streams)."""
    if mu <= 0:
        raise ValueError(f"smoothing parameter must be > 0, got {mu}")
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    if len(graphs) != game.n_clusters:
        raise ValueError(f"need one graph per cluster: {len(graphs)} != {game.n_clusters}")
    for i, g in enumerate(graphs):
        if g.n_agents != game.sizes[i]:
            raise ValueError(f"graph {i} has {g.n_agents} agents, cluster has {game.sizes[i]}")
    if len(steps.per_cluster) != game.n_clusters:
        raise ValueError("step sizes and game disagree on cluster count")

    x = np.zeros(game.coords) if x0 is None else game.check_joint(x0).copy()
    ys = []
    for i in range(game.n_clusters):
        shape = (game.sizes[i], game.cluster_width(i))
        if y0 is None:
            ys.append(np.zeros(shape))
        else:
            yi = np.array(y0[i], dtype=float)
            if yi.shape != shape:
                raise ValueError(f"y0[{i}] must have shape {shape}, got {yi.shape}")
            ys.append(yi)

    state = AlgorithmState(
        game=game,
        graphs=tuple(graphs),
        steps=steps,
        mu=mu,
        seed=seed,
        y=ys,
        trackers=[],
        x=x,
        t=0,
        estimator=estimator,
        last_oracle=[],
        _owners=_ownership(game),
    )
    for i in range(game.n_clusters):
        g0 = _estimate_rows(state, i, 0)
        state.trackers.append(g0.copy())
        state.last_oracle.append(g0)
    return state


def step(state: AlgorithmState) -> AlgorithmState:
    """Advance one synchronous round in place and return the state.

    Raises DivergenceError when any value passes the magnitude guard; the
    state is not usable afterwards.
    """
    game = state.game
    t_next = state.t + 1
    for i in range(game.n_clusters):
        a = state.graphs[i].weights
        state.y[i] = a @ state.y[i] - state.steps.per_cluster[i] * state.trackers[i]
        width = game.cluster_width(i)
        state.x[game.cluster_slice(i)] = state.y[i][state._owners[i], np.arange(width)]
    for i in range(game.n_clusters):
        a = state.graphs[i].weights
        fresh = _estimate_rows(state, i, t_next)
        state.trackers[i] = a @ state.trackers[i] + fresh - state.last_oracle[i]
        state.last_oracle[i] = fresh
    state.t = t_next

    peak = max(
        float(np.abs(state.x).max()),
        max(float(np.abs(y).max()) for y in state.y),
        max(float(np.abs(p).max()) for p in state.trackers),
    )
    if not np.isfinite(peak) or peak > DIVERGENCE_LIMIT:
        raise DivergenceError(t_next)
    return state


def stacked_mean_estimate(state: AlgorithmState) -> np.ndarray:
    """Per-coordinate averages of the in-cluster estimates, stacked."""
    return np.concatenate([yi.mean(axis=0) for yi in state.y])


def compute_metrics(state: AlgorithmState, ne: Optional[np.ndarray] = None) -> MetricsRow:
    """Error gap, consensus error, optimality gap, and tracking error at t.

    err_gap and opt_gap need the equilibrium point and are NaN without it.
    """
    ybar = stacked_mean_estimate(state)
    consensus = sum(float(((yi - yi.mean(axis=0)) ** 2).sum()) for yi in state.y)
    tracking = sum(float(((pi - pi.mean(axis=0)) ** 2).sum()) for pi in state.trackers)
    if ne is None:
        err_gap = opt_gap = float("nan")
    else:
        err_gap = float(np.linalg.norm(state.x - ne))
        opt_gap = float(np.linalg.norm(ybar - ne) ** 2)
    return MetricsRow(state.t, err_gap, consensus, opt_gap, tracking)


def run(
    state: AlgorithmState,
    iters: int,
    ne: Optional[np.ndarray] = None,
    record_positions: bool = False,
) -> RunMetrics:
    """Execute iters rounds, recording metrics at t = 0 and after each round.

    On divergence the partial trajectory is attached to the raised
    DivergenceError as .metrics.
    """
    if iters < 0:
        raise ValueError(f"iteration count must be >= 0, got {iters}")
    rows = [compute_metrics(state, ne)]
    positions = [state.x.copy()] if record_positions else None
    for _ in range(iters):
        try:
            step(state)
        except DivergenceError as err:
            err.metrics = RunMetrics.from_rows(rows, positions)
            raise
        rows.append(compute_metrics(state, ne))
        if record_positions:
            positions.append(state.x.copy())
    return RunMetrics.from_rows(rows, positions)
