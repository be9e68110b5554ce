"""Per-cluster communication graphs with doubly-stochastic mixing weights.

Each cluster mixes its agents' local variables with a weight matrix A that
must be doubly stochastic, have positive self-weights, and whose positive
pattern is strongly connected. The contraction factor
sigma = ||A - (1/n) 1 1'||_2 < 1 governs how fast in-cluster disagreement
shrinks under repeated mixing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STOCHASTIC_TOL = 1e-12


class AssumptionViolation(ValueError):
    """A required structural property of the inputs does not hold."""


@dataclass(frozen=True)
class GraphReport:
    """Per-invariant validation outcome with measured residuals."""

    row_sum_residual: float
    col_sum_residual: float
    nonnegative: bool
    positive_diagonal: bool
    strongly_connected: bool
    contraction_factor: float

    @property
    def doubly_stochastic(self) -> bool:
        return (
            self.nonnegative
            and self.row_sum_residual <= STOCHASTIC_TOL
            and self.col_sum_residual <= STOCHASTIC_TOL
        )

    @property
    def ok(self) -> bool:
        return (
            self.doubly_stochastic
            and self.positive_diagonal
            and self.strongly_connected
            and self.contraction_factor < 1.0
        )


def contraction_factor(weights: np.ndarray) -> float:
    """Spectral norm of the mean-deflated weight matrix.

    Computed from singular values, which stays correct for non-normal
    (directed) weight matrices.
    """
    n = weights.shape[0]
    deflated = weights - np.ones((n, n)) / n
    return float(np.linalg.norm(deflated, 2))


def _strongly_connected(weights: np.ndarray) -> bool:
    # reachability closure over the positive-entry pattern
    n = weights.shape[0]
    adj = weights > 0
    reach = np.eye(n, dtype=bool)
    for _ in range(n):
        new = reach | (reach @ adj)
        if (new == reach).all():
            break
        reach = new
    return bool(reach.all() and reach.T.all())


def validate(weights: np.ndarray) -> GraphReport:
    """Report each mixing-matrix requirement with its measured residual."""
    a = np.asarray(weights, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {a.shape}")
    return GraphReport(
        row_sum_residual=float(np.abs(a.sum(axis=1) - 1.0).max()),
        col_sum_residual=float(np.abs(a.sum(axis=0) - 1.0).max()),
        nonnegative=bool((a >= 0).all()),
        positive_diagonal=bool((np.diag(a) > 0).all()),
        strongly_connected=_strongly_connected(a),
        contraction_factor=contraction_factor(a),
    )


class CommGraph:
    """Validated mixing matrix for one cluster. Immutable once built."""

    def __init__(self, weights: np.ndarray, cluster: int = 0):
        a = np.array(weights, dtype=float)
        report = validate(a)
        if not report.ok:
            raise AssumptionViolation(f"invalid mixing matrix for cluster {cluster}: {report}")
        a.setflags(write=False)
        self.weights = a
        self.cluster = cluster
        self.n_agents = a.shape[0]
        self.contraction = report.contraction_factor

    def mix(self, values: np.ndarray) -> np.ndarray:
        return self.weights @ values


def ring_graph(n: int, self_weight: float = 0.5, cluster: int = 0) -> CommGraph:
    """Directed ring with self-loops: each agent keeps self_weight of its own
    value and passes 1 - self_weight around the cycle. Valid for any n >= 1."""
    if n < 1:
        raise ValueError(f"need at least one agent, got {n}")
    if not 0.0 < self_weight < 1.0:
        raise ValueError(f"self_weight must be in (0, 1), got {self_weight}")
    weights = self_weight * np.eye(n)
    for j in range(n):
        weights[j, (j + 1) % n] += 1.0 - self_weight
    return CommGraph(weights, cluster=cluster)


@dataclass(frozen=True)
class SpectralSummary:
    """Contraction factors across clusters and the derived mixing constants."""

    per_cluster: tuple
    sigma_max: float
    mixing_ratio: float  # max over clusters of (1 + sigma^2) / (1 - sigma^2)


def spectral_quantities(graphs) -> SpectralSummary:
    sigmas = tuple(g.contraction for g in graphs)
    if any(s >= 1.0 for s in sigmas):
        raise AssumptionViolation(f"contraction factor >= 1 in {sigmas}")
    ratios = [(1.0 + s * s) / (1.0 - s * s) for s in sigmas]
    return SpectralSummary(sigmas, max(sigmas), max(ratios))
