"""Gradient-free Nash equilibrium seeking for multi-cluster games.

Clusters of cooperating agents play a non-cooperative game against each
other while only measuring cost values. Agents estimate gradients with a
two-point Gaussian-smoothing rule, mix estimates and gradient trackers over
per-cluster digraphs, and descend with cluster-specific constant step sizes.
"""

from .algorithm import (
    AlgorithmState,
    DivergenceError,
    MetricsRow,
    RunMetrics,
    StepSizes,
    compute_metrics,
    initialize,
    run,
    step,
)
from .analysis import (
    ConvergenceCertificate,
    GameConstants,
    HeterogeneityViolation,
    NoCertificate,
    NotStronglyMonotone,
    certificate,
    compute_constants,
    ne_gap_bound,
    plateau_bound,
    solve_ne,
)
from .game import (
    CoordinateIndex,
    GameSpec,
    QuadraticGame,
    build_connectivity_game,
    coord_from_offset,
    coord_index,
    evaluate_cluster,
    evaluate_local,
    game_jacobian,
    game_mapping,
    lipschitz_bound,
    load_quadratic_game,
    save_quadratic_game,
)
from .network import (
    AssumptionViolation,
    CommGraph,
    GraphReport,
    SpectralSummary,
    contraction_factor,
    ring_graph,
    spectral_quantities,
    validate,
)
from .oracle import (
    agent_perturbation,
    gradient_oracle,
    local_oracle_rows,
    oracle_rows,
    oracle_samples,
    perturbation_block,
    perturbation_stream,
    sample_perturbation,
    smoothed_gradient_reference,
    smoothed_value,
)

__version__ = "0.1.0"
