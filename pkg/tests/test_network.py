import numpy as np
import pytest

from clusternash import (
    AssumptionViolation,
    CommGraph,
    contraction_factor,
    ring_graph,
    spectral_quantities,
    validate,
)

SQRT2_OVER_2 = np.sqrt(2.0) / 2.0


def test_ring_sums_exact():
    g = ring_graph(4, 0.5)
    assert np.array_equal(g.weights.sum(axis=0), np.ones(4))
    assert np.array_equal(g.weights.sum(axis=1), np.ones(4))


def test_ring_contraction_factor():
    assert ring_graph(4, 0.5).contraction == pytest.approx(SQRT2_OVER_2, abs=1e-12)


def test_single_node_ring():
    g = ring_graph(1, 0.5)
    assert np.array_equal(g.weights, [[1.0]])
    assert g.contraction == pytest.approx(0.0, abs=1e-12)


def test_ring_rejects_bad_self_weight():
    for w in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            ring_graph(4, w)


def test_validate_ring_passes():
    report = validate(ring_graph(4, 0.5).weights)
    assert report.ok
    assert report.row_sum_residual <= 1e-12
    assert report.col_sum_residual <= 1e-12


def test_validate_identity_fails_connectivity():
    report = validate(np.eye(4))
    assert report.doubly_stochastic
    assert not report.strongly_connected
    assert not report.ok


def test_validate_row_stochastic_only():
    report = validate(np.array([[0.5, 0.5], [1.0, 0.0]]))
    assert report.col_sum_residual == pytest.approx(0.5)
    assert not report.doubly_stochastic


def test_comm_graph_rejects_invalid():
    with pytest.raises(AssumptionViolation):
        CommGraph(np.eye(3))


def test_mixing_contracts_disagreement():
    rng = np.random.default_rng(0)
    for n, w in ((4, 0.5), (5, 0.3), (3, 0.7)):
        g = ring_graph(n, w)
        for _ in range(100 // 3):
            y = rng.normal(size=n)
            mixed = g.mix(y)
            lhs = np.linalg.norm(mixed - mixed.mean())
            rhs = g.contraction * np.linalg.norm(y - y.mean())
            assert lhs <= rhs + 1e-12


def test_mixing_preserves_mean():
    g = ring_graph(4, 0.5)
    assert np.array_equal(np.ones(4) @ g.weights / 4, np.ones(4) / 4)
    g2 = ring_graph(5, 0.3)
    assert np.abs(np.ones(5) @ g2.weights / 5 - 0.2).max() <= 1e-13


def test_spectral_quantities_three_rings():
    graphs = [ring_graph(4, 0.5, cluster=i) for i in range(3)]
    summary = spectral_quantities(graphs)
    assert summary.sigma_max == pytest.approx(SQRT2_OVER_2, abs=1e-12)
    assert summary.mixing_ratio == pytest.approx(3.0, abs=1e-12)


def test_spectral_quantities_single_nodes():
    summary = spectral_quantities([ring_graph(1, 0.5) for _ in range(3)])
    assert summary.sigma_max == pytest.approx(0.0, abs=1e-12)
    assert summary.mixing_ratio == pytest.approx(1.0, abs=1e-12)


def test_spectral_quantities_mixed_clusters():
    summary = spectral_quantities([ring_graph(1, 0.5), ring_graph(4, 0.5)])
    assert summary.sigma_max == pytest.approx(SQRT2_OVER_2, abs=1e-12)
    assert summary.mixing_ratio == pytest.approx(3.0, abs=1e-12)


def test_contraction_factor_uses_singular_values():
    # non-normal doubly stochastic matrix: spectral norm exceeds eigenvalue moduli
    a = np.array(
        [
            [0.5, 0.5, 0.0],
            [0.0, 0.2, 0.8],
            [0.5, 0.3, 0.2],
        ]
    )
    deflated = a - np.ones((3, 3)) / 3
    eig_max = np.abs(np.linalg.eigvals(deflated)).max()
    assert contraction_factor(a) >= eig_max - 1e-12
    assert contraction_factor(a) == pytest.approx(np.linalg.norm(deflated, 2))
