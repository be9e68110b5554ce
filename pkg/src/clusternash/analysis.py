"""Analytic toolkit: equilibrium solve, convergence constants, and the
linear-rate certificate.

The iteration's error triple (total consensus error, squared distance of the
mean estimate from the equilibrium, total tracking error) obeys, in
expectation, a componentwise linear recursion Psi' <= M Psi + U whose 3x3
matrix M and drive vector U are explicit polynomials in the step sizes and a
set of fifteen game/network coefficients m1..m15. When the largest step size
sits below closed-form caps and the step-size heterogeneity is small enough,
M is non-negative and admits a positive vector w with M w < w, certifying a
spectral radius below one and hence linear convergence to a plateau bounded
by (I - M)^{-1} U.

All coordinate-counting constants treat each scalar coordinate as one agent
coordinate, so cluster i contributes sizes[i] * dim to n and its powers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import QuadraticGame, game_jacobian, lipschitz_bound
from .network import AssumptionViolation, spectral_quantities

NE_RESIDUAL_TOL = 1e-10


class NotStronglyMonotone(AssumptionViolation):
    """Game mapping lacks a positive strong-monotonicity modulus."""


class HeterogeneityViolation(AssumptionViolation):
    """Step-size spread too large for the certificate to exist."""


class NoCertificate(RuntimeError):
    """Requested a quantity that only exists when the certificate holds."""


@dataclass(frozen=True)
class GameConstants:
    """Scalars the certificate is built from.

    n counts all scalar coordinates; size_sq and size_cube are the sums of
    squared / cubed per-cluster coordinate counts. grad_cap is the largest
    per-agent gradient norm at the equilibrium.
    """

    n: int
    size_sq: float
    size_cube: float
    lipschitz: float
    monotone: float
    grad_cap: float
    sigma_max: float
    mixing: float
    mu: float


@dataclass(frozen=True)
class ConvergenceCertificate:
    m: tuple  # m1..m15, index 0 holds m1
    alpha_caps: tuple  # the three closed-form step-size caps
    alpha_bound: float  # min of the caps, 1/m6, and 1
    eps_bound: float
    weights: tuple  # positive vector w with M w < w when the bound holds
    system_matrix: np.ndarray
    drive: np.ndarray
    spectral_radius: float
    alpha_max: float
    alpha_bar: float
    heterogeneity: float

    @property
    def alpha_ok(self) -> bool:
        return self.alpha_max < self.alpha_bound

    @property
    def holds(self) -> bool:
        return self.alpha_ok and self.spectral_radius < 1.0


def solve_ne(game: QuadraticGame) -> np.ndarray:
    """Unique equilibrium of a strongly-monotone quadratic game.

    The game mapping is affine, Phi(x) = J x + r, so the equilibrium solves
    J x = -r. Verified to residual ||Phi(x*)|| <= 1e-10.
    """
    jac, off = game._mapping_parts()
    sym_min = float(np.linalg.eigvalsh(0.5 * (jac + jac.T)).min())
    if sym_min <= 1e-12:
        raise NotStronglyMonotone(f"mapping Jacobian symmetric part has min eigenvalue {sym_min:g}")
    ne = np.linalg.solve(jac, -off)
    residual = float(np.linalg.norm(jac @ ne + off))
    if residual > NE_RESIDUAL_TOL:
        raise ArithmeticError(f"equilibrium solve residual {residual:g} above {NE_RESIDUAL_TOL:g}")
    return ne


def ne_gap_bound(lipschitz: float, monotone: float, n: int, mu: float, gamma: float = None) -> float:
    """Bound on the distance between the smoothed-game equilibrium and the
    true one: n (n+3)^{3/2} L gamma mu / (2 (1 - sqrt(1 - gamma chi))).

    gamma is a free analysis parameter in (0, chi / (n^2 L^2)]; by default
    the largest admissible value. Linear in mu and zero at mu = 0.
    """
    if mu < 0:
        raise ValueError(f"smoothing parameter must be >= 0, got {mu}")
    gamma_cap = monotone / (n * n * lipschitz * lipschitz)
    if gamma is None:
        gamma = gamma_cap
    if not 0 < gamma <= gamma_cap:
        raise ValueError(f"gamma must lie in (0, {gamma_cap:g}], got {gamma}")
    return n * (n + 3) ** 1.5 * lipschitz * gamma * mu / (2.0 * (1.0 - np.sqrt(1.0 - gamma * monotone)))


def compute_constants(game: QuadraticGame, graphs, mu: float) -> GameConstants:
    """Collect every scalar the certificate needs from game and network."""
    if mu < 0:
        raise ValueError(f"smoothing parameter must be >= 0, got {mu}")
    jac = game_jacobian(game)
    monotone = float(np.linalg.eigvalsh(0.5 * (jac + jac.T)).min())
    if monotone <= 0:
        raise NotStronglyMonotone(f"strong monotonicity modulus {monotone:g} is not positive")
    ne = solve_ne(game)
    grad_cap = max(
        float(np.linalg.norm(game.agent_gradient(i, j, ne)))
        for i in range(game.n_clusters)
        for j in range(game.sizes[i])
    )
    widths = np.array([game.cluster_width(i) for i in range(game.n_clusters)], dtype=float)
    spectral = spectral_quantities(graphs)
    return GameConstants(
        n=game.coords,
        size_sq=float((widths**2).sum()),
        size_cube=float((widths**3).sum()),
        lipschitz=lipschitz_bound(game),
        monotone=monotone,
        grad_cap=grad_cap,
        sigma_max=spectral.sigma_max,
        mixing=spectral.mixing_ratio,
        mu=mu,
    )


def certificate(constants: GameConstants, steps) -> ConvergenceCertificate:
    """Assemble the error-recursion system and its step-size region.

    Raises HeterogeneityViolation when the step-size spread already destroys
    the contraction of the mean dynamics (m6 <= 0); in that case no step
    size is admissible.
    """
    n = float(constants.n)
    n_s = constants.size_sq
    n_c = constants.size_cube
    lip2 = constants.lipschitz**2
    chi = constants.monotone
    var = constants.mixing
    g2 = constants.grad_cap**2
    mu2 = constants.mu**2
    sig2 = constants.sigma_max**2

    m1 = (1.0 - sig2) / 2.0
    m2 = 24.0 * (n + 4) * n_c * var * lip2
    m3 = 2.0 * var
    m4 = n * n * lip2 / chi
    m5 = 12.0 * n * (n + 4) * lip2
    m6 = chi - 2.0 * np.sqrt(n) * constants.lipschitz * steps.heterogeneity
    m7 = 12.0 * (n + 4) * n_s * var * lip2 * (3.0 + sig2)
    m8 = 24.0 * (n + 4) * n_s * var * lip2 * m4
    m9 = 24.0 * (n + 4) * n_s * var * lip2 * (m2 + m5)
    m10 = 48.0 * (n + 4) * n_s * var * lip2
    m11 = var * m10
    m12 = 24.0 * (n + 4) * n_c * var * g2 + 6.0 * (n + 4) ** 3 * n_c * var * mu2 * lip2
    m13 = 12.0 * n * (n + 4) * g2 + 3.0 * n * (n + 4) ** 3 * mu2 * lip2
    m14 = 48.0 * (n + 4) * n_s * var * g2 + 12.0 * (n + 4) ** 3 * n_s * var * mu2 * lip2
    m15 = 24.0 * (n + 4) * n_s * var * lip2 * (m12 + m13)
    if m6 <= 0:
        raise HeterogeneityViolation(
            f"step-size heterogeneity {steps.heterogeneity:.4f} at or above the admissible "
            f"bound {chi / (2.0 * np.sqrt(n) * constants.lipschitz):.4f}"
        )

    w1 = m1 * m6 / (4.0 * n * m4 * m10 + 2.0 * m6 * m7 + 2.0 * m6 * m8)
    w2 = n * m1 * m4 / (2.0 * n * m4 * m10 + m6 * m7 + m6 * m8)
    a1 = np.sqrt(
        m1 * m1 * m6
        / (m1 * m2 * m6 + 2 * n * m1 * m2 * m4 + 4 * n * m3 * m4 * m10 + 2 * m3 * m6 * m7 + 2 * m3 * m6 * m8)
    )
    a2 = m1 * m4 * m6 / (m1 * m5 * m6 + 2 * n * m1 * m4 * m5)
    a3 = np.sqrt(
        m1
        * (2 * n * m4 * m10 + m6 * m7 + m6 * m8)
        / (m1 * m6 * m9 + 2 * n * m1 * m4 * m9 + m11 * (4 * n * m4 * m10 + 2 * m6 * m7 + 2 * m6 * m8))
    )

    am = steps.alpha_max
    ab = steps.alpha_bar
    am2 = am * am
    matrix = np.array(
        [
            [1.0 - m1 + m2 * am2, m2 * am2, m3 * am2],
            [m4 * am + m5 * am2, 1.0 - m6 * ab + m5 * am2, 0.0],
            [m7 + m8 * am + m9 * am2, m10 + m9 * am2, 1.0 - m1 + m11 * am2],
        ]
    )
    drive = np.array([m12 * am2, m13 * am2, m14 + m15 * am2])
    rho = float(np.abs(np.linalg.eigvals(matrix)).max())
    return ConvergenceCertificate(
        m=(m1, m2, m3, m4, m5, m6, m7, m8, m9, m10, m11, m12, m13, m14, m15),
        alpha_caps=(float(a1), float(a2), float(a3)),
        alpha_bound=float(min(a1, a2, a3, 1.0 / m6, 1.0)),
        eps_bound=float(chi / (2.0 * np.sqrt(n) * constants.lipschitz)),
        weights=(float(w1), float(w2), 1.0),
        system_matrix=matrix,
        drive=drive,
        spectral_radius=rho,
        alpha_max=am,
        alpha_bar=ab,
        heterogeneity=steps.heterogeneity,
    )


def plateau_bound(cert: ConvergenceCertificate) -> tuple:
    """Steady-state bounds (I - M)^{-1} U for the three error components.

    Only meaningful when the recursion contracts; the first component is
    O(alpha_max^2) and the second O(alpha_max) as the step sizes shrink.
    """
    if cert.spectral_radius >= 1.0:
        raise NoCertificate(f"spectral radius {cert.spectral_radius:g} is not below one")
    bounds = np.linalg.solve(np.eye(3) - cert.system_matrix, cert.drive)
    return tuple(float(b) for b in bounds)
