"""Multi-cluster game structures and cost evaluation.

A game consists of N clusters; cluster i holds sizes[i] agents, each agent
owning a block of `dim` scalar coordinates of the joint action vector.
Agent (i, j) carries a local cost f_ij over the *full* joint action, and
cluster i plays the average (1/n_i) sum_j f_ij against the other clusters.
All indices in this package are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Cost = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class CoordinateIndex:
    """Maps (cluster, in-cluster coordinate) to a flat joint-action offset."""

    cluster: int
    local: int
    offset: int


class GameSpec:
    """Cluster/agent structure plus opaque per-agent cost evaluators.

    costs[i][j] is agent (i, j)'s cost, a pure callable on the joint action
    vector of length ``coords``. Immutable after construction; evaluators
    must be stateless.
    """

    def __init__(self, sizes: Sequence[int], dim: int, costs: Sequence[Sequence[Cost]]):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 1 or any(s < 1 for s in sizes):
            raise ValueError(f"cluster sizes must all be >= 1, got {sizes}")
        if dim < 1:
            raise ValueError(f"action dimension must be >= 1, got {dim}")
        if len(costs) != len(sizes) or any(len(c) != s for c, s in zip(costs, sizes)):
            raise ValueError("need exactly one cost evaluator per agent")
        self.sizes = sizes
        self.dim = int(dim)
        self.costs = tuple(tuple(c) for c in costs)
        # prefix sums of per-cluster coordinate counts
        widths = [s * dim for s in sizes]
        self.offsets = tuple(np.concatenate([[0], np.cumsum(widths)]).astype(int))
        self.coords = int(self.offsets[-1])

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    def cluster_width(self, i: int) -> int:
        return self.sizes[i] * self.dim

    def cluster_slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])

    def check_joint(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.coords,):
            raise ValueError(f"joint action must have shape ({self.coords},), got {x.shape}")
        return x

    def check_agent(self, i: int, j: int) -> None:
        if not 0 <= i < self.n_clusters:
            raise IndexError(f"cluster index {i} out of range [0, {self.n_clusters})")
        if not 0 <= j < self.sizes[i]:
            raise IndexError(f"agent index {j} out of range [0, {self.sizes[i]}) in cluster {i}")

    # Batched evaluation hooks; the generic path just loops over evaluators.

    def cluster_values(self, i: int, points: np.ndarray) -> np.ndarray:
        """Value of f_ij at points[j], one point per agent of cluster i."""
        return np.array([self.costs[i][j](points[j]) for j in range(self.sizes[i])])

    def cluster_values_at(self, i: int, x: np.ndarray) -> np.ndarray:
        """Values of all of cluster i's agents at the same joint action."""
        return np.array([self.costs[i][j](x) for j in range(self.sizes[i])])

    def agent_values(self, i: int, j: int, points: np.ndarray) -> np.ndarray:
        """Value of f_ij at each row of points (m, coords)."""
        return np.array([self.costs[i][j](p) for p in points])


class QuadraticGame(GameSpec):
    """Game whose costs are f_ij(x) = x'Q_ij x + b_ij'x + c_ij.

    Quadratic structure gives analytic gradients, a constant game-mapping
    Jacobian, and an exact Nash equilibrium solve. Q matrices are
    symmetrized on construction.
    """

    def __init__(self, sizes, dim, q_blocks, b_blocks, c_blocks):
        sizes = tuple(int(s) for s in sizes)
        nd = sum(sizes) * dim
        qs, bs, cs = [], [], []
        for i, n_i in enumerate(sizes):
            q = np.asarray(q_blocks[i], dtype=float)
            b = np.asarray(b_blocks[i], dtype=float)
            c = np.asarray(c_blocks[i], dtype=float)
            if q.shape != (n_i, nd, nd) or b.shape != (n_i, nd) or c.shape != (n_i,):
                raise ValueError(f"cluster {i}: expected Q ({n_i},{nd},{nd}), b ({n_i},{nd}), c ({n_i},)")
            q = 0.5 * (q + q.transpose(0, 2, 1))
            qs.append(q)
            bs.append(b)
            cs.append(c)
        costs = [
            [self._make_cost(qs[i][j], bs[i][j], cs[i][j]) for j in range(n_i)]
            for i, n_i in enumerate(sizes)
        ]
        super().__init__(sizes, dim, costs)
        self.q_blocks = tuple(qs)
        self.b_blocks = tuple(bs)
        self.c_blocks = tuple(cs)
        self._mapping_matrix = None
        self._mapping_offset = None

    @staticmethod
    def _make_cost(q, b, c):
        def cost(x):
            x = np.asarray(x, dtype=float)
            return float(x @ q @ x + b @ x + c)

        return cost

    def quadratic(self, i: int, j: int):
        """(Q, b, c) of agent (i, j)."""
        self.check_agent(i, j)
        return self.q_blocks[i][j], self.b_blocks[i][j], self.c_blocks[i][j]

    def cluster_values(self, i, points):
        p = np.asarray(points, dtype=float)
        return (
            np.einsum("jrc,jr,jc->j", self.q_blocks[i], p, p)
            + np.einsum("jr,jr->j", self.b_blocks[i], p)
            + self.c_blocks[i]
        )

    def cluster_values_at(self, i, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("jrc,r,c->j", self.q_blocks[i], x, x) + self.b_blocks[i] @ x + self.c_blocks[i]

    def agent_values(self, i, j, points):
        p = np.asarray(points, dtype=float)
        q, b, c = self.quadratic(i, j)
        return np.einsum("mr,rc,mc->m", p, q, p) + p @ b + c

    def agent_gradient(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        """Total gradient of f_ij at x (length coords)."""
        q, b, _ = self.quadratic(i, j)
        return 2.0 * (q @ self.check_joint(x)) + b

    def _mapping_parts(self):
        # Phi(x) = J x + r with per-cluster rows (1/n_i) sum_j (2 Q_ij x + b_ij)
        if self._mapping_matrix is None:
            jac = np.zeros((self.coords, self.coords))
            off = np.zeros(self.coords)
            for i, n_i in enumerate(self.sizes):
                rows = self.cluster_slice(i)
                jac[rows] = (2.0 / n_i) * self.q_blocks[i].sum(axis=0)[rows]
                off[rows] = self.b_blocks[i].mean(axis=0)[rows]
            self._mapping_matrix = jac
            self._mapping_offset = off
        return self._mapping_matrix, self._mapping_offset


def coord_index(game: GameSpec, i: int, k: int) -> CoordinateIndex:
    """Index of in-cluster coordinate k (0-based) of cluster i in the joint vector."""
    if not 0 <= i < game.n_clusters:
        raise IndexError(f"cluster index {i} out of range")
    if not 0 <= k < game.cluster_width(i):
        raise IndexError(f"coordinate {k} out of range [0, {game.cluster_width(i)}) in cluster {i}")
    return CoordinateIndex(i, k, game.offsets[i] + k)


def coord_from_offset(game: GameSpec, offset: int) -> CoordinateIndex:
    """Inverse of coord_index: recover (cluster, local) from a flat offset."""
    if not 0 <= offset < game.coords:
        raise IndexError(f"offset {offset} out of range [0, {game.coords})")
    i = int(np.searchsorted(game.offsets, offset, side="right") - 1)
    return CoordinateIndex(i, offset - game.offsets[i], offset)


def evaluate_local(game: GameSpec, i: int, j: int, x: np.ndarray) -> float:
    """Cost of agent (i, j) at joint action x."""
    game.check_agent(i, j)
    return float(game.costs[i][j](game.check_joint(x)))


def evaluate_cluster(game: GameSpec, i: int, x: np.ndarray) -> float:
    """Cluster-level cost: average of cluster i's agent costs at x."""
    game.check_agent(i, 0)
    x = game.check_joint(x)
    return float(game.cluster_values_at(i, x).mean())


def build_connectivity_game(n_clusters: int = 3, n_per: int = 4, dim: int = 2) -> QuadraticGame:
    """Connectivity-control game among sensor networks.

    Agent j of network i pays a positioning cost (i+1)(||u||^2 + 1'u + (j+1))
    in its own position u, plus a coupling cost ||u - v||^2 to the position v
    of agent j in the next network on the ring (indices here are 0-based; the
    usual 1-based network/agent labels appear as the i+1, j+1 factors).
    """
    if n_clusters < 2:
        raise ValueError("need at least 2 clusters for inter-cluster coupling")
    if n_per < 1 or dim < 1:
        raise ValueError("n_per and dim must be >= 1")
    sizes = (n_per,) * n_clusters
    nd = n_clusters * n_per * dim
    eye = np.eye(dim)

    def block(i, j):
        return slice((i * n_per + j) * dim, (i * n_per + j + 1) * dim)

    qs, bs, cs = [], [], []
    for i in range(n_clusters):
        nxt = (i + 1) % n_clusters
        q = np.zeros((n_per, nd, nd))
        b = np.zeros((n_per, nd))
        c = np.zeros(n_per)
        for j in range(n_per):
            own, other = block(i, j), block(nxt, j)
            q[j, own, own] = (i + 1) * eye + eye
            q[j, other, other] = eye
            q[j, own, other] = -eye
            q[j, other, own] = -eye
            b[j, own] = i + 1
            c[j] = (i + 1) * (j + 1)
        qs.append(q)
        bs.append(b)
        cs.append(c)
    return QuadraticGame(sizes, dim, qs, bs, cs)


def game_mapping(game: QuadraticGame, x: np.ndarray) -> np.ndarray:
    """Stacked per-cluster gradients of the cluster costs w.r.t. own blocks.

    The joint action solves the game exactly when this vector vanishes.
    """
    jac, off = game._mapping_parts()
    return jac @ game.check_joint(x) + off


def game_jacobian(game: QuadraticGame) -> np.ndarray:
    """Constant Jacobian of the game mapping (quadratic games only)."""
    jac, _ = game._mapping_parts()
    return jac.copy()


def lipschitz_bound(game: QuadraticGame) -> float:
    """Smallest uniform Lipschitz constant of the per-agent total gradients."""
    return max(
        2.0 * float(np.linalg.norm(game.q_blocks[i][j], 2))
        for i in range(game.n_clusters)
        for j in range(game.sizes[i])
    )


# Quadratic-game text serialization. Flat key = value lines; whitespace-
# separated floats; field names are part of the experiment-config contract.

def save_quadratic_game(game: QuadraticGame, path) -> None:
    lines = [
        f"clusters = {game.n_clusters}",
        "sizes = " + " ".join(str(s) for s in game.sizes),
        f"dim = {game.dim}",
    ]
    for i in range(game.n_clusters):
        for j in range(game.sizes[i]):
            q, b, c = game.quadratic(i, j)
            lines.append(f"q_{i}_{j} = " + " ".join(f"{v:.17g}" for v in q.ravel()))
            lines.append(f"b_{i}_{j} = " + " ".join(f"{v:.17g}" for v in b))
            lines.append(f"c_{i}_{j} = {c:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_quadratic_game(path) -> QuadraticGame:
    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        n_clusters = int(fields["clusters"])
        sizes = tuple(int(s) for s in fields["sizes"].split())
        dim = int(fields["dim"])
    except KeyError as exc:
        raise ValueError(f"game file {path}: missing header field {exc}") from exc
    if len(sizes) != n_clusters:
        raise ValueError(f"game file {path}: sizes length {len(sizes)} != clusters {n_clusters}")
    nd = sum(sizes) * dim
    qs, bs, cs = [], [], []
    for i, n_i in enumerate(sizes):
        q = np.zeros((n_i, nd, nd))
        b = np.zeros((n_i, nd))
        c = np.zeros(n_i)
        for j in range(n_i):
            try:
                q[j] = np.array(fields[f"q_{i}_{j}"].split(), dtype=float).reshape(nd, nd)
                b[j] = np.array(fields[f"b_{i}_{j}"].split(), dtype=float)
                c[j] = float(fields[f"c_{i}_{j}"])
            except KeyError as exc:
                raise ValueError(f"game file {path}: missing agent field {exc}") from exc
        qs.append(q)
        bs.append(b)
        cs.append(c)
    return QuadraticGame(sizes, dim, qs, bs, cs)
