"""Network topologies, the two-state Markov link process, and graph measures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InvalidParameter(ValueError):
    """Raised when a generator or link-model parameter is out of range."""


class DegenerateChain(ValueError):
    """Raised for the alpha = beta = 1 link chain, which has no unique steady state."""


@dataclass(frozen=True)
class Topology:
    """Static graph of potential links.

    ``edges`` is an (E, 2) int array with ``u < v`` in every row, sorted
    lexicographically. ``positions`` is only set for random geometric graphs.
    """

    n_devices: int
    kind: str
    edges: np.ndarray
    positions: np.ndarray | None = None
    radius: float | None = None

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def adjacency(self, up: np.ndarray | None = None) -> np.ndarray:
        """Dense 0/1 adjacency matrix, optionally restricted to links that are up."""
        a = np.zeros((self.n_devices, self.n_devices), dtype=np.int8)
        e = self.edges if up is None else self.edges[up]
        a[e[:, 0], e[:, 1]] = 1
        a[e[:, 1], e[:, 0]] = 1
        return a


def _sorted_edges(pairs) -> np.ndarray:
    arr = np.array(sorted(pairs), dtype=np.int64)
    return arr.reshape(-1, 2)


def make_lattice(k: int) -> Topology:
    """Square k-by-k grid with row-major device numbering."""
    if int(k) != k or k < 2:
        raise InvalidParameter(f"lattice side must be an integer >= 2, got {k!r}")
    k = int(k)
    pairs = []
    for r in range(k):
        for c in range(k):
            v = r * k + c
            if c + 1 < k:
                pairs.append((v, v + 1))
            if r + 1 < k:
                pairs.append((v, v + k))
    return Topology(n_devices=k * k, kind="lattice", edges=_sorted_edges(pairs))


def lattice_side(n: int) -> int:
    k = math.isqrt(n)
    if k * k != n:
        raise InvalidParameter(f"lattice size must be a perfect square, got N={n}")
    return k


def make_random_geometric(n: int, radius: float, rng: np.random.Generator) -> Topology:
    """Uniform points in the unit square; link every pair within ``radius`` (inclusive)."""
    if int(n) != n or n < 2:
        raise InvalidParameter(f"need at least 2 devices, got {n!r}")
    if not (0 < radius <= math.sqrt(2)):
        raise InvalidParameter(f"radius must lie in (0, sqrt(2)], got {radius!r}")
    n = int(n)
    pos = rng.random((n, 2))
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    iu, ju = np.triu_indices(n, k=1)
    # Small slack so a pair sitting exactly on the radius is not lost to rounding.
    mask = d2[iu, ju] <= radius * radius * (1 + 1e-12)
    edges = np.stack([iu[mask], ju[mask]], axis=1).astype(np.int64)
    return Topology(n_devices=n, kind="random_geometric", edges=edges, positions=pos, radius=float(radius))


def steady_state_prob(alpha: float, beta: float) -> float:
    """Long-run probability that a link is up.

    ``alpha`` is the probability of staying up, ``beta`` of staying down.
    """
    _check_probs(alpha, beta)
    denom = 2.0 - alpha - beta
    if denom <= 0:
        raise DegenerateChain("alpha = beta = 1 never mixes; steady state depends on the initial state")
    return (1.0 - beta) / denom


def _check_probs(alpha: float, beta: float) -> None:
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise InvalidParameter(f"alpha and beta must be probabilities, got ({alpha}, {beta})")


@dataclass
class LinkState:
    """Per-edge up/down flags evolving as independent two-state Markov chains."""

    up: np.ndarray
    alpha: float
    beta: float
    pi: float
    version: int = field(default=0)

    def copy(self) -> "LinkState":
        return LinkState(self.up.copy(), self.alpha, self.beta, self.pi, self.version)


def init_links(topo: Topology, alpha: float, beta: float, rng: np.random.Generator) -> LinkState:
    pi = steady_state_prob(alpha, beta)
    up = rng.random(topo.n_edges) < pi
    return LinkState(up=up, alpha=float(alpha), beta=float(beta), pi=pi)


def step_links(state: LinkState, rng: np.random.Generator) -> LinkState:
    """Advance every link one timestep in place and return the state.

    ``version`` is bumped only when some link actually flipped, so callers can
    cache neighbor lists.
    """
    if state.alpha == 1.0 and state.beta == 0.0:
        # static links: nothing can flip, skip the draw
        return state
    u = rng.random(state.up.shape[0])
    new_up = np.where(state.up, u < state.alpha, u >= state.beta)
    if not np.array_equal(new_up, state.up):
        state.up = new_up
        state.version += 1
    return state


def neighbor_lists(topo: Topology, up: np.ndarray) -> list[list[int]]:
    """Sorted neighbor list per device over the links that are currently up."""
    nbrs: list[list[int]] = [[] for _ in range(topo.n_devices)]
    for a, b in topo.edges[up].tolist():
        nbrs[a].append(b)
        nbrs[b].append(a)
    for lst in nbrs:
        lst.sort()
    return nbrs


def neighbors(topo: Topology, state: LinkState, v: int) -> set[int]:
    e = topo.edges[state.up]
    return set(e[e[:, 0] == v, 1].tolist()) | set(e[e[:, 1] == v, 0].tolist())


def degree(topo: Topology, state: LinkState, v: int) -> int:
    return len(neighbors(topo, state, v))


def normalized_laplacian(adj: np.ndarray) -> np.ndarray:
    """Symmetric normalized Laplacian I - D^-1/2 A D^-1/2.

    Rows and columns of isolated devices are left entirely zero.
    """
    adj = np.asarray(adj, dtype=float)
    deg = adj.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = -adj * inv_sqrt[:, None] * inv_sqrt[None, :]
    lap[np.diag_indices_from(lap)] = nz.astype(float)
    return lap


def algebraic_connectivity_of(adj: np.ndarray) -> float:
    """Second-smallest eigenvalue of the normalized Laplacian of ``adj``."""
    n = adj.shape[0]
    if n < 2:
        raise InvalidParameter("algebraic connectivity needs at least 2 devices")
    vals = np.linalg.eigvalsh(normalized_laplacian(adj))
    lam = float(vals[1])
    # eigvalsh returns ~1e-16 noise for the exact zero eigenvalue of a
    # disconnected graph; snap it so "== 0 iff disconnected" holds.
    if abs(lam) < 1e-10:
        return 0.0
    return min(max(lam, 0.0), 2.0)


def algebraic_connectivity(topo: Topology, state: LinkState | None = None) -> float:
    up = None if state is None else state.up
    return algebraic_connectivity_of(topo.adjacency(up))
