"""Distance-vector hop counts over every link that has ever been seen up.

Once a device has had a link to a neighbor, that link keeps counting in the
distance calculation even while it is down; only next-hop choice looks at the
links that are up right now.
"""
from __future__ import annotations

import numpy as np

from .topology import Topology


class DistanceTable:
    """Per-device hop-count estimates; ``n_devices`` doubles as the "unknown" value."""

    def __init__(self, topo: Topology):
        self.topo = topo
        n = topo.n_devices
        self.unknown = n
        self.seen_links = np.zeros(topo.n_edges, dtype=bool)
        self.dist = np.full((n, n), n, dtype=np.int64)
        np.fill_diagonal(self.dist, 0)

    def observe_and_relax(self, up: np.ndarray) -> bool:
        """Fold the currently-up links into the seen set and relax to a fixpoint.

        Returns True when new links were seen (and distances may have changed).
        """
        fresh = up & ~self.seen_links
        if not fresh.any():
            return False
        self.seen_links |= fresh
        self._relax()
        return True

    def _relax(self) -> None:
        n = self.topo.n_devices
        e = self.topo.edges[self.seen_links]
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        dist = self.dist
        # Bellman-Ford: each round every device takes 1 + the best
        # advertisement from any seen neighbor. Hop counts need < n rounds.
        for _ in range(n):
            offer = np.full_like(dist, self.unknown)
            np.minimum.at(offer, src, dist[dst] + 1)
            new = np.minimum(dist, np.minimum(offer, self.unknown))
            if np.array_equal(new, dist):
                break
            dist = new
        self.dist = dist

    def distance(self, v: int, d: int) -> int:
        return int(self.dist[v, d])


def observe_and_relax(table: DistanceTable, up: np.ndarray) -> DistanceTable:
    table.observe_and_relax(up)
    return table


def distance(table: DistanceTable, v: int, d: int) -> int:
    return table.distance(v, d)
