"""Shortest-path and backpressure routing."""
from __future__ import annotations

import numpy as np

from .simcore import Policy, Simulation
from .traffic import Packet


def sp_next_hop(v: int, p: Packet, nbrs: list[int], dist: np.ndarray) -> int:
    """Next hop for ``p`` at ``v``: the up neighbor closest to the destination.

    Returns ``v`` itself (stay) when no up neighbor is strictly closer than
    ``v``. Ties go to the lowest device index.
    """
    if not nbrs:
        return v
    col = dist[:, p.dst]
    best = v
    best_d = col[v]
    for u in nbrs:  # nbrs is sorted, so strict < keeps the lowest index on ties
        du = col[u]
        if du < best_d:
            best, best_d = u, du
    return best


def bp_select(v: int, sim: Simulation) -> tuple[Packet, int] | None:
    """Pick the (destination, neighbor) pair with the largest positive backlog differential.

    Only destinations with a packet that may be sent this timestep are
    considered; the oldest such packet is sent. Ties go to the lowest
    destination, then the lowest neighbor.
    """
    nbrs = sim.nbr_arrays[v]
    if nbrs.size == 0:
        return None
    t = sim.t
    by_dest = sim.queues[v].by_dest
    dests = sorted(d for d, q in by_dest.items() if q[0].eligible_at <= t)
    if not dests:
        return None
    dests = np.asarray(dests, dtype=np.int64)
    counts = sim.counts
    # rows: destinations, columns: neighbors
    diff = counts[v, dests][:, None] - counts[np.ix_(nbrs, dests)].T
    k = int(np.argmax(diff))
    i, j = divmod(k, nbrs.size)
    if diff[i, j] <= 0:
        return None
    d = int(dests[i])
    return by_dest[d][0], int(nbrs[j])


class ShortestPathPolicy(Policy):
    name = "sp"

    def decide(self, sim: Simulation, v: int):
        p = sim.queues[v].packets[0]
        if p.eligible_at > sim.t:
            return None
        return p, sp_next_hop(v, p, sim.nbrs[v], sim.dist.dist)


class BackpressurePolicy(Policy):
    name = "bp"

    def decide(self, sim: Simulation, v: int):
        return bp_select(v, sim)
