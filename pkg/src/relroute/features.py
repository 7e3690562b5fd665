"""Relational state and action features.

Nothing here looks at device or packet identity: every value is a distance,
a queue length, a degree or a TTL, normalized as ``(raw + 1) / (cap + 1)`` so
real features land in (0, 1]. An empty neighbor set fills the twelve
aggregate slots with 0, a value no real feature can take.

Layout of the 18 state values::

    [ttl, queue_pos,
     dist, qlen, qlen_dest, degree,                      # the deciding device
     min(dist, qlen, qlen_dest, degree),                 # over up neighbors
     mean(...), max(...)]

An action is the candidate device's own four device values. The network input
is the state followed by the action, 22 values in all.
"""
from __future__ import annotations

import numpy as np

N_STATE = 18
N_ACTION = 4
N_FEATURES = N_STATE + N_ACTION
EMPTY_SENTINEL = 0.0

STATE_NAMES = (
    ["ttl", "queue_pos", "dist", "qlen", "qlen_dest", "degree"]
    + [f"{agg}_{f}" for agg in ("min", "mean", "max") for f in ("dist", "qlen", "qlen_dest", "degree")]
)
ACTION_NAMES = ["a_dist", "a_qlen", "a_qlen_dest", "a_degree"]


def normalize(raw, f_max):
    """``(raw + 1) / (f_max + 1)``, with raw clamped into [0, f_max]."""
    raw = np.minimum(np.maximum(raw, 0), f_max)
    return (raw + 1.0) / (np.asarray(f_max, dtype=float) + 1.0)


def device_caps(ctx) -> np.ndarray:
    return np.array([ctx.n, ctx.capacity, ctx.capacity, ctx.n], dtype=float)


def device_features(ctx, us, dst: int) -> np.ndarray:
    """Raw [distance to dst, queue length, queue length toward dst, degree] for each u."""
    us = np.asarray(us, dtype=np.int64)
    return np.stack([ctx.dist.dist[us, dst], ctx.qlen[us], ctx.counts[us, dst], ctx.degree[us]],
                    axis=-1).astype(float)


def state_features(ctx, p, v: int, position: int | None = None) -> np.ndarray:
    """Raw 18-vector for packet ``p`` at device ``v``; aggregates are NaN when v has no up neighbor."""
    if position is None:
        position = ctx.queues[v].position(p)
    local = device_features(ctx, [v], p.dst)[0]
    nbrs = ctx.nbr_arrays[v]
    if nbrs.size:
        nf = device_features(ctx, nbrs, p.dst)
        agg = np.concatenate([nf.min(axis=0), nf.mean(axis=0), nf.max(axis=0)])
    else:
        agg = np.full(12, np.nan)
    return np.concatenate([[p.ttl, position], local, agg])


def normalize_state(raw: np.ndarray, ctx) -> np.ndarray:
    caps = np.concatenate([[ctx.ttl, ctx.capacity], np.tile(device_caps(ctx), 4)])
    out = normalize(np.nan_to_num(raw, nan=0.0), caps)
    out[np.isnan(raw)] = EMPTY_SENTINEL
    return out


def action_features(ctx, us, p) -> np.ndarray:
    """Normalized device features of each candidate next hop (the stay action uses v itself)."""
    return normalize(device_features(ctx, us, p.dst), device_caps(ctx))


def decision_inputs(ctx, p, v: int, candidates: np.ndarray, position: int = 0):
    """Normalized state vector and per-candidate action matrix for one decision.

    Same values as ``normalize_state(state_features(...))`` and
    ``action_features(...)``, computed with one gather since v and its
    neighbors are all among the candidates.
    """
    caps = device_caps(ctx)
    dev = normalize(device_features(ctx, candidates, p.dst), caps)
    self_idx = int(np.searchsorted(candidates, v))
    state = np.empty(N_STATE)
    state[0] = (min(max(p.ttl, 0), ctx.ttl) + 1.0) / (ctx.ttl + 1.0)
    state[1] = (min(position, ctx.capacity) + 1.0) / (ctx.capacity + 1.0)
    state[2:6] = dev[self_idx]
    if candidates.size > 1:
        nb = np.delete(dev, self_idx, axis=0)
        state[6:10] = nb.min(axis=0)
        state[10:14] = nb.mean(axis=0)
        state[14:18] = nb.max(axis=0)
    else:
        state[6:18] = EMPTY_SENTINEL
    return state, dev


def join(state: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Stack one state vector against each action row -> (n_actions, 22)."""
    return np.hstack([np.broadcast_to(state, (actions.shape[0], N_STATE)), actions])
