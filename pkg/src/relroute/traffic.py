"""Poisson flow and packet generation."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrafficConfig:
    lambda_f: float  # mean new flows per timestep
    lambda_d: float  # mean flow duration, timesteps
    lambda_p: float  # mean packets per flow per timestep

    def __post_init__(self):
        if min(self.lambda_f, self.lambda_d, self.lambda_p) < 0:
            raise ValueError(f"traffic rates must be nonnegative: {self}")


@dataclass(frozen=True)
class Flow:
    id: int
    src: int
    dst: int
    start_time: int
    end_time: int
    lambda_p: float


class Packet:
    """A routable packet. Mutable: ttl and timestamps change as it moves."""

    __slots__ = ("id", "src", "dst", "ttl", "created_at", "arrived_at", "eligible_at", "last_decision")

    def __init__(self, id: int, src: int, dst: int, ttl: int, created_at: int):
        self.id = id
        self.src = src
        self.dst = dst
        self.ttl = ttl
        self.created_at = created_at
        self.arrived_at = created_at
        self.eligible_at = created_at + 1
        # index of this packet's latest decision in an experience store, if any
        self.last_decision = -1

    def __repr__(self):
        return (f"Packet(id={self.id}, {self.src}->{self.dst}, ttl={self.ttl}, "
                f"created={self.created_at}, arrived={self.arrived_at})")


class TrafficSource:
    """Owns the flow list and the id counters for one simulation."""

    def __init__(self, cfg: TrafficConfig, n_devices: int, rng: np.random.Generator):
        if n_devices < 2:
            raise ValueError("traffic needs at least 2 devices")
        self.cfg = cfg
        self.n_devices = n_devices
        self.rng = rng
        self._flow_ids = itertools.count()
        self._packet_ids = itertools.count()
        self.flows: list[Flow] = initial_flows(cfg, n_devices, rng, self._flow_ids)

    def step(self, t: int, ttl_init: int) -> list[Packet]:
        """Advance flows to timestep ``t`` (t >= 1) and emit this step's packets."""
        if t >= 1:
            self.flows = step_flows(self.flows, self.cfg, t, self.n_devices, self.rng, self._flow_ids)
        return generate_packets(self.flows, t, ttl_init, self.rng, self._packet_ids)


def _endpoints(n_devices: int, rng: np.random.Generator) -> tuple[int, int]:
    src = int(rng.integers(n_devices))
    dst = int(rng.integers(n_devices - 1))
    if dst >= src:
        dst += 1
    return src, dst


def _new_flow(fid: int, t: int, cfg: TrafficConfig, n_devices: int, rng: np.random.Generator) -> Flow:
    src, dst = _endpoints(n_devices, rng)
    dur = math.ceil(rng.exponential(cfg.lambda_d)) if cfg.lambda_d > 0 else 0
    return Flow(fid, src, dst, t, t + dur, cfg.lambda_p)


def initial_flows(cfg: TrafficConfig, n_devices: int, rng: np.random.Generator, ids=None) -> list[Flow]:
    """round(lambda_f * lambda_d) flows, all starting at t = 0."""
    if n_devices < 2:
        raise ValueError("traffic needs at least 2 devices")
    ids = itertools.count() if ids is None else ids
    count = int(round(cfg.lambda_f * cfg.lambda_d))
    return [_new_flow(next(ids), 0, cfg, n_devices, rng) for _ in range(count)]


def step_flows(flows: list[Flow], cfg: TrafficConfig, t: int, n_devices: int,
               rng: np.random.Generator, ids=None) -> list[Flow]:
    if t < 1:
        raise ValueError("step_flows starts at t = 1")
    ids = itertools.count() if ids is None else ids
    alive = [f for f in flows if f.end_time >= t]
    n_new = int(rng.poisson(cfg.lambda_f)) if cfg.lambda_f > 0 else 0
    alive.extend(_new_flow(next(ids), t, cfg, n_devices, rng) for _ in range(n_new))
    return alive


def generate_packets(flows: list[Flow], t: int, ttl_init: int, rng: np.random.Generator,
                     ids=None) -> list[Packet]:
    if not flows:
        return []
    ids = itertools.count() if ids is None else ids
    counts = rng.poisson([f.lambda_p for f in flows])
    out = []
    for f, c in zip(flows, counts.tolist()):
        for _ in range(c):
            out.append(Packet(next(ids), f.src, f.dst, ttl_init, t))
    return out
