"""Discrete-time packet-level engine.

Each timestep runs, in order: link update, traffic injection, and a MAC phase
that visits every device once in a fresh random order. A visited device may
transmit at most one packet that was queued before this timestep; the routing
policy picks which packet and which neighbor.
"""
from __future__ import annotations

import csv
import enum
import math
from collections import deque
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .distance import DistanceTable
from .topology import LinkState, Topology, algebraic_connectivity_of, neighbor_lists, step_links
from .traffic import Packet, TrafficSource


class Outcome(enum.IntEnum):
    QUEUED = 0
    DELIVERED = 1
    DROPPED_FULL = 2
    DROPPED_TTL = 3


class ConservationError(AssertionError):
    pass


class DeviceQueue:
    """FIFO buffer of at most ``capacity`` packets, indexed by destination too."""

    __slots__ = ("capacity", "packets", "by_dest")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.packets: deque[Packet] = deque()
        self.by_dest: dict[int, deque[Packet]] = {}

    def __len__(self):
        return len(self.packets)

    @property
    def full(self) -> bool:
        return len(self.packets) >= self.capacity

    def push(self, p: Packet) -> None:
        self.packets.append(p)
        q = self.by_dest.get(p.dst)
        if q is None:
            q = self.by_dest[p.dst] = deque()
        q.append(p)

    def remove(self, p: Packet) -> None:
        if self.packets[0] is p:
            self.packets.popleft()
        else:
            self.packets.remove(p)
        q = self.by_dest[p.dst]
        if q[0] is p:
            q.popleft()
        else:
            q.remove(p)
        if not q:
            del self.by_dest[p.dst]

    def head(self) -> Packet:
        return self.packets[0]

    def position(self, p: Packet) -> int:
        return self.packets.index(p)

    def per_dest_count(self) -> dict[int, int]:
        return {d: len(q) for d, q in self.by_dest.items()}


@dataclass
class MetricsRecord:
    round: int
    pct_delivered: float
    delay_per_packet: float
    avg_queue_len: float
    alg_connectivity: float
    generated: int
    delivered: int
    dropped_full: int
    dropped_ttl: int
    in_queue: int

    @property
    def dropped(self) -> int:
        return self.dropped_full + self.dropped_ttl


CSV_COLUMNS = ["round", "pct_delivered", "delay_per_packet", "avg_queue_len", "alg_connectivity",
               "generated", "delivered", "dropped_full", "dropped_ttl"]


class Policy:
    """Routing policy interface.

    ``decide`` returns ``(packet, next_hop)`` to transmit, ``(packet, v)`` to
    keep the packet at ``v`` (a stay decision), or None to leave the slot idle.
    Either of the last two forfeits ``v``'s transmission for the timestep.
    """

    name = "policy"
    # set when the policy wants ``observe`` called after each forward
    wants_outcomes = False
    # set when a stay re-enters v's queue at the tail as a fresh arrival
    # instead of keeping the head (so one packet cannot block the queue)
    stay_requeues = False

    def decide(self, sim: "Simulation", v: int):
        raise NotImplementedError

    def observe(self, sim: "Simulation", packet: Packet, v: int, u: int, outcome: Outcome) -> None:
        pass


class Simulation:
    def __init__(self, topo: Topology, links: LinkState, traffic: TrafficSource, capacity: int,
                 ttl: int, mac_rng: np.random.Generator, links_rng: np.random.Generator,
                 policy: Policy | None = None, round_length: int = 1000):
        self.topo = topo
        self.links = links
        self.traffic = traffic
        self.capacity = capacity
        self.ttl = ttl
        self.mac_rng = mac_rng
        self.links_rng = links_rng
        self.policy = policy
        self.round_length = round_length
        n = topo.n_devices
        self.n = n
        self.t = 0
        self.queues = [DeviceQueue(capacity) for _ in range(n)]
        self.qlen = np.zeros(n, dtype=np.int64)
        self.counts = np.zeros((n, n), dtype=np.int64)  # counts[v, d] = packets for d queued at v
        self.generated = 0
        self.delivered = 0
        self.delay_sum = 0
        self.dropped_full = 0
        self.dropped_ttl = 0
        self.dist = DistanceTable(topo)
        self.records: list[MetricsRecord] = []
        self._link_version = None
        self._refresh_links()

    # -- link bookkeeping -------------------------------------------------
    def _refresh_links(self) -> None:
        if self._link_version == self.links.version:
            return
        self._link_version = self.links.version
        self.nbrs = neighbor_lists(self.topo, self.links.up)
        self.nbr_arrays = [np.asarray(x, dtype=np.int64) for x in self.nbrs]
        self.degree = np.array([len(x) for x in self.nbrs], dtype=np.int64)
        self.dist.observe_and_relax(self.links.up)

    # -- queue semantics --------------------------------------------------
    def enqueue(self, p: Packet, v: int) -> Outcome:
        """Hand packet ``p`` to device ``v`` at the current timestep."""
        t = self.t
        if v == p.dst:
            self.delivered += 1
            self.delay_sum += t - p.created_at
            return Outcome.DELIVERED
        q = self.queues[v]
        if len(q.packets) >= q.capacity:
            self.dropped_full += 1
            return Outcome.DROPPED_FULL
        if p.ttl <= 0:
            self.dropped_ttl += 1
            return Outcome.DROPPED_TTL
        p.arrived_at = t
        p.eligible_at = t + 1
        q.push(p)
        self.qlen[v] += 1
        self.counts[v, p.dst] += 1
        return Outcome.QUEUED

    def inject(self, p: Packet) -> Outcome:
        self.generated += 1
        return self.enqueue(p, p.src)

    def transmit(self, p: Packet, v: int, u: int) -> Outcome:
        self.queues[v].remove(p)
        self.qlen[v] -= 1
        self.counts[v, p.dst] -= 1
        p.ttl -= 1
        return self.enqueue(p, u)

    def requeue(self, p: Packet, v: int) -> None:
        """Move ``p`` to the tail of ``v``'s queue as if it had just arrived."""
        q = self.queues[v]
        q.remove(p)
        q.push(p)
        p.arrived_at = self.t
        p.eligible_at = self.t + 1

    # -- time -------------------------------------------------------------
    def step(self) -> None:
        t = self.t
        if t > 0:
            step_links(self.links, self.links_rng)
            self._refresh_links()
        for p in self.traffic.step(t, self.ttl):
            self.inject(p)
        policy = self.policy
        observe = policy.wants_outcomes
        qlen = self.qlen
        for v in self.mac_rng.permutation(self.n).tolist():
            if qlen[v] == 0:
                continue
            choice = policy.decide(self, v)
            if choice is None:
                continue
            p, u = choice
            if u == v:
                if policy.stay_requeues:
                    self.requeue(p, v)
                continue
            outcome = self.transmit(p, v, u)
            if observe:
                policy.observe(self, p, v, u, outcome)
        self.t = t + 1

    def in_queue(self) -> int:
        return int(self.qlen.sum())

    def check_conservation(self) -> None:
        inq = self.in_queue()
        if self.generated != self.delivered + self.dropped_full + self.dropped_ttl + inq:
            raise ConservationError(
                f"t={self.t}: generated={self.generated} delivered={self.delivered} "
                f"dropped={self.dropped_full}+{self.dropped_ttl} in_queue={inq}")
        if inq != sum(len(q) for q in self.queues):
            raise ConservationError("queue length cache out of sync")

    def snapshot(self) -> MetricsRecord:
        self.check_conservation()
        g, d = self.generated, self.delivered
        return MetricsRecord(
            round=len(self.records),
            pct_delivered=d / g if g else 1.0,
            delay_per_packet=self.delay_sum / d if d else math.nan,
            avg_queue_len=float(self.qlen.mean()),
            alg_connectivity=algebraic_connectivity_of(self.topo.adjacency(self.links.up)),
            generated=g,
            delivered=d,
            dropped_full=self.dropped_full,
            dropped_ttl=self.dropped_ttl,
            in_queue=self.in_queue(),
        )

    def run_round(self) -> MetricsRecord:
        for _ in range(self.round_length):
            self.step()
        rec = self.snapshot()
        self.records.append(rec)
        return rec

    def run(self, T: int, T_round: int | None = None) -> list[MetricsRecord]:
        if T_round is not None:
            self.round_length = T_round
        if T % self.round_length:
            raise ValueError(f"T={T} is not a multiple of the round length {self.round_length}")
        return [self.run_round() for _ in range(T // self.round_length)]


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_metrics_csv(path, records, provenance: dict | None = None) -> Path:
    """Write per-round metrics. ``provenance`` goes in leading ``#`` comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        for k, v in (provenance or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            row = asdict(r)
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    tmp.replace(path)
    return path


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    types = {f.name: f.type for f in fields(MetricsRecord)}
    out = []
    for row in rows:
        out.append({k: (int(v) if types[k] in (int, "int") else float(v)) for k, v in row.items()})
    return out


def metrics_filename(scenario: str, policy: str, n: int, seed: int) -> str:
    return f"{scenario}_{policy}_{n}_{seed}.csv"
