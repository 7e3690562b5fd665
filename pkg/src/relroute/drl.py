"""Packet-centric fitted Q-iteration with extended-time actions.

Every packet is its own agent. When a packet reaches the head of a queue it
makes a decision: move to an up neighbor or stay. The time it then spends
waiting at the next device is one option with a constant per-step reward, so
the value of the hop w -> v is backed up from the decision the packet makes
at v (or from the terminal reward if it was delivered or dropped on arrival).

Decisions are stored column-wise: one record per decision plus one record per
candidate action. A decision together with its candidate rows is exactly the
set of per-action rows of one (packet, device, t_j) group.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import features as F
from .nn import Mlp, default_sizes
from .simcore import Outcome, Policy, Simulation


class RewardClass(enum.IntEnum):
    PENDING = 0
    TRANSITION = 1
    DELIVERY = 2
    DROP = 3


@dataclass(frozen=True)
class RewardSpec:
    gamma: float = 0.99
    r_transition: float = -1.0
    r_delivery: float = 0.0

    @property
    def r_drop(self) -> float:
        # r_transition received forever
        return option_return(math.inf, self.r_transition, self.gamma)

    def reward(self, cls: RewardClass) -> float:
        return {RewardClass.TRANSITION: self.r_transition,
                RewardClass.DELIVERY: self.r_delivery,
                RewardClass.DROP: self.r_drop}[RewardClass(cls)]


def option_return(delta, r_c: float, gamma: float):
    """Discounted sum of a constant reward ``r_c`` held for ``delta`` steps.

    Works elementwise on arrays; ``delta = inf`` gives ``r_c / (1 - gamma)``.
    """
    if gamma == 1.0:
        return r_c * delta
    return r_c * (1.0 - np.power(gamma, delta)) / (1.0 - gamma)


_OUTCOME_CLASS = {
    Outcome.QUEUED: RewardClass.TRANSITION,
    Outcome.DELIVERED: RewardClass.DELIVERY,
    Outcome.DROPPED_FULL: RewardClass.DROP,
    Outcome.DROPPED_TTL: RewardClass.DROP,
}


class ExperienceStore:
    """Append-only decision log.

    Per decision: packet id, device id, option start ``t_i``, decision time
    ``t_j``, normalized state vector, the slice of candidate rows, the index
    of the chosen candidate, and the reward class of the option that the
    chosen action starts (PENDING until observed).
    """

    def __init__(self):
        self._pid: list[int] = []
        self._dev: list[int] = []
        self._ti: list[int] = []
        self._tj: list[int] = []
        self._state: list[np.ndarray] = []
        self._start: list[int] = []
        self._count: list[int] = []
        self._chosen: list[int] = []
        self.outcome = bytearray()
        self._action: list[np.ndarray] = []
        self._cand_dev: list[np.ndarray] = []
        self.n_rows = 0
        self._frozen = None

    def __len__(self) -> int:
        return len(self._pid)

    def record(self, packet_id: int, device_id: int, t_i: int, t_j: int, state: np.ndarray,
               actions: np.ndarray, cand_devices, chosen: int) -> int:
        """Log one decision with all its candidate actions; returns the decision index."""
        k = len(actions)
        if not 0 <= chosen < k:
            raise IndexError(f"chosen candidate {chosen} out of range for {k} candidates")
        idx = len(self._pid)
        self._pid.append(packet_id)
        self._dev.append(device_id)
        self._ti.append(t_i)
        self._tj.append(t_j)
        self._state.append(np.asarray(state, dtype=float))
        self._start.append(self.n_rows)
        self._count.append(k)
        self._chosen.append(self.n_rows + chosen)
        self.outcome.append(RewardClass.PENDING)
        self._action.append(np.asarray(actions, dtype=float))
        self._cand_dev.append(np.asarray(cand_devices, dtype=np.int64))
        self.n_rows += k
        self._frozen = None
        return idx

    def finalize(self, decision: int, cls: RewardClass) -> None:
        self.outcome[decision] = cls
        self._frozen = None

    def arrays(self) -> dict:
        """Column arrays (cached until the next append)."""
        if self._frozen is None:
            n = len(self._pid)
            self._frozen = dict(
                packet_id=np.asarray(self._pid, dtype=np.int64),
                device_id=np.asarray(self._dev, dtype=np.int64),
                t_i=np.asarray(self._ti, dtype=np.int64),
                t_j=np.asarray(self._tj, dtype=np.int64),
                state=np.vstack(self._state) if n else np.empty((0, F.N_STATE)),
                start=np.asarray(self._start, dtype=np.int64),
                count=np.asarray(self._count, dtype=np.int64),
                chosen=np.asarray(self._chosen, dtype=np.int64),
                outcome=np.frombuffer(bytes(self.outcome), dtype=np.uint8).astype(np.int64),
                action=np.vstack(self._action) if n else np.empty((0, F.N_ACTION)),
                cand_device=np.concatenate(self._cand_dev) if n else np.empty(0, dtype=np.int64),
            )
        return self._frozen

    def row_inputs(self) -> np.ndarray:
        """Network input for every candidate row: (n_rows, 22)."""
        a = self.arrays()
        state_rows = np.repeat(a["state"], a["count"], axis=0)
        return np.hstack([state_rows, a["action"]])

    def export_csv(self, path) -> Path:
        """Dump one line per (decision, candidate) with the per-row columns of the data table."""
        a = self.arrays()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["packet_id", "device_id", "t_i", "t_j", *F.STATE_NAMES, *F.ACTION_NAMES,
                        "reward_class", "chosen", "action_device_id"])
            for d in range(len(self)):
                s = [repr(float(x)) for x in a["state"][d]]
                cls = RewardClass(a["outcome"][d]).name.lower()
                for r in range(a["start"][d], a["start"][d] + a["count"][d]):
                    w.writerow([a["packet_id"][d], a["device_id"][d], a["t_i"][d], a["t_j"][d], *s,
                                *(repr(float(x)) for x in a["action"][r]),
                                cls, int(r == a["chosen"][d]), a["cand_device"][r]])
        return path


@dataclass
class Targets:
    """``group[d]``: backup value of decision d's group, i.e. the target for the
    option that ended when the packet made decision d. ``terminal[d]``: target
    for d's own chosen action when that action ended the episode (NaN otherwise).
    ``max_q[d]``: max over d's candidate rows."""

    group: np.ndarray
    terminal: np.ndarray
    max_q: np.ndarray


def compute_targets(store: ExperienceStore, mlp: Mlp, spec: RewardSpec) -> Targets:
    a = store.arrays()
    n = len(store)
    if n == 0:
        empty = np.empty(0)
        return Targets(empty, empty, empty)
    q = mlp.predict(store.row_inputs())
    max_q = np.maximum.reduceat(q, a["start"])
    delta = a["t_j"] - a["t_i"]
    group = option_return(delta, spec.r_transition, spec.gamma) + np.power(spec.gamma, delta) * max_q
    terminal = np.full(n, np.nan)
    out = a["outcome"]
    for cls in (RewardClass.DELIVERY, RewardClass.DROP):
        # terminal options last one step and bootstrap from nothing
        terminal[out == cls] = option_return(1, spec.reward(cls), spec.gamma)
    return Targets(group, terminal, max_q)


def chain_join(store: ExperienceStore, targets: Targets) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Match each chosen action to the decision it led to and attach that target.

    A chosen action at w departing at t_j joins the packet's next decision
    whose option started at that same t_j. Returns ``(X, y, decision_index)``
    where X holds the predecessor's state and chosen-action features.
    Actions still waiting for their next decision are left out.
    """
    a = store.arrays()
    n = len(store)
    if n == 0:
        return np.empty((0, F.N_FEATURES)), np.empty(0), np.empty(0, dtype=np.int64)
    pid, ti, tj, out = a["packet_id"], a["t_i"], a["t_j"], a["outcome"]
    span = int(max(ti.max(), tj.max())) + 2
    succ_key = pid * span + ti
    order = np.argsort(succ_key, kind="stable")
    sorted_keys = succ_key[order]

    trans = np.flatnonzero(out == RewardClass.TRANSITION)
    pred_key = pid[trans] * span + tj[trans]
    pos = np.searchsorted(sorted_keys, pred_key)
    pos_c = np.minimum(pos, n - 1)
    found = (pos < n) & (sorted_keys[pos_c] == pred_key)
    trans_pred = trans[found]
    trans_y = targets.group[order[pos_c[found]]]

    term_pred = np.flatnonzero(np.isin(out, (RewardClass.DELIVERY, RewardClass.DROP)))
    term_y = targets.terminal[term_pred]

    pred = np.concatenate([trans_pred, term_pred])
    y = np.concatenate([trans_y, term_y])
    keep = np.argsort(pred, kind="stable")
    pred, y = pred[keep], y[keep]
    X = np.hstack([a["state"][pred], a["action"][a["chosen"][pred]]])
    return X, y, pred


@dataclass
class RoundTrace:
    rows_total: int
    pairs_trained: int
    mean_loss: float
    mean_target: float


def train_round(store: ExperienceStore, k_iterations: int = 10, epochs: int = 10, batch_size: int = 32,
                spec: RewardSpec | None = None, rng=None, learning_rate: float = 1e-3,
                optimizer: str = "adam", sizes=None, pessimistic_init: bool = False) -> tuple[Mlp, RoundTrace]:
    """One round of fitted Q-iteration on everything collected so far, from a fresh network.

    With ``pessimistic_init`` the fresh network's output bias starts at the drop
    reward instead of zero, so unexplored continuations are first valued as
    drops and later sweeps raise them from below. Off by default.
    """
    if len(store) == 0:
        raise ValueError("experience store is empty")
    spec = spec or RewardSpec()
    rng = np.random.default_rng(rng)
    mlp = Mlp(sizes or default_sizes(F.N_FEATURES), rng=rng, learning_rate=learning_rate,
              optimizer=optimizer)
    if pessimistic_init:
        mlp.biases[-1][:] = spec.r_drop
    loss, y = math.nan, np.empty(0)
    for _ in range(k_iterations):
        targets = compute_targets(store, mlp, spec)
        X, y, _ = chain_join(store, targets)
        if len(y) == 0:
            break
        loss = mlp.fit(X, y, epochs=epochs, batch_size=batch_size, rng=rng)[-1]
    return mlp, RoundTrace(store.n_rows, int(len(y)), float(loss),
                           float(y.mean()) if len(y) else math.nan)


def select_action(mlp: Mlp, inputs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy index into the candidate rows of ``inputs``; ties go to the lowest index."""
    k = inputs.shape[0]
    if k == 1:
        return 0
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(k))
    return int(np.argmax(mlp.forward(inputs)))


class DrlPolicy(Policy):
    """Routes the head-of-queue packet with a frozen value network.

    With a ``store`` attached it also logs every decision for training.
    """

    name = "drl"
    stay_requeues = True

    def __init__(self, mlp: Mlp, epsilon: float = 0.0, store: ExperienceStore | None = None,
                 rng: np.random.Generator | None = None):
        self.mlp = mlp
        self.epsilon = epsilon
        self.store = store
        self.rng = rng
        self.wants_outcomes = store is not None

    def decide(self, sim: Simulation, v: int):
        p = sim.queues[v].packets[0]
        t = sim.t
        if p.eligible_at > t:
            return None
        if self.rng is None:
            self.rng = getattr(sim, "policy_rng", None) or np.random.default_rng()
        nbrs = sim.nbrs[v]
        cands = np.asarray(sorted(nbrs + [v]), dtype=np.int64)
        state, actions = F.decision_inputs(sim, p, v, cands, position=0)
        inputs = F.join(state, actions)
        k = select_action(self.mlp, inputs, self.epsilon, self.rng)
        u = int(cands[k])
        if self.store is not None:
            idx = self.store.record(p.id, v, option_start(p), t, state, actions, cands, k)
            p.last_decision = idx
            if u == v:
                # staying ends this option now and opens a new one at v; the
                # simulation moves the packet to the tail like a fresh arrival
                self.store.finalize(idx, RewardClass.TRANSITION)
                p.arrived_at = t
        return p, u

    def observe(self, sim: Simulation, packet, v: int, u: int, outcome: Outcome) -> None:
        if packet.last_decision >= 0:
            self.store.finalize(packet.last_decision, _OUTCOME_CLASS[outcome])


def option_start(p) -> int:
    """Start of the packet's current option: its arrival at this device, or its last stay."""
    return p.arrived_at


def write_training_trace(path, rows: list[tuple[int, RoundTrace]], provenance: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for k, v in (provenance or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "rows_total", "pairs_trained", "mean_loss", "mean_target"])
        for r, tr in rows:
            w.writerow([r, tr.rows_total, tr.pairs_trained, repr(tr.mean_loss), repr(tr.mean_target)])
    return path
