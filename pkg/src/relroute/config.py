"""Scenario configuration, named presets, and simulation assembly."""
from __future__ import annotations

import ast
import configparser
import dataclasses
import operator
from dataclasses import dataclass, field

import numpy as np

from .topology import init_links, lattice_side, make_lattice, make_random_geometric
from .traffic import TrafficConfig, TrafficSource

LOW_TRAFFIC = dict(lambda_f="0.002*N/25", lambda_d=5000.0, lambda_p=0.05)
HIGH_TRAFFIC = dict(lambda_f="0.002*N/25", lambda_d=5000.0, lambda_p=0.2)


@dataclass(frozen=True)
class RLConfig:
    gamma: float = 0.99
    epsilon_train: float = 0.1
    epsilon_test: float = 0.0
    r_transition: float = -1.0
    r_delivery: float = 0.0
    k_iterations: int = 10
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    pessimistic_init: bool = False

    @property
    def r_drop(self) -> float:
        return self.r_transition / (1.0 - self.gamma)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    topology: str  # "lattice" | "random_geometric"
    n: int = 64
    radius: float | None = None
    alpha: float = 1.0
    beta: float = 0.0
    lambda_f: str = "0.002*N/25"
    lambda_d: float = 5000.0
    lambda_p: float = 0.05
    queue_size: int = 50
    bp_queue_per_device: int = 50  # BP runs with queue_size = this * N
    ttl: int = 200
    t_train: int = 30000
    t_test: int = 100000
    t_round: int = 1000
    rl: RLConfig = field(default_factory=RLConfig)
    seed: int = 0

    def lambda_f_value(self) -> float:
        return eval_rate(self.lambda_f, self.n)

    def traffic(self) -> TrafficConfig:
        return TrafficConfig(self.lambda_f_value(), self.lambda_d, self.lambda_p)

    def capacity_for(self, policy: str) -> int:
        return self.bp_queue_per_device * self.n if policy == "bp" else self.queue_size

    def replace(self, **kw) -> "ScenarioConfig":
        rl_kw = {k: kw.pop(k) for k in list(kw) if k in RLConfig.__dataclass_fields__}
        cfg = dataclasses.replace(self, **kw)
        if rl_kw:
            cfg = dataclasses.replace(cfg, rl=dataclasses.replace(cfg.rl, **rl_kw))
        return cfg


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def eval_rate(expr: str | float, n: int) -> float:
    """Evaluate an arithmetic rate expression in the device count ``N``."""
    if isinstance(expr, (int, float)):
        return float(expr)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "N":
            return float(n)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        raise ValueError(f"unsupported rate expression: {expr!r}")

    return ev(ast.parse(str(expr), mode="eval"))


PRESETS: dict[str, ScenarioConfig] = {
    "static-lattice-low": ScenarioConfig(
        "static-lattice-low", "lattice", alpha=1.0, beta=0.0, t_train=30000, **LOW_TRAFFIC),
    "static-lattice-high": ScenarioConfig(
        "static-lattice-high", "lattice", alpha=1.0, beta=0.0, t_train=30000, **HIGH_TRAFFIC),
    "dynamic-lattice-high": ScenarioConfig(
        "dynamic-lattice-high", "lattice", alpha=0.8, beta=0.2, t_train=49000, **HIGH_TRAFFIC),
    "delay-tolerant-lattice-high": ScenarioConfig(
        "delay-tolerant-lattice-high", "lattice", alpha=0.5, beta=0.4, t_train=49000, **HIGH_TRAFFIC),
    "static-random-high": ScenarioConfig(
        "static-random-high", "random_geometric", radius=0.5, alpha=1.0, beta=0.0, t_train=30000,
        **HIGH_TRAFFIC),
    "delay-tolerant-random-high": ScenarioConfig(
        "delay-tolerant-random-high", "random_geometric", radius=0.3, alpha=0.5, beta=0.4,
        t_train=30000, **HIGH_TRAFFIC),
}


class UnknownScenario(KeyError):
    def __str__(self):
        return f"unknown scenario {self.args[0]!r}; presets: {', '.join(PRESETS)}"


def get_preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownScenario(name) from None


# -- key=value config files ----------------------------------------------

def dump_config(cfg: ScenarioConfig) -> str:
    cp = configparser.ConfigParser()
    flat = {k: v for k, v in dataclasses.asdict(cfg).items() if k != "rl"}
    cp["scenario"] = {k: ("" if v is None else str(v)) for k, v in flat.items()}
    cp["rl"] = {k: str(v) for k, v in dataclasses.asdict(cfg.rl).items()}
    cp["rl"]["r_drop"] = repr(cfg.rl.r_drop)
    lines = []
    for section in cp.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in cp[section].items())
        lines.append("")
    return "\n".join(lines)


def _coerce(value: str, target_type):
    if target_type in (bool, "bool"):
        if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {value!r}")
        return value.lower() in ("true", "1", "yes")
    if target_type in (int, "int"):
        return int(value)
    if target_type in (float, "float"):
        return float(value)
    if target_type in ("float | None",):
        return None if value == "" else float(value)
    return value


def load_config(path) -> ScenarioConfig:
    """Read a scenario file. Missing keys default to the named base preset or Table I values."""
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    sc = dict(cp["scenario"]) if cp.has_section("scenario") else {}
    base_name = sc.pop("base", None)
    base = get_preset(base_name) if base_name else ScenarioConfig(sc.get("name", "custom"), "lattice")
    types = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}
    kw = {}
    for k, v in sc.items():
        if k not in types or k == "rl":
            raise ValueError(f"unknown scenario key {k!r}")
        kw[k] = _coerce(v, types[k])
    if cp.has_section("rl"):
        rtypes = {f.name: f.type for f in dataclasses.fields(RLConfig)}
        for k, v in cp["rl"].items():
            if k == "r_drop":
                continue
            if k not in rtypes:
                raise ValueError(f"unknown rl key {k!r}")
            kw[k] = _coerce(v, rtypes[k])
    return base.replace(**kw)


def resolve_scenario(name_or_path: str) -> ScenarioConfig:
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    import os
    if os.path.exists(name_or_path):
        return load_config(name_or_path)
    raise UnknownScenario(name_or_path)


# -- assembly -------------------------------------------------------------

def make_topology(cfg: ScenarioConfig, rng: np.random.Generator):
    if cfg.topology == "lattice":
        return make_lattice(lattice_side(cfg.n))
    if cfg.topology == "random_geometric":
        return make_random_geometric(cfg.n, cfg.radius, rng)
    raise ValueError(f"unknown topology kind {cfg.topology!r}")


def build_simulation(cfg: ScenarioConfig, policy, seed: int | None = None, policy_name: str | None = None):
    """Assemble a seeded simulation.

    Topology, links, traffic, MAC order and policy randomness each get their
    own child stream, so the traffic trace for a seed does not depend on the
    routing policy.
    """
    from .simcore import Simulation

    seed = cfg.seed if seed is None else seed
    ss = np.random.SeedSequence(seed)
    topo_ss, link_ss, traffic_ss, mac_ss, policy_ss = ss.spawn(5)
    topo = make_topology(cfg, np.random.default_rng(topo_ss))
    links_rng = np.random.default_rng(link_ss)
    links = init_links(topo, cfg.alpha, cfg.beta, links_rng)
    traffic = TrafficSource(cfg.traffic(), topo.n_devices, np.random.default_rng(traffic_ss))
    name = policy_name or getattr(policy, "name", "")
    sim = Simulation(topo, links, traffic, cfg.capacity_for(name), cfg.ttl,
                     mac_rng=np.random.default_rng(mac_ss), links_rng=links_rng,
                     policy=policy, round_length=cfg.t_round)
    sim.policy_rng = np.random.default_rng(policy_ss)
    return sim
