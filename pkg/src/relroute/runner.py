"""Train, test and sweep orchestration shared by the CLI and the scripts in demos/."""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .baselines import BackpressurePolicy, ShortestPathPolicy
from .config import ScenarioConfig, build_simulation
from .drl import DrlPolicy, ExperienceStore, RewardSpec, RoundTrace, train_round, write_training_trace
from .features import N_FEATURES
from .nn import Mlp, default_sizes, load_with_metadata
from .simcore import MetricsRecord, metrics_filename, write_metrics_csv

log = logging.getLogger(__name__)

POLICIES = ("sp", "bp", "drl")


class ModelRequired(ValueError):
    pass


def reward_spec(cfg: ScenarioConfig) -> RewardSpec:
    return RewardSpec(cfg.rl.gamma, cfg.rl.r_transition, cfg.rl.r_delivery)


@dataclass
class TrainResult:
    mlp: Mlp
    records: list[MetricsRecord]
    traces: list[RoundTrace]
    store: ExperienceStore = field(repr=False)


def train(cfg: ScenarioConfig, seed: int | None = None, t_train: int | None = None,
          on_round=None) -> TrainResult:
    """Alternate epsilon-greedy data collection rounds with a fitted Q-iteration round.

    Round 0 is collected with a freshly initialized network; the network fitted
    after round r drives collection in round r + 1.
    """
    seed = cfg.seed if seed is None else seed
    t_train = cfg.t_train if t_train is None else t_train
    if t_train % cfg.t_round:
        raise ValueError(f"T_train={t_train} is not a multiple of T_round={cfg.t_round}")
    ss = np.random.SeedSequence([seed, 1])
    init_ss, fit_ss = ss.spawn(2)
    fit_rng = np.random.default_rng(fit_ss)
    store = ExperienceStore()
    mlp = Mlp(default_sizes(N_FEATURES), rng=np.random.default_rng(init_ss))
    policy = DrlPolicy(mlp, epsilon=cfg.rl.epsilon_train, store=store)
    sim = build_simulation(cfg, policy, seed=seed, policy_name="drl")
    policy.rng = sim.policy_rng
    spec = reward_spec(cfg)
    records, traces = [], []
    for r in range(t_train // cfg.t_round):
        rec = sim.run_round()
        records.append(rec)
        mlp, trace = train_round(store, cfg.rl.k_iterations, cfg.rl.epochs, cfg.rl.batch_size, spec,
                                 rng=fit_rng, learning_rate=cfg.rl.learning_rate,
                                 optimizer=cfg.rl.optimizer, pessimistic_init=cfg.rl.pessimistic_init)
        traces.append(trace)
        policy.mlp = mlp
        log.info("round %d: delivered %.3f delay %.2f rows %d pairs %d loss %.4g", r,
                 rec.pct_delivered, rec.delay_per_packet, trace.rows_total, trace.pairs_trained,
                 trace.mean_loss)
        if on_round is not None:
            on_round(r, rec, trace)
    return TrainResult(mlp, records, traces, store)


def make_policy(name: str, cfg: ScenarioConfig, mlp: Mlp | None = None):
    if name == "sp":
        return ShortestPathPolicy()
    if name == "bp":
        return BackpressurePolicy()
    if name == "drl":
        if mlp is None:
            raise ModelRequired("the drl policy needs a trained model (--model)")
        return DrlPolicy(mlp, epsilon=cfg.rl.epsilon_test)
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICIES)}")


def test(cfg: ScenarioConfig, policy: str, mlp: Mlp | None = None, seed: int | None = None,
         t_test: int | None = None) -> list[MetricsRecord]:
    """Run ``t_test`` steps of one policy and return one record per round."""
    seed = cfg.seed if seed is None else seed
    t_test = cfg.t_test if t_test is None else t_test
    pol = make_policy(policy, cfg, mlp)
    sim = build_simulation(cfg, pol, seed=seed, policy_name=policy)
    if isinstance(pol, DrlPolicy):
        pol.rng = sim.policy_rng
    return sim.run(t_test, cfg.t_round)


def provenance(cfg: ScenarioConfig, seed: int, policy: str, **extra) -> dict:
    return {"scenario": cfg.name, "policy": policy, "n": cfg.n, "seed": seed, **extra}


def train_to_dir(cfg: ScenarioConfig, out_dir, seed: int | None = None, t_train: int | None = None):
    seed = cfg.seed if seed is None else seed
    out_dir = Path(out_dir)
    res = train(cfg, seed=seed, t_train=t_train)
    prov = provenance(cfg, seed, "drl", mode="train")
    stem = f"{cfg.name}_drl_{cfg.n}_{seed}"
    model_path = res.mlp.save(out_dir / f"{stem}.model", metadata=prov)
    write_metrics_csv(out_dir / f"{stem}_train.csv", res.records, prov)
    write_training_trace(out_dir / f"{stem}_trace.csv", list(enumerate(res.traces)), prov)
    return model_path, res


def load_model(path) -> Mlp:
    mlp, _ = load_with_metadata(path)
    if mlp.n_inputs != N_FEATURES:
        from .nn import ModelFormatError
        raise ModelFormatError(f"{path}: model expects {mlp.n_inputs} inputs, features have {N_FEATURES}")
    return mlp


def test_to_dir(cfg: ScenarioConfig, policy: str, out_dir, model_path=None, seed: int | None = None,
                t_test: int | None = None) -> Path:
    seed = cfg.seed if seed is None else seed
    mlp = load_model(model_path) if model_path else None
    if policy == "drl" and mlp is None:
        raise ModelRequired("the drl policy needs a trained model (--model)")
    records = test(cfg, policy, mlp, seed=seed, t_test=t_test)
    prov = provenance(cfg, seed, policy, mode="test", model=model_path or "")
    return write_metrics_csv(Path(out_dir) / metrics_filename(cfg.name, policy, cfg.n, seed), records, prov)


# -- sweeps ---------------------------------------------------------------

SWEEP_METRICS = ("pct_delivered", "delay_per_packet", "avg_queue_len", "alg_connectivity")


def mean_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Sample mean and Student-t half-width; half-width is NaN for fewer than two values."""
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        return math.nan, math.nan
    m = float(x.mean())
    if x.size < 2:
        return m, math.nan
    sd = float(x.std(ddof=1))
    return m, float(stats.t.ppf(0.5 + level / 2, x.size - 1) * sd / math.sqrt(x.size))


def _sweep_cell(args):
    cfg, policy, seed, t_test, model_path = args
    try:
        mlp = load_model(model_path) if model_path else None
        rec = test(cfg, policy, mlp, seed=seed, t_test=t_test)[-1]
        return cfg.n, policy, seed, rec, None
    except Exception as exc:  # a failed cell must not sink the grid
        return cfg.n, policy, seed, None, f"{type(exc).__name__}: {exc}"


def sweep(cfg: ScenarioConfig, ns, seeds, policies, t_test: int | None = None, model_path=None,
          workers: int = 1) -> list[dict]:
    """Final-round metrics over an (N, policy, seed) grid, aggregated per (N, policy)."""
    seeds = list(seeds)
    if len(seeds) < 2:
        warnings.warn("fewer than 2 seeds: confidence intervals are undefined", stacklevel=2)
    cells = [(cfg.replace(n=n), pol, s, t_test, model_path if pol == "drl" else None)
             for n in ns for pol in policies for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    rows = []
    for n in ns:
        for pol in policies:
            cell = [r for r in results if r[0] == n and r[1] == pol]
            ok = [r[3] for r in cell if r[3] is not None]
            errors = [f"seed {r[2]}: {r[4]}" for r in cell if r[4] is not None]
            row = {"n": n, "policy": pol, "runs": len(ok), "failures": len(errors)}
            for m in SWEEP_METRICS:
                mean, ci = mean_ci([getattr(r, m) for r in ok])
                row[f"{m}_mean"], row[f"{m}_ci95"] = mean, ci
            row["errors"] = "; ".join(errors)
            rows.append(row)
    return rows


def write_sweep_csv(path, rows: list[dict], provenance_: dict | None = None) -> Path:
    import csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["n", "policy", "runs", "failures"] + [f"{m}_{s}" for m in SWEEP_METRICS for s in ("mean", "ci95")] \
        + ["errors"]
    with open(path, "w", newline="") as fh:
        for k, v in (provenance_ or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow(["nan" if isinstance(r[c], float) and math.isnan(r[c]) else
                        (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in cols])
    return path
