"""Command line: train, test, sweep, show-preset.

Exit codes: 0 success, 1 usage error, 2 training divergence or a bad model file.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PRESETS, UnknownScenario, dump_config, resolve_scenario
from .nn import DivergenceError, ModelFormatError
from . import runner

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help=f"preset name ({', '.join(PRESETS)}) or config file")
    p.add_argument("--n", type=int, help="number of devices (lattices need a perfect square)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timesteps", type=int, help="override T_train (train) or T_test (test, sweep)")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="relroute", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a DRL agent and write the model plus per-round CSVs")
    _common(p)

    p = sub.add_parser("test", help="run one policy and write its per-round metrics CSV")
    _common(p)
    p.add_argument("--policy", choices=runner.POLICIES, required=True)
    p.add_argument("--model", help="trained model file (required for --policy drl)")

    p = sub.add_parser("sweep", help="final-round metrics over N x seeds x policies with 95%% CIs")
    _common(p)
    p.add_argument("--ns", default=None, help="comma-separated device counts (default: --n)")
    p.add_argument("--seeds", type=int, default=2, help="number of seeds, starting at --seed")
    p.add_argument("--policy", action="append", choices=runner.POLICIES,
                   help="repeatable; default sp and bp, plus drl when --model is given")
    p.add_argument("--model")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("show-preset", help="print a scenario as a key=value config file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--n", type=int)
    return ap


def _scenario(args):
    cfg = resolve_scenario(args.scenario)
    if getattr(args, "n", None):
        cfg = cfg.replace(n=args.n)
    if getattr(args, "seed", None) is not None and hasattr(args, "timesteps"):
        cfg = cfg.replace(seed=args.seed)
    return cfg


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _scenario(args)
        if args.command == "show-preset":
            sys.stdout.write(dump_config(cfg))
        elif args.command == "train":
            path, res = runner.train_to_dir(cfg, args.out, seed=args.seed, t_train=args.timesteps)
            print(f"model: {path}  final pct_delivered={res.records[-1].pct_delivered:.4f}")
        elif args.command == "test":
            path = runner.test_to_dir(cfg, args.policy, args.out, model_path=args.model, seed=args.seed,
                                      t_test=args.timesteps)
            print(f"metrics: {path}")
        elif args.command == "sweep":
            ns = [int(x) for x in args.ns.split(",")] if args.ns else [cfg.n]
            policies = args.policy or (["sp", "bp"] + (["drl"] if args.model else []))
            seeds = range(args.seed, args.seed + args.seeds)
            rows = runner.sweep(cfg, ns, seeds, policies, t_test=args.timesteps, model_path=args.model,
                                workers=args.workers)
            path = runner.write_sweep_csv(Path(args.out) / f"sweep_{cfg.name}.csv", rows,
                                          {"scenario": cfg.name, "seeds": f"{args.seed}..{args.seed + args.seeds - 1}",
                                           "model": args.model or ""})
            for r in rows:
                if r["failures"]:
                    print(f"warning: N={r['n']} {r['policy']}: {r['errors']}", file=sys.stderr)
            print(f"sweep: {path}")
    except UnknownScenario as exc:
        print(f"relroute: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except runner.ModelRequired as exc:
        print(f"relroute: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, ModelFormatError, FileNotFoundError) as exc:
        print(f"relroute: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"relroute: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
