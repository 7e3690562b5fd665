"""Train a relational DRL routing agent, then race it against SP and BP.

Prints the cumulative delivery rate after every training round (the learning
curve), saves the model, and tests all three policies on fresh seeds. The same
network routes any lattice size because its inputs are relational features, so
the agent is also tested on sizes it never saw.

    python3 demos/train_agent.py --scenario static-lattice-high --n 25 --timesteps 10000
"""
import argparse
import time

import numpy as np

from relroute.config import get_preset
from relroute.runner import test, train


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenario", default="static-lattice-low")
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--timesteps", type=int, default=5000, help="training steps")
    ap.add_argument("--test-ns", default="9,16,25")
    ap.add_argument("--test-steps", type=int, default=5000)
    ap.add_argument("--seeds", type=int, default=2)
    ap.add_argument("--save", default=None, help="write the trained model here")
    args = ap.parse_args()

    cfg = get_preset(args.scenario).replace(n=args.n)
    t0 = time.time()

    def show(r, rec, trace):
        print(f"round {r:2d}  delivered {rec.pct_delivered:.3f}  delay {rec.delay_per_packet:7.2f}  "
              f"rows {trace.rows_total:6d}  fit loss {trace.mean_loss:7.3f}  ({time.time() - t0:.0f}s)")

    res = train(cfg, seed=0, t_train=args.timesteps, on_round=show)
    if args.save:
        res.mlp.save(args.save, metadata={"scenario": cfg.name, "n": cfg.n, "seed": 0})
        print(f"model saved to {args.save}")

    print(f"\n{'N':>4}  {'policy':<6}{'delivered':>10}{'delay':>9}")
    for n in (int(x) for x in args.test_ns.split(",")):
        for pol in ("sp", "bp", "drl"):
            finals = [test(cfg.replace(n=n), pol, res.mlp, seed=s, t_test=args.test_steps)[-1]
                      for s in range(1, args.seeds + 1)]
            pct = np.mean([f.pct_delivered for f in finals])
            delay = np.nanmean([f.delay_per_packet for f in finals])
            print(f"{n:>4}  {pol:<6}{pct:>10.4f}{delay:>9.2f}")


if __name__ == "__main__":
    main()
