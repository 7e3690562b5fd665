"""Shortest path vs backpressure on the static lattice, low and high traffic.

Low traffic leaves queues nearly empty, so shortest path delivers everything
while backpressure has no congestion gradient to follow and loses ground as the
lattice grows. High traffic is where backpressure catches up on delivery, at the
price of a much longer delay.

    python3 demos/baselines.py --ns 9,16,25 --seeds 3 --timesteps 10000
"""
import argparse

from relroute.config import get_preset
from relroute.runner import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ns", default="9,16")
    ap.add_argument("--seeds", type=int, default=2)
    ap.add_argument("--timesteps", type=int, default=4000)
    args = ap.parse_args()
    ns = [int(x) for x in args.ns.split(",")]

    print(f"{'scenario':<22}{'N':>4}  {'policy':<6}{'delivered':>10}{'+-':>8}{'delay':>9}{'queue':>8}")
    for name in ("static-lattice-low", "static-lattice-high"):
        rows = sweep(get_preset(name), ns, range(1, args.seeds + 1), ["sp", "bp"], t_test=args.timesteps)
        for r in rows:
            print(f"{name:<22}{r['n']:>4}  {r['policy']:<6}{r['pct_delivered_mean']:>10.4f}"
                  f"{r['pct_delivered_ci95']:>8.4f}{r['delay_per_packet_mean']:>9.2f}{r['avg_queue_len_mean']:>8.2f}")


if __name__ == "__main__":
    main()
