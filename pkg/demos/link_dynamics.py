"""How link dynamics shape connectivity.

For each link model (static, dynamic, delay tolerant) this runs the two-state
Markov chain on a lattice and a random geometric graph and reports the empirical
fraction of links up against the steady-state value, plus the algebraic
connectivity of the live topology averaged over time. Delay tolerant networks
spend most of their time disconnected (connectivity 0).
"""
import argparse

import numpy as np

from relroute.topology import (
    algebraic_connectivity,
    init_links,
    make_lattice,
    make_random_geometric,
    step_links,
)

LINK_MODELS = {"static": (1.0, 0.0), "dynamic": (0.8, 0.2), "delay tolerant": (0.5, 0.4)}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=25)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    topos = {"lattice": make_lattice(int(round(args.n ** 0.5))),
             "random r=0.3": make_random_geometric(args.n, 0.3, rng),
             "random r=0.5": make_random_geometric(args.n, 0.5, rng)}

    print(f"{'topology':<14}{'links':<16}{'pi':>6}{'up frac':>9}{'conn':>8}{'disconnected':>14}")
    for tname, topo in topos.items():
        for lname, (alpha, beta) in LINK_MODELS.items():
            state = init_links(topo, alpha, beta, rng)
            up, conn = 0, []
            for _ in range(args.steps):
                step_links(state, rng)
                up += int(state.up.sum())
                conn.append(algebraic_connectivity(topo, state))
            conn = np.array(conn)
            print(f"{tname:<14}{lname:<16}{state.pi:>6.3f}{up / (args.steps * topo.n_edges):>9.3f}"
                  f"{conn.mean():>8.3f}{(conn == 0).mean():>14.1%}")


if __name__ == "__main__":
    main()
