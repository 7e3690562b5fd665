import numpy as np
import pytest

from relroute.simcore import Policy, Simulation
from relroute.topology import Topology, init_links, make_lattice
from relroute.traffic import Packet


class ScriptedTraffic:
    """Injects hand-written packets: ``script[t]`` is a list of (src, dst)."""

    def __init__(self, script):
        self.script = script
        self.next_id = 0

    def step(self, t, ttl_init):
        out = []
        for src, dst in self.script.get(t, []):
            out.append(Packet(self.next_id, src, dst, ttl_init, t))
            self.next_id += 1
        return out


def path_topology(n):
    edges = np.array([(i, i + 1) for i in range(n - 1)], dtype=np.int64)
    pos = np.column_stack([np.linspace(0, 1, n), np.zeros(n)])
    return Topology(n, "path", edges, pos, None)


def make_sim(topo, policy, script=None, capacity=50, ttl=200, alpha=1.0, beta=0.0, seed=0):
    rng = np.random.default_rng(seed)
    links = init_links(topo, alpha, beta, rng)
    return Simulation(topo, links, ScriptedTraffic(script or {}), capacity, ttl,
                      mac_rng=np.random.default_rng(seed + 1), links_rng=rng, policy=policy)


class Idle(Policy):
    name = "idle"

    def decide(self, sim, v):
        return None


@pytest.fixture
def lattice3():
    return make_lattice(3)


# one "CRITERION k: PASS/FAIL ..." line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def report_criterion(k, ok, detail):
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
