import numpy as np
import pytest

from tucff import bundled
from tucff.network import validate_network


def one_link(x_max=100.0, sat_flow=0.5, exit_rate=0.0, g_min=10.0, lost_time=10.0, cycle=100.0):
    return {
        "cycle": cycle,
        "links": [{"id": 1, "x_max": x_max, "sat_flow": sat_flow, "exit_rate": exit_rate}],
        "turns": [],
        "junctions": [{"id": 1, "lost_time": lost_time, "stages": [{"id": 1, "g_min": g_min, "links": [1]}]}],
    }


def random_network(rng: np.random.Generator, max_links: int = 6) -> dict:
    """Random valid network: each link gets r.o.w. in one stage, stages split into junctions."""
    Z = int(rng.integers(1, max_links + 1))
    S = int(rng.integers(1, Z + 1))
    J = int(rng.integers(1, S + 1))
    cycle = 100
    stage_of = np.concatenate([np.arange(S), rng.integers(0, S, Z - S)])
    rng.shuffle(stage_of)
    junc_of = np.concatenate([np.arange(J), rng.integers(0, J, S - J)])
    rng.shuffle(junc_of)
    links = [
        {"id": z + 1, "x_max": float(rng.uniform(20, 120)), "sat_flow": float(rng.uniform(0.2, 1.0)),
         "exit_rate": float(rng.uniform(0, 0.3))}
        for z in range(Z)
    ]
    turns = []
    for w in range(Z):
        targets = [z for z in range(Z) if z != w and rng.random() < 0.4]
        if targets:
            rates = rng.dirichlet(np.ones(len(targets) + 1))[:-1]
            turns += [{"from": w + 1, "to": z + 1, "rate": float(r)} for z, r in zip(targets, rates)]
    junctions = []
    for j in range(J):
        stages = [s for s in range(S) if junc_of[s] == j]
        gmin = 60.0 / (len(stages) + 1)
        junctions.append({
            "id": j + 1,
            "lost_time": 10,
            "stages": [{"id": s + 1, "g_min": gmin, "links": [int(z) + 1 for z in np.flatnonzero(stage_of == s)]}
                       for s in stages],
        })
    return {"cycle": cycle, "links": links, "turns": turns, "junctions": junctions}


@pytest.fixture
def chain2():
    return validate_network(bundled.chain2())


@pytest.fixture(scope="session")
def grid4():
    return validate_network(bundled.grid4())
