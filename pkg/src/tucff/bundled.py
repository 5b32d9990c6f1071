"""Small example networks and scenarios shipped with the package."""
from __future__ import annotations

__all__ = ["chain2", "grid4", "pulse_scenario", "steady_scenario", "EXAMPLES"]

# heading unit vectors; y grows southwards
_DIRS = {"E": (1, 0), "W": (-1, 0), "S": (0, 1), "N": (0, -1)}
_LEFT = {"E": "N", "N": "W", "W": "S", "S": "E"}
_RIGHT = {v: k for k, v in _LEFT.items()}


def chain2() -> dict:
    """Two links in series, one single-stage junction at the end of each."""
    return {
        "cycle": 100,
        "links": [
            {"id": 1, "x_max": 100, "sat_flow": 0.5, "exit_rate": 0.2},
            {"id": 2, "x_max": 100, "sat_flow": 0.5, "exit_rate": 0.0},
        ],
        "turns": [{"from": 1, "to": 2, "rate": 1.0}],
        "junctions": [
            {"id": 1, "lost_time": 10, "stages": [{"id": 1, "g_min": 10, "links": [1]}]},
            {"id": 2, "lost_time": 10, "stages": [{"id": 2, "g_min": 10, "links": [2]}]},
        ],
    }


def grid4(
    x_max_internal: float = 40,
    x_max_origin: float = 60,
    sat_flow: float = 0.8,
    exit_rate: float = 0.05,
    straight: float = 0.6,
    turn: float = 0.2,
    g_min: float = 15,
    lost_time: float = 10,
    cycle: float = 100,
) -> dict:
    """2x2 grid: four two-stage junctions, 8 internal and 8 origin links.

    Junction numbering (1 NW, 2 NE, 3 SW, 4 SE).  Every junction has an
    east-west stage and a north-south stage.  Links 1-8 run between
    junctions, links 9-16 enter from outside.  Vehicles go straight with
    rate ``straight`` and turn left or right with rate ``turn``; movements
    that leave the grid are not modelled.
    """
    pos = {1: (0, 0), 2: (1, 0), 3: (0, 1), 4: (1, 1)}
    # (from junction, to junction); internal links 1..8
    internal = [(1, 2), (2, 1), (3, 4), (4, 3), (1, 3), (3, 1), (2, 4), (4, 2)]
    # (junction, heading of the arriving vehicles); origin links 9..16
    origin = [(1, "E"), (1, "S"), (2, "W"), (2, "S"), (3, "E"), (3, "N"), (4, "W"), (4, "N")]

    def heading(a, b):
        (xa, ya), (xb, yb) = pos[a], pos[b]
        return next(h for h, d in _DIRS.items() if d == (xb - xa, yb - ya))

    # each link: (downstream junction, heading on arrival)
    arrivals = {i + 1: (b, heading(a, b)) for i, (a, b) in enumerate(internal)}
    arrivals.update({9 + i: jh for i, jh in enumerate(origin)})
    leaving = {(a, heading(a, b)): i + 1 for i, (a, b) in enumerate(internal)}

    links = []
    for z in sorted(arrivals):
        xm = x_max_internal if z <= 8 else x_max_origin
        links.append({"id": z, "x_max": xm, "sat_flow": sat_flow, "exit_rate": exit_rate})

    turns = []
    for z in sorted(arrivals):
        j, h = arrivals[z]
        for out_h, rate in ((h, straight), (_LEFT[h], turn), (_RIGHT[h], turn)):
            w = leaving.get((j, out_h))
            if w is not None and rate > 0:
                turns.append({"from": z, "to": w, "rate": rate})

    junctions = []
    for j in sorted(pos):
        ew = [z for z in sorted(arrivals) if arrivals[z] == (j, "E") or arrivals[z] == (j, "W")]
        ns = [z for z in sorted(arrivals) if arrivals[z] == (j, "N") or arrivals[z] == (j, "S")]
        junctions.append({
            "id": j,
            "lost_time": lost_time,
            "stages": [
                {"id": 2 * j - 1, "g_min": g_min, "links": ew},
                {"id": 2 * j, "g_min": g_min, "links": ns},
            ],
        })
    return {"cycle": cycle, "links": links, "turns": turns, "junctions": junctions}


GRID4_E_HIST = [
    {"links": [1, 2, 3, 4, 5, 6, 7, 8], "rate": 0.02},
    {"links": [9, 10, 11, 12, 13, 14, 15, 16], "rate": 0.2},
]


def pulse_scenario(variant: str = "tuc-ff", horizon_s: int = 14400, pulse: bool = True, seed: int = 0) -> dict:
    """Synthetic sinusoidal demand on grid4 with an event pulse on the links
    leaving junction 1, tapering to zero over the final hour."""
    pulses = [{"links": [1, 5], "start_s": 3600, "duration_s": 5400, "rate": 0.15}] if pulse else []
    return {
        "horizon_s": horizon_s,
        "controller": {"variant": variant},
        "seeds": {"demand": seed, "sensor": seed + 1},
        "demand": {
            "mode": "synthetic",
            "e_hist": GRID4_E_HIST,
            "pulses": pulses,
            "taper_s": 3600,
        },
    }


def steady_scenario(variant: str = "tuc-ff", horizon_s: int = 14400, seed: int = 0) -> dict:
    """Demand held at the historic constant: no sinusoid, pulse or taper."""
    return {
        "horizon_s": horizon_s,
        "controller": {"variant": variant},
        "seeds": {"demand": seed, "sensor": seed + 1},
        "demand": {"mode": "synthetic", "e_hist": GRID4_E_HIST, "amplitude_frac": [0, 0]},
    }


EXAMPLES = {
    "chain2": (chain2, None),
    "grid4": (grid4, pulse_scenario),
}
