"""Store-and-forward network description and the matrices derived from it.

A network file is a JSON document::

    {
      "cycle": 100,
      "links": [{"id": 1, "x_max": 60, "sat_flow": 0.8, "exit_rate": 0.05}, ...],
      "turns": [{"from": 1, "to": 2, "rate": 0.6}, ...],
      "junctions": [
        {"id": 1, "lost_time": 10,
         "stages": [{"id": 1, "g_min": 15, "links": [1, 3]}, ...]},
        ...
      ]
    }

Link, stage and junction ids are 1-based and must be contiguous.  Only raw
data is stored; ``B_g`` and ``B_u`` are always rebuilt from it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "NetworkError",
    "TrafficNetwork",
    "validate_network",
    "load_network",
    "save_network",
    "dumps_network",
    "build_bu",
    "build_bg",
    "flows_from_greens",
    "blocked_links",
]

TURN_SUM_TOL = 1e-9

_TOP_KEYS = {"cycle", "links", "turns", "junctions"}
_LINK_KEYS = {"id", "x_max", "sat_flow", "exit_rate"}
_TURN_KEYS = {"from", "to", "rate"}
_JUNCTION_KEYS = {"id", "lost_time", "stages"}
_STAGE_KEYS = {"id", "g_min", "links"}


class NetworkError(ValueError):
    """Raised when a network description is malformed or infeasible."""


@dataclass(frozen=True, eq=False)
class TrafficNetwork:
    """Validated network.  Arrays are 0-based; ``source`` is the raw dict."""

    x_max: np.ndarray
    sat_flow: np.ndarray
    turn: np.ndarray  # turn[z, w] = rate from link w into link z
    exit_rate: np.ndarray
    stage_matrix: np.ndarray
    junction_stages: tuple[tuple[int, ...], ...]
    g_min: np.ndarray
    lost_time: np.ndarray
    cycle: float
    source: dict = field(repr=False)

    @property
    def n_links(self) -> int:
        return self.x_max.shape[0]

    @property
    def n_stages(self) -> int:
        return self.g_min.shape[0]

    @property
    def n_junctions(self) -> int:
        return self.lost_time.shape[0]

    @property
    def B_u(self) -> np.ndarray:
        return build_bu(self)

    @property
    def B_g(self) -> np.ndarray:
        return build_bg(self)

    def junction_of_stage(self) -> np.ndarray:
        owner = np.empty(self.n_stages, dtype=int)
        for j, stages in enumerate(self.junction_stages):
            owner[list(stages)] = j
        return owner


def _check_keys(obj: Any, allowed: set, what: str) -> None:
    if not isinstance(obj, dict):
        raise NetworkError(f"{what} must be an object")
    unknown = set(obj) - allowed
    if unknown:
        raise NetworkError(f"unknown key(s) in {what}: {sorted(unknown)}")
    missing = allowed - set(obj)
    if missing:
        raise NetworkError(f"missing key(s) in {what}: {sorted(missing)}")


def _contiguous(ids: list, what: str) -> None:
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise NetworkError(f"{what} ids must be 1..{len(ids)} without gaps or repeats, got {sorted(ids)}")


def validate_network(raw: dict) -> TrafficNetwork:
    """Check a raw network description and return a :class:`TrafficNetwork`."""
    _check_keys(raw, _TOP_KEYS, "network")
    cycle = float(raw["cycle"])
    if not cycle > 0:
        raise NetworkError("cycle must be positive")

    links = raw["links"]
    if not links:
        raise NetworkError("network has no links")
    for link in links:
        _check_keys(link, _LINK_KEYS, f"link {link.get('id', '?') if isinstance(link, dict) else '?'}")
    _contiguous([link["id"] for link in links], "link")
    links = sorted(links, key=lambda d: d["id"])
    Z = len(links)
    x_max = np.array([float(d["x_max"]) for d in links])
    sat_flow = np.array([float(d["sat_flow"]) for d in links])
    exit_rate = np.array([float(d["exit_rate"]) for d in links])
    if np.any(x_max <= 0):
        raise NetworkError("x_max must be positive on every link")
    if np.any(sat_flow < 0):
        raise NetworkError("sat_flow must be non-negative")
    bad = np.flatnonzero((exit_rate < 0) | (exit_rate >= 1))
    if bad.size:
        raise NetworkError(f"exit_rate out of [0,1) on link(s) {(bad + 1).tolist()}")

    turn = np.zeros((Z, Z))
    for t in raw["turns"]:
        _check_keys(t, _TURN_KEYS, "turn")
        w, z = int(t["from"]), int(t["to"])
        if not (1 <= w <= Z and 1 <= z <= Z):
            raise NetworkError(f"turn {w}->{z} references an unknown link")
        if turn[z - 1, w - 1] != 0:
            raise NetworkError(f"turn {w}->{z} listed twice")
        rate = float(t["rate"])
        if rate < 0:
            raise NetworkError(f"negative turning rate on {w}->{z}")
        turn[z - 1, w - 1] = rate
    over = np.flatnonzero(turn.sum(axis=0) > 1 + TURN_SUM_TOL)
    if over.size:
        raise NetworkError(f"turning rates out of link(s) {(over + 1).tolist()} sum to more than 1")

    junctions = raw["junctions"]
    if not junctions:
        raise NetworkError("network has no junctions")
    for jn in junctions:
        _check_keys(jn, _JUNCTION_KEYS, "junction")
        for st in jn["stages"]:
            _check_keys(st, _STAGE_KEYS, "stage")
    _contiguous([jn["id"] for jn in junctions], "junction")
    junctions = sorted(junctions, key=lambda d: d["id"])

    owner: dict[int, int] = {}
    for jn in junctions:
        if not jn["stages"]:
            raise NetworkError(f"junction {jn['id']} has no stages")
        for st in jn["stages"]:
            sid = st["id"]
            if sid in owner:
                raise NetworkError(f"stage {sid} in two junctions ({owner[sid]} and {jn['id']})")
            owner[sid] = jn["id"]
    _contiguous(list(owner), "stage")
    S = len(owner)

    stage_matrix = np.zeros((Z, S))
    g_min = np.zeros(S)
    lost_time = np.zeros(len(junctions))
    junction_stages = []
    for j, jn in enumerate(junctions):
        lost_time[j] = float(jn["lost_time"])
        ids = []
        for st in jn["stages"]:
            s = st["id"] - 1
            g_min[s] = float(st["g_min"])
            for z in st["links"]:
                if not 1 <= z <= Z:
                    raise NetworkError(f"stage {st['id']} references unknown link {z}")
                stage_matrix[z - 1, s] = 1.0
            ids.append(s)
        junction_stages.append(tuple(sorted(ids)))
    if np.any(g_min < 0) or np.any(lost_time < 0):
        raise NetworkError("g_min and lost_time must be non-negative")

    orphan = np.flatnonzero(stage_matrix.sum(axis=1) == 0)
    if orphan.size:
        raise NetworkError(f"link(s) {(orphan + 1).tolist()} have right of way in no stage")

    for j, stages in enumerate(junction_stages):
        need = g_min[list(stages)].sum() + lost_time[j]
        if need > cycle:
            raise NetworkError(
                f"green-time constraints infeasible at junction {j + 1}: "
                f"sum(g_min) + L = {need:g} > C = {cycle:g}"
            )

    for arr in (x_max, sat_flow, turn, exit_rate, stage_matrix, g_min, lost_time):
        arr.setflags(write=False)
    return TrafficNetwork(
        x_max=x_max,
        sat_flow=sat_flow,
        turn=turn,
        exit_rate=exit_rate,
        stage_matrix=stage_matrix,
        junction_stages=tuple(junction_stages),
        g_min=g_min,
        lost_time=lost_time,
        cycle=cycle,
        source=json.loads(json.dumps(raw)),
    )


def dumps_network(net: TrafficNetwork) -> str:
    return json.dumps(net.source, indent=2) + "\n"


def load_network(path: str | Path) -> TrafficNetwork:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: not valid JSON ({exc})") from exc
    return validate_network(raw)


def save_network(net: TrafficNetwork, path: str | Path) -> None:
    Path(path).write_text(dumps_network(net), encoding="utf-8")


def _routing(net: TrafficNetwork) -> np.ndarray:
    # (I - diag(t0)) T - I
    return (1.0 - net.exit_rate)[:, None] * net.turn - np.eye(net.n_links)


def build_bu(net: TrafficNetwork) -> np.ndarray:
    """``B_u = C((I - diag(t0)) T - I)``, mapping link outflows to occupancy change."""
    return net.cycle * _routing(net)


def build_bg(net: TrafficNetwork) -> np.ndarray:
    """``B_g = ((I - diag(t0)) T - I) diag(S) S``, mapping stage greens to occupancy change."""
    return _routing(net) @ (net.sat_flow[:, None] * net.stage_matrix)


def flows_from_greens(g: np.ndarray, net: TrafficNetwork) -> np.ndarray:
    """Average link outflow over a cycle for stage greens ``g`` (s)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (net.n_stages,):
        raise ValueError(f"expected {net.n_stages} green times, got shape {g.shape}")
    if np.any(g < 0):
        raise ValueError("negative green time")
    return net.sat_flow * (net.stage_matrix @ g) / net.cycle


def blocked_links(x: np.ndarray, net: TrafficNetwork, c_ug: float, rule: str = "physical") -> np.ndarray:
    """Links whose outflow is held back because a neighbour is above ``c_ug * x_max``.

    ``rule="physical"`` checks links that receive flow from z; ``rule="literal"``
    checks links w with ``t_{w,z} != 0`` (those feeding z).
    """
    full = np.asarray(x) > c_ug * net.x_max
    if rule == "physical":
        adj = net.turn.T != 0  # adj[z, w]: z feeds w
    elif rule == "literal":
        adj = net.turn != 0  # adj[z, w]: w feeds z
    else:
        raise ValueError(f"unknown downstream rule {rule!r}")
    return (adj & full[None, :]).any(axis=1)
