"""Feedback-feedforward green-time law and per-junction constraint projection."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .network import TrafficNetwork
from .synthesis import GainSet

__all__ = [
    "Source",
    "ControlInput",
    "VARIANTS",
    "control_law",
    "project_greens",
    "project_all",
    "control_cycle",
]


class Source(str, enum.Enum):
    TRUTH = "ground-truth"
    ESTIMATED = "estimated"
    HISTORIC = "historic-constant"


@dataclass(frozen=True)
class ControlInput:
    x_source: Source
    e_source: Source

    @property
    def needs_estimator(self) -> bool:
        return Source.ESTIMATED in (self.x_source, self.e_source)

    @property
    def estimator_mode(self) -> str:
        return "joint" if self.e_source is Source.ESTIMATED else "occupancy"


VARIANTS: dict[str, ControlInput] = {
    "tuc-ideal": ControlInput(Source.TRUTH, Source.HISTORIC),
    "tuc-ff-ideal": ControlInput(Source.TRUTH, Source.TRUTH),
    "tuc-ff": ControlInput(Source.ESTIMATED, Source.ESTIMATED),
    "tuc": ControlInput(Source.ESTIMATED, Source.HISTORIC),
}


def control_law(x_in, e_in, gains: GainSet, net: TrafficNetwork) -> np.ndarray:
    """Unconstrained greens ``-K [x]_0^x_max - C Ke e``."""
    x = np.clip(np.asarray(x_in, dtype=float), 0.0, net.x_max)
    return -gains.K @ x - net.cycle * (gains.Ke @ np.asarray(e_in, dtype=float))


def project_greens(g, g_min, lost_time: float, cycle: float) -> np.ndarray:
    """Closest point to ``g`` with ``g >= g_min`` and ``sum(g) + L = C``.

    The solution is ``max(g_min, g + lam)``; ``lam`` is found by scanning the
    sorted breakpoints ``g_min - g``.
    """
    g = np.asarray(g, dtype=float)
    g_min = np.asarray(g_min, dtype=float)
    budget = cycle - lost_time
    floor = g_min.sum()
    if floor > budget + 1e-9:
        raise ValueError(f"infeasible junction: sum(g_min) = {floor:g} > C - L = {budget:g}")
    n = g.size
    bp = g_min - g
    order = np.argsort(bp, kind="stable")
    bp_sorted = bp[order]
    # stages sorted[:i+1] free, the rest held at g_min
    free_g = np.cumsum(g[order])
    bound_min = floor - np.cumsum(g_min[order])
    lam = bp_sorted[-1]
    for i in range(n):
        cand = (budget - bound_min[i] - free_g[i]) / (i + 1)
        if i == n - 1 or cand <= bp_sorted[i + 1]:
            lam = max(cand, bp_sorted[i])
            break
    out = np.maximum(g_min, g + lam)
    # ties at a breakpoint: closed lower bound, absorb rounding on free stages
    free = g + lam > g_min
    if free.any():
        out[free] += (budget - out.sum()) / free.sum()
        out = np.maximum(out, g_min)
    return out


def project_all(g_raw, net: TrafficNetwork) -> np.ndarray:
    g_raw = np.asarray(g_raw, dtype=float)
    out = np.empty_like(g_raw)
    for j, stages in enumerate(net.junction_stages):
        idx = list(stages)
        out[idx] = project_greens(g_raw[idx], net.g_min[idx], net.lost_time[j], net.cycle)
    return out


def control_cycle(x_in, e_in, gains: GainSet, net: TrafficNetwork) -> np.ndarray:
    """Feasible stage greens for one cycle."""
    return project_all(control_law(x_in, e_in, gains, net), net)
