"""Total time spent, relative queue balance and total time blocked."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

__all__ = ["MetricsReport", "tts", "rqb", "ttb", "evaluate", "read_trace_csv", "compare_table"]

SECONDS_PER_HOUR = 3600.0


def tts(x, x_b, T: float) -> float:
    """``T * sum(x + x_b)`` over ticks and links, in veh.h."""
    return T * float(np.sum(x) + np.sum(x_b)) / SECONDS_PER_HOUR


def rqb(x, x_max) -> float:
    """``sum(x^2 / x_max)`` over ticks and links, in veh."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.sum(x * x / np.asarray(x_max, dtype=float)))


def ttb(x_b, T: float) -> float:
    """``T * sum(x_b)`` in veh.h."""
    return T * float(np.sum(x_b)) / SECONDS_PER_HOUR


@dataclass
class MetricsReport:
    method: str
    tts: float
    rqb: float
    ttb: float
    T: float
    horizon_s: float
    total_vehicles: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def evaluate(method: str, x, x_b, x_max, T: float) -> MetricsReport:
    x = np.asarray(x, dtype=float)
    x_b = np.asarray(x_b, dtype=float)
    return MetricsReport(
        method=method,
        tts=tts(x, x_b, T),
        rqb=rqb(x, x_max),
        ttb=ttb(x_b, T),
        T=float(T),
        horizon_s=float(T * x.shape[0]),
        total_vehicles=(x.sum(axis=1) + x_b.sum(axis=1)).tolist(),
    )


def read_trace_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(time, x, x_b)`` arrays from a long-format trace CSV."""
    rows: dict[float, dict[int, tuple[float, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            t = float(row["time_s"])
            rows.setdefault(t, {})[int(row["link"])] = (float(row["x"]), float(row["x_b"]))
    times = sorted(rows)
    if not times:
        return np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0))
    Z = max(max(r) for r in rows.values())
    x = np.zeros((len(times), Z))
    x_b = np.zeros((len(times), Z))
    for i, t in enumerate(times):
        for z, (xv, bv) in rows[t].items():
            x[i, z - 1] = xv
            x_b[i, z - 1] = bv
    return np.array(times), x, x_b


def compare_table(reports: list[MetricsReport], fmt: str = "text") -> str:
    """Method / TTS / RQB x 1e-3 / TTB table in input order."""
    header = ["Method", "TTS (veh.h)", "RQB x1e-3 (veh)", "TTB (veh.h)"]
    rows = [[r.method, f"{r.tts:.3f}", f"{r.rqb * 1e-3:.3f}", f"{r.ttb:.3f}"] for r in reports]
    if fmt == "csv":
        return "\n".join(",".join(r) for r in [header] + rows) + "\n"
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    line = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    sep = "-" * len(line(header))
    return "\n".join([sep, line(header), sep] + [line(r) for r in rows] + [sep]) + "\n"
