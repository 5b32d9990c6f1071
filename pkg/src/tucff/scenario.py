"""Exogenous demand profiles and the scenario file.

A scenario file is JSON.  Only ``horizon_s`` and ``demand`` (with ``mode``
and ``e_hist``) are required; everything else takes the defaults below and
is echoed back in full by :func:`dumps_scenario`.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "ScenarioError",
    "Pulse",
    "DemandProfile",
    "Scenario",
    "synthetic_demand",
    "profile_demand",
    "historic_rates",
    "load_scenario",
    "parse_scenario",
    "dumps_scenario",
    "save_scenario",
]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Pulse:
    links: tuple[int, ...]  # 1-based
    start_s: float
    duration_s: float
    rate: float

    @classmethod
    def from_dict(cls, d: dict) -> "Pulse":
        unknown = set(d) - {"links", "start_s", "duration_s", "rate"}
        if unknown:
            raise ScenarioError(f"unknown key(s) in pulse: {sorted(unknown)}")
        try:
            p = cls(tuple(int(z) for z in d["links"]), float(d["start_s"]), float(d["duration_s"]), float(d["rate"]))
        except KeyError as exc:
            raise ScenarioError(f"pulse is missing {exc}") from None
        if p.duration_s <= 0:
            raise ScenarioError("pulse duration must be positive")
        return p


@dataclass(frozen=True, eq=False)
class DemandProfile:
    """True demand sampled at every tick ``0..n_ticks`` (inclusive) plus ``e_hist``."""

    rates: np.ndarray
    e_hist: np.ndarray
    dt: float
    horizon_s: float
    seed: int | None = None

    @property
    def n_ticks(self) -> int:
        return self.rates.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.rates.shape[0]) * self.dt

    def ticks(self) -> np.ndarray:
        """Demand held over each simulated tick, shape ``(n_ticks, Z)``."""
        return self.rates[:-1]


def _tick_times(horizon_s: float, dt: float) -> np.ndarray:
    n = horizon_s / dt
    if dt <= 0 or abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ScenarioError(f"horizon {horizon_s:g} s is not a positive multiple of the tick {dt:g} s")
    return np.arange(int(round(n)) + 1) * dt


def _link_rngs(seed: int, n_links: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_links)]


def _add_pulses(rates: np.ndarray, t: np.ndarray, pulses, smooth: bool) -> None:
    Z = rates.shape[1]
    for p in pulses:
        u = (t - p.start_s) / p.duration_s
        if smooth:
            inside = (u >= 0) & (u <= 1)
            shape = np.where(inside, 0.5 * (1.0 - np.cos(2.0 * np.pi * u)), 0.0)
        else:
            shape = ((u >= 0) & (u < 1)).astype(float)
        for z in p.links:
            if not 1 <= z <= Z:
                raise ScenarioError(f"pulse references unknown link {z}")
            rates[:, z - 1] += p.rate * shape


def synthetic_demand(
    e_hist,
    horizon_s: float,
    dt: float,
    amplitude_frac=(0.25, 0.5),
    period_s=(1800.0, 7200.0),
    pulses=(),
    taper_s: float = 0.0,
    seed: int = 0,
) -> DemandProfile:
    """Sinusoid about ``e_hist`` per link, optional rectangular pulses and final taper.

    Amplitude is drawn from ``U[lo*e_hist, hi*e_hist]``, phase from
    ``U[0, 2pi]`` and period from ``U[period_s]``, independently per link.
    Over the last ``taper_s`` seconds the whole demand ramps linearly to 0.
    """
    e_hist = np.asarray(e_hist, dtype=float)
    lo, hi = amplitude_frac
    p_lo, p_hi = period_s
    if np.any(e_hist < 0):
        raise ScenarioError("e_hist must be non-negative")
    if lo < 0 or hi < lo or p_lo <= 0 or p_hi < p_lo or taper_s < 0:
        raise ScenarioError("amplitude/period ranges must be non-negative and ordered; taper >= 0")
    t = _tick_times(horizon_s, dt)
    Z = e_hist.size
    rates = np.empty((t.size, Z))
    for z, rng in enumerate(_link_rngs(seed, Z)):
        amp = rng.uniform(lo * e_hist[z], hi * e_hist[z])
        phase = rng.uniform(0.0, 2.0 * np.pi)
        period = rng.uniform(p_lo, p_hi)
        rates[:, z] = e_hist[z] + amp * np.sin(2.0 * np.pi * t / period + phase)
    _add_pulses(rates, t, pulses, smooth=False)
    if taper_s > 0:
        rates *= np.clip((horizon_s - t) / taper_s, 0.0, 1.0)[:, None]
    return DemandProfile(rates, e_hist.copy(), float(dt), float(horizon_s), seed)


def profile_demand(
    base,
    base_dt: float,
    horizon_s: float,
    dt: float,
    perturbation_max: float = 0.1,
    knot_s: float = 600.0,
    pulses=(),
    seed: int = 0,
    e_hist=None,
) -> DemandProfile:
    """Base daily profile times ``(1 + delta)`` plus raised-cosine pulses.

    ``base`` is ``(n_samples, Z)`` sampled every ``base_dt`` seconds and is
    interpolated linearly to the tick.  ``delta`` is piecewise linear between
    knots drawn from ``U[-perturbation_max, perturbation_max]`` per link.
    ``e_hist`` defaults to the time average of ``base``.
    """
    base = np.atleast_2d(np.asarray(base, dtype=float))
    if base.shape[0] < 2 or base_dt <= 0:
        raise ScenarioError("base profile needs at least two samples and a positive sample period")
    if (base.shape[0] - 1) * base_dt < horizon_s - 1e-9:
        raise ScenarioError(
            f"base profile covers {(base.shape[0] - 1) * base_dt:g} s, shorter than the horizon {horizon_s:g} s"
        )
    if not 0 <= perturbation_max < 1 or knot_s <= 0:
        raise ScenarioError("perturbation_max must be in [0, 1) and knot_s positive")
    t = _tick_times(horizon_s, dt)
    Z = base.shape[1]
    tb = np.arange(base.shape[0]) * base_dt
    knots = np.arange(int(np.ceil(horizon_s / knot_s)) + 1) * knot_s
    rates = np.empty((t.size, Z))
    for z, rng in enumerate(_link_rngs(seed, Z)):
        delta = np.interp(t, knots, rng.uniform(-perturbation_max, perturbation_max, knots.size))
        rates[:, z] = np.interp(t, tb, base[:, z]) * (1.0 + delta)
    _add_pulses(rates, t, pulses, smooth=True)
    if e_hist is None:
        e_hist = base.mean(axis=0)
    return DemandProfile(rates, np.asarray(e_hist, float).copy(), float(dt), float(horizon_s), seed)


# --- scenario file -----------------------------------------------------------

DEFAULTS: dict[str, Any] = {
    "controller": {"variant": "tuc-ff", "R_weight": 1e-4},
    "simulation": {"dt": 5, "c_ug": 0.85, "downstream_rule": "physical", "x0": None, "x_b0": None},
    "sensor": {"white_coef": 0.05, "colored_coef": 0.4, "band_hz": None},
    "estimator": {"period": 20, "Qx": None, "Qe": None, "R": None, "x_hat0": None, "e_hat0": None},
    "seeds": {"demand": 0, "sensor": 1},
}
DEMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "synthetic": {"amplitude_frac": [0.25, 0.5], "period_s": [1800, 7200], "pulses": [], "taper_s": 0},
    "profile": {"sample_s": 600, "shape": [1.0, 1.0], "perturbation_max": 0.1, "knot_s": 600, "pulses": []},
}
REQUIRED = ("horizon_s", "demand")


def _merge(section: str, given: Any, defaults: dict) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ScenarioError(f"'{section}' must be an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ScenarioError(f"unknown key(s) in '{section}': {', '.join(sorted(unknown))}")
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(given))
    return out


@dataclass(frozen=True, eq=False)
class Scenario:
    """Parsed scenario; ``raw`` is the full canonical dict (defaults applied)."""

    raw: dict

    @property
    def horizon_s(self) -> float:
        return float(self.raw["horizon_s"])

    @property
    def variant(self) -> str:
        return self.raw["controller"]["variant"]

    @property
    def R_weight(self) -> float:
        return float(self.raw["controller"]["R_weight"])

    @property
    def dt(self) -> float:
        return float(self.raw["simulation"]["dt"])

    @property
    def c_ug(self) -> float:
        return float(self.raw["simulation"]["c_ug"])

    @property
    def E(self) -> float:
        return float(self.raw["estimator"]["period"])

    def sensor_config(self):
        from .simulator import SensorConfig

        s = self.raw["sensor"]
        band = None if s["band_hz"] is None else tuple(float(v) for v in s["band_hz"])
        return SensorConfig(float(s["white_coef"]), float(s["colored_coef"]), band, int(self.raw["seeds"]["sensor"]))

    def estimator_settings(self) -> dict:
        est = self.raw["estimator"]
        conv = lambda v: None if v is None else np.asarray(v, dtype=float)
        return {k: conv(est[k]) for k in ("Qx", "Qe", "R", "x_hat0", "e_hat0")}

    def with_overrides(self, variant: str | None = None, horizon_s: float | None = None, seed: int | None = None):
        raw = copy.deepcopy(self.raw)
        if variant is not None:
            raw["controller"]["variant"] = variant
        if horizon_s is not None:
            raw["horizon_s"] = horizon_s
        if seed is not None:
            raw["seeds"] = {"demand": int(seed), "sensor": int(seed) + 1}
        return parse_scenario(raw)

    def demand(self, n_links: int) -> DemandProfile:
        d = self.raw["demand"]
        e_hist = historic_rates(d["e_hist"], n_links)
        pulses = [Pulse.from_dict(p) for p in d["pulses"]]
        seed = int(self.raw["seeds"]["demand"])
        if d["mode"] == "synthetic":
            return synthetic_demand(
                e_hist, self.horizon_s, self.dt, tuple(d["amplitude_frac"]), tuple(d["period_s"]),
                pulses, float(d["taper_s"]), seed,
            )
        shape = np.asarray(d["shape"], dtype=float)
        if shape.ndim != 1 or shape.size < 2 or np.any(shape < 0) or shape.mean() <= 0:
            raise ScenarioError("profile shape must be a list of >= 2 non-negative multipliers with positive mean")
        base = np.outer(shape / shape.mean(), e_hist)
        return profile_demand(
            base, float(d["sample_s"]), self.horizon_s, self.dt, float(d["perturbation_max"]),
            float(d["knot_s"]), pulses, seed, e_hist=e_hist,
        )


def historic_rates(groups: list, n_links: int) -> np.ndarray:
    """Per-link constant demand from ``[{"links": [...], "rate": r}, ...]``; unlisted links get 0."""
    e = np.zeros(n_links)
    seen: set[int] = set()
    for grp in groups:
        if set(grp) != {"links", "rate"}:
            raise ScenarioError("each e_hist group needs exactly the keys 'links' and 'rate'")
        for z in grp["links"]:
            if not 1 <= int(z) <= n_links:
                raise ScenarioError(f"e_hist references unknown link {z}")
            if z in seen:
                raise ScenarioError(f"link {z} appears in two e_hist groups")
            seen.add(z)
            e[int(z) - 1] = float(grp["rate"])
    if np.any(e < 0):
        raise ScenarioError("e_hist must be non-negative")
    return e


def parse_scenario(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(raw) - set(DEFAULTS) - set(REQUIRED)
    if unknown:
        raise ScenarioError(f"unknown key(s) in scenario: {', '.join(sorted(unknown))}")
    for key in REQUIRED:
        if key not in raw:
            raise ScenarioError(f"missing required field '{key}'")
    full: dict[str, Any] = {"horizon_s": raw["horizon_s"]}
    for section, defaults in DEFAULTS.items():
        full[section] = _merge(section, raw.get(section), defaults)

    demand = raw["demand"]
    if not isinstance(demand, dict) or "mode" not in demand or "e_hist" not in demand:
        raise ScenarioError("'demand' needs 'mode' and 'e_hist'")
    mode = demand["mode"]
    if mode not in DEMAND_DEFAULTS:
        raise ScenarioError(f"demand mode must be one of {sorted(DEMAND_DEFAULTS)}, got {mode!r}")
    full["demand"] = _merge("demand", demand, {"mode": mode, "e_hist": [], **DEMAND_DEFAULTS[mode]})

    if not float(full["horizon_s"]) > 0:
        raise ScenarioError("horizon_s must be positive")
    from .controller import VARIANTS

    if full["controller"]["variant"] not in VARIANTS:
        raise ScenarioError(f"unknown controller variant {full['controller']['variant']!r}")
    if not float(full["controller"]["R_weight"]) > 0:
        raise ScenarioError("R_weight must be positive")
    if full["simulation"]["downstream_rule"] not in ("physical", "literal"):
        raise ScenarioError("downstream_rule must be 'physical' or 'literal'")
    if not 0 < float(full["simulation"]["c_ug"]) < 1:
        raise ScenarioError("c_ug must lie in (0, 1)")
    return Scenario(full)


def dumps_scenario(sc: Scenario) -> str:
    return json.dumps(sc.raw, indent=2, sort_keys=True) + "\n"


def load_scenario(path: str | Path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return parse_scenario(raw)


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(sc), encoding="utf-8")
