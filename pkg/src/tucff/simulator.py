"""Ground-truth nonlinear store-and-forward simulation, sensors and the run loop.

Three clocks run together: the simulation tick ``T``, the estimation period
``E`` and the control cycle ``C``, with ``C/E``, ``E/T`` integers.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .controller import VARIANTS, Source, control_cycle
from .estimator import EstimatorBank, estimated_outflow
from .network import TrafficNetwork, blocked_links, build_bu, flows_from_greens
from .synthesis import GainSet

__all__ = [
    "ModelError",
    "SimState",
    "SensorConfig",
    "Sensor",
    "nonlinear_outflow",
    "step",
    "RunConfig",
    "RunTrace",
    "run",
    "check_periods",
    "run_scenario",
]

STATE_TOL = 1e-9


class ModelError(RuntimeError):
    """A post-step state violated the model invariants."""


@dataclass
class SimState:
    x: np.ndarray
    x_b: np.ndarray
    k: int = 0

    @classmethod
    def zeros(cls, n_links: int) -> "SimState":
        return cls(np.zeros(n_links), np.zeros(n_links), 0)


@dataclass(frozen=True)
class SensorConfig:
    """Multiplicative sensor noise ``y = x (1 + white*psi + colored*phi)``.

    ``band`` defaults to ``(1/C, 2/C)`` Hz when left as ``None``.
    """

    white_coef: float = 0.05
    colored_coef: float = 0.4
    band: tuple[float, float] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.white_coef < 0 or self.colored_coef < 0:
            raise ValueError("sensor noise coefficients must be non-negative")


class Sensor:
    """Loop-detector model sampled every ``E`` seconds.

    The colored component is white noise through a 2nd-order Butterworth
    band-pass, scaled by the filter's H2 norm so its stationary variance is 1.
    """

    def __init__(self, cfg: SensorConfig, n_links: int, E: float, cycle: float):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        lo, hi = cfg.band if cfg.band is not None else (1.0 / cycle, 2.0 / cycle)
        nyq = 0.5 / E
        if not 0 < lo < hi < nyq:
            raise ValueError(f"noise band ({lo:g}, {hi:g}) Hz must lie inside (0, {nyq:g}) Hz")
        b, a = signal.butter(1, [lo, hi], btype="bandpass", fs=1.0 / E)
        impulse = np.zeros(20000)
        impulse[0] = 1.0
        h = signal.lfilter(b, a, impulse)
        scale = 1.0 / np.sqrt(np.sum(h * h))
        self.b = b * scale
        self.a = a
        self.zi = np.zeros((max(len(a), len(b)) - 1, n_links))

    def colored(self) -> np.ndarray:
        w = self.rng.standard_normal(self.zi.shape[1])
        # direct form II transposed, vectorised over links
        b, a, zi = self.b, self.a, self.zi
        out = b[0] * w + zi[0]
        for i in range(len(zi) - 1):
            zi[i] = b[i + 1] * w + zi[i + 1] - a[i + 1] * out
        zi[-1] = b[-1] * w - a[-1] * out
        return out

    def measure(self, x: np.ndarray) -> np.ndarray:
        psi = self.rng.standard_normal(self.zi.shape[1])
        phi = self.colored()
        return x + self.cfg.white_coef * x * psi + self.cfg.colored_coef * x * phi


def nonlinear_outflow(x, u_cmd, net: TrafficNetwork, c_ug: float, T: float, rule: str = "physical") -> np.ndarray:
    """Realised outflow: limited by the queue and zeroed under back-holding."""
    u = np.minimum(np.asarray(x, float) / T, u_cmd)
    u[blocked_links(x, net, c_ug, rule)] = 0.0
    return u


def step(
    state: SimState,
    u_cmd: np.ndarray,
    e: np.ndarray,
    net: TrafficNetwork,
    T: float,
    c_ug: float,
    rule: str = "physical",
    B_u: np.ndarray | None = None,
) -> tuple[SimState, np.ndarray, np.ndarray]:
    """Advance one tick.  Returns ``(next_state, u_nl, e_nl)``."""
    if B_u is None:
        B_u = build_bu(net)
    x, x_b = state.x, state.x_b
    e = np.asarray(e, dtype=float)
    u_nl = nonlinear_outflow(x, u_cmd, net, c_ug, T, rule)
    flow = (T / net.cycle) * (B_u @ u_nl)
    delta = e * T - (net.x_max - x - flow)
    admitted = np.where(delta >= 0, e - delta / T, e + np.minimum(-delta, x_b) / T)
    x_b_next = x_b - T * (admitted - e)
    # negative demand cannot take more vehicles than the link holds
    e_nl = np.maximum(admitted, -(x + flow) / T)
    x_next = x + flow + T * e_nl

    tol = STATE_TOL * np.maximum(1.0, net.x_max)
    if np.any(x_next < -tol) or np.any(x_next > net.x_max + tol) or np.any(x_b_next < -tol):
        raise ModelError(f"state left its bounds at tick {state.k}: x={x_next}, x_b={x_b_next}")
    # snap round-off only; anything beyond tol raised above
    x_next = np.clip(x_next, 0.0, net.x_max)
    x_b_next = np.maximum(x_b_next, 0.0)
    return SimState(x_next, x_b_next, state.k + 1), u_nl, e_nl


def check_periods(cycle: float, T: float, E: float) -> None:
    for name, num, den in (("C/T", cycle, T), ("C/E", cycle, E), ("E/T", E, T)):
        if den <= 0:
            raise ValueError(f"{name}: periods must be positive")
        ratio = num / den
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(f"{name} = {ratio:g} is not a positive integer")


@dataclass(frozen=True)
class RunConfig:
    """Everything the run loop needs besides network, gains and demand."""

    variant: str = "tuc-ff"
    T: float = 5.0
    E: float = 20.0
    c_ug: float = 0.85
    rule: str = "physical"
    sensor: SensorConfig = field(default_factory=SensorConfig)
    Qx: np.ndarray | float | None = None
    Qe: np.ndarray | float | None = None
    R: np.ndarray | float | None = None
    x0: np.ndarray | None = None
    x_b0: np.ndarray | None = None
    x_hat0: np.ndarray | None = None
    e_hat0: np.ndarray | None = None


@dataclass
class RunTrace:
    """Per-tick record.  ``y``/``x_hat``/``e_hat`` hold the latest estimation sample."""

    variant: str
    T: float
    cycle: float
    time: np.ndarray
    x: np.ndarray
    x_b: np.ndarray
    y: np.ndarray
    x_hat: np.ndarray
    e_hat: np.ndarray
    e_true: np.ndarray
    greens: np.ndarray

    COLUMNS = ("time_s", "link", "x", "x_b", "y", "x_hat", "e_hat", "e_true")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        n, Z = self.x.shape
        for k in range(n):
            t = repr(float(self.time[k]))
            for z in range(Z):
                w.writerow([t, z + 1] + [repr(float(a[k, z])) for a in
                                         (self.x, self.x_b, self.y, self.x_hat, self.e_hat, self.e_true)])
        return buf.getvalue()

    def greens_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "time_s"] + [f"g{s + 1}" for s in range(self.greens.shape[1])])
        for k, g in enumerate(self.greens):
            w.writerow([k, repr(float(k * self.cycle))] + [repr(float(v)) for v in g])
        return buf.getvalue()


def run(
    net: TrafficNetwork,
    gains: GainSet,
    demand: np.ndarray,
    e_hist: np.ndarray,
    cfg: RunConfig,
) -> RunTrace:
    """Closed-loop simulation over ``demand.shape[0]`` ticks.

    ``demand[k]`` is the true exogenous demand (veh/s) during tick k.
    """
    if cfg.variant not in VARIANTS:
        raise ValueError(f"unknown controller variant {cfg.variant!r}; choose from {sorted(VARIANTS)}")
    wiring = VARIANTS[cfg.variant]
    T, E, C = cfg.T, cfg.E, net.cycle
    check_periods(C, T, E)
    per_cycle = int(round(C / T))
    per_est = int(round(E / T))
    demand = np.asarray(demand, dtype=float)
    n_ticks, Z = demand.shape
    if Z != net.n_links:
        raise ValueError("demand has the wrong number of links")
    e_hist = np.asarray(e_hist, dtype=float)
    B_u = build_bu(net)

    state = SimState(
        np.zeros(Z) if cfg.x0 is None else np.array(cfg.x0, float),
        np.zeros(Z) if cfg.x_b0 is None else np.array(cfg.x_b0, float),
    )
    if wiring.needs_estimator:
        sensor = Sensor(cfg.sensor, Z, E, C)
        bank = EstimatorBank.build(net, E, e_hist, wiring.estimator_mode, cfg.Qx, cfg.Qe, cfg.R)
    else:
        sensor = bank = None

    rec = {k: np.full((n_ticks, Z), np.nan) for k in ("x", "x_b", "y", "x_hat", "e_hat")}
    greens = []
    y = x_hat = e_hat = np.full(Z, np.nan)
    predicted = None
    g = u_cmd = None
    for k in range(n_ticks):
        if bank is not None and k % per_est == 0:
            y = sensor.measure(state.x)
            if predicted is None:
                bank.initialize(y if cfg.x_hat0 is None else cfg.x_hat0, cfg.e_hat0)
            else:
                bank.update(predicted, y)
            x_hat, e_hat = bank.x_hat.copy(), bank.e_hat.copy()
        if k % per_cycle == 0:
            x_in = state.x if wiring.x_source is Source.TRUTH else bank.x_hat
            if wiring.e_source is Source.TRUTH:
                e_in = demand[k]
            elif wiring.e_source is Source.ESTIMATED:
                e_in = bank.e_hat
            else:
                e_in = e_hist
            g = control_cycle(x_in, e_in, gains, net)
            u_cmd = flows_from_greens(g, net)
            greens.append(g)
        if bank is not None and k % per_est == 0:
            u_est = estimated_outflow(bank.x_hat, g, net, E, cfg.c_ug, cfg.rule)
            predicted = bank.predict(u_est)

        rec["x"][k] = state.x
        rec["x_b"][k] = state.x_b
        rec["y"][k] = y
        rec["x_hat"][k] = x_hat
        rec["e_hat"][k] = e_hat
        state, _, _ = step(state, u_cmd, demand[k], net, T, cfg.c_ug, cfg.rule, B_u)

    return RunTrace(
        variant=cfg.variant,
        T=T,
        cycle=C,
        time=np.arange(n_ticks) * T,
        e_true=demand.copy(),
        greens=np.array(greens),
        **rec,
    )


def run_scenario(net: TrafficNetwork, scenario, gains: GainSet | None = None) -> RunTrace:
    """Run a parsed :class:`~tucff.scenario.Scenario` end to end."""
    from .synthesis import synthesize

    if gains is None:
        gains = synthesize(net, scenario.R_weight)
    profile = scenario.demand(net.n_links)
    sim = scenario.raw["simulation"]
    est = scenario.estimator_settings()
    cfg = RunConfig(
        variant=scenario.variant,
        T=scenario.dt,
        E=scenario.E,
        c_ug=scenario.c_ug,
        rule=sim["downstream_rule"],
        sensor=scenario.sensor_config(),
        Qx=est["Qx"],
        Qe=est["Qe"],
        R=est["R"],
        x0=sim["x0"],
        x_b0=sim["x_b0"],
        x_hat0=est["x_hat0"],
        e_hat0=est["e_hat0"],
    )
    return run(net, gains, profile.ticks(), profile.e_hist, cfg)
