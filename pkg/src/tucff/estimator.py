"""Per-link steady-state Kalman filters for occupancy and exogenous demand.

Each link carries the augmented state ``(x, e)`` with transition
``[[1, E], [0, 1]]`` and a single occupancy measurement.  The TUC baseline
uses a scalar occupancy-only filter driven by the constant historic demand.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import TrafficNetwork, blocked_links, build_bu

__all__ = [
    "EstimatorError",
    "EstimatorBank",
    "steady_state_gain",
    "kalman_gain",
    "scalar_kalman_gain",
    "default_covariances",
    "estimated_outflow",
]

RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 1_000_000


class EstimatorError(RuntimeError):
    pass


def steady_state_gain(A, H, Q, R, tol: float = RICCATI_TOL, max_iter: int = RICCATI_MAX_ITER):
    """Iterate the filter Riccati equation to its fixed point.

    Returns ``(K, P_pred)`` where ``P_pred`` is the steady-state prediction
    covariance and ``K = P_pred H' (H P_pred H' + R)^-1``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = Q.copy()
    for _ in range(max_iter):
        K = np.linalg.solve(H @ P @ H.T + R, H @ P).T
        Pf = P - K @ H @ P
        P_next = A @ Pf @ A.T + Q
        P_next = 0.5 * (P_next + P_next.T)
        delta = np.max(np.abs(P_next - P))
        P = P_next
        if delta < tol * max(1.0, np.max(np.abs(P))):
            K = np.linalg.solve(H @ P @ H.T + R, H @ P).T
            return K, P
    raise EstimatorError(f"filter Riccati iteration did not converge in {max_iter} iterations")


def scalar_kalman_gain(Qx: float, R: float) -> float:
    """Closed form for the random-walk occupancy filter: ``P^2 = Qx (P + R)``."""
    P = 0.5 * (Qx + np.sqrt(Qx * Qx + 4.0 * Qx * R))
    return float(P / (P + R))


def kalman_gain(Qx: float, Qe: float, R: float, E: float) -> tuple[float, float]:
    """Steady-state gain ``(Kx, Ke)`` of the joint occupancy/demand filter."""
    if not E > 0:
        raise ValueError("estimation period must be positive")
    if not (Qx > 0 and R > 0 and Qe >= 0):
        raise ValueError("need Qx > 0, R > 0 and Qe >= 0")
    if Qe == 0:
        # demand is then a known constant: its covariance decays like 1/k,
        # so iterate-to-convergence is replaced by the limit itself
        return scalar_kalman_gain(Qx, R), 0.0
    A = np.array([[1.0, E], [0.0, 1.0]])
    K, _ = steady_state_gain(A, np.array([[1.0, 0.0]]), np.diag([Qx, Qe]), np.array([[R]]))
    return float(K[0, 0]), float(K[1, 0])


def default_covariances(net: TrafficNetwork, E: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Default tuning: ``Qx = (S E/10)^2``, ``Qe = (S E/1e3)^2``, ``R = (0.05 x_max/4)^2``."""
    Qx = (net.sat_flow * E / 10.0) ** 2
    Qe = (net.sat_flow * E / 1e3) ** 2
    R = (0.05 * net.x_max / 4.0) ** 2
    return Qx, Qe, R


def estimated_outflow(
    x_hat: np.ndarray,
    g: np.ndarray,
    net: TrafficNetwork,
    E: float,
    c_ug: float,
    rule: str = "physical",
) -> np.ndarray:
    """Average outflow over one estimation period, evaluated on estimates."""
    x = np.clip(x_hat, 0.0, net.x_max)
    green = net.sat_flow * (net.stage_matrix @ np.asarray(g, dtype=float)) / net.cycle
    u = np.minimum(x / E, green)
    u[blocked_links(x, net, c_ug, rule)] = 0.0
    return u


@dataclass
class EstimatorBank:
    """Bank of independent per-link filters sharing the flow estimate.

    ``mode`` is ``"joint"`` (occupancy and demand) or ``"occupancy"`` (the
    TUC baseline, where ``e_hist`` replaces the demand state).
    """

    E: float
    Kx: np.ndarray
    Ke: np.ndarray | None
    e_hist: np.ndarray
    B_u: np.ndarray
    cycle: float
    mode: str = "joint"
    x_hat: np.ndarray | None = None
    e_hat: np.ndarray | None = None

    @classmethod
    def build(
        cls,
        net: TrafficNetwork,
        E: float,
        e_hist: np.ndarray,
        mode: str = "joint",
        Qx=None,
        Qe=None,
        R=None,
    ) -> "EstimatorBank":
        dQx, dQe, dR = default_covariances(net, E)
        Z = net.n_links
        Qx = np.broadcast_to(dQx if Qx is None else np.asarray(Qx, float), (Z,))
        Qe = np.broadcast_to(dQe if Qe is None else np.asarray(Qe, float), (Z,))
        R = np.broadcast_to(dR if R is None else np.asarray(R, float), (Z,))
        if mode == "joint":
            gains = np.array([kalman_gain(Qx[z], Qe[z], R[z], E) for z in range(Z)])
            Kx, Ke = gains[:, 0], gains[:, 1]
        elif mode == "occupancy":
            Kx = np.array([scalar_kalman_gain(Qx[z], R[z]) for z in range(Z)])
            Ke = None
        else:
            raise ValueError(f"unknown estimator mode {mode!r}")
        return cls(E=float(E), Kx=Kx, Ke=Ke, e_hist=np.asarray(e_hist, float).copy(),
                   B_u=build_bu(net), cycle=net.cycle, mode=mode)

    def initialize(self, y0: np.ndarray, e0: np.ndarray | None = None) -> None:
        self.x_hat = np.asarray(y0, float).copy()
        self.e_hat = (self.e_hist if e0 is None else np.asarray(e0, float)).copy()

    def predict(self, u_est: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One-step prediction ``(x-, e-)`` from the current filtered estimate."""
        drift = self.e_hat if self.mode == "joint" else self.e_hist
        x_pred = self.x_hat + self.E * drift + (self.E / self.cycle) * (self.B_u @ u_est)
        return x_pred, self.e_hat.copy()

    def update(self, predicted: tuple[np.ndarray, np.ndarray], y: np.ndarray) -> None:
        x_pred, e_pred = predicted
        innov = np.asarray(y, float) - x_pred
        self.x_hat = x_pred + self.Kx * innov
        if self.mode == "joint":
            self.e_hat = e_pred + self.Ke * innov
        else:
            self.e_hat = e_pred
