"""Controllability decomposition and LQ feedback/feedforward gains.

The store-and-forward model ``x+ = x + B_g g + C e`` has identity state
matrix, so only ``col(B_g)`` is reachable.  Gains are synthesised for the
controllable component and mapped back to full-state gains ``K`` and ``Ke``
used by the control law ``g = -K x - C Ke e``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import TrafficNetwork, build_bg

__all__ = [
    "SynthesisError",
    "Decomposition",
    "GainSet",
    "LTVSolution",
    "controllability_rank",
    "build_decomposition",
    "build_q1",
    "solve_dare",
    "dare",
    "dare_residual",
    "feedforward_gain",
    "full_gains",
    "ltv_lq_recursion",
    "ltv_rollout",
    "lq_cost",
    "lti_ff_gains",
    "synthesize",
]

RANK_RTOL = 1e-10
COND_MAX = 1e12
DARE_TOL = 1e-12
DARE_MAX_ITER = 1_000_000
DEFAULT_R_WEIGHT = 1e-4


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Decomposition:
    W: np.ndarray
    W_inv: np.ndarray
    B_g1: np.ndarray

    @property
    def n_controllable(self) -> int:
        return self.B_g1.shape[0]


@dataclass(frozen=True, eq=False)
class GainSet:
    W: np.ndarray
    W_inv: np.ndarray
    B_g1: np.ndarray
    Q1: np.ndarray
    R: np.ndarray
    P: np.ndarray
    K1: np.ndarray
    Ke1: np.ndarray
    K: np.ndarray
    Ke: np.ndarray
    dare_residual: float
    dare_iterations: int


@dataclass(frozen=True, eq=False)
class LTVSolution:
    """Backward-recursion output.  ``P``/``b`` have N+1 entries, gains N."""

    P: np.ndarray
    b: np.ndarray
    K: np.ndarray
    Kb: np.ndarray

    @property
    def horizon(self) -> int:
        return self.K.shape[0]


def _rank_tol(sv: np.ndarray, shape: tuple[int, int]) -> float:
    if sv.size == 0:
        return 0.0
    return max(shape) * sv[0] * RANK_RTOL


def controllability_rank(B_g: np.ndarray) -> int:
    """Rank of ``[B_g B_g ... B_g]``, i.e. of ``B_g`` itself (state matrix is I)."""
    B_g = np.atleast_2d(np.asarray(B_g, dtype=float))
    sv = np.linalg.svd(B_g, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > _rank_tol(sv, B_g.shape)))


def build_decomposition(B_g: np.ndarray, W: np.ndarray | None = None, cond_max: float = COND_MAX) -> Decomposition:
    """Split the state space into ``col(B_g)`` and a complement.

    By default ``W`` is the full left singular basis of ``B_g``: its first
    ``S`` columns are an orthonormal basis of ``col(B_g)`` and the rest span
    the orthogonal complement.  A user basis may be passed instead; it is
    checked to satisfy the same structure.
    """
    B_g = np.atleast_2d(np.asarray(B_g, dtype=float))
    Z, S = B_g.shape
    r = controllability_rank(B_g)
    if r != S:
        raise SynthesisError(
            f"rank(B_g) = {r} but there are {S} stages; the stage structure leaves "
            "some stage greens linearly dependent in their effect on occupancy"
        )
    if W is None:
        U, _, _ = np.linalg.svd(B_g, full_matrices=True)
        W = U
        W_inv = U.T.copy()
    else:
        W = np.asarray(W, dtype=float)
        if W.shape != (Z, Z):
            raise ValueError(f"basis must be {Z}x{Z}")
        W_inv = np.linalg.inv(W)
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond > cond_max:
        raise SynthesisError(f"basis W is ill-conditioned (cond = {cond:.3e} > {cond_max:.1e})")
    T = W_inv @ B_g
    tail = np.linalg.norm(T[S:]) if Z > S else 0.0
    if tail > 1e-9 * max(1.0, np.linalg.norm(B_g)):
        raise SynthesisError(f"basis does not isolate col(B_g): residual {tail:.3e}")
    return Decomposition(W=W, W_inv=W_inv, B_g1=T[:S].copy())


def build_q1(W: np.ndarray, x_max: np.ndarray, n_controllable: int) -> np.ndarray:
    """Weight on the controllable coordinates equivalent to ``diag(1/x_max)``."""
    x_max = np.asarray(x_max, dtype=float)
    if np.any(x_max <= 0):
        raise ValueError("x_max must be positive")
    W1 = np.asarray(W)[:, :n_controllable]
    Q1 = W1.T @ (W1 / x_max[:, None])
    return 0.5 * (Q1 + Q1.T)


def dare(A, B, Q, R, tol: float = DARE_TOL, max_iter: int = DARE_MAX_ITER):
    """Iterate ``P <- Q + A'P(A - BK)``, ``K = (R + B'PB)^-1 B'PA`` from ``P = Q``.

    Returns ``(P, K, iterations)``.  Stops when the largest entry change is
    below ``tol`` relative to ``max(1, |P|_inf)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = 0.5 * (Q + Q.T)
    for it in range(1, max_iter + 1):
        K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P_next = Q + A.T @ P @ (A - B @ K)
        P_next = 0.5 * (P_next + P_next.T)
        delta = np.max(np.abs(P_next - P))
        P = P_next
        if delta < tol * max(1.0, np.max(np.abs(P))):
            K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
            return P, K, it
    raise SynthesisError(f"Riccati iteration did not converge in {max_iter} iterations")


def dare_residual(A, B, Q, R, P, K) -> float:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    return float(np.linalg.norm(P - Q - A.T @ P @ (A - B @ K)))


def solve_dare(B_g1, Q1, R, tol: float = DARE_TOL, max_iter: int = DARE_MAX_ITER):
    """DARE of the controllable component (state matrix I).  Returns ``(P, K1)``."""
    B_g1 = np.atleast_2d(np.asarray(B_g1, dtype=float))
    P, K1, _ = dare(np.eye(B_g1.shape[0]), B_g1, Q1, R, tol, max_iter)
    return P, K1


def _ff_gain(A, B, P, K, R) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    P = np.atleast_2d(P)
    R = np.atleast_2d(R)
    n = A.shape[0]
    if not np.any(P):
        return np.zeros((B.shape[1], n))
    inner = np.eye(n) - (A - B @ K).T
    try:
        X = np.linalg.solve(inner, P)
    except np.linalg.LinAlgError as exc:
        raise SynthesisError("I - (A - BK)' is singular; closed loop is not stable") from exc
    return np.linalg.solve(R + B.T @ P @ B, B.T @ X)


def feedforward_gain(P, K1, B_g1, R) -> np.ndarray:
    """``Ke1 = (R + B'PB)^-1 B' (I - (I - B K1)')^-1 P``."""
    B_g1 = np.atleast_2d(B_g1)
    return _ff_gain(np.eye(B_g1.shape[0]), B_g1, P, K1, R)


def full_gains(decomp: Decomposition, K1, Ke1) -> tuple[np.ndarray, np.ndarray]:
    """Map controllable-component gains to full-state gains via ``[I 0] W^-1``."""
    top = decomp.W_inv[: decomp.n_controllable]
    return np.atleast_2d(K1) @ top, np.atleast_2d(Ke1) @ top


def _seq(M, N: int) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 2:
        return np.broadcast_to(M, (N,) + M.shape)
    if M.shape[0] != N:
        raise ValueError(f"sequence length {M.shape[0]} does not match horizon {N}")
    return M


def ltv_lq_recursion(A, B, Q, R, Q_N, e, N: int) -> LTVSolution:
    """Finite-horizon LQ with a known disturbance, solved backwards.

    ``A``, ``B``, ``Q``, ``R`` are either single matrices (time-invariant) or
    stacks of ``N`` matrices.  ``e`` is ``(N, n)`` or, to get the response to
    several disturbances at once, ``(N, n, p)``.  The optimal input is
    ``u_k = -K_k x_k - Kb_k (P_{k+1} e_k + b_{k+1})``.
    """
    A = _seq(A, N)
    B = _seq(B, N)
    Q = _seq(Q, N)
    R = _seq(R, N)
    e = np.asarray(e, dtype=float)
    if e.shape[0] != N:
        raise ValueError(f"disturbance length {e.shape[0]} does not match horizon {N}")
    n, m = B.shape[1], B.shape[2]
    P = np.empty((N + 1, n, n))
    b = np.empty((N + 1,) + e.shape[1:])
    K = np.empty((N, m, n))
    Kb = np.empty((N, m, n))
    P[N] = Q_N
    b[N] = 0.0
    for k in range(N - 1, -1, -1):
        Pn = P[k + 1]
        M = R[k] + B[k].T @ Pn @ B[k]
        K[k] = np.linalg.solve(M, B[k].T @ Pn @ A[k])
        Kb[k] = np.linalg.solve(M, B[k].T)
        Acl = A[k] - B[k] @ K[k]
        Pk = Q[k] + A[k].T @ Pn @ Acl
        P[k] = 0.5 * (Pk + Pk.T)
        b[k] = Acl.T @ (b[k + 1] + Pn @ e[k])
    return LTVSolution(P=P, b=b, K=K, Kb=Kb)


def ltv_rollout(sol: LTVSolution, A, B, e, x0) -> tuple[np.ndarray, np.ndarray]:
    """Apply the optimal policy from ``x0``; returns states ``(N+1, n)`` and inputs ``(N, m)``."""
    N = sol.horizon
    A = _seq(A, N)
    B = _seq(B, N)
    e = np.asarray(e, dtype=float)
    xs = np.empty((N + 1, A.shape[1]))
    us = np.empty((N, B.shape[2]))
    xs[0] = x0
    for k in range(N):
        us[k] = -sol.K[k] @ xs[k] - sol.Kb[k] @ (sol.P[k + 1] @ e[k] + sol.b[k + 1])
        xs[k + 1] = A[k] @ xs[k] + B[k] @ us[k] + e[k]
    return xs, us


def lq_cost(xs, us, Q, R, Q_N) -> float:
    """``1/2 x_N'Q_N x_N + 1/2 sum(x'Qx + u'Ru)``."""
    N = us.shape[0]
    Q = _seq(Q, N)
    R = _seq(R, N)
    J = xs[N] @ Q_N @ xs[N]
    for k in range(N):
        J += xs[k] @ Q[k] @ xs[k] + us[k] @ R[k] @ us[k]
    return 0.5 * float(J)


def lti_ff_gains(A, B, Q, R, tol: float = DARE_TOL, max_iter: int = DARE_MAX_ITER):
    """Infinite-horizon gains for ``x+ = Ax + Bu + e`` with constant known ``e``.

    Returns ``(K, Ke)`` so that ``u = -K x - Ke e``.
    """
    P, K, _ = dare(A, B, Q, R, tol, max_iter)
    return K, _ff_gain(A, B, P, K, R)


def synthesize(net: TrafficNetwork, R_weight: float = DEFAULT_R_WEIGHT) -> GainSet:
    """Full gain synthesis for a network with ``R = R_weight * I``."""
    if not R_weight > 0:
        raise ValueError("R weight must be positive")
    decomp = build_decomposition(build_bg(net))
    S = decomp.n_controllable
    Q1 = build_q1(decomp.W, net.x_max, S)
    R = R_weight * np.eye(S)
    P, K1, iters = dare(np.eye(S), decomp.B_g1, Q1, R)
    Ke1 = feedforward_gain(P, K1, decomp.B_g1, R)
    K, Ke = full_gains(decomp, K1, Ke1)
    return GainSet(
        W=decomp.W,
        W_inv=decomp.W_inv,
        B_g1=decomp.B_g1,
        Q1=Q1,
        R=R,
        P=P,
        K1=K1,
        Ke1=Ke1,
        K=K,
        Ke=Ke,
        dare_residual=dare_residual(np.eye(S), decomp.B_g1, Q1, R, P, K1),
        dare_iterations=iters,
    )
