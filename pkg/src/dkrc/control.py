"""Controller synthesis in the lifted space.

Infinite-horizon discrete LQR comes from a fixed-point Riccati iteration;
finite-horizon MPC condenses the lifted dynamics into a dense box-
constrained QP solved by projected gradient descent. Both act on the
goal-shifted coordinates, so the deployed control is u = clamp(u0 + v).
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import (
    ConvergenceError,
    DimensionError,
    SingularMatrixError,
    StabilizabilityError,
)
from .koopman import LiftedModel, lift


def _sym(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def solve_dare(a, b, qz, r, tol: float = 1e-10, max_iter: int = 10000) -> np.ndarray:
    """Fixed-point iteration for the discrete algebraic Riccati equation.

    P <- Qz + A'(P - P B (R + B'PB)^-1 B'P) A, symmetrized each sweep,
    until the Frobenius norm of the change drops below ``tol``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    qz = np.asarray(qz, dtype=float)
    r = np.asarray(r, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape[0] != n or qz.shape != (n, n):
        raise DimensionError(f"inconsistent shapes a={a.shape} b={b.shape} qz={qz.shape}")
    p = qz.copy()
    window = 200
    best_recent = np.inf
    best_prev = np.inf
    for it in range(1, max_iter + 1):
        btp = b.T @ p
        gain_term = np.linalg.solve(r + btp @ b, btp @ a)
        p_next = _sym(qz + a.T @ (p @ a - btp.T @ gain_term))
        delta = float(np.linalg.norm(p_next - p))
        p = p_next
        if not np.isfinite(delta) or np.linalg.norm(p) > 1e100:
            raise StabilizabilityError(
                f"Riccati iterate diverged at iteration {it}; (A, B) looks unstabilizable"
            )
        if delta < tol:
            return p
        best_recent = min(best_recent, delta)
        if it % window == 0:
            # Residual refusing to shrink across two full windows means the
            # iteration has stalled rather than converged slowly.
            if best_recent > 0.999 * best_prev and best_prev < np.inf:
                raise StabilizabilityError(
                    f"Riccati residual plateaued near {delta:.3e} after {it} iterations"
                )
            best_prev = best_recent
            best_recent = np.inf
    raise ConvergenceError(f"Riccati iteration hit {max_iter} iterations, last residual {delta:.3e}")


def lqr_gain(p, a, b, r) -> np.ndarray:
    """K = (R + B'PB)^-1 B'PA; the feedback law is v = -K z."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = np.asarray(r, dtype=float)
    btp = b.T @ p
    try:
        return np.linalg.solve(r + btp @ b, btp @ a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"R + B'PB is singular: {exc}") from exc


@dataclass
class LqrLaw:
    k: np.ndarray  # (m, N)
    p: np.ndarray  # (N, N)
    q: np.ndarray  # (n, n)
    r: np.ndarray  # (m, m)


@dataclass
class MpcProblem:
    """Finite-horizon box-constrained problem in the shifted controls."""

    horizon: int
    q: np.ndarray     # (n, n) state weight
    r: np.ndarray     # (m, m) control weight
    v_lo: np.ndarray  # (m,) = u_min - u0
    v_hi: np.ndarray  # (m,) = u_max - u0
    tol: float = 1e-8
    max_iter: int = 10000

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        # equality is allowed: a degenerate box pins the control
        if np.any(self.v_lo > self.v_hi):
            raise ValueError("v_lo must not exceed v_hi")


def state_weight(model: LiftedModel, q) -> np.ndarray:
    """Lifted stage weight C'QC induced by a state-space Q."""
    q = np.asarray(q, dtype=float)
    return model.c.T @ q @ model.c


def design_lqr(model: LiftedModel, q, r, tol: float = 1e-10, max_iter: int = 10000) -> LqrLaw:
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    p = solve_dare(model.a, model.b, state_weight(model, q), r, tol, max_iter)
    return LqrLaw(k=lqr_gain(p, model.a, model.b, r), p=p, q=q, r=r)


class _CondensedQp:
    """Dense condensed form of the finite-horizon problem for one model.

    With Z = F z0 + S V the cost is V'(S'QS + R)V + 2 (S'Q F z0)'V + const,
    so the QP data reduce to a constant Hessian and a linear map z0 -> g.
    """

    def __init__(self, model: LiftedModel, prob: MpcProblem):
        n_lift, m = model.b.shape
        horizon = prob.horizon
        qz = state_weight(model, prob.q)
        a_pow = [np.eye(n_lift)]
        for _ in range(horizon):
            a_pow.append(model.a @ a_pow[-1])
        # Rows t = 1..L of the stacked prediction; stage t < L and the
        # terminal step share the same weight.
        s = np.zeros((horizon * n_lift, horizon * m))
        f = np.zeros((horizon * n_lift, n_lift))
        for t in range(1, horizon + 1):
            f[(t - 1) * n_lift : t * n_lift] = a_pow[t]
            for j in range(t):
                s[(t - 1) * n_lift : t * n_lift, j * m : (j + 1) * m] = a_pow[t - 1 - j] @ model.b
        qbar = np.kron(np.eye(horizon), qz)
        rbar = np.kron(np.eye(horizon), np.asarray(prob.r, dtype=float))
        self.h = 2.0 * (s.T @ qbar @ s + rbar)
        self.g_map = 2.0 * (s.T @ qbar @ f)
        self.lo = np.tile(prob.v_lo, horizon)
        self.hi = np.tile(prob.v_hi, horizon)
        self.horizon = horizon
        self.m = m
        self.prob = prob
        # Fixed step 1/L with L the largest Hessian eigenvalue (power iteration).
        self.step = 1.0 / max(_power_lambda_max(self.h), 1e-300)

    def solve(self, z0, v_warm=None):
        g = self.g_map @ np.asarray(z0, dtype=float)
        v0 = np.zeros(self.horizon * self.m) if v_warm is None else v_warm.ravel()
        v, kkt, iters, converged = backend.pgd_box_qp(
            self.h, g, self.lo, self.hi, v0, self.step, self.prob.tol, self.prob.max_iter
        )
        if not converged:
            raise ConvergenceError(
                f"projected gradient hit {self.prob.max_iter} iterations, "
                f"KKT residual {kkt:.3e}"
            )
        return v.reshape(self.horizon, self.m), kkt, iters


def _power_lambda_max(h: np.ndarray, iters: int = 50) -> float:
    v = np.ones(h.shape[0]) / np.sqrt(h.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = h @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = norm
    return 1.02 * lam  # small safety margin keeps the step below 1/L


def mpc_plan(model: LiftedModel, z0, prob: MpcProblem):
    """Solve the condensed QP from the lifted state z0.

    Returns (V, Z, kkt) where V is (L, m), Z stacks the planned lifted
    states z_1..z_L, and kkt is the gradient-map residual at the solution.
    """
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (model.lift_dim,):
        raise DimensionError(f"z0 shape {z0.shape} != ({model.lift_dim},)")
    qp = _CondensedQp(model, prob)
    v, kkt, _ = qp.solve(z0)
    z_plan = np.empty((prob.horizon, model.lift_dim))
    z = z0
    for t in range(prob.horizon):
        z = model.a @ z + model.b @ v[t]
        z_plan[t] = z
    return v, z_plan, kkt


def plan_cost(model: LiftedModel, z0, v, prob: MpcProblem) -> float:
    """Objective value of a candidate control sequence (for tests and export)."""
    qz = state_weight(model, prob.q)
    r = np.asarray(prob.r, dtype=float)
    z = np.asarray(z0, dtype=float)
    cost = float(z @ qz @ z)
    for t in range(prob.horizon):
        cost += float(v[t] @ r @ v[t])
        z = model.a @ z + model.b @ v[t]
        cost += float(z @ qz @ z)
    return cost


def make_policy(model: LiftedModel, law, control_lo, control_hi):
    """Wrap an LqrLaw or MpcProblem as a policy mapping observations to controls.

    MPC is receding-horizon: the QP is re-solved each call (warm-started
    from the previous plan) and only the first control is applied.
    """
    lo = np.asarray(control_lo, dtype=float)
    hi = np.asarray(control_hi, dtype=float)
    if isinstance(law, LqrLaw):
        def policy(obs):
            v = -law.k @ lift(model, obs)
            return np.clip(model.u0 + v, lo, hi)

        return policy
    if isinstance(law, MpcProblem):
        qp = _CondensedQp(model, law)
        warm = {"v": None}

        def policy(obs):
            z0 = lift(model, obs)
            v, _, _ = qp.solve(z0, warm["v"])
            # shift the plan one step for the next warm start
            warm["v"] = np.vstack([v[1:], v[-1:]])
            return np.clip(model.u0 + v[0], lo, hi)

        return policy
    raise TypeError(f"law must be LqrLaw or MpcProblem, got {type(law).__name__}")


def export_plan(path, model: LiftedModel, z0, v, prob: MpcProblem) -> None:
    """CSV of a planned trajectory: t,z...,v...,u...,cost (cost = stage cost at t)."""
    qz = state_weight(model, prob.q)
    r = np.asarray(prob.r, dtype=float)
    n_lift, m = model.b.shape
    header = (
        ["t"]
        + [f"z{i}" for i in range(n_lift)]
        + [f"v{i}" for i in range(m)]
        + [f"u{i}" for i in range(m)]
        + ["cost"]
    )
    z = np.asarray(z0, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(v.shape[0]):
            stage = float(z @ qz @ z) + float(v[t] @ r @ v[t])
            row = [str(t)]
            row += [repr(float(x)) for x in z]
            row += [repr(float(x)) for x in v[t]]
            row += [repr(float(x)) for x in (model.u0 + v[t])]
            row.append(repr(stage))
            w.writerow(row)
            z = model.a @ z + model.b @ v[t]
