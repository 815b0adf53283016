"""Dense equality-constrained QP and a small SQP loop for one smooth inequality.

The per-step program is a convex quadratic ``||R v||^2 + q.v`` over an affine
set of stacked equality rows, optionally intersected with one nonlinear
inequality (the rigidity decay bound). The equality part is solved exactly by
reduction onto the null space of the constraint rows; the inequality is
handled by successive linearization with a feasibility-first line search.
Everything is deterministic: no randomized starts, SVD-based factorizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max_iter"
STATUS_INFEASIBLE = "infeasible"

EQ_FEAS_TOL = 1e-8
INEQ_TOL = 1e-9
STEP_TOL = 1e-9
OBJ_STALL_TOL = 1e-12
MAX_ITERATIONS = 100
FD_STEP = 1e-7
SENTINEL_SLACK = -1e5  # slack values at or below this mark a blown lookahead


@dataclass
class SqpResult:
    v: np.ndarray | None
    status: str
    iterations: int
    ineq_value: float | None = None


class _AffineSet:
    """Particular solution plus orthonormal null-space basis of A v = b."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = A
        self.b = b
        if A.shape[0] == 0:
            self.v_p = np.zeros(A.shape[1])
            self.Z = np.eye(A.shape[1])
            self.consistent = True
            return
        self.v_p, *_ = np.linalg.lstsq(A, b, rcond=None)
        self.consistent = bool(
            np.max(np.abs(A @ self.v_p - b)) <= EQ_FEAS_TOL * max(1.0, np.abs(b).max())
        )
        Z = null_space(A)
        self.Z = Z if Z.size else np.zeros((A.shape[1], 0))

    def project(self, v: np.ndarray) -> np.ndarray:
        if self.Z.shape[1] == 0:
            return self.v_p.copy()
        return self.v_p + self.Z @ (self.Z.T @ (v - self.v_p))


def _minimize_on_affine(R: np.ndarray, q: np.ndarray, aff: _AffineSet) -> np.ndarray:
    """Exact minimizer of ||R v||^2 + q.v over the affine set."""
    if aff.Z.shape[1] == 0:
        return aff.v_p.copy()
    RZ = R @ aff.Z
    H = 2.0 * RZ.T @ RZ
    g = aff.Z.T @ (2.0 * (R.T @ (R @ aff.v_p)) + q)
    y, *_ = np.linalg.lstsq(H, -g, rcond=None)
    return aff.v_p + aff.Z @ y


def solve_equality_qp(R: np.ndarray, q: np.ndarray, A: np.ndarray, b: np.ndarray) -> SqpResult:
    """min ||R v||^2 + q.v subject to A v = b (no inequality)."""
    aff = _AffineSet(A, b)
    if not aff.consistent:
        return SqpResult(v=None, status=STATUS_INFEASIBLE, iterations=0)
    v = _minimize_on_affine(R, q, aff)
    return SqpResult(v=v, status=STATUS_OPTIMAL, iterations=1)


def _fd_gradient(g_fn, v: np.ndarray, g0: float) -> np.ndarray:
    grad = np.zeros_like(v)
    for i in range(v.shape[0]):
        vp = v.copy()
        vp[i] += FD_STEP
        grad[i] = (g_fn(vp) - g0) / FD_STEP
    return grad


def solve_barrier_sqp(
    R: np.ndarray,
    q: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    g_fn,
    v0: np.ndarray | None = None,
    max_iter: int = MAX_ITERATIONS,
    grad_fn=None,
) -> SqpResult:
    """min ||R v||^2 + q.v subject to A v = b and g(v) >= 0.

    ``g_fn`` is the scalar decay-bound slack; its gradient comes from
    ``grad_fn`` when provided and forward finite differences otherwise. Each
    iteration solves the equality QP with the linearized inequality appended
    when active, then backtracks along the step with a feasibility-first
    acceptance rule (restore g >= 0 before trading it against objective
    decrease). Declares infeasibility when the slack is negative and no
    first-order direction inside the affine set can raise it.
    """
    aff = _AffineSet(A, b)
    if not aff.consistent:
        return SqpResult(v=None, status=STATUS_INFEASIBLE, iterations=0)

    def f(v):
        Rv = R @ v
        return float(Rv @ Rv + q @ v)

    v_eq = _minimize_on_affine(R, q, aff)
    g_eq = g_fn(v_eq)
    if g_eq >= -INEQ_TOL:
        return SqpResult(v=v_eq, status=STATUS_OPTIMAL, iterations=1, ineq_value=g_eq)

    # start from the candidate with the most slack so the first iterate sits
    # where the barrier lookahead is informative (the equality optimum can
    # land past the rigidity cliff, where the slack saturates and is flat)
    candidates = [(g_eq, v_eq), (g_fn(aff.v_p), aff.v_p)]
    if v0 is not None:
        vw = aff.project(v0)
        candidates.append((g_fn(vw), vw))
    g_v, v = max(candidates, key=lambda c: c[0])
    v = v.copy()
    f_v = f(v)

    if g_v <= SENTINEL_SLACK:
        # every candidate start sits past the rigidity cliff; no usable
        # first-order information at this command scale
        return SqpResult(v=v, status=STATUS_INFEASIBLE, iterations=0, ineq_value=g_v)

    stalls = 0
    flat_objective = 0
    for it in range(1, max_iter + 1):
        grad = grad_fn(v) if grad_fn is not None else _fd_gradient(g_fn, v, g_v)
        gZ = grad @ aff.Z if aff.Z.shape[1] else np.zeros(0)
        grad_in_set = float(np.linalg.norm(gZ))
        if grad_in_set < 1e-14:
            # slack cannot be changed to first order inside the affine set
            if g_v >= -INEQ_TOL:
                return SqpResult(v=v, status=STATUS_OPTIMAL, iterations=it, ineq_value=g_v)
            return SqpResult(v=v, status=STATUS_INFEASIBLE, iterations=it, ineq_value=g_v)

        # subproblem: is the pure equality optimum inside the linearized slack?
        if g_v + grad @ (v_eq - v) >= 0.0:
            w = v_eq
        else:
            A_act = np.vstack([A, grad[None, :]]) if A.shape[0] else grad[None, :]
            b_act = np.concatenate([b, [grad @ v - g_v]])
            aff_act = _AffineSet(A_act, b_act)
            if not aff_act.consistent:
                if g_v >= -INEQ_TOL:
                    return SqpResult(v=v, status=STATUS_OPTIMAL, iterations=it, ineq_value=g_v)
                return SqpResult(v=v, status=STATUS_INFEASIBLE, iterations=it, ineq_value=g_v)
            w = _minimize_on_affine(R, q, aff_act)

        s = w - v
        step_size = float(np.abs(s).max())
        if step_size < STEP_TOL * (1.0 + np.abs(v).max()) and g_v >= -INEQ_TOL:
            return SqpResult(v=v, status=STATUS_OPTIMAL, iterations=it, ineq_value=g_v)

        accepted = False
        tau = 1.0
        for _ in range(10):
            v_try = v + tau * s
            g_try = g_fn(v_try)
            f_try = f(v_try)
            if g_v < -INEQ_TOL:
                ok = g_try > g_v + 1e-14  # restore feasibility first
            else:
                ok = g_try >= -INEQ_TOL and f_try < f_v - 1e-15
            if ok:
                improvement = f_v - f_try
                v, g_v, f_v = v_try, g_try, f_try
                accepted = True
                break
            tau *= 0.5

        if not accepted:
            stalls += 1
            if stalls >= 2:
                if g_v >= -INEQ_TOL:
                    return SqpResult(v=v, status=STATUS_OPTIMAL, iterations=it, ineq_value=g_v)
                return SqpResult(v=v, status=STATUS_INFEASIBLE, iterations=it, ineq_value=g_v)
        else:
            stalls = 0
            rel_step = step_size * tau / (1.0 + np.abs(v).max())
            if rel_step < STEP_TOL and g_v >= -INEQ_TOL:
                return SqpResult(v=v, status=STATUS_OPTIMAL, iterations=it, ineq_value=g_v)
            if g_v >= -INEQ_TOL:
                small = rel_step < 1e-7
                tiny_gain = improvement < OBJ_STALL_TOL * (1.0 + abs(f_v))
                flat_objective = flat_objective + 1 if (small or tiny_gain) else 0
                if flat_objective >= 2:
                    return SqpResult(v=v, status=STATUS_OPTIMAL, iterations=it, ineq_value=g_v)

    status = STATUS_MAX_ITER if g_v >= -INEQ_TOL else STATUS_INFEASIBLE
    return SqpResult(v=v, status=status, iterations=max_iter, ineq_value=g_v)
