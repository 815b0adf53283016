"""Rigidity barrier: margin above structural singularity and its one-step decay bound.

The rigidity matrix of an infinitesimally rigid planar truss has exactly three
zero singular values (the rigid-body modes). The next one up measures how far
the structure is from losing rigidity; the barrier value is that margin minus a
safety floor. The controller enforces, in discrete time, that the margin at
the predicted next configuration decays no faster than a fixed fraction per
step, which keeps the safe set forward invariant as long as it starts inside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import estimator, truss
from .errors import DegenerateEdge, InitializationUnsafe, SingularAugmentedMatrix
from .truss import TrussTopology, as_flat

DEFAULT_SIGMA_MIN = 0.005
DEFAULT_ALPHA = 0.2
DEFAULT_DT = 0.5

# states with h within this of zero count as on the boundary, not unsafe;
# matches the solver-level constraint tolerance
INIT_TOL = 1e-6


@dataclass
class BarrierParams:
    """Safety margin, per-step decay fraction, control period, and lookahead substeps."""

    sigma_min: float = DEFAULT_SIGMA_MIN
    alpha: float = DEFAULT_ALPHA
    dt: float = DEFAULT_DT
    substeps: int = estimator.DEFAULT_SUBSTEPS

    def __post_init__(self):
        if not self.sigma_min > 0:
            raise ValueError("sigma_min must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


@dataclass
class BarrierEval:
    """Barrier value with the full rigidity spectrum for diagnostics."""

    sigma_crit: float
    h: float
    singular_values: np.ndarray = field(repr=False)


def rigidity_spectrum(topo: TrussTopology, x) -> np.ndarray:
    """All singular values of the rigidity map over the full DOF space, descending.

    The spectrum has one entry per degree of freedom; when the truss has fewer
    edges than DOFs the tail entries are structural zeros (the rank of the map
    cannot exceed the edge count).
    """
    R = truss.rigidity_matrix(topo, x)
    sv = np.linalg.svd(R, compute_uv=False)
    pad = topo.dof_count - sv.shape[0]
    if pad > 0:
        sv = np.concatenate([sv, np.zeros(pad)])
    return sv


def sigma_crit(topo: TrussTopology, x) -> float:
    """Smallest singular value above the rigid-body null space.

    In d dimensions the d*(d+1)/2 rigid-body modes contribute exact zeros, so
    this is the (d*(d+1)/2 + 1)-th smallest entry of the spectrum (the 4th in
    2D). It vanishes exactly when the structure can flex without changing any
    edge length.
    """
    sv = rigidity_spectrum(topo, x)
    n_rigid = topo.dimension * (topo.dimension + 1) // 2
    ascending = sv[::-1]
    return float(ascending[n_rigid])


def barrier(topo: TrussTopology, x, params: BarrierParams) -> BarrierEval:
    """Barrier value h = rigidity margin minus the safety floor."""
    sv = rigidity_spectrum(topo, x)
    n_rigid = topo.dimension * (topo.dimension + 1) // 2
    crit = float(sv[::-1][n_rigid])
    return BarrierEval(sigma_crit=crit, h=crit - params.sigma_min, singular_values=sv)


def predict_configuration(
    topo: TrussTopology, x, xdot, dt: float, substeps: int
) -> np.ndarray:
    """One-control-step lookahead of a vertex-velocity command.

    The velocity is projected onto realizable roller rates and integrated with
    the same substepped scheme that propagates the open-loop estimate and the
    plant, so the prediction and the applied state coincide.
    """
    xf = as_flat(x)
    R = truss.rigidity_matrix(topo, xf)
    ddot = truss.project_to_roller_rates(topo, R, xdot)
    return estimator.integrate_positions(topo, xf, ddot, dt, substeps)


def dtcbf_residual(topo: TrussTopology, x, xdot, params: BarrierParams) -> float:
    """Decay-bound slack of one velocity command; the step is safe iff >= 0.

    Returns ``h(next) - (1 - alpha) * h(now)`` where ``next`` is the predicted
    configuration after ``dt``. Standing still always yields ``alpha * h >= 0``.
    Raises InitializationUnsafe when the current state is already outside the
    safe set; control must not start there.
    """
    h_now = barrier(topo, x, params).h
    if h_now < -INIT_TOL:
        raise InitializationUnsafe(
            f"barrier value {h_now:.3e} is negative at the current state"
        )
    h_now = max(h_now, 0.0)
    x_next = predict_configuration(topo, x, xdot, params.dt, params.substeps)
    h_next = barrier(topo, x_next, params).h
    return h_next - (1.0 - params.alpha) * h_now


def sigma_crit_with_gradient(topo: TrussTopology, x) -> tuple[float, np.ndarray]:
    """Rigidity margin and its exact gradient w.r.t. vertex positions.

    Uses the standard singular-value derivative: with singular triplet
    (u, sigma, w), d sigma = u' (dR) w, and the rows of R depend on positions
    through the edge unit vectors, whose Jacobian is the normalized projector
    off the edge direction.
    """
    xf = as_flat(x)
    lengths, R = truss.lengths_and_rigidity(topo, xf)
    U, s, Vt = np.linalg.svd(R, full_matrices=False)
    # smallest computed singular value is the margin; padding zeros (when the
    # DOF count exceeds the edge count) fill the rigid-body slots below it
    n_rigid = topo.dimension * (topo.dimension + 1) // 2
    pad = topo.dof_count - s.shape[0]
    k = s.shape[0] - 1 - max(0, n_rigid - pad)
    sigma = float(s[k])
    u = U[:, k]
    w = Vt[k, :]

    d = topo.dimension
    pts = xf.reshape(topo.vertex_count, d)
    grad = np.zeros_like(xf)
    for e, (i, j) in enumerate(topo.edges):
        diff = pts[i] - pts[j]
        L = lengths[e]
        ue = diff / L
        wrel = w[i * d:(i + 1) * d] - w[j * d:(j + 1) * d]
        # derivative of the row contribution u[e] * ue . wrel through ue
        vec = (u[e] / L) * (wrel - ue * (ue @ wrel))
        grad[i * d:(i + 1) * d] += vec
        grad[j * d:(j + 1) * d] -= vec
    return sigma, grad


class DecaySlack:
    """Decay-bound slack g(xdot) of one control step, with exact gradients.

    The lookahead is the same length-projecting integrator that propagates the
    state, so its derivative w.r.t. the commanded velocity collapses (implicit
    function theorem on the length root) to dt * J evaluated at the predicted
    pose, composed with the velocity-to-roller-rate projection at the current
    pose. Lookaheads that cross a degenerate or singular pose report a large
    negative slack so line searches back off smoothly.
    """

    def __init__(self, topo: TrussTopology, x, params: BarrierParams):
        h_now = barrier(topo, x, params).h
        if h_now < -INIT_TOL:
            raise InitializationUnsafe(
                f"barrier value {h_now:.3e} is negative at the current state"
            )
        self.topo = topo
        self.params = params
        self.h_now = max(h_now, 0.0)
        self.x = as_flat(x).copy()
        self.floor = 1.0 - params.alpha
        self._R0 = truss.rigidity_matrix(topo, self.x)
        self._PR0 = topo._BT_pinv @ self._R0
        self._last: tuple[bytes, np.ndarray] | None = None

    def _predict(self, v: np.ndarray) -> np.ndarray:
        key = v.tobytes()
        if self._last is not None and self._last[0] == key:
            return self._last[1]
        ddot = self._PR0 @ v
        x_next = estimator.integrate_positions(
            self.topo, self.x, ddot, self.params.dt, self.params.substeps
        )
        self._last = (key, x_next)
        return x_next

    def __call__(self, xdot) -> float:
        v = np.asarray(xdot, dtype=float).ravel()
        try:
            x_next = self._predict(v)
            h_next = barrier(self.topo, x_next, self.params).h
        except (DegenerateEdge, SingularAugmentedMatrix):
            return -1e6
        return h_next - self.floor * self.h_now

    def gradient(self, xdot) -> np.ndarray:
        topo = self.topo
        v = np.asarray(xdot, dtype=float).ravel()
        try:
            x_next = self._predict(v)
        except (DegenerateEdge, SingularAugmentedMatrix):
            return np.zeros_like(v)
        _, grad_x = sigma_crit_with_gradient(topo, x_next)
        R_next = truss.rigidity_matrix(topo, x_next)
        M = np.vstack([R_next, topo._A_fixed])
        z = np.linalg.solve(M.T, grad_x)
        grad_ddot = self.params.dt * (topo._B @ z[: topo.edge_count])
        return self._PR0.T @ grad_ddot


def decay_slack_function(topo: TrussTopology, x, params: BarrierParams):
    """Closure form of DecaySlack: returns (g, h_now)."""
    slack = DecaySlack(topo, x, params)
    return slack, slack.h_now
