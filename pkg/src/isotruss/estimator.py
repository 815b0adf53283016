"""Closed-loop state estimation from roller encoders.

Encoder readings are finite-differenced into roller-rate estimates, mapped
through the forward-kinematics Jacobian, and integrated with substepped Euler.
The same integrator propagates the simulated plant's ground truth and the
barrier's one-step lookahead, so predicted and realized configurations agree
to integration accuracy.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import truss
from .errors import NonmonotonicTime, SingularAugmentedMatrix
from .truss import TrussTopology, as_flat

DEFAULT_SUBSTEPS = 10


@dataclass
class EncoderFrame:
    """One encoder sample: roller tube positions (m) at a timestamp (s)."""

    time: float
    d_real: np.ndarray

    def __post_init__(self):
        self.d_real = np.asarray(self.d_real, dtype=float).ravel()
        if not np.all(np.isfinite(self.d_real)):
            raise ValueError("encoder frame contains non-finite values")


def estimate_ddot(prev: EncoderFrame, curr: EncoderFrame) -> np.ndarray:
    """Raw roller-rate estimate by finite differencing two frames."""
    dt = curr.time - prev.time
    if dt <= 0:
        raise NonmonotonicTime(
            f"encoder frames out of order: {prev.time} -> {curr.time}"
        )
    return (curr.d_real - prev.d_real) / dt


class SlidingFilter:
    """Mean of the last ``window`` raw rate estimates (low-pass for noisy encoders)."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = int(window)
        self._ring: deque[np.ndarray] = deque(maxlen=self.window)

    def update(self, raw: np.ndarray) -> np.ndarray:
        self._ring.append(np.asarray(raw, dtype=float).copy())
        return np.mean(self._ring, axis=0)

    def reset(self):
        self._ring.clear()


def forward_jacobian(topo: TrussTopology, x, cond_limit: float = 1e12) -> np.ndarray:
    """Map roller rates to vertex velocities at configuration ``x``.

    Solves the rigidity rows augmented with the fixed-DOF selector against the
    actuation transfer (zero rows for the fixed DOFs), so the returned Jacobian
    J satisfies ``R @ J = B.T`` and annihilates the fixed DOFs. Raises
    SingularAugmentedMatrix when the augmented system loses rank, which signals
    rigidity loss or an ill-chosen anchor pattern.
    """
    xf = as_flat(x)
    R = truss.rigidity_matrix(topo, xf)
    M = np.vstack([R, topo._A_fixed])
    if M.shape[0] != M.shape[1]:
        raise SingularAugmentedMatrix(
            f"augmented matrix is {M.shape[0]}x{M.shape[1]}, expected square"
        )
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= sv[0] / cond_limit:
        raise SingularAugmentedMatrix(
            f"augmented matrix nearly singular (sigma_min={sv[-1]:.3e})"
        )
    rhs = np.vstack([topo._BT, np.zeros((topo._A_fixed.shape[0], topo.roller_count))])
    return np.linalg.solve(M, rhs)


def integrate_positions(
    topo: TrussTopology,
    x,
    ddot,
    dt: float,
    substeps: int = DEFAULT_SUBSTEPS,
) -> np.ndarray:
    """Advance a configuration under constant roller rates.

    Each substep solves the augmented forward kinematics at the current pose,
    takes an Euler step, then removes the second-order edge-length drift with
    one linear correction toward the exact transferred lengths. The correction
    keeps every triangle's perimeter constant to near machine precision, which
    the plain Euler substep alone does not.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    xf = as_flat(x).copy()
    dvec = np.asarray(ddot, dtype=float).ravel()
    if not np.any(dvec):
        return xf
    delta = dt / substeps
    edge_rate = topo._BT @ dvec
    length_step = delta * edge_rate
    n_edges = topo.edge_count
    n_fixed = topo._A_fixed.shape[0]
    M = np.empty((n_edges + n_fixed, topo.dof_count))
    M[n_edges:] = topo._A_fixed
    rhs = np.concatenate([edge_rate, np.zeros(n_fixed)])
    err_rhs = np.zeros(n_edges + n_fixed)
    fixed_cols = topo._fixed_cols
    fixed_vals = xf[fixed_cols].copy()

    lengths, R = truss.lengths_and_rigidity(topo, xf)
    for _ in range(substeps):
        M[:n_edges] = R
        try:
            v = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularAugmentedMatrix(str(exc), last_state=xf) from exc
        if not np.all(np.isfinite(v)) or np.abs(v).max() > 1e6 * (np.abs(dvec).max() + 1e-12):
            raise SingularAugmentedMatrix(
                "forward kinematics blew up mid-integration", last_state=xf
            )
        step_norm = delta * np.linalg.norm(v)
        x_new = xf + delta * v
        target = lengths + length_step
        # Newton-correct toward the exact transferred edge lengths; with the
        # rigidity matrix refreshed at the stepped pose one pass leaves a
        # second-order residual, far below the per-step drift budget
        lengths, R = truss.lengths_and_rigidity(topo, x_new)
        err = lengths - target
        if np.abs(err).max() > 10.0 * np.abs(length_step).max() + 1e-9:
            # the linearization collapsed: the realized length change is far
            # from the commanded transfer, a singularity sits inside the step
            raise SingularAugmentedMatrix(
                "edge-length transfer diverged mid-integration", last_state=xf
            )
        if np.abs(err).max() >= 1e-12:
            M[:n_edges] = R
            err_rhs[:n_edges] = err
            try:
                corr = np.linalg.solve(M, err_rhs)
            except np.linalg.LinAlgError as exc:
                raise SingularAugmentedMatrix(str(exc), last_state=xf) from exc
            if np.linalg.norm(corr) <= step_norm + 1e-15:
                x_new = x_new - corr
                lengths = target
        xf = x_new

    xf[fixed_cols] = fixed_vals
    return xf


@dataclass
class EstimatorState:
    """Configuration estimate plus the encoder bookkeeping that feeds it."""

    topo: TrussTopology
    x_est: np.ndarray
    time: float = 0.0
    substeps: int = DEFAULT_SUBSTEPS
    filter: SlidingFilter | None = None
    last_frame: EncoderFrame | None = None
    _fixed_vals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.x_est = as_flat(self.x_est).copy()
        self._fixed_vals = self.x_est[self.topo._fixed_cols].copy()

    def copy(self) -> "EstimatorState":
        st = EstimatorState(
            topo=self.topo,
            x_est=self.x_est.copy(),
            time=self.time,
            substeps=self.substeps,
            filter=self.filter,
            last_frame=self.last_frame,
        )
        return st

    def ingest(self, frame: EncoderFrame) -> np.ndarray | None:
        """Fold one encoder frame in; returns the rate estimate used (or None).

        The first frame only seeds the differencing. Subsequent frames update
        the configuration estimate by integrating the (optionally filtered)
        rate estimate over the frame interval.
        """
        if self.last_frame is None:
            self.last_frame = frame
            self.time = frame.time
            return None
        raw = estimate_ddot(self.last_frame, frame)
        ddot_est = self.filter.update(raw) if self.filter is not None else raw
        dt = frame.time - self.last_frame.time
        self.x_est = integrate_positions(
            self.topo, self.x_est, ddot_est, dt, self.substeps
        )
        self.x_est[self.topo._fixed_cols] = self._fixed_vals
        self.time = frame.time
        self.last_frame = frame
        return ddot_est


def integrate(state: EstimatorState, ddot_est, dt: float, substeps: int | None = None) -> EstimatorState:
    """Pure advance of an estimator state under a given roller-rate estimate."""
    out = state.copy()
    n = substeps if substeps is not None else state.substeps
    out.x_est = integrate_positions(state.topo, state.x_est, ddot_est, dt, n)
    out.x_est[state.topo._fixed_cols] = out._fixed_vals
    out.time = state.time + dt
    return out


class FailureDetector:
    """Flags rollers whose encoders do not follow commanded motion.

    A roller is declared failed after ``consecutive`` control steps in which
    the commanded displacement was meaningfully nonzero but the measured
    displacement stayed below ``ratio`` times the commanded one.
    """

    def __init__(self, n_rollers: int, ratio: float = 0.01, consecutive: int = 2,
                 min_command: float = 1e-6):
        self.ratio = float(ratio)
        self.consecutive = int(consecutive)
        self.min_command = float(min_command)
        self._strikes = np.zeros(n_rollers, dtype=int)
        self.flagged: set[int] = set()

    def update(self, delta_cmd, delta_meas) -> set[int]:
        """Feed one step's commanded and measured displacements; returns newly flagged."""
        dc = np.abs(np.asarray(delta_cmd, dtype=float).ravel())
        dm = np.abs(np.asarray(delta_meas, dtype=float).ravel())
        new: set[int] = set()
        for i in range(len(dc)):
            if dc[i] > self.min_command:
                if dm[i] < self.ratio * dc[i]:
                    self._strikes[i] += 1
                else:
                    self._strikes[i] = 0
            if self._strikes[i] >= self.consecutive and i not in self.flagged:
                self.flagged.add(i)
                new.add(i)
        return new
