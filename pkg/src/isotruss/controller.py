"""Per-step constrained velocity optimization and the open/closed-loop steppers.

At every control step the solver picks vertex velocities minimizing edge-rate
magnitude plus a formation-preserving bias, subject to: the target vertex
moving at the commanded velocity, anchored DOFs staying put, every triangle's
perimeter rate vanishing, failed rollers contributing zero rate (when the
controller is failure aware), and, when enabled, the rigidity decay bound.
The optimal velocities are converted to roller commands through the actuation
pseudo-inverse.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import barrier as barrier_mod
from . import estimator as estimator_mod
from . import solvers, truss
from .barrier import BarrierParams
from .errors import UnknownVertex
from .estimator import EncoderFrame, EstimatorState, FailureDetector, SlidingFilter
from .truss import TrussTopology, as_flat

MODE_OPEN_LOOP = "open_loop"
MODE_CLOSED_LOOP = "closed_loop"

EQ_RESIDUAL_TOL = 1e-6
BARRIER_RESIDUAL_TOL = 1e-6
DEFAULT_SPEED_LIMIT = 0.1
DEFAULT_K_F = 0.1
DEFAULT_BACKOFF_HALVINGS = 12


@dataclass
class ControlSpec:
    """Everything the per-step solve needs besides the configuration."""

    target_vertex: int
    goal_position: np.ndarray
    speed_limit: float = DEFAULT_SPEED_LIMIT
    k_f: float = DEFAULT_K_F
    broken_rollers: frozenset[int] = frozenset()
    barrier: BarrierParams = field(default_factory=BarrierParams)
    barrier_enabled: bool = False
    mode: str = MODE_OPEN_LOOP
    failure_aware: bool = True

    def __post_init__(self):
        self.goal_position = np.asarray(self.goal_position, dtype=float).ravel()
        self.broken_rollers = frozenset(int(i) for i in self.broken_rollers)
        if self.speed_limit <= 0:
            raise ValueError("speed_limit must be positive")
        if self.mode not in (MODE_OPEN_LOOP, MODE_CLOSED_LOOP):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class SolveResult:
    """Outcome of one constrained solve."""

    xdot: np.ndarray
    ddot: np.ndarray
    objective: float
    status: str
    solve_time: float
    constraint_residuals: dict[str, float]
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status in (solvers.STATUS_OPTIMAL, solvers.STATUS_MAX_ITER)


def objective(topo: TrussTopology, x, xdot, nominal_lengths, k_f: float) -> float:
    """Edge-rate magnitude plus formation bias: ||R v||^2 + k_f (L - L0).(R v)."""
    R = truss.rigidity_matrix(topo, x)
    v = np.asarray(xdot, dtype=float).ravel()
    rates = R @ v
    dev = truss.edge_length_vector(topo, x) - np.asarray(nominal_lengths, dtype=float)
    return float(rates @ rates + k_f * (dev @ rates))


def build_b_move(x, spec: ControlSpec) -> np.ndarray:
    """Commanded target-vertex velocity from the positional error.

    The error divided by the control period, saturated at the speed limit so a
    distant goal does not command an arbitrarily fast step.
    """
    xf = as_flat(x)
    d = spec.goal_position.shape[0]
    pos = xf[spec.target_vertex * d: (spec.target_vertex + 1) * d]
    e = spec.goal_position - pos
    v = e / spec.barrier.dt
    speed = float(np.linalg.norm(v))
    if speed > spec.speed_limit:
        v = spec.speed_limit * e / np.linalg.norm(e)
    return v


def _validate_target(topo: TrussTopology, spec: ControlSpec):
    if not (0 <= spec.target_vertex < topo.vertex_count):
        raise UnknownVertex(f"target vertex {spec.target_vertex} out of range")
    fixed_axes = sum(1 for v, _ in topo.fixed_dofs if v == spec.target_vertex)
    if fixed_axes >= topo.dimension:
        raise ValueError("target vertex is fully anchored and cannot move")


def solve_step(
    topo: TrussTopology,
    x,
    spec: ControlSpec,
    nominal_lengths=None,
    warm_start=None,
    speed_scale: float = 1.0,
) -> SolveResult:
    """Solve one control step at configuration ``x``.

    ``speed_scale`` shrinks the commanded target velocity; callers use it to
    back off when the full-speed step is infeasible under the decay bound.
    """
    _validate_target(topo, spec)
    xf = as_flat(x)
    t0 = _time.perf_counter()

    if nominal_lengths is None:
        nominal_lengths = truss.edge_length_vector(topo, xf)
    R = truss.rigidity_matrix(topo, xf)
    dev = truss.edge_length_vector(topo, xf) - np.asarray(nominal_lengths, dtype=float)
    q = spec.k_f * (R.T @ dev)

    b_move = build_b_move(xf, spec) * speed_scale
    broken = spec.broken_rollers if spec.failure_aware else frozenset()
    cs = truss.constraint_rows(topo, xf, spec.target_vertex, b_move, broken)
    A, b = cs.stacked()

    g_value = None
    if spec.barrier_enabled:
        slack = barrier_mod.DecaySlack(topo, xf, spec.barrier)
        res = solvers.solve_barrier_sqp(
            R, q, A, b, slack, v0=warm_start, grad_fn=slack.gradient
        )
        if res.v is not None and res.status != solvers.STATUS_INFEASIBLE:
            g_value = float(slack(res.v))
    else:
        res = solvers.solve_equality_qp(R, q, A, b)

    elapsed = _time.perf_counter() - t0

    if res.v is None or res.status == solvers.STATUS_INFEASIBLE:
        zeros_v = np.zeros(topo.dof_count)
        zeros_d = np.zeros(topo.roller_count)
        return SolveResult(
            xdot=zeros_v,
            ddot=zeros_d,
            objective=0.0,
            status=solvers.STATUS_INFEASIBLE,
            solve_time=elapsed,
            constraint_residuals={},
            iterations=res.iterations,
        )

    v = res.v
    ddot = truss.project_to_roller_rates(topo, R, v)
    if spec.failure_aware:
        for i in spec.broken_rollers:
            ddot[i] = 0.0

    residuals = cs.residuals(v)
    if g_value is not None:
        residuals["barrier"] = float(g_value)

    status = res.status
    if status == solvers.STATUS_OPTIMAL:
        eq_worst = max(residuals[k] for k in ("move", "fixed", "loop", "broken"))
        if eq_worst > EQ_RESIDUAL_TOL:
            status = solvers.STATUS_MAX_ITER
        if g_value is not None and g_value < -BARRIER_RESIDUAL_TOL:
            status = solvers.STATUS_MAX_ITER

    rates = R @ v
    obj = float(rates @ rates + dev @ rates * spec.k_f)
    return SolveResult(
        xdot=v,
        ddot=ddot,
        objective=obj,
        status=status,
        solve_time=elapsed,
        constraint_residuals=residuals,
        iterations=res.iterations,
    )


def solve_step_with_backoff(
    topo: TrussTopology,
    x,
    spec: ControlSpec,
    nominal_lengths=None,
    warm_start=None,
    max_halvings: int = DEFAULT_BACKOFF_HALVINGS,
) -> SolveResult:
    """Solve a step, halving the commanded speed while the decay bound is infeasible.

    Without the barrier the equalities are scale invariant, so backoff only
    helps (and is only tried) when the barrier is enabled. Returns the last
    attempt's result (infeasible when even the slowest step is blocked).
    """
    result = solve_step(topo, x, spec, nominal_lengths, warm_start)
    if result.status != solvers.STATUS_INFEASIBLE or not spec.barrier_enabled:
        return result
    scale = 0.5
    for _ in range(max_halvings):
        result = solve_step(topo, x, spec, nominal_lengths, warm_start, speed_scale=scale)
        if result.status != solvers.STATUS_INFEASIBLE:
            return result
        scale *= 0.5
    return result


class Controller:
    """Stateful per-robot control loop with open- and closed-loop stepping.

    Owns the configuration estimate. Open loop propagates it by integrating
    the commanded roller rates; closed loop propagates it from encoder frames
    through the estimator and feeds newly detected failures back into the
    constraint set (when failure aware).
    """

    def __init__(
        self,
        topo: TrussTopology,
        spec: ControlSpec,
        x0,
        nominal_lengths=None,
        estimator_substeps: int | None = None,
        filter_window: int | None = None,
        backoff_halvings: int = DEFAULT_BACKOFF_HALVINGS,
    ):
        self.topo = topo
        self.spec = spec
        self.nominal_lengths = (
            truss.edge_length_vector(topo, x0)
            if nominal_lengths is None
            else np.asarray(nominal_lengths, dtype=float).copy()
        )
        substeps = estimator_substeps if estimator_substeps is not None else spec.barrier.substeps
        self.estimator = EstimatorState(
            topo=topo,
            x_est=as_flat(x0).copy(),
            substeps=substeps,
            filter=SlidingFilter(filter_window) if filter_window else None,
        )
        self.detector = FailureDetector(topo.roller_count)
        self.backoff_halvings = backoff_halvings
        self.last_xdot: np.ndarray | None = None
        self._last_ddot_cmd: np.ndarray | None = None
        self.detected_failures: set[int] = set()

    @property
    def x_est(self) -> np.ndarray:
        return self.estimator.x_est

    def target_position(self) -> np.ndarray:
        d = self.topo.dimension
        t = self.spec.target_vertex
        return self.x_est[t * d: (t + 1) * d].copy()

    def set_goal(self, goal):
        self.spec.goal_position = np.asarray(goal, dtype=float).ravel()

    def _solve(self) -> SolveResult:
        result = solve_step_with_backoff(
            self.topo,
            self.x_est,
            self.spec,
            self.nominal_lengths,
            warm_start=self.last_xdot,
            max_halvings=self.backoff_halvings,
        )
        if result.ok:
            self.last_xdot = result.xdot.copy()
        self._last_ddot_cmd = result.ddot.copy()
        return result

    def step_open_loop(self) -> SolveResult:
        """Solve, then advance the internal estimate by the commanded rates."""
        result = self._solve()
        if result.ok and np.any(result.ddot):
            self.estimator.x_est = estimator_mod.integrate_positions(
                self.topo,
                self.estimator.x_est,
                result.ddot,
                self.spec.barrier.dt,
                self.spec.barrier.substeps,
            )
            self.estimator.x_est[self.topo._fixed_cols] = self.estimator._fixed_vals
        self.estimator.time += self.spec.barrier.dt
        return result

    def step_closed_loop(self, frame: EncoderFrame) -> SolveResult:
        """Fold encoder feedback in, run failure detection, then solve.

        A frame no newer than the last one seen (e.g. the initial seed frame
        redelivered at the first step) is ignored and the solve proceeds from
        the current estimate.
        """
        prev = self.estimator.last_frame
        if prev is not None and frame.time <= prev.time:
            return self._solve()
        if prev is not None and self._last_ddot_cmd is not None:
            delta_meas = frame.d_real - prev.d_real
            delta_cmd = self._last_ddot_cmd * (frame.time - prev.time)
            newly = self.detector.update(delta_cmd, delta_meas)
            if newly:
                self.detected_failures |= newly
                if self.spec.failure_aware:
                    self.spec.broken_rollers = frozenset(
                        set(self.spec.broken_rollers) | newly
                    )
        self.estimator.ingest(frame)
        return self._solve()
