"""Offline analyses: manipulability, workspace sweeps, failure orderings, tracking error.

Workspace sweeps march the target vertex outward along uniformly spaced rays
from the home pose, one fresh open-loop controller per ray, until the step
solver reports the direction blocked (or, in hard-cutoff mode, until the next
step would drop the rigidity margin below the floor). Everything here is pure
simulation; results are deterministic.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import barrier as barrier_mod
from . import controller as controller_mod
from . import estimator as estimator_mod
from . import solvers, truss
from .controller import ControlSpec
from .errors import DegenerateEdge, EmptyTrace, SingularAugmentedMatrix
from .truss import TrussTopology, as_flat

MODE_DTCBF = "dtcbf"
MODE_HARD = "hard"

DEFAULT_N_RAYS = 72
DEFAULT_RADIAL_STEP = 0.01
DEFAULT_MAX_RADIUS = 3.0
COARSE_FACTOR = 5
NO_GAIN_WINDOW = 25
GOAL_STEP_BUDGET = 400
RAY_STEP_BUDGET = 2500


# -- manipulability -----------------------------------------------------------


@dataclass
class ManipReport:
    """Target-vertex manipulability at one pose."""

    M: float
    condition_number: float
    ellipse_axes: tuple[float, float]
    ellipse_angle: float
    per_roller_degraded: np.ndarray


def _target_jacobian(topo: TrussTopology, x, target_vertex: int) -> np.ndarray:
    J = estimator_mod.forward_jacobian(topo, x)
    d = topo.dimension
    return J[target_vertex * d:(target_vertex + 1) * d, :].copy()


def _manip_index(Jt: np.ndarray) -> float:
    gram = Jt @ Jt.T
    det = float(np.linalg.det(gram))
    return float(np.sqrt(max(det, 0.0)))


def manipulability(
    topo: TrussTopology, x, target_vertex: int, failure_set=frozenset()
) -> ManipReport:
    """Manipulability of the target vertex, with per-roller degradation.

    The index is the square root of the Gram determinant of the target-vertex
    rows of the forward Jacobian (proportional to the motion ellipse area in
    2D). Failed rollers zero their Jacobian columns; ``per_roller_degraded``
    reports the index with each single roller additionally zeroed.
    """
    Jt = _target_jacobian(topo, x, target_vertex)
    for i in failure_set:
        Jt[:, int(i)] = 0.0
    U, s, _ = np.linalg.svd(Jt)
    angle = float(np.arctan2(U[1, 0], U[0, 0])) if topo.dimension == 2 else 0.0
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    degraded = np.zeros(topo.roller_count)
    for i in range(topo.roller_count):
        Jd = Jt.copy()
        Jd[:, i] = 0.0
        degraded[i] = _manip_index(Jd)
    return ManipReport(
        M=_manip_index(Jt),
        condition_number=cond,
        ellipse_axes=(float(s[0]), float(s[-1])),
        ellipse_angle=angle,
        per_roller_degraded=degraded,
    )


# -- workspace sweeps ---------------------------------------------------------


@dataclass
class WorkspacePolygon:
    """Per-ray maximal radial extension of the target vertex from home."""

    angles: np.ndarray
    radii: np.ndarray
    area: float
    failure_set: frozenset[int] = frozenset()
    mode: str = MODE_HARD

    def to_csv(self) -> str:
        lines = ["angle_rad,radius_m"]
        lines += [f"{a:.10g},{r:.10g}" for a, r in zip(self.angles, self.radii)]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "failure_set": sorted(self.failure_set),
            "n_rays": int(len(self.angles)),
            "area_m2": self.area,
            "max_radius_m": float(self.radii.max()) if len(self.radii) else 0.0,
        }


def polar_area(angles, radii) -> float:
    """Polygon area by the trapezoidal rule on r^2/2 over sorted angles."""
    a = np.asarray(angles, dtype=float)
    r = np.asarray(radii, dtype=float)
    order = np.argsort(a)
    a, r = a[order], r[order]
    a_wrap = np.concatenate([a, [a[0] + 2 * np.pi]])
    r_wrap = np.concatenate([r, [r[0]]])
    integrand = 0.5 * r_wrap**2
    return float(np.trapezoid(integrand, a_wrap))


class _RayState:
    """Mutable bookkeeping for one radial sweep."""

    def __init__(self, topo, x_home, spec, direction):
        d = topo.dimension
        tv = spec.target_vertex
        self.topo = topo
        self.spec = spec
        self.direction = direction
        self.p_home = x_home[tv * d:(tv + 1) * d].copy()
        self.x = x_home.copy()
        self.nominal = truss.edge_length_vector(topo, x_home)
        self.last_xdot = None
        self.extent = 0.0
        self.steps = 0

    def radial(self) -> float:
        return float((self.target() - self.p_home) @ self.direction)

    def target(self) -> np.ndarray:
        d = self.topo.dimension
        tv = self.spec.target_vertex
        return self.x[tv * d:(tv + 1) * d]


def _march(ray: _RayState, mode: str, step: float, r_max: float) -> bool:
    """Drive micro-goals spaced ``step`` apart outward; False when blocked.

    Near the rigidity cliff a full-speed control step can realize motion that
    curls away from the commanded direction (large-step curvature), so the
    commanded speed is halved whenever the executed step loses ground toward
    the goal, and recovered gradually once steps track again. Backward steps
    at the minimum scale are still accepted (they are decay-feasible and
    reconfigure the structure, which can unlock further progress); the goal is
    declared blocked when the reached extent stops improving for a window of
    accepted steps.
    """
    topo, spec = ray.topo, ray.spec
    tol = 0.5 * step
    min_scale = 2.0 ** -12
    scale = 1.0
    r_goal = (np.floor(ray.extent / step) + 1) * step
    while r_goal <= r_max + 1e-12:
        goal = ray.p_home + r_goal * ray.direction
        spec.goal_position = goal
        hit = False
        best_extent = ray.extent
        no_gain = 0
        for _ in range(GOAL_STEP_BUDGET):
            if ray.steps >= RAY_STEP_BUDGET:
                return False
            p0 = ray.target().copy()
            to_goal = goal - p0
            gap = float(np.linalg.norm(to_goal))
            e_hat = to_goal / gap if gap > 1e-12 else ray.direction
            x_next = None
            while True:
                res = controller_mod.solve_step(
                    topo, ray.x, spec, ray.nominal,
                    warm_start=ray.last_xdot, speed_scale=scale,
                )
                ray.steps += 1
                if res.status == solvers.STATUS_INFEASIBLE:
                    if spec.barrier_enabled and scale > min_scale:
                        scale *= 0.5
                        continue
                    return False
                try:
                    x_next = estimator_mod.integrate_positions(
                        topo, ray.x, res.ddot, spec.barrier.dt, spec.barrier.substeps
                    )
                except (DegenerateEdge, SingularAugmentedMatrix):
                    return False
                d = topo.dimension
                tv = spec.target_vertex
                realized = float((x_next[tv * d:(tv + 1) * d] - p0) @ e_hat)
                if realized < -1e-12 and scale > min_scale:
                    scale *= 0.5
                    continue
                break
            if mode == MODE_HARD:
                if barrier_mod.sigma_crit(topo, x_next) < spec.barrier.sigma_min:
                    return False
            ray.x = x_next
            ray.last_xdot = res.xdot
            ray.extent = max(ray.extent, ray.radial())
            scale = min(1.0, 2.0 * scale)
            dist = float(np.linalg.norm(ray.target() - goal))
            if dist <= tol:
                hit = True
                break
            if ray.extent > best_extent + 1e-6:
                best_extent = ray.extent
                no_gain = 0
            else:
                no_gain += 1
            if no_gain >= NO_GAIN_WINDOW:
                return False
        if not hit:
            return False
        r_goal += step
    return True


def _sweep_ray(
    topo: TrussTopology,
    x_home: np.ndarray,
    spec: ControlSpec,
    direction: np.ndarray,
    mode: str,
    radial_step: float,
    r_max: float,
) -> float:
    """Maximal radial extension along one direction.

    Marches goals outward in coarse increments for speed, then refines at the
    requested radial resolution once blocked; the returned radius is the
    largest radial coordinate the target actually visited.
    """
    ray = _RayState(topo, x_home, spec, direction)
    if _march(ray, mode, COARSE_FACTOR * radial_step, r_max):
        return r_max  # saturated at the sweep cap
    if _march(ray, mode, radial_step, r_max):
        return r_max
    return ray.extent


def _ray_task(args) -> float:
    topo, xf, base_spec, angle, mode, radial_step, r_max = args
    direction = np.array([np.cos(angle), np.sin(angle)])
    ray_spec = replace(base_spec, goal_position=xf[:2].copy())
    return _sweep_ray(topo, xf, ray_spec, direction, mode, radial_step, r_max)


def workspace(
    topo: TrussTopology,
    x_home,
    spec: ControlSpec,
    failure_set=frozenset(),
    n_rays: int = DEFAULT_N_RAYS,
    mode: str = MODE_HARD,
    radial_step: float = DEFAULT_RADIAL_STEP,
    r_max: float = DEFAULT_MAX_RADIUS,
    formation_gain: float = 0.0,
    sweep_substeps: int = 10,
    n_jobs: int | None = None,
) -> WorkspacePolygon:
    """Radial reachability polygon of the target vertex from the home pose.

    Sweeps zero the formation-preserving gain by default: with a pure
    edge-rate objective the step solutions scale with the commanded speed, so
    backed-off steps retrace the full-speed path slowly instead of being
    dragged toward the nominal shape, and the measured polygon reflects the
    feasible set rather than the formation tug (override via
    ``formation_gain``). The sweep's lookahead and state update share
    ``sweep_substeps``. Rays are independent; ``n_jobs=None`` uses all cores,
    and results merge deterministically by ray index.
    """
    if mode not in (MODE_DTCBF, MODE_HARD):
        raise ValueError(f"unknown workspace mode {mode!r}")
    xf = as_flat(x_home).copy()
    failure_set = frozenset(int(i) for i in failure_set)
    angles = np.linspace(0.0, 2 * np.pi, n_rays, endpoint=False)
    base_spec = replace(
        spec,
        goal_position=xf[:2].copy(),
        broken_rollers=failure_set,
        failure_aware=True,
        barrier_enabled=(mode == MODE_DTCBF),
        k_f=formation_gain,
        barrier=replace(spec.barrier, substeps=sweep_substeps),
    )
    tasks = [(topo, xf, base_spec, ang, mode, radial_step, r_max) for ang in angles]
    jobs = os.cpu_count() or 1 if n_jobs is None else max(1, n_jobs)
    if jobs > 1 and n_rays > 2:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            radii = np.array(list(pool.map(_ray_task, tasks)))
    else:
        radii = np.array([_ray_task(t) for t in tasks])
    return WorkspacePolygon(
        angles=angles,
        radii=radii,
        area=polar_area(angles, radii),
        failure_set=failure_set,
        mode=mode,
    )


def _hull_max(polys: list[WorkspacePolygon], mode: str) -> WorkspacePolygon:
    """Per-ray maximum of sweep polygons sharing one ray grid."""
    radii = np.max(np.stack([p.radii for p in polys]), axis=0)
    angles = polys[0].angles
    return WorkspacePolygon(
        angles=angles.copy(),
        radii=radii,
        area=polar_area(angles, radii),
        failure_set=frozenset(),
        mode=mode,
    )


def _clip_min(poly: WorkspacePolygon, bound: WorkspacePolygon) -> WorkspacePolygon:
    """Per-ray minimum against an enclosing polygon (still a valid lower bound)."""
    radii = np.minimum(poly.radii, bound.radii)
    return WorkspacePolygon(
        angles=poly.angles.copy(),
        radii=radii,
        area=polar_area(poly.angles, radii),
        failure_set=poly.failure_set,
        mode=poly.mode,
    )


@dataclass
class DegradationReport:
    """Workspace retention under each single-roller failure.

    ``nominal`` is the per-ray maximum over the unconstrained sweep and every
    single-failure sweep: each of those is a strategy the healthy robot could
    follow (it may simply hold a roller still), so the hull is a tighter and
    still-sound lower bound of the true nominal workspace. Sweeps are greedy
    single paths and individually under-measure it in direction-dependent
    ways; comparing failures against the hull keeps the retention honest and
    the nesting exact.
    """

    nominal: WorkspacePolygon
    nominal_sweep: WorkspacePolygon
    per_failure: dict[int, WorkspacePolygon]
    retention: dict[int, float]


def workspace_degradation(
    topo: TrussTopology,
    x_home,
    spec: ControlSpec,
    n_rays: int = DEFAULT_N_RAYS,
    mode: str = MODE_HARD,
    radial_step: float = DEFAULT_RADIAL_STEP,
    r_max: float = 2.0,
) -> DegradationReport:
    """Single-failure workspace retention study over all rollers."""
    nominal_sweep = workspace(
        topo, x_home, spec, frozenset(), n_rays, mode, radial_step, r_max
    )
    per_failure = {
        r: workspace(topo, x_home, spec, frozenset({r}), n_rays, mode, radial_step, r_max)
        for r in range(topo.roller_count)
    }
    nominal = _hull_max([nominal_sweep, *per_failure.values()], mode)
    retention = {r: p.area / nominal.area for r, p in per_failure.items()}
    return DegradationReport(
        nominal=nominal,
        nominal_sweep=nominal_sweep,
        per_failure=per_failure,
        retention=retention,
    )


@dataclass
class GreedyReport:
    """Failure order maximizing remaining workspace at each stage."""

    order: list[int]
    areas: list[float]
    nominal_area: float


def greedy_failure_order(
    topo: TrussTopology,
    x_home,
    spec: ControlSpec,
    n_rays: int = DEFAULT_N_RAYS,
    mode: str = MODE_HARD,
    radial_step: float = DEFAULT_RADIAL_STEP,
    r_max: float = 2.0,
) -> GreedyReport:
    """Order rollers by failing, at each stage, the least damaging one.

    Ties (equal remaining area) break toward the lowest roller index. Each
    stage's candidate polygons are clipped per ray against the previous
    stage's polygon: the true workspaces nest as failures accumulate, so the
    clip tightens the greedy single-path sweeps into monotone, still-sound
    lower bounds.
    """
    stage_bound = workspace(
        topo, x_home, spec, frozenset(), n_rays, mode, radial_step, r_max
    )
    nominal_area = stage_bound.area
    failed: set[int] = set()
    order: list[int] = []
    areas: list[float] = []
    remaining = list(range(topo.roller_count))
    while remaining:
        best_roller = None
        best_poly = None
        best_area = -1.0
        for r in remaining:
            poly = workspace(
                topo, x_home, spec, frozenset(failed | {r}), n_rays, mode,
                radial_step, r_max,
            )
            poly = _clip_min(poly, stage_bound)
            if poly.area > best_area + 1e-12:
                best_area = poly.area
                best_roller = r
                best_poly = poly
        order.append(best_roller)
        areas.append(best_area)
        failed.add(best_roller)
        remaining.remove(best_roller)
        stage_bound = best_poly
    return GreedyReport(order=order, areas=areas, nominal_area=nominal_area)


@dataclass
class WorkspaceComparison:
    """Decay-bound sweep versus hard rigidity cutoff on the same scenario."""

    dtcbf: WorkspacePolygon
    hard: WorkspacePolygon
    ratio: float


def dtcbf_workspace_comparison(
    topo: TrussTopology,
    x_home,
    spec: ControlSpec,
    failure_set=frozenset(),
    n_rays: int = DEFAULT_N_RAYS,
    radial_step: float = DEFAULT_RADIAL_STEP,
) -> WorkspaceComparison:
    hard = workspace(topo, x_home, spec, failure_set, n_rays, MODE_HARD, radial_step)
    soft = workspace(topo, x_home, spec, failure_set, n_rays, MODE_DTCBF, radial_step)
    ratio = soft.area / hard.area if hard.area > 0 else float("inf")
    return WorkspaceComparison(dtcbf=soft, hard=hard, ratio=ratio)


# -- trajectory error ---------------------------------------------------------


@dataclass
class Trace:
    """Timestamped positions of one point (usually the target vertex)."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        if len(self.times) != len(self.points):
            raise ValueError("times and points must have equal length")


def rmse(actual: Trace, reference: Trace) -> float:
    """Root mean square position error after resampling to shared timestamps.

    Both traces are linearly interpolated onto the union of their timestamps
    restricted to the overlapping interval, which makes the metric symmetric.
    """
    if len(actual.times) == 0 or len(reference.times) == 0:
        raise EmptyTrace("cannot compare empty traces")
    t0 = max(actual.times[0], reference.times[0])
    t1 = min(actual.times[-1], reference.times[-1])
    if t1 < t0:
        raise EmptyTrace("traces do not overlap in time")
    grid = np.union1d(actual.times, reference.times)
    grid = grid[(grid >= t0) & (grid <= t1)]
    if len(grid) == 0:
        raise EmptyTrace("no common samples")

    def resample(tr: Trace) -> np.ndarray:
        cols = [np.interp(grid, tr.times, tr.points[:, j]) for j in range(tr.points.shape[1])]
        return np.stack(cols, axis=1)

    pa = resample(actual)
    pr = resample(reference)
    err2 = np.sum((pa - pr) ** 2, axis=1)
    return float(np.sqrt(np.mean(err2)))
