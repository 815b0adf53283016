"""Scenario files, the lock-step simulation loop, and run-log persistence.

A scenario is a JSON document with three sections: ``geometry`` (the truss),
``control`` (target, waypoints, gains, barrier), and ``plant`` (actuation
imperfections and encoder model), plus a ``run`` section (period, step budget,
output path). Runs produce a RunLog: a header line followed by one JSON record
per control step.
"""

from __future__ import annotations

import hashlib
import json
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import barrier as barrier_mod
from . import truss
from .barrier import BarrierParams
from .controller import (
    MODE_CLOSED_LOOP,
    MODE_OPEN_LOOP,
    Controller,
    ControlSpec,
)
from .errors import SchemaError, TrussError
from .plant import Plant, PlantConfig
from .truss import TrussTopology

LOG_VERSION = 1
DEFAULT_GOAL_TOLERANCE = 0.01
DEFAULT_WAYPOINT_BUDGET = 60


@dataclass
class FailureEvent:
    roller: int
    time: float = 0.0


@dataclass
class Scenario:
    """Validated scenario: geometry, control spec inputs, plant, run settings."""

    name: str = "scenario"
    geometry_kind: str = "triforce"
    side: float = 1.0
    target_vertex: int = truss.DEFAULT_TARGET_VERTEX
    waypoints: list = field(default_factory=list)
    waypoint_frame: str = "home_relative"
    speed_limit: float = 0.1
    k_f: float = 0.1
    mode: str = MODE_OPEN_LOOP
    failure_aware: bool = True
    broken_rollers: frozenset[int] = frozenset()
    barrier_enabled: bool = False
    sigma_min: float = barrier_mod.DEFAULT_SIGMA_MIN
    alpha: float = barrier_mod.DEFAULT_ALPHA
    substeps: int = 10
    goal_tolerance: float = DEFAULT_GOAL_TOLERANCE
    waypoint_step_budget: int = DEFAULT_WAYPOINT_BUDGET
    filter_window: int = 0
    gains: list | None = None
    plant_failures: list = field(default_factory=list)
    encoder_noise_std: float = 0.0
    encoder_quantum: float = 0.0
    seed: int = 0
    dt: float = 0.5
    max_steps: int = 200
    out: str | None = None

    def barrier_params(self) -> BarrierParams:
        return BarrierParams(
            sigma_min=self.sigma_min, alpha=self.alpha, dt=self.dt, substeps=self.substeps
        )

    def control_spec(self, goal) -> ControlSpec:
        return ControlSpec(
            target_vertex=self.target_vertex,
            goal_position=goal,
            speed_limit=self.speed_limit,
            k_f=self.k_f,
            broken_rollers=self.broken_rollers,
            barrier=self.barrier_params(),
            barrier_enabled=self.barrier_enabled,
            mode=self.mode,
            failure_aware=self.failure_aware,
        )

    def plant_config(self) -> PlantConfig:
        initial = frozenset(
            ev.roller for ev in self.plant_failures if ev.time <= 0.0
        )
        return PlantConfig(
            gains=None if self.gains is None else np.asarray(self.gains, dtype=float),
            failed=initial,
            encoder_noise_std=self.encoder_noise_std,
            encoder_quantum=self.encoder_quantum,
            seed=self.seed,
        )

    def build(self) -> tuple[TrussTopology, np.ndarray]:
        if self.geometry_kind != "triforce":
            raise SchemaError([f"geometry.kind: unsupported kind {self.geometry_kind!r}"])
        return truss.triforce(self.side)

    def resolved_waypoints(self, x0: np.ndarray) -> list[np.ndarray]:
        d = 2
        home = x0[self.target_vertex * d:(self.target_vertex + 1) * d]
        pts = [np.asarray(w, dtype=float) for w in self.waypoints]
        if self.waypoint_frame == "home_relative":
            pts = [home + w for w in pts]
        return pts

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "geometry": {"kind": self.geometry_kind, "side": self.side},
            "control": {
                "target_vertex": self.target_vertex,
                "waypoints": [list(map(float, w)) for w in self.waypoints],
                "waypoint_frame": self.waypoint_frame,
                "speed_limit": self.speed_limit,
                "k_f": self.k_f,
                "mode": self.mode,
                "failure_aware": self.failure_aware,
                "broken_rollers": sorted(self.broken_rollers),
                "barrier": {
                    "enabled": self.barrier_enabled,
                    "sigma_min": self.sigma_min,
                    "alpha": self.alpha,
                    "substeps": self.substeps,
                },
                "goal_tolerance": self.goal_tolerance,
                "waypoint_step_budget": self.waypoint_step_budget,
                "filter_window": self.filter_window,
            },
            "plant": {
                "gains": self.gains,
                "failures": [
                    {"roller": ev.roller, "time": ev.time} for ev in self.plant_failures
                ],
                "encoder_noise_std": self.encoder_noise_std,
                "encoder_quantum": self.encoder_quantum,
                "seed": self.seed,
            },
            "run": {"dt": self.dt, "max_steps": self.max_steps, "out": self.out},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_json_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]


def _expect(cond, problems, path, msg):
    if not cond:
        problems.append(f"{path}: {msg}")
    return cond


def _take(d: dict, path: str, problems: list, known: set[str]) -> dict:
    unknown = set(d) - known
    for k in sorted(unknown):
        problems.append(f"{path}.{k}: unknown field")
    return d


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario JSON; raises SchemaError listing all problems."""
    problems: list[str] = []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError([f"$: invalid JSON ({exc})"]) from exc
    if not isinstance(doc, dict):
        raise SchemaError(["$: top level must be an object"])
    _take(doc, "$", problems, {"name", "geometry", "control", "plant", "run"})

    sc = Scenario()
    name = doc.get("name", "scenario")
    _expect(isinstance(name, str), problems, "name", "must be a string")
    sc.name = str(name)

    geo = doc.get("geometry", {})
    if _expect(isinstance(geo, dict), problems, "geometry", "must be an object"):
        _take(geo, "geometry", problems, {"kind", "side"})
        sc.geometry_kind = geo.get("kind", "triforce")
        _expect(sc.geometry_kind == "triforce", problems, "geometry.kind",
                f"unsupported kind {sc.geometry_kind!r}")
        side = geo.get("side", 1.0)
        if _expect(isinstance(side, (int, float)) and side > 0, problems,
                   "geometry.side", "must be a positive number"):
            sc.side = float(side)

    ctl = doc.get("control", {})
    if _expect(isinstance(ctl, dict), problems, "control", "must be an object"):
        _take(ctl, "control", problems, {
            "target_vertex", "waypoints", "waypoint_frame", "speed_limit", "k_f",
            "mode", "failure_aware", "broken_rollers", "barrier",
            "goal_tolerance", "waypoint_step_budget", "filter_window",
        })
        tv = ctl.get("target_vertex", sc.target_vertex)
        if _expect(isinstance(tv, int) and tv >= 0, problems,
                   "control.target_vertex", "must be a nonnegative integer"):
            sc.target_vertex = tv
        wps = ctl.get("waypoints", [])
        if _expect(isinstance(wps, list), problems, "control.waypoints", "must be a list"):
            out = []
            for i, w in enumerate(wps):
                ok = (isinstance(w, list) and len(w) == 2
                      and all(isinstance(c, (int, float)) and np.isfinite(c) for c in w))
                if _expect(ok, problems, f"control.waypoints[{i}]",
                           "must be a finite [x, y] pair"):
                    out.append([float(w[0]), float(w[1])])
            sc.waypoints = out
        frame = ctl.get("waypoint_frame", "home_relative")
        if _expect(frame in ("home_relative", "absolute"), problems,
                   "control.waypoint_frame", "must be 'home_relative' or 'absolute'"):
            sc.waypoint_frame = frame
        sl = ctl.get("speed_limit", sc.speed_limit)
        if _expect(isinstance(sl, (int, float)) and sl > 0, problems,
                   "control.speed_limit", "must be positive"):
            sc.speed_limit = float(sl)
        kf = ctl.get("k_f", sc.k_f)
        if _expect(isinstance(kf, (int, float)), problems, "control.k_f", "must be a number"):
            sc.k_f = float(kf)
        mode = ctl.get("mode", sc.mode)
        if _expect(mode in (MODE_OPEN_LOOP, MODE_CLOSED_LOOP), problems,
                   "control.mode", "must be 'open_loop' or 'closed_loop'"):
            sc.mode = mode
        fa = ctl.get("failure_aware", True)
        if _expect(isinstance(fa, bool), problems, "control.failure_aware", "must be a bool"):
            sc.failure_aware = fa
        br = ctl.get("broken_rollers", [])
        if _expect(isinstance(br, list) and all(isinstance(i, int) and i >= 0 for i in br),
                   problems, "control.broken_rollers", "must be a list of roller indices"):
            sc.broken_rollers = frozenset(br)
        bar = ctl.get("barrier", {})
        if _expect(isinstance(bar, dict), problems, "control.barrier", "must be an object"):
            _take(bar, "control.barrier", problems,
                  {"enabled", "sigma_min", "alpha", "substeps"})
            en = bar.get("enabled", False)
            if _expect(isinstance(en, bool), problems, "control.barrier.enabled",
                       "must be a bool"):
                sc.barrier_enabled = en
            sm = bar.get("sigma_min", sc.sigma_min)
            if _expect(isinstance(sm, (int, float)) and sm > 0, problems,
                       "control.barrier.sigma_min", "must be positive"):
                sc.sigma_min = float(sm)
            al = bar.get("alpha", sc.alpha)
            if _expect(isinstance(al, (int, float)) and 0 < al < 1, problems,
                       "control.barrier.alpha", "must lie in (0, 1)"):
                sc.alpha = float(al)
            ss = bar.get("substeps", sc.substeps)
            if _expect(isinstance(ss, int) and ss >= 1, problems,
                       "control.barrier.substeps", "must be an integer >= 1"):
                sc.substeps = ss
        gt = ctl.get("goal_tolerance", sc.goal_tolerance)
        if _expect(isinstance(gt, (int, float)) and gt >= 0, problems,
                   "control.goal_tolerance",
                   "must be nonnegative (0 advances waypoints on budget only)"):
            sc.goal_tolerance = float(gt)
        wb = ctl.get("waypoint_step_budget", sc.waypoint_step_budget)
        if _expect(isinstance(wb, int) and wb >= 1, problems,
                   "control.waypoint_step_budget", "must be an integer >= 1"):
            sc.waypoint_step_budget = wb
        fw = ctl.get("filter_window", 0)
        if _expect(isinstance(fw, int) and fw >= 0, problems,
                   "control.filter_window", "must be a nonnegative integer (0 disables)"):
            sc.filter_window = fw

    pl = doc.get("plant", {})
    if _expect(isinstance(pl, dict), problems, "plant", "must be an object"):
        _take(pl, "plant", problems, {
            "gains", "failures", "encoder_noise_std", "encoder_quantum", "seed",
        })
        gains = pl.get("gains")
        if gains is not None:
            ok = (isinstance(gains, list)
                  and all(isinstance(g, (int, float)) and g >= 0 for g in gains))
            if _expect(ok, problems, "plant.gains", "must be a list of nonnegative numbers"):
                sc.gains = [float(g) for g in gains]
        fails = pl.get("failures", [])
        if _expect(isinstance(fails, list), problems, "plant.failures", "must be a list"):
            out = []
            for i, ev in enumerate(fails):
                path = f"plant.failures[{i}]"
                if not _expect(isinstance(ev, dict), problems, path, "must be an object"):
                    continue
                _take(ev, path, problems, {"roller", "time"})
                r = ev.get("roller")
                t = ev.get("time", 0.0)
                _expect(isinstance(r, int) and r >= 0, problems, f"{path}.roller",
                        "must be a nonnegative integer")
                _expect(isinstance(t, (int, float)) and t >= 0, problems, f"{path}.time",
                        "must be a nonnegative time in seconds")
                if isinstance(r, int) and isinstance(t, (int, float)) and r >= 0 and t >= 0:
                    out.append(FailureEvent(roller=r, time=float(t)))
            sc.plant_failures = out
        ns = pl.get("encoder_noise_std", 0.0)
        if _expect(isinstance(ns, (int, float)) and ns >= 0, problems,
                   "plant.encoder_noise_std", "must be nonnegative"):
            sc.encoder_noise_std = float(ns)
        qt = pl.get("encoder_quantum", 0.0)
        if _expect(isinstance(qt, (int, float)) and qt >= 0, problems,
                   "plant.encoder_quantum", "must be nonnegative"):
            sc.encoder_quantum = float(qt)
        seed = pl.get("seed", 0)
        if _expect(isinstance(seed, int), problems, "plant.seed", "must be an integer"):
            sc.seed = seed

    run = doc.get("run", {})
    if _expect(isinstance(run, dict), problems, "run", "must be an object"):
        _take(run, "run", problems, {"dt", "max_steps", "out"})
        dt = run.get("dt", 0.5)
        if _expect(isinstance(dt, (int, float)) and dt > 0, problems, "run.dt",
                   "must be positive"):
            sc.dt = float(dt)
        ms = run.get("max_steps", 200)
        if _expect(isinstance(ms, int) and ms >= 1, problems, "run.max_steps",
                   "must be an integer >= 1"):
            sc.max_steps = ms
        out = run.get("out")
        if _expect(out is None or isinstance(out, str), problems, "run.out",
                   "must be a string path or null"):
            sc.out = out

    # cross-field checks that need the geometry
    if not problems:
        topo, _ = sc.build()
        if not (0 <= sc.target_vertex < topo.vertex_count):
            problems.append("control.target_vertex: out of range for geometry")
        for i in sorted(sc.broken_rollers):
            if not (0 <= i < topo.roller_count):
                problems.append(f"control.broken_rollers: roller {i} out of range")
        for j, ev in enumerate(sc.plant_failures):
            if not (0 <= ev.roller < topo.roller_count):
                problems.append(f"plant.failures[{j}].roller: out of range")
        if sc.gains is not None and len(sc.gains) != topo.roller_count:
            problems.append(
                f"plant.gains: expected {topo.roller_count} entries, got {len(sc.gains)}"
            )

    if problems:
        raise SchemaError(problems)
    return sc


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as f:
        return parse_scenario(f.read())


# -- run log ------------------------------------------------------------------


@dataclass
class StepRecord:
    """Telemetry for one control step."""

    k: int
    time: float
    x_est: list
    x_true: list
    d_cmd: list
    d_real: list
    h: float
    sigma_crit: float
    solve_status: str
    solve_time: float
    goal: list
    objective: float

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "time": self.time,
            "x_est": self.x_est,
            "x_true": self.x_true,
            "d_cmd": self.d_cmd,
            "d_real": self.d_real,
            "h": self.h,
            "sigma_crit": self.sigma_crit,
            "solve_status": self.solve_status,
            "solve_time": self.solve_time,
            "goal": self.goal,
            "objective": self.objective,
        }


@dataclass
class RunLog:
    """Header plus one StepRecord per control step."""

    header: dict
    records: list[StepRecord]

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header, sort_keys=True)]
        lines += [json.dumps(r.to_json_dict(), sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_jsonl())

    def min_h(self) -> float:
        return min((r.h for r in self.records), default=float("inf"))

    def target_trace(self, source: str = "x_true"):
        from .analysis import Trace

        tv = self.header["target_vertex"]
        d = self.header["dimension"]
        times = [r.time for r in self.records]
        pts = []
        for r in self.records:
            x = getattr(r, source)
            pts.append(x[tv * d:(tv + 1) * d])
        return Trace(times=np.asarray(times), points=np.asarray(pts))


def load_runlog(path: str) -> RunLog:
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(["$: empty run log"])
    header = json.loads(lines[0])
    records = [StepRecord(**json.loads(ln)) for ln in lines[1:]]
    return RunLog(header=header, records=records)


class RunAborted(TrussError):
    """A fatal module error interrupted a run; carries the partial log."""

    def __init__(self, message, runlog: RunLog, cause: Exception):
        super().__init__(message)
        self.runlog = runlog
        self.cause = cause


def run_scenario(scenario: Scenario) -> RunLog:
    """Execute the lock-step loop: solve, actuate plant, read encoders, record.

    Waypoints advance when the estimated target position is within the goal
    tolerance or the per-waypoint step budget runs out; the run ends when all
    waypoints are exhausted (or at ``max_steps``).
    """
    topo, x0 = scenario.build()
    plant = Plant(topo, x0, scenario.plant_config())
    waypoints = scenario.resolved_waypoints(x0)
    d = topo.dimension
    home_target = x0[scenario.target_vertex * d:(scenario.target_vertex + 1) * d].copy()
    first_goal = waypoints[0] if waypoints else home_target
    spec = scenario.control_spec(first_goal)
    ctrl = Controller(
        topo,
        spec,
        x0,
        estimator_substeps=scenario.substeps,
        filter_window=scenario.filter_window or None,
    )
    params = spec.barrier

    header = {
        "version": LOG_VERSION,
        "scenario": scenario.name,
        "scenario_hash": scenario.digest(),
        "created": _time.time(),
        "target_vertex": scenario.target_vertex,
        "dimension": d,
        "dt": scenario.dt,
        "mode": scenario.mode,
    }
    records: list[StepRecord] = []

    pending = sorted(
        (ev for ev in scenario.plant_failures if ev.time > 0.0),
        key=lambda ev: ev.time,
    )
    wp_index = 0
    wp_steps = 0

    try:
        frame = plant.read_encoders()
        if scenario.mode == MODE_CLOSED_LOOP:
            ctrl.estimator.ingest(frame)
        for k in range(scenario.max_steps):
            now = k * scenario.dt
            while pending and pending[0].time <= now + 1e-12:
                plant.set_failed(pending.pop(0).roller, True)

            if waypoints:
                goal = waypoints[wp_index]
                dist = float(np.linalg.norm(ctrl.target_position() - goal))
                near = scenario.goal_tolerance > 0 and dist <= scenario.goal_tolerance
                if near or wp_steps >= scenario.waypoint_step_budget:
                    wp_index += 1
                    wp_steps = 0
                    if wp_index >= len(waypoints):
                        break
                    goal = waypoints[wp_index]
                ctrl.set_goal(goal)
                wp_steps += 1

            ev = barrier_mod.barrier(topo, ctrl.x_est, params)
            if scenario.mode == MODE_CLOSED_LOOP:
                result = ctrl.step_closed_loop(frame)
            else:
                result = ctrl.step_open_loop()
            plant.apply_command(result.ddot, scenario.dt)
            frame = plant.read_encoders()

            records.append(
                StepRecord(
                    k=k,
                    time=now,
                    x_est=[float(v) for v in ctrl.x_est],
                    x_true=[float(v) for v in plant.state.x_true],
                    d_cmd=[float(v) for v in result.ddot],
                    d_real=[float(v) for v in frame.d_real],
                    h=float(ev.h),
                    sigma_crit=float(ev.sigma_crit),
                    solve_status=result.status,
                    solve_time=float(result.solve_time),
                    goal=[float(v) for v in ctrl.spec.goal_position],
                    objective=float(result.objective),
                )
            )
    except TrussError as exc:
        raise RunAborted(
            f"run aborted at step {len(records)}: {exc}",
            RunLog(header=header, records=records),
            exc,
        ) from exc

    log = RunLog(header=header, records=records)
    if scenario.out:
        log.save(scenario.out)
    return log
