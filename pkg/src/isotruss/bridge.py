"""HTTP/WebSocket bridge: live simulation stepping for the operator console.

One LiveSession owns a scenario's plant and controller and steps them on a
worker thread at the scenario's control period (scaled by ``pace``; 0 means
free-run). The web layer is read-only except for the typed POST endpoints;
every mutation routes through the controller's constrained solve on the next
step, so the console cannot bypass the safety machinery.
"""

from __future__ import annotations

import asyncio
import threading
import time as _time
from collections import deque

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, ConfigDict

from . import analysis, barrier as barrier_mod
from .controller import MODE_CLOSED_LOOP, Controller
from .errors import TrussError
from .plant import Plant
from .scenario import Scenario

STREAM_POLL_S = 0.05


class GoalRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    x: float
    y: float


class FailureRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    roller: int
    failed: bool = True


class BarrierRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    alpha: float | None = None
    sigma_min: float | None = None
    enabled: bool | None = None


class LiveSession:
    """Lock-step simulation driven on a background thread."""

    def __init__(self, scenario: Scenario, pace: float = 1.0, overlay_rays: int = 24):
        self.scenario = scenario
        self.pace = float(pace)
        self.overlay_rays = int(overlay_rays)
        self.topo, self.x0 = scenario.build()
        d = self.topo.dimension
        tv = scenario.target_vertex
        self.home_target = self.x0[tv * d:(tv + 1) * d].copy()
        waypoints = scenario.resolved_waypoints(self.x0)
        goal = waypoints[0] if waypoints else self.home_target.copy()
        self.spec = scenario.control_spec(goal)
        self.plant = Plant(self.topo, self.x0, scenario.plant_config())
        self.ctrl = Controller(
            self.topo, self.spec, self.x0,
            estimator_substeps=scenario.substeps,
            filter_window=scenario.filter_window or None,
        )
        self._frame = self.plant.read_encoders()
        if scenario.mode == MODE_CLOSED_LOOP:
            self.ctrl.estimator.ingest(self._frame)

        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.paused = False
        self.fault: str | None = None
        self.seq = 0
        self.k = 0
        self.records: deque[dict] = deque(maxlen=4096)
        self.overlays: list[dict] = []

    # -- lifecycle ---------------------------------------------------------

    def start(self):
        if self.overlay_rays > 0:
            # hard-cutoff sweep: fast and a conservative picture of the
            # reachable region (the decay bound only enlarges it)
            poly = analysis.workspace(
                self.topo, self.x0, self.scenario.control_spec(self.home_target),
                n_rays=self.overlay_rays,
                mode=analysis.MODE_HARD,
                r_max=2.0,
            )
            self.overlays.append({
                "kind": "workspace",
                "mode": poly.mode,
                "center": [float(v) for v in self.home_target],
                "angles": [float(a) for a in poly.angles],
                "radii": [float(r) for r in poly.radii],
                "area_m2": poly.area,
            })
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    def _loop(self):
        dt = self.scenario.dt
        while not self._stop.is_set():
            if self.paused or self.fault:
                _time.sleep(STREAM_POLL_S)
                continue
            t0 = _time.perf_counter()
            try:
                self.step_once()
            except TrussError as exc:
                with self._lock:
                    self.fault = str(exc)
                continue
            if self.pace > 0:
                budget = dt / self.pace - (_time.perf_counter() - t0)
                if budget > 0:
                    _time.sleep(budget)

    # -- stepping ------------------------------------------------------------

    def step_once(self) -> dict:
        with self._lock:
            ev = barrier_mod.barrier(self.topo, self.ctrl.x_est, self.spec.barrier)
            if self.scenario.mode == MODE_CLOSED_LOOP:
                result = self.ctrl.step_closed_loop(self._frame)
            else:
                result = self.ctrl.step_open_loop()
            self.plant.apply_command(result.ddot, self.scenario.dt)
            self._frame = self.plant.read_encoders()
            manip = analysis.manipulability(
                self.topo, self.plant.state.x_true, self.spec.target_vertex
            )
            record = {
                "k": self.k,
                "seq": self.seq,
                "time": self.k * self.scenario.dt,
                "x_est": [float(v) for v in self.ctrl.x_est],
                "x_true": [float(v) for v in self.plant.state.x_true],
                "d_cmd": [float(v) for v in result.ddot],
                "d_real": [float(v) for v in self._frame.d_real],
                "h": float(ev.h),
                "sigma_crit": float(ev.sigma_crit),
                "solve_status": result.status,
                "solve_time": float(result.solve_time),
                "goal": [float(v) for v in self.spec.goal_position],
                "objective": float(result.objective),
                "manip": {
                    "M": manip.M,
                    "condition_number": manip.condition_number
                    if np.isfinite(manip.condition_number) else None,
                    "axes": [manip.ellipse_axes[0], manip.ellipse_axes[1]],
                    "angle": manip.ellipse_angle,
                },
                "broken": sorted(self.spec.broken_rollers),
                "plant_failed": sorted(self.plant.failed),
                "detected": sorted(self.ctrl.detected_failures),
            }
            self.k += 1
            self.seq += 1
            self.records.append(record)
            return record

    # -- mutations -----------------------------------------------------------

    def set_goal(self, x: float, y: float):
        with self._lock:
            self.ctrl.set_goal([x, y])

    def set_failure(self, roller: int, failed: bool):
        if not (0 <= roller < self.topo.roller_count):
            raise ValueError(f"roller {roller} out of range")
        with self._lock:
            self.plant.set_failed(roller, failed)
            broken = set(self.spec.broken_rollers)
            if failed:
                broken.add(roller)
            else:
                broken.discard(roller)
                self.ctrl.detector.flagged.discard(roller)
                self.ctrl.detected_failures.discard(roller)
            self.spec.broken_rollers = frozenset(broken)

    def set_barrier(self, alpha=None, sigma_min=None, enabled=None):
        with self._lock:
            params = self.spec.barrier
            new = barrier_mod.BarrierParams(
                sigma_min=sigma_min if sigma_min is not None else params.sigma_min,
                alpha=alpha if alpha is not None else params.alpha,
                dt=params.dt,
                substeps=params.substeps,
            )
            self.spec.barrier = new
            if enabled is not None:
                self.spec.barrier_enabled = bool(enabled)

    def set_paused(self, paused: bool):
        with self._lock:
            self.paused = bool(paused)

    # -- views ---------------------------------------------------------------

    def topology_dict(self) -> dict:
        t = self.topo
        return {
            "dimension": t.dimension,
            "vertex_count": t.vertex_count,
            "edges": [list(e) for e in t.edges],
            "triangles": [list(tr) for tr in t.triangles],
            "rollers": [
                {
                    "triangle": r.triangle,
                    "edge_plus": r.edge_plus,
                    "edge_minus": r.edge_minus,
                    "vertex": t.roller_vertex(i),
                    "active": r.active,
                }
                for i, r in enumerate(t.rollers)
            ],
            "fixed_dofs": [list(fd) for fd in t.fixed_dofs],
            "home": [float(v) for v in self.x0],
            "target_vertex": self.spec.target_vertex,
        }

    def state_dict(self) -> dict:
        with self._lock:
            record = self.records[-1] if self.records else None
            return {
                "seq": self.seq,
                "paused": self.paused,
                "fault": self.fault,
                "record": record,
                "goal": [float(v) for v in self.spec.goal_position],
                "broken": sorted(self.spec.broken_rollers),
                "plant_failed": sorted(self.plant.failed),
                "barrier": {
                    "enabled": self.spec.barrier_enabled,
                    "sigma_min": self.spec.barrier.sigma_min,
                    "alpha": self.spec.barrier.alpha,
                    "dt": self.spec.barrier.dt,
                    "substeps": self.spec.barrier.substeps,
                },
                "mode": self.scenario.mode,
                "dt": self.scenario.dt,
                "topology": self.topology_dict(),
                "overlays": self.overlays,
            }


def create_app(session: LiveSession) -> FastAPI:
    app = FastAPI(title="isotruss bridge")

    @app.get("/state")
    def state():
        return session.state_dict()

    @app.post("/goal")
    def goal(req: GoalRequest):
        session.set_goal(req.x, req.y)
        return {"ok": True, "goal": [req.x, req.y]}

    @app.post("/failure")
    def failure(req: FailureRequest):
        try:
            session.set_failure(req.roller, req.failed)
        except ValueError as exc:
            from fastapi import HTTPException

            raise HTTPException(status_code=422, detail=str(exc))
        return {"ok": True, "broken": sorted(session.spec.broken_rollers)}

    @app.post("/barrier")
    def barrier_update(req: BarrierRequest):
        try:
            session.set_barrier(req.alpha, req.sigma_min, req.enabled)
        except ValueError as exc:
            from fastapi import HTTPException

            raise HTTPException(status_code=422, detail=str(exc))
        return {"ok": True}

    @app.post("/pause")
    def pause():
        session.set_paused(True)
        return {"ok": True, "paused": True}

    @app.post("/resume")
    def resume():
        session.set_paused(False)
        return {"ok": True, "paused": False}

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        last_seq = 0
        try:
            while True:
                new = []
                with session._lock:
                    for rec in session.records:
                        if rec["seq"] >= last_seq:
                            new.append(rec)
                    if new:
                        last_seq = new[-1]["seq"] + 1
                for rec in new:
                    await ws.send_json(rec)
                await asyncio.sleep(STREAM_POLL_S)
        except WebSocketDisconnect:
            return

    try:
        from pathlib import Path

        from fastapi.staticfiles import StaticFiles

        dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if dist.is_dir():
            app.mount("/", StaticFiles(directory=str(dist), html=True), name="console")
    except Exception:
        pass
    return app
