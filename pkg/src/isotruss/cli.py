"""Command-line surface: run scenarios, sweep workspaces, analyze, serve the UI bridge."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analysis
from .errors import TrussError
from .scenario import RunAborted, load_runlog, load_scenario, run_scenario


def _write(path, text):
    if path == "-" or path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.out:
        scenario.out = args.out
    try:
        log = run_scenario(scenario)
    except RunAborted as exc:
        if scenario.out:
            exc.runlog.save(scenario.out)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    h_line = ""
    if scenario.barrier_enabled and log.records:
        h_line = f", min h {log.min_h():.3e}"
    out = scenario.out or "(not saved; use --out)"
    times = [r.solve_time for r in log.records]
    med = float(np.median(times)) if times else 0.0
    print(
        f"{scenario.name}: {len(log.records)} steps, median solve {med*1e3:.1f} ms{h_line} -> {out}"
    )
    return 0


def _analysis_inputs(args):
    scenario = load_scenario(args.scenario)
    topo, x0 = scenario.build()
    home = x0[scenario.target_vertex * 2: scenario.target_vertex * 2 + 2]
    spec = scenario.control_spec(home)
    return scenario, topo, x0, spec


def cmd_workspace(args) -> int:
    scenario, topo, x0, spec = _analysis_inputs(args)
    failures = frozenset(int(t) for t in args.failures.split(",") if t != "") if args.failures else frozenset()
    poly = analysis.workspace(
        topo, x0, spec,
        failure_set=failures,
        n_rays=args.rays,
        mode=args.mode,
        r_max=args.r_max,
    )
    _write(args.csv, poly.to_csv())
    summary = poly.summary()
    summary["scenario"] = scenario.name
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_degradation(args) -> int:
    scenario, topo, x0, spec = _analysis_inputs(args)
    rep = analysis.workspace_degradation(
        topo, x0, spec, n_rays=args.rays, r_max=args.r_max
    )
    lines = ["failure_set,area_m2,retention"]
    lines.append(f",{rep.nominal.area:.6g},1")
    for r in sorted(rep.per_failure):
        lines.append(f"{r},{rep.per_failure[r].area:.6g},{rep.retention[r]:.6g}")
    _write(args.csv, "\n".join(lines) + "\n")
    print(json.dumps({
        "scenario": scenario.name,
        "nominal_area_m2": rep.nominal.area,
        "retention": {str(k): v for k, v in sorted(rep.retention.items())},
    }, indent=2, sort_keys=True))
    return 0


def cmd_manip(args) -> int:
    scenario, topo, x0, spec = _analysis_inputs(args)
    log = run_scenario(scenario)
    n = topo.roller_count
    head = "k,time,M,condition_number,axis_major,axis_minor,angle," + ",".join(
        f"degraded_{i}" for i in range(n)
    )
    lines = [head]
    for r in log.records:
        rep = analysis.manipulability(
            topo, np.asarray(r.x_true), scenario.target_vertex
        )
        deg = ",".join(f"{v:.6g}" for v in rep.per_roller_degraded)
        lines.append(
            f"{r.k},{r.time},{rep.M:.6g},{rep.condition_number:.6g},"
            f"{rep.ellipse_axes[0]:.6g},{rep.ellipse_axes[1]:.6g},"
            f"{rep.ellipse_angle:.6g},{deg}"
        )
    _write(args.csv, "\n".join(lines) + "\n")
    print(f"{scenario.name}: manipulability over {len(log.records)} steps -> {args.csv}")
    return 0


def cmd_greedy(args) -> int:
    scenario, topo, x0, spec = _analysis_inputs(args)
    rep = analysis.greedy_failure_order(
        topo, x0, spec, n_rays=args.rays, r_max=args.r_max
    )
    print(json.dumps({
        "scenario": scenario.name,
        "order": rep.order,
        "cumulative_areas_m2": rep.areas,
        "nominal_area_m2": rep.nominal_area,
    }, indent=2, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    log_a = load_runlog(args.log_a)
    log_b = load_runlog(args.log_b)
    tr_a = log_a.target_trace("x_true")
    tr_b = log_b.target_trace("x_true")
    label = args.label or f"{args.log_a}|{args.log_b}"
    if args.ref:
        ref = load_runlog(args.ref).target_trace("x_true")
        rmse_a = analysis.rmse(tr_a, ref)
        rmse_b = analysis.rmse(tr_b, ref)
        improvement = 100.0 * (1.0 - rmse_b / rmse_a) if rmse_a > 0 else 0.0
        print(f"{label},{rmse_a:.6g},{rmse_b:.6g},{improvement:.4g}")
    else:
        print(f"{label},{analysis.rmse(tr_a, tr_b):.6g}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .bridge import LiveSession, create_app

    scenario = load_scenario(args.scenario)
    session = LiveSession(scenario, pace=args.pace, overlay_rays=args.overlay_rays)
    app = create_app(session)
    session.start()
    print(f"serving {scenario.name} on http://{args.host}:{args.port} "
          f"(pace {args.pace}, dt {scenario.dt}s)")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        session.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="isotruss",
        description="Fault-tolerant kinematic control toolkit for isoperimetric trusses",
    )
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("run", help="execute a scenario and write its run log")
    q.add_argument("scenario")
    q.add_argument("--out", default=None, help="run-log path (JSON lines)")
    q.set_defaults(fn=cmd_run)

    q = sub.add_parser("workspace", help="radial workspace sweep")
    q.add_argument("scenario")
    q.add_argument("--failures", default="", help="comma-separated roller indices")
    q.add_argument("--rays", type=int, default=analysis.DEFAULT_N_RAYS)
    q.add_argument("--mode", choices=[analysis.MODE_DTCBF, analysis.MODE_HARD],
                   default=analysis.MODE_HARD)
    q.add_argument("--r-max", type=float, default=analysis.DEFAULT_MAX_RADIUS)
    q.add_argument("--csv", default="-", help="per-ray CSV output path (default stdout)")
    q.set_defaults(fn=cmd_workspace)

    q = sub.add_parser("degradation", help="single-failure workspace retention study")
    q.add_argument("scenario")
    q.add_argument("--rays", type=int, default=analysis.DEFAULT_N_RAYS)
    q.add_argument("--r-max", type=float, default=2.0)
    q.add_argument("--csv", default="-")
    q.set_defaults(fn=cmd_degradation)

    q = sub.add_parser("manip", help="manipulability along a scenario trajectory")
    q.add_argument("scenario")
    q.add_argument("--csv", default="-")
    q.set_defaults(fn=cmd_manip)

    q = sub.add_parser("greedy", help="greedy failure ordering by remaining workspace")
    q.add_argument("scenario")
    q.add_argument("--rays", type=int, default=analysis.DEFAULT_N_RAYS)
    q.add_argument("--r-max", type=float, default=2.0)
    q.set_defaults(fn=cmd_greedy)

    q = sub.add_parser("compare", help="RMSE between run logs (CSV row on stdout)")
    q.add_argument("log_a")
    q.add_argument("log_b")
    q.add_argument("--ref", default=None, help="reference run log for both RMSEs")
    q.add_argument("--label", default=None)
    q.set_defaults(fn=cmd_compare)

    q = sub.add_parser("serve", help="live simulation with HTTP/WebSocket bridge")
    q.add_argument("scenario")
    q.add_argument("--host", default="127.0.0.1")
    q.add_argument("--port", type=int, default=8750)
    q.add_argument("--pace", type=float, default=1.0,
                   help="wall-clock pacing factor (0 = free-run)")
    q.add_argument("--overlay-rays", type=int, default=24,
                   help="rays for the startup workspace overlay (0 disables)")
    q.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except TrussError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
