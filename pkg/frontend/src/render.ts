// Canvas drawing of the truss, ellipse, gauge, goal, trail, and overlays.

import type { ViewState } from "./state.js";
import { targetPosition } from "./state.js";
import { Viewport, toScreen } from "./transform.js";

const EDGE_COLOR = "#2c6fbb";
const VERTEX_COLOR = "#1b2733";
const TRAIL_COLOR = "rgba(240, 170, 20, 0.8)";
const GOAL_COLOR = "#d23c77";
const ELLIPSE_COLOR = "rgba(40, 200, 200, 0.8)";
const OVERLAY_COLOR = "rgba(90, 90, 220, 0.25)";

export function draw(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  state: ViewState,
): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  const { topology, record } = state;
  if (!topology) return;

  for (const overlay of state.overlays) {
    ctx.beginPath();
    overlay.angles.forEach((a, i) => {
      const r = overlay.radii[i];
      const [px, py] = toScreen(
        vp,
        overlay.center[0] + r * Math.cos(a),
        overlay.center[1] + r * Math.sin(a),
      );
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.closePath();
    ctx.fillStyle = OVERLAY_COLOR;
    ctx.fill();
  }

  const x = record ? record.x_est : topology.home;
  const pt = (i: number): [number, number] => [x[2 * i], x[2 * i + 1]];

  ctx.strokeStyle = EDGE_COLOR;
  ctx.lineWidth = 3;
  for (const [i, j] of topology.edges) {
    const [ax, ay] = toScreen(vp, ...pt(i));
    const [bx, by] = toScreen(vp, ...pt(j));
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }

  if (state.trail.length > 1) {
    ctx.strokeStyle = TRAIL_COLOR;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    state.trail.forEach(([wx, wy], i) => {
      const [px, py] = toScreen(vp, wx, wy);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }

  ctx.fillStyle = VERTEX_COLOR;
  for (let i = 0; i < topology.vertex_count; i++) {
    const [px, py] = toScreen(vp, ...pt(i));
    ctx.beginPath();
    ctx.arc(px, py, i === topology.target_vertex ? 7 : 5, 0, 2 * Math.PI);
    ctx.fill();
  }

  // roller markers near their vertices, struck through when failed
  topology.rollers.forEach((roller, idx) => {
    const [px, py] = toScreen(vp, ...pt(roller.vertex));
    const ox = px + 12 + 16 * (idx % 2);
    const oy = py - 12;
    ctx.font = "11px sans-serif";
    const failed = state.broken.includes(idx);
    ctx.fillStyle = failed ? "#c22" : "#555";
    ctx.fillText(`R${idx}`, ox, oy);
    if (failed) {
      ctx.strokeStyle = "#c22";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(ox - 2, oy + 2);
      ctx.lineTo(ox + 16, oy - 10);
      ctx.stroke();
      ctx.fillText("⚡", ox + 16, oy + 2);
    }
  });

  if (record) {
    const [tx, ty] = targetPosition(topology, record);
    const m = record.manip;
    const scaleEllipse = 0.8; // meters of ellipse per (m/s per m/s) axis unit
    ctx.strokeStyle = ELLIPSE_COLOR;
    ctx.lineWidth = 2;
    ctx.beginPath();
    const [cx, cy] = toScreen(vp, tx, ty);
    ctx.ellipse(
      cx,
      cy,
      Math.max(2, m.axes[0] * scaleEllipse * vp.scale * 0.1),
      Math.max(2, m.axes[1] * scaleEllipse * vp.scale * 0.1),
      -m.angle,
      0,
      2 * Math.PI,
    );
    ctx.stroke();
  }

  if (state.goal) {
    const [gx, gy] = toScreen(vp, state.goal[0], state.goal[1]);
    ctx.strokeStyle = GOAL_COLOR;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(gx - 7, gy);
    ctx.lineTo(gx + 7, gy);
    ctx.moveTo(gx, gy - 7);
    ctx.lineTo(gx, gy + 7);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(gx, gy, 9, 0, 2 * Math.PI);
    ctx.stroke();
  }

  drawGauge(ctx, vp, state);
}

export function gaugeColor(h: number, sigmaMin: number): string {
  // green well inside the safe set, amber approaching, red at the floor
  const frac = Math.max(0, Math.min(1, h / (4 * sigmaMin)));
  if (frac > 0.5) return "#2da44e";
  if (frac > 0.15) return "#d4a72c";
  return "#cf222e";
}

function drawGauge(ctx: CanvasRenderingContext2D, vp: Viewport, state: ViewState): void {
  const rec = state.record;
  if (!rec || !state.barrier) return;
  const w = 140;
  const x0 = vp.width - w - 14;
  const y0 = 14;
  ctx.fillStyle = "#f4f4f4";
  ctx.fillRect(x0 - 6, y0 - 4, w + 12, 40);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(x0 - 6, y0 - 4, w + 12, 40);
  const frac = Math.max(0, Math.min(1, rec.h / (4 * state.barrier.sigma_min)));
  ctx.fillStyle = gaugeColor(rec.h, state.barrier.sigma_min);
  ctx.fillRect(x0, y0, w * frac, 12);
  ctx.strokeStyle = "#444";
  ctx.strokeRect(x0, y0, w, 12);
  ctx.fillStyle = "#222";
  ctx.font = "11px sans-serif";
  ctx.fillText(`rigidity margin h = ${rec.h.toFixed(4)}`, x0, y0 + 26);
}
