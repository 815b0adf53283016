// Operator console wiring: snapshot, stream, reducer, canvas, command panel.

import { commands, fetchState, openStream } from "./api.js";
import { Action, initialState, reduce, ViewState } from "./state.js";
import { contentBounds, fitViewport, toWorld, Viewport } from "./transform.js";
import { draw } from "./render.js";
import type { StepRecord } from "./types.js";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const rollerPanel = document.getElementById("rollers")!;
const statusLine = document.getElementById("status")!;

let state: ViewState = initialState();
let viewport: Viewport | null = null;

function dispatch(action: Action): void {
  state = reduce(state, action);
  refresh();
}

function computeViewport(): Viewport {
  const pts: [number, number][] = [];
  if (state.topology) {
    const home = state.topology.home;
    for (let i = 0; i < state.topology.vertex_count; i++) {
      pts.push([home[2 * i], home[2 * i + 1]]);
    }
    for (const ov of state.overlays) {
      ov.angles.forEach((a, i) => {
        pts.push([
          ov.center[0] + ov.radii[i] * Math.cos(a),
          ov.center[1] + ov.radii[i] * Math.sin(a),
        ]);
      });
    }
  }
  return fitViewport(contentBounds(pts), canvas.width, canvas.height);
}

function refresh(): void {
  if (!viewport && state.topology) {
    viewport = computeViewport();
  }
  if (viewport) {
    draw(ctx, viewport, state);
  }
  banner.style.display = state.connection === "live" ? "none" : "block";
  banner.textContent =
    state.connection === "connecting" ? "connecting…" : "connection lost, state may be stale";
  if (state.fault) {
    banner.style.display = "block";
    banner.textContent = `simulation fault: ${state.fault}`;
  }
  const rec = state.record;
  statusLine.textContent = rec
    ? `k=${rec.k}  t=${rec.time.toFixed(1)}s  σ=${rec.sigma_crit.toFixed(4)}  ` +
      `solve=${rec.solve_status} (${(rec.solve_time * 1e3).toFixed(0)} ms)` +
      (state.paused ? "  [paused]" : "") +
      (state.pending.length ? "  [pending…]" : "")
    : "waiting for first step";
  renderRollerPanel();
}

function renderRollerPanel(): void {
  if (!state.topology) return;
  const n = state.topology.rollers.length;
  if (rollerPanel.childElementCount !== n) {
    rollerPanel.innerHTML = "";
    for (let i = 0; i < n; i++) {
      const btn = document.createElement("button");
      btn.id = `roller-${i}`;
      btn.onclick = () => {
        const failing = !state.broken.includes(i);
        dispatch({ type: "command_sent", kind: `failure:${i}`, now: Date.now() });
        commands.toggleFailure(i, failing).catch(showError);
      };
      rollerPanel.appendChild(btn);
    }
  }
  for (let i = 0; i < n; i++) {
    const btn = document.getElementById(`roller-${i}`) as HTMLButtonElement;
    const failed = state.broken.includes(i);
    btn.textContent = failed ? `R${i} ⚡ failed` : `R${i} ok`;
    btn.className = failed ? "failed" : "ok";
  }
}

function showError(err: unknown): void {
  banner.style.display = "block";
  banner.textContent = String(err);
  // re-sync from the source of truth after a failed command
  fetchState()
    .then((s) => dispatch({ type: "snapshot", state: s }))
    .catch(() => undefined);
}

canvas.addEventListener("pointerdown", (ev) => {
  if (!viewport) return;
  const rect = canvas.getBoundingClientRect();
  const [wx, wy] = toWorld(viewport, ev.clientX - rect.left, ev.clientY - rect.top);
  dispatch({ type: "command_sent", kind: "goal", now: Date.now() });
  commands.setGoal(wx, wy).catch(showError);
});

(document.getElementById("apply-barrier") as HTMLButtonElement).onclick = () => {
  const alpha = parseFloat((document.getElementById("alpha") as HTMLInputElement).value);
  const sigma = parseFloat((document.getElementById("sigma-min") as HTMLInputElement).value);
  const enabled = (document.getElementById("barrier-on") as HTMLInputElement).checked;
  dispatch({ type: "command_sent", kind: "barrier", now: Date.now() });
  commands
    .setBarrier(Number.isFinite(alpha) ? alpha : null, Number.isFinite(sigma) ? sigma : null, enabled)
    .catch(showError);
};

(document.getElementById("pause") as HTMLButtonElement).onclick = () => {
  const action = state.paused ? commands.resume() : commands.pause();
  const next = !state.paused;
  action.then(() => dispatch({ type: "paused", paused: next })).catch(showError);
};

async function start(): Promise<void> {
  const snapshot = await fetchState();
  dispatch({ type: "snapshot", state: snapshot });
  const barrier = snapshot.barrier;
  (document.getElementById("alpha") as HTMLInputElement).value = String(barrier.alpha);
  (document.getElementById("sigma-min") as HTMLInputElement).value = String(barrier.sigma_min);
  (document.getElementById("barrier-on") as HTMLInputElement).checked = barrier.enabled;
  openStream({
    onRecord: (record: StepRecord) => dispatch({ type: "record", record }),
    onStatus: (status) => dispatch({ type: "connection", status }),
  });
}

start().catch(showError);
