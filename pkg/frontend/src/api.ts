// Bridge client: one snapshot fetch, a reconnecting record stream, and the
// typed POST commands.

import type { BridgeState, StepRecord } from "./types.js";

export async function fetchState(base = ""): Promise<BridgeState> {
  const res = await fetch(`${base}/state`);
  if (!res.ok) {
    throw new Error(`GET /state failed: ${res.status}`);
  }
  return (await res.json()) as BridgeState;
}

async function post(base: string, path: string, body: unknown): Promise<void> {
  const res = await fetch(`${base}${path}`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) {
    throw new Error(`POST ${path} failed: ${res.status}`);
  }
}

export const commands = {
  setGoal: (x: number, y: number, base = "") => post(base, "/goal", { x, y }),
  toggleFailure: (roller: number, failed: boolean, base = "") =>
    post(base, "/failure", { roller, failed }),
  setBarrier: (
    alpha: number | null,
    sigmaMin: number | null,
    enabled: boolean | null,
    base = "",
  ) => post(base, "/barrier", { alpha, sigma_min: sigmaMin, enabled }),
  pause: (base = "") => post(base, "/pause", {}),
  resume: (base = "") => post(base, "/resume", {}),
};

export interface StreamHandlers {
  onRecord: (record: StepRecord) => void;
  onStatus: (status: "connecting" | "live" | "stale") => void;
}

export interface StreamHandle {
  close(): void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 8000;

/** Connect to /stream, reconnecting with exponential backoff and flagging the
 * view stale while disconnected. */
export function openStream(
  handlers: StreamHandlers,
  makeSocket: (url: string) => WebSocket = (url) => new WebSocket(url),
  base = "",
): StreamHandle {
  let closed = false;
  let backoff = BACKOFF_START_MS;
  let socket: WebSocket | null = null;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const url =
    base !== ""
      ? `${base.replace(/^http/, "ws")}/stream`
      : `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/stream`;

  const connect = () => {
    if (closed) return;
    handlers.onStatus("connecting");
    socket = makeSocket(url);
    socket.onopen = () => {
      backoff = BACKOFF_START_MS;
      handlers.onStatus("live");
    };
    socket.onmessage = (ev: MessageEvent) => {
      try {
        handlers.onRecord(JSON.parse(String(ev.data)) as StepRecord);
      } catch {
        // ignore malformed frames
      }
    };
    socket.onclose = () => {
      if (closed) return;
      handlers.onStatus("stale");
      timer = setTimeout(connect, backoff);
      backoff = Math.min(backoff * 2, BACKOFF_MAX_MS);
    };
    socket.onerror = () => {
      socket?.close();
    };
  };

  connect();
  return {
    close() {
      closed = true;
      if (timer !== null) clearTimeout(timer);
      socket?.close();
    },
  };
}
