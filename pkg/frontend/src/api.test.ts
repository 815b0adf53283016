import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { commands, fetchState, openStream } from "./api.js";
import { gaugeColor } from "./render.js";
import type { StepRecord } from "./types.js";

class FakeSocket {
  static instances: FakeSocket[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  closed = false;

  constructor(public url: string) {
    FakeSocket.instances.push(this);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }
}

describe("commands", () => {
  beforeEach(() => {
    vi.stubGlobal("fetch", vi.fn(async () => ({ ok: true, json: async () => ({}) })));
  });
  afterEach(() => vi.unstubAllGlobals());

  it("posts typed payloads to the bridge endpoints", async () => {
    await commands.setGoal(1.25, 0.5, "http://x");
    await commands.toggleFailure(3, true, "http://x");
    await commands.setBarrier(0.5, 0.01, true, "http://x");
    const calls = (fetch as unknown as ReturnType<typeof vi.fn>).mock.calls;
    expect(calls[0][0]).toBe("http://x/goal");
    expect(JSON.parse(calls[0][1].body)).toEqual({ x: 1.25, y: 0.5 });
    expect(calls[1][0]).toBe("http://x/failure");
    expect(JSON.parse(calls[1][1].body)).toEqual({ roller: 3, failed: true });
    expect(JSON.parse(calls[2][1].body)).toEqual({
      alpha: 0.5,
      sigma_min: 0.01,
      enabled: true,
    });
  });

  it("raises on http errors", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => ({ ok: false, status: 422 })));
    await expect(commands.setGoal(0, 0, "http://x")).rejects.toThrow("422");
    await expect(fetchState("http://x")).rejects.toThrow("422");
  });
});

describe("stream", () => {
  beforeEach(() => {
    FakeSocket.instances = [];
    vi.useFakeTimers();
  });
  afterEach(() => vi.useRealTimers());

  it("delivers parsed records and reports status", () => {
    const records: StepRecord[] = [];
    const statuses: string[] = [];
    openStream(
      {
        onRecord: (r) => records.push(r),
        onStatus: (s) => statuses.push(s),
      },
      (url) => new FakeSocket(url) as unknown as WebSocket,
      "http://host",
    );
    const sock = FakeSocket.instances[0];
    expect(sock.url).toBe("ws://host/stream");
    sock.onopen?.();
    sock.onmessage?.({ data: JSON.stringify({ seq: 1, k: 1 }) });
    sock.onmessage?.({ data: "not json" }); // ignored
    expect(records).toHaveLength(1);
    expect(statuses).toEqual(["connecting", "live"]);
  });

  it("reconnects with backoff and flags stale", () => {
    const statuses: string[] = [];
    openStream(
      { onRecord: () => undefined, onStatus: (s) => statuses.push(s) },
      (url) => new FakeSocket(url) as unknown as WebSocket,
      "http://host",
    );
    FakeSocket.instances[0].onclose?.();
    expect(statuses.at(-1)).toBe("stale");
    vi.advanceTimersByTime(600);
    expect(FakeSocket.instances).toHaveLength(2);
    FakeSocket.instances[1].onclose?.();
    vi.advanceTimersByTime(999);
    expect(FakeSocket.instances).toHaveLength(2); // backoff doubled to 1s
    vi.advanceTimersByTime(200);
    expect(FakeSocket.instances).toHaveLength(3);
  });

  it("stops reconnecting once closed", () => {
    const handle = openStream(
      { onRecord: () => undefined, onStatus: () => undefined },
      (url) => new FakeSocket(url) as unknown as WebSocket,
      "http://host",
    );
    handle.close();
    vi.advanceTimersByTime(60000);
    expect(FakeSocket.instances).toHaveLength(1);
  });
});

describe("gauge color", () => {
  it("tracks proximity to the safety floor", () => {
    expect(gaugeColor(0.5, 0.01)).toBe("#2da44e");
    expect(gaugeColor(0.01, 0.01)).toBe("#d4a72c");
    expect(gaugeColor(0.0005, 0.01)).toBe("#cf222e");
  });
});
