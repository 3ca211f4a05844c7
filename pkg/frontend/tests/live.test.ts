// Live feed: WS push path and the polling fallback.

import { describe, expect, it, vi } from "vitest";

import { LiveFeed, type WebSocketLike } from "../src/live.js";

class FakeSocket implements WebSocketLike {
  onopen: ((ev: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onerror: ((ev: unknown) => void) | null = null;
  onclose: ((ev: unknown) => void) | null = null;
  closed = false;

  close(): void {
    this.closed = true;
  }
}

describe("websocket path", () => {
  it("forwards parsed messages", () => {
    const socket = new FakeSocket();
    const seen: unknown[] = [];
    const modes: string[] = [];
    const feed = new LiveFeed({
      url: "ws://x/api/live",
      onMessage: (m) => seen.push(m),
      onMode: (m) => modes.push(m),
      wsFactory: () => socket,
      poll: () => Promise.resolve({}),
    });
    feed.start();
    socket.onopen?.({});
    socket.onmessage?.({ data: JSON.stringify({ type: "rms_half", value: 120 }) });
    socket.onmessage?.({ data: "not json" }); // ignored, never throws
    feed.stop();

    expect(modes).toEqual(["ws"]);
    expect(seen).toEqual([{ type: "rms_half", value: 120 }]);
    expect(socket.closed).toBe(true);
  });
});

describe("polling fallback", () => {
  it("polls status when the upgrade fails", async () => {
    vi.useFakeTimers();
    try {
      const socket = new FakeSocket();
      const seen: Array<Record<string, unknown>> = [];
      const modes: string[] = [];
      const feed = new LiveFeed({
        url: "ws://x/api/live",
        onMessage: (m) => seen.push(m),
        onMode: (m) => modes.push(m),
        wsFactory: () => socket,
        poll: () => Promise.resolve({ status: "streaming", readings: 42 }),
        pollIntervalMs: 500,
      });
      feed.start();
      socket.onerror?.({}); // handshake failed
      await vi.advanceTimersByTimeAsync(1600);
      feed.stop();

      expect(modes).toEqual(["poll"]);
      expect(seen.length).toBe(3); // one per 500 ms within 1.6 s
      expect(seen[0]).toEqual({ type: "status", status: "streaming", readings: 42 });

      await vi.advanceTimersByTimeAsync(2000);
      expect(seen.length).toBe(3); // stop() cancelled the timer
    } finally {
      vi.useRealTimers();
    }
  });

  it("falls back when the constructor itself throws", async () => {
    vi.useFakeTimers();
    try {
      const seen: unknown[] = [];
      const feed = new LiveFeed({
        url: "ws://x/api/live",
        onMessage: (m) => seen.push(m),
        wsFactory: () => {
          throw new Error("no WebSocket here");
        },
        poll: () => Promise.resolve({ status: "disconnected" }),
        pollIntervalMs: 250,
      });
      feed.start();
      await vi.advanceTimersByTimeAsync(600);
      feed.stop();
      expect(seen.length).toBe(2);
    } finally {
      vi.useRealTimers();
    }
  });

  it("does not double-poll when error and close both fire", async () => {
    vi.useFakeTimers();
    try {
      const socket = new FakeSocket();
      const polls: number[] = [];
      let n = 0;
      const feed = new LiveFeed({
        url: "ws://x",
        onMessage: () => undefined,
        wsFactory: () => socket,
        poll: () => {
          polls.push(++n);
          return Promise.resolve({});
        },
        pollIntervalMs: 100,
      });
      feed.start();
      socket.onerror?.({});
      socket.onclose?.({});
      await vi.advanceTimersByTimeAsync(350);
      feed.stop();
      expect(polls.length).toBe(3); // one timer, not two
    } finally {
      vi.useRealTimers();
    }
  });
});
