// Live feed with graceful degradation: prefer the WS push channel, fall back
// to polling /api/status when the upgrade fails (e.g. the daemon runs without
// a WS protocol library). Either way the badge tracks the daemon within 1 s.

export interface WebSocketLike {
  onopen: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  close(): void;
}

export interface LiveFeedOptions {
  url: string;
  onMessage(message: Record<string, unknown>): void;
  onMode?(mode: "ws" | "poll"): void;
  wsFactory?: (url: string) => WebSocketLike;
  poll?: () => Promise<Record<string, unknown>>;
  pollIntervalMs?: number;
  schedule?: (fn: () => void, ms: number) => ReturnType<typeof setInterval>;
  cancel?: (handle: ReturnType<typeof setInterval>) => void;
}

export class LiveFeed {
  private socket: WebSocketLike | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private stopped = false;

  constructor(private readonly options: LiveFeedOptions) {}

  start(): void {
    this.stopped = false;
    const factory =
      this.options.wsFactory ??
      ((url: string) => new WebSocket(url) as unknown as WebSocketLike);
    try {
      this.socket = factory(this.options.url);
    } catch {
      this.startPolling();
      return;
    }
    const socket = this.socket;
    let opened = false;
    socket.onopen = () => {
      opened = true;
      this.options.onMode?.("ws");
    };
    socket.onmessage = (event) => {
      try {
        this.options.onMessage(JSON.parse(event.data));
      } catch {
        // not JSON; ignore
      }
    };
    socket.onerror = () => {
      if (!opened) this.startPolling();
    };
    socket.onclose = () => {
      if (!opened && !this.stopped && this.timer === null) {
        this.startPolling();
      }
    };
  }

  private startPolling(): void {
    if (this.stopped || this.timer !== null || !this.options.poll) {
      return;
    }
    this.options.onMode?.("poll");
    const schedule = this.options.schedule ?? setInterval;
    const interval = this.options.pollIntervalMs ?? 500;
    this.timer = schedule(() => {
      this.options
        .poll!()
        .then((payload) =>
          this.options.onMessage({ type: "status", ...payload }),
        )
        .catch(() => undefined);
    }, interval);
  }

  stop(): void {
    this.stopped = true;
    if (this.socket) {
      try {
        this.socket.close();
      } catch {
        // already closed
      }
      this.socket = null;
    }
    if (this.timer !== null) {
      (this.options.cancel ?? clearInterval)(this.timer);
      this.timer = null;
    }
  }
}
