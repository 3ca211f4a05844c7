// Typed client for the daemon API. The UI never computes statistics itself:
// it renders the `display` strings of these payloads verbatim, so whatever
// the engine reports is exactly what the operator reads.

export interface StatsPayload {
  vrms: number;
  vpeak: number;
  thd: number;
  frequency: number;
  frequency_referential: boolean;
}

export interface DisplayStrings {
  vrms: string;
  vpeak: string;
  thd: string;
  frequency: string;
}

export interface WindowPayload {
  view: "instantaneous" | "rms_half";
  cycles: number;
  available_cycles: number;
  session_timestamp: string | null;
  stats: StatsPayload;
  display: DisplayStrings;
  series: { t_ms?: number[]; half_cycle?: number[]; values: number[] };
}

export interface FftPayload {
  cycles: number;
  bin_hz: number;
  hz: number[];
  magnitude: number[];
}

export interface StatusPayload {
  status: "disconnected" | "connecting" | "streaming";
  endpoint: string | null;
  readings: number;
  malformed: number;
  data_dir: string;
  nominal_voltage: number;
  nominal_frequency: number;
  frequency_referential: boolean;
}

export interface ReportEvent {
  kind: "sag" | "surge" | "interruption";
  start_half_cycle: number;
  duration_half_cycles: number;
  extreme_pu: number;
  extreme_volts: number;
}

export interface ReportPayload {
  session_timestamp: string | null;
  half_cycles: number;
  counts: { sag: number; surge: number; interruption: number };
  min_rms: number;
  max_rms: number;
  min_pu: number;
  max_pu: number;
  nominal_voltage: number;
  thresholds: { sag_pu: number; surge_pu: number; interruption_pu: number };
  events: ReportEvent[];
  report_path: string;
  rms_path: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly available?: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export type CycleCount = number | "all";

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly baseUrl = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `daemon unreachable: ${String(err)}`);
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const detail = (body as { detail?: unknown } | null)?.detail;
      if (typeof detail === "string") {
        throw new ApiError(response.status, detail);
      }
      if (detail && typeof detail === "object") {
        const d = detail as { message?: string; available?: number };
        throw new ApiError(
          response.status,
          d.message ?? `request failed (${response.status})`,
          d.available,
        );
      }
      throw new ApiError(response.status, `request failed (${response.status})`);
    }
    return body as T;
  }

  connect(endpoint: string, baud: number): Promise<StatusPayload> {
    return this.request("/api/connect", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ endpoint, baud }),
    });
  }

  disconnect(): Promise<StatusPayload> {
    return this.request("/api/disconnect", { method: "POST" });
  }

  status(): Promise<StatusPayload> {
    return this.request("/api/status");
  }

  window(cycles: CycleCount, view: "inst" | "rms"): Promise<WindowPayload> {
    return this.request(`/api/window?cycles=${cycles}&view=${view}`);
  }

  fft(cycles: CycleCount): Promise<FftPayload> {
    return this.request(`/api/fft?cycles=${cycles}`);
  }

  report(): Promise<ReportPayload> {
    return this.request("/api/report", { method: "POST" });
  }
}
