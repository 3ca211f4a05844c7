// Pure view-state transitions. Every rendered statistic is copied verbatim
// from a daemon payload; nothing here formats or recomputes numbers, which
// keeps the console incapable of drifting from the engine.

import type {
  DisplayStrings,
  FftPayload,
  ReportPayload,
  StatusPayload,
  WindowPayload,
} from "./api.js";

export type ConnectionStatus = "disconnected" | "connecting" | "streaming";
export type ViewKind = "instantaneous" | "rms_half";
export type CycleSelection = number | "all";

export interface SeriesView {
  x: number[];
  values: number[];
  xLabel: string;
}

export interface LiveInfo {
  value: number | null;
  readings: number;
  malformed: number;
}

export interface ViewState {
  connection: ConnectionStatus;
  endpoint: string;
  baud: number;
  cycles: CycleSelection;
  view: ViewKind;
  stats: DisplayStrings | null;
  series: SeriesView | null;
  fft: FftPayload | null;
  report: ReportPayload | null;
  reportOpen: boolean;
  error: string | null;
  live: LiveInfo;
}

export const initialState: ViewState = {
  connection: "disconnected",
  endpoint: "tcp:127.0.0.1:9600",
  baud: 2_000_000,
  cycles: 6, // the default window everywhere is the last 6 cycles
  view: "instantaneous",
  stats: null,
  series: null,
  fft: null,
  report: null,
  reportOpen: false,
  error: null,
  live: { value: null, readings: 0, malformed: 0 },
};

export function applyStatus(state: ViewState, payload: StatusPayload): ViewState {
  return {
    ...state,
    connection: payload.status,
    live: {
      ...state.live,
      readings: payload.readings,
      malformed: payload.malformed,
    },
  };
}

export function applyWindow(state: ViewState, payload: WindowPayload): ViewState {
  const series: SeriesView =
    payload.view === "instantaneous"
      ? {
          x: payload.series.t_ms ?? [],
          values: payload.series.values,
          xLabel: "time (ms)",
        }
      : {
          x: payload.series.half_cycle ?? [],
          values: payload.series.values,
          xLabel: "half-cycle",
        };
  return {
    ...state,
    view: payload.view,
    stats: payload.display,
    series,
    error: null,
  };
}

export function applyFft(state: ViewState, payload: FftPayload): ViewState {
  return { ...state, fft: payload, error: null };
}

export function applyReport(state: ViewState, payload: ReportPayload): ViewState {
  return { ...state, report: payload, reportOpen: true, error: null };
}

export function closeReport(state: ViewState): ViewState {
  return { ...state, reportOpen: false };
}

export function applyError(state: ViewState, message: string): ViewState {
  return { ...state, error: message };
}

export function setEndpoint(state: ViewState, endpoint: string, baud: number): ViewState {
  return { ...state, endpoint, baud };
}

export function setCycles(state: ViewState, cycles: CycleSelection): ViewState {
  if (cycles !== "all" && (!Number.isInteger(cycles) || cycles < 1)) {
    return applyError(state, `cycle count must be a positive integer, got ${cycles}`);
  }
  return { ...state, cycles };
}

export function setView(state: ViewState, view: ViewKind): ViewState {
  return { ...state, view };
}

export interface LiveMessage {
  type: "rms_half" | "end" | "status";
  value?: number;
  readings?: number;
  malformed?: number;
  status?: string;
}

export function applyLive(state: ViewState, message: LiveMessage): ViewState {
  if (message.type === "end") {
    return { ...state, connection: "disconnected" };
  }
  return {
    ...state,
    connection:
      (message.status as ConnectionStatus | undefined) ?? state.connection,
    live: {
      value: message.value ?? state.live.value,
      readings: message.readings ?? state.live.readings,
      malformed: message.malformed ?? state.live.malformed,
    },
  };
}
