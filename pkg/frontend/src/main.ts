// DOM wiring for the operator console. All state transitions live in
// state.ts; this module only moves values between the DOM and the store.

import { ApiClient, ApiError } from "./api.js";
import type { CycleCount } from "./api.js";
import {
  applyError,
  applyFft,
  applyLive,
  applyReport,
  applyStatus,
  applyWindow,
  closeReport,
  initialState,
  setCycles,
  setEndpoint,
  setView,
  type ViewState,
} from "./state.js";
import { drawSeries } from "./plot.js";
import { LiveFeed } from "./live.js";

const api = new ApiClient((input, init) => fetch(input, init));

let state: ViewState = initialState;
let feed: LiveFeed | null = null;
let refreshTimer: ReturnType<typeof setInterval> | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const endpointInput = el<HTMLInputElement>("endpoint");
const baudInput = el<HTMLInputElement>("baud");
const connectBtn = el<HTMLButtonElement>("connect");
const disconnectBtn = el<HTMLButtonElement>("disconnect");
const badge = el<HTMLSpanElement>("badge");
const liveValue = el<HTMLSpanElement>("live-value");
const counters = el<HTMLSpanElement>("counters");
const errorBanner = el<HTMLDivElement>("error");
const cyclesInput = el<HTMLInputElement>("cycles");
const cyclesAll = el<HTMLInputElement>("cycles-all");
const viewInstBtn = el<HTMLButtonElement>("view-inst");
const viewRmsBtn = el<HTMLButtonElement>("view-rms");
const refreshBtn = el<HTMLButtonElement>("refresh");
const reportBtn = el<HTMLButtonElement>("report");
const waveCanvas = el<HTMLCanvasElement>("waveform");
const fftCanvas = el<HTMLCanvasElement>("fft");
const modal = el<HTMLDivElement>("report-modal");
const modalBody = el<HTMLDivElement>("report-body");
const modalClose = el<HTMLButtonElement>("report-close");

function update(next: ViewState): void {
  state = next;
  render();
}

function selectedCycles(): CycleCount {
  return cyclesAll.checked ? "all" : Math.max(1, Number(cyclesInput.value) || 6);
}

function render(): void {
  badge.textContent = state.connection;
  badge.className = `badge badge-${state.connection}`;
  liveValue.textContent =
    state.live.value === null ? "-" : `${state.live.value.toFixed(3)} V`;
  counters.textContent =
    `${state.live.readings} readings / ${state.live.malformed} malformed`;
  errorBanner.textContent = state.error ?? "";
  errorBanner.style.display = state.error ? "block" : "none";
  connectBtn.disabled = state.connection !== "disconnected";
  disconnectBtn.disabled = state.connection === "disconnected";
  viewInstBtn.classList.toggle("active", state.view === "instantaneous");
  viewRmsBtn.classList.toggle("active", state.view === "rms_half");

  // stats arrive pre-rendered by the daemon and are shown verbatim
  el("stat-vrms").textContent = state.stats?.vrms ?? "-";
  el("stat-vpeak").textContent = state.stats?.vpeak ?? "-";
  el("stat-thd").textContent = state.stats?.thd ?? "-";
  el("stat-frequency").textContent = state.stats?.frequency ?? "-";

  if (state.series) {
    const ctx = waveCanvas.getContext("2d");
    if (ctx) {
      drawSeries(ctx, state.series.x, state.series.values, {
        width: waveCanvas.width,
        height: waveCanvas.height,
        xLabel: state.series.xLabel,
      });
    }
  }
  if (state.fft) {
    const ctx = fftCanvas.getContext("2d");
    if (ctx) {
      drawSeries(ctx, state.fft.hz, state.fft.magnitude, {
        width: fftCanvas.width,
        height: fftCanvas.height,
        xLabel: "Hz",
        color: "#ffb454",
      });
    }
  }

  modal.style.display = state.reportOpen ? "flex" : "none";
  if (state.report && state.reportOpen) {
    const r = state.report;
    const events = r.events
      .map(
        (e) =>
          `<tr><td>${e.kind}</td><td>${e.start_half_cycle}</td>` +
          `<td>${e.duration_half_cycles}</td>` +
          `<td>${e.extreme_pu.toFixed(3)} pu (${e.extreme_volts.toFixed(3)} V)</td></tr>`,
      )
      .join("");
    modalBody.innerHTML = `
      <p>Session ${r.session_timestamp ?? "(unknown)"} -
         ${r.half_cycles} half-cycles analyzed</p>
      <p class="report-counts">
        Sags: <strong id="report-sags">${r.counts.sag}</strong>
        Surges: <strong id="report-surges">${r.counts.surge}</strong>
        Interruptions: <strong id="report-interruptions">${r.counts.interruption}</strong>
      </p>
      <p>RMS 1/2 range: ${r.min_rms.toFixed(3)} V (${r.min_pu.toFixed(3)} pu)
         to ${r.max_rms.toFixed(3)} V (${r.max_pu.toFixed(3)} pu)</p>
      ${
        events
          ? `<table><thead><tr><th>kind</th><th>start half-cycle</th>
             <th>duration</th><th>extreme</th></tr></thead>
             <tbody>${events}</tbody></table>`
          : "<p>No voltage sags, surges or interruptions occurred.</p>"
      }
      <p class="report-path">Full detail written to ${r.report_path}</p>`;
  }
}

async function refreshData(): Promise<void> {
  const cycles = selectedCycles();
  const view = state.view === "instantaneous" ? "inst" : "rms";
  try {
    const [windowPayload, fftPayload] = await Promise.all([
      api.window(cycles, view),
      api.fft(cycles),
    ]);
    update(applyFft(applyWindow(state, windowPayload), fftPayload));
  } catch (err) {
    update(applyError(state, describe(err)));
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.available !== undefined
      ? `${err.message} - capture more data first`
      : err.message;
  }
  return String(err);
}

function startLiveFeed(): void {
  feed?.stop();
  const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/api/live`;
  feed = new LiveFeed({
    url: wsUrl,
    onMessage: (message) => update(applyLive(state, message as never)),
    poll: () => api.status() as unknown as Promise<Record<string, unknown>>,
  });
  feed.start();
}

connectBtn.addEventListener("click", async () => {
  update(setEndpoint(state, endpointInput.value.trim(), Number(baudInput.value)));
  try {
    const status = await api.connect(state.endpoint, state.baud);
    update(applyStatus(state, status));
    startLiveFeed();
    if (refreshTimer === null) {
      refreshTimer = setInterval(() => {
        if (state.connection === "streaming") void refreshData();
      }, 1000);
    }
  } catch (err) {
    update(applyError(state, describe(err)));
  }
});

disconnectBtn.addEventListener("click", async () => {
  try {
    update(applyStatus(state, await api.disconnect()));
  } catch (err) {
    update(applyError(state, describe(err)));
  }
  feed?.stop();
});

viewInstBtn.addEventListener("click", () => {
  update(setView(state, "instantaneous"));
  void refreshData();
});
viewRmsBtn.addEventListener("click", () => {
  update(setView(state, "rms_half"));
  void refreshData();
});
refreshBtn.addEventListener("click", () => void refreshData());
cyclesInput.addEventListener("change", () =>
  update(setCycles(state, selectedCycles())),
);
cyclesAll.addEventListener("change", () =>
  update(setCycles(state, selectedCycles())),
);

reportBtn.addEventListener("click", async () => {
  try {
    update(applyReport(state, await api.report()));
  } catch (err) {
    update(applyError(state, describe(err)));
  }
});
modalClose.addEventListener("click", () => update(closeReport(state)));

// initial load: status, then the default 6-cycle view if data exists
void (async () => {
  try {
    update(applyStatus(state, await api.status()));
    if (state.connection === "streaming") startLiveFeed();
  } catch (err) {
    update(applyError(state, describe(err)));
  }
  await refreshData();
})();
