"""Operator daemon: acquisition orchestration plus the HTTP/WS API.

One daemon owns one data directory.  It ingests a single acquisition
session at a time into the raw store on a background thread, while API
handlers answer analysis requests from committed storage (never from the
in-flight buffer), so analysis during capture is race-free by
construction.  The connection state machine is strictly
disconnected -> connecting -> streaming -> disconnected.

Stats returned by the window endpoint are computed by the analysis module
on exactly the returned window, and are also pre-rendered as display
strings so the UI can show them without doing any numeric work of its own.
"""

from __future__ import annotations

import queue
import threading
from collections import deque
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.concurrency import run_in_threadpool
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .analysis import (
    InsufficientDataError,
    analyze_window,
    dft_magnitudes,
    display_spectrum,
)
from .conversion import (
    SAMPLES_PER_CYCLE,
    SAMPLES_PER_HALF_CYCLE,
    ConversionConfig,
    counts_to_voltages,
)
from .events import Thresholds, build_report, classify_events, rms_half_series
from .protocol import (
    DEFAULT_BAUD,
    Malformed,
    PortConfig,
    Reading,
    SessionStart,
    default_endpoint,
    format_timestamp,
    open_session,
)
from .storage import (
    RAW_FILENAME,
    REPORT_FILENAME,
    RMS_FILENAME,
    RawStore,
    RmsStore,
    write_report_file,
)

DISCONNECTED = "disconnected"
CONNECTING = "connecting"
STREAMING = "streaming"

_INGEST_BATCH = 90
_LIVE_QUEUE_SIZE = 256

_VIEW_ALIASES = {
    "inst": "instantaneous",
    "instantaneous": "instantaneous",
    "rms": "rms_half",
    "rms_half": "rms_half",
}


class ConflictError(RuntimeError):
    """Raised when a control request is invalid in the current state."""


def format_stats(stats: dict) -> dict:
    """Render the stats block exactly as the UI must display it."""
    return {
        "vrms": f"{stats['vrms']:.2f} V",
        "vpeak": f"{stats['vpeak']:.2f} V",
        "thd": f"{stats['thd']:.3f}",
        "frequency": f"{stats['frequency']:.0f} Hz (referential)",
    }


class Daemon:
    """Owns the connection state machine, the ingest worker and the stores."""

    def __init__(
        self,
        data_dir: str | Path,
        cfg: ConversionConfig | None = None,
        thresholds: Thresholds | None = None,
    ) -> None:
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg if cfg is not None else ConversionConfig()
        self.thresholds = thresholds if thresholds is not None else Thresholds()
        self._writer = RawStore(self.data_dir / RAW_FILENAME)
        self._lock = threading.Lock()
        self._state = DISCONNECTED
        self._endpoint: str | None = None
        self._session = None
        self._ingest_thread: threading.Thread | None = None
        self._subscribers: list[queue.Queue] = []
        self._sub_lock = threading.Lock()
        self.readings = 0
        self.malformed = 0
        self._half_cycle = 0
        self._recent = deque(maxlen=SAMPLES_PER_HALF_CYCLE)

    # -- state machine ------------------------------------------------------

    @property
    def state(self) -> str:
        return self._state

    def status(self) -> dict:
        return {
            "status": self._state,
            "endpoint": self._endpoint,
            "readings": self.readings,
            "malformed": self.malformed,
            "data_dir": str(self.data_dir),
            "nominal_voltage": self.cfg.nominal_voltage,
            "nominal_frequency": self.cfg.nominal_frequency,
            "frequency_referential": True,
        }

    def connect(self, endpoint: str | None = None, baud: int = DEFAULT_BAUD) -> dict:
        endpoint = endpoint or default_endpoint()
        if not endpoint:
            raise ValueError("no endpoint given and PQ_ENDPOINT is not set")
        with self._lock:
            if self._state != DISCONNECTED:
                raise ConflictError(f"cannot connect while {self._state}")
            self._state = CONNECTING
        try:
            session = open_session(PortConfig(endpoint, baud))
        except (ConnectionError, ValueError):
            with self._lock:
                self._state = DISCONNECTED
            raise
        with self._lock:
            self._session = session
            self._endpoint = endpoint
            self.readings = 0
            self.malformed = 0
            self._half_cycle = 0
            self._recent.clear()
            self._state = STREAMING
            self._ingest_thread = threading.Thread(
                target=self._ingest, args=(session,), daemon=True
            )
            self._ingest_thread.start()
        return self.status()

    def disconnect(self) -> dict:
        with self._lock:
            session = self._session
            thread = self._ingest_thread
            self._session = None
            self._ingest_thread = None
        if session is not None:
            session.stop()
        if thread is not None and thread is not threading.current_thread():
            thread.join(timeout=5.0)
        announce = False
        with self._lock:
            if self._state != DISCONNECTED:
                self._state = DISCONNECTED
                announce = True
        if announce:
            self._publish({"type": "end", "status": DISCONNECTED})
        return self.status()

    def close(self) -> None:
        self.disconnect()
        self._writer.close()

    # -- ingest -------------------------------------------------------------

    def _ingest(self, session) -> None:
        batch = []
        session_readings = 0  # since the most recent session header
        try:
            for event in session.events():
                batch.append(event)
                if isinstance(event, Reading):
                    self.readings += 1
                    session_readings += 1
                    self._recent.append(event.count)
                    if session_readings % SAMPLES_PER_HALF_CYCLE == 0:
                        self._emit_half_cycle()
                elif isinstance(event, Malformed):
                    self.malformed += 1
                elif isinstance(event, SessionStart):
                    self._half_cycle = 0
                    session_readings = 0
                    self._recent.clear()
                if len(batch) >= _INGEST_BATCH:
                    self._writer.append(batch)
                    batch = []
            self._writer.append(batch)
        finally:
            ended_naturally = False
            with self._lock:
                if self._state == STREAMING and self._session is session:
                    self._state = DISCONNECTED
                    self._session = None
                    ended_naturally = True
            if ended_naturally:
                self._publish({"type": "end", "status": DISCONNECTED})

    def _emit_half_cycle(self) -> None:
        volts = counts_to_voltages(np.array(self._recent), self.cfg)
        value = float(np.sqrt(np.mean(volts * volts)))
        payload = {
            "type": "rms_half",
            "half_cycle": self._half_cycle,
            "value": value,
            "pu": value / self.cfg.nominal_voltage,
            "readings": self.readings,
            "malformed": self.malformed,
            "status": self._state,
        }
        self._half_cycle += 1
        self._publish(payload)

    # -- live push ----------------------------------------------------------

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=_LIVE_QUEUE_SIZE)
        with self._sub_lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._sub_lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _publish(self, payload: dict) -> None:
        with self._sub_lock:
            subscribers = list(self._subscribers)
        for q in subscribers:
            while True:
                try:
                    q.put_nowait(payload)
                    break
                except queue.Full:  # coalesce: drop the oldest update
                    try:
                        q.get_nowait()
                    except queue.Empty:
                        pass

    # -- analysis over committed storage -------------------------------------

    def _reader(self) -> RawStore:
        # fresh handle per request: snapshot reads, no shared file object
        return RawStore(self.data_dir / RAW_FILENAME)

    def window(self, cycles: int | None, view: str = "instantaneous") -> dict:
        if view not in _VIEW_ALIASES:
            raise ValueError(f"unknown view {view!r}; expected inst or rms")
        view = _VIEW_ALIASES[view]
        if cycles is not None and cycles < 1:
            raise ValueError(f"cycle count must be at least 1, got {cycles}")
        window, data = self._reader().read_window(self.cfg, cycles)
        stats = analyze_window(window)
        stats["frequency"] = self.cfg.nominal_frequency
        stats["frequency_referential"] = True
        payload = {
            "view": view,
            "cycles": window.cycles,
            "available_cycles": data.values.size // SAMPLES_PER_CYCLE,
            "session_timestamp": (
                format_timestamp(data.timestamp) if data.timestamp else None
            ),
            "stats": stats,
            "display": format_stats(stats),
        }
        if view == "instantaneous":
            t0 = window.start_index * 1000.0 / self.cfg.sample_rate
            payload["series"] = {
                "t_ms": [
                    t0 + i * 1000.0 / self.cfg.sample_rate for i in range(len(window))
                ],
                "values": window.voltages.tolist(),
            }
        else:
            series = rms_half_series(
                window.voltages,
                start_half_cycle=window.start_index // SAMPLES_PER_HALF_CYCLE,
            )
            payload["series"] = {
                "half_cycle": [
                    series.start_half_cycle + i for i in range(len(series))
                ],
                "values": series.values.tolist(),
            }
        return payload

    def fft(self, cycles: int | None) -> dict:
        if cycles is not None and cycles < 1:
            raise ValueError(f"cycle count must be at least 1, got {cycles}")
        window, _ = self._reader().read_window(self.cfg, cycles)
        hz, magnitude = display_spectrum(dft_magnitudes(window))
        return {
            "cycles": window.cycles,
            "bin_hz": self.cfg.nominal_frequency / window.cycles,
            "hz": hz.tolist(),
            "magnitude": magnitude.tolist(),
        }

    def report(self, session: int = -1) -> dict:
        data = self._reader().session(session)
        if data.values.size < SAMPLES_PER_HALF_CYCLE:
            raise InsufficientDataError(
                f"session holds {data.values.size} readings, need at least "
                f"{SAMPLES_PER_HALF_CYCLE} for one half-cycle",
                available=data.values.size,
            )
        series = rms_half_series(counts_to_voltages(data.values, self.cfg))
        events = classify_events(series, self.cfg, self.thresholds)
        report = build_report(
            events, series, self.cfg, self.thresholds, session_timestamp=data.timestamp
        )
        with RmsStore(self.data_dir / RMS_FILENAME) as rms_store:
            rms_store.write_session(series, data.timestamp)
        report_path = write_report_file(report, self.data_dir / REPORT_FILENAME)
        return {
            "session_timestamp": (
                format_timestamp(data.timestamp) if data.timestamp else None
            ),
            "half_cycles": report.half_cycles,
            "counts": {
                "sag": report.sag_count,
                "surge": report.surge_count,
                "interruption": report.interruption_count,
            },
            "min_rms": report.min_rms,
            "max_rms": report.max_rms,
            "min_pu": report.min_pu,
            "max_pu": report.max_pu,
            "nominal_voltage": report.nominal_voltage,
            "thresholds": {
                "sag_pu": self.thresholds.sag_pu,
                "surge_pu": self.thresholds.surge_pu,
                "interruption_pu": self.thresholds.interruption_pu,
            },
            "events": [
                {
                    "kind": e.kind,
                    "start_half_cycle": e.start_half_cycle,
                    "duration_half_cycles": e.duration_half_cycles,
                    "extreme_pu": e.extreme_pu,
                    "extreme_volts": e.extreme_pu * report.nominal_voltage,
                }
                for e in report.events
            ],
            "report_path": str(report_path),
            "rms_path": str(self.data_dir / RMS_FILENAME),
        }


class ConnectRequest(BaseModel):
    endpoint: Optional[str] = None
    baud: int = DEFAULT_BAUD


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, ConflictError):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, InsufficientDataError):
        return HTTPException(
            status_code=422,
            detail={"message": str(exc), "available": exc.available},
        )
    if isinstance(exc, ConnectionError):
        return HTTPException(status_code=400, detail=str(exc))
    if isinstance(exc, ValueError):
        return HTTPException(status_code=422, detail=str(exc))
    raise exc


def _parse_cycles(cycles: str) -> int | None:
    if cycles == "all":
        return None
    try:
        return int(cycles)
    except ValueError:
        raise HTTPException(
            status_code=422, detail=f"cycles must be an integer or 'all', got {cycles!r}"
        ) from None


def create_app(daemon: Daemon, ui_dir: str | Path | None = None) -> FastAPI:
    """Assemble the HTTP/WS API (and optionally the static UI) around a daemon."""
    app = FastAPI(title="pqmon", version="0.1.0")
    app.state.daemon = daemon

    @app.post("/api/connect")
    def api_connect(body: ConnectRequest) -> dict:
        try:
            return daemon.connect(body.endpoint, body.baud)
        except Exception as exc:
            raise _http_error(exc)

    @app.post("/api/disconnect")
    def api_disconnect() -> dict:
        return daemon.disconnect()

    @app.get("/api/status")
    def api_status() -> dict:
        return daemon.status()

    @app.get("/api/window")
    def api_window(
        cycles: str = Query(default="6"), view: str = Query(default="inst")
    ) -> dict:
        try:
            return daemon.window(_parse_cycles(cycles), view)
        except Exception as exc:
            raise _http_error(exc)

    @app.get("/api/fft")
    def api_fft(cycles: str = Query(default="6")) -> dict:
        try:
            return daemon.fft(_parse_cycles(cycles))
        except Exception as exc:
            raise _http_error(exc)

    @app.post("/api/report")
    def api_report() -> dict:
        try:
            return daemon.report()
        except Exception as exc:
            raise _http_error(exc)

    @app.websocket("/api/live")
    async def api_live(ws: WebSocket) -> None:
        await ws.accept()
        q = daemon.subscribe()
        try:
            if daemon.state != STREAMING:
                await ws.send_json({"type": "end", "status": daemon.state})
                return
            while True:
                try:
                    item = await run_in_threadpool(q.get, True, 1.0)
                except queue.Empty:
                    if daemon.state != STREAMING:
                        await ws.send_json({"type": "end", "status": daemon.state})
                        return
                    continue
                await ws.send_json(item)
                if item.get("type") == "end":
                    return
        except (WebSocketDisconnect, RuntimeError):
            pass  # client went away mid-send
        finally:
            daemon.unsubscribe(q)
            try:
                await ws.close()
            except RuntimeError:
                pass

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
