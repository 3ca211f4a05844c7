"""Persistent artifacts: raw counts, RMS-half series and the text report.

Three files live in the data directory:

* ``dataRaw.bin``  -- every ADC reading of every session, as ASCII integers
  each followed by a comma; a ``#<ISO-8601>\\n`` header line starts each
  session, so value counts (and from them transmission time) fall out of
  simply counting commas.
* ``dataRMS.bin``  -- the same session framing with one 3-decimal RMS value
  per half-cycle, 30x lighter than the raw file.
* ``Report.txt``   -- the human-readable disturbance report of a session.

The ``.bin`` names are kept for compatibility with the capture format even
though the content is plain text.  One writer per file; readers parse a
snapshot up to the last fully written comma, so they can run while a
capture is appending.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable

import numpy as np

from .analysis import InsufficientDataError, SampleWindow, trim_to_whole_cycles
from .conversion import SAMPLES_PER_CYCLE, ConversionConfig, counts_to_voltages
from .events import PqEvent, PqReport, RmsHalfSeries, Thresholds
from .protocol import (
    Malformed,
    Reading,
    SessionStart,
    StreamEvent,
    format_timestamp,
    parse_timestamp,
)

RAW_FILENAME = "dataRaw.bin"
RMS_FILENAME = "dataRMS.bin"
REPORT_FILENAME = "Report.txt"
DATA_DIR_ENV_VAR = "PQ_DATA_DIR"
DEFAULT_DATA_DIR = "pq-data"


def resolve_data_dir(arg: str | os.PathLike | None = None, create: bool = True) -> Path:
    """Data directory from the explicit argument, PQ_DATA_DIR, or the default."""
    path = Path(arg or os.environ.get(DATA_DIR_ENV_VAR) or DEFAULT_DATA_DIR)
    if create:
        path.mkdir(parents=True, exist_ok=True)
    return path


class StorageError(OSError):
    """Raised when an artifact cannot be read or written."""


@dataclass(frozen=True)
class SessionData:
    """Parsed content of one session block."""

    timestamp: datetime | None
    values: np.ndarray  # ints for the raw store, floats for the RMS store


def _parse_session_blocks(text: str, numeric) -> list[SessionData]:
    """Split store text into sessions; values after the last comma are ignored."""
    sessions: list[tuple[datetime | None, list[str]]] = []
    current: tuple[datetime | None, list[str]] | None = None
    for line in text.split("\n"):
        if line.startswith("#"):
            try:
                ts = parse_timestamp(line[1:])
            except ValueError:
                ts = None
            current = (ts, [])
            sessions.append(current)
        elif line:
            if current is None:
                current = (None, [])
                sessions.append(current)
            current[1].append(line)
    parsed: list[SessionData] = []
    for ts, chunks in sessions:
        joined = "".join(chunks)
        complete = joined.rsplit(",", 1)[0] if "," in joined else ""
        raw_values = [v for v in complete.split(",") if v] if complete else []
        parsed.append(SessionData(ts, np.array([numeric(v) for v in raw_values])))
    return parsed


class _SessionFileWriter:
    """Shared append logic for the raw and RMS stores."""

    def __init__(self, path: str | os.PathLike) -> None:
        self.path = Path(path)
        self._fh = None

    def _handle(self):
        if self._fh is None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = open(self.path, "ab")
            except OSError as exc:
                raise StorageError(f"cannot open {self.path}: {exc}") from exc
        return self._fh

    def _at_line_start(self) -> bool:
        fh = self._handle()
        fh.flush()
        size = self.path.stat().st_size
        if size == 0:
            return True
        with open(self.path, "rb") as probe:
            probe.seek(size - 1)
            return probe.read(1) == b"\n"

    def _write_header(self, ts: datetime) -> None:
        fh = self._handle()
        prefix = b"" if self._at_line_start() else b"\n"
        fh.write(prefix + b"#" + format_timestamp(ts).encode("ascii") + b"\n")

    def flush(self) -> None:
        if self._fh is not None:
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _read_text(self) -> str:
        self.flush()
        if not self.path.exists():
            return ""
        try:
            return self.path.read_text(encoding="ascii")
        except OSError as exc:
            raise StorageError(f"cannot read {self.path}: {exc}") from exc

    def __enter__(self):
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


class RawStore(_SessionFileWriter):
    """Append-only store of raw ADC readings (``dataRaw.bin``)."""

    def __init__(self, path: str | os.PathLike) -> None:
        super().__init__(path)
        self.malformed_skipped = 0

    def append(self, events: Iterable[StreamEvent]) -> int:
        """Persist a batch of stream events; returns the number of readings written.

        Session starts open a new header line; malformed events are skipped
        and counted.  Each value is written together with its trailing comma,
        so a reader never sees a torn value.
        """
        fh = self._handle()
        written = 0
        try:
            for event in events:
                if isinstance(event, SessionStart):
                    self._write_header(event.timestamp)
                elif isinstance(event, Reading):
                    fh.write(b"%d," % event.count)
                    written += 1
                elif isinstance(event, Malformed):
                    self.malformed_skipped += 1
                else:
                    raise TypeError(f"unexpected stream event {event!r}")
            fh.flush()
        except OSError as exc:
            raise StorageError(f"cannot append to {self.path}: {exc}") from exc
        return written

    def sessions(self) -> list[SessionData]:
        return _parse_session_blocks(self._read_text(), int)

    def session(self, index: int = -1) -> SessionData:
        sessions = self.sessions()
        if not sessions:
            raise InsufficientDataError(f"no sessions stored in {self.path}")
        try:
            return sessions[index]
        except IndexError:
            raise InsufficientDataError(
                f"no session {index}; {len(sessions)} stored"
            ) from None

    def read_window(
        self,
        cfg: ConversionConfig,
        cycles: int | None = None,
        session: int = -1,
    ) -> tuple[SampleWindow, SessionData]:
        """Convert the last `cycles` whole cycles of a session to a voltage window.

        cycles=None takes every whole cycle in the session.
        """
        data = self.session(session)
        available = data.values.size // SAMPLES_PER_CYCLE
        if cycles is not None:
            if cycles < 1:
                raise ValueError(f"cycle count must be positive, got {cycles}")
            if available < cycles:
                raise InsufficientDataError(
                    f"session holds {available} whole cycle(s), need {cycles}",
                    available=available,
                )
            counts = data.values[-cycles * SAMPLES_PER_CYCLE :]
            start = data.values.size - counts.size
            window = SampleWindow(
                counts_to_voltages(counts, cfg), cycles, start_index=start
            )
        else:
            if available < 1:
                raise InsufficientDataError(
                    f"session holds only {data.values.size} readings, "
                    f"need {SAMPLES_PER_CYCLE} for one cycle",
                    available=0,
                )
            window = trim_to_whole_cycles(counts_to_voltages(data.values, cfg))
        return window, data


class RmsStore(_SessionFileWriter):
    """Session-framed store of RMS-half values (``dataRMS.bin``)."""

    def write_session(self, series: RmsHalfSeries, timestamp: datetime | None) -> int:
        """Append one session of RMS-half values, 3 decimals each."""
        fh = self._handle()
        try:
            if timestamp is not None:
                self._write_header(timestamp)
            elif not self._at_line_start():
                fh.write(b"\n")
            for value in series.values:
                fh.write(b"%.3f," % value)
            fh.flush()
        except OSError as exc:
            raise StorageError(f"cannot append to {self.path}: {exc}") from exc
        return len(series)

    def sessions(self) -> list[SessionData]:
        return _parse_session_blocks(self._read_text(), float)

    def read_session(self, index: int = -1) -> RmsHalfSeries:
        sessions = self.sessions()
        if not sessions:
            raise InsufficientDataError(f"no sessions stored in {self.path}")
        data = sessions[index]
        return RmsHalfSeries(data.values, session_id=(
            format_timestamp(data.timestamp) if data.timestamp else None
        ))


_REPORT_COUNTS = (
    ("Voltage sags", "sag_count"),
    ("Voltage surges", "surge_count"),
    ("Interruptions", "interruption_count"),
)
_EVENT_LINE = re.compile(
    r"^\s*(?P<kind>\w+)\s+start half-cycle (?P<start>\d+)\s+"
    r"duration (?P<duration>\d+) half-cycle\(s\)\s+"
    r"extreme (?P<pu>[0-9.]+) pu \((?P<volts>[0-9.]+) V\)\s*$"
)


def write_report_file(report: PqReport, path: str | os.PathLike) -> Path:
    """Render the disturbance report as Report.txt and return its path."""
    t = report.thresholds
    lines = [
        "Power quality analysis report",
        "=============================",
        "Session:              "
        + (format_timestamp(report.session_timestamp)
           if report.session_timestamp else "(unknown)"),
        f"Half-cycles analyzed: {report.half_cycles}",
        f"Nominal voltage:      {report.nominal_voltage:.3f} V",
        f"Thresholds:           sag < {t.sag_pu:.3f} pu, "
        f"surge > {t.surge_pu:.3f} pu, interruption < {t.interruption_pu:.3f} pu",
        "",
        f"Voltage sags:          {report.sag_count}",
        f"Voltage surges:        {report.surge_count}",
        f"Interruptions:         {report.interruption_count}",
        f"Lowest RMS 1/2:        {report.min_rms:.3f} V ({report.min_pu:.3f} pu)",
        f"Highest RMS 1/2:       {report.max_rms:.3f} V ({report.max_pu:.3f} pu)",
        "",
    ]
    if report.events:
        lines.append("Events:")
        for e in report.events:
            volts = e.extreme_pu * report.nominal_voltage
            lines.append(
                f"  {e.kind}  start half-cycle {e.start_half_cycle}  "
                f"duration {e.duration_half_cycles} half-cycle(s)  "
                f"extreme {e.extreme_pu:.3f} pu ({volts:.3f} V)"
            )
    else:
        lines.append("No voltage sags, surges or interruptions occurred.")
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path


def read_report_file(path: str | os.PathLike) -> dict:
    """Parse a Report.txt back into counts and event tuples (for verification)."""
    text = Path(path).read_text(encoding="utf-8")
    parsed: dict = {"events": []}
    for line in text.splitlines():
        for label, key in _REPORT_COUNTS:
            if line.startswith(label + ":"):
                parsed[key] = int(line.split(":", 1)[1])
        if line.startswith("Half-cycles analyzed:"):
            parsed["half_cycles"] = int(line.split(":", 1)[1])
        match = _EVENT_LINE.match(line)
        if match:
            parsed["events"].append(
                PqEvent(
                    kind=match["kind"],
                    start_half_cycle=int(match["start"]),
                    duration_half_cycles=int(match["duration"]),
                    extreme_pu=float(match["pu"]),
                )
            )
    return parsed
