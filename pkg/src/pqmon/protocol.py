"""Wire protocol of the sampling device and acquisition session handling.

The device transmits one ADC reading per line as ASCII decimal digits with
CRLF framing at 2 Mbaud, which keeps each reading under the ~277 us budget
of the 3600 Hz sampling loop.  A line of the form ``#<ISO-8601 UTC>`` marks
the start of a transmission session.  The decoder is byte-oriented and
resilient: anything that is neither a valid reading nor a session header
becomes a Malformed event that is counted but never aborts decoding.
"""

from __future__ import annotations

import os
import socket
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterator, Union

from .conversion import ADC_MAX

DEFAULT_BAUD = 2_000_000
ENDPOINT_ENV_VAR = "PQ_ENDPOINT"
_RECV_SIZE = 4096
_POLL_INTERVAL = 0.2


@dataclass(frozen=True)
class SessionStart:
    """Marks the beginning of a transmission session."""

    timestamp: datetime


@dataclass(frozen=True)
class Reading:
    """One in-range ADC sample."""

    count: int

    def __post_init__(self) -> None:
        if not 0 <= self.count <= ADC_MAX:
            raise ValueError(f"reading out of range 0..{ADC_MAX}: {self.count}")


@dataclass(frozen=True)
class Malformed:
    """A line that decoded to neither a reading nor a session header."""

    raw: bytes


StreamEvent = Union[SessionStart, Reading, Malformed]


@dataclass(frozen=True)
class PortConfig:
    endpoint: str
    baud: int = DEFAULT_BAUD

    def __post_init__(self) -> None:
        if self.baud <= 0:
            raise ValueError(f"baud rate must be positive, got {self.baud}")
        if not self.endpoint:
            raise ValueError("endpoint must be non-empty")


def default_endpoint() -> str | None:
    """Endpoint taken from the PQ_ENDPOINT environment variable, if set."""
    return os.environ.get(ENDPOINT_ENV_VAR) or None


def format_timestamp(ts: datetime) -> str:
    """Render a UTC timestamp as ISO-8601 with a Z suffix, second precision."""
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def encode_reading(reading: Reading | int) -> bytes:
    """Encode one reading exactly as the firmware's println does: digits + CRLF."""
    count = reading.count if isinstance(reading, Reading) else int(reading)
    if not 0 <= count <= ADC_MAX:
        raise ValueError(f"reading out of range 0..{ADC_MAX}: {count}")
    return b"%d\r\n" % count


def encode_session_header(ts: datetime) -> bytes:
    """Encode the session-start line: '#' + ISO-8601 UTC timestamp + CRLF."""
    return b"#" + format_timestamp(ts).encode("ascii") + b"\r\n"


def _parse_line(line: bytes) -> StreamEvent:
    if line.startswith(b"#"):
        try:
            return SessionStart(parse_timestamp(line[1:].decode("ascii")))
        except (UnicodeDecodeError, ValueError):
            return Malformed(line)
    if line.isdigit():
        value = int(line)
        if value <= ADC_MAX:
            return Reading(value)
    return Malformed(line)


class StreamDecoder:
    """Incremental line decoder; tolerates arbitrary chunking of the byte stream.

    Output is independent of how the stream is split into feed() calls: a
    partial trailing line is buffered until more bytes arrive.  Accepts bare
    LF as well as the device's CRLF framing.
    """

    def __init__(self) -> None:
        self._buffer = b""
        self.malformed_count = 0

    def feed(self, data: bytes) -> list[StreamEvent]:
        self._buffer += data
        events: list[StreamEvent] = []
        while True:
            newline = self._buffer.find(b"\n")
            if newline < 0:
                break
            line = self._buffer[:newline].rstrip(b"\r")
            self._buffer = self._buffer[newline + 1 :]
            events.append(self._emit(line))
        return events

    def finish(self) -> list[StreamEvent]:
        """Flush the buffer at end of stream; a dangling line is decoded as-is."""
        if not self._buffer:
            return []
        line = self._buffer.rstrip(b"\r")
        self._buffer = b""
        return [self._emit(line)]

    def discard(self) -> None:
        """Drop any buffered partial line (used when a session is stopped)."""
        self._buffer = b""

    def _emit(self, line: bytes) -> StreamEvent:
        event = _parse_line(line)
        if isinstance(event, Malformed):
            self.malformed_count += 1
        return event


def decode_stream(data: bytes) -> list[StreamEvent]:
    """Decode a complete byte buffer into stream events."""
    decoder = StreamDecoder()
    return decoder.feed(data) + decoder.finish()


# A reader returns None when no data is available yet (poll again) and b""
# at end of stream.
Reader = Callable[[], "bytes | None"]


def _open_tcp(cfg: PortConfig) -> tuple[Reader, Callable[[], None]]:
    _, _, rest = cfg.endpoint.partition(":")
    host, _, port_text = rest.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConnectionError(f"malformed tcp endpoint {cfg.endpoint!r}; "
                              "expected tcp:<host>:<port>")
    try:
        sock = socket.create_connection((host, int(port_text)), timeout=5.0)
    except OSError as exc:
        raise ConnectionError(f"cannot connect to {cfg.endpoint}: {exc}") from exc
    sock.settimeout(_POLL_INTERVAL)

    def read() -> bytes | None:
        try:
            return sock.recv(_RECV_SIZE)
        except socket.timeout:
            return None
        except OSError:
            return b""

    def close() -> None:
        try:
            sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        sock.close()

    return read, close


def _open_serial(cfg: PortConfig) -> tuple[Reader, Callable[[], None]]:
    device = cfg.endpoint.partition(":")[2]
    try:
        import serial  # optional dependency (pqmon[serial])
    except ImportError as exc:
        raise ConnectionError(
            "serial endpoints need the pyserial package (install pqmon[serial])"
        ) from exc
    try:
        port = serial.Serial(device, baudrate=cfg.baud, timeout=_POLL_INTERVAL)
    except Exception as exc:
        raise ConnectionError(f"cannot open serial port {device}: {exc}") from exc

    def read() -> bytes | None:
        data = port.read(max(1, port.in_waiting))
        return data if data else None

    def close() -> None:
        port.close()

    return read, close


class AcquisitionSession:
    """A live, single-consumer stream of decoded events from one endpoint.

    The first event is always SessionStart(now); whatever the device itself
    sends (including its own header lines) follows.  stop() may be called
    from any thread and terminates the stream cleanly, discarding a partial
    trailing line.
    """

    def __init__(self, read: Reader, close: Callable[[], None]) -> None:
        self._read = read
        self._close = close
        self._decoder = StreamDecoder()
        self._stop = threading.Event()
        self.started_at = datetime.now(timezone.utc)

    @property
    def malformed_count(self) -> int:
        return self._decoder.malformed_count

    def events(self) -> Iterator[StreamEvent]:
        yield SessionStart(self.started_at)
        while not self._stop.is_set():
            data = self._read()
            if data is None:  # nothing available yet
                continue
            if data == b"":  # end of stream
                break
            yield from self._decoder.feed(data)
        if self._stop.is_set():
            self._decoder.discard()
        else:
            yield from self._decoder.finish()

    def stop(self) -> None:
        self._stop.set()
        self._close()

    def __enter__(self) -> "AcquisitionSession":
        return self

    def __exit__(self, *exc: object) -> None:
        self.stop()


def open_session(cfg: PortConfig) -> AcquisitionSession:
    """Open an acquisition session against a tcp: or serial: endpoint."""
    if cfg.endpoint.startswith("tcp:"):
        read, close = _open_tcp(cfg)
    elif cfg.endpoint.startswith("serial:"):
        read, close = _open_serial(cfg)
    else:
        raise ConnectionError(
            f"unknown endpoint scheme {cfg.endpoint!r}; "
            "expected tcp:<host>:<port> or serial:<device>"
        )
    return AcquisitionSession(read, close)
