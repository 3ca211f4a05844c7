"""Mains waveform generator that speaks the device wire protocol over TCP.

Stands in for the sampling hardware: synthesizes a 60 Hz waveform with
optional harmonics, Gaussian noise and amplitude disturbances, quantizes
each sample exactly as the 10-bit front end would, and streams the counts
as ASCII lines at the nominal 3600 readings/s.  Disturbances are applied
as per-unit amplitude multipliers on half-cycle boundaries, at absolute
half-cycle indices counted from the start of the connection, so an
injected event occurs once even though the base waveform loops forever.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import HARMONIC_MAX, HARMONIC_MIN
from .conversion import (
    MAINS_FREQUENCY,
    SAMPLE_RATE,
    SAMPLES_PER_CYCLE,
    SAMPLES_PER_HALF_CYCLE,
    ConversionConfig,
    voltages_to_adc,
)
from .events import EVENT_KINDS, INTERRUPTION, SAG, SURGE
from .protocol import encode_session_header

DEFAULT_BATCH_SIZE = 36          # readings per paced batch
DEFAULT_BATCH_INTERVAL = DEFAULT_BATCH_SIZE / SAMPLE_RATE   # 10 ms


@dataclass(frozen=True)
class Harmonic:
    """A harmonic component; amplitude is relative to the fundamental's peak."""

    order: int
    amplitude: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not HARMONIC_MIN <= self.order <= HARMONIC_MAX:
            raise ValueError(
                f"harmonic order must be in {HARMONIC_MIN}..{HARMONIC_MAX}, "
                f"got {self.order}"
            )
        if self.amplitude < 0:
            raise ValueError("harmonic amplitude must be non-negative")


@dataclass(frozen=True)
class WaveformSpec:
    fundamental_rms: float = 120.0
    frequency: float = float(MAINS_FREQUENCY)
    harmonics: tuple[Harmonic, ...] = ()
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "harmonics", tuple(self.harmonics))
        if self.fundamental_rms < 0:
            raise ValueError("fundamental RMS must be non-negative")
        if self.frequency != MAINS_FREQUENCY:
            raise ValueError(f"the generator runs at a fixed {MAINS_FREQUENCY} Hz")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")
        orders = [h.order for h in self.harmonics]
        if len(orders) != len(set(orders)):
            raise ValueError(f"harmonic orders must be distinct, got {orders}")


@dataclass(frozen=True)
class DisturbanceSpec:
    """An amplitude disturbance over a run of half-cycles."""

    kind: str
    start_half_cycle: int
    duration_half_cycles: int
    magnitude_pu: float

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.start_half_cycle < 0:
            raise ValueError("disturbance start must be non-negative")
        if self.duration_half_cycles < 1:
            raise ValueError("disturbance duration must be at least one half-cycle")
        if self.magnitude_pu < 0:
            raise ValueError("disturbance magnitude must be non-negative")
        if self.kind == SAG and not self.magnitude_pu < 1:
            raise ValueError(f"a sag needs magnitude_pu < 1, got {self.magnitude_pu}")
        if self.kind == SURGE and not self.magnitude_pu > 1:
            raise ValueError(f"a surge needs magnitude_pu > 1, got {self.magnitude_pu}")
        if self.kind == INTERRUPTION and not self.magnitude_pu < 0.1:
            raise ValueError(
                f"an interruption needs magnitude_pu ~ 0, got {self.magnitude_pu}"
            )

    @property
    def end_half_cycle(self) -> int:
        return self.start_half_cycle + self.duration_half_cycles


def _synthesize_range(
    spec: WaveformSpec,
    disturbances: Sequence[DisturbanceSpec],
    start: int,
    stop: int,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Samples for absolute indices [start, stop) of the continuous waveform."""
    n = np.arange(start, stop, dtype=np.float64)
    amplitude = spec.fundamental_rms * np.sqrt(2.0)
    phase = 2.0 * np.pi * n / SAMPLES_PER_CYCLE
    v = amplitude * np.sin(phase)
    for h in spec.harmonics:
        v += amplitude * h.amplitude * np.sin(h.order * phase + h.phase)
    if disturbances:
        half_cycle = np.arange(start, stop) // SAMPLES_PER_HALF_CYCLE
        scale = np.ones_like(v)
        for d in disturbances:
            active = (half_cycle >= d.start_half_cycle) & (half_cycle < d.end_half_cycle)
            scale[active] *= d.magnitude_pu
        v *= scale
    if spec.noise_sigma > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        v += rng.normal(0.0, spec.noise_sigma, v.size)
    return v


def synthesize(
    spec: WaveformSpec,
    disturbances: Sequence[DisturbanceSpec] = (),
    n_cycles: int = 6,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """n_cycles*60 instantaneous voltages of the configured waveform."""
    if n_cycles < 1:
        raise ValueError(f"need at least one cycle, got {n_cycles}")
    last_half_cycle = n_cycles * 2
    for d in disturbances:
        if d.end_half_cycle > last_half_cycle:
            raise ValueError(
                f"disturbance [{d.start_half_cycle}, {d.end_half_cycle}) lies "
                f"beyond the {last_half_cycle} half-cycles generated"
            )
    return _synthesize_range(spec, disturbances, 0, n_cycles * SAMPLES_PER_CYCLE, rng)


def _read_replay_counts(path: Path) -> list[int]:
    """Counts of the last session in a raw store file (header + 'v,' grammar)."""
    text = path.read_text(encoding="ascii")
    values = ""
    for line in text.splitlines():
        if line.startswith("#"):
            values = ""
        else:
            values += line
    counts = [int(v) for v in values.split(",") if v]
    if not counts:
        raise ValueError(f"no readings found in {path}")
    return counts


class SimulatorServer:
    """Serves the synthesized waveform (or a recorded session) over TCP.

    Each accepted connection gets a fresh session: a header line with the
    current UTC time, then quantized readings paced against absolute
    deadlines (batches of 36 every 10 ms = 3600/s nominal).  Connections
    are handled one at a time; the sample counter restarts per connection.
    """

    def __init__(
        self,
        spec: WaveformSpec | None = None,
        disturbances: Sequence[DisturbanceSpec] = (),
        cfg: ConversionConfig | None = None,
        listen: str = "tcp:127.0.0.1:0",
        replay_path: str | Path | None = None,
        max_readings: int | None = None,
        pace: bool = True,
        seed: int | None = None,
    ) -> None:
        self.spec = spec if spec is not None else WaveformSpec()
        self.disturbances = tuple(disturbances)
        self.cfg = cfg if cfg is not None else ConversionConfig()
        self.replay_path = Path(replay_path) if replay_path else None
        self.max_readings = max_readings
        self.pace = pace
        self._seed = seed
        self._listen_spec = listen
        self._server: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self._conn_lock = threading.Lock()
        self._conn: socket.socket | None = None
        self.readings_sent = 0    # over the most recent connection

    @property
    def endpoint(self) -> str:
        """Connectable endpoint string, with the actual bound port."""
        if self._server is None:
            raise RuntimeError("simulator is not running")
        host, port = self._server.getsockname()[:2]
        if host == "0.0.0.0":
            host = "127.0.0.1"
        return f"tcp:{host}:{port}"

    def start(self) -> "SimulatorServer":
        if not self._listen_spec.startswith("tcp:"):
            raise ValueError(f"listen endpoint must be tcp:<host>:<port>, "
                             f"got {self._listen_spec!r}")
        _, _, rest = self._listen_spec.partition(":")
        host, _, port_text = rest.rpartition(":")
        try:
            server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            server.bind((host, int(port_text)))
            server.listen(1)
        except (OSError, ValueError) as exc:
            raise ConnectionError(
                f"cannot listen on {self._listen_spec}: {exc}"
            ) from exc
        server.settimeout(0.2)
        self._server = server
        self._thread = threading.Thread(target=self._serve_loop, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        with self._conn_lock:
            if self._conn is not None:
                try:
                    self._conn.close()
                except OSError:
                    pass
        if self._server is not None:
            self._server.close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self) -> "SimulatorServer":
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()

    # -- emission ---------------------------------------------------------

    def _serve_loop(self) -> None:
        assert self._server is not None
        while not self._stop.is_set():
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with self._conn_lock:
                self._conn = conn
            try:
                self._stream(conn)
            except OSError:
                pass  # client went away; wait for the next one
            finally:
                with self._conn_lock:
                    self._conn = None
                try:
                    conn.close()
                except OSError:
                    pass

    def _batches(self):
        """Yield successive arrays of ADC counts for one connection."""
        if self.replay_path is not None:
            counts = np.asarray(_read_replay_counts(self.replay_path))
            for i in range(0, counts.size, DEFAULT_BATCH_SIZE):
                yield counts[i : i + DEFAULT_BATCH_SIZE]
            return
        rng = np.random.default_rng(self._seed)
        index = 0
        while True:
            v = _synthesize_range(
                self.spec, self.disturbances, index, index + DEFAULT_BATCH_SIZE, rng
            )
            index += DEFAULT_BATCH_SIZE
            yield voltages_to_adc(v, self.cfg)

    def _stream(self, conn: socket.socket) -> None:
        self.readings_sent = 0
        conn.sendall(encode_session_header(datetime.now(timezone.utc)))
        deadline = time.monotonic()
        for batch in self._batches():
            if self._stop.is_set():
                return
            if self.max_readings is not None:
                remaining = self.max_readings - self.readings_sent
                if remaining <= 0:
                    return
                batch = batch[:remaining]
            payload = b"".join(b"%d\r\n" % c for c in batch)
            if self.pace:
                deadline += batch.size / SAMPLE_RATE
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            conn.sendall(payload)
            self.readings_sent += int(batch.size)
