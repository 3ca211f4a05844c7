"""Half-cycle RMS series and sag/surge/interruption classification.

Disturbance detection runs on RMS-half values: one RMS figure per block of
30 consecutive samples (half a mains cycle), which shrinks a session by a
factor of 30 while preserving the envelope changes that sags and surges
produce.  Classification is per-unit against the nominal voltage with the
conventional bands: below 0.9 pu is a sag, above 1.1 pu a surge, and below
0.1 pu an interruption (which takes precedence over sag).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from .analysis import InsufficientDataError
from .conversion import SAMPLES_PER_HALF_CYCLE, ConversionConfig

SAG = "sag"
SURGE = "surge"
INTERRUPTION = "interruption"
EVENT_KINDS = (SAG, SURGE, INTERRUPTION)

_THRESHOLD_FIELDS = {
    "sag_pu": "sag_pu",
    "surge_pu": "surge_pu",
    "interruption_pu": "interruption_pu",
}


@dataclass(frozen=True)
class Thresholds:
    """Per-unit classification bands; values outside [sag_pu, surge_pu] are events."""

    sag_pu: float = 0.9
    surge_pu: float = 1.1
    interruption_pu: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.interruption_pu < self.sag_pu < 1.0 < self.surge_pu:
            raise ValueError(
                "thresholds must satisfy 0 < interruption_pu < sag_pu < 1 < surge_pu, "
                f"got {self}"
            )

    @classmethod
    def from_mapping(cls, values: Mapping[str, float], **overrides: float) -> "Thresholds":
        kwargs = {
            field_: float(values[key])
            for key, field_ in _THRESHOLD_FIELDS.items()
            if key in values
        }
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)


@dataclass(frozen=True)
class RmsHalfSeries:
    """One RMS value per half-cycle block, indexed from the session start."""

    values: np.ndarray
    start_half_cycle: int = 0
    session_id: str | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("RMS-half series must be one-dimensional")

    def __len__(self) -> int:
        return self.values.size


def rms_half_series(
    samples, start_half_cycle: int = 0, session_id: str | None = None
) -> RmsHalfSeries:
    """RMS of consecutive non-overlapping 30-sample blocks.

    A trailing remainder shorter than one half-cycle is dropped.
    """
    samples = np.asarray(samples, dtype=np.float64)
    blocks = samples.size // SAMPLES_PER_HALF_CYCLE
    if blocks < 1:
        raise InsufficientDataError(
            f"need at least {SAMPLES_PER_HALF_CYCLE} samples for one half-cycle, "
            f"got {samples.size}",
            available=samples.size,
        )
    kept = samples[: blocks * SAMPLES_PER_HALF_CYCLE]
    squared = kept.reshape(blocks, SAMPLES_PER_HALF_CYCLE) ** 2
    return RmsHalfSeries(
        np.sqrt(squared.mean(axis=1)), start_half_cycle, session_id
    )


@dataclass(frozen=True)
class PqEvent:
    """A classified disturbance: a maximal run of out-of-band half-cycles."""

    kind: str
    start_half_cycle: int
    duration_half_cycles: int
    extreme_pu: float

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.duration_half_cycles < 1:
            raise ValueError("event duration must be at least one half-cycle")


def _kind_of(pu: float, thresholds: Thresholds) -> str | None:
    if pu < thresholds.interruption_pu:
        return INTERRUPTION
    if pu < thresholds.sag_pu:
        return SAG
    if pu > thresholds.surge_pu:
        return SURGE
    return None


def classify_events(
    series: RmsHalfSeries,
    cfg: ConversionConfig,
    thresholds: Thresholds = Thresholds(),
) -> list[PqEvent]:
    """Classify each half-cycle and merge consecutive same-kind runs into events.

    Interruption takes precedence over sag (a half-cycle below 0.1 pu is an
    interruption, never a sag), and each out-of-band half-cycle belongs to
    exactly one event.  Deterministic: identical inputs give identical events.
    """
    if len(series) == 0:
        raise ValueError("cannot classify an empty RMS-half series")
    pu = series.values / cfg.nominal_voltage
    events: list[PqEvent] = []
    run_kind: str | None = None
    run_start = 0
    run_extreme = 0.0

    def close_run(end: int) -> None:
        if run_kind is not None:
            events.append(
                PqEvent(
                    kind=run_kind,
                    start_half_cycle=series.start_half_cycle + run_start,
                    duration_half_cycles=end - run_start,
                    extreme_pu=float(run_extreme),
                )
            )

    for i, value in enumerate(pu):
        kind = _kind_of(float(value), thresholds)
        if kind != run_kind:
            close_run(i)
            run_kind = kind
            run_start = i
            run_extreme = float(value)
        elif kind is not None:
            # worst value: highest for a surge, lowest for sag/interruption
            if kind == SURGE:
                run_extreme = max(run_extreme, float(value))
            else:
                run_extreme = min(run_extreme, float(value))
    close_run(len(series))
    return events


@dataclass(frozen=True)
class PqReport:
    """Aggregate disturbance report over one session's RMS-half series."""

    session_timestamp: datetime | None
    half_cycles: int
    sag_count: int
    surge_count: int
    interruption_count: int
    min_rms: float
    max_rms: float
    min_pu: float
    max_pu: float
    nominal_voltage: float
    thresholds: Thresholds
    events: tuple[PqEvent, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        tallies = {kind: 0 for kind in EVENT_KINDS}
        for event in self.events:
            tallies[event.kind] += 1
        recorded = (self.sag_count, self.surge_count, self.interruption_count)
        if recorded != (tallies[SAG], tallies[SURGE], tallies[INTERRUPTION]):
            raise ValueError(
                f"per-kind counts {recorded} do not match the event list {tallies}"
            )

    @property
    def total_events(self) -> int:
        return len(self.events)


def build_report(
    events: Iterable[PqEvent] | Sequence[PqEvent],
    series: RmsHalfSeries,
    cfg: ConversionConfig,
    thresholds: Thresholds = Thresholds(),
    session_timestamp: datetime | None = None,
) -> PqReport:
    """Aggregate classified events and series extremes into a report."""
    events = tuple(events)
    if len(series) == 0:
        raise ValueError("cannot report on an empty RMS-half series")
    min_rms = float(series.values.min())
    max_rms = float(series.values.max())
    return PqReport(
        session_timestamp=session_timestamp,
        half_cycles=len(series),
        sag_count=sum(1 for e in events if e.kind == SAG),
        surge_count=sum(1 for e in events if e.kind == SURGE),
        interruption_count=sum(1 for e in events if e.kind == INTERRUPTION),
        min_rms=min_rms,
        max_rms=max_rms,
        min_pu=min_rms / cfg.nominal_voltage,
        max_pu=max_rms / cfg.nominal_voltage,
        nominal_voltage=cfg.nominal_voltage,
        thresholds=thresholds,
        events=events,
    )
