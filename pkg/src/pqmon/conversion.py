"""Calibration constants and ADC count <-> instantaneous-voltage conversions.

The analog front end divides the mains signal down to a small fraction of
its amplitude (a resistive divider), shifts it with a DC offset source so
the whole waveform sits inside the converter's unipolar input range, and
samples it with a 10-bit ADC at 3600 Hz.  A stored count c therefore maps
back to the instantaneous mains voltage as

    v = (c * vref / 1023 - offset) / ratio

and every module downstream of acquisition works in these reconstructed
volts.  The three calibration constants (analog reference, offset source,
divider ratio) are runtime configuration because they are the dominant
error sources of the whole instrument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

ADC_MAX = 1023          # 10-bit converter; ADC_MAX maps to the analog reference
SAMPLE_RATE = 3600      # samples per second
MAINS_FREQUENCY = 60    # nominal mains frequency, Hz
SAMPLES_PER_CYCLE = SAMPLE_RATE // MAINS_FREQUENCY       # 60
SAMPLES_PER_HALF_CYCLE = SAMPLES_PER_CYCLE // 2          # 30

# config-file key -> ConversionConfig field
_CONFIG_FIELDS = {
    "vref_volts": "vref",
    "offset_volts": "offset",
    "divider_ratio": "ratio",
    "nominal_voltage": "nominal_voltage",
}


@dataclass(frozen=True)
class ConversionConfig:
    """Calibration constants of the acquisition front end.

    Attributes:
        vref: ADC analog reference in volts; a count of 1023 reads this value.
        offset: DC offset source in volts that re-centers the divided signal.
        ratio: fraction of the mains voltage the divider passes through.
        sample_rate: fixed 3600 Hz (60 samples per 60 Hz cycle).
        nominal_voltage: nominal mains RMS voltage, used for per-unit values.
        nominal_frequency: displayed mains frequency; referential only.
    """

    vref: float = 5.0
    offset: float = 3.3
    ratio: float = 0.005
    sample_rate: int = SAMPLE_RATE
    nominal_voltage: float = 120.0
    nominal_frequency: float = float(MAINS_FREQUENCY)

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"divider ratio must be in (0, 1), got {self.ratio}")
        if not 0.0 < self.offset < self.vref:
            raise ValueError(
                f"offset must lie inside (0, vref={self.vref}), got {self.offset}"
            )
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"sample rate is fixed at {SAMPLE_RATE} Hz")
        if self.nominal_voltage <= 0.0:
            raise ValueError("nominal voltage must be positive")
        # The highest admissible input peak must map strictly inside the
        # converter's 0..vref window, otherwise nominal mains would clip.
        peak = self.nominal_voltage * math.sqrt(2.0)
        low = self.offset - self.ratio * peak
        high = self.offset + self.ratio * peak
        if not (0.0 < low and high < self.vref):
            raise ValueError(
                f"nominal peak maps to [{low:.3f}, {high:.3f}] V, "
                f"outside the ADC input range (0, {self.vref}) V"
            )

    @property
    def volts_per_count(self) -> float:
        """Reconstructed volts spanned by one ADC count (the quantization step)."""
        return self.vref / ADC_MAX / self.ratio

    @classmethod
    def from_mapping(cls, values: Mapping[str, float], **overrides: float) -> "ConversionConfig":
        """Build a config from config-file keys, then apply keyword overrides."""
        kwargs = {
            field: float(values[key])
            for key, field in _CONFIG_FIELDS.items()
            if key in values
        }
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def with_overrides(self, **overrides: float) -> "ConversionConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def divider_ratio(r_top: float, r_bottom: float) -> float:
    """Output fraction of a two-resistor divider: r_bottom / (r_top + r_bottom)."""
    if r_top <= 0 or r_bottom <= 0:
        raise ValueError(
            f"divider resistances must be positive, got {r_top} and {r_bottom}"
        )
    return r_bottom / (r_top + r_bottom)


def adc_to_voltage(count: int, cfg: ConversionConfig) -> float:
    """Reconstruct the instantaneous mains voltage from one ADC count."""
    if not 0 <= count <= ADC_MAX:
        raise ValueError(f"ADC count out of range 0..{ADC_MAX}: {count}")
    return (count * cfg.vref / ADC_MAX - cfg.offset) / cfg.ratio


def counts_to_voltages(counts: np.ndarray, cfg: ConversionConfig) -> np.ndarray:
    """Vectorized adc_to_voltage for stored count arrays."""
    counts = np.asarray(counts, dtype=np.float64)
    return (counts * (cfg.vref / ADC_MAX) - cfg.offset) / cfg.ratio


def voltage_to_adc(v: float, cfg: ConversionConfig) -> int:
    """Quantize an instantaneous voltage to the ADC count that would read it.

    Rounds half away from zero and saturates at the converter rails, which
    is what the real input stage does when driven past its range.
    """
    u = (v * cfg.ratio + cfg.offset) * ADC_MAX / cfg.vref
    count = math.floor(u + 0.5) if u >= 0 else math.ceil(u - 0.5)
    return min(max(count, 0), ADC_MAX)


def voltages_to_adc(v: np.ndarray, cfg: ConversionConfig) -> np.ndarray:
    """Vectorized voltage_to_adc; returns an int array clipped to the rails."""
    u = (np.asarray(v, dtype=np.float64) * cfg.ratio + cfg.offset) * ADC_MAX / cfg.vref
    counts = np.where(u >= 0, np.floor(u + 0.5), np.ceil(u - 0.5))
    return np.clip(counts, 0, ADC_MAX).astype(np.int64)


def load_config_file(path: str | Path) -> dict[str, float]:
    """Parse a `key = value` text config; '#' starts a comment, blanks ignored.

    Returns the raw key/value map so both the conversion constants and the
    event thresholds can be drawn from one file.
    """
    values: dict[str, float] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        try:
            values[key.strip()] = float(raw.strip())
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {raw.strip()!r} is not a number") from exc
    return values
