"""Cycle windowing, RMS/peak measures, DFT magnitudes and spike-filtered THD.

Analysis always operates on windows covering an integer number of 60 Hz
cycles (60 samples each at 3600 Hz), so a steady tone at a multiple of the
mains frequency lands exactly on one DFT bin and leaks nothing into its
neighbors.  The harmonic filter exploits that: a harmonic contributes to
the distortion figure only when its bin is a strict local maximum, i.e. a
spike that breaks the decaying pattern of the surrounding spectrum, which
rejects broadband noise-floor bins.

Magnitudes are kept unnormalized (raw DFT sums); the distortion figure is
a ratio so the normalization cancels, and display_spectrum applies the
2/L factor that makes a sine of amplitude A plot as A volts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conversion import MAINS_FREQUENCY, SAMPLES_PER_CYCLE

HARMONIC_MIN = 2
HARMONIC_MAX = 25

# |DFT| values below this fraction of the spectral peak are numerical noise
# (the transform is only meaningful to ~1e-9 relative) and are clamped to
# exactly 0.0 so the strict spike comparisons see true zeros instead of
# float roundoff.
SUBNOISE_RELATIVE = 1e-9


class InsufficientDataError(ValueError):
    """Raised when fewer samples are stored than an operation needs."""

    def __init__(self, message: str, available: int = 0) -> None:
        super().__init__(message)
        self.available = available


@dataclass(frozen=True)
class SampleWindow:
    """A contiguous run of instantaneous voltages covering whole cycles."""

    voltages: np.ndarray
    cycles: int
    start_index: int = 0

    def __post_init__(self) -> None:
        voltages = np.asarray(self.voltages, dtype=np.float64)
        voltages.setflags(write=False)
        object.__setattr__(self, "voltages", voltages)
        if self.cycles < 1:
            raise ValueError(f"a window needs at least one cycle, got {self.cycles}")
        expected = self.cycles * SAMPLES_PER_CYCLE
        if voltages.shape != (expected,):
            raise ValueError(
                f"{self.cycles} cycles require {expected} samples, "
                f"got {voltages.shape}"
            )

    def __len__(self) -> int:
        return self.voltages.size


def trim_to_whole_cycles(samples, start_index: int = 0) -> SampleWindow:
    """Keep the most recent whole-cycle span of a sample sequence.

    The newest data wins: for 400 samples the first 40 are dropped and the
    window covers the last 6 cycles.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError("expected a one-dimensional sample sequence")
    cycles = samples.size // SAMPLES_PER_CYCLE
    if cycles < 1:
        raise InsufficientDataError(
            f"need at least {SAMPLES_PER_CYCLE} samples for one cycle, "
            f"got {samples.size}",
            available=samples.size,
        )
    kept = cycles * SAMPLES_PER_CYCLE
    dropped = samples.size - kept
    return SampleWindow(samples[dropped:], cycles, start_index=start_index + dropped)


def rms(window: SampleWindow) -> float:
    """Root mean square of the window: sqrt(mean(v^2))."""
    v = window.voltages
    return float(np.sqrt(np.mean(v * v)))


def peak(window: SampleWindow) -> float:
    """Highest absolute value in the window: max(max(v), |min(v)|)."""
    v = window.voltages
    return float(max(np.max(v), abs(np.min(v))))


@dataclass(frozen=True)
class Spectrum:
    """Unnormalized DFT magnitudes of a whole-cycle window.

    magnitudes[k] = |sum_m v[m] exp(-2*pi*j*k*m/L)| for k in 0..L-1 with
    L = cycles*60; consumers read the positive-frequency half (k <= L/2),
    which spans 0..1800 Hz.  Harmonic h of the mains sits at bin h*cycles.
    """

    magnitudes: np.ndarray
    cycles: int

    def __post_init__(self) -> None:
        magnitudes = np.asarray(self.magnitudes, dtype=np.float64)
        magnitudes.setflags(write=False)
        object.__setattr__(self, "magnitudes", magnitudes)
        if magnitudes.ndim != 1 or magnitudes.size != self.cycles * SAMPLES_PER_CYCLE:
            raise ValueError("spectrum length must equal cycles * 60")

    @property
    def bin_hz(self) -> float:
        """Frequency resolution: 60/cycles Hz per bin."""
        return MAINS_FREQUENCY / self.cycles

    def harmonic_bin(self, order: int) -> int:
        return order * self.cycles


def dft_magnitudes(window: SampleWindow) -> Spectrum:
    """Magnitude spectrum of the window, sub-noise values clamped to zero."""
    mags = np.abs(np.fft.fft(window.voltages))
    peak_mag = mags.max()
    if peak_mag > 0.0:
        mags[mags < peak_mag * SUBNOISE_RELATIVE] = 0.0
    return Spectrum(mags, window.cycles)


@dataclass(frozen=True)
class HarmonicEntry:
    order: int
    magnitude: float
    is_spike: bool


@dataclass(frozen=True)
class HarmonicTable:
    """Fundamental magnitude plus the spike-filtered harmonics 2..25."""

    fundamental: float
    entries: tuple[HarmonicEntry, ...]

    def spikes(self) -> tuple[HarmonicEntry, ...]:
        return tuple(e for e in self.entries if e.is_spike)


def harmonic_table(spectrum: Spectrum) -> HarmonicTable:
    """Extract harmonics 2..25 and mark the spikes.

    A harmonic bin is a spike only when its magnitude strictly exceeds both
    neighboring bins; ties and bins buried in a noise floor are excluded.
    Requires at least 2 cycles so a harmonic's neighbors are not themselves
    harmonic bins.
    """
    if spectrum.cycles < 2:
        raise ValueError("spike detection needs a window of at least 2 cycles")
    mags = spectrum.magnitudes
    fundamental = float(mags[spectrum.harmonic_bin(1)])
    entries = []
    for order in range(HARMONIC_MIN, HARMONIC_MAX + 1):
        k = spectrum.harmonic_bin(order)
        is_spike = bool(mags[k] > mags[k - 1] and mags[k] > mags[k + 1])
        entries.append(HarmonicEntry(order, float(mags[k]), is_spike))
    return HarmonicTable(fundamental, tuple(entries))


def thd(table: HarmonicTable) -> float:
    """Total harmonic distortion: RMS sum of spike harmonics over the fundamental."""
    if table.fundamental <= 0.0:
        raise ValueError("degenerate signal: fundamental magnitude is zero")
    total = sum(e.magnitude ** 2 for e in table.entries if e.is_spike)
    return float(np.sqrt(total) / table.fundamental)


def analyze_window(window: SampleWindow) -> dict:
    """Convenience bundle: vrms, vpeak and thd of one window."""
    table = harmonic_table(dft_magnitudes(window))
    return {"vrms": rms(window), "vpeak": peak(window), "thd": thd(table)}


def display_spectrum(spectrum: Spectrum) -> tuple[np.ndarray, np.ndarray]:
    """Plot-ready positive-frequency spectrum: (hz, magnitude) with 2/L scaling.

    Covers bins 0..L/2 (0 to 1800 Hz); a sine of amplitude A displays as A.
    """
    length = spectrum.magnitudes.size
    half = length // 2
    hz = np.arange(half + 1) * spectrum.bin_hz
    display = spectrum.magnitudes[: half + 1] * (2.0 / length)
    return hz, display
