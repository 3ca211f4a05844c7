"""DSP core: windowing, RMS/peak, DFT vs direct-sum oracle, spike rule, THD."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqmon import (
    InsufficientDataError,
    SampleWindow,
    Spectrum,
    dft_magnitudes,
    display_spectrum,
    harmonic_table,
    peak,
    rms,
    thd,
    trim_to_whole_cycles,
)
from pqmon.conversion import counts_to_voltages, voltages_to_adc

from reference import dft_magnitudes_oracle, half_cycle_rms_oracle, rms_oracle

A120 = 120.0 * math.sqrt(2.0)


def sine_window(cycles=6, amplitude=A120, harmonics=(), phase=0.0):
    n = np.arange(cycles * 60)
    v = amplitude * np.sin(2 * np.pi * n / 60 + phase)
    for order, rel in harmonics:
        v = v + amplitude * rel * np.sin(2 * np.pi * order * n / 60)
    return SampleWindow(v, cycles)


def random_window(rng, cycles):
    return SampleWindow(rng.uniform(-300, 300, cycles * 60), cycles)


class TestTrim:
    def test_keeps_most_recent_whole_cycles(self):
        samples = np.arange(400.0)
        window = trim_to_whole_cycles(samples)
        assert window.cycles == 6
        assert len(window) == 360
        assert window.start_index == 40
        assert window.voltages[0] == 40.0 and window.voltages[-1] == 399.0

    def test_exact_multiple_is_identity(self):
        samples = np.arange(360.0)
        window = trim_to_whole_cycles(samples)
        assert window.cycles == 6 and window.start_index == 0
        assert np.array_equal(window.voltages, samples)

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError) as err:
            trim_to_whole_cycles(np.zeros(59))
        assert err.value.available == 59

    @given(st.integers(60, 2000))
    def test_length_arithmetic(self, n):
        window = trim_to_whole_cycles(np.zeros(n))
        assert len(window) == (n // 60) * 60
        assert window.cycles == n // 60

    def test_window_invariants(self):
        with pytest.raises(ValueError):
            SampleWindow(np.zeros(61), 1)
        with pytest.raises(ValueError):
            SampleWindow(np.zeros(0), 0)


class TestRms:
    def test_constant_sequence(self):
        assert rms(SampleWindow(np.full(60, -7.5), 1)) == 7.5

    def test_pure_sine_closed_form(self):
        window = sine_window(cycles=6)
        assert rms(window) == pytest.approx(120.0, rel=1e-12)

    def test_matches_plain_loop_oracle(self):
        rng = np.random.default_rng(7)
        window = random_window(rng, 2)
        assert rms(window) == pytest.approx(rms_oracle(window.voltages.tolist()))

    def test_through_adc_pipeline(self, cfg):
        window = sine_window(cycles=6)
        quantized = counts_to_voltages(voltages_to_adc(window.voltages, cfg), cfg)
        assert rms(SampleWindow(quantized, 6)) == pytest.approx(120.0, abs=0.5)


class TestPeak:
    def test_negative_extreme_wins(self):
        v = np.zeros(60)
        v[3], v[40] = -170.0, 50.0
        assert peak(SampleWindow(v, 1)) == 170.0

    def test_all_zeros(self):
        assert peak(SampleWindow(np.zeros(60), 1)) == 0.0

    @given(st.floats(0, 2 * math.pi))
    def test_sine_peak_bounds_over_phase(self, phase):
        # samples fall every 6 degrees: the crest sample is at most 3 degrees off
        window = sine_window(cycles=1, amplitude=169.71, phase=phase)
        p = peak(window)
        assert p <= 169.71 + 1e-9
        assert p >= 169.71 * math.sin(math.radians(87)) - 1e-9


class TestDftMagnitudes:
    def test_bin_centered_sine_hits_single_bin(self):
        window = sine_window(cycles=6, amplitude=A120)
        spectrum = dft_magnitudes(window)
        L = 360
        assert spectrum.magnitudes[6] == pytest.approx(A120 * L / 2, rel=1e-9)
        others = np.delete(spectrum.magnitudes[1 : L // 2 + 1], 5)
        assert np.all(others == 0.0)  # sub-noise bins are clamped to exact zero

    def test_constant_is_dc_only(self):
        spectrum = dft_magnitudes(SampleWindow(np.full(120, 3.0), 2))
        assert spectrum.magnitudes[0] == pytest.approx(3.0 * 120, rel=1e-12)
        assert np.all(spectrum.magnitudes[1:] == 0.0)

    def test_matches_direct_sum_oracle(self):
        rng = np.random.default_rng(42)
        for cycles in (1, 2, 3, 6):
            window = random_window(rng, cycles)
            expected = np.array(dft_magnitudes_oracle(window.voltages.tolist()))
            got = dft_magnitudes(window).magnitudes
            assert np.max(np.abs(got - expected)) <= 1e-9 * expected.max()

    def test_parseval(self):
        rng = np.random.default_rng(3)
        for cycles in (1, 4, 6):
            window = random_window(rng, cycles)
            L = len(window)
            time_power = np.sum(window.voltages**2)
            freq_power = np.sum(dft_magnitudes(window).magnitudes ** 2) / L
            assert freq_power == pytest.approx(time_power, rel=1e-6)

    def test_bin_resolution(self):
        for cycles in (2, 3, 6):
            spectrum = dft_magnitudes(sine_window(cycles=cycles))
            assert spectrum.bin_hz == pytest.approx(60.0 / cycles)

    def test_covers_up_to_1800_hz(self):
        spectrum = dft_magnitudes(sine_window(cycles=6))
        hz, mags = display_spectrum(spectrum)
        assert hz[0] == 0.0
        assert hz[-1] == pytest.approx(1800.0)
        assert len(hz) == len(mags) == 181


class TestHarmonicTable:
    def test_pure_sine_has_no_spikes(self):
        table = harmonic_table(dft_magnitudes(sine_window(cycles=6)))
        assert all(not e.is_spike for e in table.entries)
        assert len(table.entries) == 24

    def test_third_harmonic_is_the_only_spike(self):
        window = sine_window(cycles=6, harmonics=[(3, 0.5)])
        table = harmonic_table(dft_magnitudes(window))
        spikes = [e.order for e in table.entries if e.is_spike]
        assert spikes == [3]
        assert table.entries[1].magnitude == pytest.approx(
            0.5 * A120 * 360 / 2, rel=1e-9
        )

    def test_plateau_is_not_a_spike(self):
        # equal neighbors around the h=3 bin: strict comparison excludes it
        mags = np.zeros(120)
        mags[2] = 1000.0
        mags[5] = mags[6] = mags[7] = 40.0
        table = harmonic_table(Spectrum(mags, 2))
        assert table.entries[1].order == 3
        assert not table.entries[1].is_spike

    def test_magnitude_recorded_even_without_spike(self):
        mags = np.zeros(120)
        mags[2] = 1000.0
        mags[5], mags[6], mags[7] = 50.0, 40.0, 50.0
        table = harmonic_table(Spectrum(mags, 2))
        assert table.entries[1].magnitude == 40.0
        assert not table.entries[1].is_spike

    def test_needs_two_cycles(self):
        with pytest.raises(ValueError):
            harmonic_table(dft_magnitudes(sine_window(cycles=1)))

    def test_fundamental_taken_from_its_bin(self):
        table = harmonic_table(dft_magnitudes(sine_window(cycles=6)))
        assert table.fundamental == pytest.approx(A120 * 180, rel=1e-9)


class TestThd:
    def test_pure_sine(self):
        table = harmonic_table(dft_magnitudes(sine_window(cycles=6)))
        assert thd(table) == 0.0

    def test_half_amplitude_third_harmonic(self):
        window = sine_window(cycles=6, harmonics=[(3, 0.5)])
        table = harmonic_table(dft_magnitudes(window))
        assert thd(table) == pytest.approx(0.5, abs=1e-9)

    def test_two_harmonics_combine_in_quadrature(self):
        window = sine_window(cycles=6, harmonics=[(3, 0.3), (5, 0.4)])
        table = harmonic_table(dft_magnitudes(window))
        assert thd(table) == pytest.approx(0.5, abs=1e-9)

    def test_degenerate_signal_rejected(self):
        table = harmonic_table(dft_magnitudes(SampleWindow(np.zeros(120), 2)))
        with pytest.raises(ValueError):
            thd(table)


class TestInvariantProperties:
    @given(st.floats(min_value=0.01, max_value=100.0))
    def test_scaling(self, c):
        rng = np.random.default_rng(11)
        base = sine_window(cycles=3, harmonics=[(5, 0.2)]).voltages
        base = base + rng.normal(0, 2.0, base.size)
        w1 = SampleWindow(base, 3)
        w2 = SampleWindow(c * base, 3)
        assert rms(w2) == pytest.approx(c * rms(w1), rel=1e-9)
        assert peak(w2) == pytest.approx(c * peak(w1), rel=1e-9)
        t1 = thd(harmonic_table(dft_magnitudes(w1)))
        t2 = thd(harmonic_table(dft_magnitudes(w2)))
        assert t2 == pytest.approx(t1, rel=1e-6)

    @settings(max_examples=50)
    @given(st.integers(1, 6), st.integers(0, 10_000))
    def test_rms_never_exceeds_peak(self, cycles, seed):
        window = random_window(np.random.default_rng(seed), cycles)
        assert rms(window) <= peak(window) + 1e-12

    @settings(max_examples=30)
    @given(st.integers(2, 6), st.integers(0, 10_000))
    def test_spike_filter_never_increases_thd(self, cycles, seed):
        window = random_window(np.random.default_rng(seed), cycles)
        table = harmonic_table(dft_magnitudes(window))
        if table.fundamental <= 0.0:
            return
        filtered = thd(table)
        unfiltered = (
            math.sqrt(sum(e.magnitude**2 for e in table.entries)) / table.fundamental
        )
        assert filtered <= unfiltered + 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 10_000))
    def test_dft_equals_oracle_on_random_windows(self, cycles, seed):
        window = random_window(np.random.default_rng(seed), cycles)
        expected = np.array(dft_magnitudes_oracle(window.voltages.tolist()))
        got = dft_magnitudes(window).magnitudes
        assert np.max(np.abs(got - expected)) <= 1e-9 * expected.max()


class TestDisplayScaling:
    def test_sine_displays_as_its_amplitude(self):
        hz, mags = display_spectrum(dft_magnitudes(sine_window(cycles=6)))
        k = int(np.argmax(mags))
        assert hz[k] == pytest.approx(60.0)
        assert mags[k] == pytest.approx(A120, rel=1e-9)

    def test_half_cycle_rms_reference(self):
        # cross-check the oracle helper itself against the closed form
        values = sine_window(cycles=2).voltages.tolist()
        assert half_cycle_rms_oracle(values) == pytest.approx([120.0] * 4, rel=1e-9)
