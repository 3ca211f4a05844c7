"""Independent reference implementations the tests check against.

These stay deliberately naive (direct sums, plain loops) so they share no
code path with the module under test.
"""

from __future__ import annotations

import cmath
import math


def dft_magnitudes_oracle(values) -> list[float]:
    """O(L^2) direct-sum DFT magnitudes: |sum_m v[m] e^(-2*pi*j*k*m/L)|."""
    length = len(values)
    out = []
    for k in range(length):
        acc = 0j
        for m, v in enumerate(values):
            acc += v * cmath.exp(-2j * cmath.pi * k * m / length)
        out.append(abs(acc))
    return out


def rms_oracle(values) -> float:
    total = 0.0
    for v in values:
        total += v * v
    return math.sqrt(total / len(values))


def half_cycle_rms_oracle(values) -> list[float]:
    """RMS of each consecutive 30-sample block, remainder dropped."""
    out = []
    for start in range(0, len(values) - len(values) % 30, 30):
        out.append(rms_oracle(values[start : start + 30]))
    return out


def parseval_power_oracle(values) -> float:
    """Time-domain power sum for Parseval checks: sum of v^2."""
    return sum(v * v for v in values)


def dft_magnitudes_oracle_matrix(values):
    """Same O(L^2) direct sum as dft_magnitudes_oracle, vectorized.

    Builds the full exp(-2*pi*j*k*m/L) matrix and multiplies; shares nothing
    with any FFT. Used where the plain-loop oracle would be too slow.
    """
    import numpy as np

    v = np.asarray(values, dtype=np.float64)
    length = v.size
    k = np.arange(length).reshape(-1, 1)
    m = np.arange(length).reshape(1, -1)
    basis = np.exp(-2j * np.pi * k * m / length)
    return np.abs(basis @ v)
