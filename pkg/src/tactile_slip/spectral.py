"""Multilevel DWT sub-band reconstructions and one-sided magnitude spectra.

Sub-bands are input-length signals: each one is the inverse transform of a
single coefficient band with every other band zeroed. Boundary handling is
half-sample symmetric extension throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pywt

from tactile_slip.errors import DecompositionError

BOUNDARY_MODE = "symmetric"
DEFAULT_WAVELET = "db4"
DEFAULT_LEVELS = 4


def band_names(levels: int = DEFAULT_LEVELS) -> tuple[str, ...]:
    return tuple(f"A{k}" for k in range(1, levels + 1)) + tuple(
        f"D{k}" for k in range(1, levels + 1))


@dataclass(frozen=True, eq=False)
class SubbandSet:
    bands: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.bands[name]

    def leaf_sum(self) -> np.ndarray:
        """A_L + D_L + ... + D_1, which reconstructs the input."""
        levels = len(self.bands) // 2
        total = self.bands[f"A{levels}"].copy()
        for k in range(1, levels + 1):
            total = total + self.bands[f"D{k}"]
        return total


def subband_array(x, levels: int = DEFAULT_LEVELS, wavelet: str = DEFAULT_WAVELET) -> np.ndarray:
    """Vectorised decomposition along the last axis.

    Returns shape ``x.shape[:-1] + (2 * levels, n)`` with bands ordered
    A1..A_L, D1..D_L.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if levels < 1:
        raise DecompositionError(f"levels must be >= 1, got {levels}")
    if n < 2 ** levels:
        raise DecompositionError(f"signal length {n} too short for {levels} levels")
    w = pywt.Wavelet(wavelet)

    lengths = [n]
    approx, detail = [], []
    a = x
    for _ in range(levels):
        a, d = pywt.dwt(a, w, mode=BOUNDARY_MODE, axis=-1)
        approx.append(a)
        detail.append(d)
        lengths.append(a.shape[-1])

    def upsample_to_input(coef: np.ndarray, level: int, is_detail: bool) -> np.ndarray:
        pair = (None, coef) if is_detail else (coef, None)
        y = pywt.idwt(*pair, w, mode=BOUNDARY_MODE, axis=-1)[..., :lengths[level - 1]]
        for j in range(level - 1, 0, -1):
            y = pywt.idwt(y, None, w, mode=BOUNDARY_MODE, axis=-1)[..., :lengths[j - 1]]
        return y

    out = np.empty(x.shape[:-1] + (2 * levels, n))
    for k in range(1, levels + 1):
        out[..., k - 1, :] = upsample_to_input(approx[k - 1], k, False)
        out[..., levels + k - 1, :] = upsample_to_input(detail[k - 1], k, True)
    return out


def dwt_subbands(signal, levels: int = DEFAULT_LEVELS, wavelet: str = DEFAULT_WAVELET) -> SubbandSet:
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DecompositionError("dwt_subbands expects a 1-D signal")
    arr = subband_array(x, levels, wavelet)
    return SubbandSet({name: arr[i] for i, name in enumerate(band_names(levels))})


@dataclass(frozen=True, eq=False)
class MagnitudeSpectrum:
    """One-sided spectrum; ``mags`` may carry leading batch axes."""

    freqs_hz: np.ndarray
    mags: np.ndarray
    resolution_hz: float
    n_samples: int

    def power_weights(self) -> np.ndarray:
        # interior bins were doubled, DC (and Nyquist for even n) were not
        w = np.full(self.freqs_hz.shape, 0.5 * self.n_samples)
        w[0] = self.n_samples
        if self.n_samples % 2 == 0:
            w[-1] = self.n_samples
        return w

    def power(self) -> np.ndarray:
        """Per-bin energy; sums to the time-domain energy (Parseval)."""
        return self.mags ** 2 * self.power_weights()

    def energy(self) -> np.ndarray:
        return self.power().sum(axis=-1)


def magnitude_spectrum(signal, sample_rate_hz: float) -> MagnitudeSpectrum:
    """FFT magnitude |X_k| / n with interior bins doubled; no window applied."""
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[-1]
    if n < 2:
        raise DecompositionError("spectrum needs at least 2 samples")
    mags = np.abs(np.fft.rfft(x, axis=-1)) / n
    last = mags.shape[-1] if n % 2 else mags.shape[-1] - 1
    mags[..., 1:last] *= 2.0
    freqs = np.arange(n // 2 + 1) * (sample_rate_hz / n)
    return MagnitudeSpectrum(freqs, mags, sample_rate_hz / n, n)
