"""Per-bin feature functions and the ordered 2582-slot feature pool.

Pool layout (canonical slot order):

* SG channels, ascending id, 13 time features each, on the filtered bin;
* PVDF channels, ascending id, then bands A1..A4, D1..D4, then the 14 time
  features followed by the 16 frequency features of that band.

With 14 SG and 10 PVDF channels that is 14*13 + 10*8*30 = 2582 slots.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from tactile_slip.preprocess import Bin
from tactile_slip.spectral import (
    DEFAULT_LEVELS, DEFAULT_WAVELET, MagnitudeSpectrum, band_names, magnitude_spectrum,
    subband_array,
)
from tactile_slip.tactile_data import ChannelMeta, Finger, Kind, Status, default_channels

EPS = 1e-12
HIST_BINS = 16

TIME_FEATURES = (
    "mean", "std", "rms", "peak", "peak_to_peak", "skewness", "kurtosis", "crest_factor",
    "shape_factor", "impulse_factor", "clearance_factor", "energy", "zero_crossing_rate",
    "hist_entropy",
)
# zero-crossing rate is degenerate on offset SG signals
SG_TIME_FEATURES = tuple(f for f in TIME_FEATURES if f != "zero_crossing_rate")
FREQ_FEATURES = (
    "mean_magnitude", "magnitude_std", "peak_magnitude", "peak_frequency", "frequency_centroid",
    "mean_frequency", "rms_frequency", "frequency_variance", "spectral_skewness",
    "spectral_kurtosis", "spectral_crest_factor", "spectral_entropy", "median_frequency",
    "spectral_energy", "spectral_shape_factor", "upper_band_energy_ratio",
)
_SG_IDX = [TIME_FEATURES.index(f) for f in SG_TIME_FEATURES]


@dataclass(frozen=True)
class FeatureDef:
    """A base feature definition and its per-domain instantiations."""

    name: str
    time_feature: str | None
    freq_feature: str | None
    sg_applicable: bool = True

    @property
    def applicable_to(self) -> frozenset[Kind]:
        kinds = {Kind.PVDF}
        if self.time_feature is not None and self.sg_applicable:
            kinds.add(Kind.SG)
        return frozenset(kinds)


FEATURE_DEFS: tuple[FeatureDef, ...] = (
    FeatureDef("mean", "mean", "mean_magnitude"),
    FeatureDef("standard_deviation", "std", "magnitude_std"),
    FeatureDef("root_mean_square", "rms", "rms_frequency"),
    FeatureDef("peak", "peak", "peak_magnitude"),
    FeatureDef("spread", "peak_to_peak", "frequency_variance"),
    FeatureDef("skewness", "skewness", "spectral_skewness"),
    FeatureDef("kurtosis", "kurtosis", "spectral_kurtosis"),
    FeatureDef("peak_factor", "crest_factor", "spectral_crest_factor"),
    FeatureDef("shape_factor", "shape_factor", "spectral_shape_factor"),
    FeatureDef("impulsiveness", "impulse_factor", "upper_band_energy_ratio"),
    FeatureDef("energy", "energy", "spectral_energy"),
    # zero-crossing rate estimates the mean frequency in the time domain
    FeatureDef("oscillation_rate", "zero_crossing_rate", "mean_frequency", sg_applicable=False),
    FeatureDef("entropy", "hist_entropy", "spectral_entropy"),
    FeatureDef("clearance_factor", "clearance_factor", None),
    FeatureDef("peak_frequency", None, "peak_frequency"),
    FeatureDef("frequency_centroid", None, "frequency_centroid"),
    FeatureDef("median_frequency", None, "median_frequency"),
)

BASE_DEFINITION = {
    **{d.time_feature: d.name for d in FEATURE_DEFS if d.time_feature},
    **{d.freq_feature: d.name for d in FEATURE_DEFS if d.freq_feature},
}


def _div(num, den):
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    ok = np.abs(den) >= EPS
    return np.divide(num, den, out=np.zeros(num.shape), where=ok)


# ------------------------------------------------------------------------- time

def time_feature_array(x) -> np.ndarray:
    """All 14 time features along the last axis -> shape ``x.shape[:-1] + (14,)``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    absx = np.abs(x)
    mean = x.mean(axis=-1)
    c = x - mean[..., None]
    m2 = (c ** 2).mean(axis=-1)
    std = np.sqrt(m2)
    rms = np.sqrt((x ** 2).mean(axis=-1))
    peak = absx.max(axis=-1)
    xmin, xmax = x.min(axis=-1), x.max(axis=-1)
    ptp = xmax - xmin
    z = _div(c, std[..., None])
    skew = (z ** 3).mean(axis=-1)
    kurt = (z ** 4).mean(axis=-1)
    mean_abs = absx.mean(axis=-1)
    crest = _div(peak, rms)
    shape = _div(rms, mean_abs)
    impulse = _div(peak, mean_abs)
    clearance = _div(peak, np.sqrt(absx).mean(axis=-1) ** 2)
    energy = (x ** 2).sum(axis=-1)
    zcr = ((x[..., 1:] * x[..., :-1]) < 0).sum(axis=-1) / max(n - 1, 1)

    width = ptp[..., None]
    idx = np.floor(_div((x - xmin[..., None]) * HIST_BINS, width)).astype(np.int64)
    idx = np.clip(idx, 0, HIST_BINS - 1)
    counts = (idx[..., None] == np.arange(HIST_BINS)).sum(axis=-2)
    p = counts / n
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log(p), 0.0).sum(axis=-1)
    entropy = np.where(ptp >= EPS, h, 0.0)

    return np.stack([mean, std, rms, peak, ptp, skew, kurt, crest, shape, impulse, clearance,
                     energy, zcr, entropy], axis=-1)


def time_features(signal) -> dict[str, float]:
    vals = time_feature_array(np.asarray(signal, dtype=np.float64))
    return {name: float(v) for name, v in zip(TIME_FEATURES, vals)}


def time_features_sg(signal) -> dict[str, float]:
    full = time_features(signal)
    return {name: full[name] for name in SG_TIME_FEATURES}


# -------------------------------------------------------------------- frequency

def freq_feature_array(spectrum: MagnitudeSpectrum) -> np.ndarray:
    """All 16 spectral features along the last axis of ``spectrum.mags``."""
    m = np.asarray(spectrum.mags, dtype=np.float64)
    f = spectrum.freqs_hz
    q = m ** 2
    sum_m = m.sum(axis=-1)
    sum_q = q.sum(axis=-1)

    mean_mag = m.mean(axis=-1)
    std_mag = m.std(axis=-1)
    peak_mag = m.max(axis=-1)
    peak_freq = f[np.argmax(m, axis=-1)]
    centroid = _div((m * f).sum(axis=-1), sum_m)
    mean_freq = _div((q * f).sum(axis=-1), sum_q)
    rms_freq = np.sqrt(_div((m * f ** 2).sum(axis=-1), sum_m))
    dev = f - centroid[..., None]
    var = _div((m * dev ** 2).sum(axis=-1), sum_m)
    sigma = np.sqrt(var)
    skew = _div(_div((m * dev ** 3).sum(axis=-1), sum_m), sigma ** 3)
    kurt = _div(_div((m * dev ** 4).sum(axis=-1), sum_m), sigma ** 4)
    crest = _div(peak_mag, mean_mag)
    p = _div(q, sum_q[..., None])
    with np.errstate(divide="ignore", invalid="ignore"):
        entropy = -np.where(p > 0, p * np.log(p), 0.0).sum(axis=-1)
    cum = np.cumsum(p, axis=-1)
    median_idx = np.argmax(cum >= 0.5, axis=-1)
    median = np.where(sum_q >= EPS, f[median_idx], 0.0)
    energy = spectrum.energy()
    shape = _div(np.sqrt(q.mean(axis=-1)), mean_mag)
    upper = f >= spectrum.resolution_hz * spectrum.n_samples / 4.0
    upper_ratio = _div(q[..., upper].sum(axis=-1), sum_q)

    return np.stack([mean_mag, std_mag, peak_mag, peak_freq, centroid, mean_freq, rms_freq, var,
                     skew, kurt, crest, entropy, median, energy, shape, upper_ratio], axis=-1)


def freq_features(spectrum: MagnitudeSpectrum) -> dict[str, float]:
    vals = freq_feature_array(spectrum)
    return {name: float(v) for name, v in zip(FREQ_FEATURES, vals)}


# --------------------------------------------------------------------- the pool

@dataclass(frozen=True)
class FeatureSlot:
    index: int
    channel_id: int
    se_kind: Kind
    finger: Finger
    band: str
    domain: str
    feature_name: str

    @property
    def name(self) -> str:
        return f"ch{self.channel_id:02d}.{self.se_kind.value}.{self.band}.{self.domain}.{self.feature_name}"

    @property
    def definition(self) -> str:
        return BASE_DEFINITION[self.feature_name]


def pool_size(n_sg: int = 14, n_pvdf: int = 10, levels: int = DEFAULT_LEVELS) -> int:
    return n_sg * len(SG_TIME_FEATURES) + n_pvdf * 2 * levels * (
        len(TIME_FEATURES) + len(FREQ_FEATURES))


def build_slot_map(channels: Sequence[ChannelMeta] | None = None,
                   levels: int = DEFAULT_LEVELS) -> list[FeatureSlot]:
    channels = default_channels() if channels is None else channels
    slots: list[FeatureSlot] = []

    def add(ch: ChannelMeta, band: str, domain: str, feature: str) -> None:
        slots.append(FeatureSlot(len(slots), ch.id, ch.kind, ch.finger, band, domain, feature))

    for ch in sorted((c for c in channels if c.kind is Kind.SG), key=lambda c: c.id):
        for feat in SG_TIME_FEATURES:
            add(ch, "Raw", "Time", feat)
    for ch in sorted((c for c in channels if c.kind is Kind.PVDF), key=lambda c: c.id):
        for band in band_names(levels):
            for feat in TIME_FEATURES:
                add(ch, band, "Time", feat)
            for feat in FREQ_FEATURES:
                add(ch, band, "Frequency", feat)
    return slots


def assemble_feature_rows(samples, sample_rate_hz: float,
                          channels: Sequence[ChannelMeta] | None = None,
                          wavelet: str = DEFAULT_WAVELET,
                          levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Feature rows for a stack of bins ``samples`` [n_bins x bin_len x n_channels]."""
    channels = default_channels() if channels is None else channels
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    n_bins = x.shape[0]
    sg_cols = [i for i, c in sorted(enumerate(channels), key=lambda t: t[1].id) if c.kind is Kind.SG]
    pv_cols = [i for i, c in sorted(enumerate(channels), key=lambda t: t[1].id) if c.kind is Kind.PVDF]

    sg = np.moveaxis(x[:, :, sg_cols], 1, 2)              # [B, n_sg, n]
    sg_feats = time_feature_array(sg)[..., _SG_IDX]       # [B, n_sg, 13]

    pv = np.moveaxis(x[:, :, pv_cols], 1, 2)              # [B, n_pv, n]
    bands = subband_array(pv, levels, wavelet)            # [B, n_pv, 2L, n]
    spec = magnitude_spectrum(bands, sample_rate_hz)
    pv_feats = np.concatenate([time_feature_array(bands), freq_feature_array(spec)], axis=-1)

    return np.concatenate([sg_feats.reshape(n_bins, -1), pv_feats.reshape(n_bins, -1)], axis=1)


def assemble_features(bin: Bin, channels: Sequence[ChannelMeta] | None = None,
                      wavelet: str = DEFAULT_WAVELET, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    return assemble_feature_rows(bin.samples, bin.sample_rate_hz, channels, wavelet, levels)[0]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    slot_map: list[FeatureSlot]
    labels: list[Status]
    trial_ids: list[str] | None = None

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[1] != len(self.slot_map):
            raise ValueError(
                f"matrix shape {self.values.shape} does not match {len(self.slot_map)} slots")
        if len(self.labels) != self.values.shape[0]:
            raise ValueError("one label per row required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains NaN/Inf")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def label_signs(self) -> np.ndarray:
        """+1 for Slip, -1 for NonSlip (Unlabeled rows are not allowed here)."""
        out = np.empty(self.n_rows)
        for i, lab in enumerate(self.labels):
            if lab is Status.SLIP:
                out[i] = 1.0
            elif lab is Status.NON_SLIP:
                out[i] = -1.0
            else:
                raise ValueError(f"row {i} is unlabeled")
        return out

    @classmethod
    def from_bins(cls, bins: Sequence[Bin], channels: Sequence[ChannelMeta] | None = None,
                  wavelet: str = DEFAULT_WAVELET, levels: int = DEFAULT_LEVELS) -> "FeatureMatrix":
        slot_map = build_slot_map(channels, levels)
        if not bins:
            return cls(np.zeros((0, len(slot_map))), slot_map, [], [])
        stack = np.stack([b.samples for b in bins])
        values = assemble_feature_rows(stack, bins[0].sample_rate_hz, channels, wavelet, levels)
        return cls(values, slot_map, [b.label for b in bins], [b.trial_id for b in bins])

    @classmethod
    def concat(cls, parts: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        if not parts:
            raise ValueError("nothing to concatenate")
        return cls(np.concatenate([p.values for p in parts]), parts[0].slot_map,
                   [lab for p in parts for lab in p.labels],
                   [t for p in parts for t in (p.trial_ids or [""] * p.n_rows)])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([s.name for s in self.slot_map] + ["label"])
            for row, lab in zip(self.values, self.labels):
                writer.writerow([format(v, ".17g") for v in row] + [lab.value])
