"""Savitzky-Golay smoothing per channel kind and fixed-width binning."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import savgol_filter

from tactile_slip.errors import ConfigError, FilterError
from tactile_slip.tactile_data import Kind, LabeledWindowPair, Status, TactileTrial

DEFAULT_BIN_WIDTH_S = 0.05


@dataclass(frozen=True)
class FilterSpec:
    frame_length: int
    poly_order: int

    def __post_init__(self) -> None:
        if self.frame_length < 1 or self.frame_length % 2 == 0:
            raise FilterError(f"frame_length must be odd and positive, got {self.frame_length}")
        if not 0 <= self.poly_order < self.frame_length:
            raise FilterError(
                f"poly_order must be in [0, frame_length), got {self.poly_order}")


PVDF_FILTER = FilterSpec(11, 1)
SG_FILTER = FilterSpec(51, 1)


def savitzky_golay(signal, spec: FilterSpec, axis: int = -1) -> np.ndarray:
    """Least-squares polynomial smoothing over a centred frame.

    Edge samples (the first and last ``frame_length // 2``) take the value of a
    polynomial fitted to the outermost full frame, evaluated at their position,
    so no padding is introduced.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[axis] < spec.frame_length:
        raise FilterError(
            f"signal length {x.shape[axis]} shorter than frame length {spec.frame_length}")
    return savgol_filter(x, spec.frame_length, spec.poly_order, axis=axis, mode="interp")


def preprocess_trial(trial: TactileTrial, pvdf_spec: FilterSpec = PVDF_FILTER,
                     sg_spec: FilterSpec = SG_FILTER) -> TactileTrial:
    """Filter every channel with the FilterSpec for its kind."""
    out = np.empty_like(trial.samples)
    for kind, spec in ((Kind.PVDF, pvdf_spec), (Kind.SG, sg_spec)):
        cols = [i for i, c in enumerate(trial.channels) if c.kind is kind]
        try:
            out[:, cols] = savitzky_golay(trial.samples[:, cols], spec, axis=0)
        except FilterError as exc:
            ids = ",".join(str(trial.channels[i].id) for i in cols)
            raise FilterError(f"channels {ids} ({kind.value}): {exc}") from exc
    return trial.with_samples(out)


@dataclass(frozen=True, eq=False)
class Bin:
    trial_id: str
    segment_index: int
    start_s: float
    width_s: float
    label: Status
    samples: np.ndarray  # [bin_len x 24]
    sample_rate_hz: float = 2000.0

    @property
    def bin_len(self) -> int:
        return self.samples.shape[0]


def bin_length(width_s: float, sample_rate_hz: float) -> int:
    n = int(round(width_s * sample_rate_hz))
    if n < 2:
        raise ConfigError(
            f"bin width {width_s} s at {sample_rate_hz} Hz gives {n} sample(s); need >= 2")
    return n


def _cut(trial: TactileTrial, start: int, stop: int, bin_len: int, width_s: float,
         label: Status, segment_index: int) -> list[Bin]:
    stop = min(stop, trial.n_samples)
    n_bins = max(stop - start, 0) // bin_len
    fs = trial.sample_rate_hz
    bins = []
    for j in range(n_bins):
        a = start + j * bin_len
        bins.append(Bin(trial.trial_id, segment_index, a / fs, width_s, label,
                        trial.samples[a:a + bin_len], fs))
    return bins


def bin_windows(trial: TactileTrial, pairs: Sequence[LabeledWindowPair],
                width_s: float = DEFAULT_BIN_WIDTH_S) -> list[Bin]:
    """Cut each labeled window into consecutive bins aligned to its start.

    A trailing remainder shorter than one bin is dropped. Bins come out in
    pair order, non-slip window first.
    """
    fs = trial.sample_rate_hz
    bin_len = bin_length(width_s, fs)
    bins: list[Bin] = []
    for pair in pairs:
        for (lo, hi), label in ((pair.nonslip_window, Status.NON_SLIP),
                                (pair.slip_window, Status.SLIP)):
            start = int(round(lo * fs))
            stop = int(round(hi * fs))
            bins += _cut(trial, start, stop, bin_len, width_s, label, pair.segment_index)
    return bins


def bin_stream(trial: TactileTrial, width_s: float = DEFAULT_BIN_WIDTH_S) -> list[Bin]:
    """Tile the whole trial from t=0 into unlabeled bins."""
    bin_len = bin_length(width_s, trial.sample_rate_hz)
    return _cut(trial, 0, trial.n_samples, bin_len, width_s, Status.UNLABELED, -1)
