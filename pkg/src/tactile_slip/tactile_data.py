"""Trial data model, on-disk format, window labeling and trial-level splitting."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from tactile_slip.errors import (
    ConfigError, ParseError, SchemaError, StratificationError, ValidationError, VersionError,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
N_CHANNELS = 24
N_SG = 14
N_PVDF = 10


class Kind(str, Enum):
    SG = "SG"
    PVDF = "PVDF"


class Finger(str, Enum):
    THUMB = "thumb"
    INDEX = "index"
    MIDDLE = "middle"
    RING = "ring"
    LITTLE = "little"


class Segment(str, Enum):
    DISTAL = "distal"
    MIDDLE = "middle"
    PROXIMAL = "proximal"


class Status(str, Enum):
    NON_SLIP = "NonSlip"
    SLIP = "Slip"
    UNLABELED = "Unlabeled"


@dataclass(frozen=True)
class ChannelMeta:
    id: int
    kind: Kind
    finger: Finger
    segment: Segment

    def __post_init__(self) -> None:
        # accept plain strings from JSON
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "finger", Finger(self.finger))
        object.__setattr__(self, "segment", Segment(self.segment))
        if not 1 <= int(self.id) <= N_CHANNELS:
            raise ValidationError(f"channel id {self.id} outside 1..{N_CHANNELS}")

    def to_json(self) -> dict:
        return {"id": self.id, "kind": self.kind.value, "finger": self.finger.value,
                "segment": self.segment.value}


def default_channels() -> tuple[ChannelMeta, ...]:
    """The hand's 24-channel layout.

    The two-segment thumb carries an SG/PVDF pair on each segment; the other
    fingers carry pairs on the distal and middle segments plus a lone SG on
    the proximal segment (2 + 2 + 4 * (2 + 2 + 1) = 24 channels).
    """
    layout: list[tuple[Kind, Finger, Segment]] = []
    for seg in (Segment.DISTAL, Segment.PROXIMAL):
        layout += [(Kind.SG, Finger.THUMB, seg), (Kind.PVDF, Finger.THUMB, seg)]
    for finger in (Finger.INDEX, Finger.MIDDLE, Finger.RING, Finger.LITTLE):
        for seg in (Segment.DISTAL, Segment.MIDDLE):
            layout += [(Kind.SG, finger, seg), (Kind.PVDF, finger, seg)]
        layout.append((Kind.SG, finger, Segment.PROXIMAL))
    return tuple(ChannelMeta(i + 1, k, f, s) for i, (k, f, s) in enumerate(layout))


@dataclass(frozen=True)
class SegmentAnnotation:
    velocity_mm_s: float
    slip_onset_s: float
    slip_end_s: float

    def __post_init__(self) -> None:
        if not self.slip_onset_s < self.slip_end_s:
            raise ValidationError(
                f"slip_onset_s={self.slip_onset_s} must precede slip_end_s={self.slip_end_s}")

    def to_json(self) -> dict:
        return {"velocity_mm_s": self.velocity_mm_s, "slip_onset_s": self.slip_onset_s,
                "slip_end_s": self.slip_end_s}


@dataclass(frozen=True)
class LabeledWindowPair:
    segment_index: int
    nonslip_window: tuple[float, float]
    slip_window: tuple[float, float]


def validate_channels(channels: Sequence[ChannelMeta]) -> None:
    if len(channels) != N_CHANNELS:
        raise SchemaError(f"expected {N_CHANNELS} channels, got {len(channels)}")
    ids = [c.id for c in channels]
    if ids != list(range(1, N_CHANNELS + 1)):
        raise SchemaError("channel ids must be unique and contiguous 1..24 in order")
    n_sg = sum(c.kind is Kind.SG for c in channels)
    if n_sg != N_SG or len(channels) - n_sg != N_PVDF:
        raise SchemaError(f"expected {N_SG} SG and {N_PVDF} PVDF channels, got {n_sg} SG")


def validate_segments(segments: Sequence[SegmentAnnotation]) -> None:
    for prev, cur in zip(segments, segments[1:]):
        if cur.slip_onset_s < prev.slip_end_s:
            raise ValidationError(
                f"segments overlap or are out of order: onset {cur.slip_onset_s} "
                f"before previous end {prev.slip_end_s}")


@dataclass(frozen=True, eq=False)
class TactileTrial:
    """One recorded (or synthesized) trial: ``samples`` is [n_samples x 24]."""

    material_id: str
    sample_rate_hz: float
    channels: tuple[ChannelMeta, ...]
    samples: np.ndarray
    segments: tuple[SegmentAnnotation, ...] = ()
    trial_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "segments", tuple(self.segments))
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        validate_channels(self.channels)
        validate_segments(self.segments)
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != N_CHANNELS:
            raise SchemaError(f"samples must be [n x {N_CHANNELS}], got shape {samples.shape}")
        if samples.shape[0] < 1:
            raise ValidationError("trial must contain at least one sample")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> "TactileTrial":
        return TactileTrial(self.material_id, self.sample_rate_hz, self.channels, samples,
                            self.segments, self.trial_id)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TactileTrial):
            return NotImplemented
        return (self.material_id == other.material_id
                and self.sample_rate_hz == other.sample_rate_hz
                and self.channels == other.channels
                and self.segments == other.segments
                and self.trial_id == other.trial_id
                and np.array_equal(self.samples, other.samples))

    __hash__ = None  # type: ignore[assignment]


# --------------------------------------------------------------------------- I/O

def _trial_paths(path: str | Path) -> tuple[Path, Path]:
    path = Path(path)
    name = path.name
    for suffix in (".meta.json", ".csv"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    return path.with_name(name + ".meta.json"), path.with_name(name + ".csv")


def save_trial(trial: TactileTrial, path: str | Path) -> tuple[Path, Path]:
    """Write ``<name>.meta.json`` and ``<name>.csv``; returns both paths."""
    meta_path, csv_path = _trial_paths(path)
    meta = {
        "format_version": FORMAT_VERSION,
        "trial_id": trial.trial_id,
        "material_id": trial.material_id,
        "sample_rate_hz": trial.sample_rate_hz,
        "channels": [c.to_json() for c in trial.channels],
        "segments": [s.to_json() for s in trial.segments],
    }
    meta_path.write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")

    t = np.arange(trial.n_samples) / trial.sample_rate_hz
    header = "t," + ",".join(f"ch{c.id:02d}" for c in trial.channels)
    # 17 significant digits round-trips every float64 exactly
    np.savetxt(csv_path, np.column_stack([t, trial.samples]), fmt="%.17g", delimiter=",",
               header=header, comments="", encoding="utf-8")
    return meta_path, csv_path


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ParseError(f"{where}: missing field '{key}'")
    return obj[key]


def load_trial(path: str | Path) -> TactileTrial:
    """Load a trial pair given either file (or the common stem)."""
    meta_path, csv_path = _trial_paths(path)
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{meta_path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(meta, dict):
        raise ParseError(f"{meta_path}: top level must be an object")
    version = _require(meta, "format_version", str(meta_path))
    if version != FORMAT_VERSION:
        raise VersionError(f"{meta_path}: unsupported format_version {version}")

    raw_channels = _require(meta, "channels", str(meta_path))
    if not isinstance(raw_channels, list):
        raise ParseError(f"{meta_path}: field 'channels' must be an array")
    if len(raw_channels) != N_CHANNELS:
        raise SchemaError(f"{meta_path}: expected {N_CHANNELS} channels, got {len(raw_channels)}")
    channels = []
    for i, ch in enumerate(raw_channels):
        where = f"{meta_path}: channels[{i}]"
        try:
            channels.append(ChannelMeta(int(_require(ch, "id", where)), _require(ch, "kind", where),
                                        _require(ch, "finger", where), _require(ch, "segment", where)))
        except (ValueError, TypeError) as exc:
            raise ParseError(f"{where}: {exc}") from exc

    segments = []
    for i, seg in enumerate(_require(meta, "segments", str(meta_path))):
        where = f"{meta_path}: segments[{i}]"
        try:
            segments.append(SegmentAnnotation(float(_require(seg, "velocity_mm_s", where)),
                                              float(_require(seg, "slip_onset_s", where)),
                                              float(_require(seg, "slip_end_s", where))))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from exc

    with open(csv_path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    expected = ["t"] + [f"ch{c.id:02d}" for c in channels]
    if header != expected:
        raise ParseError(f"{csv_path}: line 1: header does not match t,ch01..ch{N_CHANNELS:02d}")
    try:
        table = np.loadtxt(csv_path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ParseError(f"{csv_path}: {exc}") from exc
    if table.shape[1] != N_CHANNELS + 1:
        raise SchemaError(f"{csv_path}: expected {N_CHANNELS + 1} columns, got {table.shape[1]}")

    return TactileTrial(
        material_id=str(_require(meta, "material_id", str(meta_path))),
        sample_rate_hz=float(_require(meta, "sample_rate_hz", str(meta_path))),
        channels=tuple(channels),
        samples=table[:, 1:],
        segments=tuple(segments),
        trial_id=str(meta.get("trial_id", meta_path.name[: -len(".meta.json")])),
    )


# ----------------------------------------------------------------------- labeling

def label_windows(trial: TactileTrial, window_s: float = 0.5) -> list[LabeledWindowPair]:
    """Non-slip window ends at the true onset; slip window starts there.

    A segment is skipped (and counted in a warning) when either window would
    leave the trial, run past the segment's slip end, or reach back into the
    previous segment's slip phase.
    """
    pairs = []
    dropped = 0
    prev_end = 0.0
    for i, seg in enumerate(trial.segments):
        start = seg.slip_onset_s - window_s
        stop = seg.slip_onset_s + window_s
        if start < prev_end or stop > seg.slip_end_s or stop > trial.duration_s:
            dropped += 1
        else:
            pairs.append(LabeledWindowPair(i, (start, seg.slip_onset_s), (seg.slip_onset_s, stop)))
        prev_end = seg.slip_end_s
    if dropped:
        logger.warning("trial %s: %d segment(s) omitted, windows do not fit",
                       trial.trial_id or trial.material_id, dropped)
    return pairs


# ---------------------------------------------------------------------- splitting

def case_key(trial: TactileTrial) -> tuple:
    return (trial.material_id, tuple(s.velocity_mm_s for s in trial.segments))


def split_trials(trials: Sequence[TactileTrial], train_fraction: float = 0.8,
                 seed: int = 0) -> tuple[list[TactileTrial], list[TactileTrial]]:
    """Stratified whole-trial split.

    Each (material, velocity) stratum gets ``floor(n * fraction)`` train trials;
    the leftover ``round(N * fraction) - sum(floors)`` slots go one each to
    strata picked in seeded order. Every stratum keeps at least one trial on
    each side. Input order is preserved within both outputs.
    """
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    strata: dict[tuple, list[int]] = {}
    for i, tr in enumerate(trials):
        strata.setdefault(case_key(tr), []).append(i)
    for key, members in strata.items():
        if len(members) < 2:
            raise StratificationError(f"stratum {key} has {len(members)} trial(s); need >= 2")

    rng = np.random.default_rng(seed)
    keys = sorted(strata)
    quota = {k: int(math.floor(len(strata[k]) * train_fraction)) for k in keys}
    extra = int(round(len(trials) * train_fraction)) - sum(quota.values())
    for j in rng.permutation(len(keys)):
        if extra <= 0:
            break
        quota[keys[j]] += 1
        extra -= 1

    train_idx: set[int] = set()
    for k in keys:
        members = strata[k]
        n_train = min(max(quota[k], 1), len(members) - 1)
        order = rng.permutation(len(members))
        train_idx.update(members[j] for j in order[:n_train])
    train = [tr for i, tr in enumerate(trials) if i in train_idx]
    test = [tr for i, tr in enumerate(trials) if i not in train_idx]
    return train, test
