"""Bin-status streams and debounced non-slip -> slip onset detection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tactile_slip.features import assemble_feature_rows
from tactile_slip.kernel_elm import TrainedModel, elm_scores, status_from_scores
from tactile_slip.preprocess import Bin
from tactile_slip.errors import ConfigError
from tactile_slip.tactile_data import ChannelMeta, Status

DEFAULT_CONFIRM = 2
DEFAULT_ARM = 2


@dataclass(frozen=True, eq=False)
class StatusSequence:
    bin_start_s: np.ndarray
    statuses: list[Status]
    scores: np.ndarray
    width_s: float = 0.05

    def __post_init__(self) -> None:
        if not len(self.bin_start_s) == len(self.statuses) == len(self.scores):
            raise ValueError("bin_start_s, statuses and scores must have equal length")
        if len(self.bin_start_s) > 1:
            step = np.diff(self.bin_start_s)
            if np.any(step <= 0) or not np.allclose(step, step[0], rtol=0, atol=1e-9):
                raise ValueError("bin starts must increase with a constant step")

    @classmethod
    def from_statuses(cls, statuses: Sequence[Status], width_s: float = 0.05,
                      start_s: float = 0.0) -> "StatusSequence":
        n = len(statuses)
        return cls(start_s + np.arange(n) * width_s, list(statuses), np.zeros(n), width_s)


@dataclass(frozen=True)
class SlipEvent:
    onset_s: float
    bin_index: int
    confirm_count: int
    preceding_nonslip_count: int


def classify_stream(model: TrainedModel, bins: Sequence[Bin],
                    channels: Sequence[ChannelMeta] | None = None) -> StatusSequence:
    """Feature assembly, selection, z-scoring and prediction for every bin."""
    width = float(model.provenance.get("bin_width_s", 0.05))
    if not bins:
        return StatusSequence(np.zeros(0), [], np.zeros(0), width)
    stack = np.stack([b.samples for b in bins])
    rows = assemble_feature_rows(stack, bins[0].sample_rate_hz, channels,
                                 model.provenance.get("wavelet", "db4"),
                                 int(model.provenance.get("levels", 4)))
    scores = elm_scores(model, model.prepare(rows))
    return StatusSequence(np.array([b.start_s for b in bins]), status_from_scores(scores),
                          scores, bins[0].width_s)


@dataclass
class OnsetDetector:
    """Incremental form of :func:`detect_onsets`; feed one bin at a time."""

    m: int = DEFAULT_CONFIRM
    p: int = DEFAULT_ARM
    _index: int = 0
    _run_status: Status | None = None
    _run_start: int = 0
    _run_start_s: float = 0.0
    _run_len: int = 0
    _prev_status: Status | None = None
    _prev_len: int = 0
    events: list[SlipEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.m < 1 or self.p < 0:
            raise ConfigError(f"need m >= 1 and p >= 0, got m={self.m}, p={self.p}")

    def push(self, status: Status, start_s: float) -> SlipEvent | None:
        if status is not Status.SLIP:
            status = Status.NON_SLIP
        if status is self._run_status:
            self._run_len += 1
        else:
            self._prev_status, self._prev_len = self._run_status, self._run_len
            self._run_status, self._run_start, self._run_start_s = status, self._index, start_s
            self._run_len = 1
        self._index += 1
        if status is Status.SLIP and self._run_len == self.m and self._armed():
            event = SlipEvent(self._run_start_s, self._run_start, self.m,
                              self._prev_len if self._prev_status is Status.NON_SLIP else 0)
            self.events.append(event)
            return event
        return None

    def _armed(self) -> bool:
        if self._prev_status is None:
            return self.p == 0
        return self._prev_status is Status.NON_SLIP and self._prev_len >= self.p

    @property
    def in_slip(self) -> bool:
        return self._run_status is Status.SLIP


def detect_onsets(seq: StatusSequence, m: int = DEFAULT_CONFIRM, p: int = DEFAULT_ARM
                  ) -> list[SlipEvent]:
    """One event per maximal run of >= m Slip bins preceded by >= p NonSlip bins.

    A Slip run at the very start of the sequence only counts when ``p == 0``.
    """
    if m < 1 or p < 0:
        raise ConfigError(f"need m >= 1 and p >= 0, got m={m}, p={p}")
    events = []
    runs = run_lengths(seq.statuses)
    pos = 0
    for i, (status, length) in enumerate(runs):
        if status is Status.SLIP and length >= m:
            if i == 0:
                armed, before = p == 0, 0
            else:
                before = runs[i - 1][1]
                armed = before >= p
            if armed:
                events.append(SlipEvent(float(seq.bin_start_s[pos]), pos, m, before))
        pos += length
    return events


def run_lengths(statuses: Sequence[Status]) -> list[tuple[Status, int]]:
    runs: list[tuple[Status, int]] = []
    for s in statuses:
        s = Status.SLIP if s is Status.SLIP else Status.NON_SLIP
        if runs and runs[-1][0] is s:
            runs[-1] = (s, runs[-1][1] + 1)
        else:
            runs.append((s, 1))
    return runs


@dataclass
class OnsetReport:
    matches: list[tuple[float, float, float]]   # (truth, detected, detected - truth)
    misses: list[float]
    false_alarms: list[SlipEvent]

    @property
    def errors(self) -> list[float]:
        return [m[2] for m in self.matches]

    def to_json(self) -> dict:
        return {
            "matches": [{"truth_s": t, "onset_s": o, "error_s": e} for t, o, e in self.matches],
            "misses": self.misses,
            "false_alarms": [{"onset_s": ev.onset_s, "bin_index": ev.bin_index}
                             for ev in self.false_alarms],
        }


def onset_error(events: Sequence[SlipEvent], truth: Sequence[float], tol_s: float) -> OnsetReport:
    """Greedy nearest matching: closest (truth, event) pairs within ``tol_s`` first."""
    pairs = sorted(
        (abs(ev.onset_s - t), ti, ei)
        for ti, t in enumerate(truth) for ei, ev in enumerate(events)
        if abs(ev.onset_s - t) <= tol_s + 1e-12
    )
    used_t, used_e = set(), set()
    matches = []
    for _, ti, ei in pairs:
        if ti in used_t or ei in used_e:
            continue
        used_t.add(ti)
        used_e.add(ei)
        matches.append((truth[ti], events[ei].onset_s, events[ei].onset_s - truth[ti]))
    matches.sort()
    return OnsetReport(matches,
                       [t for i, t in enumerate(truth) if i not in used_t],
                       [ev for i, ev in enumerate(events) if i not in used_e])


def detection_report(seq: StatusSequence, events: Sequence[SlipEvent], m: int, p: int) -> dict:
    runs = run_lengths(seq.statuses)
    return {
        "events": [{"onset_s": ev.onset_s, "bin_index": ev.bin_index} for ev in events],
        "statuses": [[s.value, n] for s, n in runs],
        "starts_in_slip": bool(runs) and runs[0][0] is Status.SLIP,
        "ends_in_slip": bool(runs) and runs[-1][0] is Status.SLIP,
        "params": {"m": m, "p": p, "bin_width_s": seq.width_s},
    }
