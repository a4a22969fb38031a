"""End-to-end glue: trial -> bins -> features -> selection -> kernel ELM."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from tactile_slip.features import FeatureMatrix, build_slot_map, pool_size
from tactile_slip.kernel_elm import (
    KernelParams, Metrics, TrainedModel, elm_train, evaluate, with_pipeline,
)
from tactile_slip.preprocess import FilterSpec, bin_stream, bin_windows, preprocess_trial
from tactile_slip.selection import FeatureRanking, fit_standardizer, rank_features
from tactile_slip.slip_detect import StatusSequence, classify_stream
from tactile_slip.tactile_data import SegmentAnnotation, TactileTrial, label_windows


@dataclass(frozen=True)
class PipelineConfig:
    bin_width_s: float = 0.05
    window_s: float = 0.5
    pvdf_frame: int = 11
    pvdf_order: int = 1
    sg_frame: int = 51
    sg_order: int = 1
    wavelet: str = "db4"
    levels: int = 4
    k: int = 120
    c: float = 0.5
    d: int = 2
    reg_c: float = 1e-4
    train_fraction: float = 0.8
    seed: int = 7
    m: int = 2
    p: int = 2

    @property
    def pvdf_filter(self) -> FilterSpec:
        return FilterSpec(self.pvdf_frame, self.pvdf_order)

    @property
    def sg_filter(self) -> FilterSpec:
        return FilterSpec(self.sg_frame, self.sg_order)

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(self.c, self.d, self.reg_c)

    def to_json(self) -> dict:
        return asdict(self)

    def provenance(self) -> dict:
        return {**self.to_json(), "pool_size": pool_size(levels=self.levels)}


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """Feature rows of one trial with just enough metadata to stratify and split."""

    trial_id: str
    material_id: str
    segments: tuple[SegmentAnnotation, ...]
    matrix: FeatureMatrix


def trial_matrix(trial: TactileTrial, cfg: PipelineConfig = PipelineConfig()) -> FeatureMatrix:
    filtered = preprocess_trial(trial, cfg.pvdf_filter, cfg.sg_filter)
    bins = bin_windows(filtered, label_windows(filtered, cfg.window_s), cfg.bin_width_s)
    if not bins:
        return FeatureMatrix(np.zeros((0, pool_size(levels=cfg.levels))),
                             build_slot_map(trial.channels, cfg.levels), [], [])
    return FeatureMatrix.from_bins(bins, trial.channels, cfg.wavelet, cfg.levels)


def trial_record(trial: TactileTrial, cfg: PipelineConfig = PipelineConfig()) -> TrialRecord:
    return TrialRecord(trial.trial_id, trial.material_id, trial.segments, trial_matrix(trial, cfg))


def records_from_trials(trials: Iterable[TactileTrial], cfg: PipelineConfig = PipelineConfig()
                        ) -> list[TrialRecord]:
    return [trial_record(t, cfg) for t in trials]


def stack(records: Sequence[TrialRecord]) -> FeatureMatrix:
    return FeatureMatrix.concat([r.matrix for r in records])


@dataclass(frozen=True, eq=False)
class TrainResult:
    model: TrainedModel
    ranking: FeatureRanking
    train_metrics: Metrics
    slot_map: list = field(default_factory=list)


def train_on_matrix(matrix: FeatureMatrix, cfg: PipelineConfig = PipelineConfig()) -> TrainResult:
    ranking = rank_features(matrix, cfg.k)
    standardizer = fit_standardizer(matrix, ranking.selected)
    rows = standardizer.transform(matrix.values[:, ranking.selected])
    model = elm_train(rows, matrix.label_signs(), cfg.kernel)
    model = with_pipeline(model, ranking.selected, standardizer, cfg.provenance())
    return TrainResult(model, ranking, evaluate(model, matrix), matrix.slot_map)


def stream_statuses(model: TrainedModel, trial: TactileTrial,
                    cfg: PipelineConfig = PipelineConfig()) -> StatusSequence:
    """Whole-trial status sequence (no windowing), as used for onset detection."""
    filtered = preprocess_trial(trial, cfg.pvdf_filter, cfg.sg_filter)
    return classify_stream(model, bin_stream(filtered, cfg.bin_width_s), trial.channels)


def config_from_provenance(prov: dict) -> PipelineConfig:
    known = {f for f in PipelineConfig.__dataclass_fields__}
    return PipelineConfig(**{k: v for k, v in prov.items() if k in known})
