"""Pooled-variance t-score feature ranking, top-K selection and z-scoring."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from tactile_slip.errors import RankingError, ScoreError
from tactile_slip.features import FeatureMatrix, FeatureSlot
from tactile_slip.tactile_data import Status

DEFAULT_K = 120
STD_FLOOR = 1e-12
VAR_GUARD = 1e-24


def pooled_t_scores(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise two-sample t statistics with a pooled variance estimate.

    ``a`` and ``b`` are [n_a x p] and [n_b x p]; columns whose pooled variance
    falls below 1e-24 score 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise ScoreError(f"each class needs >= 2 samples, got {na} and {nb}")
    va = a.var(axis=0, ddof=1)
    vb = b.var(axis=0, ddof=1)
    sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
    diff = a.mean(axis=0) - b.mean(axis=0)
    ok = sp2 >= VAR_GUARD
    denom = np.sqrt(np.where(ok, sp2, 1.0) * (1.0 / na + 1.0 / nb))
    return np.where(ok, diff / denom, 0.0)


def pooled_t_score(class_a, class_b) -> float:
    return float(pooled_t_scores(np.asarray(class_a, float), np.asarray(class_b, float))[0])


@dataclass(frozen=True, eq=False)
class FeatureRanking:
    t: np.ndarray            # signed, Slip minus NonSlip
    scores: np.ndarray       # |t|
    order: np.ndarray
    selected: np.ndarray
    k: int


def rank_features(matrix: FeatureMatrix, k: int = DEFAULT_K) -> FeatureRanking:
    """Rank slots by |t| (descending, ties by ascending slot index) and keep the top ``k``."""
    slip = np.array([lab is Status.SLIP for lab in matrix.labels])
    nonslip = np.array([lab is Status.NON_SLIP for lab in matrix.labels])
    if slip.sum() < 2 or nonslip.sum() < 2:
        raise RankingError(
            f"need >= 2 rows per class, got {int(slip.sum())} Slip / {int(nonslip.sum())} NonSlip")
    if not 1 <= k <= matrix.values.shape[1]:
        raise RankingError(f"k must be in 1..{matrix.values.shape[1]}, got {k}")
    t = pooled_t_scores(matrix.values[slip], matrix.values[nonslip])
    scores = np.abs(t)
    # lexsort: last key is primary
    order = np.lexsort((np.arange(scores.size), -scores))
    return FeatureRanking(t, scores, order, order[:k].copy(), k)


@dataclass(frozen=True, eq=False)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.means) / self.stds


def fit_standardizer(matrix: FeatureMatrix | np.ndarray, selected: Sequence[int] | None = None
                     ) -> Standardizer:
    values = matrix.values if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, float)
    if selected is not None:
        values = values[:, np.asarray(selected, dtype=int)]
    if values.shape[0] < 2:
        raise RankingError("standardizer needs >= 2 training rows")
    return Standardizer(values.mean(axis=0), np.maximum(values.std(axis=0), STD_FLOOR))


def write_ranking_csv(ranking: FeatureRanking, slot_map: Sequence[FeatureSlot],
                      path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "slot", "name", "t", "abs_t"])
        for rank, idx in enumerate(ranking.order, start=1):
            writer.writerow([rank, int(idx), slot_map[idx].name,
                             format(ranking.t[idx], ".17g"), format(ranking.scores[idx], ".17g")])


def feature_statistics(slots: Sequence[FeatureSlot]) -> dict[str, dict[str, int]]:
    """Counts of the given slots along the four report axes, plus domain."""
    def count(key) -> dict[str, int]:
        return dict(sorted(Counter(key(s) for s in slots).items()))

    return {
        "se_type": count(lambda s: s.se_kind.value),
        "component": count(lambda s: s.band),
        "finger": count(lambda s: s.finger.value),
        "definition": count(lambda s: s.definition),
        "domain": count(lambda s: s.domain),
    }
