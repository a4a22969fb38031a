"""Polynomial-kernel extreme learning machine (binary, +1 = Slip, -1 = NonSlip).

Training solves ``(Omega + I / reg_c) alpha = y`` with a Cholesky factorisation,
falling back to the pseudoinverse when the factorisation fails (which is also
how ``reg_c = inf`` reduces to the plain Moore-Penrose solution). Prediction
is the kernel expansion ``f(x) = sum_i alpha_i k(x, x_i)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from tactile_slip.errors import NumericError, TrainingError, VersionError
from tactile_slip.features import FeatureMatrix
from tactile_slip.selection import Standardizer
from tactile_slip.tactile_data import Status

MODEL_FORMAT_VERSION = 1
SOLVE_TOL = 1e-8
# |f| below this fraction of sum_i |alpha_i k_i| is a numerical tie
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class KernelParams:
    c: float = 0.5
    d: int = 2
    reg_c: float = 100.0

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 1:
            raise TrainingError(f"kernel degree must be a positive integer, got {self.d}")
        if not self.reg_c > 0:
            raise TrainingError(f"reg_c must be > 0, got {self.reg_c}")


def poly_kernel(u, v, params: KernelParams = KernelParams()) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    return float((np.dot(u, v) + params.c) ** params.d)


def gram(x: np.ndarray, y: np.ndarray, params: KernelParams) -> np.ndarray:
    g = x @ y.T
    g += params.c
    return g ** params.d


@dataclass(frozen=True, eq=False)
class TrainedModel:
    params: KernelParams
    train_rows: np.ndarray
    alpha: np.ndarray
    selected: np.ndarray | None = None
    standardizer: Standardizer | None = None
    label_map: dict = field(default_factory=lambda: {"+1": Status.SLIP.value,
                                                     "-1": Status.NON_SLIP.value})
    provenance: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.train_rows.shape[1]

    def prepare(self, full_rows: np.ndarray) -> np.ndarray:
        """Pool rows -> selected, standardized rows in the model's feature space."""
        rows = np.atleast_2d(np.asarray(full_rows, dtype=np.float64))
        if self.selected is not None:
            rows = rows[:, self.selected]
        if self.standardizer is not None:
            rows = self.standardizer.transform(rows)
        return rows


def elm_train(rows, labels, params: KernelParams = KernelParams()) -> TrainedModel:
    x = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise TrainingError(f"rows {x.shape} and labels {y.shape} do not align")
    if x.shape[0] < 2:
        raise TrainingError("need at least 2 training rows")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise TrainingError("training rows or labels contain NaN/Inf")
    if not set(np.unique(y)) == {-1.0, 1.0}:
        raise TrainingError("labels must be +/-1 with both classes present")

    a = gram(x, x, params)
    if math.isfinite(params.reg_c):
        a[np.diag_indices_from(a)] += 1.0 / params.reg_c
    alpha = _solve_spd(a, y)
    x.setflags(write=False)
    alpha.setflags(write=False)
    return TrainedModel(params, x, alpha)


def _solve_spd(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
        alpha = scipy.linalg.cho_solve(factor, y, check_finite=False)
        if np.all(np.isfinite(alpha)):
            return alpha
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        pass
    try:
        alpha = np.linalg.pinv(a, rcond=1e-15, hermitian=True) @ y
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"kernel solve failed (cond ~ {np.linalg.cond(a):.3g})") from exc
    if not np.all(np.isfinite(alpha)):
        raise NumericError(f"kernel solve produced non-finite weights (cond ~ {np.linalg.cond(a):.3g})")
    return alpha


def elm_scores(model: TrainedModel, rows) -> np.ndarray:
    """Scores for rows already in the model's feature space."""
    x = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if x.shape[1] != model.n_features:
        raise ValueError(f"row length {x.shape[1]} != model feature count {model.n_features}")
    k = gram(x, model.train_rows, model.params)
    f = k @ model.alpha
    scale = np.abs(k) @ np.abs(model.alpha)
    return np.where(np.abs(f) <= TIE_RTOL * scale, 0.0, f)


def elm_score(model: TrainedModel, row) -> float:
    return float(elm_scores(model, row)[0])


def status_from_scores(scores) -> list[Status]:
    # f == 0 -> Slip: a false alarm is cheaper than a missed slip
    return [Status.SLIP if s >= 0 else Status.NON_SLIP for s in np.asarray(scores)]


def elm_predict(model: TrainedModel, row) -> Status:
    return status_from_scores([elm_score(model, row)])[0]


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    recall_nonslip: float
    recall_slip: float
    confusion: tuple[tuple[int, int], tuple[int, int]]  # [true][pred], order NonSlip, Slip
    n: int

    def to_json(self) -> dict:
        return {"accuracy": self.accuracy, "recall_nonslip": self.recall_nonslip,
                "recall_slip": self.recall_slip, "n": self.n,
                "confusion": {"labels": ["NonSlip", "Slip"],
                              "rows_true_cols_pred": [list(r) for r in self.confusion]}}


def confusion_metrics(truth: Sequence[Status], pred: Sequence[Status]) -> Metrics:
    if len(truth) == 0:
        raise ValueError("cannot evaluate an empty set")
    order = (Status.NON_SLIP, Status.SLIP)
    cm = [[0, 0], [0, 0]]
    for t, p in zip(truth, pred):
        cm[order.index(t)][order.index(p)] += 1
    n = sum(map(sum, cm))

    def recall(i: int) -> float:
        total = cm[i][0] + cm[i][1]
        return cm[i][i] / total if total else 0.0

    return Metrics((cm[0][0] + cm[1][1]) / n, recall(0), recall(1),
                   (tuple(cm[0]), tuple(cm[1])), n)


def evaluate(model: TrainedModel, matrix: FeatureMatrix) -> Metrics:
    if matrix.n_rows == 0:
        raise ValueError("cannot evaluate an empty matrix")
    scores = elm_scores(model, model.prepare(matrix.values))
    return confusion_metrics(matrix.labels, status_from_scores(scores))


# ------------------------------------------------------------------ archive I/O

def _fmt(a) -> list:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return [format(v, ".17g") for v in a]
    return [_fmt(r) for r in a]


def _parse(a) -> np.ndarray:
    return np.array(a, dtype=np.float64) if not a or not isinstance(a[0], list) else \
        np.array([[float(v) for v in r] for r in a], dtype=np.float64)


def model_to_json(model: TrainedModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "params": {"c": format(model.params.c, ".17g"), "d": model.params.d,
                   "reg_c": format(model.params.reg_c, ".17g")},
        "label_map": model.label_map,
        "provenance": model.provenance,
        "selected": None if model.selected is None else [int(i) for i in model.selected],
        "standardizer": None if model.standardizer is None else {
            "means": _fmt(model.standardizer.means), "stds": _fmt(model.standardizer.stds)},
        "alpha": _fmt(model.alpha),
        "train_rows": _fmt(model.train_rows),
    }


def save_model(model: TrainedModel, path: str | Path) -> None:
    doc = model_to_json(model)
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported model format_version {doc.get('format_version')}")
    p = doc["params"]
    params = KernelParams(float(p["c"]), int(p["d"]), float(p["reg_c"]))
    std = doc.get("standardizer")
    rows = _parse(doc["train_rows"])
    alpha = _parse(doc["alpha"])
    rows.setflags(write=False)
    alpha.setflags(write=False)
    return TrainedModel(
        params=params, train_rows=rows, alpha=alpha,
        selected=None if doc.get("selected") is None else np.array(doc["selected"], dtype=int),
        standardizer=None if std is None else Standardizer(_parse(std["means"]), _parse(std["stds"])),
        label_map=doc["label_map"], provenance=doc.get("provenance", {}),
    )


def with_pipeline(model: TrainedModel, selected, standardizer: Standardizer,
                  provenance: dict) -> TrainedModel:
    return replace(model, selected=np.asarray(selected, dtype=int), standardizer=standardizer,
                   provenance=provenance)
