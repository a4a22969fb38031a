import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import separable_blobs_2d
from tactile_slip.errors import TrainingError, VersionError
from tactile_slip.features import FeatureMatrix, FeatureSlot
from tactile_slip.kernel_elm import (
    KernelParams, confusion_metrics, elm_predict, elm_score, elm_scores, elm_train, evaluate,
    gram, load_model, poly_kernel, save_model, with_pipeline,
)
from tactile_slip.selection import fit_standardizer
from tactile_slip.tactile_data import Finger, Kind, Status

NO_REG = KernelParams(0.5, 2, float("inf"))
NS, S = Status.NON_SLIP, Status.SLIP


def residual(model):
    a = gram(model.train_rows, model.train_rows, model.params)
    if np.isfinite(model.params.reg_c):
        a += np.eye(len(a)) / model.params.reg_c
    return a @ model.alpha


def separable(rng, n, dim=2):
    w = rng.standard_normal(dim)
    x = rng.standard_normal((n, dim))
    margin = x @ w
    keep = np.abs(margin) > 0.1
    x, margin = x[keep], margin[keep]
    y = np.where(margin > 0, 1.0, -1.0)
    if len(set(y)) < 2:
        x = np.vstack([x, w, -w])
        y = np.r_[y, 1.0, -1.0]
    return x, y


class TestKernel:
    def test_values(self):
        assert poly_kernel([1, 0], [1, 0]) == 2.25
        assert poly_kernel([1, 0], [0, 1]) == 0.25

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            poly_kernel([1, 2], [1, 2, 3])

    @given(arrays(np.float64, 5, elements=st.floats(-10, 10)),
           arrays(np.float64, 5, elements=st.floats(-10, 10)))
    @settings(max_examples=80, deadline=None)
    def test_expansion_and_symmetry(self, u, v):
        ip = float(np.dot(u, v))
        assert poly_kernel(u, v) == poly_kernel(v, u)
        assert poly_kernel(u, v) == pytest.approx(ip ** 2 + ip + 0.25, rel=1e-12, abs=1e-12)

    def test_invalid_params(self):
        with pytest.raises(TrainingError):
            KernelParams(d=0)
        with pytest.raises(TrainingError):
            KernelParams(reg_c=0)


class TestTrain:
    def test_hand_solved(self):
        m = elm_train([[1.0, 0.0], [0.0, 1.0]], [1, -1], NO_REG)
        assert np.allclose(m.alpha, [0.5, -0.5], atol=1e-9)
        assert elm_score(m, [1.0, 0.0]) == pytest.approx(1.0, abs=1e-9)
        assert elm_score(m, [0.0, 1.0]) == pytest.approx(-1.0, abs=1e-9)
        assert elm_predict(m, [1.0, 0.0]) is S
        assert elm_predict(m, [0.0, 1.0]) is NS

    def test_identical_rows_tie_to_slip(self):
        m = elm_train([[1.0, 2.0], [1.0, 2.0]], [1, -1], KernelParams())
        assert elm_score(m, [1.0, 2.0]) == 0.0
        assert elm_predict(m, [1.0, 2.0]) is S

    def test_zero_alpha(self):
        m = elm_train([[1.0, 0.0], [0.0, 1.0]], [1, -1], NO_REG)
        from dataclasses import replace
        z = replace(m, alpha=np.zeros(2))
        assert elm_score(z, [3.0, -1.0]) == 0.0

    def test_random_separable_2d(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x, y = separable_blobs_2d(rng, int(rng.integers(10, 51)))
            m = elm_train(x, y, KernelParams(reg_c=1e6))
            pred = np.where(elm_scores(m, x) >= 0, 1.0, -1.0)
            assert np.array_equal(pred, y)
            assert np.max(np.abs(residual(m) - y)) <= 1e-8

    def test_random_separable_full_rank(self):
        # 8 inputs give 45 quadratic features, so the Gram matrix is full rank for n <= 40
        rng = np.random.default_rng(0)
        for _ in range(20):
            x, y = separable(rng, int(rng.integers(10, 41)), dim=8)
            m = elm_train(x, y, KernelParams(reg_c=1e6))
            pred = np.where(elm_scores(m, x) >= 0, 1.0, -1.0)
            assert np.array_equal(pred, y)
            assert np.max(np.abs(residual(m) - y)) <= 1e-8

    def test_duplicated_dataset_same_signs(self):
        rng = np.random.default_rng(1)
        x, y = separable(rng, 30)
        a = elm_train(x, y, KernelParams(reg_c=10.0))
        b = elm_train(np.vstack([x, x]), np.r_[y, y], KernelParams(reg_c=10.0))
        assert np.array_equal(np.sign(elm_scores(a, x)), np.sign(elm_scores(b, x)))
        ref = np.linalg.solve(gram(x, x, a.params) + np.eye(len(x)) / 10.0, y)
        assert np.allclose(a.alpha, ref, atol=1e-10)

    def test_no_reg_interpolates(self):
        x = np.random.default_rng(2).standard_normal((6, 4))
        y = np.array([1, -1, 1, -1, 1, -1.0])
        m = elm_train(x, y, NO_REG)
        assert np.allclose(elm_scores(m, x), y, atol=1e-6)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        x, y = separable(rng, 25)
        perm = rng.permutation(len(y))
        a = elm_train(x, y, KernelParams(reg_c=50.0))
        b = elm_train(x[perm], y[perm], KernelParams(reg_c=50.0))
        q = rng.standard_normal((10, 2))
        assert np.allclose(elm_scores(a, q), elm_scores(b, q), atol=1e-10)
        assert np.allclose(a.alpha[perm], b.alpha, atol=1e-10)

    @pytest.mark.parametrize("rows,labels", [
        ([[1.0, np.nan], [0.0, 1.0]], [1, -1]),
        ([[1.0, 0.0]], [1]),
        ([[1.0, 0.0], [0.0, 1.0]], [1, 1]),
        ([[1.0, 0.0], [0.0, 1.0]], [1, 0]),
    ])
    def test_bad_input(self, rows, labels):
        with pytest.raises(TrainingError):
            elm_train(rows, labels)

    def test_score_length_mismatch(self):
        m = elm_train([[1.0, 0.0], [0.0, 1.0]], [1, -1])
        with pytest.raises(ValueError):
            elm_score(m, [1.0, 0.0, 0.0])


class TestMetrics:
    def test_perfect(self):
        mt = confusion_metrics([NS, S, S], [NS, S, S])
        assert mt.accuracy == 1.0 and mt.confusion == ((1, 0), (0, 2))

    def test_inverted(self):
        mt = confusion_metrics([NS, S, S], [S, NS, NS])
        assert mt.accuracy == 0.0 and mt.recall_slip == 0.0 and mt.recall_nonslip == 0.0

    def test_layout_true_by_pred(self):
        mt = confusion_metrics([NS, NS, S], [S, NS, S])
        assert mt.confusion == ((1, 1), (0, 1))
        assert mt.recall_nonslip == 0.5

    def test_empty(self):
        with pytest.raises(ValueError):
            confusion_metrics([], [])


def small_pipeline_model(rng):
    x = np.r_[rng.normal(-1, 1, (20, 5)), rng.normal(1, 1, (20, 5))]
    slots = [FeatureSlot(i, 1, Kind.SG, Finger.THUMB, "Raw", "Time", "mean") for i in range(5)]
    matrix = FeatureMatrix(x, slots, [NS] * 20 + [S] * 20)
    sel = np.array([3, 0, 4])
    std = fit_standardizer(matrix, sel)
    m = elm_train(std.transform(x[:, sel]), matrix.label_signs(), KernelParams(reg_c=10.0))
    return with_pipeline(m, sel, std, {"wavelet": "db4", "levels": 4}), matrix


class TestArchive:
    def test_round_trip(self, tmp_path):
        m, matrix = small_pipeline_model(np.random.default_rng(4))
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        q = np.random.default_rng(5).standard_normal((30, 5))
        a = elm_scores(m, m.prepare(q))
        b = elm_scores(back, back.prepare(q))
        assert np.max(np.abs(a - b)) <= 1e-12
        assert np.array_equal(a, b)
        assert evaluate(back, matrix) == evaluate(m, matrix)

    def test_deterministic_bytes(self, tmp_path):
        for name in ("a", "b"):
            m, _ = small_pipeline_model(np.random.default_rng(6))
            save_model(m, tmp_path / f"{name}.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_reals_are_17_digit_text(self, tmp_path):
        m, _ = small_pipeline_model(np.random.default_rng(7))
        save_model(m, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        assert doc["format_version"] == 1
        assert isinstance(doc["alpha"][0], str)
        assert float(doc["alpha"][0]) == m.alpha[0]

    def test_version_mismatch(self, tmp_path):
        m, _ = small_pipeline_model(np.random.default_rng(8))
        save_model(m, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        doc["format_version"] = 99
        (tmp_path / "m.json").write_text(json.dumps(doc))
        with pytest.raises(VersionError):
            load_model(tmp_path / "m.json")
