import json
import shutil

import pytest

from tactile_slip.cli import main
from tactile_slip.synthgen import sha256_file

SMALL = ["--trials-per-case", "3", "--velocities", "60"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run("generate", *SMALL, "--out", root / "corpus") == 0
    assert run("train", "--corpus", root / "corpus", "--out", root / "run") == 0
    return root


def read(path):
    return json.loads(path.read_text())


class TestGenerate:
    def test_one_trial_per_case(self, tmp_path):
        assert run("generate", "--trials-per-case", "1", "--out", tmp_path / "c") == 0
        manifest = read(tmp_path / "c" / "manifest.json")
        assert len(manifest["trials"]) == 18
        assert (tmp_path / "c" / "materials.json").exists()
        for entry in manifest["trials"]:
            for name, digest in entry["sha256"].items():
                assert sha256_file(tmp_path / "c" / name) == digest

    def test_rerun_same_manifest(self, tmp_path):
        for name in ("a", "b"):
            assert run("generate", *SMALL, "--seed", "3", "--out", tmp_path / name) == 0
        assert (tmp_path / "a" / "manifest.json").read_bytes() == \
            (tmp_path / "b" / "manifest.json").read_bytes()

    def test_seed_changes_corpus(self, tmp_path):
        run("generate", *SMALL, "--seed", "3", "--out", tmp_path / "a")
        run("generate", *SMALL, "--seed", "4", "--out", tmp_path / "b")
        assert (tmp_path / "a" / "manifest.json").read_bytes() != \
            (tmp_path / "b" / "manifest.json").read_bytes()

    def test_unseen_and_cycle(self, tmp_path):
        assert run("generate", "--materials", "unseen", "--mode", "cycle", "--trials-per-case", "1",
                   "--out", tmp_path) == 0
        manifest = read(tmp_path / "manifest.json")
        assert manifest["mode"] == "cycle" and len(manifest["trials"]) == 4


class TestTrainEval:
    def test_outputs(self, trained):
        out = trained / "run"
        metrics = read(out / "metrics.json")
        assert metrics["run_config"]["pipeline"]["k"] == 120
        assert metrics["run_config"]["paths"]["corpus"] == str(trained / "corpus")
        assert len(metrics["input_sha256"]) == 64
        assert len(metrics["train_trials"]) + len(metrics["test_trials"]) == 18
        assert not set(metrics["train_trials"]) & set(metrics["test_trials"])
        assert sum(map(sum, metrics["test"]["confusion"]["rows_true_cols_pred"])) == metrics["test"]["n"]
        lines = (out / "ranking.csv").read_text().splitlines()
        assert lines[0] == "rank,slot,name,t,abs_t" and len(lines) == 2583

    def test_eval_test_split_reproduces_train_report(self, trained, tmp_path):
        assert run("eval", "--model", trained / "run" / "model.json", "--corpus", trained / "corpus",
                   "--split", "test", "--out", tmp_path) == 0
        ev = read(tmp_path / "eval.json")
        assert ev["metrics"] == read(trained / "run" / "metrics.json")["test"]
        assert ev["trials"] == read(trained / "run" / "metrics.json")["test_trials"]

    def test_retrain_identical_model(self, trained, tmp_path):
        assert run("train", "--corpus", trained / "corpus", "--out", tmp_path) == 0
        assert (tmp_path / "model.json").read_bytes() == (trained / "run" / "model.json").read_bytes()

    def test_full_pool(self, trained, tmp_path):
        assert run("train", "--corpus", trained / "corpus", "--k", "2582", "--out", tmp_path) == 0
        metrics = read(tmp_path / "metrics.json")
        assert metrics["run_config"]["pipeline"]["k"] == 2582
        assert 0.0 <= metrics["test"]["accuracy"] <= 1.0

    def test_config_file_and_flag_precedence(self, trained, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"pipeline": {"k": 30, "reg_c": 10.0}}))
        assert run("train", "--config", cfg, "--corpus", trained / "corpus", "--k", "20",
                   "--out", tmp_path) == 0
        pipe = read(tmp_path / "metrics.json")["run_config"]["pipeline"]
        assert pipe["k"] == 20 and pipe["reg_c"] == 10.0

    def test_export_features(self, trained, tmp_path):
        assert run("train", "--corpus", trained / "corpus", "--out", tmp_path,
                   "--export-features", tmp_path / "f.csv") == 0
        header = (tmp_path / "f.csv").read_text().split("\n", 1)[0].split(",")
        assert len(header) == 2583

    def test_feature_report(self, trained, tmp_path):
        assert run("feature-report", "--model", trained / "run" / "model.json", "--out", tmp_path) == 0
        rep = read(tmp_path / "feature_report.json")
        assert rep["k"] == 120 and len(rep["selected"]) == 120
        assert set(rep["counts"]) == {"se_type", "component", "finger", "definition", "domain"}
        for counts in rep["counts"].values():
            assert sum(counts.values()) == 120


@pytest.fixture(scope="module")
def cycle(tmp_path_factory):
    root = tmp_path_factory.mktemp("cycle")
    assert run("generate", "--mode", "cycle", "--trials-per-case", "1", "--out", root) == 0
    return root / read(root / "manifest.json")["trials"][0]["trial_id"]


class TestDetect:
    def test_report_and_plot(self, trained, cycle, tmp_path):
        assert run("detect", "--model", trained / "run" / "model.json", "--trial", cycle,
                   "--out", tmp_path, "--plot-csv", tmp_path / "plot.csv") == 0
        rep = read(tmp_path / "detect.json")
        assert rep["params"] == {"m": 2, "p": 2, "bin_width_s": 0.05}
        assert len(rep["truth"]["matches"]) + len(rep["truth"]["misses"]) == 3
        lines = (tmp_path / "plot.csv").read_text().splitlines()
        assert lines[0] == "bin_start_s,status,score"
        assert sum(n for _, n in rep["statuses"]) == len(lines) - 1

    def test_loose_debounce_not_fewer_events(self, trained, cycle, tmp_path):
        model = trained / "run" / "model.json"
        run("detect", "--model", model, "--trial", cycle, "--out", tmp_path / "a")
        run("detect", "--model", model, "--trial", cycle, "--out", tmp_path / "b", "--m", "1", "--p", "1")
        assert len(read(tmp_path / "b" / "detect.json")["events"]) >= \
            len(read(tmp_path / "a" / "detect.json")["events"])


class TestExitCodes:
    def test_23_channel_corpus(self, trained, tmp_path):
        corpus = tmp_path / "bad"
        shutil.copytree(trained / "corpus", corpus)
        tid = read(corpus / "manifest.json")["trials"][0]["trial_id"]
        meta = read(corpus / f"{tid}.meta.json")
        meta["channels"] = meta["channels"][:23]
        (corpus / f"{tid}.meta.json").write_text(json.dumps(meta))
        assert run("eval", "--model", trained / "run" / "model.json", "--corpus", corpus,
                   "--out", tmp_path) == 3

    def test_layout_mismatch(self, trained, tmp_path):
        doc = read(trained / "run" / "model.json")
        doc["provenance"]["pool_size"] = 100
        (tmp_path / "m.json").write_text(json.dumps(doc))
        assert run("eval", "--model", tmp_path / "m.json", "--corpus", trained / "corpus",
                   "--out", tmp_path) == 3

    def test_bad_flag_value(self, trained, tmp_path):
        assert run("train", "--corpus", trained / "corpus", "--k", "0", "--out", tmp_path) == 2

    def test_unknown_config_key(self, trained, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"pipeline": {"kk": 3}}))
        assert run("train", "--config", tmp_path / "c.json", "--corpus", trained / "corpus",
                   "--out", tmp_path) == 2

    def test_missing_corpus(self, tmp_path):
        assert run("train", "--corpus", tmp_path / "nope", "--out", tmp_path) == 5

    def test_missing_required(self, tmp_path):
        assert run("eval", "--out", tmp_path) == 2


def test_byte_identical_reruns(monkeypatch, tmp_path):
    outputs = {}
    for name in ("one", "two"):
        d = tmp_path / name
        d.mkdir()
        monkeypatch.chdir(d)
        assert run("generate", *SMALL, "--out", "corpus") == 0
        assert run("train", "--corpus", "corpus", "--out", "run") == 0
        assert run("eval", "--model", "run/model.json", "--corpus", "corpus", "--out", "run") == 0
        assert run("feature-report", "--model", "run/model.json", "--out", "run") == 0
        outputs[name] = {p.name: p.read_bytes() for p in sorted((d / "run").iterdir())}
        outputs[name]["manifest.json"] = (d / "corpus" / "manifest.json").read_bytes()
    assert outputs["one"] == outputs["two"]
