"""Command-line entry point: generate, train, eval, detect, feature-report.

Exit codes:

    0  success
    2  configuration error (bad flag values, bad config file)
    3  schema / parse / format-version error in an input file
    4  numeric failure (ill-conditioned solve, non-finite features, empty training set)
    5  I/O error (missing or unwritable path)

Every JSON report embeds the full run configuration and a SHA-256 over the
input files it was computed from. Reports carry no timestamps, so identical
inputs and flags give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from tactile_slip.errors import (
    ConfigError, NumericError, SchemaError, SlipError, TrainingError, VersionError,
)
from tactile_slip.features import build_slot_map, pool_size
from tactile_slip.kernel_elm import evaluate, load_model, save_model
from tactile_slip.pipeline import (
    PipelineConfig, config_from_provenance, records_from_trials, stack, stream_statuses,
    train_on_matrix,
)
from tactile_slip.selection import feature_statistics, write_ranking_csv
from tactile_slip.slip_detect import detect_onsets, detection_report, onset_error
from tactile_slip.synthgen import (
    GenConfig, default_materials, gen_config_to_json, iter_corpus, load_registry, sha256_file,
    write_corpus,
)
from tactile_slip.tactile_data import Kind, default_channels, load_trial, split_trials

log = logging.getLogger("tactile_slip")

EXIT_OK, EXIT_CONFIG, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5
ONSET_TOLERANCE_S = 0.1


@dataclass
class RunConfig:
    corpus: str | None = None
    model: str | None = None
    out: str | None = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def to_json(self) -> dict:
        return {"paths": {"corpus": self.corpus, "model": self.model, "out": self.out},
                "pipeline": self.pipeline.to_json()}


# flag name -> PipelineConfig field
PIPELINE_FLAGS = {
    "bin_width": "bin_width_s", "window": "window_s",
    "pvdf_frame": "pvdf_frame", "pvdf_order": "pvdf_order",
    "sg_frame": "sg_frame", "sg_order": "sg_order",
    "wavelet": "wavelet", "levels": "levels", "k": "k", "c": "c", "d": "d", "reg_c": "reg_c",
    "train_fraction": "train_fraction", "m": "m", "p": "p",
}


def _check_pipeline(cfg: PipelineConfig) -> None:
    if cfg.bin_width_s <= 0 or cfg.window_s <= 0:
        raise ConfigError("bin width and window must be > 0")
    if cfg.window_s < cfg.bin_width_s:
        raise ConfigError("window must hold at least one bin")
    if cfg.levels < 1:
        raise ConfigError("levels must be >= 1")
    if not 1 <= cfg.k <= pool_size(levels=cfg.levels):
        raise ConfigError(f"k must be in [1, {pool_size(levels=cfg.levels)}]")
    if cfg.c < 0 or cfg.d < 1 or not cfg.reg_c > 0:
        raise ConfigError("need c >= 0, d >= 1, reg_c > 0")
    if not 0 < cfg.train_fraction < 1:
        raise ConfigError("train fraction must be in (0, 1)")
    if cfg.m < 1 or cfg.p < 0:
        raise ConfigError("need m >= 1 and p >= 0")
    _ = (cfg.pvdf_filter, cfg.sg_filter)  # FilterSpec validates frame and order


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the ``--config`` JSON file, then explicit flags."""
    pipe = asdict(PipelineConfig())
    paths = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        section = doc.get("pipeline", {})
        unknown = set(section) - set(pipe)
        if unknown:
            raise ConfigError(f"{args.config}: unknown pipeline keys {sorted(unknown)}")
        pipe.update(section)
        paths.update({k: v for k, v in doc.get("paths", {}).items()
                      if k in ("corpus", "model", "out")})
    for flag, key in PIPELINE_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            pipe[key] = value
    if args.seed is not None:
        pipe["seed"] = args.seed
    for key in ("corpus", "model", "out"):
        value = getattr(args, key, None)
        if value is not None:
            paths[key] = value
    try:
        cfg = PipelineConfig(**pipe)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    _check_pipeline(cfg)
    return RunConfig(paths.get("corpus"), paths.get("model"), paths.get("out"), cfg)


def _hash_files(paths: Sequence[Path]) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).name.encode())
        h.update(bytes.fromhex(sha256_file(p)))
    return h.hexdigest()


def _write_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(run: RunConfig, default: str = ".") -> Path:
    out = Path(run.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(value: str | None, what: str) -> str:
    if not value:
        raise ConfigError(f"--{what} is required")
    return value


def load_corpus(corpus_dir: str | Path):
    """Trials listed by ``manifest.json`` in manifest order, plus their input hash."""
    root = Path(corpus_dir)
    manifest_path = root / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{manifest_path}: line {exc.lineno}: {exc.msg}") from exc
    if manifest.get("format_version") != 1:
        raise VersionError(f"{manifest_path}: unsupported format_version")
    trials = [load_trial(root / e["trial_id"]) for e in manifest["trials"]]
    return trials, _hash_files([manifest_path])


# ----------------------------------------------------------------------- commands

def _materials(spec: str):
    training, unseen = default_materials()
    if spec == "default":
        return training
    if spec == "unseen":
        return unseen
    if spec == "all":
        return training + unseen
    return load_registry(spec)


def gen_config(args: argparse.Namespace) -> GenConfig:
    """GenConfig from defaults, the ``generator`` section of ``--config``, then flags."""
    values = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: line {exc.lineno}: {exc.msg}") from exc
        values.update(doc.get("generator", {}) if isinstance(doc, dict) else {})
    if args.trials_per_case is not None:
        values["trials_per_case"] = args.trials_per_case
    if args.seed is not None:
        values["seed"] = args.seed
    try:
        return GenConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_generate(args: argparse.Namespace, run: RunConfig) -> dict:
    gen = gen_config(args)
    if args.velocities:
        gen = replace(gen, velocities_mm_s=tuple(args.velocities))
    materials = _materials(args.materials)
    out = _out_dir(run, "corpus")
    manifest = write_corpus(iter_corpus(materials, gen, args.mode), out, materials, gen, args.mode)
    summary = {"trials": len(manifest["trials"]), "mode": args.mode,
               "manifest_sha256": sha256_file(out / "manifest.json"),
               "config": gen_config_to_json(gen)}
    print(f"wrote {summary['trials']} trials to {out} (manifest {summary['manifest_sha256'][:12]})")
    return summary


def _split_records(records, cfg: PipelineConfig):
    return split_trials(records, cfg.train_fraction, cfg.seed)


def cmd_train(args: argparse.Namespace, run: RunConfig) -> dict:
    cfg = run.pipeline
    trials, input_hash = load_corpus(_require(run.corpus, "corpus"))
    records = records_from_trials(trials, cfg)
    train, test = _split_records(records, cfg)
    matrix = stack(train)
    if matrix.n_rows == 0:
        raise TrainingError("no labeled bins in the training split")
    result = train_on_matrix(matrix, cfg)
    out = _out_dir(run)
    model_path = Path(run.model) if run.model else out / "model.json"
    save_model(result.model, model_path)
    write_ranking_csv(result.ranking, result.slot_map, out / "ranking.csv")
    if args.export_features:
        matrix.to_csv(args.export_features)
    test_matrix = stack(test)
    report = {
        "run_config": run.to_json(),
        "input_sha256": input_hash,
        "train_trials": [r.trial_id for r in train],
        "test_trials": [r.trial_id for r in test],
        "train": result.train_metrics.to_json(),
        "test": evaluate(result.model, test_matrix).to_json() if test_matrix.n_rows else None,
    }
    _write_json(report, out / "metrics.json")
    _print_metrics({"train": report["train"], "test": report["test"]})
    return report


def _check_layout(model, matrix) -> None:
    prov = model.provenance
    expected = prov.get("pool_size")
    if expected is not None and matrix.values.shape[1] != expected:
        raise VersionError(f"model expects {expected} feature slots, corpus gives "
                           f"{matrix.values.shape[1]}")


def cmd_eval(args: argparse.Namespace, run: RunConfig) -> dict:
    model_path = _require(run.model, "model")
    model = load_model(model_path)
    cfg = config_from_provenance(model.provenance)
    trials, corpus_hash = load_corpus(_require(run.corpus, "corpus"))
    records = records_from_trials(trials, cfg)
    if args.split != "all":
        train, test = _split_records(records, cfg)
        records = train if args.split == "train" else test
    matrix = stack(records)
    _check_layout(model, matrix)
    if matrix.n_rows == 0:
        raise SchemaError("corpus yields no labeled bins")
    metrics = evaluate(model, matrix).to_json()
    report = {
        "run_config": replace(run, pipeline=cfg).to_json(),
        "input_sha256": _hash_files([Path(model_path), Path(run.corpus) / "manifest.json"]),
        "corpus_sha256": corpus_hash,
        "split": args.split,
        "trials": [r.trial_id for r in records],
        "metrics": metrics,
    }
    _write_json(report, _out_dir(run) / "eval.json")
    _print_metrics({args.split: metrics})
    return report


def cmd_detect(args: argparse.Namespace, run: RunConfig) -> dict:
    model_path = _require(run.model, "model")
    model = load_model(model_path)
    cfg = config_from_provenance(model.provenance)
    m = args.m if args.m is not None else cfg.m
    p = args.p if args.p is not None else cfg.p
    if m < 1 or p < 0:
        raise ConfigError("need m >= 1 and p >= 0")
    cfg = replace(cfg, m=m, p=p)
    trial = load_trial(args.trial)
    seq = stream_statuses(model, trial, cfg)
    events = detect_onsets(seq, m, p)
    meta_path = Path(str(args.trial).removesuffix(".csv").removesuffix(".meta.json"))
    report = {
        "run_config": replace(run, pipeline=cfg).to_json(),
        "input_sha256": _hash_files([Path(model_path), meta_path.with_name(meta_path.name + ".meta.json"),
                                     meta_path.with_name(meta_path.name + ".csv")]),
        "trial_id": trial.trial_id,
        **detection_report(seq, events, m, p),
    }
    truth = [s.slip_onset_s for s in trial.segments]
    if truth:
        report["truth"] = onset_error(events, truth, ONSET_TOLERANCE_S).to_json()
        report["truth"]["tolerance_s"] = ONSET_TOLERANCE_S
    out = _out_dir(run)
    _write_json(report, out / "detect.json")
    if args.plot_csv:
        with open(args.plot_csv, "w", encoding="utf-8") as fh:
            fh.write("bin_start_s,status,score\n")
            for t, s, sc in zip(seq.bin_start_s, seq.statuses, seq.scores):
                fh.write(f"{t:.17g},{s.value},{sc:.17g}\n")
    print(f"{trial.trial_id}: {len(events)} onset(s) at "
          + ", ".join(f"{e.onset_s:.2f}s" for e in events))
    return report


def cmd_feature_report(args: argparse.Namespace, run: RunConfig) -> dict:
    model_path = _require(run.model, "model")
    model = load_model(model_path)
    if model.selected is None:
        raise SchemaError(f"{model_path}: model carries no feature selection")
    levels = int(model.provenance.get("levels", 4))
    slot_map = build_slot_map(default_channels(), levels)
    slots = [slot_map[i] for i in model.selected]
    stats = feature_statistics(slots)
    se = stats["se_type"]
    if se.get(Kind.PVDF.value, 0) < se.get(Kind.SG.value, 0):
        log.warning("more SG than PVDF slots selected (%s)", se)
    report = {
        "run_config": replace(run, pipeline=config_from_provenance(model.provenance)).to_json(),
        "input_sha256": _hash_files([Path(model_path)]),
        "k": len(slots),
        "counts": stats,
        "selected": [s.name for s in slots],
    }
    _write_json(report, _out_dir(run) / "feature_report.json")
    for axis, counts in stats.items():
        print(f"{axis}:")
        for key, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            print(f"  {key:<28s}{n:>5d}")
    return report


def _print_metrics(blocks: dict) -> None:
    for name, mt in blocks.items():
        if mt is None:
            print(f"{name}: no bins")
            continue
        (tn, fp), (fn, tp) = mt["confusion"]["rows_true_cols_pred"]
        print(f"{name}: acc={mt['accuracy']:.4f} recall_nonslip={mt['recall_nonslip']:.4f} "
              f"recall_slip={mt['recall_slip']:.4f}  confusion [[{tn} {fp}] [{fn} {tp}]]")


# ----------------------------------------------------------------------- parser

def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands re-declare the globals with suppressed defaults so that
    # "--seed 3 train" and "train --seed 3" both work
    default = {"default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (generation, split)", **default)
    common.add_argument("--config", help="JSON run configuration", **default)
    common.add_argument("--out", help="output directory", **default)
    common.add_argument("-v", "--verbose", action="store_true", **default)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)

    pipe = argparse.ArgumentParser(add_help=False)
    g = pipe.add_argument_group("pipeline")
    g.add_argument("--bin-width", dest="bin_width", type=float)
    g.add_argument("--window", type=float, help="labeling window (s) on each side of the onset")
    g.add_argument("--pvdf-frame", type=int)
    g.add_argument("--pvdf-order", type=int)
    g.add_argument("--sg-frame", type=int)
    g.add_argument("--sg-order", type=int)
    g.add_argument("--wavelet")
    g.add_argument("--levels", type=int)
    g.add_argument("--k", type=int, help="number of selected features")
    g.add_argument("--c", type=float, help="polynomial kernel offset")
    g.add_argument("--d", type=int, help="polynomial kernel degree")
    g.add_argument("--reg-c", dest="reg_c", type=float, help="ridge term is I / reg_c")
    g.add_argument("--train-fraction", type=float)

    parser = argparse.ArgumentParser(prog="tactile-slip", description=__doc__.split("\n")[0],
                                     parents=[_global_flags(suppress=False)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic corpus")
    p.add_argument("--materials", default="default",
                   help="default | unseen | all | path to a material registry JSON")
    p.add_argument("--mode", choices=("single", "cycle"), default="single")
    p.add_argument("--trials-per-case", type=int)
    p.add_argument("--velocities", type=float, nargs="+")

    p = sub.add_parser("train", parents=[common, pipe], help="train on a corpus split")
    p.add_argument("--corpus")
    p.add_argument("--model", help="model archive path (default <out>/model.json)")
    p.add_argument("--export-features", help="write the training feature matrix as CSV")

    p = sub.add_parser("eval", parents=[common], help="evaluate a frozen model")
    p.add_argument("--model")
    p.add_argument("--corpus")
    p.add_argument("--split", choices=("all", "train", "test"), default="all",
                   help="evaluate only this part of the model's own train/test split")

    p = sub.add_parser("detect", parents=[common], help="onset detection on one trial stream")
    p.add_argument("--model")
    p.add_argument("--trial", required=True, help="trial path (stem, .csv or .meta.json)")
    p.add_argument("--m", type=int, help="consecutive Slip bins to confirm")
    p.add_argument("--p", type=int, help="consecutive NonSlip bins to arm")
    p.add_argument("--plot-csv", help="per-bin status/score CSV")

    p = sub.add_parser("feature-report", parents=[common], help="selected-feature counts")
    p.add_argument("--model")
    return parser


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval,
            "detect": cmd_detect, "feature-report": cmd_feature_report}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            run = RunConfig(out=args.out)
        else:
            run = resolve_config(args)
        COMMANDS[args.command](args, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (NumericError, TrainingError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SlipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
