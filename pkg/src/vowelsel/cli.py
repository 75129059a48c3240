"""Command-line front door for the whole pipeline.

Subcommands: synth, extract, fratio, train, evaluate, sweep. Values are
resolved as CLI flag > --config file entry > built-in default, and every
run writes a run.json echoing the fully resolved configuration so any
output can be reproduced byte-exactly from it plus the input data.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 numerical or degenerate-input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .audio import (
    Corpus,
    build_synthetic_corpus,
    list_corpus_dir,
    load_wav,
    read_manifest,
    write_corpus,
)
from .errors import (
    AudioFormatError,
    ConcentratedFeatureError,
    ConfigurationError,
    DegenerateClassError,
    DegenerateDataError,
    EmptyAudioError,
    TooShortError,
    UnsupportedFormatError,
)
from .evaluation import (
    EvalConfig,
    SweepReport,
    evaluate,
    sweep,
    write_confusion_csv,
    write_iterations_csv,
    write_sweep_csv,
)
from .features import (
    FrontendConfig,
    mfcc,
    read_features_csv,
    write_features_csv,
)
from .hmm import TrainingConfig, save_models, train
from .selection import class_statistics, f_ratio, pool_frames, select_top_k, write_fratio_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

_DATA_ERRORS = (AudioFormatError, UnsupportedFormatError, EmptyAudioError, OSError)
_NUMERICAL_ERRORS = (
    TooShortError,
    DegenerateClassError,
    DegenerateDataError,
    ConcentratedFeatureError,
    ValueError,
)

_DEFAULTS = {
    "seed": 0,
    "jobs": None,  # filled with os.cpu_count() at resolve time
    # frontend
    "frame_ms": 30.0,
    "hop_ms": 15.0,
    "n_filters": 26,
    "n_ceps": 12,
    "window": "hamming",
    "log_floor": 1e-10,
    "fft_pad": True,
    # training
    "n_states": 3,
    "n_mix": 2,
    "max_iters": 20,
    "rel_tol": 1e-4,
    "variance_floor": 1e-4,
    # evaluation
    "iterations": 50,
    "train_fraction": 0.8,
    "k": "3..12",
    "fratio_scope": "train",
    # synthesis
    "per_class": 25,
    "sample_rate": 16000,
    "duration": 0.4,
    # selection summary
    "top_k": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_k_spec(spec) -> tuple[int, ...]:
    """Parse '3..12', '3,5,8', or a bare integer into subset sizes."""
    if isinstance(spec, int):
        return (spec,)
    text = str(spec).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse k specification {spec!r}; use e.g. 3..12 or 3,5,8") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master RNG seed")
    common.add_argument("--jobs", type=int, help="parallel workers for evaluation iterations")
    common.add_argument("--config", type=Path, help="JSON file of flat key/value defaults")

    frontend = argparse.ArgumentParser(add_help=False)
    frontend.add_argument("--frame-ms", type=float, dest="frame_ms")
    frontend.add_argument("--hop-ms", type=float, dest="hop_ms")
    frontend.add_argument("--n-filters", type=int, dest="n_filters")
    frontend.add_argument("--n-ceps", type=int, dest="n_ceps")
    frontend.add_argument("--window", choices=["hamming", "hann", "rectangular"])
    frontend.add_argument("--log-floor", type=float, dest="log_floor")
    frontend.add_argument(
        "--no-fft-pad", action="store_const", const=False, dest="fft_pad",
        help="transform at the exact frame length instead of the next power of two",
    )

    source = argparse.ArgumentParser(add_help=False)
    group = source.add_mutually_exclusive_group()
    group.add_argument("--features", type=Path, help="precomputed features CSV")
    group.add_argument("--data-dir", type=Path, dest="data_dir",
                       help="root of <label>/*.wav recordings")
    group.add_argument("--manifest", type=Path, help="CSV with path,label rows")
    group.add_argument("--synthetic", action="store_true",
                       help="use the built-in synthetic vowel corpus")
    source.add_argument("--per-class", type=int, dest="per_class",
                        help="clips per class for --synthetic")
    source.add_argument("--sample-rate", type=int, dest="sample_rate")
    source.add_argument("--duration", type=float, help="synthetic clip length in seconds")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--n-states", type=int, dest="n_states")
    training.add_argument("--n-mix", type=int, dest="n_mix")
    training.add_argument("--max-iters", type=int, dest="max_iters")
    training.add_argument("--rel-tol", type=float, dest="rel_tol")
    training.add_argument("--variance-floor", type=float, dest="variance_floor")

    holdout = argparse.ArgumentParser(add_help=False)
    holdout.add_argument("--iterations", type=int)
    holdout.add_argument("--train-fraction", type=float, dest="train_fraction")

    parser = _Parser(prog="vowelsel", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="write a synthetic WAV corpus plus manifest")
    p.add_argument("--per-class", type=int, dest="per_class")
    p.add_argument("--sample-rate", type=int, dest="sample_rate")
    p.add_argument("--duration", type=float)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("extract", parents=[common, source, frontend],
                       help="extract MFCC features to CSV")
    p.add_argument("--out", type=Path, required=True, help="features CSV path")

    p = sub.add_parser("fratio", parents=[common, source, frontend],
                       help="rank coefficients by Fisher's ratio")
    p.add_argument("--top-k", type=int, dest="top_k",
                   help="subset size named in the text summary (default: all)")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("train", parents=[common, source, frontend, training],
                       help="train one model per class on all given clips")
    p.add_argument("--out", type=Path, required=True, help="model JSON path")

    p = sub.add_parser("evaluate", parents=[common, source, frontend, training, holdout],
                       help="repeated hold-out accuracy with all coefficients")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("sweep", parents=[common, source, frontend, training, holdout],
                       help="accuracy for each top-k subset size")
    p.add_argument("--k", help="subset sizes, e.g. 3..12 or 3,5,8")
    p.add_argument("--fratio-scope", choices=["train", "all"], dest="fratio_scope",
                   help="clips used for the per-iteration ranking")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    return parser


def _resolve(args) -> dict:
    config_doc = {}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            config_doc = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise UsageError(f"--config {config_path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"--config {config_path}: invalid JSON ({exc})") from None
        unknown = set(config_doc) - set(_DEFAULTS)
        if unknown:
            raise UsageError(f"--config {config_path}: unknown keys {sorted(unknown)}")
    resolved = {}
    for key, default in _DEFAULTS.items():
        value = getattr(args, key, None)
        if value is None:
            value = config_doc.get(key, default)
            if key in config_doc:
                value = _check_config_type(key, value, default)
        resolved[key] = value
    if resolved["jobs"] is None:
        resolved["jobs"] = os.cpu_count() or 1
    return resolved


def _check_config_type(key, value, default):
    if key == "k":
        if not isinstance(value, (int, str)) or isinstance(value, bool):
            raise UsageError(f"config key 'k' must be an integer or a range string, got {value!r}")
        return value
    if key in ("jobs", "top_k") and (not isinstance(value, int) or isinstance(value, bool)):
        raise UsageError(f"config key {key!r} must be an integer, got {value!r}")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise UsageError(f"config key {key!r} must be a boolean, got {value!r}")
    elif isinstance(default, int):
        if not isinstance(value, int) or isinstance(value, bool):
            raise UsageError(f"config key {key!r} must be an integer, got {value!r}")
    elif isinstance(default, float):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise UsageError(f"config key {key!r} must be a number, got {value!r}")
        value = float(value)
    elif isinstance(default, str) and not isinstance(value, str):
        raise UsageError(f"config key {key!r} must be a string, got {value!r}")
    return value


def _frontend_config(r) -> FrontendConfig:
    try:
        return FrontendConfig(
            frame_ms=r["frame_ms"], hop_ms=r["hop_ms"], n_filters=r["n_filters"],
            n_ceps=r["n_ceps"], window=r["window"], log_floor=r["log_floor"],
            fft_pad=r["fft_pad"],
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"frontend: {exc}") from None


def _training_config(r) -> TrainingConfig:
    try:
        return TrainingConfig(
            n_states=r["n_states"], n_mix=r["n_mix"], max_iters=r["max_iters"],
            rel_tol=r["rel_tol"], variance_floor=r["variance_floor"], seed=r["seed"],
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"training: {exc}") from None


def _eval_config(r, subset_sizes) -> EvalConfig:
    try:
        return EvalConfig(
            train_fraction=r["train_fraction"], n_iterations=r["iterations"],
            subset_sizes=subset_sizes, seed=r["seed"],
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"evaluation: {exc}") from None


def _load_audio_corpus(entries) -> Corpus:
    """Load (path, label) entries, reporting every failing file before raising."""
    clips = []
    classes: list = []
    failures = []
    for path, label in entries:
        try:
            clips.append(load_wav(path, label=label))
            if label not in classes:
                classes.append(label)
        except (AudioFormatError, UnsupportedFormatError, EmptyAudioError, OSError) as exc:
            failures.append(f"{path}: {exc}")
    if failures:
        for message in failures:
            print(f"error: {message}", file=sys.stderr)
        raise AudioFormatError(f"{len(failures)} file(s) failed to load")
    return Corpus(clips=clips, classes=classes)


def _load_sequences(args, r):
    """Turn whichever input source was given into FeatureSequences."""
    if getattr(args, "features", None) is not None:
        return read_features_csv(args.features)
    cfg = _frontend_config(r)
    if getattr(args, "data_dir", None) is not None:
        corpus = _load_audio_corpus(list_corpus_dir(args.data_dir))
    elif getattr(args, "manifest", None) is not None:
        corpus = _load_audio_corpus(read_manifest(args.manifest))
    elif getattr(args, "synthetic", False):
        corpus = build_synthetic_corpus(
            n_per_class=r["per_class"], sample_rate=r["sample_rate"],
            seed=r["seed"], duration=r["duration"],
        )
    else:
        raise UsageError("an input is required: --features, --data-dir, --manifest, or --synthetic")

    failures = []
    sequences = []
    for clip in corpus.clips:
        try:
            sequences.append(mfcc(clip, cfg))
        except TooShortError as exc:
            failures.append(str(exc))
    if failures:
        for message in failures:
            print(f"error: {message}", file=sys.stderr)
        raise TooShortError(f"{len(failures)} clip(s) shorter than one frame")
    return sequences


def _write_run_json(out_dir: Path, command: str, resolved: dict) -> None:
    doc = {"command": command, "config": {k: _jsonable(v) for k, v in resolved.items()}}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _jsonable(value):
    return str(value) if isinstance(value, Path) else value


def cmd_synth(args) -> int:
    r = _resolve(args)
    corpus = build_synthetic_corpus(
        n_per_class=r["per_class"], sample_rate=r["sample_rate"],
        seed=r["seed"], duration=r["duration"],
    )
    manifest = write_corpus(corpus, args.out)
    _write_run_json(args.out, "synth", r)
    print(f"wrote {len(corpus)} clips ({len(corpus.classes)} classes) and {manifest}")
    return EXIT_OK


def cmd_extract(args) -> int:
    r = _resolve(args)
    sequences = _load_sequences(args, r)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_features_csv(sequences, args.out)
    _write_run_json(args.out.parent, "extract", r)
    total = sum(len(s) for s in sequences)
    print(f"wrote {total} frames from {len(sequences)} clips to {args.out}")
    return EXIT_OK


def cmd_fratio(args) -> int:
    r = _resolve(args)
    sequences = _load_sequences(args, r)
    X, y = pool_frames(sequences)
    report = f_ratio(class_statistics(X, y))
    args.out.mkdir(parents=True, exist_ok=True)
    write_fratio_csv(report, args.out / "fratio.csv")
    _write_run_json(args.out, "fratio", r)

    k = r["top_k"] if r["top_k"] is not None else len(report.f)
    if not 1 <= k <= len(report.f):
        raise ConfigurationError(f"selection: top_k must be between 1 and {len(report.f)}")
    subset = select_top_k(report, k)
    ranking = " > ".join(f"c{i}" for i in report.ranking)
    print(f"ranking (descending F): {ranking}")
    print(f"top-{k} subset: " + ", ".join(f"c{i}" for i in subset.indices))
    return EXIT_OK


def cmd_train(args) -> int:
    r = _resolve(args)
    sequences = _load_sequences(args, r)
    train_cfg = _training_config(r)
    classes: list = []
    for seq in sequences:
        if seq.label is None:
            raise ValueError(f"clip {seq.clip_id!r} has no label; training needs labeled clips")
        if seq.label not in classes:
            classes.append(seq.label)
    models = [
        train([s for s in sequences if s.label == label], train_cfg, class_label=label)
        for label in classes
    ]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_models(args.out, models, train_cfg)
    _write_run_json(args.out.parent, "train", r)
    print(f"trained {len(models)} class models on {len(sequences)} clips -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    r = _resolve(args)
    sequences = _load_sequences(args, r)
    dim = sequences[0].dim
    eval_cfg = _eval_config(r, (dim,))
    train_cfg = _training_config(r)
    entry = evaluate(sequences, eval_cfg, train_cfg, jobs=r["jobs"])
    classes = entry.confusion.classes
    report = SweepReport(classes=classes, entries=[entry], n_iterations=eval_cfg.n_iterations)
    args.out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(report, args.out / "evaluation.csv")
    write_iterations_csv(report, args.out / "iterations.csv")
    write_confusion_csv(report, args.out / "confusion.csv")
    _write_run_json(args.out, "evaluate", r)
    print(f"mean accuracy over {eval_cfg.n_iterations} iterations: "
          f"{entry.mean_accuracy:.2f}% (std {entry.std_accuracy:.2f})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    r = _resolve(args)
    sequences = _load_sequences(args, r)
    subset_sizes = _parse_k_spec(r["k"])
    eval_cfg = _eval_config(r, subset_sizes)
    train_cfg = _training_config(r)
    report = sweep(sequences, eval_cfg, train_cfg,
                   fratio_scope=r["fratio_scope"], jobs=r["jobs"])

    X, y = pool_frames(sequences)
    overall = f_ratio(class_statistics(X, y))

    args.out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(report, args.out / "sweep.csv")
    write_iterations_csv(report, args.out / "iterations.csv")
    write_confusion_csv(report, args.out / "confusion.csv")
    write_fratio_csv(overall, args.out / "fratio.csv")
    _write_run_json(args.out, "sweep", r)
    for entry in report.entries:
        print(f"k={entry.k:2d}  mean accuracy {entry.mean_accuracy:6.2f}%  "
              f"std {entry.std_accuracy:5.2f}")
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "fratio": cmd_fratio,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigurationError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
