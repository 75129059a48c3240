"""Repeated hold-out evaluation and the accuracy-vs-subset-size sweep.

Each iteration draws a fresh stratified split, ranks coefficients by
Fisher's ratio on the training portion only (unless told otherwise),
trains one model per class, and scores the held-out clips; accuracies
are averaged over iterations per subset size.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateClassError
from .hmm import TrainingConfig, classify, train
from .selection import (
    CoefficientSubset,
    FRatioReport,
    class_statistics,
    f_ratio,
    pool_frames,
    project,
    select_top_k,
)


@dataclass
class EvalConfig:
    """Hold-out protocol settings.

    `subset_sizes` lists the k values swept; `seed` is the master seed
    from which per-iteration streams are derived by counter.
    """

    train_fraction: float = 0.8
    n_iterations: int = 50
    subset_sizes: tuple[int, ...] = tuple(range(3, 13))
    seed: int = 0

    def __post_init__(self):
        self.subset_sizes = tuple(int(k) for k in self.subset_sizes)
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError("train_fraction must be strictly between 0 and 1")
        if self.n_iterations < 1:
            raise ConfigurationError("n_iterations must be at least 1")
        if not self.subset_sizes or any(k < 1 for k in self.subset_sizes):
            raise ConfigurationError("subset_sizes must be a non-empty list of k >= 1")


@dataclass
class Split:
    """Disjoint train/test clip ids; every class present on both sides."""

    train: list[str]
    test: list[str]


@dataclass
class ConfusionMatrix:
    """Integer counts, rows = actual class, columns = predicted class."""

    classes: list
    counts: np.ndarray

    @classmethod
    def empty(cls, classes) -> "ConfusionMatrix":
        classes = list(classes)
        return cls(classes=classes, counts=np.zeros((len(classes), len(classes)), dtype=int))

    def add(self, actual, predicted, count: int = 1) -> None:
        self.counts[self.classes.index(actual), self.classes.index(predicted)] += count

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        """Percentage of diagonal mass: 100 * trace / total."""
        return 100.0 * float(np.trace(self.counts)) / self.total


@dataclass
class SweepEntry:
    """Results for one subset size across all iterations."""

    k: int
    accuracies: np.ndarray  # (n_iterations,) percentages
    confusion: ConfusionMatrix  # aggregated over iterations
    subsets: list[CoefficientSubset] = field(default_factory=list)  # per iteration

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies))


@dataclass
class SweepReport:
    """Per-k aggregates of the repeated hold-out protocol."""

    classes: list
    entries: list[SweepEntry]
    n_iterations: int

    def entry(self, k: int) -> SweepEntry:
        for e in self.entries:
            if e.k == k:
                return e
        raise KeyError(f"no entry for k={k}")


def derive_rng(seed: int, *counters: int) -> np.random.Generator:
    """Deterministic child stream: master seed extended by counters."""
    return np.random.default_rng([int(seed), *map(int, counters)])


def stratified_split(clip_ids, labels, train_fraction: float, rng) -> Split:
    """Random per-class split: round(train_fraction * count) clips to train,
    with at least one clip on each side."""
    clip_ids = list(clip_ids)
    labels = list(labels)
    by_class: dict = {}
    for cid, label in zip(clip_ids, labels):
        by_class.setdefault(label, []).append(cid)
    train_ids: list = []
    test_ids: list = []
    for label, ids in by_class.items():
        if len(ids) < 2:
            raise DegenerateClassError(
                f"class {label!r} has {len(ids)} clips; splitting needs at least 2"
            )
        n_train = int(round(train_fraction * len(ids)))
        n_train = min(max(n_train, 1), len(ids) - 1)
        order = rng.permutation(len(ids))
        train_ids.extend(ids[i] for i in order[:n_train])
        test_ids.extend(ids[i] for i in order[n_train:])
    return Split(train=train_ids, test=test_ids)


def run_iteration(
    features: dict,
    split: Split,
    subset: CoefficientSubset,
    train_cfg: TrainingConfig,
    classes,
) -> tuple[float, ConfusionMatrix]:
    """Train one model per class on the training clips and score the rest.

    The projection is normalized to ascending coefficient order (it names
    a set of coefficients here, not an ordering), so selecting the full
    set reproduces the unselected pipeline exactly.
    """
    ordered = CoefficientSubset(tuple(sorted(subset.indices)))
    classes = list(classes)
    per_class: dict = {c: [] for c in classes}
    for cid in split.train:
        seq = features[cid]
        per_class[seq.label].append(project(seq, ordered))
    models = [train(per_class[c], train_cfg, class_label=c) for c in classes]

    matrix = ConfusionMatrix.empty(classes)
    correct = 0
    for cid in split.test:
        seq = features[cid]
        predicted, _ = classify(models, project(seq, ordered))
        matrix.add(seq.label, predicted)
        correct += predicted == seq.label
    accuracy = 100.0 * correct / len(split.test)
    return accuracy, matrix


def _feature_map(sequences) -> tuple[dict, list]:
    features: dict = {}
    classes: list = []
    for seq in sequences:
        if seq.clip_id is None or seq.label is None:
            raise ValueError("every sequence needs a clip_id and a label")
        if seq.clip_id in features:
            raise ValueError(f"duplicate clip_id {seq.clip_id!r}")
        features[seq.clip_id] = seq
        if seq.label not in classes:
            classes.append(seq.label)
    return features, classes


def _train_scope_report(features: dict, clip_ids, classes) -> FRatioReport:
    X, y = pool_frames([features[cid] for cid in clip_ids])
    return f_ratio(class_statistics(X, y, classes=classes))


def _sweep_iteration(args):
    features, classes, eval_cfg, train_cfg, fratio_scope, iteration = args
    rng = derive_rng(eval_cfg.seed, iteration)
    ids = list(features)
    split = stratified_split(ids, [features[c].label for c in ids], eval_cfg.train_fraction, rng)
    if fratio_scope is None:  # no selection: score the full coefficient set
        dim = next(iter(features.values())).dim
        subsets = [CoefficientSubset(tuple(range(1, dim + 1)))] * len(eval_cfg.subset_sizes)
    else:
        scope_ids = split.train if fratio_scope == "train" else ids
        report = _train_scope_report(features, scope_ids, classes)
        subsets = [select_top_k(report, k) for k in eval_cfg.subset_sizes]
    results = []
    for k, subset in zip(eval_cfg.subset_sizes, subsets):
        accuracy, matrix = run_iteration(features, split, subset, train_cfg, classes)
        results.append((k, accuracy, matrix.counts, subset))
    return results


def _run_iterations(work, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            yield from pool.map(_sweep_iteration, work)
    else:
        for args in work:
            yield _sweep_iteration(args)


def _collect(sequences, eval_cfg, train_cfg, fratio_scope, jobs) -> SweepReport:
    features, classes = _feature_map(sequences)
    dim = next(iter(features.values())).dim
    if any(k > dim for k in eval_cfg.subset_sizes):
        raise ConfigurationError(f"subset_sizes may not exceed the feature dimension {dim}")

    entries = {
        k: SweepEntry(
            k=k,
            accuracies=np.zeros(eval_cfg.n_iterations),
            confusion=ConfusionMatrix.empty(classes),
        )
        for k in eval_cfg.subset_sizes
    }
    work = [
        (features, classes, eval_cfg, train_cfg, fratio_scope, iteration)
        for iteration in range(eval_cfg.n_iterations)
    ]
    for iteration, results in enumerate(_run_iterations(work, jobs)):
        for k, accuracy, counts, subset in results:
            entry = entries[k]
            entry.accuracies[iteration] = accuracy
            entry.confusion.counts += counts
            entry.subsets.append(subset)
    return SweepReport(
        classes=classes,
        entries=[entries[k] for k in eval_cfg.subset_sizes],
        n_iterations=eval_cfg.n_iterations,
    )


def sweep(
    sequences,
    eval_cfg: EvalConfig | None = None,
    train_cfg: TrainingConfig | None = None,
    fratio_scope: str = "train",
    jobs: int = 1,
) -> SweepReport:
    """Run the full subset-size sweep over repeated hold-out iterations.

    `fratio_scope` controls which clips feed the per-iteration ranking:
    "train" (leak-free, default) or "all" (rank once on everything).
    Deterministic for a fixed master seed regardless of `jobs`.
    """
    eval_cfg = eval_cfg or EvalConfig()
    train_cfg = train_cfg or TrainingConfig()
    if fratio_scope not in ("train", "all"):
        raise ConfigurationError("fratio_scope must be 'train' or 'all'")
    return _collect(sequences, eval_cfg, train_cfg, fratio_scope, jobs)


def evaluate(
    sequences,
    eval_cfg: EvalConfig | None = None,
    train_cfg: TrainingConfig | None = None,
    jobs: int = 1,
) -> SweepEntry:
    """Hold-out accuracy with the full coefficient set (no selection).

    Consumes the same per-iteration split streams as `sweep`, so with the
    same seed its accuracies equal a sweep's k = dim entry.
    """
    eval_cfg = eval_cfg or EvalConfig()
    train_cfg = train_cfg or TrainingConfig()
    features, _ = _feature_map(sequences)
    dim = next(iter(features.values())).dim
    full_cfg = EvalConfig(
        train_fraction=eval_cfg.train_fraction,
        n_iterations=eval_cfg.n_iterations,
        subset_sizes=(dim,),
        seed=eval_cfg.seed,
    )
    return _collect(sequences, full_cfg, train_cfg, None, jobs).entry(dim)


def write_sweep_csv(report: SweepReport, path) -> None:
    """Summary rows `k,mean_accuracy,std_accuracy,n_iterations`."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "mean_accuracy", "std_accuracy", "n_iterations"])
        for entry in report.entries:
            writer.writerow(
                [entry.k, repr(entry.mean_accuracy), repr(entry.std_accuracy), report.n_iterations]
            )


def write_iterations_csv(report: SweepReport, path) -> None:
    """Per-iteration detail: `iteration,k,accuracy,selected` (ranking order)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "k", "accuracy", "selected"])
        for entry in report.entries:
            for iteration, accuracy in enumerate(entry.accuracies):
                selected = " ".join(str(i) for i in entry.subsets[iteration].indices)
                writer.writerow([iteration, entry.k, repr(float(accuracy)), selected])


def write_confusion_csv(report: SweepReport, path) -> None:
    """Aggregated confusion counts in long form: `k,actual,predicted,count`."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "actual", "predicted", "count"])
        for entry in report.entries:
            for i, actual in enumerate(report.classes):
                for j, predicted in enumerate(report.classes):
                    writer.writerow([entry.k, actual, predicted, int(entry.confusion.counts[i, j])])
