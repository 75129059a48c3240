"""Fisher's-ratio scoring, ranking, and top-k selection of coefficients.

Per coefficient, F is the variance of the class means around the pooled
mean divided by the unweighted average of the within-class (population)
variances. Higher F means better class separation along that coefficient.

Coefficient indices are 1-based at the public surface, matching the
c1..c12 column names used in feature CSVs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_feature_matrix, check_labels
from .errors import ConcentratedFeatureError, DegenerateClassError
from .features import FeatureSequence


@dataclass
class ClassStats:
    """Per-class first and second moments plus the pooled mean."""

    classes: list
    means: np.ndarray  # (n_classes, dim)
    variances: np.ndarray  # (n_classes, dim), population (divide by M_i)
    counts: np.ndarray  # (n_classes,)
    overall_mean: np.ndarray  # (dim,) pooled over all rows


@dataclass
class FRatioReport:
    """F values per coefficient and the descending ranking (1-based)."""

    f: np.ndarray
    ranking: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=np.float64)
        self.ranking = np.asarray(self.ranking, dtype=int)
        if sorted(self.ranking) != list(range(1, len(self.f) + 1)):
            raise ValueError("ranking must be a permutation of 1..dim")
        if np.any(self.f < 0) or not np.all(np.isfinite(self.f)):
            raise ValueError("F values must be finite and non-negative")

    def rank_of(self, coefficient: int) -> int:
        """1-based rank position of a 1-based coefficient (1 = highest F)."""
        return int(np.where(self.ranking == coefficient)[0][0]) + 1


@dataclass(frozen=True)
class CoefficientSubset:
    """An ordered selection of distinct 1-based coefficient indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("subset indices must be distinct")
        if any(i < 1 for i in self.indices):
            raise ValueError("subset indices are 1-based")

    @property
    def k(self) -> int:
        return len(self.indices)


def class_statistics(X, y, classes=None) -> ClassStats:
    """Per-class mean and population variance per coefficient.

    `classes` fixes the class order; defaults to sorted unique labels.
    Raises DegenerateClassError if any class has fewer than 2 rows.
    """
    X = check_feature_matrix(X)
    y = check_labels(y, X.shape[0])
    if classes is None:
        classes = sorted(set(y.tolist()))
    classes = list(classes)
    means = np.empty((len(classes), X.shape[1]))
    variances = np.empty_like(means)
    counts = np.empty(len(classes), dtype=int)
    for i, label in enumerate(classes):
        rows = X[y == label]
        if rows.shape[0] < 2:
            raise DegenerateClassError(
                f"class {label!r} has {rows.shape[0]} observations; at least 2 are required"
            )
        means[i] = rows.mean(axis=0)
        variances[i] = rows.var(axis=0)
        counts[i] = rows.shape[0]
    return ClassStats(
        classes=classes,
        means=means,
        variances=variances,
        counts=counts,
        overall_mean=X.mean(axis=0),
    )


def f_ratio(stats: ClassStats) -> FRatioReport:
    """Fisher's ratio per coefficient, ranked descending (ties: lower index first).

    Raises ConcentratedFeatureError when a coefficient's average
    within-class variance is zero, rather than reporting F = inf.
    """
    between = np.mean((stats.means - stats.overall_mean[None, :]) ** 2, axis=0)
    within = np.mean(stats.variances, axis=0)
    degenerate = within <= 0.0
    if np.any(degenerate):
        bad = [int(i) + 1 for i in np.nonzero(degenerate)[0]]
        raise ConcentratedFeatureError(
            f"coefficients {bad} have zero within-class variance in every class"
        )
    f = between / within
    ranking = np.argsort(-f, kind="stable") + 1  # stable sort breaks ties by index
    return FRatioReport(f=f, ranking=ranking)


def select_top_k(report: FRatioReport, k: int) -> CoefficientSubset:
    """First k entries of the ranking, in ranking order."""
    dim = len(report.f)
    if not 1 <= k <= dim:
        raise ValueError(f"k must be between 1 and {dim}, got {k}")
    return CoefficientSubset(indices=tuple(int(i) for i in report.ranking[:k]))


def project(seq: FeatureSequence, subset: CoefficientSubset) -> FeatureSequence:
    """Keep only the selected coefficients, in subset order."""
    dim = seq.dim
    if any(i > dim for i in subset.indices):
        raise ValueError(f"subset indices {subset.indices} exceed dimension {dim}")
    cols = np.asarray(subset.indices, dtype=int) - 1
    return FeatureSequence(frames=seq.frames[:, cols], label=seq.label, clip_id=seq.clip_id)


def pool_frames(sequences) -> tuple[np.ndarray, np.ndarray]:
    """Stack every frame of every sequence; one label per frame."""
    seqs = list(sequences)
    X = np.vstack([s.frames for s in seqs])
    y = np.concatenate([np.repeat(s.label, len(s)) for s in seqs])
    return X, y


def write_fratio_csv(report: FRatioReport, path) -> None:
    """Emit `coefficient,f_ratio,rank` rows, one per coefficient."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["coefficient", "f_ratio", "rank"])
        for d in range(1, len(report.f) + 1):
            writer.writerow([d, repr(float(report.f[d - 1])), report.rank_of(d)])


class FRatioSelector(BaseEstimator, TransformerMixin):
    """Select the k highest-F-ratio columns of a labeled feature matrix.

    Parameters
    ----------
    k : int or None
        Number of columns to keep; None keeps all (ranked).

    Attributes after fit: `f_ratios_`, `ranking_` (1-based), `subset_`.
    transform() returns the selected columns in ranking order.
    """

    def __init__(self, k=None):
        self.k = k

    def fit(self, X, y):
        X = check_feature_matrix(X)
        y = check_labels(y, X.shape[0])
        report = f_ratio(class_statistics(X, y))
        self.n_features_in_ = X.shape[1]
        self.f_ratios_ = report.f
        self.ranking_ = report.ranking
        k = self.n_features_in_ if self.k is None else self.k
        self.subset_ = select_top_k(report, k)
        return self

    def transform(self, X):
        X = check_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns; the selector was fit on {self.n_features_in_}"
            )
        return X[:, np.asarray(self.subset_.indices, dtype=int) - 1]
