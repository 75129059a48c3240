"""Hold-out protocol: stratified splits, iteration mechanics, leak-freedom,
and determinism of the sweep."""

import numpy as np
import pytest

from vowelsel.errors import ConfigurationError, DegenerateClassError
from vowelsel.evaluation import (
    ConfusionMatrix,
    EvalConfig,
    SweepEntry,
    derive_rng,
    evaluate,
    run_iteration,
    stratified_split,
    sweep,
)
from vowelsel.features import FeatureSequence
from vowelsel.hmm import TrainingConfig
from vowelsel.selection import (
    CoefficientSubset,
    class_statistics,
    f_ratio,
    pool_frames,
    select_top_k,
)

FAST_TRAIN = TrainingConfig(n_states=2, n_mix=1, max_iters=4, seed=0)


def toy_sequences(n_per_class=4, dim=3, t=8, spread=0.3, seed=0):
    """Well-separated two-class sequences with per-clip ids."""
    rng = np.random.default_rng(seed)
    seqs = []
    for label, level in (("lo", -2.0), ("hi", 2.0)):
        for j in range(n_per_class):
            frames = level + spread * rng.standard_normal((t, dim))
            seqs.append(FeatureSequence(frames, label=label, clip_id=f"{label}_{j}"))
    return seqs


class TestStratifiedSplit:
    def test_80_20_on_25_clips(self):
        ids = [f"a{i}" for i in range(25)] + [f"b{i}" for i in range(25)]
        labels = ["a"] * 25 + ["b"] * 25
        split = stratified_split(ids, labels, 0.8, np.random.default_rng(0))
        assert len(split.train) == 40 and len(split.test) == 10
        for label in ("a", "b"):
            assert sum(i.startswith(label) for i in split.train) == 20
            assert sum(i.startswith(label) for i in split.test) == 5

    def test_two_clip_class_keeps_one_each_side(self):
        split = stratified_split(["x1", "x2"], ["x", "x"], 0.8, np.random.default_rng(0))
        assert len(split.train) == 1 and len(split.test) == 1

    def test_deterministic_given_rng_seed(self):
        ids = [f"c{i}" for i in range(10)]
        labels = ["a"] * 5 + ["b"] * 5
        first = stratified_split(ids, labels, 0.6, np.random.default_rng(3))
        second = stratified_split(ids, labels, 0.6, np.random.default_rng(3))
        assert first.train == second.train and first.test == second.test

    def test_disjoint_union(self):
        ids = [f"c{i}" for i in range(12)]
        labels = ["a"] * 6 + ["b"] * 6
        split = stratified_split(ids, labels, 0.5, np.random.default_rng(1))
        assert set(split.train) | set(split.test) == set(ids)
        assert not set(split.train) & set(split.test)

    def test_single_clip_class_rejected(self):
        with pytest.raises(DegenerateClassError):
            stratified_split(["a1", "b1", "b2"], ["a", "b", "b"], 0.8, np.random.default_rng(0))


class TestConfusionMatrix:
    def test_accuracy_is_trace_over_total(self):
        matrix = ConfusionMatrix.empty(["a", "b"])
        matrix.add("a", "a", 3)
        matrix.add("a", "b", 1)
        matrix.add("b", "b", 4)
        assert matrix.accuracy() == 100.0 * 7 / 8

    def test_constant_prediction_on_balanced_five_classes(self):
        classes = list("abcde")
        matrix = ConfusionMatrix.empty(classes)
        for actual in classes:
            matrix.add(actual, "a", 10)  # predictor always says "a"
        assert matrix.accuracy() == 20.0


class TestRunIteration:
    def test_separable_data_scores_100(self):
        seqs = toy_sequences()
        features = {s.clip_id: s for s in seqs}
        ids = list(features)
        split = stratified_split(
            ids, [features[i].label for i in ids], 0.5, np.random.default_rng(0)
        )
        subset = CoefficientSubset((1, 2, 3))
        accuracy, matrix = run_iteration(features, split, subset, FAST_TRAIN, ["lo", "hi"])
        assert accuracy == 100.0
        assert matrix.accuracy() == accuracy

    def test_confusion_totals_match_test_size(self):
        seqs = toy_sequences()
        features = {s.clip_id: s for s in seqs}
        ids = list(features)
        split = stratified_split(
            ids, [features[i].label for i in ids], 0.5, np.random.default_rng(0)
        )
        _, matrix = run_iteration(
            features, split, CoefficientSubset((1,)), FAST_TRAIN, ["lo", "hi"]
        )
        assert matrix.total == len(split.test)

    def test_projection_order_normalized(self):
        """A subset in ranking order scores identically to its sorted form."""
        seqs = toy_sequences()
        features = {s.clip_id: s for s in seqs}
        ids = list(features)
        split = stratified_split(
            ids, [features[i].label for i in ids], 0.5, np.random.default_rng(2)
        )
        acc_ranked, _ = run_iteration(
            features, split, CoefficientSubset((3, 1, 2)), FAST_TRAIN, ["lo", "hi"]
        )
        acc_sorted, _ = run_iteration(
            features, split, CoefficientSubset((1, 2, 3)), FAST_TRAIN, ["lo", "hi"]
        )
        assert acc_ranked == acc_sorted


class TestSweep:
    def _sequences(self):
        # three informative of five dims so selection has real work to do
        rng = np.random.default_rng(5)
        seqs = []
        for label, shift in (("lo", -1.5), ("hi", 1.5)):
            for j in range(4):
                frames = 0.4 * rng.standard_normal((8, 5))
                frames[:, :3] += shift
                seqs.append(FeatureSequence(frames, label=label, clip_id=f"{label}{j}"))
        return seqs

    def test_deterministic_given_seed(self):
        seqs = self._sequences()
        cfg = EvalConfig(n_iterations=3, subset_sizes=(2, 5), seed=4)
        a = sweep(seqs, cfg, FAST_TRAIN)
        b = sweep(seqs, cfg, FAST_TRAIN)
        for ea, eb in zip(a.entries, b.entries):
            assert np.array_equal(ea.accuracies, eb.accuracies)
            assert ea.subsets == eb.subsets
            assert np.array_equal(ea.confusion.counts, eb.confusion.counts)

    def test_mean_is_arithmetic_mean(self):
        seqs = self._sequences()
        report = sweep(seqs, EvalConfig(n_iterations=4, subset_sizes=(3,), seed=1), FAST_TRAIN)
        entry = report.entry(3)
        assert abs(entry.mean_accuracy - float(np.mean(entry.accuracies))) <= 1e-12

    def test_splits_vary_across_iterations(self):
        rngs = [derive_rng(0, i) for i in range(4)]
        ids = [f"c{i}" for i in range(10)]
        labels = ["a"] * 5 + ["b"] * 5
        splits = [stratified_split(ids, labels, 0.6, rng) for rng in rngs]
        assert len({tuple(sorted(s.train)) for s in splits}) > 1

    def test_no_test_set_leakage(self):
        """Recompute the training-portion ranking and compare to what the
        sweep recorded for each iteration."""
        seqs = self._sequences()
        features = {s.clip_id: s for s in seqs}
        cfg = EvalConfig(n_iterations=3, subset_sizes=(2,), seed=9)
        report = sweep(seqs, cfg, FAST_TRAIN, fratio_scope="train")
        entry = report.entry(2)
        classes = report.classes
        for iteration in range(cfg.n_iterations):
            rng = derive_rng(cfg.seed, iteration)
            ids = list(features)
            split = stratified_split(ids, [features[i].label for i in ids], 0.8, rng)
            X, y = pool_frames([features[i] for i in split.train])
            expected = select_top_k(f_ratio(class_statistics(X, y, classes=classes)), 2)
            assert entry.subsets[iteration] == expected

    def test_subset_prefix_property_within_iterations(self):
        seqs = self._sequences()
        cfg = EvalConfig(n_iterations=2, subset_sizes=(2, 4), seed=2)
        report = sweep(seqs, cfg, FAST_TRAIN)
        for iteration in range(cfg.n_iterations):
            small = report.entry(2).subsets[iteration].indices
            big = report.entry(4).subsets[iteration].indices
            assert big[:2] == small

    def test_jobs_do_not_change_results(self):
        seqs = self._sequences()
        cfg = EvalConfig(n_iterations=2, subset_sizes=(2, 5), seed=3)
        serial = sweep(seqs, cfg, FAST_TRAIN, jobs=1)
        parallel = sweep(seqs, cfg, FAST_TRAIN, jobs=2)
        for ea, eb in zip(serial.entries, parallel.entries):
            assert np.array_equal(ea.accuracies, eb.accuracies)
            assert ea.subsets == eb.subsets

    def test_k_above_dimension_rejected(self):
        seqs = self._sequences()
        with pytest.raises(ConfigurationError):
            sweep(seqs, EvalConfig(n_iterations=1, subset_sizes=(6,), seed=0), FAST_TRAIN)

    def test_fratio_scope_validated(self):
        seqs = self._sequences()
        with pytest.raises(ConfigurationError):
            sweep(seqs, EvalConfig(n_iterations=1, subset_sizes=(2,)), FAST_TRAIN,
                  fratio_scope="test")


class TestEvaluate:
    def test_equals_full_subset_sweep(self):
        """No-selection evaluation must reproduce the sweep's k = dim entry."""
        rng = np.random.default_rng(8)
        seqs = []
        for label, shift in (("lo", -1.5), ("hi", 1.5)):
            for j in range(4):
                frames = 0.5 * rng.standard_normal((8, 4)) + shift
                seqs.append(FeatureSequence(frames, label=label, clip_id=f"{label}{j}"))
        cfg = EvalConfig(n_iterations=3, subset_sizes=(4,), seed=6)
        swept = sweep(seqs, cfg, FAST_TRAIN).entry(4)
        plain = evaluate(seqs, cfg, FAST_TRAIN)
        assert np.array_equal(plain.accuracies, swept.accuracies)
        assert np.array_equal(plain.confusion.counts, swept.confusion.counts)


class TestEvalConfig:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            EvalConfig(train_fraction=1.0)
        with pytest.raises(ConfigurationError):
            EvalConfig(n_iterations=0)
        with pytest.raises(ConfigurationError):
            EvalConfig(subset_sizes=())
        with pytest.raises(ConfigurationError):
            EvalConfig(subset_sizes=(0,))


class TestSweepEntry:
    def test_std_is_population_std(self):
        entry = SweepEntry(
            k=3,
            accuracies=np.array([80.0, 90.0, 100.0]),
            confusion=ConfusionMatrix.empty(["a"]),
        )
        assert abs(entry.std_accuracy - float(np.std([80.0, 90.0, 100.0]))) <= 1e-12
