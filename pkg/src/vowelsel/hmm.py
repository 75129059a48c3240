"""Per-class left-to-right GMM-HMMs.

Scoring marginalizes the hidden state sequence with the scaled forward
recursion (per-frame max shifts plus running scale factors make it exact
in the log domain with no underflow at any sequence length). Training is
expectation-maximization with multiple-sequence accumulation; sequences
of equal length are batched so the per-step recursions vectorize.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import check_sequences
from .errors import ConfigurationError, DegenerateDataError
from .features import FeatureSequence

_LOG_2PI = float(np.log(2.0 * np.pi))
_SUM_TOL = 1e-9


@dataclass
class GaussianComponent:
    """Diagonal-covariance Gaussian; log_norm caches the normalization term."""

    mean: np.ndarray
    variance: np.ndarray
    log_norm: float = field(init=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.variance = np.asarray(self.variance, dtype=np.float64)
        if self.mean.ndim != 1 or self.mean.shape != self.variance.shape:
            raise ValueError("mean and variance must be 1-d arrays of equal length")
        if np.any(self.variance <= 0):
            raise ValueError("variances must be strictly positive")
        self.log_norm = -0.5 * float(np.sum(_LOG_2PI + np.log(self.variance)))

    def log_pdf(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return self.log_norm - 0.5 * float(np.sum((x - self.mean) ** 2 / self.variance))


@dataclass
class GmmEmission:
    """Mixture of diagonal Gaussians; weights non-negative and normalized."""

    weights: np.ndarray
    components: list[GaussianComponent]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.weights) != len(self.components):
            raise ValueError("one weight per component is required")
        if np.any(self.weights < 0):
            raise ValueError("mixture weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"mixture weights sum to {self.weights.sum()}, expected 1")
        dims = {c.mean.size for c in self.components}
        if len(dims) != 1:
            raise ValueError("all components must share one dimension")

    @property
    def dim(self) -> int:
        return self.components[0].mean.size


@dataclass
class HmmModel:
    """Initial/transition probabilities plus one GMM emission per state."""

    class_label: object
    pi: np.ndarray
    trans: np.ndarray
    emissions: list[GmmEmission]
    dim: int
    log_likelihoods: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.float64)
        self.trans = np.asarray(self.trans, dtype=np.float64)
        q = self.pi.size
        if self.trans.shape != (q, q):
            raise ValueError(f"transition matrix must be {q}x{q}")
        if len(self.emissions) != q:
            raise ValueError("one emission per state is required")
        if abs(self.pi.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"pi sums to {self.pi.sum()}, expected 1")
        rows = self.trans.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > _SUM_TOL):
            raise ValueError("every transition row must sum to 1")
        if any(e.dim != self.dim for e in self.emissions):
            raise ValueError("emission dimension does not match model dim")
        self._refresh_packed()

    def _refresh_packed(self):
        # packed (n_states, n_mix, dim) views used by the scoring hot path
        n_mix = max(len(e.components) for e in self.emissions)
        q = self.pi.size
        means = np.zeros((q, n_mix, self.dim))
        variances = np.ones((q, n_mix, self.dim))
        weights = np.zeros((q, n_mix))
        for s, emission in enumerate(self.emissions):
            for m, comp in enumerate(emission.components):
                means[s, m] = comp.mean
                variances[s, m] = comp.variance
            weights[s, : len(emission.components)] = emission.weights
        self._means = means
        self._variances = variances
        with np.errstate(divide="ignore"):
            self._log_weights = np.log(weights)
        self._log_norms = -0.5 * np.sum(_LOG_2PI + np.log(variances), axis=2)

    @property
    def n_states(self) -> int:
        return self.pi.size


@dataclass(frozen=True)
class TrainingConfig:
    """EM settings. `seed` drives the k-means initialization only."""

    n_states: int = 3
    n_mix: int = 2
    max_iters: int = 20
    rel_tol: float = 1e-4
    variance_floor: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 1:
            raise ConfigurationError("n_states must be at least 1")
        if self.n_mix < 1:
            raise ConfigurationError("n_mix must be at least 1")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")
        if self.rel_tol <= 0:
            raise ConfigurationError("rel_tol must be positive")
        if self.variance_floor <= 0:
            raise ConfigurationError("variance_floor must be positive")


def gmm_log_pdf(emission: GmmEmission, x) -> float:
    """Log density of one point under the mixture, via log-sum-exp."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (emission.dim,):
        raise ValueError(f"x has shape {x.shape}; expected ({emission.dim},)")
    with np.errstate(divide="ignore"):
        logs = np.log(emission.weights) + np.array(
            [c.log_pdf(x) for c in emission.components]
        )
    peak = np.max(logs)
    return float(peak + np.log(np.sum(np.exp(logs - peak))))


def _component_log_density(flat, means, variances, log_norms):
    """Log N(x; mu, diag var) for every (state, mixture) pair.

    flat: (n, dim); means/variances: (q, m, dim). Returns (n, q, m).
    Expanded as x^2/v - 2xm/v + m^2/v so it runs as three matmuls.
    """
    q, m, dim = means.shape
    inv = (1.0 / variances).reshape(q * m, dim)
    mu = means.reshape(q * m, dim)
    quad = (flat**2) @ inv.T - 2.0 * (flat @ (mu * inv).T) + np.sum(mu * mu * inv, axis=1)
    return (log_norms.reshape(q * m) - 0.5 * quad).reshape(len(flat), q, m)


def _emission_scores(flat, model_arrays):
    """Per-frame log emission densities and per-component responsibilities."""
    means, variances, log_weights, log_norms = model_arrays
    comp = _component_log_density(flat, means, variances, log_norms)
    weighted = comp + log_weights[None]
    peak = weighted.max(axis=2, keepdims=True)
    log_b = peak[..., 0] + np.log(np.sum(np.exp(weighted - peak), axis=2))
    comp_resp = np.exp(weighted - log_b[..., None])
    return log_b, comp_resp


def _frames_of(seq) -> np.ndarray:
    if isinstance(seq, FeatureSequence):
        return seq.frames
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("sequence must be a non-empty (n_frames, dim) array")
    return arr


def forward_log_likelihood(model: HmmModel, seq) -> float:
    """Exact marginal log P(sequence | model) over all state paths."""
    x = _frames_of(seq)
    if x.shape[1] != model.dim:
        raise ValueError(f"sequence dimension {x.shape[1]} != model dimension {model.dim}")
    arrays = (model._means, model._variances, model._log_weights, model._log_norms)
    log_b, _ = _emission_scores(x, arrays)
    shift = log_b.max(axis=1)
    b_scaled = np.exp(log_b - shift[:, None])
    alpha = model.pi * b_scaled[0]
    total = float(shift.sum())
    s = alpha.sum()
    if s == 0.0:
        return -np.inf
    total += np.log(s)
    alpha /= s
    for t in range(1, x.shape[0]):
        alpha = (alpha @ model.trans) * b_scaled[t]
        s = alpha.sum()
        if s == 0.0:
            return -np.inf
        total += np.log(s)
        alpha /= s
    return total


def classify(models: list[HmmModel], seq):
    """Predict the class whose model gives the highest log-likelihood.

    Returns (predicted_label, {label: log_likelihood}). Ties break toward
    the earlier model in the list.
    """
    if not models:
        raise ValueError("at least one model is required")
    x = _frames_of(seq)
    dims = {m.dim for m in models}
    if len(dims) != 1 or x.shape[1] != dims.pop():
        raise ValueError("all models and the sequence must share one dimension")
    scores = [forward_log_likelihood(m, x) for m in models]
    best = int(np.argmax(scores))
    table = {m.class_label: ll for m, ll in zip(models, scores)}
    return models[best].class_label, table


class _Accumulators:
    def __init__(self, q, m, dim):
        self.pi = np.zeros(q)
        self.trans = np.zeros((q, q))
        self.occ = np.zeros(q)
        self.occ_m = np.zeros((q, m))
        self.sum_x = np.zeros((q, m, dim))
        self.sum_x2 = np.zeros((q, m, dim))


def _accumulate_batch(batch, pi, trans, model_arrays, acc):
    """Scaled forward-backward over a (n_seqs, T, dim) batch.

    Adds this batch's expected sufficient statistics to `acc` and returns
    its total log-likelihood.
    """
    r, t, dim = batch.shape
    q, m = acc.occ_m.shape
    flat = batch.reshape(-1, dim)
    log_b, comp_resp = _emission_scores(flat, model_arrays)
    log_b = log_b.reshape(r, t, q)
    comp_resp = comp_resp.reshape(r, t, q, m)

    shift = log_b.max(axis=2)
    b_scaled = np.exp(log_b - shift[..., None])

    alpha = np.empty((r, t, q))
    scale = np.empty((r, t))
    a = pi[None, :] * b_scaled[:, 0]
    s = np.maximum(a.sum(axis=1), 1e-300)  # keep EM finite on hopeless frames
    scale[:, 0] = s
    alpha[:, 0] = a / s[:, None]
    for ti in range(1, t):
        a = (alpha[:, ti - 1] @ trans) * b_scaled[:, ti]
        s = np.maximum(a.sum(axis=1), 1e-300)
        scale[:, ti] = s
        alpha[:, ti] = a / s[:, None]

    beta = np.empty((r, t, q))
    beta[:, t - 1] = 1.0
    for ti in range(t - 2, -1, -1):
        u = b_scaled[:, ti + 1] * beta[:, ti + 1]
        beta[:, ti] = (u @ trans.T) / scale[:, ti + 1][:, None]

    gamma = alpha * beta
    acc.pi += gamma[:, 0].sum(axis=0)
    if t > 1:
        u = b_scaled[:, 1:] * beta[:, 1:] / scale[:, 1:, None]
        acc.trans += trans * (alpha[:, :-1].reshape(-1, q).T @ u.reshape(-1, q))
    weighted_resp = gamma[..., None] * comp_resp
    acc.occ += gamma.sum(axis=(0, 1))
    acc.occ_m += weighted_resp.sum(axis=(0, 1))
    resp_flat = weighted_resp.reshape(-1, q * m)
    acc.sum_x += (resp_flat.T @ flat).reshape(q, m, dim)
    acc.sum_x2 += (resp_flat.T @ (flat * flat)).reshape(q, m, dim)
    return float(np.log(scale).sum() + shift.sum())


def _kmeans_diag(data, n_clusters, variance_floor, rng, n_iters=20):
    """Small deterministic Lloyd's k-means with diagonal scatter per cluster.

    Empty clusters steal the point farthest from its assigned centroid.
    Returns (means, variances, weights).
    """
    n, dim = data.shape
    if n_clusters == 1:
        mean = data.mean(axis=0, keepdims=True)
        var = np.maximum(data.var(axis=0, keepdims=True), variance_floor)
        return mean, var, np.ones(1)

    idx = rng.choice(n, size=n_clusters, replace=n < n_clusters)
    centers = data[idx].copy()
    assign = np.zeros(n, dtype=int)
    for _ in range(n_iters):
        d2 = ((data[:, None, :] - centers[None]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for c in range(n_clusters):
            if not np.any(assign == c):
                victim = int(d2[np.arange(n), assign].argmax())
                assign[victim] = c
        new_centers = centers.copy()
        for c in range(n_clusters):
            members = data[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        if np.allclose(new_centers, centers):
            centers = new_centers
            break
        centers = new_centers

    variances = np.full((n_clusters, dim), variance_floor)
    weights = np.zeros(n_clusters)
    for c in range(n_clusters):
        members = data[assign == c]
        weights[c] = len(members) / n
        if len(members):
            variances[c] = np.maximum(members.var(axis=0), variance_floor)
    return centers, variances, weights


def _segment_init(seqs, cfg, rng):
    """Seed per-state mixtures from uniform temporal segmentation.

    Each sequence's frames are split into n_states contiguous blocks;
    pooled block data is clustered into n_mix components per state.
    """
    q, m = cfg.n_states, cfg.n_mix
    dim = seqs[0].shape[1]
    means = np.zeros((q, m, dim))
    variances = np.ones((q, m, dim))
    weights = np.zeros((q, m))
    for state in range(q):
        blocks = []
        for s in seqs:
            t = s.shape[0]
            lo = (state * t) // q
            hi = ((state + 1) * t) // q
            blocks.append(s[lo:hi])
        data = np.vstack(blocks)
        means[state], variances[state], weights[state] = _kmeans_diag(
            data, m, cfg.variance_floor, rng
        )
    return means, variances, weights


def _build_model(class_label, pi, trans, means, variances, weights, history):
    emissions = []
    for state in range(pi.size):
        components = [
            GaussianComponent(mean=means[state, m].copy(), variance=variances[state, m].copy())
            for m in range(weights.shape[1])
        ]
        emissions.append(GmmEmission(weights=weights[state].copy(), components=components))
    return HmmModel(
        class_label=class_label,
        pi=pi.copy(),
        trans=trans.copy(),
        emissions=emissions,
        dim=means.shape[2],
        log_likelihoods=list(history),
    )


def train(sequences, config: TrainingConfig | None = None, class_label=None, observer=None) -> HmmModel:
    """Fit one left-to-right model to a single class's sequences by EM.

    Initialization: pi = (1, 0, ...); transitions self/next at 0.5 (last
    state absorbing); emissions seeded by per-state segmentation k-means.
    EM stops when the relative total log-likelihood improvement drops
    below `rel_tol` or after `max_iters` iterations; per-iteration totals
    are recorded on the returned model's `log_likelihoods`.

    `observer(iteration, total_log_likelihood, model_snapshot)` is invoked
    after every iteration's parameter update, for convergence tracing.
    """
    if config is None:
        config = TrainingConfig()
    if class_label is None:
        labels = {s.label for s in sequences if isinstance(s, FeatureSequence)} - {None}
        if len(labels) > 1:
            raise ValueError(f"sequences carry multiple labels {sorted(map(str, labels))}")
        class_label = labels.pop() if labels else None
    seqs = check_sequences(
        [s.frames if isinstance(s, FeatureSequence) else s for s in sequences]
    )
    q, m = config.n_states, config.n_mix
    for i, s in enumerate(seqs):
        if s.shape[0] < q:
            raise ValueError(
                f"sequence {i} has {s.shape[0]} frames; at least n_states ({q}) are required"
            )
    pooled = np.vstack(seqs)
    if (q > 1 or m > 1) and np.all(pooled.max(axis=0) == pooled.min(axis=0)):
        raise DegenerateDataError(
            "all observations are identical; cannot estimate a multi-state or "
            "multi-component model"
        )

    rng = np.random.default_rng(config.seed)
    means, variances, weights = _segment_init(seqs, config, rng)
    pi = np.zeros(q)
    pi[0] = 1.0
    trans = np.zeros((q, q))
    for s in range(q - 1):
        trans[s, s] = 0.5
        trans[s, s + 1] = 0.5
    trans[q - 1, q - 1] = 1.0

    groups: dict[int, list[np.ndarray]] = {}
    for s in seqs:
        groups.setdefault(s.shape[0], []).append(s)
    batches = [np.stack(group) for group in groups.values()]

    dim = pooled.shape[1]
    history: list[float] = []
    prev_ll = None
    for iteration in range(config.max_iters):
        with np.errstate(divide="ignore"):
            log_weights = np.log(weights)
        log_norms = -0.5 * np.sum(_LOG_2PI + np.log(variances), axis=2)
        arrays = (means, variances, log_weights, log_norms)
        acc = _Accumulators(q, m, dim)
        total_ll = 0.0
        for batch in batches:
            total_ll += _accumulate_batch(batch, pi, trans, arrays, acc)

        pi = acc.pi / acc.pi.sum()
        new_trans = trans.copy()
        row_sums = acc.trans.sum(axis=1)
        visited = row_sums > 0
        new_trans[visited] = acc.trans[visited] / row_sums[visited, None]
        trans = new_trans
        occupied = acc.occ > 0
        weights = weights.copy()
        weights[occupied] = acc.occ_m[occupied] / acc.occ[occupied, None]
        live = acc.occ_m > 1e-12
        denom = np.maximum(acc.occ_m, 1e-300)[..., None]
        means = np.where(live[..., None], acc.sum_x / denom, means)
        variances = np.where(live[..., None], acc.sum_x2 / denom - means**2, variances)
        variances = np.maximum(variances, config.variance_floor)

        history.append(total_ll)
        if observer is not None:
            observer(
                iteration,
                total_ll,
                _build_model(class_label, pi, trans, means, variances, weights, history),
            )
        if prev_ll is not None and (total_ll - prev_ll) < config.rel_tol * abs(prev_ll):
            break
        prev_ll = total_ll

    return _build_model(class_label, pi, trans, means, variances, weights, history)


def save_models(path, models: list[HmmModel], config: TrainingConfig | None = None) -> None:
    """Serialize a model set as JSON; floats survive the round trip exactly."""
    doc = {
        "config": asdict(config) if config is not None else None,
        "classes": [
            {
                "label": model.class_label,
                "pi": model.pi.tolist(),
                "trans": model.trans.tolist(),
                "emissions": [
                    {
                        "weights": emission.weights.tolist(),
                        "means": [c.mean.tolist() for c in emission.components],
                        "variances": [c.variance.tolist() for c in emission.components],
                    }
                    for emission in model.emissions
                ],
            }
            for model in models
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def load_models(path) -> tuple[list[HmmModel], TrainingConfig | None]:
    doc = json.loads(Path(path).read_text())
    config = TrainingConfig(**doc["config"]) if doc.get("config") else None
    models = []
    for entry in doc["classes"]:
        emissions = []
        for em in entry["emissions"]:
            components = [
                GaussianComponent(mean=mean, variance=variance)
                for mean, variance in zip(em["means"], em["variances"])
            ]
            emissions.append(GmmEmission(weights=em["weights"], components=components))
        models.append(
            HmmModel(
                class_label=entry["label"],
                pi=entry["pi"],
                trans=entry["trans"],
                emissions=emissions,
                dim=emissions[0].dim,
            )
        )
    return models, config


class GmmHmmClassifier(BaseEstimator, ClassifierMixin):
    """One left-to-right GMM-HMM per class; prediction is max likelihood.

    X is a list of (n_frames, dim) arrays or FeatureSequences, y one label
    per sequence. Class models are fit independently on their own
    sequences, exactly as the evaluation protocol trains them.
    """

    def __init__(self, n_states=3, n_mix=2, max_iters=20, rel_tol=1e-4,
                 variance_floor=1e-4, seed=0):
        self.n_states = n_states
        self.n_mix = n_mix
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.variance_floor = variance_floor
        self.seed = seed

    def _config(self) -> TrainingConfig:
        return TrainingConfig(
            n_states=self.n_states,
            n_mix=self.n_mix,
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            variance_floor=self.variance_floor,
            seed=self.seed,
        )

    def fit(self, X, y):
        config = self._config()
        seqs = [_frames_of(s) for s in X]
        y = np.asarray(y)
        if y.shape != (len(seqs),):
            raise ValueError("y must hold one label per sequence")
        self.classes_ = np.unique(y)
        self.models_ = [
            train([s for s, label in zip(seqs, y) if label == cls], config, class_label=cls)
            for cls in self.classes_
        ]
        return self

    def predict(self, X):
        return np.asarray([classify(self.models_, seq)[0] for seq in X])

    def log_likelihood_table(self, X) -> np.ndarray:
        """(n_sequences, n_classes) forward log-likelihoods, class order = classes_."""
        return np.asarray(
            [[forward_log_likelihood(m, _frames_of(seq)) for m in self.models_] for seq in X]
        )
