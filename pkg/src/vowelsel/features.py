"""MFCC front end: framing, windowing, power spectrum, mel filterbank, cepstra.

Per frame the pipeline is window -> one-sided power spectrum -> triangular
mel filterbank energies S_k -> C_i = sum_k log(S_k) cos(i*pi/K*(k - 1/2))
for i = 1..L (natural log, no c0 term, no liftering or pre-emphasis).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .audio import AudioClip
from .errors import ConfigurationError, TooShortError

WINDOWS = ("hamming", "hann", "rectangular")


@dataclass
class FrontendConfig:
    """Front-end parameters.

    Defaults give 30 ms frames with 50% overlap, 26 mel filters spanning
    0 Hz to Nyquist, and 12 cepstral coefficients. `log_floor` guards
    log(0) on silent frames; `fft_pad` zero-pads each frame to the next
    power of two (the power-spectrum divisor stays the frame length).
    """

    frame_ms: float = 30.0
    hop_ms: float = 15.0
    n_filters: int = 26
    n_ceps: int = 12
    window: str = "hamming"
    log_floor: float = 1e-10
    fft_pad: bool = True

    def __post_init__(self):
        if not 0 < self.hop_ms <= self.frame_ms:
            raise ConfigurationError("hop_ms must be positive and no larger than frame_ms")
        if not 1 <= self.n_ceps <= self.n_filters - 1:
            raise ConfigurationError("n_ceps must be between 1 and n_filters - 1")
        if self.log_floor <= 0:
            raise ConfigurationError("log_floor must be positive")
        if self.window not in WINDOWS:
            raise ConfigurationError(f"window must be one of {WINDOWS}")

    def frame_length(self, sample_rate: int) -> int:
        return int(round(self.frame_ms * sample_rate / 1000.0))

    def hop_length(self, sample_rate: int) -> int:
        return int(round(self.hop_ms * sample_rate / 1000.0))


@dataclass
class PowerSpectrum:
    """One-sided power spectrum: bins m = 0..floor(Nfft/2), all >= 0."""

    bins: np.ndarray
    bin_hz: float


@dataclass
class MelFilterBank:
    """Triangular filters over power-spectrum bins, peaks exactly 1,
    ordered by ascending center frequency."""

    weights: np.ndarray  # (n_filters, n_bins)
    edge_hz: tuple[float, float]


@dataclass
class FeatureSequence:
    """Per-frame cepstral vectors for one clip."""

    frames: np.ndarray  # (n_frames, n_ceps)
    label: str | None = None
    clip_id: str | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] == 0:
            raise ValueError("frames must be a non-empty 2-d array")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("feature frames contain non-finite values")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def frame_signal(clip: AudioClip, cfg: FrontendConfig) -> np.ndarray:
    """Chop a clip into (n_frames, frame_length) hop-spaced frames.

    The trailing partial chunk is dropped; frame count is
    floor((len - N)/hop) + 1. Raises TooShortError below one frame.
    """
    n = cfg.frame_length(clip.sample_rate)
    hop = cfg.hop_length(clip.sample_rate)
    x = clip.samples
    if x.size < n:
        raise TooShortError(f"clip has {x.size} samples; one {n}-sample frame is required")
    count = (x.size - n) // hop + 1
    idx = hop * np.arange(count)[:, None] + np.arange(n)[None, :]
    return x[idx]


def window_function(name: str, n: int) -> np.ndarray:
    if name == "rectangular":
        return np.ones(n)
    if name == "hamming":
        return np.hamming(n)
    if name == "hann":
        return np.hanning(n)
    raise ConfigurationError(f"window must be one of {WINDOWS}")


def apply_window(frame: np.ndarray, window: str) -> np.ndarray:
    """Multiply a frame by the named window (rectangular is the identity)."""
    frame = np.asarray(frame, dtype=np.float64)
    return frame * window_function(window, frame.size)


def fft_size(n: int, pad: bool) -> int:
    if not pad:
        return n
    nfft = 1
    while nfft < n:
        nfft *= 2
    return nfft


def power_spectrum(frame: np.ndarray, cfg: FrontendConfig, sample_rate: int) -> PowerSpectrum:
    """One-sided power spectrum P[m] = |X[m]|^2 / N of a (windowed) frame.

    N is the frame length even when the transform is zero-padded.
    """
    frame = np.asarray(frame, dtype=np.float64)
    n = frame.size
    nfft = fft_size(n, cfg.fft_pad)
    spectrum = np.fft.rfft(frame, nfft)
    bins = (spectrum.real**2 + spectrum.imag**2) / n
    return PowerSpectrum(bins=bins, bin_hz=sample_rate / nfft)


def hz_to_mel(freq):
    """Perceptual mel value of a frequency in Hz: 2595 log10(1 + f/700)."""
    freq = np.asarray(freq, dtype=np.float64)
    if np.any(freq < 0):
        raise ValueError("frequency must be non-negative")
    return 2595.0 * np.log10(1.0 + freq / 700.0)


def mel_to_hz(mel):
    """Exact inverse of hz_to_mel: 700 (10^(m/2595) - 1)."""
    mel = np.asarray(mel, dtype=np.float64)
    if np.any(mel < 0):
        raise ValueError("mel value must be non-negative")
    return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)


def build_filterbank(cfg: FrontendConfig, sample_rate: int, nfft: int) -> MelFilterBank:
    """Triangular filters spaced uniformly on the mel scale, 0 Hz to Nyquist.

    The K+2 edge frequencies are equally spaced in mel, converted back to
    Hz, and snapped to DFT bins; filter k rises from edge k to a unit peak
    at edge k+1 and falls to edge k+2.
    """
    if cfg.n_filters < 2:
        raise ConfigurationError("at least 2 mel filters are required")
    n_bins = nfft // 2 + 1
    low_hz, high_hz = 0.0, sample_rate / 2.0
    mel_edges = np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), cfg.n_filters + 2)
    hz_edges = mel_to_hz(mel_edges)
    bin_edges = np.floor((nfft + 1) * hz_edges / sample_rate).astype(int)
    if np.any(np.diff(bin_edges) < 1):
        raise ConfigurationError(
            f"{cfg.n_filters} filters over {n_bins} bins snap onto duplicate edges; "
            "reduce n_filters or raise the FFT size"
        )
    weights = np.zeros((cfg.n_filters, n_bins))
    for k in range(cfg.n_filters):
        left, center, right = bin_edges[k], bin_edges[k + 1], bin_edges[k + 2]
        for b in range(left, center):
            weights[k, b] = (b - left) / (center - left)
        for b in range(center, right):
            weights[k, b] = (right - b) / (right - center)
    return MelFilterBank(weights=weights, edge_hz=(low_hz, high_hz))


def dct_matrix(n_ceps: int, n_filters: int) -> np.ndarray:
    """Rows i = 1..n_ceps of the cosine basis over filter channels.

    No i = 0 row and no orthonormalization; every row sums to zero, which
    makes the cepstra invariant to constant log-energy offsets (gain).
    """
    i = np.arange(1, n_ceps + 1)[:, None]
    k = np.arange(1, n_filters + 1)[None, :]
    return np.cos(i * np.pi / n_filters * (k - 0.5))


def filterbank_energies(power_bins: np.ndarray, fbank: MelFilterBank) -> np.ndarray:
    """Per-filter energies S_k: power spectrum weighted through each triangle."""
    return np.atleast_2d(power_bins) @ fbank.weights.T


def mfcc(clip: AudioClip, cfg: FrontendConfig | None = None) -> FeatureSequence:
    """Extract the per-frame cepstral features of a clip."""
    if cfg is None:
        cfg = FrontendConfig()
    frames = frame_signal(clip, cfg)
    n = frames.shape[1]
    nfft = fft_size(n, cfg.fft_pad)
    win = window_function(cfg.window, n)
    spectrum = np.fft.rfft(frames * win, nfft, axis=1)
    power = (spectrum.real**2 + spectrum.imag**2) / n
    fbank = build_filterbank(cfg, clip.sample_rate, nfft)
    energies = power @ fbank.weights.T
    logs = np.log(np.maximum(energies, cfg.log_floor))
    ceps = logs @ dct_matrix(cfg.n_ceps, cfg.n_filters).T
    return FeatureSequence(frames=ceps, label=clip.label, clip_id=clip.clip_id)


def write_features_csv(sequences, path) -> None:
    """Write sequences as `clip_id,label,frame_idx,c1..cL` rows.

    Coefficients are printed in scientific notation with 18 significant
    digits, enough for an exact float round trip.
    """
    sequences = list(sequences)
    dim = sequences[0].dim
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["clip_id", "label", "frame_idx"] + [f"c{i}" for i in range(1, dim + 1)])
        for seq in sequences:
            if seq.dim != dim:
                raise ValueError("all sequences must share one dimension")
            label = "" if seq.label is None else seq.label
            for frame_idx, row in enumerate(seq.frames):
                writer.writerow(
                    [seq.clip_id, label, frame_idx] + [format(c, ".17e") for c in row]
                )


def read_features_csv(path) -> list[FeatureSequence]:
    """Read a features CSV back into per-clip FeatureSequences (file order)."""
    by_clip: dict[str, list] = {}
    labels: dict[str, str | None] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[:3] != ["clip_id", "label", "frame_idx"]:
            raise ValueError(f"{path}: expected a clip_id,label,frame_idx,c1.. header")
        for row in reader:
            clip_id, label = row[0], row[1] or None
            by_clip.setdefault(clip_id, []).append([float(v) for v in row[3:]])
            labels[clip_id] = label
    return [
        FeatureSequence(frames=np.asarray(rows), label=labels[clip_id], clip_id=clip_id)
        for clip_id, rows in by_clip.items()
    ]


class MfccExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer mapping AudioClips to FeatureSequences.

    fit() only validates the parameters; transform() accepts a single clip
    or an iterable of clips and returns a list of FeatureSequences.
    """

    def __init__(
        self,
        frame_ms=30.0,
        hop_ms=15.0,
        n_filters=26,
        n_ceps=12,
        window="hamming",
        log_floor=1e-10,
        fft_pad=True,
    ):
        self.frame_ms = frame_ms
        self.hop_ms = hop_ms
        self.n_filters = n_filters
        self.n_ceps = n_ceps
        self.window = window
        self.log_floor = log_floor
        self.fft_pad = fft_pad

    def _config(self) -> FrontendConfig:
        return FrontendConfig(
            frame_ms=self.frame_ms,
            hop_ms=self.hop_ms,
            n_filters=self.n_filters,
            n_ceps=self.n_ceps,
            window=self.window,
            log_floor=self.log_floor,
            fft_pad=self.fft_pad,
        )

    def fit(self, X=None, y=None):
        self._config()
        return self

    def transform(self, X) -> list[FeatureSequence]:
        cfg = self._config()
        clips = [X] if isinstance(X, AudioClip) else list(X)
        return [mfcc(clip, cfg) for clip in clips]
