"""Audio ingestion and synthetic vowel corpus generation.

Recordings come in as RIFF/WAVE PCM files (8/16/24/32-bit integer or
32-bit float, mono or downmixed). A deterministic formant-synthesis path
provides a balanced five-vowel stand-in corpus when no recordings are
available: an impulse train at the fundamental is shaped by cascaded
second-order resonators, one per formant.
"""

from __future__ import annotations

import csv
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import AudioFormatError, EmptyAudioError, UnsupportedFormatError

# Classic average formant targets (F1, F2, F3 in Hz) giving well separated
# classes; shared bandwidths. Perturbed per clip when building a corpus.
VOWEL_FORMANTS = {
    "a": (730.0, 1090.0, 2440.0),
    "i": (270.0, 2290.0, 3010.0),
    "u": (300.0, 870.0, 2240.0),
    "e": (530.0, 1840.0, 2480.0),
    "o": (570.0, 840.0, 2410.0),
}
FORMANT_BANDWIDTHS = (60.0, 90.0, 120.0)

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_DURATION = 0.4
DEFAULT_PITCH = 210.0

# Per-clip noise floor, amplitude 10^U[lo, hi] relative to unit signal
# peak (about 0.01x to 2x). Spanning clean through noisy takes gives the
# corpus realistic within-class spread; a fixed low floor leaves the five
# classes so separable that any coefficient subset classifies perfectly.
_NOISE_LOG_RANGE = (-2.0, 0.3)

_WAVE_PCM = 0x0001
_WAVE_IEEE_FLOAT = 0x0003
_WAVE_EXTENSIBLE = 0xFFFE


@dataclass
class AudioClip:
    """A labeled mono signal. Pipeline-produced clips keep samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    label: str | None = None
    clip_id: str | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("samples must be a non-empty 1-d array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class Corpus:
    """A set of labeled clips plus the ordered list of class labels."""

    clips: list[AudioClip]
    classes: list[str]

    def __post_init__(self):
        counts = {c: 0 for c in self.classes}
        for clip in self.clips:
            if clip.label not in counts:
                raise ValueError(f"clip label {clip.label!r} not in classes {self.classes}")
            counts[clip.label] += 1
        thin = [c for c, n in counts.items() if n < 2]
        if thin:
            raise ValueError(f"classes {thin} have fewer than 2 clips; hold-out needs at least 2")

    def __len__(self) -> int:
        return len(self.clips)


@dataclass
class VowelSpec:
    """Parameters for one synthesized vowel clip."""

    label: str
    formants: list[tuple[float, float]]  # (center_hz, bandwidth_hz)
    fundamental: float
    duration: float
    jitter_seed: int = 0

    def __post_init__(self):
        if len(self.formants) < 2:
            raise ValueError("at least two formants are required")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.fundamental <= 0:
            raise ValueError("fundamental must be positive")


def load_wav(path, label: str | None = None) -> AudioClip:
    """Read a PCM WAV file into a normalized mono AudioClip.

    Integer samples are scaled by the format's full-scale value (e.g.
    32768 for 16-bit); float samples are clipped to [-1, 1]. Multichannel
    audio is averaged down to mono.

    Raises AudioFormatError for malformed containers, UnsupportedFormatError
    for non-PCM codecs, EmptyAudioError for an empty data chunk.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

    fmt_chunk = None
    data_chunk = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise AudioFormatError(f"{path}: truncated fmt chunk")
            fmt_chunk = body
        elif chunk_id == b"data":
            if len(body) < size:
                raise AudioFormatError(f"{path}: truncated data chunk")
            data_chunk = body
        pos += 8 + size + (size & 1)  # chunks are word aligned

    if fmt_chunk is None or data_chunk is None:
        raise AudioFormatError(f"{path}: missing fmt or data chunk")

    audio_format, n_channels, sample_rate, _byte_rate, _block_align, bits = struct.unpack_from(
        "<HHIIHH", fmt_chunk, 0
    )
    if audio_format == _WAVE_EXTENSIBLE:
        if len(fmt_chunk) < 26:
            raise AudioFormatError(f"{path}: truncated extensible fmt chunk")
        # effective format is the first word of the SubFormat GUID
        (audio_format,) = struct.unpack_from("<H", fmt_chunk, 24)
    if n_channels < 1 or sample_rate <= 0:
        raise AudioFormatError(f"{path}: invalid channel count or sample rate")

    if audio_format == _WAVE_PCM:
        if bits == 8:
            values = np.frombuffer(data_chunk, dtype=np.uint8).astype(np.float64)
            samples = (values - 128.0) / 128.0
        elif bits == 16:
            usable = len(data_chunk) - len(data_chunk) % 2
            values = np.frombuffer(data_chunk[:usable], dtype="<i2").astype(np.float64)
            samples = values / 32768.0
        elif bits == 24:
            usable = len(data_chunk) - len(data_chunk) % 3
            triples = np.frombuffer(data_chunk[:usable], dtype=np.uint8).reshape(-1, 3)
            values = (
                triples[:, 0].astype(np.int32)
                | (triples[:, 1].astype(np.int32) << 8)
                | (triples[:, 2].astype(np.int32) << 16)
            )
            values[values >= 1 << 23] -= 1 << 24
            samples = values.astype(np.float64) / float(1 << 23)
        elif bits == 32:
            usable = len(data_chunk) - len(data_chunk) % 4
            values = np.frombuffer(data_chunk[:usable], dtype="<i4").astype(np.float64)
            samples = values / float(1 << 31)
        else:
            raise UnsupportedFormatError(f"{path}: {bits}-bit integer PCM is not supported")
    elif audio_format == _WAVE_IEEE_FLOAT:
        if bits == 32:
            usable = len(data_chunk) - len(data_chunk) % 4
            samples = np.frombuffer(data_chunk[:usable], dtype="<f4").astype(np.float64)
        elif bits == 64:
            usable = len(data_chunk) - len(data_chunk) % 8
            samples = np.frombuffer(data_chunk[:usable], dtype="<f8").astype(np.float64)
        else:
            raise UnsupportedFormatError(f"{path}: {bits}-bit float PCM is not supported")
        samples = np.clip(samples, -1.0, 1.0)
    else:
        raise UnsupportedFormatError(
            f"{path}: codec 0x{audio_format:04X} is not supported (integer/float PCM only)"
        )

    if n_channels > 1:
        n_frames = samples.size // n_channels
        samples = samples[: n_frames * n_channels].reshape(-1, n_channels).mean(axis=1)
    if samples.size == 0:
        raise EmptyAudioError(f"{path}: data chunk contains no samples")

    return AudioClip(samples, int(sample_rate), label=label, clip_id=path.stem)


def write_wav(path, samples, sample_rate: int) -> None:
    """Write mono float samples in [-1, 1] as a 16-bit PCM WAV file.

    Scaling matches the reader's full-scale normalization (32768), so a
    write/read round trip loses only the half-step quantization error.
    """
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    ints = np.clip(np.round(pcm * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(int(sample_rate))
        handle.writeframes(ints.tobytes())


def synthesize_vowel(spec: VowelSpec, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
    """Render a vowel spec as an impulse train shaped by cascaded resonators.

    Each formant becomes a two-pole resonator with pole radius set by its
    bandwidth. The peak-normalized result is mixed with a white noise
    floor whose level is drawn per clip from `jitter_seed` (quiet through
    noisy takes); bit-identical for identical (spec, sample_rate).
    """
    nyquist = sample_rate / 2.0
    for freq, _bw in spec.formants:
        if freq >= nyquist:
            raise ValueError(f"formant at {freq} Hz is at or above Nyquist ({nyquist} Hz)")

    n = int(round(spec.duration * sample_rate))
    rng = np.random.default_rng(spec.jitter_seed)

    period = sample_rate / spec.fundamental
    excitation = np.zeros(n)
    positions = np.round(np.arange(0.0, n, period)).astype(int)
    excitation[positions[positions < n]] = 1.0

    out = excitation
    for freq, bw in spec.formants:
        radius = np.exp(-np.pi * bw / sample_rate)
        theta = 2.0 * np.pi * freq / sample_rate
        denom = np.array([1.0, -2.0 * radius * np.cos(theta), radius * radius])
        out = lfilter([1.0], denom, out)

    out = out / np.max(np.abs(out))
    noise_amp = 10.0 ** rng.uniform(*_NOISE_LOG_RANGE)
    out = out + noise_amp * rng.standard_normal(n)
    peak = np.max(np.abs(out))
    if peak > 1.0:
        out = out / peak
    return AudioClip(out, sample_rate, label=spec.label)


def build_synthetic_corpus(
    n_per_class: int = 25,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    seed: int = 0,
    duration: float = DEFAULT_DURATION,
    pitch: float = DEFAULT_PITCH,
) -> Corpus:
    """Build a balanced five-vowel corpus with per-clip variation.

    Formant centers are perturbed by +-5% and the pitch by +-10% per clip,
    all driven by `seed`; the result is a pure function of its arguments.
    """
    if n_per_class < 2:
        raise ValueError("n_per_class must be at least 2")
    rng = np.random.default_rng(seed)
    classes = list(VOWEL_FORMANTS)
    clips = []
    for label in classes:
        centers = VOWEL_FORMANTS[label]
        for j in range(n_per_class):
            factors = rng.uniform(0.95, 1.05, size=len(centers))
            fundamental = pitch * rng.uniform(0.9, 1.1)
            jitter_seed = int(rng.integers(0, 2**31))
            spec = VowelSpec(
                label=label,
                formants=[
                    (center * factor, bw)
                    for center, factor, bw in zip(centers, factors, FORMANT_BANDWIDTHS)
                ],
                fundamental=fundamental,
                duration=duration,
                jitter_seed=jitter_seed,
            )
            clip = synthesize_vowel(spec, sample_rate)
            clip.clip_id = f"{label}_{j:03d}"
            clips.append(clip)
    return Corpus(clips=clips, classes=classes)


def write_corpus(corpus: Corpus, out_dir) -> Path:
    """Write a corpus as <out_dir>/<label>/<clip_id>.wav plus a manifest CSV.

    Returns the manifest path. Manifest rows are `path,label` with paths
    relative to the manifest location.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.csv"
    with open(manifest_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["path", "label"])
        for clip in corpus.clips:
            rel = Path(clip.label) / f"{clip.clip_id}.wav"
            (out_dir / clip.label).mkdir(exist_ok=True)
            write_wav(out_dir / rel, clip.samples, clip.sample_rate)
            writer.writerow([rel.as_posix(), clip.label])
    return manifest_path


def list_corpus_dir(root) -> list[tuple[Path, str]]:
    """Enumerate <root>/<label>/*.wav as (path, label) pairs, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    entries = []
    for label_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for wav in sorted(label_dir.glob("*.wav")):
            entries.append((wav, label_dir.name))
    if not entries:
        raise FileNotFoundError(f"no <label>/*.wav files found under {root}")
    return entries


def read_manifest(manifest_path) -> list[tuple[Path, str]]:
    """Read (path, label) pairs from a CSV with `path,label` columns.

    Relative paths are resolved against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    entries = []
    with open(manifest_path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"path", "label"} <= set(reader.fieldnames):
            raise AudioFormatError(f"{manifest_path}: manifest needs 'path' and 'label' columns")
        for row in reader:
            wav_path = Path(row["path"])
            if not wav_path.is_absolute():
                wav_path = base / wav_path
            entries.append((wav_path, row["label"]))
    if not entries:
        raise EmptyAudioError(f"{manifest_path}: manifest lists no files")
    return entries


def _corpus_from_entries(entries) -> Corpus:
    clips = []
    classes: list[str] = []
    for path, label in entries:
        if label not in classes:
            classes.append(label)
        clips.append(load_wav(path, label=label))
    return Corpus(clips=clips, classes=classes)


def load_corpus_from_dir(root) -> Corpus:
    """Ingest <root>/<label>/*.wav with labels taken from directory names."""
    return _corpus_from_entries(list_corpus_dir(root))


def load_corpus_from_manifest(manifest_path) -> Corpus:
    """Ingest files listed in a CSV with `path,label` columns."""
    return _corpus_from_entries(read_manifest(manifest_path))
