"""WAV ingestion, formant synthesis, and synthetic corpus construction."""

import struct

import numpy as np
import pytest

from vowelsel.audio import (
    AudioClip,
    Corpus,
    VowelSpec,
    build_synthetic_corpus,
    load_corpus_from_dir,
    load_corpus_from_manifest,
    load_wav,
    synthesize_vowel,
    write_corpus,
    write_wav,
)
from vowelsel.errors import AudioFormatError, EmptyAudioError, UnsupportedFormatError
from vowelsel.features import FrontendConfig, apply_window, frame_signal, power_spectrum


def wav_bytes(fmt_tag, channels, rate, bits, data: bytes) -> bytes:
    """Assemble a minimal RIFF/WAVE file by hand."""
    fmt = struct.pack(
        "<HHIIHH", fmt_tag, channels, rate, rate * channels * bits // 8,
        channels * bits // 8, bits,
    )
    body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(data)) + data
    if len(data) % 2:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body


class TestLoadWav:
    def test_16bit_full_scale_normalization(self, tmp_path):
        """A single +32767 sample must come out as 32767/32768."""
        path = tmp_path / "one.wav"
        path.write_bytes(wav_bytes(1, 1, 16000, 16, struct.pack("<h", 32767)))
        clip = load_wav(path)
        assert clip.sample_rate == 16000
        assert clip.samples.shape == (1,)
        assert clip.samples[0] == 32767 / 32768

    def test_stereo_averages_to_mono(self, tmp_path):
        path = tmp_path / "stereo.wav"
        path.write_bytes(wav_bytes(1, 2, 8000, 16, struct.pack("<hh", 16384, -16384)))
        clip = load_wav(path)
        assert clip.samples.shape == (1,)
        assert clip.samples[0] == 0.0

    def test_corrupt_riff_magic(self, tmp_path):
        path = tmp_path / "bad.wav"
        good = wav_bytes(1, 1, 8000, 16, struct.pack("<h", 1))
        path.write_bytes(b"JUNK" + good[4:])
        with pytest.raises(AudioFormatError):
            load_wav(path)

    def test_non_pcm_codec_rejected(self, tmp_path):
        path = tmp_path / "mp3ish.wav"
        path.write_bytes(wav_bytes(0x0055, 1, 8000, 16, b"\x00\x00"))
        with pytest.raises(UnsupportedFormatError):
            load_wav(path)

    def test_empty_data_chunk(self, tmp_path):
        path = tmp_path / "empty.wav"
        path.write_bytes(wav_bytes(1, 1, 8000, 16, b""))
        with pytest.raises(EmptyAudioError):
            load_wav(path)

    def test_missing_data_chunk(self, tmp_path):
        path = tmp_path / "nodata.wav"
        fmt = struct.pack("<HHIIHH", 1, 1, 8000, 16000, 2, 16)
        body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
        path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)
        with pytest.raises(AudioFormatError):
            load_wav(path)

    def test_truncated_data_chunk(self, tmp_path):
        path = tmp_path / "trunc.wav"
        raw = wav_bytes(1, 1, 8000, 16, struct.pack("<hhhh", 1, 2, 3, 4))
        path.write_bytes(raw[:-6])
        with pytest.raises(AudioFormatError):
            load_wav(path)

    def test_8bit_unsigned(self, tmp_path):
        path = tmp_path / "u8.wav"
        path.write_bytes(wav_bytes(1, 1, 8000, 8, bytes([0, 128, 255])))
        clip = load_wav(path)
        np.testing.assert_allclose(clip.samples, [-1.0, 0.0, 127 / 128])

    def test_24bit_signed(self, tmp_path):
        path = tmp_path / "s24.wav"
        full = (1 << 23) - 1
        data = full.to_bytes(3, "little") + (1 << 23).to_bytes(3, "little")  # max, min
        path.write_bytes(wav_bytes(1, 1, 8000, 24, data))
        clip = load_wav(path)
        np.testing.assert_allclose(clip.samples, [full / (1 << 23), -1.0])

    def test_32bit_signed(self, tmp_path):
        path = tmp_path / "s32.wav"
        path.write_bytes(wav_bytes(1, 1, 8000, 32, struct.pack("<i", -(1 << 31))))
        clip = load_wav(path)
        assert clip.samples[0] == -1.0

    def test_float32_clipped(self, tmp_path):
        path = tmp_path / "f32.wav"
        path.write_bytes(wav_bytes(3, 1, 8000, 32, struct.pack("<ff", 0.25, 1.5)))
        clip = load_wav(path)
        np.testing.assert_allclose(clip.samples, [0.25, 1.0])

    def test_write_read_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        samples = rng.uniform(-1, 1, 400)
        path = tmp_path / "rt.wav"
        write_wav(path, samples, 16000)
        clip = load_wav(path, label="x")
        assert clip.label == "x"
        assert clip.sample_rate == 16000
        np.testing.assert_allclose(clip.samples, samples, atol=1.0 / 32768)

    def test_label_defaults_to_none_and_clip_id_to_stem(self, tmp_path):
        path = tmp_path / "someclip.wav"
        path.write_bytes(wav_bytes(1, 1, 8000, 16, struct.pack("<h", 5)))
        clip = load_wav(path)
        assert clip.label is None
        assert clip.clip_id == "someclip"


class TestAudioClip:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            AudioClip(np.array([]), 8000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            AudioClip(np.zeros(4), 0)


class TestVowelSpec:
    def test_needs_two_formants(self):
        with pytest.raises(ValueError):
            VowelSpec("a", [(700.0, 60.0)], 200.0, 0.4)

    def test_needs_positive_duration(self):
        with pytest.raises(ValueError):
            VowelSpec("a", [(700.0, 60.0), (1100.0, 90.0)], 200.0, 0.0)


class TestSynthesizeVowel:
    def _spec(self, **kw):
        base = dict(
            label="a",
            formants=[(730.0, 60.0), (1090.0, 90.0)],
            fundamental=200.0,
            duration=0.5,
            jitter_seed=3,
        )
        base.update(kw)
        return VowelSpec(**base)

    def test_sample_count(self):
        clip = synthesize_vowel(self._spec(), 16000)
        assert clip.samples.size == 8000

    def test_deterministic(self):
        a = synthesize_vowel(self._spec(), 16000)
        b = synthesize_vowel(self._spec(), 16000)
        assert np.array_equal(a.samples, b.samples)

    def test_samples_bounded(self):
        clip = synthesize_vowel(self._spec(jitter_seed=9), 16000)
        assert np.max(np.abs(clip.samples)) <= 1.0

    def test_formant_above_nyquist_rejected(self):
        with pytest.raises(ValueError):
            synthesize_vowel(self._spec(formants=[(9000.0, 60.0), (1000.0, 90.0)]), 16000)

    def test_spectral_peaks_at_formants(self):
        """Independent scan: the frame-averaged power spectrum must have its
        strongest local maxima within 2 bins of each resonance."""
        spec = self._spec(
            formants=[(800.0, 80.0), (1200.0, 90.0)], fundamental=100.0, jitter_seed=5
        )
        clip = synthesize_vowel(spec, 16000)
        cfg = FrontendConfig()
        frames = frame_signal(clip, cfg)
        spectra = [
            power_spectrum(apply_window(f, cfg.window), cfg, clip.sample_rate) for f in frames
        ]
        bin_hz = spectra[0].bin_hz
        mean_power = np.mean([p.bins for p in spectra], axis=0)
        interior = (mean_power[1:-1] > mean_power[:-2]) & (mean_power[1:-1] > mean_power[2:])
        local_max = np.nonzero(interior)[0] + 1
        top = local_max[np.argsort(mean_power[local_max])[::-1][:6]]
        for target_hz in (800.0, 1200.0):
            assert np.any(np.abs(top - target_hz / bin_hz) <= 2.0), (
                f"no local maximum within 2 bins of {target_hz} Hz; top bins {sorted(top)}"
            )


class TestSyntheticCorpus:
    def test_125_clips_for_25_per_class(self):
        corpus = build_synthetic_corpus(n_per_class=25, seed=0)
        assert len(corpus) == 125
        assert len(corpus.classes) == 5
        for label in corpus.classes:
            assert sum(c.label == label for c in corpus.clips) == 25

    def test_10_clips_for_2_per_class(self):
        assert len(build_synthetic_corpus(n_per_class=2, seed=0)) == 10

    def test_pure_function_of_seed(self):
        a = build_synthetic_corpus(n_per_class=2, seed=7)
        b = build_synthetic_corpus(n_per_class=2, seed=7)
        for clip_a, clip_b in zip(a.clips, b.clips):
            assert np.array_equal(clip_a.samples, clip_b.samples)
            assert clip_a.label == clip_b.label and clip_a.clip_id == clip_b.clip_id

    def test_different_seeds_differ(self):
        a = build_synthetic_corpus(n_per_class=2, seed=1)
        b = build_synthetic_corpus(n_per_class=2, seed=2)
        assert not np.array_equal(a.clips[0].samples, b.clips[0].samples)

    def test_all_samples_in_unit_range(self):
        corpus = build_synthetic_corpus(n_per_class=2, seed=3)
        for clip in corpus.clips:
            assert np.max(np.abs(clip.samples)) <= 1.0

    def test_rejects_single_clip_classes(self):
        with pytest.raises(ValueError):
            build_synthetic_corpus(n_per_class=1, seed=0)

    def test_unique_clip_ids(self):
        corpus = build_synthetic_corpus(n_per_class=3, seed=0)
        ids = [c.clip_id for c in corpus.clips]
        assert len(set(ids)) == len(ids)


class TestCorpusIO:
    def test_write_then_reload_via_manifest_and_dir(self, tmp_path):
        corpus = build_synthetic_corpus(n_per_class=2, seed=11, duration=0.1)
        manifest = write_corpus(corpus, tmp_path)
        assert manifest.exists()
        assert sum(1 for _ in tmp_path.rglob("*.wav")) == 10

        from_manifest = load_corpus_from_manifest(manifest)
        assert len(from_manifest) == 10
        assert set(from_manifest.classes) == set(corpus.classes)

        from_dir = load_corpus_from_dir(tmp_path)
        assert len(from_dir) == 10
        # 16-bit quantization is the only loss
        original = {c.clip_id: c for c in corpus.clips}
        for clip in from_dir.clips:
            np.testing.assert_allclose(
                clip.samples, original[clip.clip_id].samples, atol=1.0 / 32768
            )

    def test_corpus_invariant_label_membership(self):
        clip = AudioClip(np.zeros(10) + 0.1, 8000, label="z")
        with pytest.raises(ValueError):
            Corpus(clips=[clip, clip], classes=["a"])

    def test_corpus_invariant_min_two_clips(self):
        clip = AudioClip(np.zeros(10) + 0.1, 8000, label="a")
        with pytest.raises(ValueError):
            Corpus(clips=[clip], classes=["a"])
