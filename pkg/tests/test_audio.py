import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asrattack.audio import (
    AudioBuffer,
    AudioError,
    mix_at_snr,
    read_wav,
    snr_db,
    white_noise,
    write_wav,
)


def _pcm16_wav_bytes(samples, rate=16000, channels=1):
    """Hand-built RIFF/WAVE file, independent of any library writer."""
    data = b"".join(struct.pack("<h", s) for s in samples)
    blockalign = 2 * channels
    header = (
        b"RIFF"
        + struct.pack("<I", 36 + len(data))
        + b"WAVE"
        + b"fmt "
        + struct.pack("<IHHIIHH", 16, 1, channels, rate, rate * blockalign, blockalign, 16)
        + b"data"
        + struct.pack("<I", len(data))
    )
    return header + data


class TestReadWriteWav:
    def test_float32_round_trip_identity(self, tmp_path):
        rng = np.random.default_rng(0)
        buf = AudioBuffer(rng.uniform(-1, 1, 1000).astype(np.float32), 16000)
        path = tmp_path / "x.wav"
        write_wav(buf, path)
        back = read_wav(path)
        assert back.sample_rate == 16000
        assert np.array_equal(back.samples, buf.samples)

    def test_pcm16_quantization_convention(self, tmp_path):
        # 4-sample fixture built by hand: full scale maps to s/32768
        path = tmp_path / "pcm.wav"
        path.write_bytes(_pcm16_wav_bytes([32767, -32768, 0, 16384]))
        buf = read_wav(path)
        assert buf.samples == pytest.approx(
            [32767 / 32768, -1.0, 0.0, 0.5], abs=0
        )

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "st.wav"
        path.write_bytes(_pcm16_wav_bytes([0, 0, 0, 0], channels=2))
        with pytest.raises(AudioError, match="channels"):
            read_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(AudioError, match="no such file"):
            read_wav(tmp_path / "absent.wav")

    def test_empty_buffer_round_trip(self, tmp_path):
        path = tmp_path / "empty.wav"
        write_wav(AudioBuffer(np.zeros(0), 16000), path)
        assert len(read_wav(path)) == 0

    def test_nan_sample_rejected(self, tmp_path):
        buf = AudioBuffer(np.array([0.0, np.nan]), 16000)
        with pytest.raises(AudioError, match="non-finite"):
            write_wav(buf, tmp_path / "bad.wav")


class TestSnr:
    def test_equal_power_is_zero_db(self):
        x = AudioBuffer(np.ones(64) * 0.25, 16000)
        assert snr_db(x, np.ones(64) * 0.25) == pytest.approx(0.0, abs=1e-12)

    def test_power_ratio_1000_is_30_db(self):
        x = AudioBuffer(np.full(100, np.sqrt(1000.0)), 16000)
        assert snr_db(x, np.ones(100)) == pytest.approx(30.0, abs=1e-9)

    def test_sine_vs_constant_perturbation(self):
        # unit sine power 0.5 vs constant 0.002 power 4e-6:
        # 10*log10(0.5/4e-6) = 50.969 (direct formula evaluation)
        n = 16000
        t = np.arange(n) / 16000
        x = AudioBuffer(np.sin(2 * np.pi * np.round(440 * n / 16000) * t), 16000)
        got = snr_db(x, np.full(n, 0.002))
        assert got == pytest.approx(10 * np.log10(0.5 / 4e-6), abs=1e-3)
        assert got == pytest.approx(50.969, abs=1e-2)

    def test_zero_perturbation_rejected(self):
        x = AudioBuffer(np.ones(8), 16000)
        with pytest.raises(AudioError, match="zero power"):
            snr_db(x, np.zeros(8))

    def test_length_mismatch(self):
        x = AudioBuffer(np.ones(8), 16000)
        with pytest.raises(AudioError, match="length mismatch"):
            snr_db(x, np.ones(7))

    @given(st.floats(min_value=0.01, max_value=100.0), st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_scaling_property(self, c, seed):
        # snr(x, c*eps) = snr(x, eps) - 20*log10(c)
        rng = np.random.default_rng(seed)
        x = AudioBuffer(rng.uniform(-1, 1, 256), 16000)
        eps = rng.uniform(-0.1, 0.1, 256)
        if np.sum(eps**2) == 0:
            return
        assert snr_db(x, c * eps) == pytest.approx(
            snr_db(x, eps) - 20 * np.log10(c), abs=1e-8
        )


class TestMixAtSnr:
    def test_equal_power_zero_db_identity_scale(self):
        rng = np.random.default_rng(1)
        clean = AudioBuffer(rng.uniform(-1, 1, 500), 16000)
        noise = AudioBuffer(clean.samples.copy(), 16000)
        mixed = mix_at_snr(clean, noise, 0.0, seed=0)
        added = mixed.samples - clean.samples
        # scale factor 1.0 up to the random offset of the tiled segment
        assert np.mean(added**2) == pytest.approx(np.mean(clean.samples**2), rel=1e-9)

    def test_equal_power_20db_scale_tenth(self):
        x = np.sin(np.arange(1000))
        clean = AudioBuffer(x, 16000)
        noise = AudioBuffer(np.concatenate([x, x]), 16000)
        mixed = mix_at_snr(clean, noise, 20.0, seed=3)
        added = mixed.samples - clean.samples
        assert np.sqrt(np.mean(added**2) / np.mean(x**2)) == pytest.approx(0.1, rel=1e-6)

    @pytest.mark.parametrize("target", [0.0, 20.0, 30.0])
    def test_measured_snr_hits_target(self, target):
        rng = np.random.default_rng(7)
        clean = AudioBuffer(rng.uniform(-0.5, 0.5, 4000), 16000)
        noise = white_noise(2500, seed=11)
        mixed = mix_at_snr(clean, noise, target, seed=5)
        measured = snr_db(clean, mixed.samples - clean.samples)
        assert abs(measured - target) < 0.01

    def test_zero_power_noise_rejected(self):
        clean = AudioBuffer(np.ones(100), 16000)
        with pytest.raises(AudioError, match="zero-power"):
            mix_at_snr(clean, AudioBuffer(np.zeros(50), 16000), 10.0, seed=0)

    def test_empty_clean_rejected(self):
        with pytest.raises(AudioError, match="empty"):
            mix_at_snr(AudioBuffer(np.zeros(0), 16000), white_noise(10, 0), 10.0, seed=0)

    def test_deterministic(self):
        clean = AudioBuffer(np.sin(np.arange(900) / 7.0), 16000)
        noise = white_noise(400, seed=2)
        a = mix_at_snr(clean, noise, 15.0, seed=9)
        b = mix_at_snr(clean, noise, 15.0, seed=9)
        assert np.array_equal(a.samples, b.samples)


def test_white_noise_seeded_and_bounded():
    a = white_noise(1000, seed=4)
    b = white_noise(1000, seed=4)
    assert np.array_equal(a.samples, b.samples)
    assert np.all(np.abs(a.samples) <= 1.0)
    assert np.std(a.samples) > 0.4  # uniform [-1,1] has std ~0.577
