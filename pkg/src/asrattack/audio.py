"""Waveform I/O, SNR arithmetic and noise mixing.

All attack-path audio is mono float at 16 kHz. PCM16 files are decoded
with the asymmetric convention s/32768 so that full-scale negative is
exactly representable; float32 files round-trip bit-exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

ATTACK_SAMPLE_RATE = 16000


class AudioError(ValueError):
    """Unusable audio input (bad file, bad encoding, bad shapes)."""


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono waveform, amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise AudioError(f"expected mono 1-D samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path: str | os.PathLike) -> AudioBuffer:
    """Read a mono PCM16 or IEEE float32 WAV file.

    PCM16 sample s maps to s/32768. Multi-channel input is an error,
    never a silent downmix.
    """
    if not os.path.exists(path):
        raise AudioError(f"no such file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise AudioError(f"unreadable WAV {path}: {exc}") from exc
    if data.ndim != 1:
        raise AudioError(
            f"{path}: expected mono, got {data.shape[1]} channels"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioError(f"{path}: unsupported sample encoding {data.dtype}")
    return AudioBuffer(samples=samples, sample_rate=int(rate))


def write_wav(buffer: AudioBuffer, path: str | os.PathLike) -> None:
    """Write an IEEE float32 mono WAV; read_wav inverts it exactly."""
    if not np.all(np.isfinite(buffer.samples)):
        raise AudioError("refusing to write non-finite samples")
    wavfile.write(path, buffer.sample_rate, buffer.samples.astype(np.float32))


def signal_power(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) == 0:
        return 0.0
    return float(np.mean(samples**2))


def snr_db(reference: AudioBuffer, perturbation: np.ndarray) -> float:
    """10*log10(sum x^2 / sum eps^2) in decibels."""
    pert = np.asarray(perturbation, dtype=np.float64)
    if len(pert) != len(reference.samples):
        raise AudioError(
            f"length mismatch: reference {len(reference.samples)}, "
            f"perturbation {len(pert)}"
        )
    p_ref = signal_power(reference.samples)
    p_pert = signal_power(pert)
    if p_pert <= 0.0:
        raise AudioError("perturbation has zero power, SNR undefined")
    return float(10.0 * np.log10(p_ref / p_pert))


def white_noise(n_samples: int, seed: int, sample_rate: int = ATTACK_SAMPLE_RATE) -> AudioBuffer:
    """Seeded uniform [-1, 1] white noise."""
    rng = np.random.default_rng(seed)
    return AudioBuffer(rng.uniform(-1.0, 1.0, n_samples), sample_rate)


def _fit_noise_to(noise: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Tile/crop noise to length n, starting at a seeded random offset."""
    reps = int(np.ceil((n + len(noise)) / len(noise)))
    tiled = np.tile(noise, reps)
    offset = int(rng.integers(0, len(noise)))
    return tiled[offset : offset + n]


def mix_at_snr(clean: AudioBuffer, noise: AudioBuffer, target_snr_db: float, seed: int) -> AudioBuffer:
    """Add noise scaled so that snr_db(clean, scaled noise) hits the target."""
    if len(clean) == 0:
        raise AudioError("empty clean buffer")
    if signal_power(noise.samples) <= 0.0:
        raise AudioError("zero-power noise")
    rng = np.random.default_rng(seed)
    segment = _fit_noise_to(noise.samples, len(clean), rng)
    p_seg = signal_power(segment)
    if p_seg <= 0.0:
        raise AudioError("selected noise segment has zero power")
    scale = np.sqrt(signal_power(clean.samples) / (p_seg * 10.0 ** (target_snr_db / 10.0)))
    return AudioBuffer(clean.samples + scale * segment, clean.sample_rate)
