"""Differentiable log mel filterbank features.

Forward map per frame: Hann window -> real DFT -> power spectrum |X|^2
-> mel projection -> log(. + log_floor). No center padding, so the
frame count is 1 + floor((len - frame_length) / hop) and the backward
pass is the exact adjoint of the chain (no approximations).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import AudioBuffer


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class SpectrogramConfig:
    frame_length: int = 400
    hop: int = 160
    n_mels: int = 80
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if not (self.frame_length >= self.hop > 0):
            raise FeatureError("need frame_length >= hop > 0")
        if self.n_mels <= 0:
            raise FeatureError("n_mels must be positive")
        if not (self.f_min < self.f_max):
            raise FeatureError("need f_min < f_max")

    @property
    def n_bins(self) -> int:
        return self.frame_length // 2 + 1


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """frames x n_mels log mel energies plus framing provenance."""

    values: np.ndarray
    frame_length: int
    hop: int

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_mels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class MelFilterbank:
    """n_mels x n_bins non-negative weights, each row peaking at 1."""

    weights: np.ndarray


def hz_to_mel(f):
    """HTK mel scale: m = 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def build_mel_filterbank(config: SpectrogramConfig, sample_rate: int) -> MelFilterbank:
    """Triangular filters with centers equally spaced on the mel scale."""
    if config.f_max > sample_rate / 2:
        raise FeatureError(
            f"f_max {config.f_max} above Nyquist {sample_rate / 2}"
        )
    edges_hz = mel_to_hz(
        np.linspace(hz_to_mel(config.f_min), hz_to_mel(config.f_max), config.n_mels + 2)
    )
    bin_hz = np.arange(config.n_bins) * sample_rate / config.frame_length
    weights = np.zeros((config.n_mels, config.n_bins))
    for i in range(config.n_mels):
        left, center, right = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        tri = np.maximum(0.0, np.minimum(rising, falling))
        weights[i] = tri / tri.max()  # peak of the sampled triangle pinned to 1
    return MelFilterbank(weights=weights)


@lru_cache(maxsize=8)
def _cached_pieces(config: SpectrogramConfig, sample_rate: int):
    window = np.hanning(config.frame_length)
    fb = build_mel_filterbank(config, sample_rate)
    return window, fb.weights


def _frame(samples: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    if len(samples) < frame_length:
        raise FeatureError(
            f"audio of {len(samples)} samples shorter than one frame ({frame_length})"
        )
    return np.lib.stride_tricks.sliding_window_view(samples, frame_length)[::hop]


def n_frames_for(n_samples: int, config: SpectrogramConfig) -> int:
    if n_samples < config.frame_length:
        return 0
    return 1 + (n_samples - config.frame_length) // config.hop


def extract_features(audio: AudioBuffer, config: SpectrogramConfig = SpectrogramConfig()) -> FeatureMatrix:
    window, mel_weights = _cached_pieces(config, audio.sample_rate)
    frames = _frame(audio.samples, config.frame_length, config.hop)
    spectrum = np.fft.rfft(frames * window, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    mel = power @ mel_weights.T
    return FeatureMatrix(
        values=np.log(mel + config.log_floor),
        frame_length=config.frame_length,
        hop=config.hop,
    )


def features_vjp(
    audio: AudioBuffer,
    config: SpectrogramConfig,
    upstream: np.ndarray,
) -> np.ndarray:
    """d<upstream, extract_features(x)>/dx, exact adjoint of the forward chain.

    Overlapping frames accumulate additively into the sample gradient.
    """
    window, mel_weights = _cached_pieces(config, audio.sample_rate)
    frames = _frame(audio.samples, config.frame_length, config.hop)
    n_frames = frames.shape[0]
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (n_frames, config.n_mels):
        raise FeatureError(
            f"upstream shape {upstream.shape} != {(n_frames, config.n_mels)}"
        )

    spectrum = np.fft.rfft(frames * window, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    mel = power @ mel_weights.T

    d_mel = upstream / (mel + config.log_floor)
    d_power = d_mel @ mel_weights
    # d|X_k|^2/dw_n = 2 Re(X_k e^{2pi i k n / N}); realized with a zero-padded
    # complex inverse FFT over the rfft bins.
    packed = np.zeros((n_frames, config.frame_length), dtype=np.complex128)
    packed[:, : config.n_bins] = d_power * spectrum
    d_windowed = 2.0 * config.frame_length * np.fft.ifft(packed, axis=1).real
    d_frames = d_windowed * window

    grad = np.zeros(len(audio.samples))
    for f in range(n_frames):
        start = f * config.hop
        grad[start : start + config.frame_length] += d_frames[f]
    return grad
