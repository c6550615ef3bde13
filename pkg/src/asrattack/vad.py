"""Cepstral-power voice activity detection.

Frames are scored by the mean squared cepstral coefficient inside the
pitch quefrency band; a frame counts as speech when that power (in dB)
clears the noise-floor estimate by a fixed margin. The mask follows
front/end trim semantics: ones on one contiguous interval spanning the
first through last qualifying run, zeros outside. The detector is
invariant to amplitude scaling of its input because a gain shifts the
log spectrum by a constant, which lands entirely in the zeroth cepstral
coefficient, outside the pitch band.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .features import FeatureError, _frame


@dataclass(frozen=True)
class VadConfig:
    frame_length: int = 400
    hop: int = 160
    pitch_min_hz: float = 50.0
    pitch_max_hz: float = 400.0
    margin_db: float = 9.0
    floor_percentile: float = 5.0
    min_run: int = 3
    spectrum_floor: float = 1e-10
    # The log-periodogram ripple of stationary noise has an amplitude-
    # independent cepstral band power (about -24 dB for this window and
    # band). Capping the percentile floor there keeps detection alive on
    # buffers that contain no quiet frames at all.
    floor_cap_db: float = -22.0

    def __post_init__(self):
        if self.margin_db <= 0:
            raise ValueError("margin_db must be positive")
        if self.min_run < 1:
            raise ValueError("min_run must be >= 1")


@dataclass(eq=False)
class VadMask:
    """Per-sample {0,1} weights; all-ones with fallback_flag on detection failure."""

    weights: np.ndarray
    speech_onset: int
    speech_offset: int
    fallback_flag: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "speech_onset": int(self.speech_onset),
                "speech_offset": int(self.speech_offset),
                "fallback": bool(self.fallback_flag),
                "n_samples": int(len(self.weights)),
            }
        )


def _cepstral_band_power_db(frames: np.ndarray, config: VadConfig, sample_rate: int) -> np.ndarray:
    window = np.hanning(config.frame_length)
    spectrum = np.fft.rfft(frames * window, axis=1)
    log_power = np.log(spectrum.real**2 + spectrum.imag**2 + config.spectrum_floor)
    cepstrum = np.fft.irfft(log_power, n=config.frame_length, axis=1)
    q_lo = int(round(sample_rate / config.pitch_max_hz))
    q_hi = int(round(sample_rate / config.pitch_min_hz))
    band = cepstrum[:, q_lo : q_hi + 1]
    power = np.mean(band**2, axis=1)
    return 10.0 * np.log10(power + 1e-300)


def _active_runs(active: np.ndarray, min_run: int) -> list[tuple[int, int]]:
    """Inclusive (start, end) frame spans of active runs of >= min_run frames."""
    runs = []
    start = None
    for i, a in enumerate(active):
        if a and start is None:
            start = i
        elif not a and start is not None:
            if i - start >= min_run:
                runs.append((start, i - 1))
            start = None
    if start is not None and len(active) - start >= min_run:
        runs.append((start, len(active) - 1))
    return runs


def compute_vad_mask(audio: AudioBuffer, config: VadConfig = VadConfig()) -> VadMask:
    """Detect the speech interval and build the per-sample gradient mask."""
    n = len(audio.samples)
    if n < config.frame_length:
        raise FeatureError(
            f"audio of {n} samples shorter than one VAD frame ({config.frame_length})"
        )
    frames = _frame(audio.samples, config.frame_length, config.hop)
    power_db = _cepstral_band_power_db(frames, config, audio.sample_rate)
    floor = min(np.percentile(power_db, config.floor_percentile), config.floor_cap_db)
    active = power_db > floor + config.margin_db
    runs = _active_runs(active, config.min_run)
    if not runs:
        return VadMask(
            weights=np.ones(n),
            speech_onset=0,
            speech_offset=n,
            fallback_flag=True,
        )
    onset = runs[0][0] * config.hop
    if runs[-1][1] == len(frames) - 1:
        # last frame is speech: nothing to trim at the end, including the
        # tail samples beyond full-frame coverage
        offset = n
    else:
        offset = runs[-1][1] * config.hop + config.frame_length
    weights = np.zeros(n)
    weights[onset:offset] = 1.0
    return VadMask(weights=weights, speech_onset=onset, speech_offset=offset, fallback_flag=False)


def apply_mask(gradient: np.ndarray, mask: VadMask) -> np.ndarray:
    gradient = np.asarray(gradient, dtype=np.float64)
    if len(gradient) != len(mask.weights):
        raise ValueError(
            f"length mismatch: gradient {len(gradient)}, mask {len(mask.weights)}"
        )
    return gradient * mask.weights
