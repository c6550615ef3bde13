"""Deterministic synthetic spoken-symbol corpus.

Each of the 10 symbols is a two-tone signature; utterances carry real
leading/trailing quiet regions (low-level noise, not digital silence)
so voice activity detection has something meaningful to find. Every
utterance is generated from an RNG derived from (master seed, utterance
index), independent of generation order.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .audio import AudioBuffer, write_wav

MANIFEST_FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    n_symbols: int = 10
    sample_rate: int = 16000
    symbol_s: float = 0.100
    gap_s: float = 0.020
    silence_s: float = 0.200
    amplitude: float = 0.3
    noise_snr_db: float = 40.0
    min_symbols: int = 3
    max_symbols: int = 8
    master_seed: int = 0

    def symbol_names(self) -> tuple[str, ...]:
        return tuple(f"s{i}" for i in range(self.n_symbols))

    def tone_pair(self, i: int) -> tuple[float, float]:
        return 500.0 + 150.0 * i, 1200.0 + 100.0 * i


@dataclass
class ManifestEntry:
    path: str
    transcript: str
    split: str


@dataclass
class DatasetManifest:
    format_version: int
    spec: SynthSpec
    entries: list[ManifestEntry]

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]


def _utterance_rng(spec: SynthSpec, index: int) -> np.random.Generator:
    return np.random.default_rng([spec.master_seed, index])


def synth_utterance(spec: SynthSpec, utterance_index: int) -> tuple[AudioBuffer, np.ndarray]:
    """Deterministic waveform plus its token sequence (indices in [1, K])."""
    rng = _utterance_rng(spec, utterance_index)
    sr = spec.sample_rate
    n_tokens = int(rng.integers(spec.min_symbols, spec.max_symbols + 1))
    symbols = rng.integers(0, spec.n_symbols, n_tokens)

    sil = int(round(spec.silence_s * sr))
    sym = int(round(spec.symbol_s * sr))
    gap = int(round(spec.gap_s * sr))
    total = 2 * sil + n_tokens * sym + (n_tokens - 1) * gap

    wave = np.zeros(total)
    t = np.arange(sym) / sr
    pos = sil
    for i, s in enumerate(symbols):
        f1, f2 = spec.tone_pair(int(s))
        tone = 0.5 * spec.amplitude * (
            np.sin(2 * np.pi * f1 * t) + np.sin(2 * np.pi * f2 * t)
        )
        wave[pos : pos + sym] = tone
        pos += sym + gap

    # background at noise_snr_db below the tonal content, uniform white
    signal_power = float(np.mean(wave**2))
    noise_power = signal_power * 10.0 ** (-spec.noise_snr_db / 10.0)
    noise = rng.uniform(-1.0, 1.0, total)
    noise *= np.sqrt(noise_power / np.mean(noise**2))
    wave += noise

    tokens = np.asarray(symbols, dtype=np.int64) + 1
    return AudioBuffer(wave, sr), tokens


def transcript_for(spec: SynthSpec, tokens) -> str:
    names = spec.symbol_names()
    return " ".join(names[int(t) - 1] for t in tokens)


def synth_dataset(spec: SynthSpec, n_train: int, n_test: int, out_dir) -> DatasetManifest:
    """Write n_train + n_test WAVs plus manifest.json, reproducible from the seed."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for index in range(n_train + n_test):
        audio, tokens = synth_utterance(spec, index)
        split = "train" if index < n_train else "test"
        rel = f"utt_{index:05d}.wav"
        write_wav(audio, os.path.join(out_dir, rel))
        entries.append(ManifestEntry(path=rel, transcript=transcript_for(spec, tokens), split=split))
    manifest = DatasetManifest(
        format_version=MANIFEST_FORMAT_VERSION, spec=spec, entries=entries
    )
    save_manifest(manifest, os.path.join(out_dir, MANIFEST_NAME))
    return manifest


def save_manifest(manifest: DatasetManifest, path) -> None:
    payload = {
        "format_version": manifest.format_version,
        "spec": asdict(manifest.spec),
        "entries": [asdict(e) for e in manifest.entries],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def load_manifest(path) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise SynthError(f"unsupported manifest format {payload.get('format_version')!r}")
    entries = [ManifestEntry(**e) for e in payload["entries"]]
    if not entries:
        raise SynthError("manifest has no entries")
    if len({e.path for e in entries}) != len(entries):
        raise SynthError("manifest entry paths are not unique")
    if any(not e.transcript.strip() for e in entries):
        raise SynthError("manifest contains an empty transcript")
    return DatasetManifest(
        format_version=payload["format_version"],
        spec=SynthSpec(**payload["spec"]),
        entries=entries,
    )
