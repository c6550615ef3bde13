"""Minibatch SGD trainer for the toy recognizers."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, read_wav
from .ctc import ctc_loss_and_grad
from .features import FeatureMatrix, SpectrogramConfig, extract_features
from .models import (
    ToyModelParams,
    Vocabulary,
    greedy_decode,
    init_model,
    model_forward,
    model_input_vjp,
)
from .synth import DatasetManifest, load_manifest


class TrainingError(RuntimeError):
    pass


@dataclass
class Utterance:
    utt_id: str
    audio: AudioBuffer
    tokens: np.ndarray
    split: str


@dataclass
class TrainReport:
    arch_id: str
    seed: int
    epochs: int
    learning_rate: float
    batch_size: int
    epoch_losses: list[float]
    train_wer: float
    test_wer: float


def load_utterances(manifest: DatasetManifest | str | os.PathLike, base_dir=None) -> tuple[list[Utterance], Vocabulary]:
    """Materialize a manifest into audio + token sequences."""
    if not isinstance(manifest, DatasetManifest):
        base_dir = os.path.dirname(os.fspath(manifest))
        manifest = load_manifest(manifest)
    if base_dir is None:
        raise TrainingError("base_dir required when passing a loaded manifest")
    vocab = Vocabulary(manifest.spec.symbol_names())
    utts = [
        Utterance(
            utt_id=os.path.splitext(e.path)[0],
            audio=read_wav(os.path.join(base_dir, e.path)),
            tokens=vocab.encode(e.transcript),
            split=e.split,
        )
        for e in manifest.entries
    ]
    return utts, vocab


def dataset_wer(params: ToyModelParams, utts: list[Utterance], config: SpectrogramConfig = SpectrogramConfig()) -> float:
    """Corpus-pooled WER (percent) of greedy decodes against references."""
    from .evaluate import pooled_wer

    pairs = []
    for u in utts:
        logits = model_forward(params, extract_features(u.audio, config))
        pairs.append((u.tokens, greedy_decode(logits)))
    return pooled_wer(pairs)


def train_model(
    dataset: DatasetManifest | str | os.PathLike,
    arch_id: str,
    seed: int,
    epochs: int = 20,
    learning_rate: float = 0.1,
    batch_size: int = 8,
    base_dir=None,
    config: SpectrogramConfig = SpectrogramConfig(),
) -> tuple[ToyModelParams, TrainReport]:
    """Minibatch gradient descent on the mean CTC loss.

    Each utterance's CTC negative log-likelihood is normalized by its
    frame count before batch averaging, so the step size is insensitive
    to utterance length. Deterministic given the seed: initialization
    and the per-epoch shuffle schedule both derive from it. Divergence
    (non-finite loss) raises TrainingError.
    """
    utts, vocab = load_utterances(dataset, base_dir=base_dir)
    train = [u for u in utts if u.split == "train"]
    test = [u for u in utts if u.split == "test"]
    if not train:
        raise TrainingError("dataset has no training split")

    feats: list[FeatureMatrix] = [extract_features(u.audio, config) for u in train]
    params = init_model(arch_id, vocab, seed)
    shuffle_rng = np.random.default_rng([seed, 0xD1CE])

    epoch_losses = []
    for _epoch in range(epochs):
        order = shuffle_rng.permutation(len(train))
        running = 0.0
        for lo in range(0, len(order), batch_size):
            batch = order[lo : lo + batch_size]
            grads = {k: np.zeros_like(v) for k, v in params.weights.items()}
            batch_loss = 0.0
            for j in batch:
                logits = model_forward(params, feats[j])
                loss, d_logprob = ctc_loss_and_grad(logits, train[j].tokens)
                n_frames = logits.shape[0]
                _, d_params = model_input_vjp(params, feats[j], d_logprob / n_frames)
                for k in grads:
                    grads[k] += d_params[k]
                batch_loss += loss / n_frames
            if not np.isfinite(batch_loss):
                raise TrainingError(f"training diverged (non-finite loss) at epoch {_epoch}")
            scale = learning_rate / len(batch)
            for k in grads:
                params.weights[k] -= scale * grads[k]
            running += batch_loss
        epoch_losses.append(running / len(train))

    report = TrainReport(
        arch_id=arch_id,
        seed=seed,
        epochs=epochs,
        learning_rate=learning_rate,
        batch_size=batch_size,
        epoch_losses=epoch_losses,
        train_wer=dataset_wer(params, train, config),
        test_wer=dataset_wer(params, test, config) if test else float("nan"),
    )
    return params, report
