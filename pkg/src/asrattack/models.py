"""Toy differentiable CTC recognizers with hand-written backward passes.

Two deliberately different architectures act as source/target models
in transfer experiments:

* linA  -- stack of 3 adjacent frames (edges replicate) -> affine -> log-softmax
* convB -- 1-D conv over frames (kernel 5, 64 channels, edge replication)
           -> ReLU -> affine -> log-softmax
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix

MODEL_FORMAT_VERSION = 1
N_MELS = 80
CONV_KERNEL = 5
CONV_CHANNELS = 64
INIT_SCALE = 0.05

ARCHITECTURES = ("linA", "convB")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token symbols; class 0 is the CTC blank, tokens are 1..K."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if len(self.symbols) < 2:
            raise ModelError("vocabulary needs at least 2 symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise ModelError("vocabulary symbols must be distinct")

    @property
    def n_classes(self) -> int:
        return len(self.symbols) + 1

    def encode(self, transcript: str) -> np.ndarray:
        """Space-separated symbol names -> token indices in [1, K]."""
        index = {sym: i + 1 for i, sym in enumerate(self.symbols)}
        try:
            return np.array([index[w] for w in transcript.split()], dtype=np.int64)
        except KeyError as exc:
            raise ModelError(f"unknown symbol {exc.args[0]!r}") from exc

    def decode(self, tokens) -> str:
        return " ".join(self.symbols[int(t) - 1] for t in tokens)


@dataclass(eq=False)
class ToyModelParams:
    arch_id: str
    vocabulary: Vocabulary
    weights: dict[str, np.ndarray]
    seed: int = 0

    def __post_init__(self):
        expected = weight_shapes(self.arch_id, self.vocabulary.n_classes)
        got = {k: v.shape for k, v in self.weights.items()}
        if got != expected:
            raise ModelError(f"weight shapes {got} do not match {expected}")
        for name, w in self.weights.items():
            if not np.all(np.isfinite(w)):
                raise ModelError(f"non-finite values in weight {name!r}")

    def copy(self) -> "ToyModelParams":
        return ToyModelParams(
            arch_id=self.arch_id,
            vocabulary=self.vocabulary,
            weights={k: v.copy() for k, v in self.weights.items()},
            seed=self.seed,
        )


def weight_shapes(arch_id: str, n_classes: int) -> dict[str, tuple[int, ...]]:
    if arch_id == "linA":
        return {"w": (3 * N_MELS, n_classes), "b": (n_classes,)}
    if arch_id == "convB":
        return {
            "kernel": (CONV_KERNEL, N_MELS, CONV_CHANNELS),
            "kbias": (CONV_CHANNELS,),
            "w": (CONV_CHANNELS, n_classes),
            "b": (n_classes,),
        }
    raise ModelError(f"unknown architecture {arch_id!r}")


def init_model(arch_id: str, vocabulary: Vocabulary, seed: int) -> ToyModelParams:
    """Seeded uniform [-0.05, 0.05] initialization, one draw order per arch."""
    rng = np.random.default_rng(seed)
    weights = {
        name: rng.uniform(-INIT_SCALE, INIT_SCALE, shape)
        for name, shape in weight_shapes(arch_id, vocabulary.n_classes).items()
    }
    return ToyModelParams(arch_id=arch_id, vocabulary=vocabulary, weights=weights, seed=seed)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    zmax = z.max(axis=1, keepdims=True)
    return z - zmax - np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))


def _log_softmax_vjp(z: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    p = np.exp(_log_softmax(z))
    return upstream - p * upstream.sum(axis=1, keepdims=True)


def _stack_context(x: np.ndarray) -> np.ndarray:
    prev = np.vstack([x[:1], x[:-1]])
    nxt = np.vstack([x[1:], x[-1:]])
    return np.hstack([prev, x, nxt])


def _stack_context_vjp(d_stacked: np.ndarray) -> np.ndarray:
    n = N_MELS
    d_prev, d_mid, d_next = d_stacked[:, :n], d_stacked[:, n : 2 * n], d_stacked[:, 2 * n :]
    grad = d_mid.copy()
    grad[0] += d_prev[0]
    grad[:-1] += d_prev[1:]
    grad[-1] += d_next[-1]
    grad[1:] += d_next[:-1]
    return grad


def _pad_edges(x: np.ndarray, pad: int) -> np.ndarray:
    return np.vstack([np.repeat(x[:1], pad, axis=0), x, np.repeat(x[-1:], pad, axis=0)])


def _conv_forward(x: np.ndarray, kernel: np.ndarray, kbias: np.ndarray) -> np.ndarray:
    pad = CONV_KERNEL // 2
    padded = _pad_edges(x, pad)
    n = x.shape[0]
    h = np.zeros((n, CONV_CHANNELS))
    for dt in range(CONV_KERNEL):
        h += padded[dt : dt + n] @ kernel[dt]
    return h + kbias


def _check_features(params: ToyModelParams, features: FeatureMatrix) -> np.ndarray:
    x = np.asarray(features.values, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != N_MELS:
        raise ModelError(f"expected frames x {N_MELS} features, got {x.shape}")
    if x.shape[0] < 1:
        raise ModelError("need at least one frame")
    return x


def model_forward(params: ToyModelParams, features: FeatureMatrix) -> np.ndarray:
    """frames x n_classes log-probabilities (rows log-sum-exp to 0)."""
    x = _check_features(params, features)
    w = params.weights
    if params.arch_id == "linA":
        z = _stack_context(x) @ w["w"] + w["b"]
    else:
        h = _conv_forward(x, w["kernel"], w["kbias"])
        z = np.maximum(h, 0.0) @ w["w"] + w["b"]
    return _log_softmax(z)


def model_input_vjp(
    params: ToyModelParams,
    features: FeatureMatrix,
    upstream: np.ndarray,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Exact adjoint of model_forward w.r.t. features and every weight tensor."""
    x = _check_features(params, features)
    upstream = np.asarray(upstream, dtype=np.float64)
    w = params.weights
    n_classes = params.vocabulary.n_classes
    if upstream.shape != (x.shape[0], n_classes):
        raise ModelError(
            f"upstream shape {upstream.shape} != {(x.shape[0], n_classes)}"
        )

    if params.arch_id == "linA":
        stacked = _stack_context(x)
        z = stacked @ w["w"] + w["b"]
        dz = _log_softmax_vjp(z, upstream)
        grads = {"w": stacked.T @ dz, "b": dz.sum(axis=0)}
        grad_x = _stack_context_vjp(dz @ w["w"].T)
        return grad_x, grads

    pad = CONV_KERNEL // 2
    padded = _pad_edges(x, pad)
    n = x.shape[0]
    h = _conv_forward(x, w["kernel"], w["kbias"])
    r = np.maximum(h, 0.0)
    z = r @ w["w"] + w["b"]
    dz = _log_softmax_vjp(z, upstream)
    dr = dz @ w["w"].T
    dh = dr * (h > 0.0)
    d_kernel = np.zeros_like(w["kernel"])
    d_padded = np.zeros_like(padded)
    for dt in range(CONV_KERNEL):
        d_kernel[dt] = padded[dt : dt + n].T @ dh
        d_padded[dt : dt + n] += dh @ w["kernel"][dt].T
    grad_x = d_padded[pad : pad + n].copy()
    grad_x[0] += d_padded[:pad].sum(axis=0)
    grad_x[-1] += d_padded[pad + n :].sum(axis=0)
    grads = {
        "kernel": d_kernel,
        "kbias": dh.sum(axis=0),
        "w": r.T @ dz,
        "b": dz.sum(axis=0),
    }
    return grad_x, grads


def greedy_decode(logits: np.ndarray) -> np.ndarray:
    """Per-frame argmax, collapse repeats, drop blanks. Ties go to the lower index."""
    best = np.argmax(logits, axis=1)
    out = []
    prev = -1
    for k in best:
        if k != prev and k != 0:
            out.append(int(k))
        prev = k
    return np.array(out, dtype=np.int64)


def save_model(params: ToyModelParams, path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "arch_id": params.arch_id,
        "vocabulary": list(params.vocabulary.symbols),
        "training_seed": params.seed,
        "weights": {
            name: {"shape": list(w.shape), "data": w.ravel(order="C").tolist()}
            for name, w in params.weights.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path) -> ToyModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelError(f"unsupported model format {payload.get('format_version')!r}")
    weights = {
        name: np.array(spec["data"], dtype=np.float64).reshape(spec["shape"], order="C")
        for name, spec in payload["weights"].items()
    }
    return ToyModelParams(
        arch_id=payload["arch_id"],
        vocabulary=Vocabulary(tuple(payload["vocabulary"])),
        weights=weights,
        seed=int(payload["training_seed"]),
    )
