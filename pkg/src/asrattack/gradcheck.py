"""Central finite-difference checks for every hand-written backward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .ctc import ctc_loss_and_grad
from .features import FeatureMatrix, SpectrogramConfig, extract_features, features_vjp
from .models import Vocabulary, init_model, model_forward, model_input_vjp
from .attacks import time_domain_loss_and_gradient

FD_STEP = 1e-5


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    seed: int
    rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.rel_err <= self.tol


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / denom)


def fd_gradient(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Per-coordinate central differences of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xf = x.copy().ravel()
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + step
        up = f(xf.reshape(x.shape))
        xf[i] = orig - step
        down = f(xf.reshape(x.shape))
        xf[i] = orig
        flat[i] = (up - down) / (2 * step)
    return grad


def fd_directional(f, x: np.ndarray, direction: np.ndarray, step: float = FD_STEP) -> float:
    d = direction / np.linalg.norm(direction)
    return float((f(x + step * d) - f(x - step * d)) / (2 * step))


def _random_audio(rng: np.random.Generator, lo=1600, hi=4000) -> AudioBuffer:
    n = int(rng.integers(lo, hi + 1))
    return AudioBuffer(rng.uniform(-0.5, 0.5, n), 16000)


def check_features_vjp(seed: int, tol: float = 1e-4) -> CheckOutcome:
    rng = np.random.default_rng(seed)
    config = SpectrogramConfig()
    audio = _random_audio(rng)
    n_frames = 1 + (len(audio.samples) - config.frame_length) // config.hop
    upstream = rng.standard_normal((n_frames, config.n_mels))

    def objective(x):
        return float(
            np.sum(upstream * extract_features(AudioBuffer(x, 16000), config).values)
        )

    got = features_vjp(audio, config, upstream)
    want = fd_gradient(objective, audio.samples)
    return CheckOutcome("features_vjp", seed, rel_error(got, want), tol)


def _random_ctc_case(rng: np.random.Generator):
    K = int(rng.integers(2, 4))
    T = int(rng.integers(3, 7))
    max_len = min(T, 4)
    L = int(rng.integers(1, max_len + 1))
    target = rng.integers(1, K + 1, L)
    # resample until CTC-feasible
    while len(target) + int(np.sum(target[1:] == target[:-1])) > T:
        target = rng.integers(1, K + 1, L)
    z = rng.standard_normal((T, K + 1))
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return log_probs, target


def check_ctc_grad(seed: int, tol: float = 1e-5) -> CheckOutcome:
    rng = np.random.default_rng(seed)
    log_probs, target = _random_ctc_case(rng)
    _, got = ctc_loss_and_grad(log_probs, target)
    want = fd_gradient(lambda y: ctc_loss_and_grad(y, target)[0], log_probs)
    return CheckOutcome("ctc_grad", seed, rel_error(got, want), tol)


def _random_model_case(rng: np.random.Generator, arch_id: str):
    vocab = Vocabulary(tuple(f"s{i}" for i in range(int(rng.integers(2, 6)))))
    params = init_model(arch_id, vocab, int(rng.integers(0, 2**31)))
    n_frames = int(rng.integers(6, 13))
    feats = FeatureMatrix(
        values=rng.uniform(-12.0, 8.0, (n_frames, 80)), frame_length=400, hop=160
    )
    upstream = rng.standard_normal((n_frames, vocab.n_classes))
    return params, feats, upstream


def check_model_vjp(seed: int, arch_id: str, tol: float = 1e-4) -> CheckOutcome:
    rng = np.random.default_rng(seed)
    params, feats, upstream = _random_model_case(rng, arch_id)
    grad_x, grad_w = model_input_vjp(params, feats, upstream)

    def objective_features(values):
        f = FeatureMatrix(values=values, frame_length=400, hop=160)
        return float(np.sum(upstream * model_forward(params, f)))

    errs = [rel_error(grad_x, fd_gradient(objective_features, feats.values))]

    # weight tensors via directional probes (kernels are too big per-coordinate)
    for name in params.weights:
        for _ in range(2):
            direction = rng.standard_normal(params.weights[name].shape)
            direction /= np.linalg.norm(direction)

            def objective_weight(w):
                probe = params.copy()
                probe.weights[name] = w
                return float(np.sum(upstream * model_forward(probe, feats)))

            fd = fd_directional(objective_weight, params.weights[name], direction)
            an = float(np.sum(grad_w[name] * direction))
            errs.append(abs(fd - an) / max(abs(fd), abs(an), 1e-300))
    return CheckOutcome(f"model_vjp[{arch_id}]", seed, max(errs), tol)


def check_chain(seed: int, arch_id: str, tol: float = 1e-4) -> CheckOutcome:
    """Full time-domain gradient vs directional finite differences of the loss."""
    rng = np.random.default_rng(seed)
    vocab = Vocabulary(tuple(f"s{i}" for i in range(4)))
    params = init_model(arch_id, vocab, int(rng.integers(0, 2**31)))
    audio = _random_audio(rng, lo=1600, hi=2400)
    target = rng.integers(1, 5, 2)
    epsilon = rng.uniform(-0.002, 0.002, len(audio.samples))

    def loss_at(eps):
        return time_domain_loss_and_gradient(params, audio, eps, target)[0]

    _, grad = time_domain_loss_and_gradient(params, audio, epsilon, target)
    errs = []
    for _ in range(3):
        direction = rng.standard_normal(len(epsilon))
        direction /= np.linalg.norm(direction)
        fd = fd_directional(loss_at, epsilon, direction)
        an = float(grad @ direction)
        errs.append(abs(fd - an) / max(abs(fd), abs(an), 1e-300))
    return CheckOutcome(f"chain[{arch_id}]", seed, max(errs), tol)


def run_all(cases: int = 20, tol: float = 1e-4, seed: int = 0) -> list[CheckOutcome]:
    outcomes = []
    for i in range(cases):
        outcomes.append(check_features_vjp(seed + i, tol))
        outcomes.append(check_ctc_grad(seed + i, min(tol, 1e-5)))
        arch = "linA" if i % 2 == 0 else "convB"
        outcomes.append(check_model_vjp(seed + i, arch, tol))
        outcomes.append(check_chain(seed + i, arch, tol))
    return outcomes
