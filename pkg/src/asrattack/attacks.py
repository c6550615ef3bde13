"""Iterative time-domain attacks: PGD, SAGO, MI-FGSM, VMI-FGSM.

All four share one exact l-inf projection, one loss->waveform gradient
chain, and one run loop. Attacks ascend the CTC loss of the ground-truth
transcript (untargeted). SAGO element-wise masks the gradient with a
voice-activity mask computed once at attack initialization; MI-FGSM
accumulates l1-normalized gradient momentum; VMI-FGSM additionally
tunes each gradient with a variance term estimated from seeded samples
around the previous iterate.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .audio import AudioBuffer, ATTACK_SAMPLE_RATE, snr_db, signal_power
from .ctc import ctc_loss_and_grad
from .features import SpectrogramConfig, extract_features, features_vjp
from .models import ToyModelParams, model_forward, model_input_vjp
from .vad import VadConfig, VadMask, apply_mask, compute_vad_mask

METHODS = ("pgd", "sago", "mifgsm", "vmifgsm")


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    method: str = "pgd"
    xi: float = 0.002
    steps: int = 50
    alpha: float | None = None  # None -> 2.5 * xi / steps
    norm_p: float = math.inf
    momentum_decay: float = 1.0
    variance_samples: int = 5
    variance_radius_factor: float = 1.5
    seed: int = 0
    random_start: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise AttackError(f"unknown method {self.method!r}; pick from {METHODS}")
        if self.xi <= 0:
            raise AttackError("xi must be positive")
        if self.steps < 0:
            raise AttackError("steps must be >= 0")
        if self.variance_samples < 0:
            raise AttackError("variance_samples must be >= 0")
        if not math.isinf(self.norm_p):
            raise AttackError("only the l-infinity constraint is implemented")
        if self.alpha is not None and self.alpha <= 0:
            raise AttackError("alpha must be positive")

    @property
    def step_size(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return 2.5 * self.xi / max(self.steps, 1)

    @property
    def variance_radius(self) -> float:
        return self.variance_radius_factor * self.xi


@dataclass(eq=False)
class AttackState:
    epsilon: np.ndarray
    momentum: np.ndarray
    variance: np.ndarray
    iteration: int = 0


@dataclass(eq=False)
class AttackResult:
    adversarial: AudioBuffer
    epsilon: np.ndarray
    loss_trace: list[float]
    snr_db: float | None
    config: AttackConfig
    vad_fallback: bool | None = None

    def to_json(self) -> str:
        cfg = {
            "method": self.config.method,
            "xi": self.config.xi,
            "alpha": self.config.step_size,
            "steps": self.config.steps,
            "norm_p": "inf",
            "momentum_decay": self.config.momentum_decay,
            "variance_samples": self.config.variance_samples,
            "variance_radius_factor": self.config.variance_radius_factor,
            "seed": self.config.seed,
            "random_start": self.config.random_start,
        }
        return json.dumps(
            {
                "config": cfg,
                "loss_trace": self.loss_trace,
                "snr_db": self.snr_db,
                "vad_fallback": self.vad_fallback,
                "max_abs_epsilon": float(np.max(np.abs(self.epsilon))) if len(self.epsilon) else 0.0,
            }
        )


def project_linf(epsilon: np.ndarray, xi: float) -> np.ndarray:
    """Coordinate-wise clamp to [-xi, xi]: the exact l-inf projection."""
    if xi <= 0:
        raise AttackError("xi must be positive")
    return np.clip(np.asarray(epsilon, dtype=np.float64), -xi, xi)


def time_domain_loss_and_gradient(
    model: ToyModelParams,
    clean: AudioBuffer,
    epsilon: np.ndarray,
    target: np.ndarray,
    mask: VadMask | None = None,
    config: SpectrogramConfig = SpectrogramConfig(),
) -> tuple[float, np.ndarray]:
    """CTC loss at x + epsilon and its gradient w.r.t. epsilon.

    Chain: CTC grad -> model input VJP -> feature VJP back to samples;
    the mask, when given, multiplies the sample gradient element-wise.
    """
    perturbed = AudioBuffer(clean.samples + np.asarray(epsilon, dtype=np.float64), clean.sample_rate)
    feats = extract_features(perturbed, config)
    logits = model_forward(model, feats)
    loss, d_logprob = ctc_loss_and_grad(logits, target)
    d_feats, _ = model_input_vjp(model, feats, d_logprob)
    grad = features_vjp(perturbed, config, d_feats)
    if mask is not None:
        grad = apply_mask(grad, mask)
    return loss, grad


def time_domain_gradient(
    model: ToyModelParams,
    clean: AudioBuffer,
    epsilon: np.ndarray,
    target: np.ndarray,
    mask: VadMask | None = None,
    config: SpectrogramConfig = SpectrogramConfig(),
) -> np.ndarray:
    return time_domain_loss_and_gradient(model, clean, epsilon, target, mask, config)[1]


def _sign(g: np.ndarray) -> np.ndarray:
    return np.sign(g)  # sign(0) = 0


def attack_step(
    state: AttackState,
    gradient: np.ndarray,
    config: AttackConfig,
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> AttackState:
    """One perturbation update; grad_fn is required only for VMI-FGSM sampling."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != state.epsilon.shape:
        raise AttackError(f"gradient shape {g.shape} != epsilon shape {state.epsilon.shape}")
    if not np.all(np.isfinite(g)):
        raise AttackError("non-finite gradient")
    alpha, xi = config.step_size, config.xi

    if config.method in ("pgd", "sago"):
        epsilon = project_linf(state.epsilon + alpha * _sign(g), xi)
        return AttackState(epsilon, state.momentum, state.variance, state.iteration + 1)

    if config.method == "mifgsm":
        momentum = config.momentum_decay * state.momentum
        l1 = np.abs(g).sum()
        if l1 > 0.0:
            momentum = momentum + g / l1
        epsilon = project_linf(state.epsilon + alpha * _sign(momentum), xi)
        return AttackState(epsilon, momentum, state.variance, state.iteration + 1)

    # vmifgsm
    g_tuned = g + state.variance
    momentum = config.momentum_decay * state.momentum
    l1 = np.abs(g_tuned).sum()
    if l1 > 0.0:
        momentum = momentum + g_tuned / l1
    epsilon = project_linf(state.epsilon + alpha * _sign(momentum), xi)
    variance = state.variance
    if config.variance_samples > 0:
        if grad_fn is None:
            raise AttackError("vmifgsm with variance_samples > 0 needs grad_fn")
        # neighborhood of the pre-update iterate, per the carried-state scheme
        rng = np.random.default_rng([config.seed, state.iteration, 0x7A2])
        radius = config.variance_radius
        acc = np.zeros_like(g)
        for _ in range(config.variance_samples):
            r = rng.uniform(-radius, radius, g.shape)
            acc += grad_fn(state.epsilon + r)
        variance = acc / config.variance_samples - g
    return AttackState(epsilon, momentum, variance, state.iteration + 1)


def run_attack(
    model: ToyModelParams,
    clean: AudioBuffer,
    target: np.ndarray,
    config: AttackConfig,
    vad_mask: VadMask | None = None,
    vad_config: VadConfig = VadConfig(),
    spec_config: SpectrogramConfig = SpectrogramConfig(),
    on_iteration: Callable[[AttackState], None] | None = None,
) -> AttackResult:
    """Run the configured attack for config.steps iterations.

    SAGO computes its VAD mask once at initialization (vad_mask, when
    given, overrides the detector). The final waveform is x + epsilon
    amplitude-clamped to [-1, 1].
    """
    if len(clean.samples) == 0:
        raise AttackError("empty audio buffer")
    if clean.sample_rate != ATTACK_SAMPLE_RATE:
        raise AttackError(
            f"attack path requires {ATTACK_SAMPLE_RATE} Hz audio, got {clean.sample_rate}"
        )
    target = np.asarray(target, dtype=np.int64)

    mask = None
    fallback = None
    if config.method == "sago":
        mask = vad_mask if vad_mask is not None else compute_vad_mask(clean, vad_config)
        fallback = bool(mask.fallback_flag)
        if fallback:
            warnings.warn("VAD found no speech; SAGO degrades to PGD on this utterance")

    n = len(clean.samples)
    if config.random_start:
        rng = np.random.default_rng([config.seed, 0x5EED])
        epsilon = rng.uniform(-config.xi, config.xi, n)
    else:
        epsilon = np.zeros(n)
    state = AttackState(
        epsilon=epsilon, momentum=np.zeros(n), variance=np.zeros(n), iteration=0
    )

    def grad_fn(eps: np.ndarray) -> np.ndarray:
        return time_domain_gradient(model, clean, eps, target, mask, spec_config)

    trace = []
    for _ in range(config.steps):
        loss, g = time_domain_loss_and_gradient(
            model, clean, state.epsilon, target, mask, spec_config
        )
        trace.append(loss)
        state = attack_step(state, g, config, grad_fn)
        if on_iteration is not None:
            on_iteration(state)

    adversarial = AudioBuffer(
        np.clip(clean.samples + state.epsilon, -1.0, 1.0), clean.sample_rate
    )
    snr = snr_db(clean, state.epsilon) if signal_power(state.epsilon) > 0 else None
    return AttackResult(
        adversarial=adversarial,
        epsilon=state.epsilon,
        loss_trace=trace,
        snr_db=snr,
        config=config,
        vad_fallback=fallback,
    )
