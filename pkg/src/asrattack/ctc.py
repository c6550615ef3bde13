"""CTC negative log-likelihood with hand-derived gradient.

Loss and gradient are computed with the standard alpha-beta dynamic
program over blank-augmented label states, entirely in log space. The
gradient is taken with respect to the per-frame log-probability matrix
treated as free variables; composition through log-softmax belongs to
the model's backward pass.
"""

from __future__ import annotations

import numpy as np

NEG_INF = -np.inf
BLANK = 0


class CtcError(ValueError):
    pass


def _count_repeats(target: np.ndarray) -> int:
    if len(target) < 2:
        return 0
    return int(np.sum(target[1:] == target[:-1]))


def min_frames_for(target) -> int:
    """Shortest logit sequence that can align to the target."""
    target = np.asarray(target, dtype=np.int64)
    return len(target) + _count_repeats(target)


def ctc_loss_and_grad(log_probs: np.ndarray, target) -> tuple[float, np.ndarray]:
    """Return (-log P(target | log_probs), d loss / d log_probs).

    target holds token indices in [1, K]; blank is class 0 and never
    appears in the target itself.
    """
    y = np.asarray(log_probs, dtype=np.float64)
    target = np.asarray(target, dtype=np.int64)
    T, n_classes = y.shape
    if len(target) > 0 and (target.min() < 1 or target.max() >= n_classes):
        raise CtcError("target indices must lie in [1, n_classes-1]")
    if T < min_frames_for(target):
        raise CtcError(
            f"{T} frames cannot align to target of length {len(target)} "
            f"with {_count_repeats(target)} adjacent repeats"
        )

    L = len(target)
    S = 2 * L + 1
    labels = np.zeros(S, dtype=np.int64)
    labels[1::2] = target

    # skip transition s-2 -> s is legal unless s is a blank state or repeats
    # the label two states back
    can_skip = np.zeros(S, dtype=bool)
    if S > 2:
        can_skip[2:] = labels[2:] != BLANK
        can_skip[2:] &= labels[2:] != labels[:-2]

    emit = y[:, labels]  # (T, S) log-prob of each state's label per frame

    log_alpha = np.full((T, S), NEG_INF)
    log_alpha[0, 0] = emit[0, 0]
    if S > 1:
        log_alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = log_alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(
            can_skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:]
        )
        log_alpha[t] = acc + emit[t]

    if S > 1:
        log_p = np.logaddexp(log_alpha[T - 1, S - 1], log_alpha[T - 1, S - 2])
    else:
        log_p = log_alpha[T - 1, S - 1]
    if not np.isfinite(log_p):
        raise CtcError("target has zero probability under the given log-probs")

    # beta excludes the emission at t, so alpha_t(s) * beta_t(s) sums to P
    log_beta = np.full((T, S), NEG_INF)
    log_beta[T - 1, S - 1] = 0.0
    if S > 1:
        log_beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = log_beta[t + 1] + emit[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        if S > 2:
            acc[:-2] = np.where(
                can_skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2]
            )
        log_beta[t] = acc

    occupancy = log_alpha + log_beta  # (T, S), log of path mass through (t, s)
    grad_log = np.full((T, n_classes), NEG_INF)
    for s in range(S):
        k = labels[s]
        grad_log[:, k] = np.logaddexp(grad_log[:, k], occupancy[:, s])
    grad = -np.exp(grad_log - log_p)

    return float(-log_p), grad
