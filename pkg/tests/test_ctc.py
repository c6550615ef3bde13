import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asrattack.ctc import CtcError, ctc_loss_and_grad, min_frames_for


def brute_force_ctc(log_probs, target):
    """Sum the probability of every frame-level path that collapses to the
    target: the exhaustive oracle for small T and K."""
    T, C = log_probs.shape
    target = list(target)
    total = 0.0
    for path in itertools.product(range(C), repeat=T):
        collapsed = []
        prev = None
        for k in path:
            if k != prev and k != 0:
                collapsed.append(k)
            prev = k
        if collapsed == target:
            total += float(np.exp(sum(log_probs[t, k] for t, k in enumerate(path))))
    return -np.log(total)


def _uniform_log_probs(T, n_classes):
    return np.full((T, n_classes), -np.log(n_classes))


def test_single_frame_single_token():
    # T=1, K=1, uniform: the only alignment is the token itself, P = 0.5
    loss, grad = ctc_loss_and_grad(_uniform_log_probs(1, 2), [1])
    assert loss == pytest.approx(-np.log(0.5), abs=1e-12)
    assert grad[0, 1] == pytest.approx(-1.0, abs=1e-12)
    assert grad[0, 0] == 0.0


def test_two_frames_three_alignments():
    # P = P(aa) + P(a, blank) + P(blank, a) = 0.75 with uniform 0.5 probs
    loss, _ = ctc_loss_and_grad(_uniform_log_probs(2, 2), [1])
    assert loss == pytest.approx(-np.log(0.75), abs=1e-12)
    assert loss == pytest.approx(0.2877, abs=1e-4)


def test_infeasible_target_rejected():
    with pytest.raises(CtcError, match="cannot align"):
        ctc_loss_and_grad(_uniform_log_probs(2, 3), [1, 1])  # repeat needs 3 frames
    with pytest.raises(CtcError, match="cannot align"):
        ctc_loss_and_grad(_uniform_log_probs(1, 3), [1, 2])


def test_min_frames_counts_repeats():
    assert min_frames_for([1, 2, 3]) == 3
    assert min_frames_for([1, 1, 2]) == 4
    assert min_frames_for([2, 2, 2]) == 5


def test_bad_target_index_rejected():
    with pytest.raises(CtcError, match="indices"):
        ctc_loss_and_grad(_uniform_log_probs(3, 3), [0])
    with pytest.raises(CtcError, match="indices"):
        ctc_loss_and_grad(_uniform_log_probs(3, 3), [3])


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_loss_matches_brute_force_enumeration(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 4))
    T = int(rng.integers(1, 7))
    L = int(rng.integers(1, min(T, 4) + 1))
    target = rng.integers(1, K + 1, L)
    if len(target) + int(np.sum(target[1:] == target[:-1])) > T:
        return
    z = rng.standard_normal((T, K + 1))
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss, _ = ctc_loss_and_grad(log_probs, target)
    assert loss >= 0.0 or loss == pytest.approx(0.0, abs=1e-12)
    assert loss == pytest.approx(brute_force_ctc(log_probs, target), rel=1e-9)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_grad_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 4))
    T = int(rng.integers(2, 7))
    target = rng.integers(1, K + 1, int(rng.integers(1, 3)))
    if len(target) + int(np.sum(target[1:] == target[:-1])) > T:
        return
    z = rng.standard_normal((T, K + 1))
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    _, grad = ctc_loss_and_grad(log_probs, target)

    step = 1e-5
    fd = np.zeros_like(log_probs)
    for t in range(T):
        for k in range(K + 1):
            up = log_probs.copy()
            up[t, k] += step
            down = log_probs.copy()
            down[t, k] -= step
            fd[t, k] = (
                ctc_loss_and_grad(up, target)[0] - ctc_loss_and_grad(down, target)[0]
            ) / (2 * step)
    denom = max(np.linalg.norm(fd), 1e-300)
    assert np.linalg.norm(grad - fd) / denom < 1e-5
