"""The four training losses: binary cross-entropy, BPR, and the two DPP
set-likelihood losses (plain and conditional).

Each loss returns its value together with the gradient w.r.t. the instance's
score vector, so any scorer can backpropagate through it.  Score vectors are
ordered to match the instance's ground set: previous items (conditional loss
only), then targets, then negatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import (
    DiversityKernelLowRank,
    GroundSet,
    QualityVector,
    build_sequence_kernel,
    cdsl_log_likelihood,
    dsl_log_likelihood,
    grad_quality,
)


@dataclass
class LossResult:
    value: float
    grad_scores: np.ndarray
    skipped: bool = False


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    # -softplus(-x), stable for large |x|
    return -np.logaddexp(0.0, -x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def ce_loss(target_scores, negative_scores) -> LossResult:
    """Binary cross-entropy over targets (label 1) and negatives (label 0).

    Gradient is ordered targets-then-negatives.
    """
    t = np.asarray(target_scores, dtype=float)
    n = np.asarray(negative_scores, dtype=float)
    if t.size == 0:
        raise ValueError("at least one target score required")
    value = float(-np.sum(_log_sigmoid(t)) - np.sum(_log_sigmoid(-n)))
    grad = np.concatenate([_sigmoid(t) - 1.0, _sigmoid(n)])
    return LossResult(value=value, grad_scores=grad)


def bpr_loss(target_scores, negative_scores) -> LossResult:
    """Pairwise ranking loss; the k-th target is paired with the k-th negative."""
    t = np.asarray(target_scores, dtype=float)
    n = np.asarray(negative_scores, dtype=float)
    if t.size != n.size:
        raise ValueError("paired scheme requires equally many targets and negatives")
    if t.size == 0:
        raise ValueError("at least one pair required")
    delta = t - n
    value = float(-np.sum(_log_sigmoid(delta)))
    g = _sigmoid(delta) - 1.0
    grad = np.concatenate([g, -g])
    return LossResult(value=value, grad_scores=grad)


def dsl_loss(
    ground_set: GroundSet,
    scores,
    kernel: DiversityKernelLowRank,
) -> LossResult:
    """Negative log probability of drawing the target set from the DPP over
    targets + negatives.  Requires more than one target; with a single target
    there is no in-set dependency to capture.
    """
    if len(ground_set.targets) < 2:
        raise ValueError("set likelihood loss requires at least two targets")
    if len(ground_set.previous) != 0:
        ground_set = GroundSet(
            previous=(),
            targets=ground_set.targets,
            negatives=ground_set.negatives,
            user=ground_set.user,
            time_step=ground_set.time_step,
        )
    scores = np.asarray(scores, dtype=float)
    if scores.size != ground_set.size:
        raise ValueError("score vector must cover targets and negatives")
    quality = QualityVector.from_raw_scores(scores)
    seq_kernel = build_sequence_kernel(quality, kernel, ground_set)
    targets = seq_kernel.ground_set.target_positions
    ll = dsl_log_likelihood(seq_kernel, targets)
    if ll == -np.inf:
        return LossResult(value=np.inf, grad_scores=np.zeros(scores.size), skipped=True)
    grad = grad_quality(seq_kernel, selected=targets)
    return LossResult(value=-ll, grad_scores=grad)


def cdsl_loss(
    ground_set: GroundSet,
    scores,
    kernel: DiversityKernelLowRank,
) -> LossResult:
    """Negative log conditional probability of the whole sequence
    (previous + targets) given the previous items, over the full ground set.
    Works for a single target.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size != ground_set.size:
        raise ValueError("score vector must cover the whole ground set")
    quality = QualityVector.from_raw_scores(scores)
    seq_kernel = build_sequence_kernel(quality, kernel, ground_set)
    observed = ground_set.previous_positions
    full = observed + ground_set.target_positions
    ll = cdsl_log_likelihood(seq_kernel, observed, full)
    if ll == -np.inf:
        return LossResult(value=np.inf, grad_scores=np.zeros(scores.size), skipped=True)
    grad = grad_quality(seq_kernel, selected=full, conditioned=observed)
    return LossResult(value=-ll, grad_scores=grad)
