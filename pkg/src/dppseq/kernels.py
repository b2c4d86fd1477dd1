"""Sequence-kernel construction and DPP set log-likelihoods.

The central objects are a global low-rank diversity kernel K = V V^T over the
item catalog and, per training instance, a small dense kernel
L = Diag(q) K_sub Diag(q) over the instance's ground set (previous items,
targets, sampled negatives).  Set probabilities are ratios of principal-minor
determinants; the normalizer det(L + I) covers all subsets, and conditioning
on an observed set replaces I by an identity restricted to its complement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.linalg as la

RAW_SCORE_CLAMP = 30.0
DEFAULT_JITTER = 1e-6

ROLE_PREVIOUS = "previous"
ROLE_TARGET = "target"
ROLE_NEGATIVE = "negative"


class SingularMatrixError(Exception):
    """Factorization failed even after diagonal jitter."""


@dataclass(frozen=True)
class GroundSet:
    """The per-instance item universe: previous items, targets, negatives.

    Positions are ordered previous-first, then targets, then negatives, and
    item indices must be distinct.
    """

    previous: tuple[int, ...]
    targets: tuple[int, ...]
    negatives: tuple[int, ...]
    user: int = 0
    time_step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "previous", tuple(int(i) for i in self.previous))
        object.__setattr__(self, "targets", tuple(int(i) for i in self.targets))
        object.__setattr__(self, "negatives", tuple(int(i) for i in self.negatives))
        if not self.targets:
            raise ValueError("ground set needs at least one target item")
        items = self.previous + self.targets + self.negatives
        if len(set(items)) != len(items):
            raise ValueError("ground-set item indices must be distinct")

    @property
    def items(self) -> tuple[int, ...]:
        return self.previous + self.targets + self.negatives

    @property
    def roles(self) -> tuple[str, ...]:
        return (
            (ROLE_PREVIOUS,) * len(self.previous)
            + (ROLE_TARGET,) * len(self.targets)
            + (ROLE_NEGATIVE,) * len(self.negatives)
        )

    @property
    def size(self) -> int:
        return len(self.previous) + len(self.targets) + len(self.negatives)

    @property
    def previous_positions(self) -> tuple[int, ...]:
        return tuple(range(len(self.previous)))

    @property
    def target_positions(self) -> tuple[int, ...]:
        lo = len(self.previous)
        return tuple(range(lo, lo + len(self.targets)))

    @property
    def negative_positions(self) -> tuple[int, ...]:
        lo = len(self.previous) + len(self.targets)
        return tuple(range(lo, self.size))


@dataclass(frozen=True)
class DiversityKernelLowRank:
    """Low-rank factor matrix (one row per catalog item) of the global
    diversity kernel K = factors @ factors.T."""

    factors: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        factors = np.asarray(self.factors, dtype=float)
        if factors.ndim != 2:
            raise ValueError("factors must be a 2-d (items x latent) matrix")
        if not np.all(np.isfinite(factors)):
            raise ValueError("factors must be finite")
        object.__setattr__(self, "factors", factors)

    @property
    def n_items(self) -> int:
        return self.factors.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.factors.shape[1]

    def submatrix(self, items: Sequence[int]) -> np.ndarray:
        """Similarity kernel restricted to the given catalog items."""
        idx = np.asarray(items, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_items):
            raise ValueError("item index out of catalog range")
        rows = self.factors[idx]
        return rows @ rows.T

    def full(self) -> np.ndarray:
        return self.factors @ self.factors.T


def identity_kernel(n_items: int) -> DiversityKernelLowRank:
    """Diagonal diversity kernel (no similarity structure); useful for tests."""
    return DiversityKernelLowRank(np.eye(n_items), normalized=True)


@dataclass(frozen=True)
class QualityVector:
    """Raw model scores and their positive quality transform q = exp(r/2)."""

    raw_scores: np.ndarray
    qualities: np.ndarray

    @classmethod
    def from_raw_scores(cls, raw_scores: Sequence[float]) -> "QualityVector":
        raw = np.asarray(raw_scores, dtype=float)
        if not np.all(np.isfinite(raw)):
            raise ValueError("raw scores must be finite")
        clamped = np.clip(raw, -RAW_SCORE_CLAMP, RAW_SCORE_CLAMP)
        return cls(raw_scores=raw, qualities=np.exp(clamped / 2.0))

    @property
    def clamp_active(self) -> np.ndarray:
        return np.abs(self.raw_scores) >= RAW_SCORE_CLAMP

    def __len__(self) -> int:
        return len(self.qualities)


@dataclass(frozen=True)
class SequenceKernel:
    """Dense quality-modulated kernel over one instance's ground set.

    matrix = Diag(q) @ base @ Diag(q), with `base` the diversity-kernel
    submatrix indexed by the ground set.
    """

    matrix: np.ndarray
    ground_set: GroundSet
    base: np.ndarray = field(repr=False, default=None)
    qualities: QualityVector = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def build_sequence_kernel(
    qualities: QualityVector,
    kernel: DiversityKernelLowRank,
    ground_set: GroundSet,
) -> SequenceKernel:
    """Assemble L = Diag(q) K_sub Diag(q) for one training instance."""
    if len(qualities) != ground_set.size:
        raise ValueError(
            f"quality vector length {len(qualities)} != ground-set size {ground_set.size}"
        )
    if not np.all(np.isfinite(qualities.qualities)) or np.any(qualities.qualities <= 0):
        raise ValueError("qualities must be strictly positive and finite")
    base = kernel.submatrix(ground_set.items)
    q = qualities.qualities
    matrix = base * np.outer(q, q)
    return SequenceKernel(matrix=matrix, ground_set=ground_set, base=base, qualities=qualities)


def _check_symmetric(matrix: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    if matrix.size and np.max(np.abs(matrix - matrix.T)) > tol:
        raise ValueError("matrix must be symmetric")
    return matrix


def log_det_psd(matrix: np.ndarray, jitter: float = DEFAULT_JITTER) -> float:
    """log det of a symmetric PSD matrix via Cholesky, with one jitter retry."""
    matrix = _check_symmetric(matrix)
    if matrix.shape[0] == 0:
        return 0.0
    try:
        chol = la.cholesky(matrix, lower=True)
    except la.LinAlgError:
        try:
            chol = la.cholesky(matrix + jitter * np.eye(matrix.shape[0]), lower=True)
        except la.LinAlgError as exc:
            raise SingularMatrixError("matrix indefinite even after jitter") from exc
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def _log_det_or_neginf(matrix: np.ndarray) -> float:
    """log det for a PSD principal minor; -inf when (numerically) singular.

    Distinct from log_det_psd: a singular minor means probability zero, not a
    numerical failure, so no jitter is applied here.
    """
    matrix = _check_symmetric(matrix)
    if matrix.shape[0] == 0:
        return 0.0
    try:
        chol = la.cholesky(matrix, lower=True)
    except la.LinAlgError:
        eigs = la.eigvalsh(matrix)
        scale = max(1.0, float(np.max(np.abs(eigs)))) if eigs.size else 1.0
        if np.min(eigs) <= 1e-12 * scale:
            return -np.inf
        return float(np.sum(np.log(eigs)))
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def _validate_positions(kernel: SequenceKernel, positions: Sequence[int]) -> np.ndarray:
    pos = np.asarray(sorted(set(int(p) for p in positions)), dtype=int)
    if pos.size and (pos.min() < 0 or pos.max() >= kernel.size):
        raise ValueError("subset position out of range")
    return pos


def dsl_log_likelihood(kernel: SequenceKernel, targets: Sequence[int]) -> float:
    """log P(Y_T) = log det(L_{Y_T}) - log det(L + I) under the set DPP."""
    pos = _validate_positions(kernel, targets)
    if pos.size == 0:
        raise ValueError("target subset must be nonempty")
    num = _log_det_or_neginf(kernel.matrix[np.ix_(pos, pos)])
    if num == -np.inf:
        return -np.inf
    den = log_det_psd(kernel.matrix + np.eye(kernel.size))
    return num - den


def cdsl_log_likelihood(
    kernel: SequenceKernel,
    observed: Sequence[int],
    full: Sequence[int],
) -> float:
    """log P(Y_full | Y_obs) with the conditional-DPP normalizer
    det(L + I_complement(observed))."""
    obs = _validate_positions(kernel, observed)
    ful = _validate_positions(kernel, full)
    if not set(obs).issubset(set(ful)):
        raise ValueError("observed set must be contained in the full set")
    if ful.size == 0:
        raise ValueError("full subset must be nonempty")
    num = _log_det_or_neginf(kernel.matrix[np.ix_(ful, ful)])
    if num == -np.inf:
        return -np.inf
    mask = np.ones(kernel.size)
    mask[obs] = 0.0
    den = log_det_psd(kernel.matrix + np.diag(mask))
    return num - den


def grad_quality(
    kernel: SequenceKernel,
    selected: Sequence[int],
    conditioned: Sequence[int] = (),
) -> np.ndarray:
    """Gradient of the negative set log-likelihood w.r.t. the raw scores r.

    `selected` is the set whose determinant forms the numerator (targets for
    the plain set likelihood, previous+targets for the conditional one);
    `conditioned` indexes the observed positions excluded from the
    normalizer's identity mask.  Uses d log det(L_Y)/dr_i = 1 for i in Y and
    d log det(L + I_mask)/dq_i = 2 (K_sub Q B)_ii with B the inverse of the
    normalizer matrix, chained through q = exp(r/2).
    """
    if kernel.base is None or kernel.qualities is None:
        raise ValueError("kernel must carry its base kernel and qualities")
    sel = _validate_positions(kernel, selected)
    obs = _validate_positions(kernel, conditioned)
    if sel.size == 0:
        raise ValueError("selected subset must be nonempty")
    if not set(obs).issubset(set(sel)):
        raise ValueError("conditioned set must be contained in the selected set")

    mask = np.ones(kernel.size)
    mask[obs] = 0.0
    denom = kernel.matrix + np.diag(mask)
    try:
        chol = la.cho_factor(denom, lower=True)
    except la.LinAlgError:
        try:
            chol = la.cho_factor(denom + DEFAULT_JITTER * np.eye(kernel.size), lower=True)
        except la.LinAlgError as exc:
            raise SingularMatrixError("normalizer matrix indefinite after jitter") from exc
    inv_denom = la.cho_solve(chol, np.eye(kernel.size))

    q = kernel.qualities.qualities
    # diag(K_sub Q B), computed without forming the product matrix
    diag_kqb = np.einsum("ij,j,ji->i", kernel.base, q, inv_denom)
    grad = q * diag_kqb
    grad[sel] -= 1.0
    grad[kernel.qualities.clamp_active] = 0.0
    return grad


def enumerate_normalizer(kernel: SequenceKernel, required: Sequence[int] = ()) -> float:
    """Brute-force sum of det(L_Y) over all subsets Y containing `required`.

    With required empty this equals det(L + I).  Exponential in the ground-set
    size; rejected above n = 15.
    """
    if kernel.size > 15:
        raise ValueError("ground set too large for 2^n enumeration")
    req = _validate_positions(kernel, required)
    free = [p for p in range(kernel.size) if p not in set(req)]
    total = 0.0
    for r in range(len(free) + 1):
        for extra in combinations(free, r):
            pos = np.asarray(sorted(set(req) | set(extra)), dtype=int)
            sub = kernel.matrix[np.ix_(pos, pos)]
            total += float(la.det(sub)) if pos.size else 1.0
    return total
