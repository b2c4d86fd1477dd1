"""A minimal embedding scorer trained by manual backpropagation.

The context for a sequence is the user embedding plus the mean of the input
embeddings of the previous items; each candidate is scored by dot product
with its output embedding plus a bias.  The architecture is deliberately
simple so that comparisons between training losses are not confounded by
model capacity.
"""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import losses as losses_mod
from .data import SequenceInstance, SplitResult
from .kernels import DiversityKernelLowRank, GroundSet
from .metrics import MetricTable, evaluate_ranking_fn, ndcg_at, rank_candidates

log = logging.getLogger(__name__)

LOSS_KINDS = ("ce", "bpr", "dsl", "cdsl")


@dataclass
class ScorerParams:
    user_emb: np.ndarray  # |U| x d
    item_in_emb: np.ndarray  # M x d, for previous items
    item_out_emb: np.ndarray  # M x d, for candidates
    item_bias: np.ndarray  # M

    @property
    def d(self) -> int:
        return self.user_emb.shape[1]

    def copy(self) -> "ScorerParams":
        return copy.deepcopy(self)


def init_params(n_users: int, n_items: int, d: int = 32, seed: int = 0) -> ScorerParams:
    rng = np.random.default_rng(seed)
    scale = 0.1 / np.sqrt(d)
    return ScorerParams(
        user_emb=rng.uniform(-scale, scale, size=(n_users, d)),
        item_in_emb=rng.uniform(-scale, scale, size=(n_items, d)),
        item_out_emb=rng.uniform(-scale, scale, size=(n_items, d)),
        item_bias=np.zeros(n_items),
    )


def _context(params: ScorerParams, user: int, previous: Sequence[int]) -> np.ndarray:
    if len(previous) == 0:
        raise ValueError("previous item list must be nonempty")
    prev = np.asarray(previous, dtype=int)
    return params.user_emb[user] + params.item_in_emb[prev].mean(axis=0)


def score(
    params: ScorerParams, user: int, previous: Sequence[int], candidates: Sequence[int]
) -> np.ndarray:
    """Relevance scores of `candidates` given the user's recent items."""
    cand = np.asarray(candidates, dtype=int)
    if user < 0 or user >= params.user_emb.shape[0]:
        raise ValueError("user index out of range")
    for idx in (np.asarray(previous, dtype=int), cand):
        if idx.size and (idx.min() < 0 or idx.max() >= params.item_out_emb.shape[0]):
            raise ValueError("item index out of range")
    c = _context(params, user, previous)
    return params.item_out_emb[cand] @ c + params.item_bias[cand]


@dataclass
class _Grads:
    user_emb: dict = field(default_factory=dict)  # sparse: index -> d-vector
    item_in_emb: dict = field(default_factory=dict)
    item_out_emb: dict = field(default_factory=dict)
    item_bias: dict = field(default_factory=dict)

    def _add(self, table: dict, idx: int, value) -> None:
        if idx in table:
            table[idx] = table[idx] + value
        else:
            table[idx] = np.array(value, dtype=float)

    def apply(self, params: ScorerParams, lr: float, scale: float) -> None:
        for idx, g in sorted(self.user_emb.items()):
            params.user_emb[idx] -= lr * scale * g
        for idx, g in sorted(self.item_in_emb.items()):
            params.item_in_emb[idx] -= lr * scale * g
        for idx, g in sorted(self.item_out_emb.items()):
            params.item_out_emb[idx] -= lr * scale * g
        for idx, g in sorted(self.item_bias.items()):
            params.item_bias[idx] -= lr * scale * g


def backprop_scores(
    params: ScorerParams,
    user: int,
    previous: Sequence[int],
    candidates: Sequence[int],
    grad_scores: np.ndarray,
    grads: _Grads,
) -> None:
    """Accumulate d(loss)/d(params) given d(loss)/d(scores)."""
    prev = np.asarray(previous, dtype=int)
    cand = np.asarray(candidates, dtype=int)
    g = np.asarray(grad_scores, dtype=float)
    c = _context(params, user, previous)
    grad_context = g @ params.item_out_emb[cand]
    grads._add(grads.user_emb, user, grad_context)
    for p in prev:
        grads._add(grads.item_in_emb, int(p), grad_context / prev.size)
    for i, gi in zip(cand, g):
        grads._add(grads.item_out_emb, int(i), gi * c)
        grads._add(grads.item_bias, int(i), gi)


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 10
    seed: int = 0


@dataclass
class TrainLog:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_val_ndcg: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1
    skipped_instances: int = 0


def instance_loss(
    params: ScorerParams,
    instance: SequenceInstance,
    loss_kind: str,
    kernel: DiversityKernelLowRank | None,
) -> tuple[losses_mod.LossResult, Sequence[int]]:
    """Loss value + score gradient for one instance; also returns the list of
    scored items the gradient aligns with."""
    T = len(instance.targets)
    if loss_kind == "ce":
        scored = list(instance.targets) + list(instance.negatives)
        s = score(params, instance.user, instance.previous, scored)
        return losses_mod.ce_loss(s[:T], s[T:]), scored
    if loss_kind == "bpr":
        # pair the k-th target with the k-th shared negative
        negatives = list(instance.negatives)[:T]
        if len(negatives) < T:
            raise ValueError("bpr pairing needs at least as many negatives as targets")
        scored = list(instance.targets) + negatives
        s = score(params, instance.user, instance.previous, scored)
        return losses_mod.bpr_loss(s[:T], s[T:]), scored
    if loss_kind == "dsl":
        gs = GroundSet(
            previous=(),
            targets=instance.targets,
            negatives=instance.negatives,
            user=instance.user,
            time_step=instance.time_step,
        )
        scored = list(gs.items)
        s = score(params, instance.user, instance.previous, scored)
        return losses_mod.dsl_loss(gs, s, kernel), scored
    if loss_kind == "cdsl":
        gs = GroundSet(
            previous=instance.previous,
            targets=instance.targets,
            negatives=instance.negatives,
            user=instance.user,
            time_step=instance.time_step,
        )
        scored = list(gs.items)
        s = score(params, instance.user, instance.previous, scored)
        return losses_mod.cdsl_loss(gs, s, kernel), scored
    raise ValueError(f"unknown loss kind {loss_kind!r}")


def train(
    params: ScorerParams,
    instances: Sequence[SequenceInstance],
    loss_kind: str,
    kernel: DiversityKernelLowRank | None,
    config: TrainConfig,
    validate: Callable[[ScorerParams], float] | None = None,
) -> tuple[ScorerParams, TrainLog]:
    """Mini-batch SGD with early stopping on validation NDCG@5.

    Returns the parameters from the best validation epoch.  Instances whose
    loss is non-finite (zero-probability sets) are skipped and counted; an
    epoch with more than 1% skips aborts training.
    """
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
    if loss_kind == "dsl" and any(len(i.targets) < 2 for i in instances):
        raise ValueError("dsl requires every instance to have more than one target")
    if loss_kind in ("dsl", "cdsl") and kernel is None:
        raise ValueError(f"{loss_kind} requires a diversity kernel")

    params = params.copy()
    rng = np.random.default_rng(config.seed)
    tlog = TrainLog()
    best_val = -np.inf
    best_params = params.copy()
    since_improve = 0

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(instances))
        total_loss = 0.0
        counted = 0
        skipped = 0
        for batch_start in range(0, len(order), config.batch_size):
            batch = order[batch_start : batch_start + config.batch_size]
            grads = _Grads()
            used = 0
            for idx in batch:
                instance = instances[int(idx)]
                result, scored = instance_loss(params, instance, loss_kind, kernel)
                if result.skipped or not np.isfinite(result.value):
                    skipped += 1
                    continue
                total_loss += result.value
                counted += 1
                used += 1
                backprop_scores(
                    params, instance.user, instance.previous, scored, result.grad_scores, grads
                )
            if used:
                grads.apply(params, config.learning_rate, 1.0 / used)
        if skipped > 0.01 * len(instances):
            raise FloatingPointError(
                f"{skipped} of {len(instances)} instances skipped in epoch {epoch}"
            )
        tlog.skipped_instances += skipped
        tlog.epoch_loss.append(total_loss / max(counted, 1))
        tlog.epoch_seconds.append(time.perf_counter() - t0)

        if validate is None:
            tlog.epoch_val_ndcg.append(np.nan)
            tlog.best_epoch = epoch
            best_params = params.copy()
            continue
        val = validate(params)
        tlog.epoch_val_ndcg.append(val)
        if val > best_val:
            best_val = val
            best_params = params.copy()
            tlog.best_epoch = epoch
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= config.patience:
                log.info("early stop at epoch %d (best %d)", epoch, tlog.best_epoch)
                break
    return best_params, tlog


def validation_ndcg(
    params: ScorerParams,
    split: SplitResult,
    n_items: int,
    L: int,
    N: int = 5,
) -> float:
    """Mean NDCG@N over validation items, ranking every item outside the
    user's training history, with the last L training items as context."""
    values = []
    for u, valid_items in enumerate(split.valid):
        if not valid_items or len(split.train[u]) == 0:
            continue
        exclude = set(split.train[u])
        candidates = np.asarray([i for i in range(n_items) if i not in exclude], dtype=int)
        if candidates.size == 0:
            continue
        previous = split.train[u][-L:]
        s = score(params, u, previous, candidates)
        ranked = rank_candidates(s, candidates)
        values.append(ndcg_at(ranked, set(valid_items), N))
    return float(np.mean(values)) if values else 0.0


def evaluate_model(
    params: ScorerParams,
    split: SplitResult,
    n_items: int,
    L: int,
    item_categories: Sequence[frozenset],
    n_categories: int,
    N_list: Sequence[int] = (3, 5, 10),
    loss_name: str = "",
    threads: int = 1,
) -> MetricTable:
    """Test-set evaluation: rank all items outside train+valid history."""
    exclude = [set(tr) | set(va) for tr, va in zip(split.train, split.valid)]
    T = max((len(t) for t in split.test if t), default=0)

    def score_user(u: int, candidates: np.ndarray) -> np.ndarray:
        context_items = (split.train[u] + split.valid[u])[-L:]
        return score(params, u, context_items, candidates)

    return evaluate_ranking_fn(
        score_user,
        relevant_per_user=split.test,
        exclude_per_user=exclude,
        n_items=n_items,
        item_categories=item_categories,
        n_categories=n_categories,
        N_list=N_list,
        loss_name=loss_name,
        T=T,
        threads=threads,
    )


def save_params(path, params: ScorerParams) -> None:
    """Checkpoint: header (|U|, M, d) then row-major blocks for each table."""
    with open(path, "w", encoding="utf-8") as fh:
        n_users, d = params.user_emb.shape
        n_items = params.item_out_emb.shape[0]
        fh.write(f"{n_users}\n{n_items}\n{d}\n")
        for block in (params.user_emb, params.item_in_emb, params.item_out_emb):
            for row in block:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        fh.write(" ".join(repr(float(v)) for v in params.item_bias) + "\n")


def load_params(path) -> ScorerParams:
    with open(path, encoding="utf-8") as fh:
        n_users = int(fh.readline())
        n_items = int(fh.readline())
        d = int(fh.readline())

        def block(rows: int) -> np.ndarray:
            return np.asarray(
                [[float(v) for v in fh.readline().split()] for _ in range(rows)]
            )

        user_emb = block(n_users)
        item_in = block(n_items)
        item_out = block(n_items)
        bias = np.asarray([float(v) for v in fh.readline().split()])
    for arr, shape in (
        (user_emb, (n_users, d)),
        (item_in, (n_items, d)),
        (item_out, (n_items, d)),
        (bias, (n_items,)),
    ):
        if arr.shape != shape:
            raise ValueError("parameter checkpoint shape does not match its header")
    return ScorerParams(user_emb=user_emb, item_in_emb=item_in, item_out_emb=item_out, item_bias=bias)
