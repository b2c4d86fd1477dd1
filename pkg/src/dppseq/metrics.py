"""Top-N quality (recall, NDCG), diversity (category coverage), and
harmonic trade-off metrics, plus the per-user evaluation loop."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


def recall_at(ranked: Sequence[int], relevant: set, N: int) -> float:
    if not relevant:
        raise ValueError("relevant set must be nonempty")
    hits = sum(1 for item in ranked[:N] if item in relevant)
    return hits / len(relevant)


def ndcg_at(ranked: Sequence[int], relevant: set, N: int) -> float:
    """Binary-relevance NDCG with 1/log2(rank+1) discount."""
    if not relevant:
        raise ValueError("relevant set must be nonempty")
    dcg = sum(
        1.0 / np.log2(rank + 2)
        for rank, item in enumerate(ranked[:N])
        if item in relevant
    )
    idcg = sum(1.0 / np.log2(rank + 2) for rank in range(min(N, len(relevant))))
    return dcg / idcg


def category_coverage(
    top_n: Sequence[int],
    item_categories: Mapping[int, frozenset] | Sequence[frozenset],
    total_categories: int,
) -> float:
    if total_categories < 1:
        raise ValueError("total_categories must be >= 1")
    covered: set = set()
    for item in top_n:
        covered |= set(item_categories[item])
    return len(covered) / total_categories


def f_score(quality: float, diversity: float) -> float:
    """Harmonic mean of a quality score and a diversity score; 0 at 0+0."""
    if quality + diversity == 0:
        return 0.0
    return 2.0 * quality * diversity / (quality + diversity)


@dataclass
class MetricRow:
    loss: str
    T: int
    N: int
    recall: float
    ndcg: float
    cc: float
    f: float


@dataclass
class MetricTable:
    rows: list[MetricRow]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["loss", "T", "N", "recall", "ndcg", "cc", "f"])
            for r in self.rows:
                writer.writerow(
                    [r.loss, r.T, r.N, f"{r.recall:.6f}", f"{r.ndcg:.6f}", f"{r.cc:.6f}", f"{r.f:.6f}"]
                )


def rank_candidates(scores: np.ndarray, candidates: np.ndarray) -> list[int]:
    """Candidates sorted by descending score; ties broken by item index."""
    order = np.lexsort((candidates, -scores))
    return [int(candidates[i]) for i in order]


def evaluate_ranking_fn(
    score_user,
    relevant_per_user: Sequence[Sequence[int]],
    exclude_per_user: Sequence[set],
    n_items: int,
    item_categories: Sequence[frozenset],
    n_categories: int,
    N_list: Sequence[int] = (3, 5, 10),
    loss_name: str = "",
    T: int = 0,
    threads: int = 1,
) -> MetricTable:
    """Per-user full-catalog ranking evaluation.

    `score_user(user, candidates) -> scores` supplies the model; candidates
    are all items outside `exclude_per_user[user]`.  Users with no relevant
    items or an empty candidate pool are excluded from the averages.
    """

    def one_user(u: int):
        relevant = set(relevant_per_user[u])
        if not relevant:
            return None
        candidates = np.asarray(
            [i for i in range(n_items) if i not in exclude_per_user[u]], dtype=int
        )
        if candidates.size == 0:
            return None
        scores = np.asarray(score_user(u, candidates), dtype=float)
        ranked = rank_candidates(scores, candidates)
        out = {}
        for N in N_list:
            re = recall_at(ranked, relevant, N)
            nd = ndcg_at(ranked, relevant, N)
            cc = category_coverage(ranked[:N], item_categories, n_categories)
            out[N] = (re, nd, cc)
        return out

    users = list(range(len(relevant_per_user)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_user, users))
    else:
        results = [one_user(u) for u in users]
    results = [r for r in results if r is not None]
    if not results:
        raise ValueError("no users were evaluable")

    rows = []
    for N in N_list:
        re = float(np.mean([r[N][0] for r in results]))
        nd = float(np.mean([r[N][1] for r in results]))
        cc = float(np.mean([r[N][2] for r in results]))
        quality = 0.5 * (re + nd)
        rows.append(
            MetricRow(loss=loss_name, T=T, N=N, recall=re, ndcg=nd, cc=cc, f=f_score(quality, cc))
        )
    return MetricTable(rows=rows)
