"""Retrieval metrics (Recall@K, average recall, forgetting), score
fusion, and diagnostics (Fisher-trace proxy, embedding histograms)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .embeddings import DistStats, dist_stats
from .encoders import encode_text, encode_text_grad
from .errors import (DegenerateFeatureError, InvalidInputError, MetricError)
from .losses import FeatureBatch, total_loss

DIRECTIONS = ("img2txt", "txt2img")


@dataclass
class EvalMatrix:
    """Lower-triangular Recall@1 entries a[j, i] per retrieval direction.

    j is the last task trained, i <= j the task evaluated; values are
    percentages in [0, 100]."""

    entries: dict[tuple[int, int, str], float] = field(default_factory=dict)

    def set(self, j: int, i: int, direction: str, value: float) -> None:
        if direction not in DIRECTIONS:
            raise InvalidInputError(f"unknown direction {direction!r}")
        if i > j:
            raise InvalidInputError("EvalMatrix: requires i <= j")
        if not 0.0 <= value <= 100.0:
            raise InvalidInputError(f"EvalMatrix: value {value} outside [0, 100]")
        self.entries[(j, i, direction)] = value

    def get(self, j: int, i: int, direction: str) -> float:
        return self.entries[(j, i, direction)]

    def row(self, j: int, direction: str) -> list[float]:
        return [self.entries[(j, i, direction)] for i in range(j + 1)]

    def row_complete(self, j: int, direction: str) -> bool:
        return all((j, i, direction) in self.entries for i in range(j + 1))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["j", "i", "direction", "recall1"])
            for (j, i, d), v in sorted(self.entries.items()):
                w.writerow([j, i, d, repr(v)])

    @classmethod
    def load_csv(cls, path) -> "EvalMatrix":
        out = cls()
        with open(path, newline="") as f:
            r = csv.reader(f)
            header = next(r)
            if header != ["j", "i", "direction", "recall1"]:
                raise InvalidInputError(f"{path}: unexpected header {header}")
            for j, i, d, v in r:
                out.set(int(j), int(i), d, float(v))
        return out


def recall_at_k(query_feats: np.ndarray, gallery_feats: np.ndarray,
                relevance: dict[int, set[int]], k: int) -> float:
    """Percent of queries whose cosine top-k hits a relevant gallery item.

    Ties are broken by lower gallery index for determinism."""
    q = np.asarray(query_feats, dtype=np.float64)
    g = np.asarray(gallery_feats, dtype=np.float64)
    qn = np.linalg.norm(q, axis=1, keepdims=True)
    gn = np.linalg.norm(g, axis=1, keepdims=True)
    if np.any(qn == 0) or np.any(gn == 0):
        raise DegenerateFeatureError("recall_at_k: zero-norm feature row")
    sims = (q / qn) @ (g / gn).T
    hits = 0
    for qi in range(q.shape[0]):
        rel = relevance.get(qi)
        if not rel:
            raise InvalidInputError(f"recall_at_k: query {qi} has no relevant items")
        top = np.argsort(-sims[qi], kind="stable")[:k]
        if rel.intersection(top.tolist()):
            hits += 1
    return 100.0 * hits / q.shape[0]


def average_recall(matrix: EvalMatrix, j: int, direction: str) -> float:
    """Mean Recall@1 over all tasks seen so far (0-based task indices)."""
    if not matrix.row_complete(j, direction):
        raise MetricError(f"average_recall: row {j}/{direction} incomplete")
    row = matrix.row(j, direction)
    return float(sum(row) / len(row))


def forgetting(matrix: EvalMatrix, j: int, direction: str) -> float:
    """Mean drop from each earlier task's best historical Recall@1.

    Undefined after fewer than two tasks. The running max for task i is
    taken over checkpoints k in [i, j-1] (a task cannot be measured
    before it is learned)."""
    if j < 1:
        raise MetricError("forgetting: undefined before the second task")
    for jj in range(j + 1):
        if not matrix.row_complete(jj, direction):
            raise MetricError(f"forgetting: row {jj}/{direction} incomplete")
    gaps = []
    for i in range(j):
        best = max(matrix.get(k, i, direction) for k in range(i, j))
        gaps.append(best - matrix.get(j, i, direction))
    return float(sum(gaps) / len(gaps))


def fused_similarity(r_img, r_eng, r_foreign, eta: float) -> float:
    """Convex combination of image-English and image-foreign cosines."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidInputError("fused_similarity: eta outside [0, 1]")

    def cosine(u, v):
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0 or nv == 0:
            raise DegenerateFeatureError("fused_similarity: zero-norm vector")
        return float(u @ v / (nu * nv))

    return eta * cosine(r_img, r_eng) + (1.0 - eta) * cosine(r_img, r_foreign)


def fisher_trace(samples, table, anchor, params, loss_cfg) -> float:
    """Average squared gradient norm over per-sample (batch size 1) losses.

    `samples` yields (image_feature, english_ids, foreign_ids); english
    features come from the frozen anchor table. 64-bit accumulation."""
    total = 0.0
    n = 0
    for img_feat, eng_ids, for_ids in samples:
        r_i = np.asarray(img_feat, dtype=np.float64)[None, :]
        r_e = encode_text(eng_ids, anchor, params)[None, :]
        r_f = encode_text(for_ids, table, params)[None, :]
        _, grad_rf = total_loss(FeatureBatch(r_i, r_e, r_f), loss_cfg)
        rows = encode_text_grad(for_ids, table, params, grad_rf[0])
        total += sum(float(g @ g) for g in rows.values())
        n += 1
    if n == 0:
        raise InvalidInputError("fisher_trace: empty dataset")
    return total / n


def mean_sample_loss(samples, table, anchor, params, loss_cfg) -> float:
    """Average per-sample (batch size 1) training loss; diagnostics only."""
    total = 0.0
    n = 0
    for img_feat, eng_ids, for_ids in samples:
        r_i = np.asarray(img_feat, dtype=np.float64)[None, :]
        r_e = encode_text(eng_ids, anchor, params)[None, :]
        r_f = encode_text(for_ids, table, params)[None, :]
        loss, _ = total_loss(FeatureBatch(r_i, r_e, r_f), loss_cfg)
        total += loss
        n += 1
    if n == 0:
        raise InvalidInputError("mean_sample_loss: empty dataset")
    return total / n


def ted_histogram(table, bins: int):
    """Equal-width histogram of all embedding entries over mu +/- 5 sigma.

    Returns (edges, counts, n_below, n_above, stats); a zero-sigma table
    degenerates to a single bin holding everything."""
    if bins < 2:
        raise InvalidInputError("ted_histogram: bins must be >= 2")
    stats = dist_stats(table)
    flat = table.matrix.astype(np.float64).ravel()
    if stats.sigma == 0.0:
        edges = np.array([stats.mu, stats.mu])
        return edges, np.array([flat.size]), 0, 0, stats
    lo, hi = stats.mu - 5 * stats.sigma, stats.mu + 5 * stats.sigma
    counts, edges = np.histogram(flat, bins=bins, range=(lo, hi))
    n_below = int((flat < lo).sum())
    n_above = int((flat > hi).sum())
    return edges, counts, n_below, n_above, stats


def save_histogram_csv(edges, counts, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bin_left", "bin_right", "count"])
        if len(edges) == 2 and len(counts) == 1:
            w.writerow([repr(float(edges[0])), repr(float(edges[1])), int(counts[0])])
            return
        for i, c in enumerate(counts):
            w.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), int(c)])
