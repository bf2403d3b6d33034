"""Calibration metrics (ECE/MCE/SCE, reliability bins) and OOD-detection
metrics (AUROC, AUPR).

Binning convention, shared by every metric here: M equal-width bins over
[0, 1], each half-open [lo, hi) except the last, which is closed at 1.0.
Calibration errors are reported multiplied by 100; ranking metrics stay
in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from encalib.scores import Prediction

DEFAULT_BINS = 15


@dataclass
class BinStats:
    m: int
    counts: np.ndarray      # (M,) int64
    confidence: np.ndarray  # (M,) float64, 0 for empty bins
    accuracy: np.ndarray    # (M,) float64, 0 for empty bins

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def edges(self) -> np.ndarray:
        return np.array([j / self.m for j in range(self.m + 1)])


def _bin_index(conf: np.ndarray, m: int) -> np.ndarray:
    edges = np.array([j / m for j in range(m + 1)])
    idx = np.searchsorted(edges, conf, side="right") - 1
    return np.minimum(idx, m - 1)  # confidence 1.0 goes to the top bin


def bin_predictions(preds: list[Prediction], labels, m: int = DEFAULT_BINS) -> BinStats:
    """Aggregate per-bin count, mean confidence and accuracy."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(preds) != labels.shape[0]:
        raise ValueError(
            f"{len(preds)} predictions vs {labels.shape[0]} labels")
    if m < 1:
        raise ValueError(f"bin count must be >= 1, got {m}")
    if (labels < 0).any():
        raise ValueError("labels must be >= 0 for calibration binning")
    conf = np.array([p.confidence for p in preds])
    correct = np.array([p.predicted_label for p in preds]) == labels
    idx = _bin_index(conf, m)
    counts = np.bincount(idx, minlength=m).astype(np.int64)
    conf_sum = np.bincount(idx, weights=conf, minlength=m)
    acc_sum = np.bincount(idx, weights=correct.astype(np.float64), minlength=m)
    nz = counts > 0
    confidence = np.zeros(m)
    accuracy = np.zeros(m)
    confidence[nz] = conf_sum[nz] / counts[nz]
    accuracy[nz] = acc_sum[nz] / counts[nz]
    return BinStats(m, counts, confidence, accuracy)


def ece(bins: BinStats, n: int) -> float:
    """Bin-weighted mean |accuracy - confidence| gap, times 100."""
    if n != bins.n:
        raise ValueError(f"total count {n} does not match bins ({bins.n})")
    nz = bins.counts > 0
    w = bins.counts[nz] / n
    return float((w * np.abs(bins.accuracy[nz] - bins.confidence[nz])).sum() * 100.0)


def mce(bins: BinStats) -> float:
    """Largest per-bin |accuracy - confidence| gap, times 100."""
    nz = bins.counts > 0
    if not nz.any():
        raise ValueError("all bins empty")
    return float(np.abs(bins.accuracy[nz] - bins.confidence[nz]).max() * 100.0)


def sce(probabilities, labels, m: int = DEFAULT_BINS) -> float:
    """Classwise calibration error: per-class binned gap, averaged, times 100.

    For each class k, the class-k probabilities are binned and compared
    against the empirical frequency of label == k inside each bin.
    """
    P = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if P.ndim != 2:
        raise ValueError(f"probabilities must be N x K, got shape {P.shape}")
    n, k = P.shape
    if labels.shape != (n,):
        raise ValueError(f"{n} probability rows vs {labels.shape[0]} labels")
    if (labels < 0).any() or (labels >= k).any():
        raise ValueError(f"labels must be in [0, {k})")
    if m < 1:
        raise ValueError(f"bin count must be >= 1, got {m}")
    total = 0.0
    for c in range(k):
        idx = _bin_index(P[:, c], m)
        counts = np.bincount(idx, minlength=m)
        conf_sum = np.bincount(idx, weights=P[:, c], minlength=m)
        hit_sum = np.bincount(idx, weights=(labels == c).astype(np.float64),
                              minlength=m)
        nz = counts > 0
        gaps = np.abs(hit_sum[nz] / counts[nz] - conf_sum[nz] / counts[nz])
        total += ((counts[nz] / n) * gaps).sum()
    return float(total / k * 100.0)


@dataclass
class OodScores:
    in_scores: np.ndarray
    out_scores: np.ndarray

    def __post_init__(self):
        self.in_scores = np.asarray(self.in_scores, dtype=np.float64)
        self.out_scores = np.asarray(self.out_scores, dtype=np.float64)
        if self.in_scores.size == 0 or self.out_scores.size == 0:
            raise ValueError("both score lists must be non-empty")


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the group-average rank."""
    order = np.argsort(values, kind="mergesort")
    sorted_v = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(sorted_v):
        j = i
        while j + 1 < len(sorted_v) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(s: OodScores) -> float:
    """P(random in-score > random out-score), ties counted half."""
    n_in, n_out = len(s.in_scores), len(s.out_scores)
    ranks = _average_ranks(np.concatenate([s.in_scores, s.out_scores]))
    u = ranks[:n_in].sum() - n_in * (n_in + 1) / 2.0
    return float(u / (n_in * n_out))


def aupr(s: OodScores, positive: str = "in") -> float:
    """Average precision with the chosen side as positive.

    For positive="out" the scores are negated so that higher means more
    positive. Thresholds descend through distinct score values; tied
    scores enter as one group.
    """
    if positive == "in":
        scores = np.concatenate([s.in_scores, s.out_scores])
        is_pos = np.concatenate([np.ones(len(s.in_scores), dtype=bool),
                                 np.zeros(len(s.out_scores), dtype=bool)])
    elif positive == "out":
        scores = -np.concatenate([s.in_scores, s.out_scores])
        is_pos = np.concatenate([np.zeros(len(s.in_scores), dtype=bool),
                                 np.ones(len(s.out_scores), dtype=bool)])
    else:
        raise ValueError(f"positive must be 'in' or 'out', got {positive!r}")
    order = np.argsort(-scores, kind="mergesort")
    scores, is_pos = scores[order], is_pos[order]
    n_pos = int(is_pos.sum())
    tp = fp = 0
    recall_prev = 0.0
    ap = 0.0
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[j + 1] == scores[i]:
            j += 1
        tp += int(is_pos[i:j + 1].sum())
        fp += (j - i + 1) - int(is_pos[i:j + 1].sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - recall_prev) * precision
        recall_prev = recall
        i = j + 1
    return float(ap)


def reliability_table(bins: BinStats) -> list[tuple]:
    """One row per bin: (index, lower, upper, count, conf, acc).

    Empty bins keep their edges and zero count; conf/acc are None there.
    """
    rows = []
    edges = bins.edges()
    for j in range(bins.m):
        c = int(bins.counts[j])
        rows.append((
            j + 1, float(edges[j]), float(edges[j + 1]), c,
            float(bins.confidence[j]) if c else None,
            float(bins.accuracy[j]) if c else None,
        ))
    return rows
