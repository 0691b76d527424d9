"""Evaluation metrics: ranking AUC, F1, discrete mutual information,
Spearman rank correlation, and ground-truth causality@k."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import stats

from .errors import DomainError


def auc(scores, labels) -> float:
    """Area under the ROC curve as the Mann-Whitney rank statistic.

    Tied scores contribute 1/2 per tied positive/negative pair.  Requires
    both classes to be present.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(int)
    if scores.size != labels.size or scores.size == 0:
        raise DomainError("scores and labels must be non-empty and equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("auc undefined: only one class present")
    ranks = stats.rankdata(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def f1(scores, labels, threshold: float = 0.5) -> float:
    """F1 of the rule "positive iff score > threshold".

    When there are no predicted positives and no true positives the value
    is 0 by convention (a warning is emitted).
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(int)
    if np.all(labels == labels[0]):
        raise DomainError("f1 undefined: only one class present")
    pred = scores > threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    if tp == 0:
        if fp == 0 and fn == 0:  # unreachable with both classes present
            warnings.warn("degenerate f1: no positives anywhere; returning 0")
        elif fp == 0:
            warnings.warn("f1 is 0: no predicted positives")
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def mutual_information(x, y) -> float:
    """Plug-in mutual information of two discrete samples, in nats.

    Empirical cell probabilities with the 0 * log 0 = 0 convention; the
    result is clipped at 0 to absorb float round-off.
    """
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.size == 0 or x.size != y.size:
        raise DomainError("x and y must be non-empty and equal length")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    nx, ny = xi.max() + 1, yi.max() + 1
    counts = np.bincount(xi * ny + yi, minlength=nx * ny).reshape(nx, ny)
    pxy = counts / counts.sum()
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    mask = pxy > 0
    mi = float(np.sum(pxy[mask] * np.log(pxy[mask] / (px @ py)[mask])))
    return max(mi, 0.0)


def spearman(a, b) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size < 3:
        raise DomainError("spearman needs >= 3 paired observations")
    if np.unique(a).size == 1 or np.unique(b).size == 1:
        raise DomainError("spearman undefined: zero-variance ranks")
    rho = stats.spearmanr(a, b).statistic
    return float(rho)


def causality_at_k(ranked, ground_truth, k: int) -> float:
    """Mean ground-truth causal score over the first ``k`` ranked items.

    ``ranked`` holds indices into ``ground_truth`` (best first); scores
    are 1 for causal, 0 for not, with 0.5 permitted for "possible".  A
    ``k`` beyond the list length falls back to the whole list with a
    warning.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    ranked = np.asarray(ranked, dtype=int).ravel()
    truth = np.asarray(ground_truth, dtype=float).ravel()
    if ranked.size == 0:
        raise DomainError("empty ranking")
    if k > ranked.size:
        warnings.warn(f"k={k} exceeds ranking length {ranked.size}; using the full list")
        k = ranked.size
    return float(truth[ranked[:k]].mean())
