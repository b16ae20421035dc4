"""Clustering scores: NMI (geometric normalization), ARI and matched accuracy."""
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment


def _labels(a):
    a = np.asarray(a)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("labels must be a nonempty 1-d sequence")
    return a


def confusion(pred, truth, K_pred=None, K_true=None):
    """Contingency counts n[i, j] = #{pred == i and truth == j}."""
    pred, truth = _labels(pred), _labels(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions, {truth.size} labels")
    K_pred = int(pred.max()) + 1 if K_pred is None else K_pred
    K_true = int(truth.max()) + 1 if K_true is None else K_true
    C = np.zeros((K_pred, K_true), dtype=np.int64)
    np.add.at(C, (pred, truth), 1)
    return C


def _compact(pred, truth):
    _, p = np.unique(_labels(pred), return_inverse=True)
    _, t = np.unique(_labels(truth), return_inverse=True)
    return confusion(p, t)


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth):
    C = _compact(pred, truth)
    n = C.sum()
    h_pred = _entropy(C.sum(axis=1), n)
    h_true = _entropy(C.sum(axis=0), n)
    if h_pred == 0.0 or h_true == 0.0:
        return 1.0 if h_pred == h_true else 0.0
    nz = C > 0
    outer = np.outer(C.sum(axis=1), C.sum(axis=0))
    mi = float(np.sum(C[nz] / n * np.log(C[nz] * n / outer[nz])))
    return min(max(mi / np.sqrt(h_pred * h_true), 0.0), 1.0)


def _pairs(counts):
    return sum(int(c) * (int(c) - 1) // 2 for c in np.ravel(counts))


def ari(pred, truth):
    """Adjusted Rand index from integer pair counts; one rounding at the end."""
    C = _compact(pred, truth)
    index = _pairs(C)
    a = _pairs(C.sum(axis=1))
    b = _pairs(C.sum(axis=0))
    total = _pairs([C.sum()])
    # (index - a b / total) / ((a + b) / 2 - a b / total), cleared of fractions
    num = 2 * (index * total - a * b)
    den = (a + b) * total - 2 * a * b
    if den == 0:
        # both partitions trivial (all-singletons or all-one-cluster)
        return 1.0 if 2 * index == a + b else 0.0
    return float(Fraction(num, den))


def best_matching(pred, truth):
    """Cluster -> class map maximizing agreements (Hungarian on -contingency)."""
    C = confusion(pred, truth)
    if max(C.shape) > 64:
        raise ValueError(f"too many clusters for exact matching ({C.shape})")
    rows, cols = linear_sum_assignment(-C)
    return dict(zip(rows.tolist(), cols.tolist())), int(C[rows, cols].sum())


def acc(pred, truth):
    _, matched = best_matching(pred, truth)
    return matched / len(_labels(truth))


def report(pred, truth):
    return {"nmi": nmi(pred, truth), "ari": ari(pred, truth), "acc": acc(pred, truth)}
