"""Binary classification metrics."""

import numpy as np
from scipy.stats import rankdata

from .errors import SingleClassAUROC


def auroc(scores, labels):
    """Area under the ROC curve as the Mann-Whitney concordance (ties count one half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassAUROC("AUROC needs both classes")
    r = rankdata(s)
    u = r[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion(pred, labels):
    p = np.asarray(pred).astype(bool)
    y = np.asarray(labels).astype(bool)
    return int((p & y).sum()), int((p & ~y).sum()), int((~p & ~y).sum()), int((~p & y).sum())


def f1_score(pred, labels):
    tp, fp, _, fn = confusion(pred, labels)
    return 0.0 if tp == 0 else 2.0 * tp / (2.0 * tp + fp + fn)


def balanced_accuracy(pred, labels):
    tp, fp, tn, fn = confusion(pred, labels)
    tpr = tp / (tp + fn) if tp + fn else 0.0
    tnr = tn / (tn + fp) if tn + fp else 0.0
    return 0.5 * (tpr + tnr)


def brier(probs, labels):
    p = np.asarray(probs, dtype=np.float64)
    return float(np.mean((p - np.asarray(labels, dtype=np.float64)) ** 2))


def classification_metrics(probs, labels, threshold=0.5):
    """AUROC, F1, balanced accuracy (positive when prob > threshold) and Brier score."""
    p = np.asarray(probs, dtype=np.float64)
    pred = p > threshold
    return {
        "auroc": auroc(p, labels),
        "f1": f1_score(pred, labels),
        "balanced_accuracy": balanced_accuracy(pred, labels),
        "brier": brier(p, labels),
    }
