"""Platt sigmoid calibration and Youden-optimal thresholds."""

import math

import numpy as np

from ..errors import SingleClass


def platt_apply(margins, A, B):
    """``1 / (1 + exp(A * margin + B))``."""
    z = A * np.asarray(margins, dtype=np.float64) + B
    return np.exp(-np.logaddexp(0.0, z))


def platt_fit(margins, labels, tol=1e-8, max_iter=100):
    """Fit (A, B) by Newton's method on the smoothed-target log likelihood.

    Targets are ``(N+ + 1)/(N+ + 2)`` for positives and ``1/(N- + 2)`` for
    negatives. Iterates until the gradient norm drops below ``tol``.
    """
    f = np.asarray(margins, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("Platt scaling needs both classes")
    t = np.where(y, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(A, B):
        z = A * f + B
        # -[t log p + (1-t) log(1-p)] with p = sigmoid(-z)
        return float(np.sum(t * np.logaddexp(0.0, z) + (1 - t) * np.logaddexp(0.0, -z)))

    A, B = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    cur = nll(A, B)
    for _ in range(max_iter):
        p = platt_apply(f, A, B)
        d = t - p
        grad = np.array([np.dot(f, d), d.sum()])
        if np.linalg.norm(grad) < tol:
            break
        w = np.maximum(p * (1 - p), 1e-12)
        H = np.array([[np.dot(f * f, w), np.dot(f, w)], [np.dot(f, w), w.sum()]])
        H[0, 0] += 1e-12
        H[1, 1] += 1e-12
        step = np.linalg.solve(H, -grad)
        lr = 1.0
        while lr > 1e-10:
            nA, nB = A + lr * step[0], B + lr * step[1]
            new = nll(nA, nB)
            if new < cur + 1e-4 * lr * np.dot(grad, step):
                break
            lr *= 0.5
        if lr <= 1e-10:
            break
        A, B, cur = nA, nB, new
    return float(A), float(B)


def platt_gradient(margins, labels, A, B):
    f = np.asarray(margins, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    t = np.where(y, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    d = t - platt_apply(f, A, B)
    return np.array([np.dot(f, d), d.sum()])


def youden_curve(probs, labels):
    """Candidate thresholds (midpoints of consecutive distinct scores) and J at each.

    A sample is positive when its probability exceeds the threshold.
    """
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    u = np.unique(p)
    thr = 0.5 * (u[1:] + u[:-1])
    pos = np.sort(p[y])
    neg = np.sort(p[~y])
    tp = pos.size - np.searchsorted(pos, thr, side="right")
    fp = neg.size - np.searchsorted(neg, thr, side="right")
    # one division so equal J values compare equal
    return thr, (tp * neg.size - fp * pos.size) / (pos.size * neg.size)


def select_threshold(probs, labels):
    """Threshold maximising Youden's J; ties go to the lower threshold. 0.5 if all scores tie."""
    y = np.asarray(labels).astype(bool)
    if y.all() or not y.any():
        raise SingleClass("threshold selection needs both classes")
    thr, j = youden_curve(probs, labels)
    if thr.size == 0:
        return 0.5
    return float(thr[int(np.argmax(j))])
