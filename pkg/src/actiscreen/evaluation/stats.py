"""Resampling intervals, stability diagnostics and two-sample statistics."""

import math

import numpy as np
from scipy.special import comb
from scipy.stats import norm, rankdata

from ..errors import ClassTooSmall, EmptyValues, KeyMismatch


def bootstrap_ci(metric, probs, labels, n=2000, seed=0, level=0.95):
    """Percentile interval of ``metric(probs, labels)`` under class-stratified resampling."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if pos.size < 2 or neg.size < 2:
        raise ClassTooSmall("bootstrap needs at least two samples per class")
    rng = np.random.default_rng(seed)
    vals = np.empty(n)
    for b in range(n):
        idx = np.concatenate([pos[rng.integers(0, pos.size, pos.size)], neg[rng.integers(0, neg.size, neg.size)]])
        vals[b] = metric(p[idx], y[idx])
    a = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(vals, (a, 100.0 - a))
    return float(lo), float(hi)


def stability_metrics(values, param_range):
    """The four dispersion measures; a measure whose denominator vanishes is ``None``."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise EmptyValues("stability needs at least two values")
    mu = float(v.mean())
    med = float(np.median(v))
    q25, q75 = np.percentile(v, (25, 75))
    lo, hi = param_range
    span = float(hi) - float(lo)
    return {
        "cv": float(v.std()) / abs(mu) if abs(mu) > 1e-12 else None,
        "mad": float(np.median(np.abs(v - med))) / abs(med) if abs(med) > 1e-12 else None,
        "iqr_width": float(q75 - q25) / span if span > 0 else None,
        "range_ratio": float(v.max() - v.min()) / abs(mu) if abs(mu) > 1e-12 else None,
    }


def stability_score(values, param_range):
    """Mean of ``1 / (1 + m)`` over the available dispersion measures ``m``."""
    ms = [m for m in stability_metrics(values, param_range).values() if m is not None]
    if not ms:
        raise EmptyValues("no stability measure is defined for these values")
    return float(np.mean([1.0 / (1.0 + m) for m in ms]))


def _rank_vector(r):
    if isinstance(r, dict):
        return r
    return {k: float(i) for i, k in enumerate(r)}


def spearman_rho(ranking_a, ranking_b):
    """Spearman correlation of two rankings (ordered key lists or key->score maps)."""
    a, b = _rank_vector(ranking_a), _rank_vector(ranking_b)
    if set(a) != set(b):
        raise KeyMismatch("rankings cover different keys")
    keys = sorted(a)
    ra = rankdata([a[k] for k in keys])
    rb = rankdata([b[k] for k in keys])
    ra -= ra.mean()
    rb -= rb.mean()
    den = math.sqrt(float(ra @ ra) * float(rb @ rb))
    return float(ra @ rb) / den if den > 0 else 0.0


def jaccard(a, b):
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def cliffs_delta(x, y):
    """``(#{x_i > y_j} - #{x_i < y_j}) / (|x| |y|)``."""
    x = np.asarray(x, dtype=np.float64)
    ys = np.sort(np.asarray(y, dtype=np.float64))
    less = np.searchsorted(ys, x, side="left").sum()
    greater = (ys.size - np.searchsorted(ys, x, side="right")).sum()
    return float(less - greater) / (x.size * ys.size)


def _exact_u_distribution(ranks, nx):
    """Counts of subsets of size ``nx`` by twice their rank sum."""
    r2 = np.rint(2 * np.asarray(ranks)).astype(np.int64)
    total = int(r2.sum())
    dp = np.zeros((nx + 1, total + 1), dtype=object)
    dp[0, 0] = 1
    for v in r2:
        for j in range(nx, 0, -1):
            dp[j, v:] = dp[j, v:] + dp[j - 1, : total + 1 - v]
    return dp[nx]


def mann_whitney_cliffs(x, y, exact_max_n=20):
    """Two-sided Mann-Whitney U test and Cliff's delta.

    ``U`` counts pairs with x above y (ties as one half). For
    ``len(x) + len(y) <= exact_max_n`` the p-value enumerates every
    assignment of the pooled mid-ranks; otherwise a normal approximation
    with tie-corrected variance and continuity correction is used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx, ny = x.size, y.size
    if nx < 1 or ny < 1:
        raise EmptyValues("both samples need at least one value")
    n = nx + ny
    ranks = rankdata(np.concatenate([x, y]))
    rx = float(ranks[:nx].sum())
    U = rx - nx * (nx + 1) / 2.0
    mu = nx * ny / 2.0
    if n <= exact_max_n:
        counts = _exact_u_distribution(ranks, nx)
        sums2 = np.arange(counts.size)
        u_all = sums2 / 2.0 - nx * (nx + 1) / 2.0
        extreme = np.abs(u_all - mu) >= abs(U - mu) - 1e-9
        p = float(sum(counts[extreme])) / float(comb(n, nx, exact=True))
    else:
        _, t = np.unique(ranks, return_counts=True)
        var = nx * ny / 12.0 * ((n + 1) - float((t**3 - t).sum()) / (n * (n - 1)))
        if var <= 0:
            p = 1.0
        else:
            z = max(abs(U - mu) - 0.5, 0.0) / math.sqrt(var)
            p = float(2.0 * norm.sf(z))
    return {"U": U, "p_two_sided": min(p, 1.0), "cliffs_delta": cliffs_delta(x, y)}
