"""Feature ranking: mRMR, shadow-feature importance, |Spearman| and their ensemble.

Every ranker returns feature indices, best first. Ties are broken by feature
name (or index when no names are given).
"""

import numpy as np
from scipy.stats import rankdata

from ..errors import DegenerateLabels
from .gbdt import train_gbdt
from .params import HyperParams

SHADOW_PARAMS = HyperParams(n_estimators=50, max_depth=3, min_child_weight=1.0, learning_rate=0.1,
                            subsample=0.8, colsample_bytree=0.5, colsample_bylevel=1.0)


def _order(score, names):
    """Indices by descending score, ties by name."""
    tie = np.argsort(np.argsort(np.asarray(names, dtype=object), kind="stable"), kind="stable")
    return np.lexsort((tie, -np.asarray(score, dtype=np.float64))).tolist()


def _check(y):
    y = np.asarray(y).astype(np.int64)
    if np.unique(y).size < 2:
        raise DegenerateLabels("ranking needs both classes")
    return y


def discretize(X, bins=10):
    """Per-column quantile bin codes in ``0..bins-1``."""
    X = np.asarray(X, dtype=np.float64)
    codes = np.empty(X.shape, dtype=np.int64)
    qs = np.linspace(0, 1, bins + 1)[1:-1]
    edges = np.quantile(X, qs, axis=0)
    for j in range(X.shape[1]):
        codes[:, j] = np.searchsorted(np.unique(edges[:, j]), X[:, j], side="right")
    return codes


def _mi_many(codes, c, nb_a, nb_b):
    """Mutual information (nats) between every column of ``codes`` and vector ``c``."""
    n, F = codes.shape
    idx = (np.arange(F)[None, :] * (nb_a * nb_b) + codes * nb_b + c[:, None]).ravel()
    joint = np.bincount(idx, minlength=F * nb_a * nb_b).reshape(F, nb_a, nb_b) / n
    pa = joint.sum(axis=2, keepdims=True)
    pb = joint.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = joint * np.log(joint / (pa * pb))
    return np.nansum(t, axis=(1, 2))


def rank_mrmr(X, y, names=None, bins=10, depth=50):
    """Greedy max relevance minus mean redundancy, MI from quantile bins.

    The first ``depth`` positions are chosen greedily; the rest follow by relevance.
    """
    y = _check(y)
    F = X.shape[1]
    names = names if names is not None else [f"{j:06d}" for j in range(F)]
    codes = discretize(X, bins)
    rel = _mi_many(codes, y, bins, 2)
    chosen = []
    red = np.zeros(F)
    remaining = np.ones(F, dtype=bool)
    tie = np.argsort(np.argsort(np.asarray(names, dtype=object), kind="stable"), kind="stable")
    for step in range(min(depth, F)):
        score = rel - (red / step if step else 0.0)
        cand = np.flatnonzero(remaining)
        best = cand[np.lexsort((tie[cand], -score[cand]))[0]]
        chosen.append(int(best))
        remaining[best] = False
        red += _mi_many(codes, codes[:, best], bins, bins)
    rest = np.flatnonzero(remaining)
    rest = rest[np.lexsort((tie[rest], -rel[rest]))]
    return chosen + rest.tolist()


def rank_shadow(X, y, names=None, seed=0, params=SHADOW_PARAMS):
    """Gain importance of each feature minus the best importance among permuted copies."""
    y = _check(y)
    X = np.asarray(X, dtype=np.float64)
    F = X.shape[1]
    names = names if names is not None else [f"{j:06d}" for j in range(F)]
    rng = np.random.default_rng(seed)
    shadow = np.column_stack([rng.permutation(X[:, j]) for j in range(F)])
    model = train_gbdt(np.hstack([X, shadow]), y, params, seed=int(rng.integers(2**31)))
    imp = model.gain_importance()
    return _order(imp[:F] - imp[F:].max(), names)


def spearman_columns(X, y):
    """|Spearman correlation| of each column with ``y`` (0 for constant columns)."""
    ry = rankdata(y)
    ry = ry - ry.mean()
    R = rankdata(X, axis=0)
    R = R - R.mean(axis=0)
    den = np.sqrt((R * R).sum(axis=0) * (ry * ry).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = (R * ry[:, None]).sum(axis=0) / den
    return np.abs(np.where(den > 0, rho, 0.0))


def rank_correlation(X, y, names=None):
    y = _check(y)
    F = X.shape[1]
    names = names if names is not None else [f"{j:06d}" for j in range(F)]
    return _order(spearman_columns(np.asarray(X, dtype=np.float64), y), names)


def combine_rankings(rankings, names):
    """Average rank position across rankings; ties by name."""
    F = len(names)
    pos = np.zeros(F)
    for r in rankings:
        pos[np.asarray(r)] += np.arange(F)
    return _order(-pos / len(rankings), names)


def rank_features(X, y, method="ensemble", names=None, seed=0):
    X = np.asarray(X, dtype=np.float64)
    names = names if names is not None else [f"{j:06d}" for j in range(X.shape[1])]
    if method == "mrmr":
        return rank_mrmr(X, y, names)
    if method == "shadow":
        return rank_shadow(X, y, names, seed)
    if method == "correlation":
        return rank_correlation(X, y, names)
    if method == "ensemble":
        rs = [rank_mrmr(X, y, names), rank_shadow(X, y, names, seed), rank_correlation(X, y, names)]
        return combine_rankings(rs, names)
    raise ValueError(f"unknown ranking method {method!r}")
