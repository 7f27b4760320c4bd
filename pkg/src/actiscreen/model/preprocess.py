"""Median imputation, robust scaling and SMOTE oversampling."""

from dataclasses import dataclass

import numpy as np

from ..errors import SingleMinoritySample


@dataclass
class Imputer:
    medians: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        med = np.zeros(X.shape[1])
        for j in range(X.shape[1]):
            col = X[:, j]
            col = col[~np.isnan(col)]
            if col.size:
                med[j] = np.median(col)
        return cls(med)

    def apply(self, X):
        X = np.array(X, dtype=np.float64)
        r, c = np.nonzero(np.isnan(X))
        X[r, c] = self.medians[c]
        return X


@dataclass
class RobustScaler:
    """``(x - median) / IQR`` per column; a zero IQR divides by 1."""

    median: np.ndarray
    iqr: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        q25, med, q75 = np.percentile(X, (25, 50, 75), axis=0)
        iqr = q75 - q25
        return cls(med, np.where(iqr > 0, iqr, 1.0))

    def apply(self, X):
        return (np.asarray(X, dtype=np.float64) - self.median) / self.iqr


def robust_scale(X):
    """Fit a scaler on ``X`` and return (scaler, scaled X)."""
    sc = RobustScaler.fit(X)
    return sc, sc.apply(X)


def smote(X, y, k=5, seed=0):
    """Oversample the minority class to the majority count.

    Each synthetic row is ``x + u * (nb - x)`` with ``nb`` one of the ``k``
    nearest minority neighbours of a randomly drawn minority row ``x``.
    Synthetic rows are appended after the originals.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2 or counts[0] == counts[1]:
        return X.copy(), y.copy()
    minority = classes[np.argmin(counts)]
    n_new = int(counts.max() - counts.min())
    Xm = X[y == minority]
    nm = Xm.shape[0]
    if nm < 2:
        raise SingleMinoritySample("SMOTE needs at least two minority samples")
    k = min(k, nm - 1)
    sq = (Xm * Xm).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * Xm @ Xm.T
    np.fill_diagonal(d2, np.inf)
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rng = np.random.default_rng(seed)
    base = rng.integers(0, nm, n_new)
    pick = nbrs[base, rng.integers(0, k, n_new)]
    u = rng.random(n_new)[:, None]
    synth = Xm[base] + u * (Xm[pick] - Xm[base])
    return np.vstack([X, synth]), np.concatenate([y, np.full(n_new, minority)])
