"""Second-order gradient-boosted trees for binary logistic loss.

Trees grow level by level with exact greedy splits. The split gain is
``0.5 * (GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam))`` and a leaf gets
``-G/(H+lam)`` scaled by the learning rate. Rows are put into a canonical
(content-sorted) order before training, so the fitted model does not
depend on the order in which rows are supplied.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import EmptyTrainingSet
from .params import HyperParams

log = logging.getLogger(__name__)

_EPS = 1e-15


def sigmoid(m):
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logloss(y, m):
    """Mean logistic loss for labels ``y`` and margins ``m``."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, m) - y * m))


@dataclass
class Tree:
    """Flat binary tree; ``feat == -1`` marks a leaf. Rows with x < thr go left."""

    feat: np.ndarray
    thr: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feat[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feat[nd]] < self.thr[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feat[node] >= 0
        return node

    def predict(self, X):
        return self.value[self.apply(X)]

    @property
    def depth(self):
        d = np.zeros(len(self.feat), dtype=np.int64)
        for i in range(len(self.feat)):
            if self.feat[i] >= 0:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
        return int(d.max())

    def to_dict(self):
        def node(i):
            if self.feat[i] < 0:
                return {"leaf": float(self.value[i])}
            return {
                "feature": int(self.feat[i]),
                "threshold": float(self.thr[i]),
                "gain": float(self.gain[i]),
                "left": node(self.left[i]),
                "right": node(self.right[i]),
            }

        return node(0)

    @classmethod
    def from_dict(cls, d):
        feat, thr, left, right, value, gain = [], [], [], [], [], []

        def add(nd):
            i = len(feat)
            for lst in (feat, thr, left, right, value, gain):
                lst.append(0)
            if "leaf" in nd:
                feat[i], value[i] = -1, float(nd["leaf"])
                return i
            feat[i], thr[i], gain[i] = int(nd["feature"]), float(nd["threshold"]), float(nd["gain"])
            left[i] = add(nd["left"])
            right[i] = add(nd["right"])
            return i

        add(d)
        return cls(np.array(feat, dtype=np.int64), np.array(thr, dtype=np.float64),
                   np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                   np.array(value, dtype=np.float64), np.array(gain, dtype=np.float64))


@dataclass
class GBDTModel:
    trees: list
    learning_rate: float
    base_score: float
    n_features: int
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)

    def margin(self, X):
        X = np.asarray(X, dtype=np.float64)
        m = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            m += t.predict(X)
        return m

    def predict_proba(self, X):
        return sigmoid(self.margin(X))

    def gain_importance(self):
        imp = np.zeros(self.n_features)
        for t in self.trees:
            split = t.feat >= 0
            np.add.at(imp, t.feat[split], t.gain[split])
        return imp

    def to_dict(self):
        return {
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls([Tree.from_dict(t) for t in d["trees"]], float(d["learning_rate"]),
                   float(d["base_score"]), int(d["n_features"]))


def _n_cols(frac, n):
    return max(1, int(frac * n))


def _grow_tree(xt, order, X, g, h, rows, feats_tree, hp, rng):
    """One tree on the sampled ``rows``; returns the Tree."""
    n = X.shape[0]
    lam = hp.reg_lambda
    node_of = np.full(n, -1, dtype=np.int32)
    node_of[rows] = 0
    feat, thr, left, right, value, gain = [-1], [0.0], [-1], [-1], [0.0], [0.0]
    level = [0]
    n_level = _n_cols(hp.colsample_bylevel, len(feats_tree))
    for depth in range(hp.max_depth + 1):
        act = node_of >= 0
        G = np.bincount(node_of[act], weights=g[act], minlength=len(level))
        H = np.bincount(node_of[act], weights=h[act], minlength=len(level))
        if depth < hp.max_depth:
            feats = np.sort(rng.choice(feats_tree, n_level, replace=False)).astype(np.int32)
            bg, bf, bt = kernels.level_best_splits(
                xt, order, node_of, g, h, G, H, feats, len(level), lam, hp.min_child_weight
            )
        else:
            bf = np.full(len(level), -1, dtype=np.int32)
        child = np.full(len(level), -1, dtype=np.int64)
        nxt = []
        for k, nid in enumerate(level):
            if bf[k] >= 0:
                feat[nid], thr[nid], gain[nid] = int(bf[k]), float(bt[k]), float(bg[k])
                child[k] = len(nxt)
                for side in (left, right):
                    side[nid] = len(feat)
                    nxt.append(len(feat))
                    feat.append(-1)
                    thr.append(0.0)
                    left.append(-1)
                    right.append(-1)
                    value.append(0.0)
                    gain.append(0.0)
            else:
                value[nid] = -G[k] / (H[k] + lam) * hp.learning_rate
        if not nxt:
            break
        r = np.flatnonzero(act)
        k = node_of[r]
        split = child[k] >= 0
        r, k = r[split], k[split]
        go_right = X[r, bf[k]] >= bt[k]
        node_of[:] = -1
        node_of[r] = (child[k] + go_right).astype(np.int32)
        level = nxt
    return Tree(np.array(feat, dtype=np.int64), np.array(thr), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value), np.array(gain))


def canonical_order(X, y):
    """Row permutation that sorts rows by content (labels last as tiebreak)."""
    return np.lexsort(np.vstack([np.asarray(y, dtype=np.float64)[None, :], np.asarray(X).T]))


def train_gbdt(X, y, hp=HyperParams(), seed=0, X_val=None, y_val=None, patience=30):
    """Fit boosted trees; with a validation set, stop after ``patience`` rounds without
    improvement of its log loss and keep the best prefix of trees."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyTrainingSet("training matrix is empty")
    if np.isnan(X).any():
        raise ValueError("training matrix contains NaN; impute first")
    perm = canonical_order(X, y)
    X, y = np.ascontiguousarray(X[perm]), y[perm]
    n, F = X.shape
    xt = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(xt, axis=1, kind="stable").astype(np.int32))
    prior = min(max(y.mean(), 1e-6), 1 - 1e-6)
    base = math.log(prior / (1 - prior))
    model = GBDTModel([], hp.learning_rate, base, F)
    rng = np.random.default_rng(seed)
    m = np.full(n, base)
    model.train_loss.append(logloss(y, m))
    use_val = X_val is not None and len(X_val) > 0
    if use_val:
        X_val = np.asarray(X_val, dtype=np.float64)
        y_val = np.asarray(y_val, dtype=np.float64)
        mv = np.full(len(y_val), base)
        best = (logloss(y_val, mv), 0)
        model.val_loss.append(best[0])
    n_tree_cols = _n_cols(hp.colsample_bytree, F)
    n_rows = max(1, int(round(hp.subsample * n)))
    for it in range(hp.n_estimators):
        p = sigmoid(m)
        g = p - y
        h = np.maximum(p * (1 - p), _EPS)
        rows = np.sort(rng.choice(n, n_rows, replace=False)) if n_rows < n else np.arange(n)
        feats_tree = np.sort(rng.choice(F, n_tree_cols, replace=False))
        tree = _grow_tree(xt, order, X, g, h, rows, feats_tree, hp, rng)
        model.trees.append(tree)
        m = m + tree.predict(X)
        model.train_loss.append(logloss(y, m))
        if n_rows == n and model.train_loss[-1] > model.train_loss[-2] + 1e-9:
            log.warning("training loss rose in round %d: %.12g -> %.12g", it + 1, model.train_loss[-2],
                        model.train_loss[-1])
        if use_val:
            mv = mv + tree.predict(X_val)
            lv = logloss(y_val, mv)
            model.val_loss.append(lv)
            if lv < best[0]:
                best = (lv, it + 1)
            elif it + 1 - best[1] >= patience:
                break
    if use_val:
        model.trees = model.trees[: best[1]]
    return model
