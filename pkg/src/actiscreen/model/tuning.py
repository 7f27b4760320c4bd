"""Sequential model-based hyperparameter search (Gaussian process + expected improvement)."""

import math

import numpy as np
from scipy.stats import norm, qmc

from ..errors import BudgetTooSmall
from .params import SEARCH_SPACE, from_unit, to_unit

MIN_BUDGET = 10


def _rbf(A, B, ls):
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-0.5 * d2 / (ls * ls))


class GaussianProcess:
    """Zero-mean GP on standardised targets; length scale and noise picked by marginal likelihood."""

    LENGTH_SCALES = (0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2)
    NOISES = (1e-6, 1e-3, 1e-2, 1e-1)

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.mu = y.mean()
        self.sd = y.std() if y.std() > 0 else 1.0
        z = (y - self.mu) / self.sd
        best = None
        for ls in self.LENGTH_SCALES:
            for nz in self.NOISES:
                K = _rbf(self.X, self.X, ls) + nz * np.eye(len(z))
                try:
                    L = np.linalg.cholesky(K)
                except np.linalg.LinAlgError:
                    continue
                alpha = np.linalg.solve(L.T, np.linalg.solve(L, z))
                lml = -0.5 * z @ alpha - np.log(np.diag(L)).sum()
                if best is None or lml > best[0]:
                    best = (lml, ls, L, alpha)
        _, self.ls, self.L, self.alpha = best

    def predict(self, Xs):
        Ks = _rbf(np.asarray(Xs, dtype=np.float64), self.X, self.ls)
        mean = Ks @ self.alpha
        v = np.linalg.solve(self.L, Ks.T)
        var = np.maximum(1.0 - (v * v).sum(axis=0), 1e-12)
        return mean * self.sd + self.mu, np.sqrt(var) * self.sd


def expected_improvement(mean, std, best, xi=0.01):
    z = (mean - best - xi) / std
    return (mean - best - xi) * norm.cdf(z) + std * norm.pdf(z)


def smbo(objective, budget=50, seed=0, space=SEARCH_SPACE, n_init=15, n_candidates=2048, fixed=None):
    """Maximise ``objective(hp)`` over ``space``.

    The first ``n_init`` trials are scrambled Sobol points, the rest maximise
    expected improvement over random candidates. Returns
    ``(best_hp, trials)`` with ``trials`` a list of (hp, score); ties go to
    the earliest trial. Non-finite scores count as 0.
    """
    if budget < MIN_BUDGET:
        raise BudgetTooSmall(f"budget {budget} < {MIN_BUDGET}")
    fixed = fixed or {}
    d = len(space)
    rng = np.random.default_rng(seed)
    sob = qmc.Sobol(d, scramble=True, seed=rng.integers(2**32)).random_base2(
        max(1, math.ceil(math.log2(max(n_init, 2))))
    )
    trials, U = [], []
    for t in range(budget):
        if t < n_init:
            u = sob[t]
        else:
            scores = np.array([s for _, s in trials])
            gp = GaussianProcess(np.array(U), scores)
            cand = rng.random((n_candidates, d))
            m, s = gp.predict(cand)
            u = cand[int(np.argmax(expected_improvement(m, s, scores.max())))]
        hp = from_unit(u, space, **fixed)
        score = float(objective(hp))
        if not math.isfinite(score):
            score = 0.0
        trials.append((hp, score))
        U.append(to_unit(hp, space))
    best_i = 0
    for i, (_, s) in enumerate(trials):
        if s > trials[best_i][1]:
            best_i = i
    return trials[best_i][0], trials
