"""Nested and leave-one-dataset-out cross-validation, stability and ablation."""

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..aggregate import aggregate_patients
from ..errors import InsufficientPatients, KExceedsRegistry, SingleDataset
from ..metrics import auroc, classification_metrics
from ..model.params import SEARCH_SPACE, HyperParams
from ..model.pipeline import TrainConfig, _seed, fit_pipeline
from ..model.ranking import combine_rankings
from ..splits import assert_disjoint, group_labels, stratified_group_kfold
from .stats import bootstrap_ci, jaccard, spearman_rho, stability_score

METRICS = ("auroc", "f1", "balanced_accuracy", "brier")


def parallel_map(fn, tasks, jobs=1):
    """``[fn(t) for t in tasks]``, optionally in worker processes; order is preserved."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def _safe_metrics(probs, labels, thr):
    if np.unique(labels).size < 2:
        return {k: float("nan") for k in METRICS}
    return classification_metrics(probs, labels, thr)


def evaluate_split(model, X, y, groups):
    """Night- and patient-level metrics of a fitted pipeline on held-out rows."""
    probs = model.predict_proba(X)
    night = _safe_metrics(probs, y, model.night_threshold)
    pats = aggregate_patients(probs, groups, model.night_threshold, model.patient_threshold)
    _, _, plab = group_labels(y, groups)
    score = np.array([p.mean_prob for p in pats])
    final = np.array([p.final for p in pats])
    if np.unique(plab).size == 2:
        patient = {
            "auroc": auroc(score, plab),
            "f1": classification_metrics(final.astype(float), plab, 0.5)["f1"],
            "balanced_accuracy": classification_metrics(final.astype(float), plab, 0.5)["balanced_accuracy"],
            "brier": float(np.mean((score - plab) ** 2)),
        }
    else:
        patient = {k: float("nan") for k in METRICS}
    return probs, night, patient, pats, plab


@dataclass
class FoldResult:
    name: str
    seed: int
    train_patients: list
    val_patients: list
    night: dict
    patient: dict
    hyperparams: dict
    selected: list
    ranking: list
    night_threshold: float
    patient_threshold: float
    val_index: list = field(default_factory=list)
    val_probs: list = field(default_factory=list)
    ci: dict = field(default_factory=dict)


@dataclass
class CVReport:
    scheme: str
    seed: int
    folds: list

    def summary(self):
        out = {}
        for level in ("night", "patient"):
            for m in METRICS:
                v = np.array([getattr(f, level)[m] for f in self.folds], dtype=np.float64)
                v = v[np.isfinite(v)]
                if v.size:
                    lo, hi = np.percentile(v, (2.5, 97.5))
                    out[f"{level}_{m}"] = {"mean": float(v.mean()), "lo": float(lo), "hi": float(hi)}
        return out

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "seed": self.seed,
            "interval": "percentile over folds (2.5, 97.5)",
            "summary": self.summary(),
            "folds": [f.__dict__ for f in self.folds],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(d["scheme"], d["seed"], [FoldResult(**f) for f in d["folds"]])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold"] + [f"night_{m}" for m in METRICS] + [f"patient_{m}" for m in METRICS]
                   + ["n_selected", "night_threshold", "patient_threshold"])
        for f in self.folds:
            w.writerow([f.name] + [repr(f.night[m]) for m in METRICS] + [repr(f.patient[m]) for m in METRICS]
                       + [len(f.selected), repr(f.night_threshold), repr(f.patient_threshold)])
        return buf.getvalue()

    def pooled_predictions(self, repeat=None):
        """(row index, probability) pairs over folds, optionally of one repeat."""
        idx, pr = [], []
        for f in self.folds:
            if repeat is None or f.name.startswith(f"r{repeat}-"):
                idx.extend(f.val_index)
                pr.extend(f.val_probs)
        return np.array(idx, dtype=np.int64), np.array(pr)


def roc_points(probs, labels):
    """ROC curve (fpr, tpr, threshold) over all distinct scores, highest first."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    thr = np.unique(p)[::-1]
    pts = [(0.0, 0.0, float("inf"))]
    for t in thr:
        pred = p >= t
        pts.append((float((pred & ~y).sum() / max(1, (~y).sum())), float((pred & y).sum() / max(1, y.sum())), float(t)))
    return pts


def roc_csv(probs, labels):
    buf = io.StringIO()
    buf.write("fpr,tpr,threshold\n")
    for f, t, th in roc_points(probs, labels):
        buf.write(f"{f!r},{t!r},{th!r}\n")
    return buf.getvalue()


def _run_fold(task):
    name, seed, X, y, groups, names, tr, va, cfg, ranking, boot = task
    assert_disjoint(groups, tr, va)
    model = fit_pipeline(X[tr], y[tr], groups[tr], names, seed, cfg, ranking=ranking)
    probs, night, patient, pats, plab = evaluate_split(model, X[va], y[va], groups[va])
    ci = {}
    if boot and np.unique(plab).size == 2 and min(np.bincount(plab)) >= 2:
        score = np.array([p.mean_prob for p in pats])
        ci["patient_auroc"] = bootstrap_ci(auroc, score, plab, boot, _seed(seed, "boot"))
    return FoldResult(
        name=name,
        seed=int(seed),
        train_patients=sorted(map(str, np.unique(groups[tr]).tolist())),
        val_patients=sorted(map(str, np.unique(groups[va]).tolist())),
        night=night,
        patient=patient,
        hyperparams=model.hyperparams.to_dict(),
        selected=list(model.selected),
        ranking=list(model.ranking),
        night_threshold=model.night_threshold,
        patient_threshold=model.patient_threshold,
        val_index=[int(i) for i in va],
        val_probs=[float(v) for v in probs],
        ci=ci,
    )


def nested_cv(X, y, groups, names, seed=0, cfg=TrainConfig(), outer_folds=5, repeats=5, jobs=1):
    """Repeated patient-grouped outer folds; each training part runs the full pipeline
    (inner-fold hyperparameter search included)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    groups = np.asarray(groups)
    uniq, _, plab = group_labels(y, groups)
    if uniq.size < 10 or np.unique(plab).size < 2:
        raise InsufficientPatients("nested CV needs at least 10 patients from both classes")
    tasks = []
    for r in range(repeats):
        for k, (tr, va) in enumerate(stratified_group_kfold(y, groups, outer_folds, _seed(seed, "outer", r))):
            tasks.append((f"r{r}-f{k}", _seed(seed, "fold", r, k), X, y, groups, list(names), tr, va, cfg, None, 0))
    return CVReport("nested", int(seed), parallel_map(_run_fold, tasks, jobs))


def lodo_cv(X, y, groups, datasets, names, seed=0, cfg=TrainConfig(), jobs=1, bootstrap=2000, ranking=None):
    """Hold out each dataset in turn and train on the others."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    groups = np.asarray(groups)
    datasets = np.asarray(datasets)
    cohorts = sorted(set(datasets.tolist()))
    if len(cohorts) < 2:
        raise SingleDataset("LODO needs at least two datasets")
    tasks = []
    for d in cohorts:
        va = np.flatnonzero(datasets == d)
        tr = np.flatnonzero(datasets != d)
        tasks.append((str(d), _seed(seed, "lodo", d), X, y, groups, list(names), tr, va, cfg, ranking, bootstrap))
    return CVReport("lodo", int(seed), parallel_map(_run_fold, tasks, jobs))


def consensus_ranking(report, names):
    pos = {k: i for i, k in enumerate(names)}
    rankings = [[pos[k] for k in f.ranking] for f in report.folds if f.ranking]
    return [names[j] for j in combine_rankings(rankings, list(names))]


@dataclass
class StabilityReport:
    scores: dict
    spearman: list
    jaccard: list
    consensus: list

    def to_dict(self):
        off = [v for i, row in enumerate(self.spearman) for j, v in enumerate(row) if i < j]
        jac = [v for i, row in enumerate(self.jaccard) for j, v in enumerate(row) if i < j]
        return {
            "stability": self.scores,
            "mean_stability": float(np.mean(list(self.scores.values()))) if self.scores else None,
            "spearman_matrix": self.spearman,
            "mean_spearman": float(np.mean(off)) if off else None,
            "jaccard_matrix": self.jaccard,
            "mean_jaccard": float(np.mean(jac)) if jac else None,
            "consensus_ranking": self.consensus,
        }


def stability(report, names, space=SEARCH_SPACE):
    scores = {}
    for name, (lo, hi, _) in space.items():
        vals = [f.hyperparams[name] for f in report.folds]
        if len(vals) >= 2:
            scores[name] = stability_score(vals, (lo, hi))
    n = len(report.folds)
    sp = [[1.0] * n for _ in range(n)]
    jc = [[1.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = report.folds[i], report.folds[j]
            sp[i][j] = sp[j][i] = spearman_rho(a.ranking, b.ranking)
            jc[i][j] = jc[j][i] = jaccard(a.selected, b.selected)
    return StabilityReport(scores, sp, jc, consensus_ranking(report, names))


def feature_ablation(X, y, groups, datasets, names, consensus, ks, seed=0, cfg=TrainConfig(), hp=None, jobs=1):
    """LODO patient AUROC (mean over held-out datasets) using the top ``k`` consensus features."""
    names = list(names)
    hp = hp or cfg.hyperparams or HyperParams()
    pos = {k: i for i, k in enumerate(names)}
    ranking = [pos[k] for k in consensus]
    curve = []
    for k in ks:
        if k > len(names) or k < 1:
            raise KExceedsRegistry(f"k={k} outside 1..{len(names)}")
        rep = lodo_cv(X, y, groups, datasets, names, seed, replace(cfg, hyperparams=replace(hp, top_k_feats=int(k))),
                      jobs, bootstrap=0, ranking=ranking)
        vals = [f.patient["auroc"] for f in rep.folds]
        curve.append({"k": int(k), "auroc": float(np.nanmean(vals)), "per_dataset": vals})
    return curve
