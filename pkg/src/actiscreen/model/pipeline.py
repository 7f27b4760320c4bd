"""Night-level training pipeline and the serialisable fitted model.

Training order: median imputation, robust scaling, a patient-grouped
early-stopping hold-out, SMOTE on the rest, ensemble feature ranking,
boosted trees on the top-k features, Platt scaling fitted on
out-of-fold margins, then Youden thresholds on the out-of-fold
calibrated probabilities (night level and patient-mean level).
"""

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ModelVersionError, SingleClass, UnknownFeatureKeys
from ..features import NIGHT_FEATURES, feature_matrix, registry_version
from ..metrics import auroc
from ..splits import group_labels, stratified_group_kfold
from .calibration import platt_apply, platt_fit, select_threshold
from .gbdt import GBDTModel, train_gbdt
from .params import HyperParams
from .preprocess import Imputer, RobustScaler, smote
from .ranking import rank_features
from .tuning import smbo

MODEL_FORMAT = "actiscreen-model/1"


@dataclass(frozen=True)
class TrainConfig:
    budget: int = 50
    inner_folds: int = 5
    patience: int = 30
    early_stopping_folds: int = 5  # one of this many group folds is held out
    platt_folds: int = 5
    smote_k: int = 5
    rank_method: str = "ensemble"
    hyperparams: HyperParams = None  # fixed parameters skip the search


def _seed(*parts):
    h = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


def data_hash(X, y, groups):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(np.nan_to_num(X, nan=-1.2345e300)).tobytes())
    h.update(np.asarray(y, dtype=np.int64).tobytes())
    h.update("\x00".join(map(str, groups)).encode())
    return h.hexdigest()[:16]


@dataclass
class PreparedFold:
    """Training data after imputation, scaling, SMOTE and ranking."""

    imputer: Imputer
    scaler: RobustScaler
    X_fit: np.ndarray
    y_fit: np.ndarray
    X_stop: np.ndarray
    y_stop: np.ndarray
    ranking: list

    def transform(self, X):
        return self.scaler.apply(self.imputer.apply(X))


def prepare(X, y, groups, names, seed, cfg=TrainConfig(), ranking=None):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    imp = Imputer.fit(X)
    sc = RobustScaler.fit(imp.apply(X))
    Xs = sc.apply(imp.apply(X))
    n_groups = np.unique(np.asarray(groups)).size
    if cfg.early_stopping_folds and n_groups >= max(2, cfg.early_stopping_folds):
        tr, st = stratified_group_kfold(y, groups, cfg.early_stopping_folds, _seed(seed, "stop"))[0]
        if np.unique(y[tr]).size < 2:
            tr, st = np.arange(len(y)), np.arange(0)
    else:
        tr, st = np.arange(len(y)), np.arange(0)
    Xf, yf = smote(Xs[tr], y[tr], cfg.smote_k, _seed(seed, "smote"))
    if ranking is None:
        ranking = rank_features(Xf, yf, cfg.rank_method, names, _seed(seed, "rank"))
    return PreparedFold(imp, sc, Xf, yf, Xs[st], y[st], list(ranking))


def fit_prepared(prep, hp, seed, patience=30, n_trees=None):
    cols = sorted(prep.ranking[: hp.top_k_feats])  # registry order, so k = all ignores the ranking
    if n_trees is not None:
        return train_gbdt(prep.X_fit[:, cols], prep.y_fit, replace(hp, n_estimators=max(n_trees, 0)), seed), cols
    if len(prep.y_stop) and np.unique(prep.y_stop).size == 2:
        return train_gbdt(prep.X_fit[:, cols], prep.y_fit, hp, seed,
                          prep.X_stop[:, cols], prep.y_stop, patience), cols
    return train_gbdt(prep.X_fit[:, cols], prep.y_fit, hp, seed), cols


def tune_hyperparams(X, y, groups, names=None, budget=50, seed=0, cfg=TrainConfig()):
    """Search hyperparameters by mean inner-fold AUROC over patient-grouped folds.

    Returns ``(best_hp, trials)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    folds = []
    for i, (tr, va) in enumerate(stratified_group_kfold(y, groups, cfg.inner_folds, _seed(seed, "inner"))):
        if np.unique(y[va]).size < 2 or np.unique(y[tr]).size < 2:
            continue
        prep = prepare(X[tr], y[tr], np.asarray(groups)[tr], names, _seed(seed, "inner", i), cfg)
        folds.append((prep, prep.transform(X[va]), y[va]))

    def objective(hp):
        scores = []
        for i, (prep, Xv, yv) in enumerate(folds):
            model, cols = fit_prepared(prep, hp, _seed(seed, "trial", i), cfg.patience)
            scores.append(auroc(model.margin(Xv[:, cols]), yv))
        return float(np.mean(scores)) if scores else 0.0

    return smbo(objective, budget, _seed(seed, "smbo"))


@dataclass
class PipelineModel:
    feature_keys: list
    registry_version: str
    imputer: Imputer
    scaler: RobustScaler
    selected: list
    gbdt: GBDTModel
    platt_a: float
    platt_b: float
    night_threshold: float
    patient_threshold: float
    hyperparams: HyperParams
    manifest: dict = field(default_factory=dict)
    ranking: list = field(default_factory=list)

    @property
    def selected_idx(self):
        pos = {k: i for i, k in enumerate(self.feature_keys)}
        return [pos[k] for k in self.selected]

    def margins(self, X):
        Xs = self.scaler.apply(self.imputer.apply(X))
        return self.gbdt.margin(Xs[:, self.selected_idx])

    def predict_proba(self, X):
        return platt_apply(self.margins(X), self.platt_a, self.platt_b)

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "registry_version": self.registry_version,
            "feature_keys": list(self.feature_keys),
            "imputer_medians": self.imputer.medians.tolist(),
            "scaler_median": self.scaler.median.tolist(),
            "scaler_iqr": self.scaler.iqr.tolist(),
            "selected": list(self.selected),
            "ranking": list(self.ranking),
            "platt": {"A": self.platt_a, "B": self.platt_b},
            "night_threshold": self.night_threshold,
            "patient_threshold": self.patient_threshold,
            "hyperparams": self.hyperparams.to_dict(),
            "manifest": self.manifest,
            "gbdt": self.gbdt.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ModelVersionError(f"unsupported model format {d.get('format')!r}")
        return cls(
            list(d["feature_keys"]),
            d["registry_version"],
            Imputer(np.array(d["imputer_medians"], dtype=np.float64)),
            RobustScaler(np.array(d["scaler_median"], dtype=np.float64), np.array(d["scaler_iqr"], dtype=np.float64)),
            list(d["selected"]),
            GBDTModel.from_dict(d["gbdt"]),
            float(d["platt"]["A"]),
            float(d["platt"]["B"]),
            float(d["night_threshold"]),
            float(d["patient_threshold"]),
            HyperParams.from_dict(d["hyperparams"]),
            d.get("manifest", {}),
            list(d.get("ranking", [])),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _patient_means(probs, groups):
    uniq, inv = np.unique(np.asarray(groups), return_inverse=True)
    s = np.bincount(inv, weights=probs)
    c = np.bincount(inv)
    return uniq, inv, s / c


def fit_pipeline(X, y, groups, names=NIGHT_FEATURES, seed=0, cfg=TrainConfig(), hp=None, ranking=None,
                 trials_out=None):
    """Fit the whole night-level pipeline on one training set.

    ``hp`` (or ``cfg.hyperparams``) skips the search; ``ranking`` (column
    indices, best first) fixes the feature order instead of ranking on this data.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    groups = np.asarray(groups)
    names = list(names)
    if np.unique(y).size < 2:
        raise SingleClass("training data has a single class")
    hp = hp or cfg.hyperparams
    if hp is None:
        hp, trials = tune_hyperparams(X, y, groups, names, cfg.budget, _seed(seed, "tune"), cfg)
        if trials_out is not None:
            trials_out.extend(trials)
    prep = prepare(X, y, groups, names, _seed(seed, "final"), cfg, ranking)
    gbdt, cols = fit_prepared(prep, hp, _seed(seed, "fit"), cfg.patience)
    n_trees = len(gbdt.trees)

    # out-of-fold margins for calibration and thresholds
    oof = np.zeros(len(y))
    n_groups = np.unique(groups).size
    k = min(cfg.platt_folds, n_groups)
    if k >= 2:
        for i, (tr, va) in enumerate(stratified_group_kfold(y, groups, k, _seed(seed, "platt"))):
            if np.unique(y[tr]).size < 2:
                oof[va] = gbdt.margin(prep.transform(X[va])[:, cols])
                continue
            p2 = prepare(X[tr], y[tr], groups[tr], names, _seed(seed, "platt", i),
                         replace(cfg, early_stopping_folds=0), ranking=prep.ranking)
            m2, _ = fit_prepared(p2, hp, _seed(seed, "platt-fit", i), n_trees=n_trees)
            oof[va] = m2.margin(p2.transform(X[va])[:, cols])
    else:
        oof = gbdt.margin(prep.transform(X)[:, cols])
    A, B = platt_fit(oof, y)
    probs = platt_apply(oof, A, B)
    night_thr = select_threshold(probs, y)
    uniq, inv, pm = _patient_means(probs, groups)
    _, _, plab = group_labels(y, groups)
    patient_thr = select_threshold(pm, plab) if np.unique(plab).size == 2 else 0.5
    return PipelineModel(
        feature_keys=names,
        registry_version=registry_version(),
        imputer=prep.imputer,
        scaler=prep.scaler,
        selected=[names[j] for j in cols],
        gbdt=gbdt,
        platt_a=A,
        platt_b=B,
        night_threshold=min(max(night_thr, 1e-6), 1 - 1e-6),
        patient_threshold=min(max(patient_thr, 1e-6), 1 - 1e-6),
        hyperparams=hp,
        manifest={
            "seed": int(seed),
            "data_hash": data_hash(X, y, groups),
            "n_nights": int(len(y)),
            "patients": sorted(map(str, np.unique(groups).tolist())),
            "n_trees": n_trees,
        },
        ranking=[names[j] for j in prep.ranking],
    )


def predict_night(model, night):
    """Calibrated RBD probability for one NightFeatureVector."""
    keys = set(night.values)
    if keys != set(model.feature_keys):
        unknown = sorted(keys - set(model.feature_keys))[:5]
        absent = sorted(set(model.feature_keys) - keys)[:5]
        raise UnknownFeatureKeys(f"feature keys differ from the model (unknown {unknown}, absent {absent})")
    return float(model.predict_proba(night.vector(model.feature_keys)[None, :])[0])


def predict_nights(model, nights):
    if not nights:
        return np.empty(0)
    for n in nights[:1]:
        predict_night(model, n)
    return model.predict_proba(feature_matrix(nights, model.feature_keys))
