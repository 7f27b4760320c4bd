"""Night-level classifier: preprocessing, ranking, boosted trees, calibration and search."""

from .calibration import platt_apply, platt_fit, select_threshold, youden_curve
from .gbdt import GBDTModel, Tree, logloss, sigmoid, train_gbdt
from .params import FIXED, SEARCH_SPACE, HyperParams, from_unit, to_unit
from .pipeline import (
    MODEL_FORMAT,
    PipelineModel,
    TrainConfig,
    fit_pipeline,
    predict_night,
    predict_nights,
    tune_hyperparams,
)
from .preprocess import Imputer, RobustScaler, robust_scale, smote
from .ranking import combine_rankings, rank_features
from .tuning import smbo
