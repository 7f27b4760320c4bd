"""Engineered motion features per bout and per night."""

from .local import (
    autocorr_features,
    autocorrelation,
    distributional,
    energy,
    hurst_rs,
    peak_features,
    poincare,
    sample_entropy,
    spectral_features,
)
from .night import (
    AGG_STATS,
    GLOBAL_FEATURES,
    LOCAL_FEATURES,
    NIGHT_FEATURES,
    BoutFeatures,
    FeatureConfig,
    NightFeatureVector,
    aggregate_night,
    bout_features,
    extract_night,
    feature_matrix,
    global_features,
    hopkins,
    kde_peaks,
    nights_from_csv,
    nights_from_json,
    nights_json_version,
    nights_to_csv,
    nights_to_json,
    registry_version,
    summary_stats,
)
