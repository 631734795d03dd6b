"""Preprocessing pipeline and fixed-shape feature windows."""

from eapred.features.preprocess import (
    SIGMA_FLOOR,
    ScalerState,
    apply_scaler,
    fit_imputer,
    fit_scaler,
    forward_fill,
    mean_impute,
    sma,
)
from eapred.features.windows import (
    ABLATED_FEATURE_NAMES,
    FEATURE_NAMES,
    WINDOW_DAYS,
    FeatureWindow,
    Prepared,
    SplitData,
    build_frame,
    build_window,
    feature_names,
    prepare,
    read_window_store,
    write_window_store,
)

__all__ = [
    "ABLATED_FEATURE_NAMES",
    "FEATURE_NAMES",
    "SIGMA_FLOOR",
    "WINDOW_DAYS",
    "FeatureWindow",
    "Prepared",
    "ScalerState",
    "SplitData",
    "apply_scaler",
    "build_frame",
    "build_window",
    "feature_names",
    "fit_imputer",
    "fit_scaler",
    "forward_fill",
    "mean_impute",
    "prepare",
    "read_window_store",
    "sma",
    "write_window_store",
]
