"""Polyhedral binary classifiers trained by mixture-of-experts EM."""

import json

import numpy as np

from ._core import (
    ConfigError,
    DataError,
    DimensionError,
    ModelParams,
    NumericalError,
    PlumeError,
    gating,
    load_model,
    log_likelihood,
    margins,
    posterior,
    predict,
    q_gradient,
    q_hessian,
    q_value,
    responsibilities,
    save_model,
    standardize,
    synthesize,
)
from . import _core

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "ModelParams",
    "NumericalError",
    "PlumeError",
    "bound_for_model",
    "cross_validate",
    "fit",
    "gating",
    "load_csv",
    "load_model",
    "log_likelihood",
    "margins",
    "posterior",
    "predict",
    "q_gradient",
    "q_hessian",
    "q_value",
    "responsibilities",
    "save_model",
    "standardize",
    "synthesize",
]


def _labels(y):
    return np.ascontiguousarray(y, dtype=np.int32)


def fit(features, labels, **config):
    """Train a model. Returns (ModelParams, report dict)."""
    params, report = _core.fit(np.asarray(features, dtype=float), _labels(labels), **config)
    return params, json.loads(report)


def cross_validate(features, labels, **options):
    """Repeated k-fold evaluation. Returns the report as a dict."""
    return json.loads(_core.cross_validate(np.asarray(features, dtype=float), _labels(labels), **options))


def bound_for_model(params, features, labels, delta=0.05):
    """Risk bound report for a fitted model, as a dict."""
    return json.loads(_core.bound_for_model(params, np.asarray(features, dtype=float), _labels(labels), delta))


def load_csv(path, label_column=-1, label_map="", categorical=(), has_header=None):
    """Returns (features, labels, feature_names, dropped_rows)."""
    return _core.load_csv(str(path), label_column, label_map, list(categorical), has_header)
