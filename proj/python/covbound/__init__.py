"""Python bindings for the covbound C++ core."""

import json
import os

from ._core import (
    SCHEMA_VERSION,
    ConfigError,
    CovarianceModel,
    NumericalError,
    confidence_bound,
    effective_rank,
    empirical_orlicz_norm,
    eval_bound,
    fixed_point_delta,
    operator_norm,
    run_cli,
    run_deviation_mc,
    sample,
)
from . import _core

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "CovarianceModel",
    "NumericalError",
    "confidence_bound",
    "effective_rank",
    "empirical_orlicz_norm",
    "eval_bound",
    "fixed_point_delta",
    "from_factors",
    "model",
    "operator_norm",
    "run_cli",
    "run_deviation_mc",
    "sample",
]


def model(spec, base_dir=""):
    """Build a model from the same dict used in config files.

    >>> model({"spectrum": {"kind": "identity", "d": 3}}).label
    'identity(d=3)'
    """
    return _core._model_from_json(json.dumps(spec), os.fspath(base_dir))


def from_factors(factors, geometry="euclidean", label="factors"):
    """Model with covariance sum_k f_k f_k^T, one factor per row."""
    return _core._from_factors(factors, geometry, label)
