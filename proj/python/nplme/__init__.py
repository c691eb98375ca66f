"""Nonparametric learning for regression under measurement error.

Configs are plain dicts with the same keys as the JSON files read by the
``nplme`` command-line tool.
"""

import json as _json

import numpy as _np

from . import _core
from ._core import (
    ConfigError,
    NplmeError,
    ess_bulk,
    ess_tail,
    median_heuristic,
    mmd2_unbiased,
    mmd2_weighted,
    nls_fit,
    simex_fit,
    split_rhat,
    two_sample_test,
)

__all__ = [
    "ConfigError",
    "NplmeError",
    "canonical_config",
    "config_hash",
    "ess_bulk",
    "ess_tail",
    "estimate_methods",
    "fit",
    "median_heuristic",
    "mmd2_unbiased",
    "mmd2_weighted",
    "nls_fit",
    "run_bench",
    "simex_fit",
    "simulate",
    "split_rhat",
    "two_sample_test",
]


def _text(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return _json.dumps(config)


def canonical_config(config=None):
    """Config with every default filled in."""
    return _json.loads(_core.canonical_config(_text(config)))


def config_hash(config=None):
    return _core.config_hash(_text(config))


def simulate(config=None, sigma_N=1.0, n=300, seed=1):
    """Draw (w, y, x) from the configured data-generating process."""
    return _core.simulate(_text(config), sigma_N, n, seed)


def fit(w, y, config=None, seed=1):
    """Posterior-bootstrap ensemble; ``theta`` has one row per replicate."""
    return _core.fit(_np.asarray(w, float), _np.asarray(y, float), _text(config), seed)


def estimate_methods(w, y, methods, config=None, x=None, seed=1):
    """Point estimates per method name; failed methods map to None."""
    xs = None if x is None else _np.asarray(x, float)
    return _core.estimate_methods(_np.asarray(w, float), _np.asarray(y, float), xs, _text(config), list(methods), seed)


def run_bench(config=None):
    """RMSE rows of the replication sweep."""
    return _core.run_bench(_text(config))
