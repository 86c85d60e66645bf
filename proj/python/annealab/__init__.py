"""Simulated annealing experiments on catalog energy landscapes."""

import json

from ._core import (
    AnnealabError,
    Landscape,
    catalog_ids,
    gibbs_tail,
    landscape,
    rate_exponent,
    simulate_chain,
    spectral_gap,
)
from . import _core

__all__ = [
    "AnnealabError",
    "Landscape",
    "anneal",
    "catalog_ids",
    "depth",
    "fit",
    "gibbs_tail",
    "landscape",
    "rate_exponent",
    "simulate_chain",
    "spectral",
    "spectral_gap",
    "validate_schedule",
]


def depth(id="double_well", params=None, cells=16385):
    """Critical depth report of a normalized catalog landscape."""
    return json.loads(_core.depth_json(id, params or {}, cells))


def validate_schedule(theta, depth_ratio, eta0=1.0, horizon=1_000_000):
    return json.loads(_core.validate_schedule_json(theta, eta0, depth_ratio, horizon))


def spectral(id, params, taus, cells=2049):
    return json.loads(_core.spectral_json(id, params, list(taus), cells))


def fit(tail_csv_text, burn_in_theta, min_exceed=5):
    return json.loads(_core.fit_json(tail_csv_text, burn_in_theta, min_exceed))


def anneal(config, workers=1, force=False, restart=False):
    """Run an experiment from a config dict; returns the parsed result.json."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_core.run_anneal_json(text, workers, force, restart))
