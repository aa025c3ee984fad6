"""Cost-based optimization of semantic filter and map pipelines under recall and
precision targets with credible-interval guarantees."""

import json

from ._core import (
    order_cost,
    precision_lower_bound,
    recall_lower_bound,
    reg_inc_beta,
    reg_inc_beta_inv,
    reorder,
    workload_families,
)
from . import _core

__all__ = [
    "bench",
    "order_cost",
    "precision_lower_bound",
    "recall_lower_bound",
    "reg_inc_beta",
    "reg_inc_beta_inv",
    "reorder",
    "run_query",
    "workload_families",
]


def bench(config=None, **overrides):
    """Runs a batch of synthetic queries. `config` uses the CLI's JSON keys; keyword
    arguments override it. Returns a dict with config, summaries, results and csv."""
    merged = dict(config or {})
    merged.update(overrides)
    return json.loads(_core._bench(json.dumps(merged)))


def run_query(family, seed=0, config=None, **overrides):
    """Generates, profiles, optimizes and executes one query at each configured target."""
    merged = dict(config or {})
    merged.update(overrides)
    return json.loads(_core._run_query(family, seed, json.dumps(merged)))
