import math

import pytest

import semopt


def test_bound_with_no_evidence_is_one_minus_alpha():
    assert semopt.recall_lower_bound(0, 0, 0.95) == pytest.approx(0.05, abs=1e-10)


def test_inverse_beta_round_trip():
    for a, b in [(1.5, 2.0), (30.0, 4.0), (0.7, 0.9)]:
        for p in [0.01, 0.3, 0.95]:
            x = semopt.reg_inc_beta_inv(p, a, b)
            assert semopt.reg_inc_beta(x, a, b) == pytest.approx(p, abs=1e-10)


def test_bound_grows_with_evidence():
    assert semopt.precision_lower_bound(90, 10) < semopt.precision_lower_bound(900, 100)


def test_reorder_matches_best_permutation():
    import itertools

    ops = [(0, 1.0, 0.5, 0.3), (1, 0.2, 0.9, 0.4), (0, 3.0, 0.6, 0.2), (2, 0.5, 0.1, 0.5)]
    order, cost = semopt.reorder(ops, 100.0)
    best = min(semopt.order_cost(ops, list(p), 100.0) for p in itertools.permutations(range(len(ops))))
    assert cost == pytest.approx(best, rel=1e-12)
    assert semopt.order_cost(ops, order, 100.0) == pytest.approx(cost, rel=1e-12)


def test_invalid_config_raises_value_error():
    with pytest.raises(ValueError):
        semopt.bench({"no_such_key": 1})
    with pytest.raises(ValueError):
        semopt.bench(targets=[[1.5, 0.5]], queries=1)


def test_run_query_meets_sample_bounds():
    out = semopt.run_query("two_filters", seed=3, targets=[[0.7, 0.7]])
    run = out["runs"][0]
    assert run["plan"]["status"] in {"feasible", "fallback_gold", "infeasible_sample"}
    if run["plan"]["status"] == "feasible":
        assert run["sample_bounds_meet"]
    assert 0 < out["sample_size"] < out["population_size"]


def test_bench_is_deterministic():
    cfg = {"queries": 3, "seed": 9, "targets": [[0.6, 0.6]], "families": ["two_filters", "filter_map"]}
    a = semopt.bench(cfg)
    b = semopt.bench(cfg, jobs=2)
    assert a["csv"] == b["csv"]
    assert a["csv"].splitlines()[0] == (
        "query_id,variant,target_r,target_p,cost,recall,precision,target_met_r,target_met_p,status"
    )
    s = a["summaries"][0]
    assert s["queries"] == 3
    assert 0.0 <= s["fraction_met_r"] <= 1.0
    assert all(math.isfinite(r["cost"]) for r in a["results"])


def test_families_listed():
    assert "easy_hard" in semopt.workload_families()
