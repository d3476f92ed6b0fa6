"""Tests for the four planning strategies and the exhaustive oracle."""

import pytest

from conftest import make_chain
from entflow.capacity import pair_capacity
from entflow.hypergraph import FidelityGrid
from entflow.physics import DEFAULT_NOISE
from entflow.strategies import (
    STRATEGY_NAMES,
    OracleBoundsError,
    _tree_shapes,
    brute_force_oracle,
    oracle_best_single,
    run_strategy,
)
from entflow.topology import link_egr


def test_run_strategy_dispatch_and_result_shape():
    path = make_chain([70.0, 70.0], f0=0.98)
    grid = FidelityGrid.uniform(16)
    for name in STRATEGY_NAMES:
        res = run_strategy(name, path, grid)
        assert res.strategy == name
        assert res.grid_size == 16
        assert res.capacity >= 0.0
        doc = res.to_json()
        assert doc["strategy"] == name
    with pytest.raises(ValueError):
        run_strategy("nope", path, grid)


def test_all_strategies_agree_on_single_link():
    # [DERIVED] A 2-node path with f0 on the grid has one obvious answer:
    # deliver the raw link at full rate. All four strategies must agree.
    path = make_chain([70.0], f0=0.98)
    grid = FidelityGrid((0.5, 0.9, 0.98))
    expected_egr = link_egr(path.edges[0])
    expected_cap = expected_egr * pair_capacity(0.98)
    for name in STRATEGY_NAMES:
        res = run_strategy(name, path, grid, f_lb=0.9)
        assert res.egr == pytest.approx(expected_egr, rel=1e-9), name
        if name.startswith("ec"):
            assert res.capacity == pytest.approx(expected_cap, rel=1e-9), name


def test_rate_lp_dominates_rate_dp():
    # The pumping DP explores a strict subset of the LP's feasible flows.
    grid = FidelityGrid.uniform(24)
    for lengths, f_lb in [([60.0] * 3, 0.85), ([50.0] * 3, 0.8), ([70.0] * 2, 0.87)]:
        path = make_chain(lengths, f0=0.98)
        dp = run_strategy("rate-dp", path, grid, f_lb=f_lb)
        lp = run_strategy("rate-lp", path, grid, f_lb=f_lb)
        assert lp.egr >= dp.egr - 1e-9 * max(1.0, dp.egr)


def test_ec_dp_dominates_ec_lp():
    # Exact incumbent fidelities avoid the standard builder's rounding loss.
    grid = FidelityGrid.uniform(25)
    path = make_chain([60.0] * 3, f0=0.97)
    dp = run_strategy("ec-dp", path, grid)
    lp = run_strategy("ec-lp", path, grid)
    assert dp.capacity >= lp.capacity - 1e-9 * max(1.0, lp.capacity)


def test_rate_dp_unreachable_bound_gives_zero():
    path = make_chain([70.0, 70.0], f0=0.9)
    res = run_strategy("rate-dp", path, FidelityGrid.uniform(20), f_lb=0.999)
    assert res.egr == 0.0
    assert res.scheme.pairs == 0


def test_rate_dp_reports_single_protocol():
    path = make_chain([60.0, 60.0], f0=0.98)
    res = run_strategy("rate-dp", path, FidelityGrid.uniform(50), f_lb=0.87)
    assert res.egr > 0.0
    assert res.scheme.pairs == 1
    assert len(res.scheme.protocols) == 1
    assert res.fidelity >= 0.87


def test_tree_shape_counts_are_catalan():
    # [DERIVED] Full binary trees over k leaves: Catalan(k-1).
    assert sum(1 for _ in _tree_shapes(0, 1)) == 1
    assert sum(1 for _ in _tree_shapes(0, 2)) == 1
    assert sum(1 for _ in _tree_shapes(0, 3)) == 2


def test_oracle_bounds_are_enforced():
    grid = FidelityGrid.uniform(4)
    with pytest.raises(OracleBoundsError):
        brute_force_oracle(make_chain([50.0] * 4), grid)  # 5 nodes
    with pytest.raises(OracleBoundsError):
        brute_force_oracle(make_chain([50.0]), FidelityGrid.uniform(7))
    with pytest.raises(OracleBoundsError):
        brute_force_oracle(make_chain([50.0]), grid, max_purify_rounds=3)


def test_oracle_single_link_closed_form():
    # [DERIVED] One link, no purification headroom worth taking at f0=0.98
    # on a coarse grid: deliver raw pairs.
    path = make_chain([70.0], f0=0.98)
    res = brute_force_oracle(path, FidelityGrid.uniform(4))
    cap, rate, fid = oracle_best_single(path, FidelityGrid.uniform(4))
    assert res.capacity >= cap - 1e-9
    assert rate <= link_egr(path.edges[0]) + 1e-9
    assert fid >= 0.98


def test_oracle_mixture_dominates_best_single():
    path = make_chain([60.0, 60.0, 60.0], f0=0.97)
    grid = FidelityGrid.uniform(5)
    mix = brute_force_oracle(path, grid)
    cap_single, _, _ = oracle_best_single(path, grid)
    assert mix.capacity >= cap_single - 1e-9 * max(1.0, cap_single)


def test_oracle_max_ensembles_restriction():
    path = make_chain([60.0, 60.0], f0=0.97)
    grid = FidelityGrid.uniform(5)
    full = brute_force_oracle(path, grid)
    limited = brute_force_oracle(path, grid, max_ensembles=1)
    assert limited.scheme.pairs <= 1
    assert limited.capacity <= full.capacity + 1e-9 * max(1.0, full.capacity)
