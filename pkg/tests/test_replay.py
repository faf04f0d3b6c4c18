from __future__ import annotations

import json
import math

import numpy as np
import pytest

from cfmm_lab.beliefs import BeliefDistribution, sample_beliefs
from cfmm_lab.cfmm import Direction, PoolState
from cfmm_lab.errors import EmptyInput, InvalidDistribution
from cfmm_lab.replay import (
    BlockData,
    Candle,
    ReplayConfig,
    ReplayOrder,
    SchemaMismatch,
    SyntheticSpec,
    aggregate,
    assemble_blocks,
    block_rng,
    median_trend,
    read_candles_csv,
    read_orders_csv,
    read_pools_csv,
    replay,
    replay_block,
    synthetic_blocks,
    write_blocks_csv,
    write_metrics_csv,
)

S0 = PoolState(4.0, 100.0)
ORDERS = (
    ReplayOrder(1, Direction.X_TO_Y, 8, 25, "u1", 25 / 8),
    ReplayOrder(1, Direction.X_TO_Y, 30, 12, "u2", 12 / 30),
    ReplayOrder(1, Direction.Y_TO_X, 20, 10, "u3", 2.0),
)
CANDLE = Candle(1, 1.0, 4.0)
POINT = BeliefDistribution("gaussian", 1.0, 1.0, sigma_rel=0.0)


def test_zero_sigma_gives_midpoint():
    d = BeliefDistribution("gaussian", 2.0, 4.0, sigma_rel=0.0)
    assert np.all(sample_beliefs(d, 7, np.random.default_rng(0)) == 3.0)


def test_pareto_stays_in_band():
    d = BeliefDistribution("pareto", 2.0, 5.0, alpha=1.5)
    s = sample_beliefs(d, 5000, np.random.default_rng(1))
    assert s.min() >= 2.0 and s.max() <= 5.0
    # heavy right tail: some mass reaches the clip
    assert (s == 5.0).any()


def test_gaussian_mean_and_spread():
    d = BeliefDistribution("gaussian", 99.0, 101.0, sigma_rel=0.001)
    s = sample_beliefs(d, 20000, np.random.default_rng(2))
    assert s.mean() == pytest.approx(100.0, abs=0.005)
    assert s.std() == pytest.approx(0.1, rel=0.05)


def test_uniform_band():
    s = sample_beliefs(BeliefDistribution("uniform", 1.0, 2.0), (100, 3), np.random.default_rng(3))
    assert s.shape == (100, 3) and s.min() >= 1.0 and s.max() <= 2.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "cauchy", "low": 1.0, "high": 2.0},
        {"kind": "gaussian", "low": 2.0, "high": 1.0},
        {"kind": "gaussian", "low": 0.0, "high": 1.0},
        {"kind": "gaussian", "low": 1.0, "high": 2.0, "sigma_rel": -1.0},
        {"kind": "pareto", "low": 1.0, "high": 2.0, "alpha": 0.0},
    ],
)
def test_invalid_distributions(kwargs):
    with pytest.raises(InvalidDistribution):
        sample_beliefs(BeliefDistribution(**kwargs), 3, np.random.default_rng(0))


def test_distribution_json_round_trip():
    d = BeliefDistribution("pareto", 1.0, 3.0, alpha=2.5)
    assert BeliefDistribution.from_json(json.loads(json.dumps(d.to_json()))) == d


def test_hand_checked_block():
    # both arbitrageurs believe the candle midpoint 2.5
    m = replay_block(ReplayConfig(2, POINT), S0, ORDERS, CANDLE, np.random.default_rng(0))
    assert [o.filled for o in m.orders] == [False, True, False]
    assert m.orders[1].refund == pytest.approx(30 * 2.5 - 12)
    assert m.lp_refund == pytest.approx(110 - 2 * math.sqrt(1000))
    assert m.lvr_without == pytest.approx(m.lp_refund)
    assert m.ratio == pytest.approx(0.0, abs=1e-12)
    # the sell filled at its limit and got the refund on top
    assert m.orders[1].exec_price == pytest.approx((12 + 63) / 30)
    assert m.orders[1].better and not m.orders[1].tie
    assert m.conservation_residual <= 1e-9 and m.budget_residual <= 1e-9


def test_single_arbitrageur_keeps_everything():
    m = replay_block(ReplayConfig(1, POINT), S0, ORDERS, CANDLE, np.random.default_rng(0))
    assert m.ratio == 1.0 and m.lp_refund == 0.0
    assert m.orders[1].tie and not m.orders[1].better


def test_midpoint_baseline():
    cfg = ReplayConfig(2, POINT, baseline="midpoint")
    m = replay_block(cfg, S0, ORDERS, CANDLE, np.random.default_rng(0))
    assert m.lvr_without == pytest.approx(110 - 2 * math.sqrt(1000))


def test_no_lvr_gives_no_ratio():
    m = replay_block(ReplayConfig(2, POINT), S0, (), Candle(1, 25.0, 25.0), np.random.default_rng(0))
    assert m.ratio is None and m.lvr_without == 0.0


def test_fee_reduces_net_input():
    order = ReplayOrder(1, Direction.X_TO_Y, 30, 12, "u2", 0.4)
    assert order.net(0.01).delta_in == pytest.approx(29.7)
    m = replay_block(ReplayConfig(2, POINT, fees=(0.01,)), S0, (order,), CANDLE, np.random.default_rng(0))
    assert m.fee == 0.01 and m.orders[0].refund == pytest.approx(29.7 * 2.5 - 12)


def test_gas_lowers_execution_price():
    order = ReplayOrder(1, Direction.X_TO_Y, 30, 12, "u2", 0.4)
    plain = replay_block(ReplayConfig(2, POINT), S0, (order,), CANDLE, np.random.default_rng(0))
    gassy = replay_block(ReplayConfig(2, POINT, gas=3.0), S0, (order,), CANDLE, np.random.default_rng(0))
    assert gassy.orders[0].exec_price == pytest.approx(plain.orders[0].exec_price - 0.1)


def test_ratio_in_unit_interval_on_synthetic_data():
    cfg = ReplayConfig(5, BeliefDistribution("pareto", 1.0, 1.0), fees=(0.0, 0.003))
    metrics = replay(cfg, synthetic_blocks(60, seed=3))
    assert len(metrics) == 120
    ratios = [m.ratio for m in metrics if m.ratio is not None]
    assert ratios and all(-1e-12 <= r <= 1 + 1e-12 for r in ratios)


def test_replay_is_deterministic_and_parallel_safe():
    cfg = ReplayConfig(3, BeliefDistribution("gaussian", 1.0, 1.0), fees=(0.0, 0.01), seed=9)
    blocks = synthetic_blocks(12, seed=1)
    a = replay(cfg, blocks)
    assert a == replay(cfg, blocks)
    assert a == replay(cfg, blocks, workers=2)


def test_block_rng_streams_are_independent():
    assert block_rng(0, 1).random() != block_rng(0, 2).random()
    assert block_rng(0, 1).random() == block_rng(0, 1).random()


def test_aggregate_empty():
    with pytest.raises(EmptyInput):
        aggregate([])


def test_aggregate_percentages():
    cfg = ReplayConfig(2, POINT)
    m = replay_block(cfg, S0, ORDERS[1:2], CANDLE, np.random.default_rng(0))
    summary = aggregate([m, m])
    assert summary["better_pct"] == 100.0 and summary["unfilled_pct"] == 0.0
    assert summary["median_ratio"] == pytest.approx(0.0, abs=1e-12)
    assert set(summary["by_fee"]) == {"0.0"}


def test_aggregate_without_orders():
    m = replay_block(ReplayConfig(2, POINT), S0, (), CANDLE, np.random.default_rng(0))
    summary = aggregate([m])
    assert summary["orders"] == 0 and summary["better_pct"] is None


def test_median_trend_detects_decrease():
    rng = np.random.default_rng(0)
    base = rng.uniform(0.0, 1.0, 400)
    table = np.column_stack([base, base * 0.5, base * 0.5])
    (d1, lo1, hi1), (d2, lo2, hi2) = median_trend(table, reps=300)
    assert hi1 < 0 and d1 < 0
    assert d2 == 0.0 and lo2 == hi2 == 0.0


def test_synthetic_blocks_shape():
    blocks = synthetic_blocks(30, seed=4, spec=SyntheticSpec())
    assert [b.block for b in blocks] == list(range(30))
    for b in blocks:
        mid = b.candle.midpoint
        spot = b.state.y / b.state.x
        assert 0.96 < spot / mid < 1.04
        assert all(o.ref_price > 0 for o in b.orders)
    assert synthetic_blocks(30, seed=4) == blocks


def test_csv_round_trip(tmp_path):
    blocks = synthetic_blocks(8, seed=5)
    paths = write_blocks_csv(blocks, tmp_path)
    again = assemble_blocks(read_pools_csv(paths["pools"]), read_orders_csv(paths["orders"]), read_candles_csv(paths["candles"]))
    assert again == blocks
    metrics = replay(ReplayConfig(), again)
    write_metrics_csv(metrics, tmp_path / "metrics.csv")
    assert (tmp_path / "metrics.csv").read_text().startswith("block,fee,n_arbs")


def test_missing_candle(tmp_path):
    pools = {1: S0, 2: S0}
    with pytest.raises(SchemaMismatch):
        assemble_blocks(pools, [], [CANDLE])


def test_order_without_pool():
    with pytest.raises(SchemaMismatch):
        assemble_blocks({2: S0}, ORDERS, [Candle(2, 1.0, 2.0)])


def test_missing_column(tmp_path):
    p = tmp_path / "candles.csv"
    p.write_text("block,low\n1,2.0\n")
    with pytest.raises(SchemaMismatch):
        read_candles_csv(p)


def test_bad_candle():
    with pytest.raises(SchemaMismatch):
        Candle(1, 3.0, 2.0)


def test_config_json_round_trip():
    cfg = ReplayConfig(5, BeliefDistribution("pareto", 1.0, 1.0, alpha=2.0), fees=(0.0, 0.003), gas=1.5, seed=3)
    assert ReplayConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        ReplayConfig(0)
    with pytest.raises(ValueError):
        ReplayConfig(baseline="oracle")


def test_block_data_is_frozen():
    b = BlockData(1, S0, ORDERS, CANDLE)
    with pytest.raises(AttributeError):
        b.block = 2
