from __future__ import annotations

import numpy as np
import pytest

from cfmm_lab.beliefs import BeliefDistribution
from cfmm_lab.cfmm import ConstantProduct, Direction, PoolConfig, PoolState, state_at_price
from cfmm_lab.errors import InvalidPrior
from cfmm_lab.mechanisms import ArbitrageurReport, SlotInput, arbitrageur_utility, rediswap_run
from cfmm_lab.orders import SwapOrder
from cfmm_lab.probes import (
    DEFAULT_DEVIATIONS,
    ArbitrageurProfile,
    NeInstance,
    competitor_asks,
    competitor_samples,
    competitor_strategy_table,
    gamma_matrix,
    ne_probe,
    no_sybils,
    optimize_sybil,
    random_instance,
    random_ne_instance,
    sybil_probe,
    sybil_profit_gamma,
    trial_rng,
    truthfulness_probe,
)

CURVE = ConstantProduct(400.0)
S0 = PoolState(4.0, 100.0)


def test_deviation_grid_contains_truth():
    assert 1.0 in DEFAULT_DEVIATIONS and len(DEFAULT_DEVIATIONS) == 21
    assert min(DEFAULT_DEVIATIONS) == pytest.approx(0.5) and max(DEFAULT_DEVIATIONS) == pytest.approx(2.0)


def test_random_instance_is_reproducible():
    a = random_instance(trial_rng(3, 4))
    b = random_instance(trial_rng(3, 4))
    assert a == b
    assert 2 <= len(a[1].reports) <= 4


@pytest.mark.parametrize("mechanism", ["rediswap", "strawman"])
def test_truthfulness_small(mechanism):
    report = truthfulness_probe(mechanism, trials=40, seed=1)
    assert report.passed and report.max_violation <= 1e-9
    assert report.details["max_budget_residual"] <= 1e-9
    assert report.details["runs"] == 40 * 21


def test_truthfulness_degenerate_grid():
    report = truthfulness_probe("rediswap", deviation_grid=[1.0], trials=5)
    assert report.max_violation == 0.0 and report.witness is None


def test_truthfulness_rejects_zero_trials():
    with pytest.raises(ValueError):
        truthfulness_probe("rediswap", trials=0)


def test_sybil_probe_rediswap_unaffected():
    report = sybil_probe("rediswap", trials=60, seed=2)
    assert report.passed
    assert report.details["max_abs_difference"] <= 1e-9


def test_sybil_probe_strawman_exploitable():
    report = sybil_probe("strawman", trials=60, seed=2)
    assert not report.passed
    assert report.witness["utility_with"] < report.witness["utility_without"]


def test_sybil_probe_without_sybils_is_zero():
    for mechanism in ("rediswap", "strawman"):
        report = sybil_probe(mechanism, sybil_sampler=no_sybils, trials=20)
        assert report.max_violation == 0.0


def test_report_json():
    data = truthfulness_probe("rediswap", trials=2).to_json()
    assert data["probe"] == "truthfulness" and data["passed"] is True


def test_gamma_zero_when_winning_own_item():
    me = ArbitrageurProfile(4.0, b_x=10.0)
    # reporting above every competitor wins the sell order: self-sandwich, no profit
    assert sybil_profit_gamma(Direction.X_TO_Y, me, 4.0, 35.0, [2.0, 3.0]) == 0.0


def test_gamma_zero_when_unfilled():
    me = ArbitrageurProfile(1.0, b_x=10.0)
    assert sybil_profit_gamma(Direction.X_TO_Y, me, 1.0, 100.0, [3.0, 2.0]) == 0.0


def test_gamma_sell_leg_value():
    me = ArbitrageurProfile(1.0, b_x=10.0)
    # top competitor 3 wins; second-highest value is max(10*1, 10*2) - 15 = 5
    assert sybil_profit_gamma(Direction.X_TO_Y, me, 1.0, 15.0, [3.0, 2.0]) == pytest.approx(15 - 10 + 5)


def test_gamma_buy_leg_value():
    me = ArbitrageurProfile(4.0, b_y=20.0)
    # lowest competitor 1 wins buying X cheaply; second value uses the next lowest belief 2
    assert sybil_profit_gamma(Direction.Y_TO_X, me, 4.0, 12.0, [1.0, 2.0]) == pytest.approx(12 * 4 - 20 + 0)
    assert sybil_profit_gamma(Direction.Y_TO_X, me, 4.0, 6.0, [1.0, 3.0]) == pytest.approx(6 * 4 - 20 + 2)


def test_gamma_ties():
    me = ArbitrageurProfile(2.0, b_x=1.0)
    assert sybil_profit_gamma(Direction.X_TO_Y, me, 3.0, 2.5, [3.0]) > 0
    assert sybil_profit_gamma(Direction.X_TO_Y, me, 3.0, 2.5, [3.0], wins_ties=True) == 0.0


def test_gamma_rejects_non_positive_ask():
    with pytest.raises(ValueError):
        sybil_profit_gamma(Direction.X_TO_Y, ArbitrageurProfile(1.0, 1.0), 1.0, 0.0, [2.0])


def test_gamma_increases_with_ask_while_filled():
    me = ArbitrageurProfile(2.0, b_x=5.0)
    others = np.array([[3.0, 2.5]])
    t = np.linspace(10.0, 15.0, 50)
    g = gamma_matrix(Direction.X_TO_Y, me, 2.0, t, others)[:, 0]
    assert np.all(np.diff(g) >= -1e-12)
    assert gamma_matrix(Direction.X_TO_Y, me, 2.0, np.array([15.01]), others)[0, 0] == 0.0


@pytest.mark.parametrize("trial", range(25))
def test_gamma_matches_mechanism(trial):
    rng = np.random.default_rng(trial)
    v = float(rng.uniform(2.0, 8.0))
    others = [float(x) for x in rng.uniform(2.0, 8.0, size=int(rng.integers(1, 4)))]
    me = ArbitrageurProfile(v, b_x=float(rng.uniform(1, 10)), b_y=float(rng.uniform(5, 50)))
    real = (SwapOrder("XY", 8, 25, "u"),)
    reports = tuple(ArbitrageurReport(f"c{i}", q) for i, q in enumerate(others)) + (ArbitrageurReport("me", v),)
    base = arbitrageur_utility(rediswap_run(PoolConfig(CURVE), SlotInput(S0, real, reports)), "me", v)
    for side, b in ((Direction.X_TO_Y, me.b_x), (Direction.Y_TO_X, me.b_y)):
        ref = max(others) * b if side is Direction.X_TO_Y else b / min(others)
        t = ref * float(rng.uniform(0.6, 1.1))
        fake = SwapOrder(side, b, t, "sybil:me")
        out = rediswap_run(PoolConfig(CURVE), SlotInput(S0, real + (fake,), reports))
        with_fake = arbitrageur_utility(out, "me", v, [1])
        expected = sybil_profit_gamma(side, me, v, t, others)
        assert with_fake - base == pytest.approx(expected, abs=1e-9 * max(1.0, b * v))


def test_optimize_without_competitors():
    strat = optimize_sybil(ArbitrageurProfile(2.0, 1.0, 1.0), [])
    assert strat.orders() == [] and strat.expected_profit == 0.0


def test_optimize_zero_budgets():
    prior = BeliefDistribution("uniform", 1.0, 3.0)
    strat = optimize_sybil(ArbitrageurProfile(2.0), [prior])
    assert strat.orders() == []


def test_optimize_point_mass_competitor_above_belief():
    prior = BeliefDistribution("gaussian", 2.9, 3.1, sigma_rel=0.0)
    strat = optimize_sybil(ArbitrageurProfile(2.0, b_x=4.0), [prior], mc_samples=50)
    # ask exactly what the competitor is willing to pay
    assert strat.t_y == pytest.approx(4.0 * 3.0, rel=1e-12)
    assert strat.expected_profit == pytest.approx(4.0 * (3.0 - 2.0), rel=1e-9)
    assert strat.y_to_x is None


def test_optimize_point_mass_competitor_below_belief():
    prior = BeliefDistribution("gaussian", 0.9, 1.1, sigma_rel=0.0)
    strat = optimize_sybil(ArbitrageurProfile(2.0, b_y=6.0), [prior], mc_samples=50)
    assert strat.t_x == pytest.approx(6.0, rel=1e-12)
    assert strat.expected_profit == pytest.approx(6.0 * 2.0 - 6.0, rel=1e-9)


def test_optimize_is_best_on_its_sample():
    prior = BeliefDistribution("uniform", 1.5, 2.5)
    samples = competitor_samples([prior], 500, 4)
    me = ArbitrageurProfile(2.0, b_x=3.0, b_y=5.0)
    strat = optimize_sybil(me, [prior], grid_n=64, samples=samples)
    for side, t_best in ((Direction.X_TO_Y, strat.t_y), (Direction.Y_TO_X, strat.t_x)):
        lo, hi = (3.0 * 2.0, 3.0 * 2.5) if side is Direction.X_TO_Y else (5.0 / 2.0, 5.0 / 1.5)
        grid = np.linspace(lo, hi, 400)
        dense = gamma_matrix(side, me, 2.0, grid, samples).mean(axis=1).max()
        best = gamma_matrix(side, me, 2.0, np.array([t_best]), samples).mean() if t_best else 0.0
        assert best >= dense - 1e-12


def test_invalid_prior():
    with pytest.raises(InvalidPrior):
        optimize_sybil(ArbitrageurProfile(2.0, 1.0), [BeliefDistribution("uniform", 3.0, 1.0)])


def test_ne_instance_evaluator_matches_pipeline():
    inst = random_ne_instance(trial_rng(0, 0))
    rng = np.random.default_rng(5)
    for _ in range(10):
        v0, v1 = (float(x) for x in rng.uniform(inst.prior0.low, inst.prior0.high, 2))
        q = v0 * float(rng.uniform(0.9, 1.1))
        t_y1 = inst.b_x * v1 * float(rng.uniform(0.95, 1.05))
        t_x1 = inst.b_y / v1 * float(rng.uniform(0.95, 1.05))
        fast = inst.item_utility(q, v0, np.array([v1]), np.array([t_y1]), np.array([t_x1]))[0]
        me = inst.profile(v0, inst.prior0)
        t_y = inst.b_x * v1 * 0.99
        fast += gamma_matrix(Direction.X_TO_Y, me, q, np.array([t_y]), np.array([[v1]]), wins_ties=True)[0, 0]
        slow, _ = inst.pipeline_utility(q, v0, t_y, 0.0, v1, t_y1, t_x1)
        assert fast == pytest.approx(slow, rel=1e-9, abs=1e-9 * inst.s0.y)


def test_competitor_table_lookup():
    inst = NeInstance(CURVE, state_at_price(CURVE, 2.0), (), BeliefDistribution("uniform", 1.9, 2.1),
                      BeliefDistribution("uniform", 1.9, 2.1), 1.0, 2.0)
    table = competitor_strategy_table(inst, 5, 16, 100, seed=0)
    t_y, t_x = competitor_asks(table, np.array([1.9, 2.1]))
    assert t_y[0] == table[1][0] and t_x[1] == table[2][-1]


@pytest.mark.slow
def test_ne_probe_single_trial():
    report = ne_probe(trials=1, mc_samples=500, grid_n=64, deviators_per_trial=1, t_points=8, table_points=11)
    assert report.max_violation <= 0.0
    assert report.details["deviations_evaluated"] == 11 * 9 * 9
