from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfmm_lab.cfmm import ConstantProduct, Direction, Origin, PoolConfig, PoolState, SwapStep, step_between
from cfmm_lab.errors import InvalidPrice
from cfmm_lab.optimal import Bundle, bundle_profit, optimal_bundle
from cfmm_lab.orders import SwapOrder
from cfmm_lab.valuation import Belief, lvr, potential, tx_potential_value, tx_value

K400 = ConstantProduct(400.0)
S0 = PoolState(4.0, 100.0)
TX1 = SwapOrder("XY", 8, 25)
TX2 = SwapOrder("XY", 30, 12)
TX3 = SwapOrder("YX", 20, 10)


@pytest.mark.parametrize("state,v,expected", [(S0, 4.0, 36.0), (S0, 1.0, 64.0), (PoolState(10, 40), 4.0, 0.0)])
def test_potential_worked_values(state, v, expected):
    assert potential(K400, state, v) == pytest.approx(expected, abs=1e-12)


def test_potential_rejects_bad_price():
    with pytest.raises(InvalidPrice):
        potential(K400, S0, 0.0)


@pytest.mark.parametrize(
    "order,v,expected",
    [(TX2, 4.0, 108.0), (TX3, 4.0, -20.0), (TX3, 1.0, 10.0), (TX1, 4.0, 7.0)],
)
def test_tx_potential_values(order, v, expected):
    assert tx_potential_value(order, v) == pytest.approx(expected)


@pytest.mark.parametrize("order,v,expected", [(TX1, 4.0, 7.0), (TX3, 4.0, 0.0), (TX1, 1.0, 0.0)])
def test_tx_values(order, v, expected):
    assert tx_value(order, v) == pytest.approx(expected)


def test_belief_state():
    b = Belief.of(K400, 4.0)
    assert b.state.isclose(PoolState(10, 40), 1e-12)


def test_lvr_single_rebalance():
    cfg = PoolConfig(K400)
    b = Bundle.build(cfg, S0, [step_between(S0, PoolState(10, 40), Origin.arb("a", "rebalance"))])
    assert lvr(b, S0, 4.0) == pytest.approx(36.0)


def test_lvr_empty_bundle():
    assert lvr(Bundle.build(PoolConfig(K400), S0, []), S0, 4.0) == 0.0


def test_lvr_of_optimal_bundle_is_initial_potential():
    b = optimal_bundle(PoolConfig(K400), S0, [TX1, TX2, TX3], 4.0)
    assert lvr(b, S0, 4.0) == pytest.approx(36.0, rel=1e-12)


def test_lvr_checks_start_state():
    b = Bundle.build(PoolConfig(K400), S0, [])
    with pytest.raises(ValueError):
        lvr(b, PoolState(10, 40), 4.0)


prices = st.floats(min_value=1e-2, max_value=1e3)


@given(x=st.floats(min_value=1e-2, max_value=1e4), v=prices, k=st.floats(min_value=1.0, max_value=1e7))
@settings(max_examples=300)
def test_potential_non_negative(x, v, k):
    curve = ConstantProduct(k)
    assert potential(curve, curve.state_at_x(x), v) >= 0.0


@given(x=st.floats(min_value=0.5, max_value=200.0))
@settings(max_examples=100)
def test_potential_minimised_at_spot(x):
    s = K400.state_at_x(x)
    spot = K400.spot(s.x, s.y)
    grid = spot * np.geomspace(0.2, 5.0, 201)
    vals = np.array([s.value_at(v) - K400.state_at_price(v).value_at(v) for v in grid])
    assert vals.min() >= -1e-9 * s.value_at(spot)
    assert abs(grid[np.argmin(np.abs(vals))] / spot - 1) < 0.02
    assert potential(K400, s, spot) == pytest.approx(0.0, abs=1e-9 * s.value_at(spot))


@given(
    xs=st.lists(st.floats(min_value=0.5, max_value=500.0), min_size=1, max_size=6),
    v=prices,
)
@settings(max_examples=200)
def test_lvr_telescopes(xs, v):
    cfg = PoolConfig(K400)
    states = [S0] + [K400.state_at_x(x) for x in xs]
    steps = []
    for i, (a, b) in enumerate(zip(states, states[1:])):
        if a.isclose(b, 1e-12):
            continue
        origin = Origin.user(i) if i % 2 else Origin.arb("a", "front")
        steps.append(step_between(a, b, origin))
    bundle = Bundle.build(cfg, S0, steps)
    expected = potential(K400, S0, v) - potential(K400, bundle.final_state, v)
    assert lvr(bundle, S0, v) == pytest.approx(expected, rel=1e-9, abs=1e-9 * S0.value_at(v))


def test_profit_decomposes_into_lvr_plus_order_values():
    orders = [TX1, TX2, TX3]
    b = optimal_bundle(PoolConfig(K400), S0, orders, 4.0)
    included = sum(tx_value(orders[j], 4.0) for j in b.included)
    assert bundle_profit(b, 4.0) == pytest.approx(lvr(b, S0, 4.0) + included, rel=1e-12)
