"""Potential values of pool states and orders, and per-bundle LVR."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .cfmm import PoolState, TradingCurve, state_at_price
from .errors import InvalidPrice
from .orders import SwapOrder, impact

if TYPE_CHECKING:
    from .optimal import Bundle


@dataclass(frozen=True)
class Belief:
    """An external price together with its no-arbitrage pool state."""

    v: float
    state: PoolState

    @classmethod
    def of(cls, curve: TradingCurve, v: float) -> Belief:
        return cls(v, state_at_price(curve, v))


def potential(curve: TradingCurve, state: PoolState, v: float) -> float:
    """Profit from rebalancing ``state`` to the no-arbitrage state for ``v``.

    Non-negative for any on-curve state; tiny negative results from float
    cancellation next to the no-arbitrage state are clipped to zero.
    """
    if not v > 0:
        raise InvalidPrice(f"price must be positive, got {v}")
    target = state_at_price(curve, v)
    return max(0.0, state.value_at(v) - target.value_at(v))


def tx_potential_value(order: SwapOrder, v: float) -> float:
    dx, dy = impact(order)
    return dx * v + dy


def tx_value(order: SwapOrder, v: float) -> float:
    return max(0.0, tx_potential_value(order, v))


def lvr(bundle: Bundle, s0: PoolState, v: float) -> float:
    """LP loss against an off-chain portfolio that mirrors every step at ``v``."""
    states = bundle.states
    if not states[0].isclose(s0):
        raise ValueError("bundle does not start at s0")
    total = 0.0
    for pre, post in zip(states, states[1:]):
        total += (pre.x - post.x) * v - (post.y - pre.y)
    return total
