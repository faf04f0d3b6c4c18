"""User swap intents, their pool impact, and limit states."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, NamedTuple

from .cfmm import (
    Direction,
    FeeLedger,
    PoolConfig,
    PoolState,
    TradingCurve,
    bisect_decreasing,
    quote,
)
from .errors import InvalidOrder, NoLimitState

LIMIT_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SwapOrder:
    """Spend up to ``delta_in`` of the input token for at least ``delta_out``.

    ``delta_in`` is the amount available for trading after swap fees.
    """

    side: Direction
    delta_in: float
    delta_out: float
    owner: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.side, Direction):
            object.__setattr__(self, "side", Direction(self.side))
        for name in ("delta_in", "delta_out"):
            value = getattr(self, name)
            if not (value > 0) or math.isinf(value):
                raise InvalidOrder(f"{name} must be positive and finite, got {value}")

    @property
    def limit_price(self) -> float:
        """Worst acceptable price, numeraire per unit of X."""
        if self.side is Direction.X_TO_Y:
            return self.delta_out / self.delta_in
        return self.delta_in / self.delta_out

    def to_json(self) -> dict[str, Any]:
        return {"side": self.side.value, "delta_in": self.delta_in, "delta_out": self.delta_out, "owner": self.owner}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> SwapOrder:
        return cls(Direction(data["side"]), float(data["delta_in"]), float(data["delta_out"]), str(data.get("owner", "")))


class Impact(NamedTuple):
    dx: float
    dy: float


class Fill(NamedTuple):
    state: PoolState
    received: float
    filled: bool
    fee: FeeLedger


def impact(order: SwapOrder) -> Impact:
    """Change to the reserves when ``order`` executes at its limit state."""
    if order.side is Direction.X_TO_Y:
        return Impact(order.delta_in, -order.delta_out)
    return Impact(-order.delta_out, order.delta_in)


@lru_cache(maxsize=65536)
def _limit_state(curve: TradingCurve, side: Direction, delta_in: float, delta_out: float) -> PoolState:
    if side is Direction.X_TO_Y:
        def residual(x: float) -> float:
            return curve.F_y(x) - curve.F_y(x + delta_in) - delta_out
    else:
        def residual(y: float) -> float:
            return curve.F_x(y) - curve.F_x(y + delta_in) - delta_out
    try:
        root = bisect_decreasing(residual, curve.scale())
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise NoLimitState(f"no positive-reserve limit state for {side.value} ({delta_in}, {delta_out})") from exc
    try:
        state = curve.state_at_x(root) if side is Direction.X_TO_Y else curve.state_at_y(root)
    except Exception as exc:
        raise NoLimitState(str(exc)) from exc
    if abs(residual(root)) > LIMIT_RESIDUAL_TOL * max(1.0, delta_out, state.x, state.y):
        raise NoLimitState(f"limit-state solver did not converge for {side.value} ({delta_in}, {delta_out})")
    return state


def limit_state(curve: TradingCurve, order: SwapOrder) -> PoolState:
    """State at which ``order`` pays exactly ``delta_in`` and gets exactly ``delta_out``."""
    return _limit_state(curve, order.side, order.delta_in, order.delta_out)


def execute_at_state(config: PoolConfig, state: PoolState, order: SwapOrder) -> Fill:
    """Fill ``order`` at an arbitrary state, or leave it unfilled.

    The full ``delta_in`` enters the reserves; the order fills iff the curve
    output meets ``delta_out``. Unfilled orders leave the state untouched.
    """
    config.curve.check(state)
    post, received = quote(config.curve, state, order.side, order.delta_in)
    if received < order.delta_out:
        return Fill(state, received, False, FeeLedger())
    fee = order.delta_in * config.fee / (1.0 - config.fee)
    token = "x" if order.side is Direction.X_TO_Y else "y"
    return Fill(post, received, True, FeeLedger().credit(token, fee))
