"""Trading curves, pool states and single-step swap execution.

All quantities are 64-bit floats. A pool holds a risky asset X and a
numeraire Y; prices are always quoted as numeraire per unit of X.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable

from .errors import CurveViolation, InvalidPrice, InvalidStep, NegativeReserve

EPS_CURVE = 1e-9
BISECT_REL_TOL = 1e-12
BISECT_MAX_ITER = 200
# bracket growth is geometric (x2 per round), so 1100 rounds cover the float range
_BRACKET_ROUNDS = 1100


class Direction(str, Enum):
    X_TO_Y = "XY"
    Y_TO_X = "YX"

    def reverse(self) -> Direction:
        return Direction.Y_TO_X if self is Direction.X_TO_Y else Direction.X_TO_Y


@dataclass(frozen=True)
class PoolState:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (self.x > 0 and self.y > 0) or math.isinf(self.x) or math.isinf(self.y):
            raise NegativeReserve(f"reserves must be positive and finite, got ({self.x}, {self.y})")

    def value_at(self, v: float) -> float:
        """Mark-to-market value of the reserves at external price ``v``."""
        return self.x * v + self.y

    def isclose(self, other: PoolState, rel: float = EPS_CURVE) -> bool:
        return math.isclose(self.x, other.x, rel_tol=rel) and math.isclose(self.y, other.y, rel_tol=rel)

    def as_list(self) -> list[float]:
        return [self.x, self.y]


def bisect_decreasing(g: Callable[[float], float], hint: float) -> float:
    """Root of a strictly decreasing ``g`` on (0, inf).

    The bracket is grown geometrically from ``hint``; bisection then runs until
    the bracket no longer shrinks in floating point (well past a 1e-12 relative
    width) or the iteration cap is hit. Raises ValueError if no sign change
    exists on the positive axis.
    """
    lo = hi = hint
    for _ in range(_BRACKET_ROUNDS):
        if g(lo) > 0:
            break
        lo *= 0.5
        if lo == 0.0:
            raise ValueError("no root: function non-positive down to zero")
    else:
        raise ValueError("no root below hint")
    for _ in range(_BRACKET_ROUNDS):
        if g(hi) < 0:
            break
        hi *= 2.0
        if math.isinf(hi):
            raise ValueError("no root: function non-negative up to infinity")
    else:
        raise ValueError("no root above hint")
    if hi / lo > 4.0:
        # tighten to a factor-2 bracket so linear bisection converges in ~55 steps
        while hi / lo > 2.0:
            mid = math.sqrt(lo * hi)
            if g(mid) > 0:
                lo = mid
            else:
                hi = mid
    for _ in range(BISECT_MAX_ITER):
        mid = lo + (hi - lo) / 2
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if gm == 0:
            return mid
        if gm > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(g(lo)) <= abs(g(hi)) else hi


class TradingCurve(ABC):
    """A constant-function trading curve F(x, y) = const.

    Subclasses must supply ``F_y``, ``F_x`` and ``spot``; ``state_at_price``
    falls back to bisection on the (decreasing) spot price.
    """

    @abstractmethod
    def F_y(self, x: float) -> float: ...

    @abstractmethod
    def F_x(self, y: float) -> float: ...

    @abstractmethod
    def spot(self, x: float, y: float) -> float:
        """Marginal exchange rate |dF/dx / dF/dy| at (x, y)."""

    def scale(self) -> float:
        """A representative x reserve, used to seed bracket searches."""
        return 1.0

    def contains(self, state: PoolState, rel: float = EPS_CURVE) -> bool:
        expected = self.F_y(state.x)
        return abs(expected - state.y) <= rel * max(abs(expected), abs(state.y))

    def check(self, state: PoolState) -> None:
        if not self.contains(state):
            raise CurveViolation(f"state ({state.x}, {state.y}) is off the curve")

    def state_at_x(self, x: float) -> PoolState:
        return PoolState(x, self.F_y(x))

    def state_at_y(self, y: float) -> PoolState:
        return PoolState(self.F_x(y), y)

    def state_at_price(self, v: float) -> PoolState:
        if not (v > 0) or math.isinf(v):
            raise InvalidPrice(f"price must be positive and finite, got {v}")
        try:
            x = bisect_decreasing(lambda x: self.spot(x, self.F_y(x)) - v, self.scale())
        except ValueError as exc:
            raise InvalidPrice(f"no curve state has spot price {v}") from exc
        return self.state_at_x(x)

    def to_json(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantProduct(TradingCurve):
    """x * y = k."""

    k: float

    def __post_init__(self) -> None:
        if not (self.k > 0) or math.isinf(self.k):
            raise ValueError(f"k must be positive, got {self.k}")

    def F_y(self, x: float) -> float:
        return self.k / x

    def F_x(self, y: float) -> float:
        return self.k / y

    def spot(self, x: float, y: float) -> float:
        return y / x

    def scale(self) -> float:
        return math.sqrt(self.k)

    def state_at_price(self, v: float) -> PoolState:
        if not (v > 0) or math.isinf(v):
            raise InvalidPrice(f"price must be positive and finite, got {v}")
        return PoolState(math.sqrt(self.k / v), math.sqrt(self.k * v))

    def to_json(self) -> dict[str, Any]:
        return {"type": "constant_product", "k": self.k}


@dataclass(frozen=True)
class PoolConfig:
    curve: TradingCurve
    fee: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.fee < 1.0):
            raise ValueError(f"fee must lie in [0, 1), got {self.fee}")

    def with_fee(self, fee: float) -> PoolConfig:
        return PoolConfig(self.curve, fee)

    def to_json(self) -> dict[str, Any]:
        return {"curve": self.curve.to_json(), "fee": self.fee}


@dataclass(frozen=True)
class FeeLedger:
    """Swap fees held outside the reserves, per token."""

    x: float = 0.0
    y: float = 0.0

    def credit(self, token: str, amount: float) -> FeeLedger:
        if amount < 0:
            raise ValueError("fee credits are non-negative")
        if token == "x":
            return FeeLedger(self.x + amount, self.y)
        return FeeLedger(self.x, self.y + amount)

    def merge(self, other: FeeLedger) -> FeeLedger:
        return FeeLedger(self.x + other.x, self.y + other.y)


@dataclass(frozen=True)
class Origin:
    """Who a bundle step belongs to.

    ``kind`` is "user" (``ref`` is the order index) or "arb" (``ref`` is the
    arbitrageur id, ``role`` one of front/back/rebalance).
    """

    kind: str
    ref: Any
    role: str = "user"

    @classmethod
    def user(cls, index: int) -> Origin:
        return cls("user", index, "user")

    @classmethod
    def arb(cls, arb_id: str, role: str) -> Origin:
        if role not in ("front", "back", "rebalance"):
            raise ValueError(f"unknown arbitrage role {role!r}")
        return cls("arb", arb_id, role)

    @property
    def is_user(self) -> bool:
        return self.kind == "user"

    def participant(self) -> tuple[str, Any]:
        return ("order", self.ref) if self.is_user else ("arb", self.ref)

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "id": self.ref, "role": self.role}


@dataclass(frozen=True)
class SwapStep:
    """One swap inside a bundle.

    ``amount_in`` is what enters the reserves (net of any swap fee);
    ``amount_out`` is what leaves them.
    """

    direction: Direction
    amount_in: float
    amount_out: float
    origin: Origin

    def __post_init__(self) -> None:
        if not (self.amount_in > 0 and self.amount_out > 0):
            raise InvalidStep(f"step amounts must be positive, got in={self.amount_in} out={self.amount_out}")

    def to_json(self) -> dict[str, Any]:
        return {
            "direction": self.direction.value,
            "amount_in": self.amount_in,
            "amount_out": self.amount_out,
            "origin": self.origin.to_json(),
        }


def spot_price(curve: TradingCurve, state: PoolState) -> float:
    curve.check(state)
    return curve.spot(state.x, state.y)


def state_at_price(curve: TradingCurve, v: float) -> PoolState:
    return curve.state_at_price(v)


def quote(curve: TradingCurve, state: PoolState, direction: Direction, amount_in: float) -> tuple[PoolState, float]:
    """Post-state and output for swapping ``amount_in`` into the pool."""
    if not amount_in > 0:
        raise InvalidStep(f"amount_in must be positive, got {amount_in}")
    if direction is Direction.X_TO_Y:
        post = curve.state_at_x(state.x + amount_in)
        return post, state.y - post.y
    post = curve.state_at_y(state.y + amount_in)
    return post, state.x - post.x


def step_between(pre: PoolState, post: PoolState, origin: Origin) -> SwapStep:
    """The swap that moves the pool from ``pre`` to ``post``."""
    if post.x > pre.x:
        return SwapStep(Direction.X_TO_Y, post.x - pre.x, pre.y - post.y, origin)
    return SwapStep(Direction.Y_TO_X, post.y - pre.y, pre.x - post.x, origin)


def swap_fee(config: PoolConfig, step: SwapStep) -> float:
    """Fee charged on a step, in the step's input token.

    Users pay ``gross * f`` where ``gross * (1 - f) == amount_in``;
    arbitrage steps inserted by a mechanism are fee-free.
    """
    if not step.origin.is_user or config.fee == 0.0:
        return 0.0
    return step.amount_in * config.fee / (1.0 - config.fee)


def apply_swap(config: PoolConfig, state: PoolState, step: SwapStep) -> PoolState:
    """Execute ``step`` against ``state`` and return the post-state.

    The post-state is placed on the curve from the input side; the step's
    declared output must agree with it to within ``EPS_CURVE``.
    """
    curve = config.curve
    curve.check(state)
    if step.direction is Direction.X_TO_Y:
        if step.amount_out >= state.y:
            raise NegativeReserve("step would exhaust the Y reserve")
        post = curve.state_at_x(state.x + step.amount_in)
        declared = state.y - step.amount_out
        if abs(declared - post.y) > EPS_CURVE * max(post.y, declared):
            raise CurveViolation(f"declared output {step.amount_out} leaves the curve (expected {state.y - post.y})")
    else:
        if step.amount_out >= state.x:
            raise NegativeReserve("step would exhaust the X reserve")
        post = curve.state_at_y(state.y + step.amount_in)
        declared = state.x - step.amount_out
        if abs(declared - post.x) > EPS_CURVE * max(post.x, declared):
            raise CurveViolation(f"declared output {step.amount_out} leaves the curve (expected {state.x - post.x})")
    return post


def curve_from_json(data: dict[str, Any]) -> TradingCurve:
    kind = data.get("type", "constant_product")
    if kind != "constant_product":
        raise ValueError(f"unsupported curve type {kind!r}")
    return ConstantProduct(float(data["k"]))


def pool_from_json(data: dict[str, Any]) -> tuple[PoolConfig, PoolState | None]:
    """Parse a pool fragment: ``{"curve": {...}, "reserves": [x, y], "fee": f}``.

    Either the curve or the reserves may be omitted (but not both); a
    constant-product curve is implied by reserves alone.
    """
    reserves = data.get("reserves")
    if "reserves" not in data and isinstance(data.get("curve"), dict) and "reserves" in data["curve"]:
        reserves = data["curve"]["reserves"]
    state = PoolState(float(reserves[0]), float(reserves[1])) if reserves is not None else None
    curve_data = data.get("curve")
    if curve_data is not None and "k" in curve_data:
        curve: TradingCurve = curve_from_json(curve_data)
    elif state is not None:
        curve = ConstantProduct(state.x * state.y)
    else:
        raise ValueError("pool needs a curve constant or reserves")
    config = PoolConfig(curve, float(data.get("fee", 0.0)))
    if state is not None:
        curve.check(state)
    return config, state
