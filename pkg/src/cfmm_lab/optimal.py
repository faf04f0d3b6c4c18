"""Profit-maximising bundles for a single arbitrageur facing public orders."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Iterator, Sequence

import numpy as np

from .cfmm import (
    Direction,
    FeeLedger,
    Origin,
    PoolConfig,
    PoolState,
    SwapStep,
    apply_swap,
    quote,
    state_at_price,
    step_between,
    swap_fee,
)
from .errors import NoLimitState, TooManyOrders
from .orders import SwapOrder, limit_state
from .valuation import tx_potential_value

# states closer than this are treated as equal when deciding whether to emit a step
SAME_STATE_REL = 1e-12
BRUTE_FORCE_MAX_ORDERS = 4


@dataclass(frozen=True)
class Bundle:
    """An executed, ordered list of swap steps.

    ``states[0]`` is the starting state and ``states[i + 1]`` the state after
    ``steps[i]``. ``included`` lists the user orders (by index into the
    caller's order list) that execute in the bundle.
    """

    config: PoolConfig
    steps: tuple[SwapStep, ...]
    states: tuple[PoolState, ...]
    included: tuple[int, ...]
    fees: FeeLedger

    @classmethod
    def build(cls, config: PoolConfig, s0: PoolState, steps: Sequence[SwapStep]) -> Bundle:
        builder = BundleBuilder(config, s0)
        for step in steps:
            builder.push(step)
        return builder.build()

    @property
    def s0(self) -> PoolState:
        return self.states[0]

    @property
    def final_state(self) -> PoolState:
        return self.states[-1]

    def transitions(self) -> Iterator[tuple[SwapStep, PoolState, PoolState]]:
        return zip(self.steps, self.states, self.states[1:])

    def received(self, index: int) -> float:
        """Realised output of ``steps[index]`` (the reserve that left the pool)."""
        step, pre, post = self.steps[index], self.states[index], self.states[index + 1]
        return pre.y - post.y if step.direction is Direction.X_TO_Y else pre.x - post.x

    def user_step_index(self, order_index: int) -> int | None:
        for i, step in enumerate(self.steps):
            if step.origin.is_user and step.origin.ref == order_index:
                return i
        return None

    def balance_changes(self) -> dict[tuple[str, Any], tuple[float, float]]:
        """Net token flows of every participant, including the pool and the fee ledger."""
        flows: dict[tuple[str, Any], list[float]] = {("pool", None): [0.0, 0.0], ("fees", None): [0.0, 0.0]}
        for i, (step, pre, post) in enumerate(self.transitions()):
            who = flows.setdefault(step.origin.participant(), [0.0, 0.0])
            fee = swap_fee(self.config, step)
            got = self.received(i)
            flows[("pool", None)][0] += post.x - pre.x
            flows[("pool", None)][1] += post.y - pre.y
            if step.direction is Direction.X_TO_Y:
                who[0] -= (post.x - pre.x) + fee
                who[1] += got
                flows[("fees", None)][0] += fee
            else:
                who[1] -= (post.y - pre.y) + fee
                who[0] += got
                flows[("fees", None)][1] += fee
        return {k: (v[0], v[1]) for k, v in flows.items()}

    def conservation_residual(self) -> tuple[float, float]:
        """Relative imbalance of total token flows (zero when tokens are conserved)."""
        flows = self.balance_changes().values()
        sx = sum(f[0] for f in flows)
        sy = sum(f[1] for f in flows)
        scale_x = max([1.0] + [abs(f[0]) for f in flows])
        scale_y = max([1.0] + [abs(f[1]) for f in flows])
        return abs(sx) / scale_x, abs(sy) / scale_y

    def to_json(self) -> dict[str, Any]:
        return {
            "steps": [
                {**step.to_json(), "pre": pre.as_list(), "post": post.as_list()}
                for step, pre, post in self.transitions()
            ],
            "included": list(self.included),
            "final_state": self.final_state.as_list(),
            "fees": {"x": self.fees.x, "y": self.fees.y},
        }


class BundleBuilder:
    """Accumulates steps while executing them, so every bundle is valid by construction."""

    def __init__(self, config: PoolConfig, s0: PoolState) -> None:
        config.curve.check(s0)
        self.config = config
        self._steps: list[SwapStep] = []
        self._states: list[PoolState] = [s0]
        self._included: list[int] = []
        self._fees = FeeLedger()

    @property
    def state(self) -> PoolState:
        return self._states[-1]

    def push(self, step: SwapStep) -> PoolState:
        post = apply_swap(self.config, self.state, step)
        fee = swap_fee(self.config, step)
        if fee:
            self._fees = self._fees.credit("x" if step.direction is Direction.X_TO_Y else "y", fee)
        self._steps.append(step)
        self._states.append(post)
        if step.origin.is_user:
            self._included.append(step.origin.ref)
        return post

    def move_to(self, target: PoolState, origin: Origin) -> None:
        """Insert an arbitrage step to ``target`` unless the pool is already there."""
        if self.state.isclose(target, SAME_STATE_REL):
            return
        self.push(step_between(self.state, target, origin))

    def place_order(self, index: int, order: SwapOrder) -> None:
        self.push(SwapStep(order.side, order.delta_in, order.delta_out, Origin.user(index)))

    def build(self) -> Bundle:
        return Bundle(self.config, tuple(self._steps), tuple(self._states), tuple(self._included), self._fees)


def optimal_bundle(
    config: PoolConfig, s0: PoolState, orders: Sequence[SwapOrder], v: float, arb: str = "arb"
) -> Bundle:
    """Maximal-profit bundle for an arbitrageur who believes the external price is ``v``.

    Each order with non-negative potential value is front-run to its limit
    state and executed there; a final step rebalances to the no-arbitrage
    state. Orders without a limit state are skipped.
    """
    curve = config.curve
    builder = BundleBuilder(config, s0)
    for j, order in enumerate(orders):
        try:
            target = limit_state(curve, order)
        except NoLimitState:
            continue
        if tx_potential_value(order, v) >= 0:
            builder.move_to(target, Origin.arb(arb, "front"))
            builder.place_order(j, order)
    builder.move_to(state_at_price(curve, v), Origin.arb(arb, "rebalance"))
    return builder.build()


def bundle_profit(bundle: Bundle, v: float, arb: str | None = None) -> float:
    """Value at price ``v`` extracted by arbitrage steps (optionally one arbitrageur's)."""
    total = 0.0
    for step, pre, post in bundle.transitions():
        if step.origin.is_user or (arb is not None and step.origin.ref != arb):
            continue
        total += (pre.x - post.x) * v + (pre.y - post.y)
    return total


def _candidate_states(config: PoolConfig, s0: PoolState, orders: Sequence[SwapOrder], v: float, grid_n: int) -> list[PoolState]:
    curve = config.curve
    prices = [curve.spot(s0.x, s0.y), v]
    exact: list[PoolState] = [state_at_price(curve, v)]
    for order in orders:
        prices.append(order.limit_price)
        try:
            ls = limit_state(curve, order)
        except NoLimitState:
            continue
        exact.append(ls)
        prices.append(curve.spot(ls.x, ls.y))
    lo, hi = min(prices), max(prices)
    grid = np.geomspace(lo, hi, grid_n) if hi > lo and grid_n > 1 else np.array([lo])
    return [state_at_price(curve, float(p)) for p in grid] + exact


def brute_force_best_profit(
    config: PoolConfig, s0: PoolState, orders: Sequence[SwapOrder], v: float, grid_n: int = 64
) -> float:
    """Best profit found by exhaustive search over order subsets and sequences.

    Before each included order, and once at the end, the arbitrageur may stay
    put or swap the pool to any candidate state (a geometric price grid plus
    every order's exact limit state). Orders execute fee-free paying their
    full input and must receive at least their minimum output. Arbitrage
    moves are valued at ``v``. For each sequence the search keeps, per
    reachable state, only the best profit so far, which is exact because a
    move's profit depends only on its endpoints.
    """
    if len(orders) > BRUTE_FORCE_MAX_ORDERS:
        raise TooManyOrders(f"brute force supports at most {BRUTE_FORCE_MAX_ORDERS} orders")
    curve = config.curve
    cands = _candidate_states(config, s0, orders, v, grid_n)
    cand_values = [c.value_at(v) for c in cands]
    best = -math.inf
    for r in range(len(orders) + 1):
        for seq in itertools.permutations(range(len(orders)), r):
            frontier: list[tuple[PoolState, float]] = [(s0, 0.0)]
            for j in seq:
                order = orders[j]
                # arrive at each candidate from the frontier entry that maximises profit + value
                top = max(p + s.value_at(v) for s, p in frontier)
                positioned = frontier + [(c, top - cv) for c, cv in zip(cands, cand_values)]
                nxt = []
                for state, profit in positioned:
                    post, got = quote(curve, state, order.side, order.delta_in)
                    if got >= order.delta_out * (1 - 1e-12):
                        nxt.append((post, profit))
                frontier = nxt
                if not frontier:
                    break
            if not frontier:
                continue
            top = max(p + s.value_at(v) for s, p in frontier)
            end = max(max(p for _, p in frontier), top - min(cand_values))
            best = max(best, end)
    return best
