"""Sealed-bid MEV auctions over a pool's pending orders.

Two mechanisms share one outcome type:

* ``strawman_run`` sells the whole block to the arbitrageur with the highest
  total MEV at a second price and refunds pro rata to each item's value.
* ``rediswap_run`` auctions every order (and the pool's initial state)
  separately; each winner sandwiches its item back to ``s0`` and the
  runner-up's value is refunded to the order owner (or to LPs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .cfmm import Direction, FeeLedger, Origin, PoolConfig, PoolState, pool_from_json, state_at_price
from .errors import NoLimitState, NoReports, UnknownArbitrageur, UnknownOrder
from .optimal import Bundle, BundleBuilder, optimal_bundle
from .orders import SwapOrder, limit_state
from .valuation import potential, tx_potential_value, tx_value

INITIAL_STATE = "initial-state"
# relative gap under which two bids count as tied in the strawman auction
TIE_REL = 1e-12


@dataclass(frozen=True)
class ArbitrageurReport:
    arb: str
    q: float

    def __post_init__(self) -> None:
        if not (self.q > 0) or math.isinf(self.q):
            raise ValueError(f"reported price must be positive and finite, got {self.q}")

    def to_json(self) -> dict[str, Any]:
        return {"arb": self.arb, "q": self.q}


@dataclass(frozen=True)
class SlotInput:
    s0: PoolState
    orders: tuple[SwapOrder, ...]
    reports: tuple[ArbitrageurReport, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "orders", tuple(self.orders))
        object.__setattr__(self, "reports", tuple(self.reports))
        ids = [r.arb for r in self.reports]
        if len(set(ids)) != len(ids):
            raise ValueError("arbitrageur ids must be unique")

    def with_orders(self, orders: Sequence[SwapOrder]) -> SlotInput:
        return SlotInput(self.s0, tuple(orders), self.reports, self.seed)

    def with_reports(self, reports: Sequence[ArbitrageurReport]) -> SlotInput:
        return SlotInput(self.s0, self.orders, tuple(reports), self.seed)

    def to_json(self, config: PoolConfig) -> dict[str, Any]:
        return {
            "pool": {**config.to_json(), "reserves": self.s0.as_list()},
            "orders": [o.to_json() for o in self.orders],
            "reports": [r.to_json() for r in self.reports],
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> tuple[PoolConfig, SlotInput]:
        config, s0 = pool_from_json(data["pool"])
        if s0 is None:
            raise ValueError("slot input pool needs reserves")
        orders = tuple(SwapOrder.from_json(o) for o in data.get("orders", []))
        reports = tuple(ArbitrageurReport(str(r["arb"]), float(r["q"])) for r in data.get("reports", []))
        return config, cls(s0, orders, reports, int(data.get("seed", 0)))


@dataclass(frozen=True)
class ItemAudit:
    """Auction record for one item: an order index, the initial state, or the whole block."""

    item: Any
    winner: str | None
    winning_value: float
    second_value: float
    note: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "item": self.item,
            "winner": self.winner,
            "winning_value": self.winning_value,
            "second_value": self.second_value,
            "note": self.note,
        }


@dataclass(frozen=True)
class MechanismOutcome:
    mechanism: str
    config: PoolConfig
    slot: SlotInput
    bundle: Bundle
    payments: dict[str, float]
    refunds: dict[int, float]
    lp_refund: float
    audit: tuple[ItemAudit, ...] = field(default_factory=tuple)

    def budget_residual(self) -> float:
        """Relative gap between total payments and total refunds."""
        paid = sum(self.payments.values())
        refunded = sum(self.refunds.values()) + self.lp_refund
        return abs(paid - refunded) / max(1.0, paid, refunded)

    def settlement(self) -> dict[tuple[str, Any], tuple[float, float]]:
        """Token flows per participant after execution, payments and refunds.

        Payments and refunds move numeraire only, so the settled flows still
        sum to zero when the bundle conserves tokens and the budget balances.
        """
        flows = {k: list(v) for k, v in self.bundle.balance_changes().items()}
        for arb, paid in self.payments.items():
            flows.setdefault(("arb", arb), [0.0, 0.0])[1] -= paid
        for j, refund in self.refunds.items():
            flows.setdefault(("order", j), [0.0, 0.0])[1] += refund
        flows.setdefault(("lp", None), [0.0, 0.0])[1] += self.lp_refund
        return {k: (v[0], v[1]) for k, v in flows.items()}

    def to_json(self) -> dict[str, Any]:
        return {
            "mechanism": self.mechanism,
            "bundle": self.bundle.to_json(),
            "payments": dict(self.payments),
            "refunds": {str(j): r for j, r in self.refunds.items()},
            "lp_refund": self.lp_refund,
            "audit": [a.to_json() for a in self.audit],
        }


def _second(values: Sequence[float], winner: int) -> float:
    rest = [v for i, v in enumerate(values) if i != winner]
    return max(rest) if rest else 0.0


def _require_reports(slot: SlotInput) -> None:
    if not slot.reports:
        raise NoReports("at least one arbitrageur report is required")


def _order_values(config: PoolConfig, order: SwapOrder, q: float) -> float:
    """V_q(order), or 0 when the order cannot execute at any limit state."""
    try:
        limit_state(config.curve, order)
    except NoLimitState:
        return 0.0
    return tx_value(order, q)


def strawman_run(config: PoolConfig, slot: SlotInput) -> MechanismOutcome:
    """Sell all MEV to the highest total bidder at the second-highest total."""
    _require_reports(slot)
    curve = config.curve
    phis = [potential(curve, slot.s0, r.q) for r in slot.reports]
    values = [[_order_values(config, o, r.q) for o in slot.orders] for r in slot.reports]
    mev = [phi + sum(vs) for phi, vs in zip(phis, values)]
    best = max(mev)
    tied = [i for i, m in enumerate(mev) if m >= best - TIE_REL * abs(best)]
    rng = np.random.default_rng(slot.seed)
    w = int(rng.choice(tied))
    note = f"tie among {[slot.reports[i].arb for i in tied]} broken by seed" if len(tied) > 1 else ""
    if len(slot.reports) == 1:
        note = "single bidder: second price is 0"
    winner = slot.reports[w]
    payment = _second(mev, w)
    bundle = optimal_bundle(config, slot.s0, slot.orders, winner.q, arb=winner.arb)
    if mev[w] > 0:
        share = payment / mev[w]
        refunds = {j: values[w][j] * share for j in range(len(slot.orders))}
        lp_refund = phis[w] * share
    else:
        refunds = {j: 0.0 for j in range(len(slot.orders))}
        lp_refund = 0.0
    payments = {r.arb: 0.0 for r in slot.reports}
    payments[winner.arb] = payment
    audit = (ItemAudit("block", winner.arb, mev[w], payment, note),)
    return MechanismOutcome("strawman", config, slot, bundle, payments, refunds, lp_refund, audit)


def _argmax_lowest(values: Sequence[float]) -> int:
    best = max(values)
    return next(i for i, v in enumerate(values) if v == best)


def rediswap_run(config: PoolConfig, slot: SlotInput) -> MechanismOutcome:
    """Per-item second-price auctions with sandwiches that return the pool to ``s0``."""
    _require_reports(slot)
    curve = config.curve
    s0 = slot.s0
    reports = slot.reports
    single = len(reports) == 1
    builder = BundleBuilder(config, s0)
    payments = {r.arb: 0.0 for r in reports}
    refunds: dict[int, float] = {}
    audit: list[ItemAudit] = []
    for j, order in enumerate(slot.orders):
        refunds[j] = 0.0
        try:
            target = limit_state(curve, order)
        except NoLimitState:
            audit.append(ItemAudit(j, None, 0.0, 0.0, "skipped: no limit state"))
            continue
        bids = [tx_potential_value(order, r.q) for r in reports]
        w = _argmax_lowest(bids)
        if bids[w] < 0:
            audit.append(ItemAudit(j, None, bids[w], 0.0, "skipped: negative value for every bidder"))
            continue
        arb = reports[w].arb
        price = _second([max(0.0, b) for b in bids], w)
        builder.move_to(target, Origin.arb(arb, "front"))
        builder.place_order(j, order)
        builder.move_to(s0, Origin.arb(arb, "back"))
        payments[arb] += price
        refunds[j] = price
        audit.append(ItemAudit(j, arb, bids[w], price, "single bidder: second price is 0" if single else ""))
    phis = [potential(curve, s0, r.q) for r in reports]
    w = _argmax_lowest(phis)
    arb = reports[w].arb
    price = _second(phis, w)
    builder.move_to(state_at_price(curve, reports[w].q), Origin.arb(arb, "rebalance"))
    payments[arb] += price
    audit.append(ItemAudit(INITIAL_STATE, arb, phis[w], price, "single bidder: second price is 0" if single else ""))
    return MechanismOutcome("rediswap", config, slot, builder.build(), payments, refunds, price, tuple(audit))


MECHANISMS = {"strawman": strawman_run, "rediswap": rediswap_run}


def run_mechanism(name: str, config: PoolConfig, slot: SlotInput) -> MechanismOutcome:
    try:
        fn = MECHANISMS[name]
    except KeyError:
        raise ValueError(f"unknown mechanism {name!r}") from None
    return fn(config, slot)


def user_utility(outcome: MechanismOutcome, order_index: int) -> float:
    """Holdings of an order's owner after the mechanism, weighted at the order's own rate.

    Owners start with only their gross input; refunds arrive in numeraire.
    """
    if not 0 <= order_index < len(outcome.slot.orders):
        raise UnknownOrder(order_index)
    order = outcome.slot.orders[order_index]
    gross = order.delta_in / (1.0 - outcome.config.fee)
    refund = outcome.refunds.get(order_index, 0.0)
    step = outcome.bundle.user_step_index(order_index)
    received = outcome.bundle.received(step) if step is not None else 0.0
    if order.side is Direction.X_TO_Y:
        rate = order.delta_out / order.delta_in
        x_hold = 0.0 if step is not None else gross
        y_hold = received + refund
    else:
        rate = order.delta_in / order.delta_out
        x_hold = received
        y_hold = refund if step is not None else gross + refund
    return rate * x_hold + y_hold


def arbitrageur_utility(
    outcome: MechanismOutcome, arb_id: str, true_belief: float, sybil_set: Iterable[int] = ()
) -> float:
    """Arbitrageur profit at its true belief: own steps, own included Sybil orders plus their refunds, minus payment."""
    if arb_id not in outcome.payments:
        raise UnknownArbitrageur(arb_id)
    flows = outcome.bundle.balance_changes()
    dx, dy = flows.get(("arb", arb_id), (0.0, 0.0))
    total = dx * true_belief + dy
    included = set(outcome.bundle.included)
    for j in set(sybil_set):
        if not 0 <= j < len(outcome.slot.orders):
            raise UnknownOrder(j)
        if j in included:
            sx, sy = flows[("order", j)]
            total += sx * true_belief + sy + outcome.refunds.get(j, 0.0)
    return total - outcome.payments[arb_id]


@dataclass(frozen=True)
class SlotResult:
    outcome: MechanismOutcome
    state: PoolState
    fees: FeeLedger
    deferred_orders: tuple[tuple[float, SwapOrder], ...] = ()


def run_slot(
    config: PoolConfig,
    s0: PoolState,
    order_feed: Iterable[tuple[float, SwapOrder]],
    report_feed: Iterable[tuple[float, ArbitrageurReport]],
    cutoff: float,
    seed: int = 0,
    fees: FeeLedger = FeeLedger(),
) -> SlotResult:
    """Collect orders and reports stamped before ``cutoff`` and settle them with RediSwap.

    Orders stamped at or after the cutoff are returned for the next slot;
    late reports are dropped.
    """
    orders = sorted(((t, o) for t, o in order_feed), key=lambda e: e[0])
    timely = tuple(o for t, o in orders if t < cutoff)
    late = tuple((t, o) for t, o in orders if t >= cutoff)
    reports = tuple(r for t, r in sorted(report_feed, key=lambda e: e[0]) if t < cutoff)
    outcome = rediswap_run(config, SlotInput(s0, timely, reports, seed))
    return SlotResult(outcome, outcome.bundle.final_state, fees.merge(outcome.bundle.fees), late)


class RoundEngine:
    """Runs consecutive slots, carrying the pool state, fee ledger and late orders forward."""

    def __init__(self, config: PoolConfig, s0: PoolState, seed: int = 0) -> None:
        config.curve.check(s0)
        self.config = config
        self.state = s0
        self.fees = FeeLedger()
        self.seed = seed
        self.slots = 0
        self._orders: list[tuple[float, SwapOrder]] = []
        self._reports: list[tuple[float, ArbitrageurReport]] = []

    def submit_order(self, time: float, order: SwapOrder) -> None:
        self._orders.append((time, order))

    def submit_report(self, time: float, report: ArbitrageurReport) -> None:
        self._reports.append((time, report))

    def close_slot(self, cutoff: float) -> SlotResult:
        reports = [(t, r) for t, r in self._reports if t < cutoff]
        self._reports = [(t, r) for t, r in self._reports if t >= cutoff]
        result = run_slot(
            self.config, self.state, self._orders, reports, cutoff, seed=self.seed + self.slots, fees=self.fees
        )
        self._orders = list(result.deferred_orders)
        self.state = result.state
        self.fees = result.fees
        self.slots += 1
        return result
