"""Block-by-block replay of order flow through RediSwap.

Each block resets the pool to its recorded state, samples one belief per
arbitrageur from the block's price candle, runs the auction and records:

* every order's effective price (execution plus refund, minus gas) against
  its reference price, and
* the LP loss with the auction relative to the loss without it.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .beliefs import BeliefDistribution, sample_beliefs
from .cfmm import ConstantProduct, Direction, PoolConfig, PoolState, state_at_price
from .errors import EmptyInput
from .mechanisms import INITIAL_STATE, ArbitrageurReport, SlotInput, rediswap_run
from .orders import SwapOrder
from .valuation import potential

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
BASELINES = ("winner", "midpoint")
# effective prices this close to the reference count as ties, not improvements
PRICE_TIE_REL = 1e-9


class SchemaMismatch(ValueError):
    """Input files disagree (missing columns, or a block without a candle or pool state)."""


@dataclass(frozen=True)
class Candle:
    block: int
    low: float
    high: float

    def __post_init__(self) -> None:
        if not (0 < self.low <= self.high):
            raise SchemaMismatch(f"candle for block {self.block} needs 0 < low <= high")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.low + self.high)


@dataclass(frozen=True)
class ReplayOrder:
    """A historical order: ``gross_in`` is what the user paid before swap fees."""

    block: int
    side: Direction
    gross_in: float
    delta_out: float
    owner: str
    ref_price: float

    def net(self, fee: float) -> SwapOrder:
        return SwapOrder(self.side, self.gross_in * (1.0 - fee), self.delta_out, self.owner)


@dataclass(frozen=True)
class BlockData:
    block: int
    state: PoolState
    orders: tuple[ReplayOrder, ...]
    candle: Candle


@dataclass(frozen=True)
class ReplayConfig:
    n_arbs: int = 2
    dist: BeliefDistribution = BeliefDistribution("gaussian", 1.0, 1.0)
    fees: tuple[float, ...] = (0.0,)
    gas: float = 0.0
    seed: int = 0
    baseline: str = "winner"

    def __post_init__(self) -> None:
        if self.n_arbs < 1:
            raise ValueError("need at least one arbitrageur")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}")
        object.__setattr__(self, "fees", tuple(float(f) for f in self.fees))

    def to_json(self) -> dict[str, Any]:
        return {
            "n_arbs": self.n_arbs,
            "dist": {k: v for k, v in self.dist.to_json().items() if k not in ("low", "high")},
            "fees": list(self.fees),
            "gas": self.gas,
            "seed": self.seed,
            "baseline": self.baseline,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> ReplayConfig:
        dist = data.get("dist", {"kind": "gaussian"})
        return cls(
            n_arbs=int(data.get("n_arbs", 2)),
            dist=BeliefDistribution.from_json({"low": 1.0, "high": 1.0, **dist}),
            fees=tuple(data.get("fees", [data.get("fee", 0.0)])),
            gas=float(data.get("gas", 0.0)),
            seed=int(data.get("seed", 0)),
            baseline=str(data.get("baseline", "winner")),
        )


@dataclass(frozen=True)
class OrderMetrics:
    owner: str
    side: Direction
    filled: bool
    exec_price: float | None
    ref_price: float
    refund: float
    better: bool
    tie: bool


@dataclass(frozen=True)
class BlockMetrics:
    block: int
    fee: float
    n_arbs: int
    orders: tuple[OrderMetrics, ...]
    lvr_without: float
    loss_with: float
    ratio: float | None
    lp_refund: float
    winner_belief: float
    conservation_residual: float = 0.0
    budget_residual: float = 0.0

    def row(self) -> dict[str, Any]:
        return {
            "block": self.block,
            "fee": self.fee,
            "n_arbs": self.n_arbs,
            "orders": len(self.orders),
            "filled": sum(o.filled for o in self.orders),
            "better": sum(o.better for o in self.orders),
            "ties": sum(o.tie for o in self.orders),
            "lvr_without": self.lvr_without,
            "loss_with": self.loss_with,
            "ratio": "" if self.ratio is None else self.ratio,
            "lp_refund": self.lp_refund,
            "winner_belief": self.winner_belief,
        }


def _order_metrics(order: ReplayOrder, fee: float, gas: float, filled: bool, received: float, refund: float) -> OrderMetrics:
    if not filled:
        return OrderMetrics(order.owner, order.side, False, None, order.ref_price, 0.0, False, False)
    if order.side is Direction.X_TO_Y:
        price = (received + refund - gas) / order.gross_in
        gap = price - order.ref_price
    else:
        price = (order.gross_in - refund + gas) / received
        gap = order.ref_price - price
    tie = abs(gap) <= PRICE_TIE_REL * order.ref_price
    return OrderMetrics(order.owner, order.side, True, price, order.ref_price, refund, gap > 0 and not tie, tie)


def replay_block(
    config: ReplayConfig,
    pool_state: PoolState,
    orders_in_block: Sequence[ReplayOrder],
    candle: Candle,
    rng: np.random.Generator,
    fee: float | None = None,
    block: int | None = None,
) -> BlockMetrics:
    """Run one block through RediSwap with truthful, freshly sampled beliefs."""
    fee = config.fees[0] if fee is None else fee
    curve = ConstantProduct(pool_state.x * pool_state.y)
    pool = PoolConfig(curve, fee)
    beliefs = sample_beliefs(config.dist.for_band(candle.low, candle.high), config.n_arbs, rng)
    reports = tuple(ArbitrageurReport(f"arb{i}", float(q)) for i, q in enumerate(beliefs))
    slot = SlotInput(pool_state, tuple(o.net(fee) for o in orders_in_block), reports)
    outcome = rediswap_run(pool, slot)
    per_order = []
    for j, order in enumerate(orders_in_block):
        step = outcome.bundle.user_step_index(j)
        received = outcome.bundle.received(step) if step is not None else 0.0
        per_order.append(_order_metrics(order, fee, config.gas, step is not None, received, outcome.refunds[j]))
    s0_item = next(a for a in outcome.audit if a.item == INITIAL_STATE)
    winner_belief = next(r.q for r in reports if r.arb == s0_item.winner)
    if config.baseline == "winner":
        lvr_without = s0_item.winning_value
    else:
        lvr_without = potential(curve, pool_state, candle.midpoint)
    loss_with = lvr_without - outcome.lp_refund
    ratio = loss_with / lvr_without if lvr_without > 0 else None
    return BlockMetrics(
        candle.block if block is None else block,
        fee,
        config.n_arbs,
        tuple(per_order),
        lvr_without,
        loss_with,
        ratio,
        outcome.lp_refund,
        winner_belief,
        max(outcome.bundle.conservation_residual()),
        outcome.budget_residual(),
    )


def block_rng(seed: int, index: int) -> np.random.Generator:
    """Per-block stream; identical across fee settings so the sweep is paired."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _replay_one(args: tuple[ReplayConfig, int, BlockData]) -> list[BlockMetrics]:
    config, index, data = args
    return [
        replay_block(config, data.state, data.orders, data.candle, block_rng(config.seed, index), fee, data.block)
        for fee in config.fees
    ]


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("REDISWAP_THREADS", "1")))
    except ValueError:
        return 1


def replay(config: ReplayConfig, blocks: Sequence[BlockData], workers: int | None = None) -> list[BlockMetrics]:
    """Replay every block under every fee setting; output order is (block, fee)."""
    workers = thread_cap() if workers is None else workers
    jobs = [(config, i, b) for i, b in enumerate(blocks)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_replay_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        parts = [_replay_one(job) for job in jobs]
    return [m for part in parts for m in part]


def _summarise(metrics: Sequence[BlockMetrics]) -> dict[str, Any]:
    orders = [o for m in metrics for o in m.orders]
    n = len(orders)
    ratios = np.array([m.ratio for m in metrics if m.ratio is not None])
    out: dict[str, Any] = {
        "blocks": len(metrics),
        "orders": n,
        "better_pct": 100.0 * sum(o.better for o in orders) / n if n else None,
        "tie_pct": 100.0 * sum(o.tie for o in orders) / n if n else None,
        "unfilled_pct": 100.0 * sum(not o.filled for o in orders) / n if n else None,
        "blocks_with_lvr": int(ratios.size),
    }
    if ratios.size:
        out["ratio_quantiles"] = {str(q): float(np.quantile(ratios, q)) for q in QUANTILES}
        out["median_ratio"] = float(np.median(ratios))
    else:
        out["ratio_quantiles"] = {str(q): None for q in QUANTILES}
        out["median_ratio"] = None
    return out


def aggregate(metrics: Sequence[BlockMetrics]) -> dict[str, Any]:
    """Better-execution share, reduction-ratio quantiles, and the same per fee."""
    if not metrics:
        raise EmptyInput("no block metrics to aggregate")
    summary = _summarise(metrics)
    fees = sorted({m.fee for m in metrics})
    summary["by_fee"] = {repr(f): _summarise([m for m in metrics if m.fee == f]) for f in fees}
    return summary


def median_trend(ratio_table: np.ndarray, reps: int = 1000, seed: int = 0, level: float = 0.95) -> list[tuple[float, float, float]]:
    """Paired bootstrap CIs for median(col k+1) - median(col k).

    ``ratio_table`` has one row per block and one column per setting; rows
    are resampled jointly. Returns (estimate, low, high) per adjacent pair.
    """
    table = np.asarray(ratio_table, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, table.shape[0], size=(reps, table.shape[0]))
    boot = np.median(table[idx], axis=1)  # reps x settings
    out = []
    alpha = (1 - level) / 2
    for k in range(table.shape[1] - 1):
        d = boot[:, k + 1] - boot[:, k]
        est = float(np.median(table[:, k + 1]) - np.median(table[:, k]))
        out.append((est, float(np.quantile(d, alpha)), float(np.quantile(d, 1 - alpha))))
    return out


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs of the synthetic market: prices, pool gaps, candle widths and order flow."""

    base_price: float = 2000.0
    price_vol: float = 0.05
    x_depth: float = 1000.0
    gap_range: tuple[float, float] = (0.01, 0.03)
    candle_half_range: tuple[float, float] = (0.001, 0.003)
    max_orders: int = 5
    max_slippage: float = 0.01
    size_range: tuple[float, float] = (0.1, 10.0)


def synthetic_blocks(n_blocks: int, seed: int = 0, spec: SyntheticSpec = SyntheticSpec()) -> list[BlockData]:
    """Fabricated blocks: the pool sits a few percent off the candle midpoint.

    Orders ask for the midpoint price minus a slippage allowance, and their
    reference price is that limit price, so any strict improvement comes
    from RediSwap's refund.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**20,)))
    blocks = []
    for b in range(n_blocks):
        mid = spec.base_price * math.exp(rng.normal(0.0, spec.price_vol))
        gap = rng.uniform(*spec.gap_range) * (1 if rng.random() < 0.5 else -1)
        curve = ConstantProduct(spec.x_depth**2 * mid)
        state = state_at_price(curve, mid * math.exp(gap))
        half = mid * rng.uniform(*spec.candle_half_range)
        candle = Candle(b, mid - half, mid + half)
        orders = []
        for j in range(int(rng.integers(0, spec.max_orders + 1))):
            size = rng.uniform(*spec.size_range)
            slip = rng.uniform(0.0, spec.max_slippage)
            if rng.random() < 0.5:
                limit = mid * (1 - slip)
                orders.append(ReplayOrder(b, Direction.X_TO_Y, size, size * limit, f"b{b}u{j}", limit))
            else:
                limit = mid * (1 + slip)
                gross = size * mid
                orders.append(ReplayOrder(b, Direction.Y_TO_X, gross, gross / limit, f"b{b}u{j}", limit))
        blocks.append(BlockData(b, state, tuple(orders), candle))
    return blocks


def _read_csv(path: str | Path, columns: Sequence[str]) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaMismatch(f"{path}: missing columns {missing}")
        return list(reader)


def read_orders_csv(path: str | Path) -> list[ReplayOrder]:
    rows = _read_csv(path, ("block", "side", "delta_in", "delta_out", "owner", "ref_price"))
    out = []
    for r in rows:
        if r["side"] not in ("XY", "YX"):
            raise SchemaMismatch(f"{path}: side must be XY or YX, got {r['side']!r}")
        out.append(
            ReplayOrder(int(r["block"]), Direction(r["side"]), float(r["delta_in"]), float(r["delta_out"]), r["owner"], float(r["ref_price"]))
        )
    return out


def read_candles_csv(path: str | Path) -> list[Candle]:
    return [Candle(int(r["block"]), float(r["low"]), float(r["high"])) for r in _read_csv(path, ("block", "low", "high"))]


def read_pools_csv(path: str | Path) -> dict[int, PoolState]:
    return {int(r["block"]): PoolState(float(r["x"]), float(r["y"])) for r in _read_csv(path, ("block", "x", "y"))}


def assemble_blocks(pools: dict[int, PoolState], orders: Iterable[ReplayOrder], candles: Iterable[Candle]) -> list[BlockData]:
    """Join the three inputs on block id; every pool block needs a candle and every order a pool."""
    by_candle = {c.block: c for c in candles}
    by_block: dict[int, list[ReplayOrder]] = {}
    for o in orders:
        by_block.setdefault(o.block, []).append(o)
    orphans = sorted(set(by_block) - set(pools))
    if orphans:
        raise SchemaMismatch(f"orders reference blocks without a pool state: {orphans[:5]}")
    missing = sorted(set(pools) - set(by_candle))
    if missing:
        raise SchemaMismatch(f"no candle for blocks {missing[:5]}")
    return [BlockData(b, pools[b], tuple(by_block.get(b, ())), by_candle[b]) for b in sorted(pools)]


def write_blocks_csv(blocks: Sequence[BlockData], directory: str | Path) -> dict[str, Path]:
    """Write blocks in the three-file input format (useful for exporting synthetic data)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"orders": d / "orders.csv", "candles": d / "candles.csv", "pools": d / "pools.csv"}
    with open(paths["orders"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "side", "delta_in", "delta_out", "owner", "ref_price"])
        for b in blocks:
            for o in b.orders:
                w.writerow([o.block, o.side.value, repr(o.gross_in), repr(o.delta_out), o.owner, repr(o.ref_price)])
    with open(paths["candles"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "low", "high"])
        for b in blocks:
            w.writerow([b.block, repr(b.candle.low), repr(b.candle.high)])
    with open(paths["pools"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "x", "y"])
        for b in blocks:
            w.writerow([b.block, repr(b.state.x), repr(b.state.y)])
    return paths


def write_metrics_csv(metrics: Sequence[BlockMetrics], path: str | Path) -> None:
    rows = [m.row() for m in metrics]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["block"])
        w.writeheader()
        w.writerows(rows)
