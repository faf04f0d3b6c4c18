"""Executable checks of the auctions' incentive properties.

* ``truthfulness_probe``: misreporting never beats reporting the true belief.
* ``sybil_probe``: injected fake orders never lower a real user's utility.
* ``sybil_profit_gamma`` / ``optimize_sybil``: an arbitrageur's profit from
  its own fake orders under RediSwap, and the budget-constrained fake-order
  strategy that maximises its expectation over competitors' beliefs.
* ``ne_probe``: with every arbitrageur reporting truthfully and playing the
  optimised fake orders, no joint (report, fake-order) deviation pays more
  in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .beliefs import BeliefDistribution, sample_beliefs
from .cfmm import ConstantProduct, Direction, PoolConfig, PoolState, state_at_price
from .errors import InvalidDistribution, InvalidPrior
from .mechanisms import (
    ArbitrageurReport,
    MechanismOutcome,
    SlotInput,
    arbitrageur_utility,
    run_mechanism,
    user_utility,
)
from .orders import SwapOrder

TOLERANCE = 1e-9
# deviation factors: 21 log-spaced points in [0.5, 2] with the midpoint pinned to exactly 1
DEFAULT_DEVIATIONS = tuple(1.0 if i == 10 else float(f) for i, f in enumerate(np.geomspace(0.5, 2.0, 21)))

InstanceSampler = Callable[[np.random.Generator], tuple[PoolConfig, SlotInput]]
SybilSampler = Callable[[np.random.Generator, PoolConfig, SlotInput], list[SwapOrder]]


@dataclass(frozen=True)
class ProbeReport:
    probe: str
    mechanism: str
    trials: int
    seed: int
    max_violation: float
    witness: dict[str, Any] | None
    tolerance: float = TOLERANCE
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def to_json(self) -> dict[str, Any]:
        return {
            "probe": self.probe,
            "mechanism": self.mechanism,
            "trials": self.trials,
            "seed": self.seed,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "witness": self.witness,
            "details": self.details,
        }


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent, reproducible stream for one trial."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _random_order(rng: np.random.Generator, s0: PoolState, price: float, owner: str) -> SwapOrder:
    limit = price * math.exp(rng.normal(0.0, 0.3))
    if rng.random() < 0.5:
        delta_in = rng.uniform(0.01, 0.5) * s0.x
        return SwapOrder(Direction.X_TO_Y, delta_in, delta_in * limit, owner)
    delta_in = rng.uniform(0.01, 0.5) * s0.y
    return SwapOrder(Direction.Y_TO_X, delta_in, delta_in / limit, owner)


def random_instance(rng: np.random.Generator, max_orders: int = 4, max_arbs: int = 4) -> tuple[PoolConfig, SlotInput]:
    """A fee-free constant-product pool with a few orders and truthful reports."""
    k = 10 ** rng.uniform(2, 6)
    price = 10 ** rng.uniform(-1, 2)
    curve = ConstantProduct(k)
    s0 = state_at_price(curve, price)
    n_orders = int(rng.integers(0, max_orders + 1))
    orders = tuple(_random_order(rng, s0, price, f"user{j}") for j in range(n_orders))
    n_arbs = int(rng.integers(2, max_arbs + 1))
    reports = tuple(ArbitrageurReport(f"arb{i}", price * math.exp(rng.normal(0.0, 0.3))) for i in range(n_arbs))
    return PoolConfig(curve), SlotInput(s0, orders, reports, int(rng.integers(0, 2**31)))


def _run_checked(mechanism: str, config: PoolConfig, slot: SlotInput, stats: dict[str, float]) -> MechanismOutcome:
    outcome = run_mechanism(mechanism, config, slot)
    stats["max_budget_residual"] = max(stats["max_budget_residual"], outcome.budget_residual())
    stats["max_conservation_residual"] = max(stats["max_conservation_residual"], *outcome.bundle.conservation_residual())
    stats["runs"] += 1
    return outcome


def _new_stats() -> dict[str, float]:
    return {"runs": 0, "max_budget_residual": 0.0, "max_conservation_residual": 0.0}


def truthfulness_probe(
    mechanism: str,
    instance_sampler: InstanceSampler = random_instance,
    deviation_grid: Sequence[float] = DEFAULT_DEVIATIONS,
    trials: int = 500,
    seed: int = 0,
) -> ProbeReport:
    """Largest utility gain arbitrageur 0 gets by scaling its truthful report."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    stats = _new_stats()
    worst, witness = -math.inf, None
    for t in range(trials):
        config, slot = instance_sampler(trial_rng(seed, t))
        me = slot.reports[0]
        truth = arbitrageur_utility(_run_checked(mechanism, config, slot, stats), me.arb, me.q)
        for factor in deviation_grid:
            if factor == 1.0:
                gain = 0.0
            else:
                lie = slot.with_reports((ArbitrageurReport(me.arb, me.q * factor),) + slot.reports[1:])
                gain = arbitrageur_utility(_run_checked(mechanism, config, lie, stats), me.arb, me.q) - truth
            if gain > worst:
                worst = gain
                if gain > TOLERANCE:
                    witness = {"trial": t, "factor": factor, "gain": gain, "instance": slot.to_json(config)}
    return ProbeReport("truthfulness", mechanism, trials, seed, max(worst, 0.0), witness, details=stats)


def no_sybils(rng: np.random.Generator, config: PoolConfig, slot: SlotInput) -> list[SwapOrder]:
    return []


def random_sybils(rng: np.random.Generator, config: PoolConfig, slot: SlotInput) -> list[SwapOrder]:
    """One to three fake orders; half the time one is a large sell of X far below the pool price."""
    s0 = slot.s0
    price = config.curve.spot(s0.x, s0.y)
    owner = f"sybil:{slot.reports[int(rng.integers(len(slot.reports)))].arb}"
    sybils = [_random_order(rng, s0, price, owner) for _ in range(int(rng.integers(1, 4)))]
    if rng.random() < 0.5:
        delta_in = rng.uniform(0.5, 5.0) * s0.x
        sybils.append(SwapOrder(Direction.X_TO_Y, delta_in, delta_in * price * rng.uniform(0.05, 0.5), owner))
    return sybils


def sybil_probe(
    mechanism: str,
    instance_sampler: InstanceSampler = random_instance,
    sybil_sampler: SybilSampler = random_sybils,
    trials: int = 500,
    seed: int = 0,
) -> ProbeReport:
    """Largest drop in any real user's utility caused by adding fake orders (reports fixed)."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    stats = _new_stats()
    worst_drop, worst_abs, witness = 0.0, 0.0, None
    for t in range(trials):
        rng = trial_rng(seed, t)
        config, slot = instance_sampler(rng)
        sybils = sybil_sampler(rng, config, slot)
        if not slot.orders:
            continue
        mixed: list[SwapOrder] = list(slot.orders)
        positions = list(range(len(mixed)))
        for sybil in sybils:
            at = int(rng.integers(0, len(mixed) + 1))
            mixed.insert(at, sybil)
            positions = [p + 1 if p >= at else p for p in positions]
        clean = _run_checked(mechanism, config, slot, stats)
        attacked = _run_checked(mechanism, config, slot.with_orders(mixed), stats)
        for j, pos in enumerate(positions):
            before = user_utility(clean, j)
            after = user_utility(attacked, pos)
            worst_abs = max(worst_abs, abs(after - before))
            if before - after > worst_drop:
                worst_drop = before - after
                witness = {
                    "trial": t,
                    "order": j,
                    "utility_without": before,
                    "utility_with": after,
                    "sybils": [s.to_json() for s in sybils],
                    "instance": slot.to_json(config),
                }
    stats["max_abs_difference"] = worst_abs
    if worst_drop <= TOLERANCE:
        witness = None
    return ProbeReport("sybil", mechanism, trials, seed, worst_drop, witness, details=stats)


@dataclass(frozen=True)
class ArbitrageurProfile:
    """True belief, fake-order budgets (X for the sell leg, numeraire for the buy leg) and belief prior."""

    v: float
    b_x: float = 0.0
    b_y: float = 0.0
    prior: BeliefDistribution | None = None

    def __post_init__(self) -> None:
        if not self.v > 0:
            raise ValueError("belief must be positive")
        if self.b_x < 0 or self.b_y < 0:
            raise ValueError("budgets must be non-negative")


def gamma_matrix(
    side: Direction,
    profile: ArbitrageurProfile,
    report: float,
    t_out: np.ndarray,
    others: np.ndarray,
    wins_ties: bool = False,
) -> np.ndarray:
    """Vectorised fake-order profit: rows follow ``t_out``, columns follow rows of ``others``.

    ``others`` has one row per scenario and one column per competitor.
    ``wins_ties`` says whether this arbitrageur wins its own item on an
    exact tie with the best competitor (RediSwap favours the lower index).
    """
    t = np.atleast_1d(np.asarray(t_out, dtype=float))[:, None]
    others = np.atleast_2d(np.asarray(others, dtype=float))
    if others.shape[1] == 0:
        return np.zeros((t.shape[0], others.shape[0]))
    v, q = profile.v, report
    srt = np.sort(others, axis=1)
    if side is Direction.X_TO_Y:
        b = profile.b_x
        if b <= 0:
            return np.zeros((t.shape[0], others.shape[0]))
        top = srt[:, -1][None, :]
        rest = srt[:, -2][None, :] if others.shape[1] > 1 else np.full_like(top, -np.inf)
        loses = (q < top) if wins_ties else (q <= top)
        value = t - b * v + np.maximum(0.0, np.maximum(b * q - t, b * rest - t))
        return np.where(loses & (t <= b * top), value, 0.0)
    b = profile.b_y
    if b <= 0:
        return np.zeros((t.shape[0], others.shape[0]))
    bottom = srt[:, 0][None, :]
    rest = srt[:, 1][None, :] if others.shape[1] > 1 else np.full_like(bottom, np.inf)
    loses = (q > bottom) if wins_ties else (q >= bottom)
    value = t * v - b + np.maximum(0.0, np.maximum(b - t * q, b - t * rest))
    return np.where(loses & (t * bottom <= b), value, 0.0)


def sybil_profit_gamma(
    side: Direction,
    profile: ArbitrageurProfile,
    report: float,
    t_out: float,
    other_beliefs: Sequence[float],
    wins_ties: bool = False,
) -> float:
    """Profit from one fake order spending the whole budget on ``side`` and asking ``t_out``.

    Competitors report ``other_beliefs`` truthfully. The profit is zero if
    this arbitrageur wins its own order (it sandwiches itself) or nobody
    values the order; otherwise it is the execution value at the true
    belief plus the second-price refund the order receives.
    """
    if not t_out > 0:
        raise ValueError("t_out must be positive")
    others = np.asarray(other_beliefs, dtype=float).reshape(1, -1)
    return float(gamma_matrix(Direction(side), profile, report, np.array([t_out]), others, wins_ties)[0, 0])


@dataclass(frozen=True)
class SybilStrategy:
    x_to_y: SwapOrder | None
    y_to_x: SwapOrder | None
    expected_x_to_y: float = 0.0
    expected_y_to_x: float = 0.0

    @property
    def t_y(self) -> float:
        return self.x_to_y.delta_out if self.x_to_y else 0.0

    @property
    def t_x(self) -> float:
        return self.y_to_x.delta_out if self.y_to_x else 0.0

    @property
    def expected_profit(self) -> float:
        return self.expected_x_to_y + self.expected_y_to_x

    def orders(self) -> list[SwapOrder]:
        return [o for o in (self.x_to_y, self.y_to_x) if o is not None]


def competitor_samples(priors: Sequence[BeliefDistribution], mc_samples: int, seed: int) -> np.ndarray:
    """Monte Carlo draws of competitors' beliefs, one column per prior."""
    for prior in priors:
        try:
            prior.check()
        except InvalidDistribution as exc:
            raise InvalidPrior(str(exc)) from exc
    cols = [sample_beliefs(p, mc_samples, trial_rng(seed, k)) for k, p in enumerate(priors)]
    return np.column_stack(cols) if cols else np.zeros((mc_samples, 0))


def _best_leg(
    side: Direction, profile: ArbitrageurProfile, samples: np.ndarray, lo: float, hi: float, kinks: np.ndarray, grid_n: int
) -> tuple[float, float]:
    if not hi > lo:
        return 0.0, 0.0
    # the sample mean is piecewise linear and non-decreasing in t between the
    # points where some scenario stops paying, so those points plus the grid
    # contain the sample-optimal ask
    cands = np.concatenate([np.geomspace(lo, hi, grid_n), kinks[(kinks >= lo) & (kinks <= hi)]])
    means = gamma_matrix(side, profile, profile.v, cands, samples).mean(axis=1)
    best = int(np.argmax(means))
    return float(cands[best]), float(means[best])


def optimize_sybil(
    profile: ArbitrageurProfile,
    competitor_priors: Sequence[BeliefDistribution],
    grid_n: int = 128,
    mc_samples: int = 2000,
    seed: int = 0,
    samples: np.ndarray | None = None,
) -> SybilStrategy:
    """Expected-profit-maximising fake orders for a truthful arbitrageur.

    The sell leg asks ``t_Y`` for ``b_x`` units of X over
    [b_x * v, b_x * q_max]; the buy leg asks ``t_X`` for ``b_y`` numeraire
    over [b_y / v, b_y / q_min], where q_min and q_max bound the
    competitors' priors. A leg is dropped when its best expected profit is
    not positive. ``samples`` (scenarios x competitors) overrides the
    internal Monte Carlo draw so callers can share scenarios.
    """
    if grid_n < 2 or mc_samples < 1:
        raise ValueError("grid_n must be >= 2 and mc_samples >= 1")
    if not competitor_priors:
        return SybilStrategy(None, None)
    if samples is None:
        samples = competitor_samples(competitor_priors, mc_samples, seed)
    else:
        for prior in competitor_priors:
            try:
                prior.check()
            except InvalidDistribution as exc:
                raise InvalidPrior(str(exc)) from exc
    q_min = min(p.low for p in competitor_priors)
    q_max = max(p.high for p in competitor_priors)
    v = profile.v
    sell = buy = None
    e_sell = e_buy = 0.0
    if profile.b_x > 0:
        kinks = profile.b_x * samples.max(axis=1)
        t, e = _best_leg(Direction.X_TO_Y, profile, samples, profile.b_x * v, profile.b_x * q_max, kinks, grid_n)
        if e > 0:
            sell, e_sell = SwapOrder(Direction.X_TO_Y, profile.b_x, t, "sybil"), e
    if profile.b_y > 0:
        bottom = samples.min(axis=1)
        kinks = profile.b_y / bottom
        kinks = np.where(kinks * bottom > profile.b_y, np.nextafter(kinks, 0.0), kinks)
        t, e = _best_leg(Direction.Y_TO_X, profile, samples, profile.b_y / v, profile.b_y / q_min, kinks, grid_n)
        if e > 0:
            buy, e_buy = SwapOrder(Direction.Y_TO_X, profile.b_y, t, "sybil"), e
    return SybilStrategy(sell, buy, e_sell, e_buy)


@dataclass(frozen=True)
class NeInstance:
    """Two-arbitrageur game used by the equilibrium check.

    Arbitrageur 0 is the deviator; arbitrageur 1 reports truthfully and
    plays the optimised fake orders for its belief. Both have the same
    budgets and independent priors.
    """

    curve: ConstantProduct
    s0: PoolState
    orders: tuple[SwapOrder, ...]
    prior0: BeliefDistribution
    prior1: BeliefDistribution
    b_x: float
    b_y: float

    def profile(self, v: float, prior: BeliefDistribution) -> ArbitrageurProfile:
        return ArbitrageurProfile(v, self.b_x, self.b_y, prior)

    def _potential(self, v: np.ndarray | float) -> np.ndarray:
        k = self.curve.k
        v = np.asarray(v, dtype=float)
        return np.maximum(0.0, self.s0.x * v + self.s0.y - (np.sqrt(k / v) * v + np.sqrt(k * v)))

    def item_utility(self, q: float, v0: float, v1: np.ndarray, t_y1: np.ndarray, t_x1: np.ndarray) -> np.ndarray:
        """Deviator's profit on every item except its own fake orders, per scenario."""
        total = np.zeros_like(v1)
        phi_q = float(self._potential(q))
        phi_1 = self._potential(v1)
        target = state_at_price(self.curve, q)
        gain = (self.s0.x - target.x) * v0 + (self.s0.y - target.y)
        total += np.where(phi_q >= phi_1, gain - phi_1, 0.0)
        items = [(np.full_like(v1, o.delta_in if o.side is Direction.X_TO_Y else -o.delta_out),
                  np.full_like(v1, -o.delta_out if o.side is Direction.X_TO_Y else o.delta_in),
                  np.ones_like(v1, dtype=bool)) for o in self.orders]
        items.append((np.full_like(v1, self.b_x), -t_y1, t_y1 > 0))
        items.append((-t_x1, np.full_like(v1, self.b_y), t_x1 > 0))
        for dx, dy, present in items:
            mine = dx * q + dy
            theirs = dx * v1 + dy
            wins = present & (mine >= theirs) & (mine >= 0)
            total += np.where(wins, dx * v0 + dy - np.maximum(0.0, theirs), 0.0)
        return total

    def pipeline_utility(
        self, q: float, v0: float, t_y: float, t_x: float, v1: float, t_y1: float, t_x1: float
    ) -> tuple[float, MechanismOutcome]:
        """The same utility computed by running the full mechanism (slow, for cross-checks)."""
        orders = list(self.orders)
        mine: list[int] = []
        if t_y > 0:
            mine.append(len(orders))
            orders.append(SwapOrder(Direction.X_TO_Y, self.b_x, t_y, "sybil:arb0"))
        if t_x > 0:
            mine.append(len(orders))
            orders.append(SwapOrder(Direction.Y_TO_X, self.b_y, t_x, "sybil:arb0"))
        if t_y1 > 0:
            orders.append(SwapOrder(Direction.X_TO_Y, self.b_x, t_y1, "sybil:arb1"))
        if t_x1 > 0:
            orders.append(SwapOrder(Direction.Y_TO_X, self.b_y, t_x1, "sybil:arb1"))
        slot = SlotInput(self.s0, tuple(orders), (ArbitrageurReport("arb0", q), ArbitrageurReport("arb1", v1)))
        outcome = run_mechanism("rediswap", PoolConfig(self.curve), slot)
        return arbitrageur_utility(outcome, "arb0", v0, mine), outcome


def random_ne_instance(
    rng: np.random.Generator, n_orders: int = 2, prior_halfwidth: float = 0.05, budget_frac: float = 0.1
) -> NeInstance:
    k = 10 ** rng.uniform(3, 6)
    price = 10 ** rng.uniform(-1, 2)
    curve = ConstantProduct(k)
    s0 = state_at_price(curve, price)
    mid = price * math.exp(rng.normal(0.0, 0.02))
    prior = BeliefDistribution("uniform", mid * (1 - prior_halfwidth), mid * (1 + prior_halfwidth))
    orders = []
    for j in range(n_orders):
        limit = mid * math.exp(rng.normal(0.0, prior_halfwidth))
        if rng.random() < 0.5:
            d = rng.uniform(0.01, 0.2) * s0.x
            orders.append(SwapOrder(Direction.X_TO_Y, d, d * limit, f"user{j}"))
        else:
            d = rng.uniform(0.01, 0.2) * s0.y
            orders.append(SwapOrder(Direction.Y_TO_X, d, d / limit, f"user{j}"))
    return NeInstance(curve, s0, tuple(orders), prior, prior, budget_frac * s0.x, budget_frac * s0.y)


def competitor_strategy_table(
    inst: NeInstance, grid_points: int, grid_n: int, mc_samples: int, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Competitor's optimised asks (0 = no leg) on a grid of its possible beliefs."""
    beliefs = np.linspace(inst.prior1.low, inst.prior1.high, grid_points)
    samples = competitor_samples([inst.prior0], mc_samples, seed)
    t_y = np.zeros(grid_points)
    t_x = np.zeros(grid_points)
    for g, v in enumerate(beliefs):
        strat = optimize_sybil(inst.profile(float(v), inst.prior1), [inst.prior0], grid_n, mc_samples, samples=samples)
        t_y[g], t_x[g] = strat.t_y, strat.t_x
    return beliefs, t_y, t_x


def competitor_asks(table: tuple[np.ndarray, np.ndarray, np.ndarray], v1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    beliefs, t_y, t_x = table
    idx = np.abs(v1[:, None] - beliefs[None, :]).argmin(axis=1)
    return t_y[idx], t_x[idx]


def ne_probe(
    trials: int = 4,
    seed: int = 0,
    mc_samples: int = 2000,
    grid_n: int = 128,
    deviators_per_trial: int = 3,
    report_factors: Sequence[float] = tuple(np.linspace(0.9, 1.1, 11)),
    t_points: int = 16,
    table_points: int = 41,
    prior_halfwidth: float = 0.05,
    budget_frac: float = 0.1,
) -> ProbeReport:
    """Monte Carlo check that no joint deviation beats the equilibrium strategy.

    For each deviation (report x sell ask x buy ask, where an ask of 0 means
    no fake order) the paired per-scenario difference to the equilibrium
    utility is averaged; ``max_violation`` is the largest mean minus two
    standard errors, so a value <= 0 means no deviation is significantly
    better. Optimiser and evaluation share scenarios (common random numbers).
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    worst, witness = -math.inf, None
    evaluated = 0
    for t in range(trials):
        rng = trial_rng(seed, t)
        inst = random_ne_instance(rng, prior_halfwidth=prior_halfwidth, budget_frac=budget_frac)
        table = competitor_strategy_table(inst, table_points, grid_n, mc_samples, seed=int(rng.integers(0, 2**31)))
        v1 = competitor_samples([inst.prior1], mc_samples, int(rng.integers(0, 2**31)))
        t_y1, t_x1 = competitor_asks(table, v1[:, 0])
        p1 = inst.prior1
        for d in range(deviators_per_trial):
            v0 = float(sample_beliefs(inst.prior0, 1, rng)[0])
            me = inst.profile(v0, inst.prior0)
            eq = optimize_sybil(me, [p1], grid_n, mc_samples, samples=v1)
            base = inst.item_utility(v0, v0, v1[:, 0], t_y1, t_x1)
            base = base + _own_gamma(me, v0, eq.t_y, eq.t_x, v1)
            ty_grid = np.concatenate([[0.0], np.linspace(0.9 * inst.b_x * v0, 1.02 * inst.b_x * p1.high, t_points)])
            tx_grid = np.concatenate([[0.0], np.linspace(0.9 * inst.b_y / v0, 1.02 * inst.b_y / p1.low, t_points)])
            scale = max(1.0, float(np.abs(base).max()))
            for factor in report_factors:
                q = v0 * float(factor)
                items = inst.item_utility(q, v0, v1[:, 0], t_y1, t_x1)
                g_y = _gamma_rows(Direction.X_TO_Y, me, q, ty_grid, v1)
                g_x = _gamma_rows(Direction.Y_TO_X, me, q, tx_grid, v1)
                diff = items[None, None, :] + g_y[:, None, :] + g_x[None, :, :] - base[None, None, :]
                mean = diff.mean(axis=2)
                se = diff.std(axis=2, ddof=1) / math.sqrt(mc_samples) if mc_samples > 1 else np.zeros_like(mean)
                excess = (mean - 2 * se) / scale
                evaluated += excess.size
                i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
                if excess[i, j] > worst:
                    worst = float(excess[i, j])
                    witness = {
                        "trial": t,
                        "true_belief": v0,
                        "report": q,
                        "t_y": float(ty_grid[i]),
                        "t_x": float(tx_grid[j]),
                        "mean_gain": float(mean[i, j]),
                        "standard_error": float(se[i, j]),
                        "equilibrium": {"t_y": eq.t_y, "t_x": eq.t_x, "expected_sybil_profit": eq.expected_profit},
                    }
    report = ProbeReport(
        "ne", "rediswap", trials, seed, worst, witness if worst > TOLERANCE else None,
        details={"deviations_evaluated": evaluated, "mc_samples": mc_samples, "best_deviation": witness},
    )
    return report


def _gamma_rows(side: Direction, me: ArbitrageurProfile, q: float, grid: np.ndarray, v1: np.ndarray) -> np.ndarray:
    rows = np.zeros((grid.size, v1.shape[0]))
    live = grid > 0
    if live.any():
        rows[live] = gamma_matrix(side, me, q, grid[live], v1, wins_ties=True)
    return rows


def _own_gamma(me: ArbitrageurProfile, q: float, t_y: float, t_x: float, v1: np.ndarray) -> np.ndarray:
    return (
        _gamma_rows(Direction.X_TO_Y, me, q, np.array([t_y]), v1)[0]
        + _gamma_rows(Direction.Y_TO_X, me, q, np.array([t_x]), v1)[0]
    )
