"""Constant-function market maker laboratory: optimal MEV, redistribution auctions, probes and replay."""

from .beliefs import BeliefDistribution, sample_beliefs
from .cfmm import (
    ConstantProduct,
    Direction,
    FeeLedger,
    Origin,
    PoolConfig,
    PoolState,
    SwapStep,
    TradingCurve,
    apply_swap,
    spot_price,
    state_at_price,
)
from .errors import CfmmError
from .mechanisms import (
    ArbitrageurReport,
    MechanismOutcome,
    RoundEngine,
    SlotInput,
    arbitrageur_utility,
    rediswap_run,
    run_slot,
    strawman_run,
    user_utility,
)
from .optimal import Bundle, brute_force_best_profit, bundle_profit, optimal_bundle
from .orders import Impact, SwapOrder, execute_at_state, impact, limit_state
from .probes import (
    ArbitrageurProfile,
    SybilStrategy,
    ne_probe,
    optimize_sybil,
    sybil_probe,
    sybil_profit_gamma,
    truthfulness_probe,
)
from .replay import BlockMetrics, Candle, ReplayConfig, aggregate, replay, replay_block
from .valuation import Belief, lvr, potential, tx_potential_value, tx_value

__version__ = "0.1.0"

