"""Command-line entry point: ``cfmm-lab {demo,mechanism,probe,replay}``.

Exit codes: 0 success, 1 domain error or failed check, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

from .beliefs import BeliefDistribution
from .cfmm import ConstantProduct, PoolConfig, PoolState, spot_price, state_at_price
from .errors import CfmmError
from .mechanisms import (
    ArbitrageurReport,
    SlotInput,
    arbitrageur_utility,
    rediswap_run,
    run_mechanism,
    strawman_run,
    user_utility,
)
from .optimal import bundle_profit, optimal_bundle
from .orders import SwapOrder, limit_state
from .probes import ne_probe, sybil_probe, truthfulness_probe
from .replay import (
    ReplayConfig,
    SchemaMismatch,
    aggregate,
    assemble_blocks,
    read_candles_csv,
    read_orders_csv,
    read_pools_csv,
    replay,
    synthetic_blocks,
    write_metrics_csv,
)
from .valuation import potential, tx_potential_value, tx_value

log = logging.getLogger("cfmm_lab")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

# worked-example pool; tests patch this to check that the demo notices bad values
EXAMPLE_K = 400.0
EXAMPLE_S0 = (4.0, 100.0)
EXAMPLE_ORDERS = (("XY", 8.0, 25.0), ("XY", 30.0, 12.0), ("YX", 20.0, 10.0))
EXAMPLE_SYBIL = ("XY", 260.0, 271.0)
DEMO_REL_TOL = 1e-9


def _orders() -> list[SwapOrder]:
    return [SwapOrder(s, i, o, f"user{j + 1}") for j, (s, i, o) in enumerate(EXAMPLE_ORDERS)]


def demo_values() -> dict[str, Any]:
    """Recompute the three worked examples; values only, no checking."""
    cfg = PoolConfig(ConstantProduct(EXAMPLE_K))
    s0 = PoolState(*EXAMPLE_S0)
    orders = _orders()
    bundle = optimal_bundle(cfg, s0, orders, 4.0, arb="arb1")
    reports = (ArbitrageurReport("arb1", 4.0), ArbitrageurReport("arb2", 1.0))
    slot = SlotInput(s0, tuple(orders), reports)
    straw = strawman_run(cfg, slot)
    sybil = SwapOrder(*EXAMPLE_SYBIL, "sybil:arb1")
    straw_sybil = strawman_run(cfg, slot.with_orders(orders + [sybil]))
    redi = rediswap_run(cfg, slot)
    return {
        "public_orders": {
            "phi": potential(cfg.curve, s0, 4.0),
            "values": [tx_value(o, 4.0) for o in orders],
            "potential_values": [tx_potential_value(o, 4.0) for o in orders],
            "limit_states": [limit_state(cfg.curve, o).as_list() for o in orders],
            "optimal_mev": bundle_profit(bundle, 4.0),
            "no_arbitrage_state": state_at_price(cfg.curve, 4.0).as_list(),
        },
        "strawman": {
            "phi": [potential(cfg.curve, s0, r.q) for r in reports],
            "winner": straw.audit[0].winner,
            "payment": straw.payments["arb1"],
            "arb1_utility": arbitrageur_utility(straw, "arb1", 4.0),
            "user_utilities": [user_utility(straw, j) for j in range(3)],
            "sybil_value": tx_value(sybil, 4.0),
            "sybil_mev": straw_sybil.audit[0].winning_value,
            "arb1_utility_with_sybil": arbitrageur_utility(straw_sybil, "arb1", 4.0, [3]),
            "user_utilities_with_sybil": [user_utility(straw_sybil, j) for j in range(3)],
        },
        "per_item": {
            "payments": dict(redi.payments),
            "refunds": {str(j): r for j, r in redi.refunds.items()},
            "lp_refund": redi.lp_refund,
            "winners": {str(a.item): a.winner for a in redi.audit},
            "steps": [(s.direction.value, s.origin.ref, s.origin.role) for s in redi.bundle.steps],
            "final_state": redi.bundle.final_state.as_list(),
        },
    }


def demo_expected() -> dict[str, Any]:
    s = 92.0
    return {
        "public_orders": {
            "phi": 36.0,
            "values": [7.0, 108.0, 0.0],
            "potential_values": [7.0, 108.0, -20.0],
            "limit_states": [[8.0, 50.0], [20.0, 20.0], [20.0, 20.0]],
            "optimal_mev": 151.0,
            "no_arbitrage_state": [10.0, 40.0],
        },
        "strawman": {
            "phi": [36.0, 64.0],
            "winner": "arb1",
            "payment": 92.0,
            "arb1_utility": 59.0,
            "user_utilities": [25 + 7 / 151 * s, 12 + 108 / 151 * s, 20.0],
            "sybil_value": 769.0,
            "sybil_mev": 920.0,
            "arb1_utility_with_sybil": 59 + 769 / 920 * s,
            "user_utilities_with_sybil": [25 + 7 / 920 * s, 12 + 108 / 920 * s, 20.0],
        },
        "per_item": {
            "payments": {"arb1": 18.0, "arb2": 36.0},
            "refunds": {"0": 0.0, "1": 18.0, "2": 0.0},
            "lp_refund": 36.0,
            "winners": {"0": "arb1", "1": "arb1", "2": "arb2", "initial-state": "arb2"},
            "final_state": [20.0, 20.0],
        },
    }


def compare(expected: Any, actual: Any, path: str = "") -> list[str]:
    """Paths where ``actual`` differs from ``expected`` (floats at DEMO_REL_TOL)."""
    if isinstance(expected, dict):
        out = []
        for k, v in expected.items():
            if k not in actual:
                out.append(f"{path}.{k}: missing")
            else:
                out += compare(v, actual[k], f"{path}.{k}")
        return out
    if isinstance(expected, (list, tuple)):
        if len(expected) != len(actual):
            return [f"{path}: length {len(actual)} != {len(expected)}"]
        return [m for i, (e, a) in enumerate(zip(expected, actual)) for m in compare(e, a, f"{path}[{i}]")]
    if isinstance(expected, float):
        ok = isinstance(actual, (int, float)) and math.isclose(actual, expected, rel_tol=DEMO_REL_TOL, abs_tol=1e-12)
        return [] if ok else [f"{path}: {actual!r} != {expected!r}"]
    return [] if expected == actual else [f"{path}: {actual!r} != {expected!r}"]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def demo_text(values: dict[str, Any]) -> str:
    e1, e2, e3 = values["public_orders"], values["strawman"], values["per_item"]
    lines = [
        "Optimal MEV with public orders (k=400, s0=(4,100), v=4)",
        f"  potential of s0 = {_fmt(e1['phi'])}",
        "  order values = " + ", ".join(_fmt(v) for v in e1["values"]),
        "  limit states = " + ", ".join(f"({_fmt(x)}, {_fmt(y)})" for x, y in e1["limit_states"]),
        f"  optimal MEV = {_fmt(e1['optimal_mev'])}",
        "",
        "Strawman auction (beliefs 4 and 1)",
        f"  winner {e2['winner']} pays {_fmt(e2['payment'])}, utility {_fmt(e2['arb1_utility'])}",
        "  user utilities = " + ", ".join(_fmt(u) for u in e2["user_utilities"]),
        f"  with fake order worth {_fmt(e2['sybil_value'])}: MEV {_fmt(e2['sybil_mev'])}, "
        f"winner utility {_fmt(e2['arb1_utility_with_sybil'])}",
        "  user utilities = " + ", ".join(_fmt(u) for u in e2["user_utilities_with_sybil"]),
        "",
        "RediSwap per-item auctions (beliefs 4 and 1)",
        "  payments: " + ", ".join(f"{k}={_fmt(v)}" for k, v in e3["payments"].items()),
        "  refunds: " + ", ".join(f"order{k}={_fmt(v)}" for k, v in e3["refunds"].items()) + f", LPs={_fmt(e3['lp_refund'])}",
        "  bundle:",
    ]
    lines += [f"    {d} {who} {role}" for d, who, role in e3["steps"]]
    lines.append(f"  final state = ({_fmt(e3['final_state'][0])}, {_fmt(e3['final_state'][1])})")
    return "\n".join(lines)


def _flatten(data: Any, prefix: str = "") -> list[tuple[str, Any]]:
    if isinstance(data, dict):
        return [kv for k, v in data.items() for kv in _flatten(v, f"{prefix}.{k}" if prefix else str(k))]
    if isinstance(data, (list, tuple)):
        return [kv for i, v in enumerate(data) for kv in _flatten(v, f"{prefix}[{i}]")]
    return [(prefix, data)]


def emit(data: Any, fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        json.dump(data, out, indent=2, sort_keys=False)
        out.write("\n")
    else:
        w = csv.writer(out)
        w.writerow(["key", "value"])
        w.writerows(_flatten(data))


def cmd_demo(args: argparse.Namespace) -> int:
    values = demo_values()
    problems = compare(demo_expected(), values)
    if args.output == "json":
        emit({"values": values, "mismatches": problems}, "json")
    elif args.output == "csv":
        emit(values, "csv")
    if args.output == "text" and not args.quiet:
        print(demo_text(values))
    if problems:
        for p in problems:
            print(f"mismatch {p}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.output == "text" and not args.quiet:
        print("all worked-example values match")
    return EXIT_OK


def cmd_mechanism(args: argparse.Namespace) -> int:
    with open(args.slot_input) as fh:
        data = json.load(fh)
    config, slot = SlotInput.from_json(data)
    if args.seed_given:
        slot = dataclasses.replace(slot, seed=args.seed)
    outcome = run_mechanism(args.mech, config, slot)
    result = outcome.to_json()
    result["user_utilities"] = {str(j): user_utility(outcome, j) for j in range(len(slot.orders))}
    result["final_state"] = outcome.bundle.final_state.as_list()
    result["spot_after"] = spot_price(config.curve, outcome.bundle.final_state)
    emit(result, "csv" if args.output == "csv" else "json")
    return EXIT_OK


def cmd_probe(args: argparse.Namespace) -> int:
    if args.probe == "truthfulness":
        report = truthfulness_probe(args.mech, trials=args.trials, seed=args.seed)
    elif args.probe == "sybil":
        report = sybil_probe(args.mech, trials=args.trials, seed=args.seed)
    else:
        if args.mech != "rediswap":
            print("error: the equilibrium check applies to rediswap only", file=sys.stderr)
            return EXIT_USAGE
        report = ne_probe(trials=args.trials, seed=args.seed, mc_samples=args.mc_samples)
    emit(report.to_json(), "csv" if args.output == "csv" else "json")
    if not report.passed:
        print(f"violation: {args.probe} probe on {args.mech} exceeded tolerance", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def _load_blocks(args: argparse.Namespace):
    if args.synthetic is not None:
        return synthetic_blocks(args.synthetic, seed=args.seed)
    missing = [n for n in ("orders", "candles", "pools") if getattr(args, n) is None]
    if missing:
        raise SchemaMismatch(f"replay needs --synthetic N or all of --orders/--candles/--pools (missing {missing})")
    return assemble_blocks(read_pools_csv(args.pools), read_orders_csv(args.orders), read_candles_csv(args.candles))


def _replay_config(args: argparse.Namespace) -> ReplayConfig:
    base: dict[str, Any] = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    cfg = ReplayConfig.from_json(base) if base else ReplayConfig()
    dist = cfg.dist
    dist = BeliefDistribution(
        args.dist or dist.kind,
        1.0,
        1.0,
        args.sigma_rel if args.sigma_rel is not None else dist.sigma_rel,
        args.alpha if args.alpha is not None else dist.alpha,
    )
    dist.for_band(1.0, 1.0).check()
    return ReplayConfig(
        n_arbs=args.n_arbs if args.n_arbs is not None else cfg.n_arbs,
        dist=dist,
        fees=tuple(args.fee) if args.fee else cfg.fees,
        gas=args.gas if args.gas is not None else cfg.gas,
        seed=args.seed if args.seed_given else cfg.seed,
        baseline=args.baseline or cfg.baseline,
    )


def cmd_replay(args: argparse.Namespace) -> int:
    config = _replay_config(args)
    blocks = _load_blocks(args)
    log.info("replaying %d blocks with %d arbitrageurs", len(blocks), config.n_arbs)
    metrics = replay(config, blocks)
    summary = aggregate(metrics)
    summary["config"] = config.to_json()
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(metrics, out / "metrics.csv")
        with open(out / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    if args.output == "csv":
        buf = io.StringIO()
        rows = [m.row() for m in metrics]
        w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["block"])
        w.writeheader()
        w.writerows(rows)
        sys.stdout.write(buf.getvalue())
    else:
        emit(summary, "json")
    return EXIT_OK


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def fee_value(text: str) -> float:
    value = float(text)
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError("fee must lie in [0, 1)")
    return value


class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.seed_given = True


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, action=_SeedAction, help="random seed (default 0)")
    common.add_argument("--output", choices=("json", "csv", "text"), default=None, help="output format")
    common.add_argument("--quiet", action="store_true", help="suppress progress and human-readable text")

    parser = argparse.ArgumentParser(prog="cfmm-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", parents=[common], help="run the three worked examples and check their values")
    p.set_defaults(func=cmd_demo, default_output="text")

    p = sub.add_parser("mechanism", parents=[common], help="run one auction on a slot-input JSON file")
    p.add_argument("slot_input", help="path to slot input JSON")
    p.add_argument("--mech", choices=("strawman", "rediswap"), default="rediswap")
    p.set_defaults(func=cmd_mechanism, default_output="json")

    p = sub.add_parser("probe", parents=[common], help="check truthfulness, fake-order resistance or equilibrium")
    p.add_argument("--probe", choices=("truthfulness", "sybil", "ne"), required=True)
    p.add_argument("--mech", choices=("strawman", "rediswap"), default="rediswap")
    p.add_argument("--trials", type=positive_int, default=500)
    p.add_argument("--mc-samples", type=positive_int, default=2000, help="Monte Carlo samples for --probe ne")
    p.set_defaults(func=cmd_probe, default_output="json")

    p = sub.add_parser("replay", parents=[common], help="replay order flow and report execution and LP-loss metrics")
    p.add_argument("--orders", help="orders CSV: block,side,delta_in,delta_out,owner,ref_price")
    p.add_argument("--candles", help="candles CSV: block,low,high")
    p.add_argument("--pools", help="pool states CSV: block,x,y")
    p.add_argument("--config", help="replay config JSON")
    p.add_argument("--synthetic", type=positive_int, help="generate N synthetic blocks instead of reading CSVs")
    p.add_argument("--n-arbs", type=positive_int)
    p.add_argument("--dist", choices=("gaussian", "pareto", "uniform"))
    p.add_argument("--sigma-rel", type=float, help="gaussian standard deviation relative to the candle midpoint")
    p.add_argument("--alpha", type=float, help="pareto shape")
    p.add_argument("--fee", type=fee_value, action="append", help="swap fee; repeat to sweep")
    p.add_argument("--gas", type=float, help="flat numeraire cost per order")
    p.add_argument("--baseline", choices=("winner", "midpoint"), help="price used for the no-auction LP loss")
    p.add_argument("--out-dir", help="directory for metrics.csv and summary.json")
    p.set_defaults(func=cmd_replay, default_output="json")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "seed_given"):
        args.seed_given = False
    if args.output is None:
        args.output = args.default_output
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CfmmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
