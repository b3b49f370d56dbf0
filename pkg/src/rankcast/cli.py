"""Command-line entry point.

Subcommands: ingest, synth, backtest, analyze, figures, churn-mc. Exit
codes: 0 success, 1 runtime/data error, 2 usage error. All behavior is
driven by explicit flags; environment variables are never consulted.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import RankcastError
from .pipeline import FIGURES, RunConfig, atomic_path, emit_figure_data, run_pipeline
from .panel import apply_earnings_dropout, load_universe, write_panel_csv
from .portfolio import run_backtest, write_ledger_csv
from .predictors import derived_seed, make_predictor
from .network import AnnConfig
from .simulation import ChangeSpec, SyntheticConfig, generate_market, simulate_bin_churn, write_truth_csv

PREDICTOR_CHOICES = "ann | mgl | mgl-lag-<k> | random"


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="panel CSV (equity_id,quarter,price,earnings)")
    p.add_argument("--predictor", default="ann", help=f"one of: {PREDICTOR_CHOICES}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--first", default=None, help="first analysis quarter (YYYYQn)")
    p.add_argument("--last", default=None, help="last analysis quarter (YYYYQn)")
    p.add_argument("--rf", type=float, default=0.06, help="annual risk-free rate")
    p.add_argument("--dropout", type=float, default=0.30, help="earnings dropout rate")
    p.add_argument("--cost", type=float, default=0.0, help="per-side cost per rebalance")
    p.add_argument("--ann-hidden", type=int, default=8)
    p.add_argument("--ann-members", type=int, default=8)
    p.add_argument("--ann-epochs", type=int, default=200)
    p.add_argument("--ann-decay", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1, help="internal parallelism bound")


def _validated_predictor(parser, spec: str):
    try:
        make_predictor(spec, 0)
    except ValueError:
        parser.error(f"unknown predictor {spec!r}; choose from: {PREDICTOR_CHOICES}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankcast")
    parser.add_argument("--version", action="version", version=f"rankcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a panel CSV and report data quality")
    p.add_argument("--input", required=True)
    p.add_argument("--exclusion-threshold", type=float, default=0.005)
    p.add_argument("--output", required=True, help="quality report JSON path")

    p = sub.add_parser("synth", help="generate a synthetic market panel + truth file")
    p.add_argument("--equities", type=int, default=1452)
    p.add_argument("--quarters", type=int, default=40)
    p.add_argument("--signal-strength", type=float, default=0.5)
    p.add_argument("--signal-lag", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--earnings-coupling", type=float, default=0.5)
    p.add_argument("--flip", type=int, action="append", default=[],
                   help="quarter index whose signal sign is inverted (repeatable)")
    p.add_argument("--start-quarter", default="1990Q1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-panel", required=True)
    p.add_argument("--output-truth", required=True)

    p = sub.add_parser("backtest", help="run one predictor and write the ledger CSV")
    _add_run_flags(p)
    p.add_argument("--output", required=True, help="ledger CSV path")

    p = sub.add_parser("analyze", help="full pipeline: backtest + diagnostics + figure data")
    _add_run_flags(p)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--mc-trials", type=int, default=100_000)
    p.add_argument("--ga-budget", type=int, default=0,
                   help="hyperparameter search evaluations (0 = defaults)")

    p = sub.add_parser("figures", help="re-emit one figure's CSV from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--figure", required=True, choices=sorted(FIGURES))
    p.add_argument("--quarter", default=None, help="quarter for the butterfly figure")
    p.add_argument("--size", type=int, default=10, help="size for the phase profile")
    p.add_argument("--output", required=True)

    p = sub.add_parser("churn-mc", help="weekly rank-bin churn Monte Carlo")
    p.add_argument("--equities", type=int, default=1400)
    p.add_argument("--weeks", type=int, default=200)
    p.add_argument("--noise", type=float, required=True)
    p.add_argument("--drift-kind", default="student_t", choices=["zero", "normal", "student_t"])
    p.add_argument("--drift-scale", type=float, default=0.0)
    p.add_argument("--drift-df", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="churn report JSON path")
    return parser


def _cmd_ingest(args) -> int:
    with open(args.input) as fh:
        panel = load_universe(fh, exclusion_threshold=args.exclusion_threshold)
    doc = {
        "quarters": panel.n_quarters,
        "records": len(panel.records),
        "excluded_ids": panel.quality.excluded_ids,
        "discrepancy_rates": panel.quality.discrepancy_rates,
    }
    with atomic_path(args.output) as tmp:
        with open(tmp, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
    print(f"ingested {len(panel.records)} equities x {panel.n_quarters} quarters; "
          f"excluded {len(panel.quality.excluded_ids)}")
    return 0


def _cmd_synth(args) -> int:
    config = SyntheticConfig(
        n_equities=args.equities,
        n_quarters=args.quarters,
        signal_strength=args.signal_strength,
        signal_lag=args.signal_lag,
        phase_flip_quarters=frozenset(args.flip),
        noise_scale=args.noise,
        earnings_coupling=args.earnings_coupling,
        seed=args.seed,
        start_quarter=args.start_quarter,
    )
    market = generate_market(config)
    with atomic_path(args.output_panel) as tmp:
        write_panel_csv(market.panel, tmp)
    with atomic_path(args.output_truth) as tmp:
        write_truth_csv(market, tmp)
    print(f"wrote {args.equities} equities x {args.quarters} quarters to {args.output_panel}")
    return 0


def _cmd_backtest(args) -> int:
    with open(args.input) as fh:
        panel = load_universe(fh)
    panel = apply_earnings_dropout(panel, args.dropout, derived_seed(args.seed, 0xD0))
    ann_config = AnnConfig(hidden_units=args.ann_hidden, init_count=args.ann_members,
                           epochs=args.ann_epochs, context_decay=args.ann_decay)
    predictor = make_predictor(args.predictor, derived_seed(args.seed, 0xA1), ann_config)
    first = args.first or predictor.first_usable(panel)
    last = args.last or panel.quarters[-1]
    ledger = run_backtest(panel, predictor, first, last, rf_annual=args.rf,
                          cost_per_rebalance=args.cost, predictor_name=predictor.name)
    with atomic_path(args.output) as tmp:
        write_ledger_csv(ledger, tmp)
    print(f"{predictor.name}: {len(ledger.quarters)} quarters x 30 portfolios -> {args.output}")
    return 0


def _cmd_analyze(args) -> int:
    config = RunConfig(
        input_path=args.input,
        predictor=args.predictor,
        seed=args.seed,
        first_quarter=args.first,
        last_quarter=args.last,
        rf_annual=args.rf,
        dropout_rate=args.dropout,
        cost_per_rebalance=args.cost,
        output_dir=args.output_dir,
        mc_trials=args.mc_trials,
        jobs=args.jobs,
        ga_budget=args.ga_budget,
        ann_hidden_units=args.ann_hidden,
        ann_init_count=args.ann_members,
        ann_epochs=args.ann_epochs,
        ann_context_decay=args.ann_decay,
    )
    report = run_pipeline(config)
    print(f"analyzed {len(report['quarters'])} quarters with {report['provenance']['predictor']}; "
          f"report in {args.output_dir}")
    return 0


def _cmd_figures(args) -> int:
    with open(args.report) as fh:
        report = json.load(fh)
    with atomic_path(args.output) as tmp:
        emit_figure_data(report, args.figure, tmp, quarter=args.quarter, size=args.size)
    print(f"wrote {args.figure} data to {args.output}")
    return 0


def _cmd_churn(args) -> int:
    spec = ChangeSpec(kind=args.drift_kind, scale=args.drift_scale, df=args.drift_df)
    report = simulate_bin_churn(args.equities, args.weeks, spec, args.noise, args.seed)
    doc = {
        "churn_fraction": report.churn_fraction,
        "two_rank_jump_rate": report.two_rank_jump_rate,
        "weeks": report.weeks,
        "noise_scale": report.noise_scale,
        "n_changes": report.n_changes,
        "jump_pair_counts": {f"{a}-{b}": c for (a, b), c in sorted(report.jump_pair_counts.items())},
    }
    with atomic_path(args.output) as tmp:
        with open(tmp, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
    print(f"churn_fraction={report.churn_fraction:.4f} over {report.n_changes} changes")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "predictor", None) is not None:
        _validated_predictor(parser, args.predictor)
    handlers = {
        "ingest": _cmd_ingest,
        "synth": _cmd_synth,
        "backtest": _cmd_backtest,
        "analyze": _cmd_analyze,
        "figures": _cmd_figures,
        "churn-mc": _cmd_churn,
    }
    try:
        return handlers[args.command](args)
    except RankcastError as exc:
        print(f"rankcast: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
