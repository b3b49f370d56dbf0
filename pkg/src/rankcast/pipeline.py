"""End-to-end run: ingest, dropout, backtest, diagnostics, file outputs.

The report is a plain JSON-ready dict so figure extraction can work either
on a fresh in-memory run or on a report reloaded from disk. Every file is
written atomically (temp + rename) and all numeric content is fully
determined by (inputs, config, seed); reports carry no timestamps.
"""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .decomposition import success_weight_series
from .errors import RankcastError, ValidationError
from .ga import ConfigBounds, ga_optimize
from .network import AnnConfig
from .panel import apply_earnings_dropout, load_universe
from .persistence import BinarySeries, persistence_test, success_market_correlation
from .phases import classify_quarters, per_rank_phase_profile, phase_summary, rank_return_table, write_phase_csv
from .portfolio import PortfolioSpec, SIZES, run_backtest, write_ledger_csv
from .predictors import derived_seed, make_predictor
from .riskmetrics import build_risk_report

PHASE_TABLE_SIZES = (10, 100)
BASELINE_SPECS = ("mgl", "random")


@dataclass
class RunConfig:
    input_path: str
    predictor: str = "ann"
    seed: int = 0
    first_quarter: str | None = None
    last_quarter: str | None = None
    rf_annual: float = 0.06
    dropout_rate: float = 0.30
    cost_per_rebalance: float = 0.0
    output_dir: str = "out"
    mc_trials: int = 100_000
    jobs: int = 1
    ga_budget: int = 0
    ann_hidden_units: int = 8
    ann_init_count: int = 8
    ann_epochs: int = 200
    ann_context_decay: float = 0.5

    def config_hash(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k != "output_dir"}
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@contextmanager
def atomic_path(path):
    tmp = f"{path}.tmp"
    yield tmp
    os.replace(tmp, path)


def _clean(value):
    """JSON-safe copy: numpy scalars to python, NaN to null."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if np.isnan(v) else v
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def _ann_config(config: RunConfig) -> AnnConfig:
    return AnnConfig(
        hidden_units=config.ann_hidden_units,
        epochs=config.ann_epochs,
        context_decay=config.ann_context_decay,
        init_count=config.ann_init_count,
        seed=0,
    )


def _excess_table(ledger, risk) -> dict[str, float]:
    return {
        f"H{s}": risk.per_portfolio[f"H{s}"].annual_return - ledger.rf_annual for s in SIZES
    }


def _phase_block(ledger, size: int) -> dict:
    labels = classify_quarters(ledger.series("H", size), PortfolioSpec("H", size))
    table = phase_summary(ledger, size, labels)
    profile = per_rank_phase_profile(rank_return_table(ledger, size), labels)
    cells = {
        f"{component}{phase}": {
            "n": cell.n,
            "mean": cell.mean,
            "arithmetic_mean": cell.arithmetic_mean,
            "pseudo_multiple": cell.pseudo_multiple,
        }
        for (component, phase), cell in table.cells.items()
    }
    return {
        "labels": labels.labels,
        "n_plus": table.n_plus,
        "n_minus": table.n_minus,
        "cells": cells,
        "cumulative": table.cumulative,
        "annualized": table.annualized,
        "profile": [[p, m] for p, m in profile],
        "_table": table,
    }


def run_pipeline(config: RunConfig) -> dict:
    """Execute the full chain and write report, ledger, phase and figure
    files into config.output_dir. Returns the report dict."""
    with open(config.input_path) as fh:
        panel = load_universe(fh)
    panel = apply_earnings_dropout(panel, config.dropout_rate, derived_seed(config.seed, 0xD0))

    ann_config = _ann_config(config)
    if config.ga_budget > 0 and config.predictor == "ann":
        tuned = ga_optimize(
            panel,
            ConfigBounds(),
            budget=config.ga_budget,
            seed=derived_seed(config.seed, 0x6A),
            target_quarter=None,
        )
        ann_config = AnnConfig(
            hidden_units=tuned.hidden_units,
            learning_rate=tuned.learning_rate,
            epochs=tuned.epochs,
            context_decay=tuned.context_decay,
            init_count=config.ann_init_count,
            seed=0,
        )

    predictor = make_predictor(config.predictor, derived_seed(config.seed, 0xA1), ann_config)
    first = config.first_quarter or predictor.first_usable(panel)
    last = config.last_quarter or panel.quarters[-1]
    ledger = run_backtest(
        panel,
        predictor,
        first,
        last,
        rf_annual=config.rf_annual,
        cost_per_rebalance=config.cost_per_rebalance,
        predictor_name=predictor.name,
    )
    risk = build_risk_report(ledger)

    mixture = success_weight_series(ledger.quarters, ledger.ordered_changes)
    mixture_rows = []
    for qw in mixture:
        row = {"quarter": qw.quarter, "error": qw.error}
        if qw.weights is not None:
            row.update(
                theta1=qw.weights.theta1,
                theta2=qw.weights.theta2,
                ci95=qw.weights.ci95,
                w_success=qw.weights.w_success,
                success=qw.success,
            )
        mixture_rows.append(row)

    fitted = [qw for qw in mixture if qw.weights is not None]
    persistence_block: dict = {"success": None, "market_direction": None, "success_market_r2": None}
    mc_seed = derived_seed(config.seed, 0xFE)
    if len(fitted) >= 4:
        flags = BinarySeries(
            np.array([1 if qw.success else 0 for qw in fitted], dtype=np.uint8),
            origin=f"{predictor.name} success flags",
        )
        res = persistence_test(flags, scale=1, mode="pattern",
                               trials=config.mc_trials, seed=mc_seed)
        persistence_block["success"] = {
            "p_measure": res.p_measure, "scale": res.scale, "mode": res.mode,
            "p_value": res.p_value, "trials": res.trials, "seed": res.seed,
        }
        market_for_flags = np.array(
            [ledger.universe_mean[ledger.quarters.index(qw.quarter)] for qw in fitted]
        )
        try:
            persistence_block["success_market_r2"] = success_market_correlation(
                flags, market_for_flags
            )
        except RankcastError:
            pass
    direction = BinarySeries(
        (ledger.universe_mean > 0).astype(np.uint8), origin="universe mean direction"
    )
    res = persistence_test(direction, scale=1, mode="pattern",
                           trials=config.mc_trials, seed=derived_seed(config.seed, 0xFF))
    persistence_block["market_direction"] = {
        "p_measure": res.p_measure, "scale": res.scale, "mode": res.mode,
        "p_value": res.p_value, "trials": res.trials, "seed": res.seed,
    }

    phase_blocks = {str(size): _phase_block(ledger, size) for size in PHASE_TABLE_SIZES}

    baselines: dict[str, dict] = {}
    for spec in BASELINE_SPECS:
        if spec == predictor.name:
            continue
        base_pred = make_predictor(spec, derived_seed(config.seed, 0xB0))
        base_ledger = run_backtest(
            panel, base_pred, first, last,
            rf_annual=config.rf_annual,
            cost_per_rebalance=config.cost_per_rebalance,
            predictor_name=base_pred.name,
        )
        base_risk = build_risk_report(base_ledger)
        baselines[spec] = {
            "excess_annual": _excess_table(base_ledger, base_risk),
            "sharpe": {f"H{s}": base_risk.per_portfolio[f"H{s}"].sharpe for s in SIZES},
            "alpha": {f"H{s}": base_risk.per_portfolio[f"H{s}"].alpha for s in SIZES},
        }

    report = {
        "provenance": {
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "package_version": __version__,
            "predictor": predictor.name,
            "input": os.path.basename(config.input_path),
            "rf_annual": config.rf_annual,
            "dropout_rate": config.dropout_rate,
            "cost_per_rebalance": config.cost_per_rebalance,
            "mc_trials": config.mc_trials,
        },
        "quarters": ledger.quarters,
        "ledger": {
            "returns": {k: v for k, v in ledger.returns.items()},
            "universe_mean": ledger.universe_mean,
            "ordered_changes": {q: c for q, c in ledger.ordered_changes.items()},
        },
        "risk": {
            "per_portfolio": {
                key: {
                    "annual_return": pr.annual_return,
                    "annual_volatility": pr.annual_volatility,
                    "sharpe": pr.sharpe,
                    "beta": pr.beta,
                    "alpha": pr.alpha,
                }
                for key, pr in risk.per_portfolio.items()
            },
            "power_fit": None
            if risk.power_fit is None
            else {
                "a": risk.power_fit.a,
                "b": risk.power_fit.b,
                "r2": risk.power_fit.r2,
                "excluded": risk.power_fit.excluded,
            },
            "excess_annual": _excess_table(ledger, risk),
        },
        "mixture": mixture_rows,
        "persistence": persistence_block,
        "phases": {
            size: {k: v for k, v in block.items() if k != "_table"}
            for size, block in phase_blocks.items()
        },
        "baselines": baselines,
    }
    report = _clean(report)

    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    with atomic_path(os.path.join(out, "report.json")) as tmp:
        with open(tmp, "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=1)
    with atomic_path(os.path.join(out, "ledger.csv")) as tmp:
        write_ledger_csv(ledger, tmp)
    for size in PHASE_TABLE_SIZES:
        with atomic_path(os.path.join(out, f"phase_{size}.csv")) as tmp:
            write_phase_csv(phase_blocks[str(size)]["_table"], tmp)
    figure_files = {
        "cd-returns": "cd_returns.csv",
        "w-success": "w_success.csv",
        "sharpe": "sharpe.csv",
        "alpha": "alpha.csv",
        "phase-profile": "phase_profile_10.csv",
        "butterfly": f"butterfly_{ledger.quarters[-1]}.csv",
    }
    for figure, name in figure_files.items():
        with atomic_path(os.path.join(out, name)) as tmp:
            emit_figure_data(report, figure, tmp)
    with atomic_path(os.path.join(out, "phase_profile_100.csv")) as tmp:
        emit_figure_data(report, "phase-profile", tmp, size=100)
    return report


FIGURES = ("cd-returns", "w-success", "phase-profile", "butterfly", "sharpe", "alpha")


def _require(report: dict, key: str, stage: str):
    value = report.get(key)
    if not value:
        raise ValidationError(f"report lacks {key!r}; run the {stage} stage first")
    return value


def emit_figure_data(report: dict, figure: str, path, quarter: str | None = None,
                     size: int = 10) -> None:
    """Write one figure's backing data as a plain CSV with a header row."""
    import csv as _csv

    if figure not in FIGURES:
        raise ValidationError(f"unknown figure {figure!r}; choose from {FIGURES}")

    def fmt(v):
        return "" if v is None else repr(float(v))

    rows: list[list] = []
    if figure == "cd-returns":
        risk = _require(report, "risk", "backtest")
        baselines = report.get("baselines", {})
        primary = report["provenance"]["predictor"]
        names = [primary] + [b for b in baselines if b != primary]
        header = ["cd"] + names
        for s in SIZES:
            row = [s, fmt(risk["excess_annual"][f"H{s}"])]
            for b in names[1:]:
                row.append(fmt(baselines[b]["excess_annual"][f"H{s}"]))
            rows.append(row)
    elif figure == "w-success":
        mixture = _require(report, "mixture", "decomposition")
        header = ["quarter", "theta1", "theta2", "ci95", "w_success", "success"]
        for m in mixture:
            if m.get("error"):
                rows.append([m["quarter"], "", "", "", "", ""])
            else:
                rows.append(
                    [m["quarter"], fmt(m["theta1"]), fmt(m["theta2"]), fmt(m["ci95"]),
                     fmt(m["w_success"]), int(m["success"])]
                )
    elif figure == "phase-profile":
        phases = _require(report, "phases", "phase analysis")
        block = phases.get(str(size))
        if block is None:
            raise ValidationError(f"no phase table for size {size}; run the phase analysis stage first")
        header = ["position", "rank_label", "plus_multiple", "minus_multiple"]
        labels = [f"T{i}" for i in range(1, size + 1)] + [f"B{i}" for i in range(size, 0, -1)]
        for i, (label, (plus, minus)) in enumerate(zip(labels, block["profile"]), start=1):
            rows.append([i, label, fmt(plus), fmt(minus)])
    elif figure == "butterfly":
        ledger = _require(report, "ledger", "backtest")
        quarters = report["quarters"]
        q = quarter or quarters[-1]
        changes = ledger["ordered_changes"].get(q)
        if changes is None:
            raise ValidationError(f"no ordered changes for {q}; run the backtest stage first")
        header = ["predicted_position", "actual_change"]
        for i, c in enumerate(changes, start=1):
            rows.append([i, fmt(c)])
    elif figure == "sharpe":
        risk = _require(report, "risk", "backtest")
        baselines = report.get("baselines", {})
        primary = report["provenance"]["predictor"]
        names = [primary] + [b for b in baselines if b != primary]
        header = ["cd"] + names
        for s in SIZES:
            row = [s, fmt(risk["per_portfolio"][f"H{s}"]["sharpe"])]
            for b in names[1:]:
                row.append(fmt(baselines[b]["sharpe"][f"H{s}"]))
            rows.append(row)
    else:  # alpha
        risk = _require(report, "risk", "backtest")
        fit = risk.get("power_fit")
        header = ["cd", "alpha", "power_fit"]
        for s in SIZES:
            alpha = risk["per_portfolio"][f"H{s}"]["alpha"]
            fitted = None if fit is None else fit["a"] * s ** fit["b"]
            rows.append([s, fmt(alpha), fmt(fitted)])

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
