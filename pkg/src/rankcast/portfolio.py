"""Cumulative-decile portfolio construction, quarterly accounting, and the
walk-forward backtest loop.

Thirty portfolios per quarter: Top(s) and Bottom(s) for s in 10..100 plus
their hedges H(s) = T(s) - B(s). Portfolios are equal-weighted, formed from
the predicted ordering, and held fixed for one quarter.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BacktestError, ValidationError
from .panel import QuarterlyPanel

logger = logging.getLogger(__name__)

SIZES = tuple(range(10, 101, 10))
SIDES = ("T", "B", "H")
MIN_UNIVERSE = 200


@dataclass(frozen=True)
class PortfolioSpec:
    side: str  # T | B | H
    size: int

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValidationError(f"side {self.side!r} not in {SIDES}")
        if self.size not in SIZES:
            raise ValidationError(f"size {self.size} not a cumulative decile in 10..100")

    @property
    def key(self) -> str:
        return f"{self.side}{self.size}"


@dataclass
class BacktestLedger:
    quarters: list[str]
    returns: dict[str, np.ndarray]  # "T10".."H100" -> per-quarter fractions
    universe_mean: np.ndarray
    rf_annual: float
    predictor_name: str = ""
    # actual changes in predicted-rank order, per quarter (NaN = no change)
    ordered_changes: dict[str, np.ndarray] = field(default_factory=dict)

    def series(self, side: str, size: int) -> np.ndarray:
        return self.returns[f"{side}{size}"]


def build_cumulative_deciles(ordering) -> dict[str, list[str]]:
    """Membership for T10..T100 and B10..B100 from a best-first ordering."""
    ordering = list(ordering)
    n = len(ordering)
    if n < MIN_UNIVERSE:
        raise ValidationError(f"universe {n} < {MIN_UNIVERSE}; top and bottom would overlap")
    out = {}
    for s in SIZES:
        out[f"T{s}"] = ordering[:s]
        out[f"B{s}"] = ordering[-s:]
    return out


def portfolio_quarter_return(members, actual_changes: dict[str, float]) -> float:
    """Equal-weighted mean change of the members; unmeasurable members are
    dropped with a warning."""
    vals = []
    dropped = []
    for eid in members:
        c = actual_changes.get(eid)
        if c is None or np.isnan(c):
            dropped.append(eid)
        else:
            vals.append(c)
    if dropped:
        logger.warning("dropped %d member(s) without a return: %s", len(dropped), dropped[:5])
    if not vals:
        raise ValidationError("no member has a measurable return")
    return float(np.mean(vals))


def hedged_return(top_return: float, bottom_return: float) -> float:
    return top_return - bottom_return


def compound(returns) -> float:
    """Product of (1 + x); empty input compounds to 1."""
    total = 1.0
    for x in returns:
        if np.isnan(x):
            raise ValidationError("cannot compound a missing return")
        if x < -1.0:
            raise ValidationError(f"return {x} below -1")
        total *= 1.0 + x
    return total


def annualize(multiple: float, quarters: int) -> float:
    if multiple <= 0:
        raise ValidationError(f"multiple {multiple} must be positive")
    if quarters < 1:
        raise ValidationError("quarters must be >= 1")
    return multiple ** (4.0 / quarters) - 1.0


def excess_return(annual: float, rf_annual: float) -> float:
    return annual - rf_annual


def run_backtest(
    panel: QuarterlyPanel,
    predictor,
    first_quarter: str,
    last_quarter: str,
    rf_annual: float = 0.06,
    cost_per_rebalance: float = 0.0,
    predictor_name: str = "",
) -> BacktestLedger:
    """Walk each quarter: predict an ordering, form all 30 portfolios, and
    record their realized returns plus the universe mean.

    A nonzero cost is a flat per-side haircut per rebalance: the long side
    loses it and the short side's as-if-long return gains it, so a hedge
    pays twice while H = T - B stays exact.
    """
    first_i = panel.quarter_pos(first_quarter)
    last_i = panel.quarter_pos(last_quarter)
    if last_i < first_i:
        raise ValidationError("last_quarter precedes first_quarter")
    if first_i < 1:
        raise ValidationError(f"{first_quarter}: no realized changes before the second quarter")

    all_changes = panel.change_matrix()
    ids = panel.equity_ids
    quarters = panel.quarters[first_i : last_i + 1]
    series: dict[str, list[float]] = {f"{side}{s}": [] for side in SIDES for s in SIZES}
    universe_mean: list[float] = []
    ordered_changes: dict[str, np.ndarray] = {}

    for qi, quarter in zip(range(first_i, last_i + 1), quarters):
        try:
            ordering = predictor(panel, quarter)
        except Exception as exc:
            raise BacktestError(f"{quarter}: predictor failed: {exc}") from exc
        changes = dict(zip(ids, all_changes[:, qi]))
        membership = build_cumulative_deciles(ordering)
        for s in SIZES:
            t_ret = portfolio_quarter_return(membership[f"T{s}"], changes) - cost_per_rebalance
            b_ret = portfolio_quarter_return(membership[f"B{s}"], changes) + cost_per_rebalance
            series[f"T{s}"].append(t_ret)
            series[f"B{s}"].append(b_ret)
            series[f"H{s}"].append(hedged_return(t_ret, b_ret))
        col = all_changes[:, qi]
        universe_mean.append(float(np.nanmean(col)))
        ordered_changes[quarter] = np.array([changes[eid] for eid in ordering])

    return BacktestLedger(
        quarters=quarters,
        returns={k: np.array(v) for k, v in series.items()},
        universe_mean=np.array(universe_mean),
        rf_annual=rf_annual,
        predictor_name=predictor_name,
        ordered_changes=ordered_changes,
    )


def write_ledger_csv(ledger: BacktestLedger, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quarter", "side", "size", "return", "universe_mean"])
        for i, quarter in enumerate(ledger.quarters):
            for side in SIDES:
                for s in SIZES:
                    writer.writerow(
                        [
                            quarter,
                            side,
                            s,
                            repr(float(ledger.returns[f"{side}{s}"][i])),
                            repr(float(ledger.universe_mean[i])),
                        ]
                    )
