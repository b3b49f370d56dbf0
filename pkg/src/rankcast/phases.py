"""Phase segregation of backtest quarters and pseudo-compounded summaries.

Quarters split into an in-phase set (hedged return > 0) and an out-of-phase
set (<= 0). Pseudo-compounding multiplies (1 + return) within each phase as
if its quarters ran back to back; the two phase products multiply exactly
to the true overall compound, and the per-phase geometric mean is the
quarterly rate that would reproduce the phase product.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .portfolio import BacktestLedger, PortfolioSpec, annualize, compound

PHASE_PLUS = "+"
PHASE_MINUS = "-"


@dataclass
class PhaseLabeling:
    labels: list[str]  # "+" or "-" per quarter
    criterion_portfolio: PortfolioSpec

    @property
    def n_plus(self) -> int:
        return sum(1 for l in self.labels if l == PHASE_PLUS)

    @property
    def n_minus(self) -> int:
        return sum(1 for l in self.labels if l == PHASE_MINUS)


@dataclass
class PhaseCell:
    mean: float | None  # geometric per-quarter rate; None for an empty phase
    arithmetic_mean: float | None
    pseudo_multiple: float
    n: int


@dataclass
class PhaseTable:
    size: int
    n_plus: int
    n_minus: int
    cells: dict[tuple[str, str], PhaseCell]  # (component T/B/H, phase) -> cell
    cumulative: float
    annualized: float


def classify_quarters(hedged_returns, criterion: PortfolioSpec | None = None) -> PhaseLabeling:
    """Positive hedged quarters are in phase; zero or negative are not."""
    returns = np.asarray(hedged_returns, dtype=float)
    if returns.size == 0:
        raise ValidationError("no quarters to classify")
    labels = [PHASE_PLUS if r > 0 else PHASE_MINUS for r in returns]
    return PhaseLabeling(labels=labels, criterion_portfolio=criterion or PortfolioSpec("H", 10))


def pseudo_compound(row, labels: PhaseLabeling) -> tuple[float, float]:
    """Compound (1 + return) separately over each phase; an empty phase is 1.

    NaN entries (rank positions with no measurable return that quarter)
    contribute nothing, like a flat quarter.
    """
    returns = np.asarray(row, dtype=float)
    if returns.size != len(labels.labels):
        raise ValidationError("row length != label count")
    cleaned = np.where(np.isnan(returns), 0.0, returns)
    plus = compound(cleaned[[l == PHASE_PLUS for l in labels.labels]])
    minus = compound(cleaned[[l == PHASE_MINUS for l in labels.labels]])
    return plus, minus


def _cell(series: np.ndarray, labels: PhaseLabeling, phase: str) -> PhaseCell:
    mask = np.array([l == phase for l in labels.labels])
    n = int(mask.sum())
    vals = np.where(np.isnan(series), 0.0, series)[mask]
    multiple = compound(vals)
    if n == 0:
        return PhaseCell(mean=None, arithmetic_mean=None, pseudo_multiple=multiple, n=0)
    return PhaseCell(
        mean=multiple ** (1.0 / n) - 1.0,
        arithmetic_mean=float(vals.mean()),
        pseudo_multiple=multiple,
        n=n,
    )


def phase_summary(ledger: BacktestLedger, size: int, labels: PhaseLabeling) -> PhaseTable:
    """Per-phase means and pseudo-compounded multiples for T, B and H of one
    cumulative-decile size, plus the full hedged compound and its annualized
    rate. Displayed means are geometric so (1 + mean)^n equals the phase
    multiple exactly."""
    if size not in {s for s in range(10, 101, 10)}:
        raise ValidationError(f"size {size} not a cumulative decile")
    if len(labels.labels) != len(ledger.quarters):
        raise ValidationError("labeling does not cover the ledger quarters")
    cells = {}
    for component in ("T", "B", "H"):
        series = ledger.series(component, size)
        for phase in (PHASE_PLUS, PHASE_MINUS):
            cells[(component, phase)] = _cell(series, labels, phase)
    hedged = ledger.series("H", size)
    cumulative = compound(np.where(np.isnan(hedged), 0.0, hedged))
    return PhaseTable(
        size=size,
        n_plus=labels.n_plus,
        n_minus=labels.n_minus,
        cells=cells,
        cumulative=cumulative,
        annualized=annualize(cumulative, len(ledger.quarters)),
    )


def rank_return_table(ledger: BacktestLedger, size: int) -> np.ndarray:
    """(2*size, n_quarters) actual changes by predicted rank: rows are the
    top 1..size then bottom size..1 positions (ascending absolute rank)."""
    rows = np.full((2 * size, len(ledger.quarters)), np.nan)
    for qi, quarter in enumerate(ledger.quarters):
        changes = ledger.ordered_changes[quarter]
        if changes.size < 2 * size:
            raise ValidationError(f"{quarter}: universe smaller than 2x{size}")
        rows[:size, qi] = changes[:size]
        rows[size:, qi] = changes[-size:]
    return rows


def per_rank_phase_profile(table: np.ndarray, labels: PhaseLabeling) -> list[tuple[float, float]]:
    """Pseudo-compound each rank row; output follows the row order
    (top 1..s then bottom s..1)."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[0] % 2 != 0:
        raise ValidationError("rank table must have 2s rows")
    return [pseudo_compound(table[i], labels) for i in range(table.shape[0])]


def write_phase_csv(table: PhaseTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["component", "phase", "n", "mean", "pseudo_multiple", "cumulative", "annualized"]
        )
        for component in ("T", "B", "H"):
            for phase in (PHASE_PLUS, PHASE_MINUS):
                cell = table.cells[(component, phase)]
                writer.writerow(
                    [
                        f"{component}{table.size}",
                        phase,
                        cell.n,
                        "" if cell.mean is None else repr(cell.mean),
                        repr(cell.pseudo_multiple),
                        repr(table.cumulative),
                        repr(table.annualized),
                    ]
                )
