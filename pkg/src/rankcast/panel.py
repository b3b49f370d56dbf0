"""Quarterly price/earnings panels: CSV ingestion, validation, and the
earnings-dropout realism rule.

Missing values are carried as NaN throughout; a NaN is an "absent" marker,
never a numeric sentinel. Panels are immutable after construction (arrays
are frozen) and safe to share between threads.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CsvParseError, DuplicateRowError, ValidationError
from .quarters import quarter_index, quarter_label

logger = logging.getLogger(__name__)

CSV_HEADER = ["equity_id", "quarter", "price", "earnings"]

# An earnings magnitude this many times the panel-wide median |earnings| is
# flagged as inconsistent, alongside any non-positive provided price.
EARNINGS_OUTLIER_FACTOR = 100.0
DEFAULT_EXCLUSION_THRESHOLD = 0.005


@dataclass
class DataQualityReport:
    excluded_ids: list[str] = field(default_factory=list)
    discrepancy_rates: dict[str, float] = field(default_factory=dict)
    dropout_seed: int | None = None


@dataclass
class EquityRecord:
    """One equity's aligned quarterly series; array length = panel quarter count."""

    equity_id: str
    prices: np.ndarray
    earnings: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        self.earnings = np.asarray(self.earnings, dtype=float)
        self.active = np.asarray(self.active, dtype=bool)
        if not (len(self.prices) == len(self.earnings) == len(self.active)):
            raise ValidationError(f"{self.equity_id}: misaligned series lengths")
        present = ~np.isnan(self.prices)
        if np.any(self.prices[present] <= 0):
            raise ValidationError(f"{self.equity_id}: non-positive present price")
        if np.any(present & ~self.active):
            raise ValidationError(f"{self.equity_id}: price present in inactive quarter")
        for arr in (self.prices, self.earnings, self.active):
            arr.flags.writeable = False


@dataclass(eq=False)  # identity semantics; panels are large shared containers
class QuarterlyPanel:
    quarters: list[str]
    records: list[EquityRecord]
    quality: DataQualityReport = field(default_factory=DataQualityReport)

    def __post_init__(self):
        idx = [quarter_index(q) for q in self.quarters]
        for a, b in zip(idx, idx[1:]):
            if b != a + 1:
                raise ValidationError(
                    f"quarter labels not contiguous at {quarter_label(a)} -> {quarter_label(b)}"
                )
        n = len(self.quarters)
        for rec in self.records:
            if len(rec.prices) != n:
                raise ValidationError(f"{rec.equity_id}: series length != quarter count {n}")

    @property
    def n_quarters(self) -> int:
        return len(self.quarters)

    @property
    def equity_ids(self) -> list[str]:
        return [r.equity_id for r in self.records]

    def record(self, equity_id: str) -> EquityRecord:
        for r in self.records:
            if r.equity_id == equity_id:
                return r
        raise KeyError(equity_id)

    def quarter_pos(self, label: str) -> int:
        try:
            return self.quarters.index(label)
        except ValueError:
            raise KeyError(f"quarter {label} not in panel") from None

    def price_matrix(self) -> np.ndarray:
        """(n_equities, n_quarters) price levels with NaN where absent."""
        return np.array([r.prices for r in self.records])

    def earnings_matrix(self) -> np.ndarray:
        return np.array([r.earnings for r in self.records])

    def active_matrix(self) -> np.ndarray:
        return np.array([r.active for r in self.records])

    def change_matrix(self) -> np.ndarray:
        """Fractional price change per quarter; column 0 is NaN (no prior level)."""
        prices = self.price_matrix()
        out = np.full_like(prices, np.nan)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[:, 1:] = prices[:, 1:] / prices[:, :-1] - 1.0
        return out


def _parse_number(text: str, line_no: int, what: str) -> float:
    text = text.strip()
    if text == "":
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise CsvParseError(line_no, f"bad {what} value {text!r}") from None


def load_universe(source, exclusion_threshold: float = DEFAULT_EXCLUSION_THRESHOLD) -> QuarterlyPanel:
    """Parse the equity_id,quarter,price,earnings CSV into a validated panel.

    Equities whose fraction of inconsistent fields exceeds exclusion_threshold
    are dropped and recorded in the quality report. A non-positive price on a
    surviving equity is a hard ValidationError. Quarter labels must form a
    contiguous run; a missing price row marks the quarter inactive.
    """
    if not 0.0 <= exclusion_threshold <= 1.0:
        raise ValueError(f"exclusion_threshold {exclusion_threshold} outside [0, 1]")
    if isinstance(source, (str, bytes)):
        source = io.StringIO(source if isinstance(source, str) else source.decode("utf-8"))

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvParseError(1, "empty stream, header required") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise CsvParseError(1, f"header {header!r} != {CSV_HEADER!r}")

    cells: dict[tuple[str, str], tuple[float, float]] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise CsvParseError(line_no, f"expected 4 fields, got {len(row)}")
        equity_id = row[0].strip()
        if not equity_id:
            raise CsvParseError(line_no, "empty equity_id")
        quarter = row[1].strip()
        try:
            quarter_index(quarter)
        except ValueError as exc:
            raise CsvParseError(line_no, str(exc)) from None
        price = _parse_number(row[2], line_no, "price")
        earnings = _parse_number(row[3], line_no, "earnings")
        key = (equity_id, quarter)
        if key in cells:
            raise DuplicateRowError(f"duplicate row for equity {equity_id}, quarter {quarter}")
        cells[key] = (price, earnings)

    if not cells:
        return QuarterlyPanel(quarters=[], records=[])

    q_indices = sorted({quarter_index(q) for _, q in cells})
    if q_indices[-1] - q_indices[0] + 1 != len(q_indices):
        missing = sorted(set(range(q_indices[0], q_indices[-1] + 1)) - set(q_indices))
        raise ValidationError(f"quarter gap: no rows for {quarter_label(missing[0])}")
    quarters = [quarter_label(i) for i in range(q_indices[0], q_indices[-1] + 1)]
    pos = {q: i for i, q in enumerate(quarters)}

    ids = sorted({eid for eid, _ in cells})
    n_q = len(quarters)
    prices = {eid: np.full(n_q, np.nan) for eid in ids}
    earnings = {eid: np.full(n_q, np.nan) for eid in ids}
    for (eid, q), (p, e) in cells.items():
        prices[eid][pos[q]] = p
        earnings[eid][pos[q]] = e

    all_abs_earn = np.abs(np.concatenate([earnings[eid] for eid in ids]))
    all_abs_earn = all_abs_earn[~np.isnan(all_abs_earn)]
    earn_median = float(np.median(all_abs_earn)) if all_abs_earn.size else 0.0

    rates: dict[str, float] = {}
    for eid in ids:
        p, e = prices[eid], earnings[eid]
        provided = int(np.sum(~np.isnan(p)) + np.sum(~np.isnan(e)))
        flagged = int(np.sum(~np.isnan(p) & (p <= 0)))
        if earn_median > 0:
            flagged += int(np.sum(~np.isnan(e) & (np.abs(e) > EARNINGS_OUTLIER_FACTOR * earn_median)))
        rates[eid] = flagged / provided if provided else 0.0

    excluded = sorted(eid for eid in ids if rates[eid] > exclusion_threshold)
    kept = [eid for eid in ids if eid not in set(excluded)]

    records = []
    for eid in kept:
        p = prices[eid]
        bad = ~np.isnan(p) & (p <= 0)
        if np.any(bad):
            q_bad = quarters[int(np.flatnonzero(bad)[0])]
            raise ValidationError(f"{eid}: non-positive price in {q_bad}")
        records.append(
            EquityRecord(equity_id=eid, prices=p, earnings=earnings[eid], active=~np.isnan(p))
        )

    quality = DataQualityReport(excluded_ids=excluded, discrepancy_rates=rates)
    return QuarterlyPanel(quarters=quarters, records=records, quality=quality)


def quarterly_pct_change(series) -> np.ndarray:
    """Fractional change between consecutive levels; NaN endpoints propagate.

    A zero base with both endpoints present yields NaN and a warning rather
    than a crash.
    """
    s = np.asarray(series, dtype=float)
    if s.size < 2:
        raise ValueError(f"need at least 2 levels, got {s.size}")
    base, nxt = s[:-1], s[1:]
    out = np.full(s.size - 1, np.nan)
    ok = ~np.isnan(base) & ~np.isnan(nxt)
    zero_base = ok & (base == 0)
    if np.any(zero_base):
        logger.warning("zero base at %d position(s); change left missing", int(zero_base.sum()))
    usable = ok & ~zero_base
    out[usable] = nxt[usable] / base[usable] - 1.0
    return out


def apply_earnings_dropout(panel: QuarterlyPanel, rate: float, seed: int) -> QuarterlyPanel:
    """Remove each present earnings value with probability `rate` (seeded),
    and always blank the most recent earnings column. Prices are untouched.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1]")
    rng = np.random.default_rng(seed)
    records = []
    for rec in panel.records:
        e = rec.earnings.copy()
        present = ~np.isnan(e)
        # one draw per present entry, in canonical record/quarter order
        draws = rng.random(int(present.sum()))
        drop = np.zeros_like(present)
        drop[present] = draws < rate
        e[drop] = np.nan
        if e.size:
            e[-1] = np.nan
        records.append(
            EquityRecord(rec.equity_id, rec.prices.copy(), e, rec.active.copy())
        )
    quality = replace(panel.quality, dropout_seed=seed)
    return QuarterlyPanel(quarters=list(panel.quarters), records=records, quality=quality)


def write_panel_csv(panel: QuarterlyPanel, path) -> None:
    """Emit the panel in the ingestion schema (inactive quarters are skipped)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in panel.records:
            for i, q in enumerate(panel.quarters):
                p, e = rec.prices[i], rec.earnings[i]
                if np.isnan(p) and np.isnan(e):
                    continue
                writer.writerow(
                    [
                        rec.equity_id,
                        q,
                        "" if np.isnan(p) else repr(float(p)),
                        "" if np.isnan(e) else repr(float(e)),
                    ]
                )
