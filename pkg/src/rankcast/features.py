"""Feature construction for the network predictor.

Each active equity gets 20 inputs for a target quarter t: the ten preceding
quarterly price changes and the ten preceding earnings changes (most recent
first), each column rank-transformed into [-1, +1] across the active
cross-section. Nothing from quarter t or later is touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistoryError, ValidationError
from .panel import QuarterlyPanel
from .ranking import zero_centered_rank

N_LAGS = 10
N_FEATURES = 2 * N_LAGS


@dataclass
class FeatureMatrix:
    quarter: str
    ids: list[str]
    features: np.ndarray  # (n_active, 20), all entries in [-1, 1]
    targets: np.ndarray | None = None  # actual change in `quarter`, training only

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.shape != (len(self.ids), N_FEATURES):
            raise ValidationError(
                f"feature shape {self.features.shape} != ({len(self.ids)}, {N_FEATURES})"
            )
        if self.features.size and np.max(np.abs(self.features)) > 1.0 + 1e-12:
            raise ValidationError("feature outside [-1, 1]")
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=float)
            if self.targets.shape != (len(self.ids),):
                raise ValidationError("targets misaligned with ids")


def _ranked_lag_columns(levels: np.ndarray, t: int) -> np.ndarray:
    """Ten rank-transformed change columns ending at quarter t-1, newest first.

    levels is (n, n_quarters); lag j uses the change over quarter t-1-j,
    i.e. levels at t-2-j and t-1-j. Out-of-range or missing changes rank 0.
    """
    n = levels.shape[0]
    cols = np.zeros((n, N_LAGS))
    for j in range(N_LAGS):
        hi, lo = t - 1 - j, t - 2 - j
        if lo < 0:
            continue  # entire column unavailable -> neutral
        base, nxt = levels[:, lo], levels[:, hi]
        with np.errstate(invalid="ignore", divide="ignore"):
            change = np.where(
                ~np.isnan(base) & ~np.isnan(nxt) & (base != 0), nxt / base - 1.0, np.nan
            )
        if np.all(np.isnan(change)):
            continue
        cols[:, j] = zero_centered_rank(change)
    return cols


def build_feature_matrix(
    panel: QuarterlyPanel,
    target_quarter: str,
    with_targets: bool = False,
    allow_partial_history: bool = False,
) -> FeatureMatrix:
    """Assemble the 20-column matrix over equities active in target_quarter.

    Requires 11 quarters before the target (ten changes need eleven levels)
    unless allow_partial_history is set, in which case unavailable lag
    columns fall back to the neutral rank 0. Targets, when requested, are
    the actual fractional price changes over the target quarter.
    """
    t = panel.quarter_pos(target_quarter)
    if t < N_LAGS + 1 and not allow_partial_history:
        first_ok = N_LAGS + 1
        if first_ok >= panel.n_quarters:
            raise InsufficientHistoryError(
                f"{target_quarter}: panel too short for any full-history target"
            )
        raise InsufficientHistoryError(
            f"{target_quarter}: need {N_LAGS + 1} prior quarters; "
            f"first usable target is {panel.quarters[first_ok]}"
        )
    if with_targets and t < 1:
        raise InsufficientHistoryError(f"{target_quarter}: no prior level for target change")

    active = panel.active_matrix()[:, t]
    rows = np.flatnonzero(active)
    ids = [panel.records[i].equity_id for i in rows]
    if not ids:
        raise ValidationError(f"{target_quarter}: no active equities")

    prices = panel.price_matrix()[rows]
    earnings = panel.earnings_matrix()[rows]
    features = np.hstack([_ranked_lag_columns(prices, t), _ranked_lag_columns(earnings, t)])

    targets = None
    if with_targets:
        base, nxt = prices[:, t - 1], prices[:, t]
        with np.errstate(invalid="ignore", divide="ignore"):
            targets = np.where(~np.isnan(base) & ~np.isnan(nxt), nxt / base - 1.0, np.nan)
    return FeatureMatrix(quarter=target_quarter, ids=ids, features=features, targets=targets)
