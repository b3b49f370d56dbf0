"""Baseline predictors: one-step (or k-step) Martingale and a random control."""

from __future__ import annotations

import numpy as np

from .errors import InsufficientHistoryError, ValidationError
from .panel import QuarterlyPanel
from .ranking import zero_centered_rank


def mgl_predict(panel: QuarterlyPanel, target_quarter: str, lag: int = 1) -> list[str]:
    """Reuse the actual price-change ordering from `lag` quarters back.

    The ordering covers equities active in the target quarter, sorted by
    their change over quarter t-lag, descending. Equities with no measurable
    change then sit at the neutral center: after every equity with rank
    value > 0 and after any present value tied at exactly 0, in id order.
    """
    if lag < 1:
        raise ValidationError("lag must be >= 1")
    t = panel.quarter_pos(target_quarter)
    if t - lag < 1:
        raise InsufficientHistoryError(
            f"{target_quarter}: lag {lag} reaches before the first measurable change"
        )
    changes = panel.change_matrix()[:, t - lag]
    active = panel.active_matrix()[:, t]
    ids = [rec.equity_id for rec, a in zip(panel.records, active) if a]
    vals = changes[active]
    if np.all(np.isnan(vals)):
        values = np.zeros(len(ids))
    else:
        values = zero_centered_rank(vals)
    missing = np.isnan(vals)
    order = sorted(range(len(ids)), key=lambda i: (-values[i], bool(missing[i]), ids[i]))
    return [ids[i] for i in order]


def random_predict(universe, seed: int) -> list[str]:
    """Uniform random permutation of the universe from a seeded stream."""
    ids = sorted(universe)
    if not ids:
        raise ValidationError("empty universe")
    rng = np.random.default_rng(seed)
    return [ids[i] for i in rng.permutation(len(ids))]
