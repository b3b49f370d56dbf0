"""Cross-sectional rank transforms and coarse five-bin assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError

# Five-bin target proportions and the priority used to break remainder ties
# (outer bins first: 1, 5, 2, 4, 3).
BIN_WEIGHTS = (1, 3, 6, 3, 1)
BIN_WEIGHT_TOTAL = sum(BIN_WEIGHTS)
_TIE_PRIORITY = {0: 0, 4: 1, 1: 2, 3: 3, 2: 4}


@dataclass
class RankSnapshot:
    """One quarter's zero-centered rank values and the implied ordering."""

    quarter: str
    ids: list[str]
    values: np.ndarray
    ordering: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.ids) != self.values.size:
            raise ValidationError("ids and values misaligned")
        if self.values.size and abs(float(self.values.sum())) > 1e-9:
            raise ValidationError(f"rank values sum to {self.values.sum()}, expected 0")
        if self.values.size and np.max(np.abs(self.values)) > 1.0 + 1e-12:
            raise ValidationError("rank value outside [-1, 1]")
        val = dict(zip(self.ids, self.values))
        for a, b in zip(self.ordering, self.ordering[1:]):
            if val[a] < val[b]:
                raise ValidationError("ordering not sorted by descending value")


@dataclass
class BinAssignment:
    bins: dict[str, int]
    counts: tuple[int, int, int, int, int]


def zero_centered_rank(values) -> np.ndarray:
    """Map a cross-section onto descending ranks scaled into [-1, +1].

    Present values take descending positions 1..N (ties averaged) and map to
    (N + 1 - 2p) / (N - 1), so the best value lands at +1, the worst at -1,
    and the column sums to zero. Missing entries map to the neutral 0; a
    single present value also maps to 0.
    """
    v = np.asarray(values, dtype=float)
    present = ~np.isnan(v)
    n = int(present.sum())
    if n == 0:
        raise ValidationError("all-missing cross-section cannot be ranked")
    out = np.zeros(v.shape)
    if n == 1:
        return out
    positions = rankdata(-v[present], method="average")
    out[present] = (n + 1 - 2.0 * positions) / (n - 1)
    return out


def rank_from_scores(ids, scores) -> list[str]:
    """Stable descending sort of ids by score; ties break by id."""
    s = np.asarray(scores, dtype=float)
    if np.any(np.isnan(s)):
        raise ValidationError("scores contain missing values")
    pairs = sorted(zip(ids, s), key=lambda t: (-t[1], t[0]))
    return [eid for eid, _ in pairs]


def snapshot_from_values(quarter: str, ids, values) -> RankSnapshot:
    ranked = zero_centered_rank(values)
    return RankSnapshot(quarter, list(ids), ranked, rank_from_scores(ids, ranked))


def vl_bin_counts(n: int) -> tuple[int, int, int, int, int]:
    """Split n into five bins at proportions 1:3:6:3:1 by largest remainder.

    Remainder ties are resolved toward the outer bins (1, then 5, 2, 4, 3).
    """
    if n < 5:
        raise ValidationError(f"need at least 5 equities to bin, got {n}")
    quotas = [n * w / BIN_WEIGHT_TOTAL for w in BIN_WEIGHTS]
    base = [int(q) for q in quotas]
    remainders = [q - b for q, b in zip(quotas, base)]
    order = sorted(range(5), key=lambda i: (-remainders[i], _TIE_PRIORITY[i]))
    for i in order[: n - sum(base)]:
        base[i] += 1
    return tuple(base)


def vl_bin_assign(ordering) -> BinAssignment:
    """Assign bin labels 1..5 along a best-first ordering."""
    ordering = list(ordering)
    counts = vl_bin_counts(len(ordering))
    bins: dict[str, int] = {}
    start = 0
    for label, count in enumerate(counts, start=1):
        for eid in ordering[start : start + count]:
            bins[eid] = label
        start += count
    return BinAssignment(bins=bins, counts=counts)
