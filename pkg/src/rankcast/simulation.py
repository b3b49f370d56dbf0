"""Synthetic quarterly market with a planted, laggable rank signal, plus the
weekly rank-bin churn Monte Carlo.

The market plants a latent per-equity quality whose cross-sectional rank
drives next-quarter returns after a configurable lag; phase-flip quarters
invert the sign of that signal, manufacturing quarters in which any
lag-following predictor is exactly wrong. The rank-to-return shape is
arctanh-like so the extremes of the ranking move disproportionately. Both
the quality innovations and the return noise scale with noise_scale, so a
zero-noise market has a frozen ordering that repeats every quarter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .panel import DataQualityReport, EquityRecord, QuarterlyPanel
from .quarters import quarter_range, shift_quarter
from .ranking import vl_bin_counts, zero_centered_rank

QUALITY_RHO = 0.97
RETURN_SCALE = 0.05
NOISE_RETURN_SCALE = 0.04
EARNINGS_NOISE_SCALE = 0.06
NOISE_DF = 4.0
SIGNAL_SHAPE_CLIP = 0.95
_SHAPE_NORM = float(np.arctanh(SIGNAL_SHAPE_CLIP))


@dataclass
class SyntheticConfig:
    n_equities: int = 1452
    n_quarters: int = 40
    signal_strength: float = 0.5
    signal_lag: int = 1
    phase_flip_quarters: frozenset[int] = frozenset()
    noise_scale: float = 0.5
    earnings_coupling: float = 0.5
    seed: int = 0
    start_quarter: str = "1990Q1"

    def __post_init__(self):
        if self.n_equities < 200:
            raise ValidationError("n_equities must be >= 200")
        if self.n_quarters < 12:
            raise ValidationError("n_quarters must be >= 12")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValidationError("signal_strength outside [0, 1]")
        if self.signal_lag < 1:
            raise ValidationError("signal_lag must be >= 1")
        if self.noise_scale < 0.0:
            raise ValidationError("noise_scale must be >= 0")
        if not 0.0 <= self.earnings_coupling <= 1.0:
            raise ValidationError("earnings_coupling outside [0, 1]")
        self.phase_flip_quarters = frozenset(self.phase_flip_quarters)


@dataclass
class SyntheticMarket:
    panel: QuarterlyPanel
    truth: dict[str, list[str]]  # quarter -> descending actual-change ordering
    config: SyntheticConfig


def _signal_shape(z: np.ndarray) -> np.ndarray:
    return np.arctanh(SIGNAL_SHAPE_CLIP * z) / _SHAPE_NORM


def generate_market(config: SyntheticConfig) -> SyntheticMarket:
    rng = np.random.default_rng(config.seed)
    n, nq, lag = config.n_equities, config.n_quarters, config.signal_lag
    width = len(str(n))
    ids = [f"E{i + 1:0{width}d}" for i in range(n)]

    # quality walks from index (1 - lag) so every return quarter has its lag
    steps = nq + lag - 1
    quality = np.empty((n, steps))
    quality[:, 0] = rng.normal(0.0, 1.0, size=n)
    innov = np.sqrt(1.0 - QUALITY_RHO**2) * config.noise_scale
    for t in range(1, steps):
        quality[:, t] = QUALITY_RHO * quality[:, t - 1] + innov * rng.normal(0.0, 1.0, size=n)

    def z_of(t: int) -> np.ndarray:
        return zero_centered_rank(quality[:, t + lag - 1])

    changes = np.zeros((n, nq))  # column 0 unused (no prior level)
    earn_growth = np.zeros((n, nq))
    for t in range(1, nq):
        flip = -1.0 if t in config.phase_flip_quarters else 1.0
        signal = RETURN_SCALE * config.signal_strength * flip * _signal_shape(z_of(t - lag))
        noise = NOISE_RETURN_SCALE * config.noise_scale * rng.standard_t(NOISE_DF, size=n)
        changes[:, t] = np.maximum(signal + noise, -0.95)
        e_noise = EARNINGS_NOISE_SCALE * config.noise_scale * rng.standard_t(NOISE_DF, size=n)
        earn_growth[:, t] = np.maximum(config.earnings_coupling * signal + e_noise, -0.9)

    prices = np.empty((n, nq))
    prices[:, 0] = 100.0
    earnings = np.empty((n, nq))
    earnings[:, 0] = 5.0
    for t in range(1, nq):
        prices[:, t] = prices[:, t - 1] * (1.0 + changes[:, t])
        earnings[:, t] = earnings[:, t - 1] * (1.0 + earn_growth[:, t])

    quarters = quarter_range(config.start_quarter, shift_quarter(config.start_quarter, nq - 1))
    records = [
        EquityRecord(ids[i], prices[i], earnings[i], np.ones(nq, dtype=bool))
        for i in range(n)
    ]
    panel = QuarterlyPanel(quarters=quarters, records=records, quality=DataQualityReport())

    truth: dict[str, list[str]] = {}
    id_arr = np.array(ids)
    for t in range(1, nq):
        order = np.lexsort((id_arr, -changes[:, t]))
        truth[quarters[t]] = [ids[i] for i in order]
    return SyntheticMarket(panel=panel, truth=truth, config=config)


def write_truth_csv(market: SyntheticMarket, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quarter", "equity_id", "true_position"])
        for quarter in market.panel.quarters:
            if quarter not in market.truth:
                continue
            for pos, eid in enumerate(market.truth[quarter], start=1):
                writer.writerow([quarter, eid, pos])


def recovery_score(predicted, truth) -> float:
    """Spearman correlation of the two orderings' positions, in [-1, 1]."""
    predicted, truth = list(predicted), list(truth)
    if set(predicted) != set(truth):
        raise ValidationError("orderings cover different equity sets")
    n = len(predicted)
    if n != len(set(predicted)):
        raise ValidationError("ordering contains duplicates")
    if n < 2:
        raise ValidationError("need at least 2 equities for a rank correlation")
    pos_t = {eid: i for i, eid in enumerate(truth)}
    d2 = sum((i - pos_t[eid]) ** 2 for i, eid in enumerate(predicted))
    return 1.0 - 6.0 * d2 / (n * (n**2 - 1))


@dataclass
class ChangeSpec:
    """Weekly underlying score-change distribution for the churn simulation."""

    kind: str = "student_t"  # zero | normal | student_t
    scale: float = 0.0
    df: float = 4.0

    def sample(self, rng, size: int) -> np.ndarray:
        if self.kind == "zero" or self.scale == 0.0:
            return np.zeros(size)
        if self.kind == "normal":
            return self.scale * rng.normal(0.0, 1.0, size=size)
        if self.kind == "student_t":
            return self.scale * rng.standard_t(self.df, size=size)
        raise ValidationError(f"unknown change distribution {self.kind!r}")


@dataclass
class ChurnReport:
    churn_fraction: float
    two_rank_jump_rate: float
    weeks: int
    noise_scale: float
    n_changes: int = 0
    jump_pair_counts: dict[tuple[int, int], int] = field(default_factory=dict)


def _bins_from_scores(scores: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    # position 0 = best; boundaries are cumulative bin counts
    order = np.argsort(-scores, kind="stable")
    position = np.empty_like(order)
    position[order] = np.arange(scores.size)
    return np.searchsorted(boundaries, position, side="right") + 1


def simulate_bin_churn(
    n_equities: int,
    weeks: int,
    change_sampler: ChangeSpec,
    noise_scale: float,
    seed: int,
) -> ChurnReport:
    """Re-bin noisy weekly scores and attribute bin-label changes.

    Underlying scores drift by change_sampler draws; the observed score adds
    heavy-tailed measurement noise. A week-over-week bin change is boundary
    churn when the noise-free assignment did not change between the same two
    weeks. Rates are fractions of all observed changes (0 when none occur).
    """
    if n_equities < 14:
        raise ValidationError("need at least 14 equities")
    if weeks < 2:
        raise ValidationError("need at least 2 weeks")
    rng = np.random.default_rng(seed)
    boundaries = np.cumsum(vl_bin_counts(n_equities))[:-1]

    u = rng.normal(0.0, 1.0, size=n_equities)
    obs = u + noise_scale * rng.standard_t(NOISE_DF, size=n_equities)
    prev_obs_bins = _bins_from_scores(obs, boundaries)
    prev_true_bins = _bins_from_scores(u, boundaries)

    n_changes = churn = jumps = 0
    jump_pairs: dict[tuple[int, int], int] = {}
    for _ in range(1, weeks):
        u = u + change_sampler.sample(rng, n_equities)
        obs = u + noise_scale * rng.standard_t(NOISE_DF, size=n_equities)
        obs_bins = _bins_from_scores(obs, boundaries)
        true_bins = _bins_from_scores(u, boundaries)
        changed = obs_bins != prev_obs_bins
        n_changes += int(changed.sum())
        churn += int((changed & (true_bins == prev_true_bins)).sum())
        jumped = changed & (np.abs(obs_bins - prev_obs_bins) >= 2)
        jumps += int(jumped.sum())
        for i in np.flatnonzero(jumped):
            pair = (min(prev_obs_bins[i], obs_bins[i]), max(prev_obs_bins[i], obs_bins[i]))
            jump_pairs[pair] = jump_pairs.get(pair, 0) + 1
        prev_obs_bins, prev_true_bins = obs_bins, true_bins

    return ChurnReport(
        churn_fraction=churn / n_changes if n_changes else 0.0,
        two_rank_jump_rate=jumps / n_changes if n_changes else 0.0,
        weeks=weeks,
        noise_scale=noise_scale,
        n_changes=n_changes,
        jump_pair_counts=jump_pairs,
    )
