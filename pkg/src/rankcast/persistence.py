"""Persistence / antipersistence statistics on binary series.

The measure is the pooled fraction of pattern recurrences whose following
bits repeat: near 1 the series keeps repeating its continuations
(persistent), near 0 it avoids them (antipersistent), 0.5 is random. Two
modes ship: "pattern" pools over every m-bit pattern's successive
occurrences; "adjacent" is simply the fraction of neighboring bit pairs
that match. Significance comes from a two-sided Monte Carlo against
uniform random series of the same length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, UndefinedMeasureError, ValidationError

MODES = ("pattern", "adjacent")


@dataclass
class BinarySeries:
    bits: np.ndarray
    origin: str = ""

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 1 or self.bits.size < 2:
            raise ValidationError("binary series needs at least 2 bits")
        if np.any(self.bits > 1):
            raise ValidationError("bits must be 0 or 1")


@dataclass
class PersistenceResult:
    p_measure: float
    scale: int
    mode: str
    p_value: float
    trials: int
    seed: int | None = None


def _pattern_measure(bits, scale: int) -> float:
    """Pooled fraction of same-pattern consecutive occurrences whose
    following bits match. Raises when no pattern recurs with a follower."""
    n = len(bits)
    last_follower: dict[int, int] = {}
    matches = pairs = 0
    code = 0
    mask = (1 << scale) - 1
    for i in range(scale):
        code = (code << 1) | bits[i]
    for i in range(n - scale):
        follower = bits[i + scale]
        prev = last_follower.get(code)
        if prev is not None:
            pairs += 1
            if prev == follower:
                matches += 1
        last_follower[code] = follower
        code = ((code << 1) | follower) & mask
    if pairs == 0:
        raise UndefinedMeasureError(f"no {scale}-bit pattern recurs with a follower")
    return matches / pairs


def persistence_measure(series: BinarySeries, scale: int = 1, mode: str = "pattern") -> float:
    if mode not in MODES:
        raise ValidationError(f"mode {mode!r} not in {MODES}")
    bits = series.bits.tolist()
    if mode == "adjacent":
        if len(bits) < 2:
            raise ValidationError("adjacent mode needs at least 2 bits")
        same = sum(1 for a, b in zip(bits, bits[1:]) if a == b)
        return same / (len(bits) - 1)
    if scale < 1:
        raise ValidationError("scale must be >= 1")
    if len(bits) < scale + 2:
        raise ValidationError(f"pattern mode at scale {scale} needs length >= {scale + 2}")
    return _pattern_measure(bits, scale)


def mc_pvalue(
    observed: float,
    length: int,
    scale: int,
    mode: str,
    trials: int,
    seed: int,
) -> float:
    """Two-sided empirical p-value against uniform random series.

    Counts trials at least as far from 0.5 as the observation, with the +1
    correction so the result is never 0. Trials on which the measure is
    undefined (possible in pattern mode at large scales) are discarded.
    """
    if trials < 1000:
        raise ValidationError("need at least 1000 trials")
    rng = np.random.default_rng(seed)
    threshold = abs(observed - 0.5)
    bits = rng.integers(0, 2, size=(trials, length), dtype=np.uint8)
    hits = valid = 0
    if mode == "adjacent":
        same = (bits[:, 1:] == bits[:, :-1]).mean(axis=1)
        valid = trials
        hits = int(np.sum(np.abs(same - 0.5) >= threshold - 1e-15))
    else:
        for row in bits.tolist():
            try:
                p = _pattern_measure(row, scale)
            except UndefinedMeasureError:
                continue
            valid += 1
            if abs(p - 0.5) >= threshold - 1e-15:
                hits += 1
        if valid == 0:
            raise UndefinedMeasureError("measure undefined on every trial")
    return (hits + 1) / (valid + 1)


def persistence_test(
    series: BinarySeries,
    scale: int = 1,
    mode: str = "pattern",
    trials: int = 100_000,
    seed: int = 0,
) -> PersistenceResult:
    p = persistence_measure(series, scale=scale, mode=mode)
    pv = mc_pvalue(p, len(series.bits), scale, mode, trials, seed)
    return PersistenceResult(p_measure=p, scale=scale, mode=mode, p_value=pv,
                             trials=trials, seed=seed)


def success_market_correlation(success_flags: BinarySeries, market_means) -> float:
    """Squared Pearson correlation between 0/1 flags and market mean returns."""
    f = success_flags.bits.astype(float)
    m = np.asarray(market_means, dtype=float)
    if f.shape != m.shape:
        raise ValidationError("flag and market series lengths differ")
    fd = f - f.mean()
    md = m - m.mean()
    denom = float(fd @ fd) * float(md @ md)
    if denom == 0.0:
        raise DegenerateInputError("zero variance on one side of the correlation")
    r = float(fd @ md) / np.sqrt(denom)
    return r * r
