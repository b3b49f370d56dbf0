"""Sharpe ratio, CAPM beta / Jensen's alpha, and the alpha-vs-decile
power-law fit.

Conventions: quarterly series, geometric annualization (4 quarters/year),
volatility annualized by a factor of 2, quarterly risk-free rate taken as
one fourth of the annual rate. The market series for beta is the
equal-weighted universe mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ValidationError
from .portfolio import BacktestLedger, SIZES, annualize, compound

QUARTERS_PER_YEAR = 4


def beta_of(strategy_returns, market_returns) -> float:
    """Cov[strategy, market] / Var[market]."""
    s = np.asarray(strategy_returns, dtype=float)
    m = np.asarray(market_returns, dtype=float)
    if s.shape != m.shape or s.size < 3:
        raise ValidationError("need equal-length series of at least 3 quarters")
    sm = s - s.mean()
    mm = m - m.mean()
    var = float(mm @ mm)
    if var == 0.0:
        raise DegenerateInputError("market variance is zero")
    return float(sm @ mm) / var


def capm_residuals(strategy_returns, market_returns) -> np.ndarray:
    """Least-squares residuals of strategy on market (intercept included)."""
    s = np.asarray(strategy_returns, dtype=float)
    m = np.asarray(market_returns, dtype=float)
    beta = beta_of(s, m)
    return s - (s.mean() - beta * m.mean()) - beta * m


def jensen_alpha(strategy_returns, market_returns, rf_quarterly: float) -> float:
    """Annualized mean return in excess of the CAPM expectation."""
    s = np.asarray(strategy_returns, dtype=float)
    m = np.asarray(market_returns, dtype=float)
    beta = beta_of(s, m)
    alpha_q = (s.mean() - rf_quarterly) - beta * (m.mean() - rf_quarterly)
    return float(QUARTERS_PER_YEAR * alpha_q)


def sharpe(strategy_returns, rf_annual: float) -> float:
    """Excess geometric annualized return over annualized volatility."""
    s = np.asarray(strategy_returns, dtype=float)
    if s.size < 2:
        raise ValidationError("need at least 2 returns")
    vol_q = float(s.std())  # population convention
    if vol_q == 0.0:
        raise DegenerateInputError("zero-variance return series")
    annual = annualize(compound(s), s.size)
    return (annual - rf_annual) / (vol_q * np.sqrt(QUARTERS_PER_YEAR))


@dataclass
class PowerFit:
    a: float
    b: float
    r2: float
    excluded: list[int] = field(default_factory=list)


def fit_power_law(alphas, cds=None) -> PowerFit:
    """Least squares of log(alpha) on log(cd); non-positive alphas are
    excluded and flagged rather than fatal. cds defaults to 10..100."""
    al = np.asarray(alphas, dtype=float)
    cds = np.array(SIZES, dtype=float) if cds is None else np.asarray(cds, dtype=float)
    if cds.shape != al.shape:
        raise ValidationError("cds and alphas misaligned")
    usable = al > 0
    excluded = [int(i) for i in np.flatnonzero(~usable)]
    if int(usable.sum()) < 3:
        raise ValidationError(f"only {int(usable.sum())} positive alphas; need at least 3")
    x = np.log(cds[usable])
    y = np.log(al[usable])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return PowerFit(a=float(np.exp(intercept)), b=float(slope), r2=r2, excluded=excluded)


@dataclass
class PortfolioRisk:
    annual_return: float
    annual_volatility: float
    sharpe: float | None
    beta: float
    alpha: float
    residuals: np.ndarray


@dataclass
class RiskReport:
    per_portfolio: dict[str, PortfolioRisk]
    power_fit: PowerFit | None
    rf_annual: float


def build_risk_report(ledger: BacktestLedger) -> RiskReport:
    """Risk metrics for all 30 portfolios against the universe-mean market,
    plus the power-law fit of hedged alphas against cumulative decile."""
    market = ledger.universe_mean
    rf = ledger.rf_annual
    out: dict[str, PortfolioRisk] = {}
    for key, series in ledger.returns.items():
        try:
            sh = sharpe(series, rf)
        except DegenerateInputError:
            sh = None
        out[key] = PortfolioRisk(
            annual_return=annualize(compound(series), series.size),
            annual_volatility=float(series.std()) * np.sqrt(QUARTERS_PER_YEAR),
            sharpe=sh,
            beta=beta_of(series, market),
            alpha=jensen_alpha(series, market, rf / QUARTERS_PER_YEAR),
            residuals=capm_residuals(series, market),
        )
    hedged_alphas = np.array([out[f"H{s}"].alpha for s in SIZES])
    try:
        power = fit_power_law(hedged_alphas)
    except ValidationError:
        power = None
    return RiskReport(per_portfolio=out, power_fit=power, rf_annual=rf)
