"""Mixture decomposition of actual returns by predicted rank.

A quarter's butterfly-shaped scatter of actual changes against predicted
rank is modeled as a weighted blend of two envelope curves: the arctanh fit
of the changes sorted fully descending (what a perfectly correct ordering
would produce) and the fit of the fully ascending sort (a perfectly
inverted ordering). The blend weight of the correct envelope, theta1, and
its complement theta2 = 1 - theta1 track how much of the achievable
ordering the predictor realized; their difference is the quarter's success
weight.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateInputError, ValidationError

logger = logging.getLogger(__name__)

ARG_CLIP = 1e-6
GRAD_TOL = 1e-10
MAX_ITER = 500
MIN_POINTS = 10
S_MIN = 1e-12


@dataclass
class ArcTanhFit:
    c0: float  # offset
    c1: float  # amplitude
    s: float  # rank scale
    r2: float

    def curve(self, ranks) -> np.ndarray:
        r = np.asarray(ranks, dtype=float)
        arg = np.clip(1.0 - self.s * r, -1.0 + ARG_CLIP, 1.0 - ARG_CLIP)
        return self.c0 + self.c1 * np.arctanh(arg)


@dataclass
class MixtureWeights:
    theta1: float
    theta2: float
    ci95: float
    w_success: float

    def __post_init__(self):
        if abs(self.theta1 + self.theta2 - 1.0) > 1e-12:
            raise ValidationError("theta weights must sum to 1")


def _model(params: np.ndarray, r: np.ndarray):
    c0, c1, s = params
    raw = 1.0 - s * r
    clipped = np.clip(raw, -1.0 + ARG_CLIP, 1.0 - ARG_CLIP)
    g = np.arctanh(clipped)
    y = c0 + c1 * g
    inside = (raw > -1.0 + ARG_CLIP) & (raw < 1.0 - ARG_CLIP)
    return y, g, inside


def _jacobian(params: np.ndarray, r: np.ndarray, g: np.ndarray, inside: np.ndarray) -> np.ndarray:
    _, c1, s = params
    jac = np.empty((r.size, 3))
    jac[:, 0] = 1.0
    jac[:, 1] = g
    # d/ds arctanh(1 - s r) = -r / (1 - (1 - s r)^2); zero where clipped
    arg = np.clip(1.0 - s * r, -1.0 + ARG_CLIP, 1.0 - ARG_CLIP)
    jac[:, 2] = np.where(inside, -c1 * r / (1.0 - arg**2), 0.0)
    return jac


def fit_arctanh(ordered_changes) -> ArcTanhFit:
    """Damped Gauss-Newton fit of c0 + c1*arctanh(1 - s*r) over ranks 1..N.

    The arctanh argument is clipped just inside (-1, 1) so the endpoint
    ranks stay finite, and the scale s is boxed so s*N stays below 2; the
    convergence measure is the projected gradient norm, which a boundary
    optimum can satisfy. Iteration stops below 1e-10; running out of
    iterations raises with the last iterate attached.
    """
    y = np.asarray(ordered_changes, dtype=float)
    if y.size < MIN_POINTS:
        raise ValidationError(f"need at least {MIN_POINTS} points, got {y.size}")
    if np.any(np.isnan(y)):
        raise ValidationError("ordered changes contain missing values")
    n = y.size
    r = np.arange(1, n + 1, dtype=float)

    # start at the flat level, amplitude matched to the endpoint span, s = 1/N
    s0 = 1.0 / n
    half_range = float(np.arctanh(1.0 - s0))
    c1_0 = (y[0] - y[-1]) / (2.0 * half_range) if half_range > 0 else 0.0
    params = np.array([float(y.mean()), c1_0, s0])
    s_max = (2.0 - ARG_CLIP) / n

    def projected(grad: np.ndarray, s: float) -> np.ndarray:
        # drop the scale component where the box blocks its descent direction
        pg = grad.copy()
        if (s >= s_max and pg[2] > 0) or (s <= S_MIN and pg[2] < 0):
            pg[2] = 0.0
        return pg

    def solve_linear_at(s: float) -> np.ndarray:
        # offset and amplitude are linear once the scale is pinned
        arg = np.clip(1.0 - s * r, -1.0 + ARG_CLIP, 1.0 - ARG_CLIP)
        design = np.column_stack([np.ones(n), np.arctanh(arg)])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        return np.array([coef[0], coef[1], s])

    lam = 1e-3
    pred, g, inside = _model(params, r)
    residuals = y - pred
    cost = float(residuals @ residuals)
    for _ in range(MAX_ITER):
        jac = _jacobian(params, r, g, inside)
        grad = jac.T @ residuals
        if float(np.linalg.norm(projected(grad, params[2]))) < GRAD_TOL:
            break
        jtj = jac.T @ jac
        stepped = False
        for _ in range(60):
            damped = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-12))
            try:
                delta = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + delta
            trial[2] = min(max(trial[2], S_MIN), s_max)
            t_pred, t_g, t_inside = _model(trial, r)
            t_res = y - t_pred
            t_cost = float(t_res @ t_res)
            if t_cost <= cost:
                params, pred, g, inside = trial, t_pred, t_g, t_inside
                residuals, cost = t_res, t_cost
                lam = max(lam / 10.0, 1e-14)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            # no descent direction left; accept if already stationary
            break

    def pg_norm(p, res, gg, ins) -> float:
        grad = _jacobian(p, r, gg, ins).T @ res
        return float(np.linalg.norm(projected(grad, p[2])))

    # cost comparisons bottom out at float resolution before the gradient
    # does; re-solve the linear pair exactly, then take undamped
    # Gauss-Newton steps while they keep shrinking the projected gradient
    grad_norm = pg_norm(params, residuals, g, inside)
    for _ in range(25):
        if grad_norm < GRAD_TOL:
            break
        trial = solve_linear_at(params[2])
        t_pred, t_g, t_inside = _model(trial, r)
        t_res = y - t_pred
        t_norm = pg_norm(trial, t_res, t_g, t_inside)
        if t_norm >= grad_norm:
            jac = _jacobian(params, r, g, inside)
            grad = jac.T @ residuals
            try:
                delta = np.linalg.solve(jac.T @ jac, grad)
            except np.linalg.LinAlgError:
                break
            trial = params + delta
            trial[2] = min(max(trial[2], S_MIN), s_max)
            t_pred, t_g, t_inside = _model(trial, r)
            t_res = y - t_pred
            t_norm = pg_norm(trial, t_res, t_g, t_inside)
            if t_norm >= grad_norm:
                break
        params, pred, g, inside = trial, t_pred, t_g, t_inside
        residuals = t_res
        cost = float(residuals @ residuals)
        grad_norm = t_norm
    if grad_norm >= GRAD_TOL:
        raise ConvergenceError(
            f"arctanh fit stalled at gradient norm {grad_norm:.3e}",
            params=params.copy(),
            gradient_norm=grad_norm,
        )
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - cost / ss_tot
    return ArcTanhFit(c0=float(params[0]), c1=float(params[1]), s=float(params[2]), r2=r2)


def decompose_weights(
    actual_by_predicted_rank,
    correct_fit: ArcTanhFit,
    incorrect_fit: ArcTanhFit,
) -> MixtureWeights:
    """Constrained least squares of the scatter on the two envelope curves.

    With theta1 + theta2 pinned to 1 the problem reduces to one free
    parameter: regress (actual - incorrect_curve) on the curve difference.
    The 95% interval comes from that single parameter's standard error, and
    theta1 is clamped to [0, 1] (the constrained optimum sits at the
    boundary whenever the free solution leaves it).
    """
    y = np.asarray(actual_by_predicted_rank, dtype=float)
    if np.any(np.isnan(y)):
        raise ValidationError("actual changes contain missing values")
    r = np.arange(1, y.size + 1, dtype=float)
    diff = correct_fit.curve(r) - incorrect_fit.curve(r)
    norm2 = float(diff @ diff)
    if norm2 == 0.0:
        raise DegenerateInputError("correct and incorrect curves are identical")
    shifted = y - incorrect_fit.curve(r)
    theta1 = float(diff @ shifted) / norm2
    resid = shifted - theta1 * diff
    dof = max(y.size - 1, 1)
    se = float(np.sqrt((resid @ resid) / dof / norm2))
    theta1 = min(max(theta1, 0.0), 1.0)
    theta2 = 1.0 - theta1
    return MixtureWeights(theta1=theta1, theta2=theta2, ci95=1.96 * se,
                          w_success=theta1 - theta2)


@dataclass
class QuarterWeights:
    quarter: str
    weights: MixtureWeights | None
    error: str | None = None

    @property
    def success(self) -> bool | None:
        if self.weights is None:
            return None
        return self.weights.w_success > 0


def decompose_quarter(actual_by_predicted_rank) -> MixtureWeights:
    """Fit both envelopes from the quarter's own sorted changes, then blend."""
    y = np.asarray(actual_by_predicted_rank, dtype=float)
    y = y[~np.isnan(y)]
    if y.size < MIN_POINTS:
        raise ValidationError(f"need at least {MIN_POINTS} measurable changes, got {y.size}")
    descending = np.sort(y)[::-1]
    correct = fit_arctanh(descending)
    incorrect = fit_arctanh(descending[::-1])
    return decompose_weights(y, correct, incorrect)


def success_weight_series(quarters, ordered_changes: dict[str, np.ndarray]) -> list[QuarterWeights]:
    """Per-quarter mixture weights; a failed quarter is flagged, not fatal."""
    out = []
    for quarter in quarters:
        try:
            weights = decompose_quarter(ordered_changes[quarter])
            out.append(QuarterWeights(quarter=quarter, weights=weights))
        except (ValidationError, DegenerateInputError, ConvergenceError) as exc:
            logger.warning("%s: decomposition failed: %s", quarter, exc)
            out.append(QuarterWeights(quarter=quarter, weights=None, error=str(exc)))
    return out
