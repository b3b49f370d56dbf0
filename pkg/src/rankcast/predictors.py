"""Walk-forward predictor adapters for the backtest loop.

Each adapter is a callable (panel, quarter) -> best-first ordering over the
equities active that quarter, and must consume nothing from the target
quarter or later apart from the active-universe row set.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, replace

import numpy as np

from .baselines import mgl_predict, random_predict
from .errors import InsufficientHistoryError
from .features import build_feature_matrix
from .network import AnnConfig, TRAIN_QUARTERS, ann_predict, ann_train
from .panel import QuarterlyPanel


def derived_seed(*parts: int) -> int:
    """Stable sub-stream seed from integer parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass
class MartingalePredictor:
    lag: int = 1

    @property
    def name(self) -> str:
        return "mgl" if self.lag == 1 else f"mgl-lag-{self.lag}"

    def first_usable(self, panel: QuarterlyPanel) -> str:
        return panel.quarters[self.lag + 1]

    def __call__(self, panel: QuarterlyPanel, quarter: str) -> list[str]:
        return mgl_predict(panel, quarter, lag=self.lag)


@dataclass
class RandomPredictor:
    seed: int = 0
    name: str = "random"

    def first_usable(self, panel: QuarterlyPanel) -> str:
        return panel.quarters[1]

    def __call__(self, panel: QuarterlyPanel, quarter: str) -> list[str]:
        universe = [
            rec.equity_id
            for rec, a in zip(panel.records, panel.active_matrix()[:, panel.quarter_pos(quarter)])
            if a
        ]
        return random_predict(universe, derived_seed(self.seed, panel.quarter_pos(quarter)))


@dataclass
class AnnPredictor:
    """Retrains a fresh ensemble each quarter on the ten preceding quarters.

    Training-window feature matrices may fall back to neutral ranks where
    their own history is short; the prediction quarter itself always has the
    full eleven-level lookback. Ensemble seeds derive from (seed, quarter
    index) so runs are reproducible and quarters are independent. Feature
    matrices are cached per panel across the walk-forward sweep.
    """

    config: AnnConfig
    seed: int = 0
    name: str = "ann"
    last_model = None

    def __post_init__(self):
        self._fm_cache = weakref.WeakKeyDictionary()

    def first_usable(self, panel: QuarterlyPanel) -> str:
        first = TRAIN_QUARTERS + 1
        if first >= panel.n_quarters:
            raise InsufficientHistoryError("panel too short for any network prediction")
        return panel.quarters[first]

    def _training_matrix(self, panel: QuarterlyPanel, quarter: str):
        per_panel = self._fm_cache.setdefault(panel, {})
        if quarter not in per_panel:
            per_panel[quarter] = build_feature_matrix(
                panel, quarter, with_targets=True, allow_partial_history=True
            )
        return per_panel[quarter]

    def __call__(self, panel: QuarterlyPanel, quarter: str) -> list[str]:
        t = panel.quarter_pos(quarter)
        if t < TRAIN_QUARTERS + 1:
            raise InsufficientHistoryError(
                f"{quarter}: need {TRAIN_QUARTERS} training quarters plus one lookback"
            )
        train_mats = [
            self._training_matrix(panel, panel.quarters[q])
            for q in range(t - TRAIN_QUARTERS, t)
        ]
        config = replace(self.config, seed=derived_seed(self.seed, t))
        model = ann_train(train_mats, config)
        self.last_model = model
        return ann_predict(model, build_feature_matrix(panel, quarter))


@dataclass
class PerfectForesight:
    """Test oracle: replays the recorded true ordering."""

    truth: dict[str, list[str]]
    name: str = "oracle"

    def __call__(self, panel: QuarterlyPanel, quarter: str) -> list[str]:
        return list(self.truth[quarter])


def make_predictor(spec: str, seed: int, ann_config: AnnConfig | None = None):
    """Parse a predictor spec: ann | mgl | mgl-lag-<k> | random."""
    if spec == "ann":
        return AnnPredictor(config=ann_config or AnnConfig(), seed=seed)
    if spec == "mgl":
        return MartingalePredictor(lag=1)
    if spec.startswith("mgl-lag-"):
        try:
            lag = int(spec.removeprefix("mgl-lag-"))
        except ValueError:
            raise ValueError(f"bad predictor spec {spec!r}") from None
        if lag < 1:
            raise ValueError(f"bad predictor spec {spec!r}")
        return MartingalePredictor(lag=lag)
    if spec == "random":
        return RandomPredictor(seed=seed)
    raise ValueError(f"unknown predictor {spec!r}")
