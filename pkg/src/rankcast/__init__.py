"""Cross-sectional equity rank forecasting and long/short decile diagnostics."""

__version__ = "0.1.0"

from .baselines import mgl_predict, random_predict
from .decomposition import (
    ArcTanhFit,
    MixtureWeights,
    decompose_weights,
    fit_arctanh,
    success_weight_series,
)
from .errors import RankcastError
from .features import FeatureMatrix, build_feature_matrix
from .ga import ConfigBounds, ga_optimize
from .network import AnnConfig, EnsembleModel, ann_predict, ann_train, load_model, save_model
from .panel import (
    DataQualityReport,
    EquityRecord,
    QuarterlyPanel,
    apply_earnings_dropout,
    load_universe,
    quarterly_pct_change,
)
from .persistence import (
    BinarySeries,
    PersistenceResult,
    mc_pvalue,
    persistence_measure,
    success_market_correlation,
)
from .phases import (
    PhaseLabeling,
    PhaseTable,
    classify_quarters,
    per_rank_phase_profile,
    phase_summary,
    pseudo_compound,
)
from .portfolio import (
    BacktestLedger,
    PortfolioSpec,
    annualize,
    build_cumulative_deciles,
    compound,
    excess_return,
    hedged_return,
    portfolio_quarter_return,
    run_backtest,
)
from .predictors import AnnPredictor, MartingalePredictor, RandomPredictor, make_predictor
from .ranking import (
    BinAssignment,
    RankSnapshot,
    rank_from_scores,
    vl_bin_assign,
    zero_centered_rank,
)
from .riskmetrics import beta_of, fit_power_law, jensen_alpha, sharpe
from .simulation import (
    ChangeSpec,
    ChurnReport,
    SyntheticConfig,
    SyntheticMarket,
    generate_market,
    recovery_score,
    simulate_bin_churn,
)
