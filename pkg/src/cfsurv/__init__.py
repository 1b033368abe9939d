"""Counterfactual survival estimation with augmented minimax balancing weights."""

from .balance import (
    BalanceWeights,
    SolverConfig,
    derivative_direction,
    explicit_riesz,
    imbalance,
    objective,
    solve_balance_weights,
)
from .dgp import (
    GroundTruth,
    SyntheticConfig,
    TwinsLikeConfig,
    gen_synthetic,
    gen_twins_like,
    ground_truth,
    true_censor_hazard,
    true_event_hazard,
    twins_ground_truth,
)
from .estimators import (
    ESTIMATOR_KINDS,
    EstimandSpec,
    EstimateResult,
    EstimatorParams,
    FoldPlan,
    augmented_estimate,
    balance_estimate,
    confidence_interval,
    dr_estimate,
    effect_estimate,
    ipw_estimate,
    or_estimate,
    plugin_estimate,
    run_estimator,
)
from .hazard import (
    KernelHazardModel,
    OracleHazardModel,
    OraclePropensity,
    PropensityModel,
    fit_censor_hazard,
    fit_event_hazard,
    fit_propensity,
    predict_curves,
)
from .kernels import KernelConfig, gram, rbf, spd_solve
from .sim import (
    MetricsRow,
    SimulationConfig,
    metrics,
    nominal_coverage,
    risb_rise,
    run_replications,
    summarize,
)
from .survival import (
    Dataset,
    ObservedUnit,
    TimeGrid,
    hazard_from_survival,
    indicators,
    read_dataset_csv,
    survival_from_hazard,
    write_dataset_csv,
)

__version__ = "0.1.0"
