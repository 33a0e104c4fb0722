"""Structural model of a consumer store's cash flow and life cycle.

Style demand and supply meet in a Nash equilibrium whose conversion rate
decays with preference shifting; visibility broadening and spatial
competition shape the potential-customer flow; together they produce the
rainbow-shaped cash-flow curve that the calibration module fits to data.
"""

from .errors import (
    ConfigError,
    DomainError,
    DominanceViolation,
    FixedPointDivergence,
    InsufficientData,
    NeverOpens,
    NoPeak,
    NonConvergence,
    OptimizerDivergence,
    QuadratureError,
    RankDeficient,
    StoreCycleError,
    UnfillableGap,
)
from .styles import (
    ConsumerType,
    PreferenceDrift,
    StyleVector,
    TraditionalStyle,
    TransformFunction,
    optimal_preference_style,
    score,
    transform_for_population,
    validate_population,
)
from .demand import PurchaseDensity, Segment, StyleSet, optimal_density, utility
from .supply import (
    InvestmentConstraint,
    ShutdownRule,
    SupplyDecision,
    cash_flow_density,
    drift_coefficients,
    lifespan,
    solve_supply,
)
from .equilibrium import (
    MONOTONE,
    MULTI_PEAK,
    SINGLE_PEAK,
    ConversionCurveParams,
    CurveShape,
    EquilibriumSolution,
    InvestmentGrid,
    StyleUpdatePolicy,
    conversion_rate,
    single_peak_check,
    solve_equilibrium,
)
from .spatial import (
    MonteCarloConfig,
    SpatialScene,
    StoreSite,
    competitive_attraction,
    equivalent_density,
    potential_customers_closed_form,
    potential_customers_mc,
)
from .cashflow import (
    CashFlowParams,
    CurveMetrics,
    cash_flow,
    curve_metrics,
    parameter_sweep,
)
from .calibration import (
    DELTA_DEFAULT,
    CashFlowSeries,
    FitOptions,
    FitResult,
    FixedInputs,
    aggregate,
    fit,
    ingest,
    jacobian,
    model_curve,
    newey_west,
    simulate_series,
)

__version__ = "0.1.0"
