"""Visibility-normalized social contagion toolkit.

Estimates time-response and susceptibility functions from exposure/response
event logs, fits social-enhancement factors by maximum likelihood, evaluates
multi-exposure response models, and validates everything against a built-in
synthetic-cascade simulator with known ground truth.
"""

from .errors import (
    BinMismatchError,
    BracketError,
    ContagionError,
    EmptyCohortError,
    EventLogError,
    FitConvergenceError,
    FitError,
)
from .events import (
    Event,
    ExposureSeries,
    FollowerGraph,
    IngestDiagnostics,
    build_graph,
    build_series,
    load_event_log,
    load_follow_edges,
    write_event_log,
    write_follow_edges,
)
from .forecast import ForecastPoint, calibration, forecast_points, forecast_window
from .inference import (
    CalibrationCurve,
    CalibrationPoint,
    VisibilityBin,
    collect_visibility_bins,
    fit_enhancement,
    fit_enhancement_by_cohort,
    fit_scale_and_floor,
    fit_scale_floor_and_tail,
    log_likelihood,
    pooled_visibility_bins,
    scale_fit_curve,
    visibility_bins,
    wmap_error,
)
from .models import (
    EnhancementTable,
    ModelParams,
    digg_probability,
    effective_enhancement,
    exposure_response_curve,
    response_probability,
    twitter_probability,
    visibility_all,
    visibility_distribution,
    visibility_exactly,
    visibility_first,
)
from .simulate import (
    GraphSpec,
    GroundTruth,
    RecoveryReport,
    Seeding,
    generate_graph,
    recovery_experiment,
    simulate_cascades,
    synthetic_trf,
    train_test_split,
)
from .visibility import (
    COHORTS,
    SusceptibilityCurve,
    SusceptibilityForm,
    TimeResponseFunction,
    TrfBundle,
    estimate_susceptibility,
    estimate_trf,
    fit_susceptibility_analytic,
    interpolate_trf,
)

__version__ = "0.1.0"

__all__ = [
    "BinMismatchError",
    "BracketError",
    "COHORTS",
    "CalibrationCurve",
    "CalibrationPoint",
    "ContagionError",
    "EmptyCohortError",
    "EnhancementTable",
    "Event",
    "EventLogError",
    "ExposureSeries",
    "FitConvergenceError",
    "FitError",
    "FollowerGraph",
    "ForecastPoint",
    "GraphSpec",
    "GroundTruth",
    "IngestDiagnostics",
    "ModelParams",
    "RecoveryReport",
    "Seeding",
    "SusceptibilityCurve",
    "SusceptibilityForm",
    "TimeResponseFunction",
    "TrfBundle",
    "VisibilityBin",
    "build_graph",
    "build_series",
    "calibration",
    "collect_visibility_bins",
    "digg_probability",
    "effective_enhancement",
    "estimate_susceptibility",
    "estimate_trf",
    "exposure_response_curve",
    "fit_enhancement",
    "fit_enhancement_by_cohort",
    "fit_scale_and_floor",
    "fit_scale_floor_and_tail",
    "fit_susceptibility_analytic",
    "forecast_points",
    "forecast_window",
    "generate_graph",
    "interpolate_trf",
    "load_event_log",
    "load_follow_edges",
    "log_likelihood",
    "pooled_visibility_bins",
    "recovery_experiment",
    "response_probability",
    "scale_fit_curve",
    "simulate_cascades",
    "synthetic_trf",
    "train_test_split",
    "twitter_probability",
    "visibility_all",
    "visibility_bins",
    "visibility_distribution",
    "visibility_exactly",
    "visibility_first",
    "wmap_error",
    "write_event_log",
    "write_follow_edges",
]
