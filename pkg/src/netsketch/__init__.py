"""Epsilon-nets, random subspace sketching, and nearest-center reconstruction.

The package is organized around one pipeline: describe a compact function
class, cover it with an epsilon-net in a trigonometric coefficient space,
project the net onto a random low-dimensional subspace, and reconstruct
noisy projected observations by nearest-center decoding.  Supporting
modules estimate covering entropy and coefficient tail decay.
"""

from __future__ import annotations

from .errors import (
    AmbientTooSmallError,
    FormatError,
    NetSketchError,
    NetTooLargeError,
    UsageError,
)
from .hilbert import (
    DEFAULT_AMBIENT_DIM,
    PiecewiseDescription,
    Signal,
    analyze_piecewise,
    exact_l2_distance,
    inner,
    project_prefix,
    synthesize,
    tail_norm,
)
from .function_classes import (
    AdditiveSpanClass,
    PiecewiseAnalyticClass,
    PiecewiseSmoothClass,
    SmoothClass,
    TailDecayModel,
    WarpedClass,
    count_tail_violations,
    fit_class_tail_model,
    fit_tail_model,
    tail_bound,
)
from .nets import DEFAULT_NET_BUDGET, CoveringNet, build_net, round_to_net
from .jl import (
    DEFAULT_JL_CONSTANT,
    MeasurementOperator,
    apply_operator,
    distortion_ok,
    random_subspace,
    required_measurements,
)
from .entropy import (
    EntropyScan,
    exhaustive_min_cover,
    fit_growth,
    greedy_cover,
    measurement_lower_bound,
    within_measurement_budget,
)
from .reconstructor import (
    GuaranteeReport,
    PreparedSampler,
    ReconstructionOutcome,
    measure,
    preprocess,
    reconstruct,
    truncation_dimension,
    verify_guarantee,
    with_new_operator,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    load_experiment_config,
    run_experiment,
    wilson_interval,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveSpanClass",
    "AmbientTooSmallError",
    "CoveringNet",
    "DEFAULT_AMBIENT_DIM",
    "DEFAULT_JL_CONSTANT",
    "DEFAULT_NET_BUDGET",
    "EntropyScan",
    "ExperimentConfig",
    "ExperimentResult",
    "FormatError",
    "GuaranteeReport",
    "MeasurementOperator",
    "NetSketchError",
    "NetTooLargeError",
    "PiecewiseAnalyticClass",
    "PiecewiseDescription",
    "PiecewiseSmoothClass",
    "PreparedSampler",
    "ReconstructionOutcome",
    "Signal",
    "SmoothClass",
    "TailDecayModel",
    "UsageError",
    "WarpedClass",
    "analyze_piecewise",
    "apply_operator",
    "build_net",
    "count_tail_violations",
    "distortion_ok",
    "exact_l2_distance",
    "exhaustive_min_cover",
    "fit_class_tail_model",
    "fit_growth",
    "fit_tail_model",
    "greedy_cover",
    "inner",
    "load_experiment_config",
    "measure",
    "measurement_lower_bound",
    "preprocess",
    "project_prefix",
    "random_subspace",
    "reconstruct",
    "required_measurements",
    "round_to_net",
    "run_experiment",
    "synthesize",
    "tail_bound",
    "tail_norm",
    "truncation_dimension",
    "verify_guarantee",
    "wilson_interval",
    "within_measurement_budget",
    "with_new_operator",
]
