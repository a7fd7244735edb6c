"""Seeded Monte Carlo reconstruction experiments with CSV/JSON reporting.

A flat ``key = value`` config describes one experiment: a function class, an
accuracy target, a trial count, and the trial framing — ``fixed_x`` redraws
the measurement operator around one signal, ``fixed_w`` redraws the signal
under one operator.  ``run_experiment`` executes the trials on per-trial
random streams derived from the master seed, so results are reproducible
bit-for-bit and independent of the worker count.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np

from .errors import NetSketchError, UsageError
from .entropy import measurement_lower_bound, within_measurement_budget
from .function_classes import (
    PiecewiseAnalyticClass,
    PiecewiseSmoothClass,
    SmoothClass,
    fit_class_tail_model,
)
from .hilbert import DEFAULT_AMBIENT_DIM, Signal, tail_norm
from .jl import DEFAULT_JL_CONSTANT, apply_operator
from .nets import DEFAULT_NET_BUDGET, build_net
from .reconstructor import (
    PreparedSampler,
    measure,
    preprocess,
    reconstruct,
    with_new_operator,
)

__all__ = [
    "CSV_COLUMNS",
    "ExperimentConfig",
    "ExperimentResult",
    "build_family",
    "load_experiment_config",
    "parse_flat_config",
    "run_experiment",
    "wilson_interval",
    "write_summary_json",
    "write_trials_csv",
]

logger = logging.getLogger(__name__)

# Two-sided 95% normal quantile used for the binomial score interval.
_WILSON_Z = 1.959963984540054

# Stream-domain tags: every random draw is made on
# default_rng([master_seed, domain, trial, lane]), so trials are independent
# of execution order and worker count.
_DOMAIN_TAILFIT = 1
_DOMAIN_PREPROCESS = 2
_DOMAIN_TRIAL = 3
_DOMAIN_FIXED_MEMBER = 4

_LANE_MEMBER = 0
_LANE_OPERATOR = 1
_LANE_NOISE = 2

CSV_COLUMNS = (
    "seed",
    "class",
    "eps",
    "p",
    "d",
    "n",
    "M",
    "clamped",
    "delta",
    "projected_distance",
    "within_ball",
    "ambient_error",
    "guarantee_met",
    "distortion_ok",
)


def _stream(master_seed: int, domain: int, trial: int = 0, lane: int = 0):
    return np.random.default_rng([master_seed, domain, trial, lane])


# ---------------------------------------------------------------------------
# Flat key=value configuration
# ---------------------------------------------------------------------------


def parse_flat_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blanks skipped."""
    values: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno} is not 'key = value': {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise UsageError(f"config line {lineno} has an empty key")
        if key in values:
            raise UsageError(f"config line {lineno} repeats key {key!r}")
        values[key] = value
    return values


def _as_int(key: str) -> Callable[[str], int]:
    def parse(value: str) -> int:
        try:
            return int(value)
        except ValueError:
            raise UsageError(f"config key {key!r} needs an integer, got {value!r}")

    return parse


def _as_float(key: str) -> Callable[[str], float]:
    def parse(value: str) -> float:
        try:
            return float(value)
        except ValueError:
            raise UsageError(f"config key {key!r} needs a number, got {value!r}")

    return parse


def _as_choice(key: str, choices: tuple[str, ...]) -> Callable[[str], str]:
    def parse(value: str) -> str:
        if value not in choices:
            raise UsageError(
                f"config key {key!r} must be one of {', '.join(choices)}, got {value!r}"
            )
        return value

    return parse


def _as_delta(value: str) -> float | None:
    if value == "auto":
        return None
    try:
        delta = float(value)
    except ValueError:
        raise UsageError(f"config key 'delta' needs a number or 'auto', got {value!r}")
    if delta < 0.0:
        raise UsageError(f"config key 'delta' must be non-negative, got {value!r}")
    return delta


def _as_budget(value: str) -> float:
    if value == "inf":
        return math.inf
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"config key 'm_max' needs an integer or 'inf', got {value!r}")


def _as_dims(value: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(part.strip()) for part in value.split(",") if part.strip())
    except ValueError:
        raise UsageError(f"config key 'tail_dims' needs integers, got {value!r}")
    if not dims:
        raise UsageError("config key 'tail_dims' must list at least one dimension")
    return dims


# Class schemas: the keys each family accepts, all required.
_CLASS_SCHEMAS: dict[str, dict[str, Callable[[str], Any]]] = {
    "smooth": {
        "smoothness": _as_int("smoothness"),
        "amplitude": _as_float("amplitude"),
    },
    "piecewise": {
        "degree": _as_int("degree"),
        "max_jumps": _as_int("max_jumps"),
        "deriv_bound": _as_float("deriv_bound"),
        "min_gap": _as_float("min_gap"),
        "level_bound": _as_float("level_bound"),
    },
    "analytic": {
        "max_jumps": _as_int("max_jumps"),
        "strip_width": _as_float("strip_width"),
        "amplitude": _as_float("amplitude"),
    },
}

_CLASS_BUILDERS: dict[str, Callable[..., Any]] = {
    "smooth": lambda smoothness, amplitude: SmoothClass(smoothness, amplitude),
    "piecewise": lambda **kw: PiecewiseSmoothClass(**kw),
    "analytic": lambda **kw: PiecewiseAnalyticClass(**kw),
}


def build_family(raw: Mapping[str, str]) -> Any:
    """Construct the function class named by ``class`` from flat keys."""
    if "class" not in raw:
        raise UsageError("config is missing the 'class' key")
    name = raw["class"]
    if name not in _CLASS_SCHEMAS:
        raise UsageError(
            f"unknown class {name!r}; expected one of {', '.join(sorted(_CLASS_SCHEMAS))}"
        )
    schema = _CLASS_SCHEMAS[name]
    missing = sorted(key for key in schema if key not in raw)
    if missing:
        raise UsageError(f"class {name!r} needs config keys: {', '.join(missing)}")
    kwargs = {key: schema[key](raw[key]) for key in schema}
    return _CLASS_BUILDERS[name](**kwargs)


# Experiment keys beyond the class block.  `value: None` marks required keys.
_EXPERIMENT_SCHEMA: dict[str, Callable[[str], Any]] = {
    "eps": _as_float("eps"),
    "p": _as_float("p"),
    "trials": _as_int("trials"),
    "mode": _as_choice("mode", ("fixed_x", "fixed_w")),
    "seed": _as_int("seed"),
    "delta": _as_delta,
    "jl_constant": _as_float("jl_constant"),
    "ambient_dim": _as_int("ambient_dim"),
    "m_max": _as_budget,
    "tail_samples": _as_int("tail_samples"),
    "tail_dims": _as_dims,
    "csv_out": str,
    "json_out": str,
}
_EXPERIMENT_REQUIRED = ("eps", "p", "trials", "mode")


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment description."""

    family: Any
    class_name: str
    eps: float
    p: float
    trials: int
    seed: int
    mode: str
    delta: float | None = 0.0  # None means "auto": eps / (4 sqrt(d))
    jl_constant: float = DEFAULT_JL_CONSTANT
    ambient_dim: int = DEFAULT_AMBIENT_DIM
    m_max: float = DEFAULT_NET_BUDGET
    tail_samples: int = 40
    tail_dims: tuple[int, ...] = (64, 128, 256, 512, 1024)
    csv_out: str | None = None
    json_out: str | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise UsageError(f"trials must be >= 1, got {self.trials!r}")
        if not (math.isfinite(self.eps) and self.eps > 0.0):
            raise UsageError(f"eps must be positive, got {self.eps!r}")
        if not 0.0 < self.p < 1.0:
            raise UsageError(f"p must lie in (0, 1), got {self.p!r}")
        if self.seed < 0:
            raise UsageError(f"seed must be non-negative, got {self.seed!r}")
        if self.tail_samples < 2:
            raise UsageError(f"tail_samples must be >= 2, got {self.tail_samples!r}")


def load_experiment_config(
    text: str, *, seed_override: int | None = None
) -> ExperimentConfig:
    """Parse and validate an experiment config; unknown keys are errors."""
    raw = parse_flat_config(text)
    family = build_family(raw)
    class_name = raw["class"]
    allowed = {"class", *_CLASS_SCHEMAS[class_name], *_EXPERIMENT_SCHEMA}
    unknown = sorted(key for key in raw if key not in allowed)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    missing = sorted(key for key in _EXPERIMENT_REQUIRED if key not in raw)
    if missing:
        raise UsageError(f"config is missing required keys: {', '.join(missing)}")
    if seed_override is None and "seed" not in raw:
        raise UsageError("config needs a 'seed' key (or pass --seed)")
    values: dict[str, Any] = {
        key: _EXPERIMENT_SCHEMA[key](raw[key])
        for key in _EXPERIMENT_SCHEMA
        if key in raw
    }
    if seed_override is not None:
        values["seed"] = seed_override
    return ExperimentConfig(family=family, class_name=class_name, **values)


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentResult:
    """Summary statistics plus one CSV-ready record per trial."""

    summary: dict[str, Any]
    rows: list[dict[str, Any]]


@dataclass(frozen=True)
class _TrialStats:
    success: bool
    within_ball: bool
    distortion_ok: bool
    premise: bool
    ambient_error: float


def _distortion_ratio(
    operator, difference: np.ndarray
) -> float:
    """Projected-over-true distance ratio for one coefficient difference."""
    true = float(np.linalg.norm(difference))
    if true == 0.0:
        return 1.0
    return float(np.linalg.norm(apply_operator(operator, difference))) / true


def _nearest_in_coefficients(
    sampler: PreparedSampler,
    member_matrix: np.ndarray | None,
    x_truncated: np.ndarray,
) -> np.ndarray:
    """Truncated coefficients of the net center nearest to ``x_truncated``."""
    if member_matrix is not None:
        index = int(
            np.argmin(np.linalg.norm(member_matrix - x_truncated, axis=1))
        )
        return member_matrix[index]
    decoded = sampler.net.decoder.decode_coefficients(x_truncated)
    member_signal = sampler.net.family.to_signal(decoded.member, sampler.d)
    return member_signal.coefficients


def _run_trial(
    config: ExperimentConfig,
    sampler: PreparedSampler,
    member_matrix: np.ndarray | None,
    fixed_signal: Signal | None,
    delta: float,
    trial: int,
) -> tuple[dict[str, Any], _TrialStats]:
    family = config.family
    if config.mode == "fixed_x":
        trial_sampler = with_new_operator(
            sampler, _stream(config.seed, _DOMAIN_TRIAL, trial, _LANE_OPERATOR)
        )
        x = fixed_signal
    else:
        trial_sampler = sampler
        member = family.sample(
            _stream(config.seed, _DOMAIN_TRIAL, trial, _LANE_MEMBER),
            config.ambient_dim,
        )
        x = family.to_signal(member, config.ambient_dim)
    noise_rng = (
        _stream(config.seed, _DOMAIN_TRIAL, trial, _LANE_NOISE) if delta > 0.0 else None
    )
    y = measure(trial_sampler, x, delta=delta, rng=noise_rng)
    outcome = reconstruct(trial_sampler, y, delta=delta, ground_truth=x)

    d = trial_sampler.d
    x_truncated = x.coefficients[:d]
    center_signal = family.to_signal(outcome.center, config.ambient_dim)
    nearest = _nearest_in_coefficients(trial_sampler, member_matrix, x_truncated)
    # The accuracy chain needs the upper band on the pair (x, nearest center)
    # and the lower band on the pair (x, decoded center).
    upper_ratio = _distortion_ratio(trial_sampler.operator, x_truncated - nearest)
    lower_ratio = _distortion_ratio(
        trial_sampler.operator, x_truncated - center_signal.coefficients[:d]
    )
    distortion_ok = upper_ratio <= 2.0 and lower_ratio >= 0.5
    if trial_sampler.clamped:
        # n = d makes the operator a full orthogonal map; any visible
        # distortion here is an internal error, not statistical bad luck.
        for ratio in (upper_ratio, lower_ratio):
            if abs(ratio - 1.0) > 1e-10:
                raise NetSketchError(
                    f"clamped operator distorted a pair by {ratio!r} in trial {trial}"
                )

    tails_ok = (
        tail_norm(x, d) <= sampler.eps1
        and tail_norm(center_signal, d) <= sampler.eps1
    )
    exact = delta == 0.0
    premise = distortion_ok and exact and tails_ok
    if premise and not outcome.guarantee_met:
        raise NetSketchError(
            f"trial {trial}: reconstruction guarantee failed although distortion,"
            " exactness, and tail bounds were all verified"
        )

    row = {
        "seed": config.seed,
        "class": family.spec_string(),
        "eps": config.eps,
        "p": config.p,
        "d": trial_sampler.d,
        "n": trial_sampler.n,
        "M": trial_sampler.net.size,
        "clamped": trial_sampler.clamped,
        "delta": delta,
        "projected_distance": outcome.projected_distance,
        "within_ball": outcome.within_ball,
        "ambient_error": outcome.ambient_error,
        "guarantee_met": outcome.guarantee_met,
        "distortion_ok": distortion_ok,
    }
    stats = _TrialStats(
        success=bool(outcome.guarantee_met),
        within_ball=outcome.within_ball,
        distortion_ok=distortion_ok,
        premise=premise,
        ambient_error=float(outcome.ambient_error),
    )
    return row, stats


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials!r}")
    if not 0 <= successes <= trials:
        raise UsageError(f"successes {successes!r} outside [0, {trials}]")
    z_sq = _WILSON_Z**2
    phat = successes / trials
    denominator = 1.0 + z_sq / trials
    center = (phat + z_sq / (2.0 * trials)) / denominator
    half = (
        _WILSON_Z
        * math.sqrt(phat * (1.0 - phat) / trials + z_sq / (4.0 * trials * trials))
        / denominator
    )
    # the score interval contains the point estimate; keep that under rounding
    return (max(0.0, min(phat, center - half)), min(1.0, max(phat, center + half)))


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run all trials and aggregate; reproducible from the master seed.

    Wall time is reported on the logging channel only, keeping the summary
    (and hence the JSON output) identical across repeated runs.
    """
    if jobs < 1:
        raise UsageError(f"jobs must be >= 1, got {jobs!r}")
    started = time.monotonic()
    family = config.family
    tail_model = fit_class_tail_model(
        family,
        config.tail_samples,
        config.tail_dims,
        _stream(config.seed, _DOMAIN_TAILFIT),
        config.ambient_dim,
    )
    sampler = preprocess(
        family,
        config.eps,
        config.p,
        tail_model,
        _stream(config.seed, _DOMAIN_PREPROCESS),
        ambient_dim=config.ambient_dim,
        jl_constant=config.jl_constant,
        m_max=config.m_max,
    )
    delta = (
        config.eps / (4.0 * math.sqrt(sampler.d))
        if config.delta is None
        else config.delta
    )
    member_matrix = None
    if sampler.net.mode == "materialized":
        member_matrix = np.vstack(
            [
                family.to_signal(member, config.ambient_dim).coefficients[: sampler.d]
                for member in sampler.net.members
            ]
        )
    fixed_signal = None
    if config.mode == "fixed_x":
        member = family.sample(
            _stream(config.seed, _DOMAIN_FIXED_MEMBER), config.ambient_dim
        )
        fixed_signal = family.to_signal(member, config.ambient_dim)

    def worker(trial: int) -> tuple[dict[str, Any], _TrialStats]:
        return _run_trial(config, sampler, member_matrix, fixed_signal, delta, trial)

    if jobs == 1:
        results = [worker(trial) for trial in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, range(config.trials)))
    rows = [row for row, _ in results]
    stats = [trial_stats for _, trial_stats in results]

    successes = sum(1 for s in stats if s.success)
    errors = [s.ambient_error for s in stats]
    interval = wilson_interval(successes, config.trials)
    entropy_bits = sampler.net.entropy_bits
    # The information-theoretic measurement bound is stated at the target
    # accuracy eps, not at the finer net resolution eps/6, so count a second
    # net at eps for it.  The formula needs 0 < delta < 1 to carry meaning.
    entropy_bits_at_eps = build_net(config.family, config.eps, mode="counted").entropy_bits
    lower_bound = (
        measurement_lower_bound(entropy_bits_at_eps, delta)
        if 0.0 < delta < 1.0
        else 0.0
    )
    summary: dict[str, Any] = {
        "class": family.spec_string(),
        "mode": config.mode,
        "eps": config.eps,
        "p": config.p,
        "delta": delta,
        "delta_policy": "auto" if config.delta is None else "fixed",
        "trials": config.trials,
        "seed": config.seed,
        "jl_constant": config.jl_constant,
        "ambient_dim": config.ambient_dim,
        "d": sampler.d,
        "n": sampler.n,
        "net_size": sampler.net.size,
        "net_mode": sampler.net.mode,
        "entropy_bits": entropy_bits,
        "entropy_bits_at_eps": entropy_bits_at_eps,
        "clamped": sampler.clamped,
        "tail_model": {
            "constant": tail_model.constant,
            "decay_exponent": tail_model.decay_exponent,
            "norm_bound": tail_model.norm_bound,
        },
        "success_count": successes,
        "success_rate": successes / config.trials,
        "success_ci": [interval[0], interval[1]],
        "mean_ambient_error": float(np.mean(errors)),
        "max_ambient_error": float(np.max(errors)),
        "within_ball_failures": sum(1 for s in stats if not s.within_ball),
        "distortion_failures": sum(1 for s in stats if not s.distortion_ok),
        "theorem_bound_check": within_measurement_budget(
            sampler.n, config.p, entropy_bits
        ),
        "measurement_lower_bound": lower_bound,
        "n_meets_lower_bound": sampler.n >= lower_bound,
        "implication_premise_trials": sum(1 for s in stats if s.premise),
        "implication_counterexamples": 0,
    }
    logger.info(
        "experiment done: class=%s mode=%s success=%d/%d elapsed=%.2fs",
        summary["class"],
        config.mode,
        successes,
        config.trials,
        time.monotonic() - started,
    )
    return ExperimentResult(summary=summary, rows=rows)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _csv_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_trials_csv(path: str, rows: list[dict[str, Any]]) -> None:
    """Write trial records with a fixed column order, one row per trial."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(row[column]) for column in CSV_COLUMNS])


def write_summary_json(path: str, summary: dict[str, Any]) -> None:
    """Write the summary with sorted keys so reruns are byte-identical."""
    with open(path, "w") as handle:
        json.dump(summary, handle, sort_keys=True, indent=2)
        handle.write("\n")
