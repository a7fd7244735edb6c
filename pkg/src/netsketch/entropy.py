"""Covering numbers, entropy growth fits, and measurement-budget diagnostics.

The Kolmogorov entropy of a class at resolution ``eps`` is ``log2`` of its
minimal covering number.  Exact covering numbers are out of reach for
function classes, so entropy values come from constructed nets (upper
bounds); the greedy and exhaustive covers here exist to sanity-check small
point clouds against each other and against those constructions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

__all__ = [
    "RATE_CONSTANT",
    "EntropyScan",
    "greedy_cover",
    "exhaustive_min_cover",
    "fit_growth",
    "measurement_lower_bound",
    "within_measurement_budget",
]

#: Budget constant of the measurement-count rate (20 / (1 - p)) * entropy.
RATE_CONSTANT = 20.0

#: Exact set-cover enumeration is exponential; cap the instance size.
EXHAUSTIVE_LIMIT = 15


def _as_point_matrix(points) -> np.ndarray:
    matrix = np.asarray(points, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise UsageError("points must be a nonempty sequence of equal-length vectors")
    return matrix


# ---------------------------------------------------------------------------
# Covers of point clouds
# ---------------------------------------------------------------------------


def _coverage_matrix(matrix: np.ndarray, eps: float) -> np.ndarray:
    gaps = np.linalg.norm(matrix[:, None, :] - matrix[None, :, :], axis=2)
    return gaps <= eps


def _greedy_cover_indices(matrix: np.ndarray, eps: float) -> list[int]:
    covered_by = _coverage_matrix(matrix, eps)
    uncovered = np.ones(matrix.shape[0], dtype=bool)
    chosen: list[int] = []
    while uncovered.any():
        gains = covered_by[:, uncovered].sum(axis=1)
        pick = int(np.argmax(gains))  # ties break to the lowest index
        chosen.append(pick)
        uncovered &= ~covered_by[pick]
    return chosen


def greedy_cover(points, eps: float) -> int:
    """Size of a greedy cover of ``points`` by ``eps``-balls at input points.

    Maximum-coverage greedy: repeatedly center a ball at the point covering
    the most still-uncovered points (ties to the lowest index) until all are
    covered.  Whenever one point's ball covers everything the result is 1,
    which keeps the count tight against the exact minimum on small clouds.
    Always upper-bounds the minimal covering number.
    """
    matrix = _as_point_matrix(points)
    if not eps > 0.0:
        raise UsageError(f"cover radius must be positive, got {eps!r}")
    return len(_greedy_cover_indices(matrix, eps))


def exhaustive_min_cover(points, eps: float) -> int:
    """Exact minimal number of ``eps``-balls centered at input points.

    Set cover by subset enumeration in increasing size, so the instance is
    capped at ``EXHAUSTIVE_LIMIT`` points.
    """
    matrix = _as_point_matrix(points)
    count = matrix.shape[0]
    if count > EXHAUSTIVE_LIMIT:
        raise UsageError(
            f"exact cover enumeration handles at most {EXHAUSTIVE_LIMIT} points,"
            f" got {count}"
        )
    if not eps > 0.0:
        raise UsageError(f"cover radius must be positive, got {eps!r}")
    covered = _coverage_matrix(matrix, eps)
    masks = [
        sum(1 << j for j in range(count) if covered[i, j]) for i in range(count)
    ]
    everything = (1 << count) - 1
    for size in range(1, count + 1):
        for combo in itertools.combinations(range(count), size):
            union = 0
            for i in combo:
                union |= masks[i]
            if union == everything:
                return size
    raise UsageError("unreachable: every point covers itself")  # pragma: no cover


# ---------------------------------------------------------------------------
# Growth-law fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyScan:
    """A resolution sweep with entropy values and a fitted growth law.

    ``entropy_values`` holds bits (log2 of net sizes).  The fit runs in the
    model's linearizing coordinates — ``log H`` against ``log(1/eps)`` for
    the power law, plain ``H`` against ``log(1/eps)`` (quadratic) for the
    log-square law — with natural logarithms throughout.  ``non_monotone``
    flags entropy that decreases as ``eps`` shrinks; the fit is still
    produced.
    """

    eps_values: np.ndarray
    entropy_values: np.ndarray
    model: str
    fit_params: dict[str, float]
    residuals: np.ndarray
    r_squared: float
    non_monotone: bool

    def __post_init__(self) -> None:
        for name in ("eps_values", "entropy_values", "residuals"):
            frozen = np.asarray(getattr(self, name), dtype=np.float64).copy()
            frozen.setflags(write=False)
            object.__setattr__(self, name, frozen)


def _r_squared(observed: np.ndarray, residuals: np.ndarray) -> float:
    total = float(np.sum((observed - observed.mean()) ** 2))
    leftover = float(np.sum(residuals**2))
    if total == 0.0:
        return 1.0 if leftover < 1e-30 else 0.0
    return 1.0 - leftover / total


def fit_growth(eps_values, entropy_values, model: str) -> EntropyScan:
    """Least-squares growth fit of entropy against resolution.

    ``model`` is ``"power"`` (``H = amplitude * (1/eps)**exponent``) or
    ``"logsquare"`` (``H = quadratic*log(1/eps)**2 + linear*log(1/eps)
    + constant``).
    """
    eps = np.asarray(eps_values, dtype=np.float64)
    entropy = np.asarray(entropy_values, dtype=np.float64)
    if eps.ndim != 1 or eps.size < 4:
        raise UsageError("growth fits need at least 4 resolution values")
    if entropy.shape != eps.shape:
        raise UsageError("entropy values must align with resolution values")
    if np.any(eps <= 0.0):
        raise UsageError("resolution values must be positive")
    if np.any(np.diff(eps) >= 0.0):
        raise UsageError("resolution values must be strictly decreasing")
    if eps[0] < 2.0 * eps[-1]:
        raise UsageError("resolution values must span at least one octave")

    non_monotone = bool(np.any(np.diff(entropy) < 0.0))
    x = -np.log(eps)
    if model == "power":
        if np.any(entropy <= 0.0):
            raise UsageError("power-law fits need positive entropy values")
        y = np.log(entropy)
        slope, intercept = np.polyfit(x, y, 1)
        residuals = y - (slope * x + intercept)
        params = {"exponent": float(slope), "amplitude": float(math.exp(intercept))}
        r2 = _r_squared(y, residuals)
    elif model == "logsquare":
        quadratic, linear, constant = np.polyfit(x, entropy, 2)
        residuals = entropy - np.polyval([quadratic, linear, constant], x)
        params = {
            "quadratic": float(quadratic),
            "linear": float(linear),
            "constant": float(constant),
        }
        r2 = _r_squared(entropy, residuals)
    else:
        raise UsageError(f"unknown growth model: {model!r}")

    return EntropyScan(
        eps_values=eps,
        entropy_values=entropy,
        model=model,
        fit_params=params,
        residuals=residuals,
        r_squared=r2,
        non_monotone=non_monotone,
    )


# ---------------------------------------------------------------------------
# Measurement-count diagnostics
# ---------------------------------------------------------------------------


def measurement_lower_bound(entropy_bits: float, delta: float) -> float:
    """Information floor on measurement counts: ``H / log2(1/delta)``.

    A measurement read to accuracy ``delta`` carries at most ``log2(1/delta)``
    bits, so recovering ``entropy_bits`` bits needs at least this many.
    """
    if entropy_bits < 0.0:
        raise UsageError(f"entropy must be nonnegative, got {entropy_bits!r}")
    if not 0.0 < delta < 1.0:
        raise UsageError(f"accuracy must lie in (0, 1), got {delta!r}")
    return entropy_bits / math.log2(1.0 / delta)


def within_measurement_budget(
    n_used: int, p: float, entropy_bits: float
) -> bool:
    """Check ``n_used`` against the rate ``(20/(1-p)) * H + 20/(1-p) + 1``.

    The slack terms absorb counting one extra center and the gap between
    ``ln`` and ``log2`` in the entropy argument.
    """
    if not 0.0 < p < 1.0:
        raise UsageError(f"probability must lie in (0, 1), got {p!r}")
    if n_used < 0:
        raise UsageError(f"measurement count must be nonnegative, got {n_used!r}")
    rate = RATE_CONSTANT / (1.0 - p)
    return n_used <= rate * entropy_bits + rate + 1.0
