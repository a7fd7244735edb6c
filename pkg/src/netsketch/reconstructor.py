"""Reconstruction pipeline: truncate, sketch, and decode against a covering net.

``preprocess`` combines a function class with a fitted tail-decay model and
produces a ``PreparedSampler``: a truncation dimension ``d`` that absorbs the
coefficient tails, a covering net at resolution ``eps1 = eps / 6``, and a
random ``n``-dimensional measurement operator sized for the net by the
Johnson-Lindenstrauss requirement.  ``measure`` sketches a signal through the
operator (optionally with bounded noise), ``reconstruct`` decodes the sketch
to the nearest projected net center, and ``verify_guarantee`` splits the
ambient reconstruction error into the three budgeted terms whose sum is the
``eps`` accuracy guarantee.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .errors import AmbientTooSmallError, NetTooLargeError, UsageError
from .function_classes import TailDecayModel
from .hilbert import DEFAULT_AMBIENT_DIM, Signal, tail_norm
from .jl import (
    DEFAULT_JL_CONSTANT,
    MeasurementOperator,
    apply_operator,
    random_subspace,
    required_measurements,
)
from .nets import DEFAULT_NET_BUDGET, CoveringNet, build_net

__all__ = [
    "GuaranteeReport",
    "PreparedSampler",
    "ReconstructionOutcome",
    "measure",
    "preprocess",
    "reconstruct",
    "truncation_dimension",
    "verify_guarantee",
    "with_new_operator",
]

logger = logging.getLogger(__name__)

# Operator seeds are drawn from the caller's stream but stored as plain ints,
# so an operator can be redrawn or serialized without the stream itself.
_SEED_RANGE = 2**63 - 1


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------


def truncation_dimension(tail_model: TailDecayModel, eps1: float) -> int:
    """Smallest ``d`` with ``C * R * d**-beta <= eps1`` under the fitted model.

    Degenerate models — a non-finite or non-positive decay exponent — cannot
    justify any finite truncation dimension and are rejected.
    """
    if not eps1 > 0.0:
        raise UsageError(f"resolution must be positive, got {eps1!r}")
    beta = tail_model.decay_exponent
    if not math.isfinite(beta) or beta <= 0.0:
        raise UsageError(
            f"tail model with decay exponent {beta!r} cannot justify a finite"
            " truncation dimension"
        )
    mass = tail_model.constant * tail_model.norm_bound
    if mass < 0.0:
        raise UsageError(f"tail model has negative mass bound {mass!r}")
    if mass <= eps1:
        return 1
    return max(1, math.ceil((mass / eps1) ** (1.0 / beta)))


@dataclass(frozen=True)
class PreparedSampler:
    """Everything fixed before measuring: dimensions, net, and operator.

    ``projected_net`` holds the measured net centers as rows for materialized
    nets and is ``None`` when decoding goes through the net's factored
    decoder.  ``clamped`` records that the Johnson-Lindenstrauss requirement
    met or exceeded ``d``, so the operator is a full orthogonal map and the
    sketch is exact on the truncated space.
    """

    eps: float
    eps1: float
    p: float
    tail_model: TailDecayModel
    d: int
    operator: MeasurementOperator
    net: CoveringNet
    projected_net: np.ndarray | None
    clamped: bool
    ambient_dim: int

    def __post_init__(self) -> None:
        if self.projected_net is not None:
            rows = np.ascontiguousarray(self.projected_net, dtype=np.float64)
            rows.flags.writeable = False
            object.__setattr__(self, "projected_net", rows)

    @property
    def n(self) -> int:
        return self.operator.n


def _project_members(
    net: CoveringNet, operator: MeasurementOperator, ambient_dim: int
) -> np.ndarray | None:
    """Measure every materialized center; ``None`` for factored nets."""
    if net.mode != "materialized":
        return None
    rows = np.empty((net.size, operator.n))
    for j, member in enumerate(net.members):
        rows[j] = apply_operator(operator, net.family.to_signal(member, ambient_dim))
    return rows


def preprocess(
    family: Any,
    eps: float,
    p: float,
    tail_model: TailDecayModel,
    rng: np.random.Generator,
    *,
    ambient_dim: int = DEFAULT_AMBIENT_DIM,
    jl_constant: float = DEFAULT_JL_CONSTANT,
    m_max: float = DEFAULT_NET_BUDGET,
) -> PreparedSampler:
    """Prepare the decoding side: truncation dimension, net, and operator.

    The accuracy target ``eps`` is split into three budgeted terms, leaving
    ``eps1 = eps / 6`` for the net resolution and for the truncation tails.
    The operator gets ``required_measurements(p, M + 1)`` rows for a net of
    ``M`` centers, clamped at ``d`` — a full orthogonal operator is already
    exact on the truncated space, so further rows cannot help.
    """
    if not (math.isfinite(eps) and eps > 0.0):
        raise UsageError(f"accuracy target must be positive, got {eps!r}")
    if not 0.0 < p < 1.0:
        raise UsageError(f"success probability must lie in (0, 1), got {p!r}")
    if ambient_dim < 1:
        raise UsageError(f"ambient dimension must be positive, got {ambient_dim!r}")
    eps1 = eps / 6.0
    d = truncation_dimension(tail_model, eps1)
    if d > ambient_dim:
        raise AmbientTooSmallError(
            f"tail model needs truncation dimension {d}, beyond the ambient"
            f" dimension {ambient_dim}"
        )
    net = build_net(family, eps1, mode="auto", m_max=m_max)
    if net.mode == "counted":
        raise NetTooLargeError(
            f"net with {net.size} centers cannot be decoded: materialization"
            f" is capped at {m_max} and no factored decoder applies"
        )
    wanted = required_measurements(p, net.size + 1, jl_constant)
    n = min(wanted, d)
    operator = random_subspace(d, n, seed=int(rng.integers(_SEED_RANGE)))
    logger.info(
        "prepared sampler: eps=%g d=%d n=%d (wanted %d) M=%d mode=%s",
        eps,
        d,
        n,
        wanted,
        net.size,
        net.mode,
    )
    return PreparedSampler(
        eps=eps,
        eps1=eps1,
        p=p,
        tail_model=tail_model,
        d=d,
        operator=operator,
        net=net,
        projected_net=_project_members(net, operator, ambient_dim),
        clamped=wanted >= d,
        ambient_dim=ambient_dim,
    )


def with_new_operator(
    sampler: PreparedSampler, rng: np.random.Generator
) -> PreparedSampler:
    """Redraw the measurement operator, keeping dimensions and net fixed."""
    operator = random_subspace(
        sampler.d, sampler.operator.n, seed=int(rng.integers(_SEED_RANGE))
    )
    return replace(
        sampler,
        operator=operator,
        projected_net=_project_members(sampler.net, operator, sampler.ambient_dim),
    )


# ---------------------------------------------------------------------------
# Measurement and decoding
# ---------------------------------------------------------------------------


def measure(
    sampler: PreparedSampler,
    x: Signal,
    delta: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Sketch ``x`` through the sampler's operator, optionally with noise.

    Noise is uniform per coordinate over ``[-delta * scale, delta * scale]``,
    where ``scale`` is the operator's rescaling factor, so ``delta`` is
    calibrated in unscaled projection coordinates.
    """
    if delta < 0.0:
        raise UsageError(f"noise level must be non-negative, got {delta!r}")
    y = apply_operator(sampler.operator, x)
    if delta > 0.0:
        if rng is None:
            raise UsageError("noisy measurement needs a random stream")
        bound = delta * sampler.operator.scale
        y = y + rng.uniform(-bound, bound, size=y.shape)
    return y


@dataclass(frozen=True)
class ReconstructionOutcome:
    """Decoded center plus the error accounting for one reconstruction.

    ``ambient_error`` and ``guarantee_met`` are ``None`` unless the ground
    truth was supplied to ``reconstruct``.
    """

    index: int
    center: Any
    projected_distance: float
    within_ball: bool
    ambient_error: float | None = None
    guarantee_met: bool | None = None


def _padded_distance(a: Signal, b: Signal) -> float:
    """Distance between signals, padding the shorter one with zeros."""
    dim = max(a.ambient_dim, b.ambient_dim)
    diff = np.zeros(dim)
    diff[: a.ambient_dim] = a.coefficients
    diff[: b.ambient_dim] -= b.coefficients
    return float(np.linalg.norm(diff))


def reconstruct(
    sampler: PreparedSampler,
    y: np.ndarray,
    delta: float = 0.0,
    ground_truth: Signal | None = None,
) -> ReconstructionOutcome:
    """Decode measurements to the nearest projected net center.

    Ties break toward the lowest center index.  ``within_ball`` compares the
    decoded distance against ``2 * eps1`` plus the worst-case noise shift
    ``sqrt(n) * delta * scale``.  Supplying the ground truth additionally
    reports the ambient error and whether it meets the ``eps`` guarantee.
    """
    if delta < 0.0:
        raise UsageError(f"noise level must be non-negative, got {delta!r}")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (sampler.operator.n,):
        raise UsageError(
            f"expected {sampler.operator.n} measurements, got shape {y.shape}"
        )
    if sampler.projected_net is not None:
        distances = np.linalg.norm(sampler.projected_net - y, axis=1)
        index = int(np.argmin(distances))
        projected_distance = float(distances[index])
        center = sampler.net.members[index]
    else:
        decoded = sampler.net.decoder.decode_measurements(y, sampler.operator)
        index = decoded.index
        projected_distance = decoded.distance
        center = decoded.member
    noise_shift = math.sqrt(sampler.operator.n) * delta * sampler.operator.scale
    ambient_error = None
    guarantee_met = None
    if ground_truth is not None:
        center_signal = sampler.net.family.to_signal(center, sampler.ambient_dim)
        ambient_error = _padded_distance(ground_truth, center_signal)
        guarantee_met = ambient_error <= sampler.eps
    return ReconstructionOutcome(
        index=index,
        center=center,
        projected_distance=projected_distance,
        within_ball=projected_distance <= 2.0 * sampler.eps1 + noise_shift,
        ambient_error=ambient_error,
        guarantee_met=guarantee_met,
    )


# ---------------------------------------------------------------------------
# Guarantee audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GuaranteeReport:
    """Three-term decomposition of the ambient reconstruction error.

    The triangle inequality bounds the ambient error by ``truncation_tail``
    (signal energy beyond dimension ``d``) plus ``projected_offset`` (distance
    to the decoded center inside the truncated space) plus ``center_tail``
    (center energy beyond ``d``).  The budgets are ``eps1``, ``4 * eps1`` and
    ``eps1``; all three within budget implies the ``6 * eps1 = eps``
    guarantee.
    """

    truncation_tail: float
    projected_offset: float
    center_tail: float
    budgets: tuple[float, float, float]
    within_budget: tuple[bool, bool, bool]
    ambient_error: float
    guarantee_met: bool


def verify_guarantee(
    sampler: PreparedSampler, x: Signal, outcome: ReconstructionOutcome
) -> GuaranteeReport:
    """Audit one reconstruction against the three-term error budget."""
    if x.ambient_dim < sampler.d:
        padded = np.zeros(sampler.d)
        padded[: x.ambient_dim] = x.coefficients
        x = Signal(padded)
    center_signal = sampler.net.family.to_signal(outcome.center, sampler.ambient_dim)
    truncation_tail = tail_norm(x, sampler.d)
    center_tail = tail_norm(center_signal, sampler.d)
    projected_offset = float(
        np.linalg.norm(
            x.coefficients[: sampler.d] - center_signal.coefficients[: sampler.d]
        )
    )
    budgets = (sampler.eps1, 4.0 * sampler.eps1, sampler.eps1)
    terms = (truncation_tail, projected_offset, center_tail)
    ambient_error = _padded_distance(x, center_signal)
    return GuaranteeReport(
        truncation_tail=truncation_tail,
        projected_offset=projected_offset,
        center_tail=center_tail,
        budgets=budgets,
        within_budget=tuple(t <= b for t, b in zip(terms, budgets)),
        ambient_error=ambient_error,
        guarantee_met=ambient_error <= sampler.eps,
    )
