"""Random subspace measurement operators.

A measurement operator carries an orthonormal family of ``n`` rows living in a
``d``-dimensional coefficient space.  Applying it to a vector truncates to the
first ``d`` coefficients, projects onto the row span, and rescales by
``sqrt(d / n)`` so that squared norms are preserved in expectation over a
uniformly random subspace.  The measurement count needed for a target success
probability over a finite point set follows the usual Johnson-Lindenstrauss
accounting: ``n = ceil(c / (1 - p) * ln m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Callable

import numpy as np
from scipy.spatial.distance import pdist

from .errors import FormatError, NetSketchError, UsageError
from .hilbert import Signal, dump_signal, load_signal, parse_header

__all__ = [
    "MeasurementOperator",
    "DistortionReport",
    "required_measurements",
    "random_subspace",
    "apply_operator",
    "distortion_ok",
    "dump_operator",
    "load_operator",
    "write_operator",
    "read_operator",
]

DEFAULT_JL_CONSTANT = 20.0

_QR_RETRIES = 3
_RANK_TOLERANCE = 1e-12
_ORTHONORMALITY_TOLERANCE = 1e-8


def required_measurements(p: float, m: int, jl_constant: float = DEFAULT_JL_CONSTANT) -> int:
    """Measurements needed to preserve pairwise distances among ``m`` points.

    Returns ``ceil(jl_constant / (1 - p) * ln(m))``, clamped to at least one
    measurement, where ``p`` is the target success probability.
    """
    if not 0.0 < p < 1.0:
        raise UsageError(f"success probability must lie in (0, 1), got {p!r}")
    if m < 2:
        raise UsageError(f"need at least two points, got m={m!r}")
    if jl_constant <= 0.0:
        raise UsageError(f"jl_constant must be positive, got {jl_constant!r}")
    return max(1, math.ceil(jl_constant / (1.0 - p) * math.log(m)))


@dataclass(frozen=True)
class MeasurementOperator:
    """An ``n x d`` orthonormal frame with the seed that produced it."""

    frame: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        frame = np.asarray(self.frame, dtype=np.float64)
        if frame.ndim != 2:
            raise UsageError("operator frame must be a 2-d array")
        if frame.shape[0] > frame.shape[1]:
            raise UsageError(
                f"operator has more rows than columns: {frame.shape[0]} > {frame.shape[1]}"
            )
        frame = frame.copy()
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    @property
    def d(self) -> int:
        return self.frame.shape[1]

    @property
    def scale(self) -> float:
        """Rescaling factor ``sqrt(d / n)`` making the projection unbiased."""
        return math.sqrt(self.d / self.n)


def random_subspace(
    d: int,
    n: int,
    seed: int,
    _rng_factory: Callable[[int], object] = np.random.default_rng,
) -> MeasurementOperator:
    """Draw a uniformly random ``n``-dimensional subspace of ``R^d``.

    Orthonormalizes ``n`` independent Gaussian vectors by QR decomposition.
    Rank deficiency has probability zero but is still checked; after three
    fresh redraws a failure is treated as an internal error.
    """
    if n < 1 or d < 1:
        raise UsageError(f"dimensions must be positive, got d={d!r}, n={n!r}")
    if n > d:
        raise UsageError(f"subspace dimension n={n} exceeds ambient dimension d={d}")
    rng = _rng_factory(seed)
    for _ in range(1 + _QR_RETRIES):
        gaussian = rng.standard_normal((d, n))
        q, r = np.linalg.qr(gaussian, mode="reduced")
        diag = np.diag(r)
        if np.min(np.abs(diag)) <= _RANK_TOLERANCE:
            continue
        # Fix the QR sign ambiguity so the frame is canonical for the draw.
        signs = np.where(diag < 0.0, -1.0, 1.0)
        return MeasurementOperator(frame=(q * signs).T, seed=seed)
    raise NetSketchError(
        f"rank-deficient Gaussian draw persisted over {1 + _QR_RETRIES} attempts"
    )


def _coerce_coefficients(x: Signal | np.ndarray, d: int) -> np.ndarray:
    if isinstance(x, Signal):
        coefficients = x.coefficients
    else:
        coefficients = np.asarray(x, dtype=np.float64)
        if coefficients.ndim != 1:
            raise UsageError("expected a 1-d coefficient vector")
    if coefficients.shape[0] < d:
        raise UsageError(
            f"input has {coefficients.shape[0]} coefficients but the operator needs {d}"
        )
    return coefficients[:d]


def apply_operator(op: MeasurementOperator, x: Signal | np.ndarray) -> np.ndarray:
    """Measure ``x``: truncate to ``op.d`` coefficients, project, rescale."""
    return op.scale * (op.frame @ _coerce_coefficients(x, op.d))


@dataclass(frozen=True)
class DistortionReport:
    """Outcome of checking pairwise distance ratios against a fixed band."""

    ok: bool
    min_ratio: float | None
    max_ratio: float | None
    pairs_checked: int
    lower: float = field(default=0.5)
    upper: float = field(default=2.0)


def distortion_ok(
    op: MeasurementOperator,
    points: np.ndarray,
    lower: float = 0.5,
    upper: float = 2.0,
) -> DistortionReport:
    """Check that projected pairwise distances stay within ``[lower, upper]``.

    ``points`` is an ``(m, k)`` array of coefficient vectors with ``k >= op.d``;
    ratios compare distances after measurement to distances among the
    truncated originals.  Coincident pairs are skipped.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise UsageError("expected a 2-d array of points")
    if points.shape[1] < op.d:
        raise UsageError(
            f"points have {points.shape[1]} coefficients but the operator needs {op.d}"
        )
    truncated = points[:, : op.d]
    if points.shape[0] < 2:
        return DistortionReport(
            ok=True, min_ratio=None, max_ratio=None, pairs_checked=0,
            lower=lower, upper=upper,
        )
    original = pdist(truncated)
    projected = pdist(truncated @ (op.scale * op.frame).T)
    nonzero = original > 0.0
    if not np.any(nonzero):
        return DistortionReport(
            ok=True, min_ratio=None, max_ratio=None, pairs_checked=0,
            lower=lower, upper=upper,
        )
    ratios = projected[nonzero] / original[nonzero]
    min_ratio = float(np.min(ratios))
    max_ratio = float(np.max(ratios))
    return DistortionReport(
        ok=bool(lower <= min_ratio and max_ratio <= upper),
        min_ratio=min_ratio,
        max_ratio=max_ratio,
        pairs_checked=int(np.count_nonzero(nonzero)),
        lower=lower,
        upper=upper,
    )


def dump_operator(stream: IO[str], op: MeasurementOperator) -> None:
    """Write an operator as a header line plus one signal block per row."""
    stream.write(f"d={op.d} n={op.n} seed={op.seed}\n")
    for row in op.frame:
        dump_signal(stream, Signal(row))


def load_operator(stream: IO[str]) -> MeasurementOperator:
    """Parse an operator, validating shape and row orthonormality."""
    header = stream.readline()
    if not header:
        raise FormatError("empty operator input")
    fields = parse_header(header, ("d", "n", "seed"), context="operator header")
    try:
        d = int(fields["d"])
        n = int(fields["n"])
        seed = int(fields["seed"])
    except ValueError as exc:
        raise FormatError(f"non-integer value in operator header: {exc}") from exc
    if n < 1 or d < 1 or n > d:
        raise FormatError(f"inconsistent operator dimensions d={d}, n={n}")
    rows = []
    for index in range(n):
        try:
            row = load_signal(stream)
        except FormatError as exc:
            raise FormatError(f"operator row {index}: {exc}") from exc
        if row.ambient_dim != d:
            raise FormatError(
                f"operator row {index} has {row.ambient_dim} coefficients, expected {d}"
            )
        rows.append(row.coefficients)
    if stream.read().strip():
        raise FormatError("trailing data after operator rows")
    frame = np.vstack(rows)
    gram = frame @ frame.T
    residual = float(np.max(np.abs(gram - np.eye(n))))
    if residual > _ORTHONORMALITY_TOLERANCE:
        raise FormatError(
            f"operator rows are not orthonormal (residual {residual:.3e})"
        )
    return MeasurementOperator(frame=frame, seed=seed)


def write_operator(path, op: MeasurementOperator) -> None:
    with open(path, "w", encoding="utf-8") as stream:
        dump_operator(stream, op)


def read_operator(path) -> MeasurementOperator:
    with open(path, "r", encoding="utf-8") as stream:
        return load_operator(stream)
