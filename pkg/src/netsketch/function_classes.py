"""Generative function classes and tail-decay models.

Each class describes a family of square-integrable functions on ``[-pi, pi]``
through a structured member representation (coefficient vectors, piecewise
descriptions, warp or span parameters).  A class object knows how to sample a
member, turn a member into ambient coefficients, test membership, and compute
distances between members — exactly where a closed form exists, by adaptive
quadrature otherwise.

The tail-decay model summarizes how fast coefficient tails shrink with the
truncation dimension; it is fitted empirically from samples and used to pick
working dimensions downstream.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .errors import UsageError
from .hilbert import (
    MAX_PIECE_DEGREE,
    PiecewiseDescription,
    Signal,
    analyze_piecewise,
    dump_signal,
    exact_l2_distance,
    synthesize,
    tail_norm,
)

__all__ = [
    "SmoothClass",
    "PiecewiseSmoothClass",
    "PiecewiseAnalyticClass",
    "WarpedClass",
    "AdditiveSpanClass",
    "AnalyticStepMember",
    "WarpedMember",
    "AdditiveMember",
    "TailDecayModel",
    "fit_tail_model",
    "fit_class_tail_model",
    "tail_bound",
    "count_tail_violations",
    "warp_amplitudes",
    "warp_map",
]

_MAX_SAMPLE_ATTEMPTS = 1000
_MEMBERSHIP_TOLERANCE = 1e-9


def _fmt(value: float) -> str:
    """Compact, whitespace-free rendering of a numeric parameter."""
    if float(value) == int(value):
        return str(int(value))
    return format(float(value), "g")


def _frozen_array(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64)
    out.setflags(write=False)
    return out


def _coefficient_prefix(signal: Signal, dim: int) -> np.ndarray:
    """First ``dim`` coefficients, zero-padded — no energy guard."""
    out = np.zeros(dim)
    keep = min(dim, signal.ambient_dim)
    out[:keep] = signal.coefficients[:keep]
    return out


def _ball_uniform(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Uniform draw from the unit ball of ``R^dim``."""
    direction = rng.standard_normal(dim)
    norm = np.linalg.norm(direction)
    while norm == 0.0:  # pragma: no cover - probability zero
        direction = rng.standard_normal(dim)
        norm = np.linalg.norm(direction)
    radius = rng.uniform() ** (1.0 / dim)
    return direction * (radius / norm)


# ---------------------------------------------------------------------------
# Smooth (Sobolev ellipsoid) class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothClass:
    """Coefficient ellipsoid ``sum((i+1)^k c_i)^2 <= K^2``.

    ``smoothness`` is the decay order ``k`` and ``amplitude`` the ellipsoid
    radius ``K``.  Members are plain coefficient vectors; the envelope on the
    ``i``-th coefficient is ``K / (i+1)^k``.
    """

    smoothness: int
    amplitude: float

    def __post_init__(self) -> None:
        if self.smoothness < 1:
            raise UsageError(f"smoothness order must be >= 1, got {self.smoothness!r}")
        if not self.amplitude > 0.0:
            raise UsageError(f"amplitude must be positive, got {self.amplitude!r}")

    def spec_string(self) -> str:
        return f"smooth(k={self.smoothness},K={_fmt(self.amplitude)})"

    def coefficient_envelope(self, dim: int) -> np.ndarray:
        """Per-coordinate bounds ``K / (i+1)^k`` for ``i < dim``."""
        indices = np.arange(1, dim + 1, dtype=np.float64)
        return self.amplitude * indices ** (-float(self.smoothness))

    def sample(self, rng: np.random.Generator, ambient_dim: int) -> Signal:
        weights = _ball_uniform(rng, ambient_dim)
        return Signal(self.coefficient_envelope(ambient_dim) * weights)

    def to_signal(self, member: Signal, ambient_dim: int) -> Signal:
        if member.ambient_dim > ambient_dim:
            trailing = tail_norm(member, ambient_dim)
            if trailing > 0.0:
                raise UsageError(
                    f"member carries energy beyond ambient dimension {ambient_dim}"
                )
            return Signal(member.coefficients[:ambient_dim])
        padded = np.zeros(ambient_dim)
        padded[: member.ambient_dim] = member.coefficients
        return Signal(padded)

    def contains(self, member: Signal, tolerance: float = _MEMBERSHIP_TOLERANCE) -> bool:
        weights = np.arange(1, member.ambient_dim + 1, dtype=np.float64) ** float(
            self.smoothness
        )
        weighted = float(np.sum((weights * member.coefficients) ** 2))
        return weighted <= self.amplitude**2 * (1.0 + tolerance)

    def distance(self, a: Signal, b: Signal) -> float:
        dim = max(a.ambient_dim, b.ambient_dim)
        pa = np.zeros(dim)
        pa[: a.ambient_dim] = a.coefficients
        pb = np.zeros(dim)
        pb[: b.ambient_dim] = b.coefficients
        return float(np.linalg.norm(pa - pb))


# ---------------------------------------------------------------------------
# Piecewise smooth class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseSmoothClass:
    """Piecewise polynomials on ``[-pi, pi]`` with bounded data.

    Members have at most ``max_jumps`` interior breakpoints, consecutive
    breakpoints at least ``min_gap`` apart, piece degree at most ``degree``,
    midpoint values bounded by ``level_bound``, and the degree-``m`` local
    coefficient bounded by ``deriv_bound / m!``.
    """

    degree: int
    max_jumps: int
    deriv_bound: float
    min_gap: float
    level_bound: float

    def __post_init__(self) -> None:
        if not 0 <= self.degree <= MAX_PIECE_DEGREE:
            raise UsageError(
                f"piece degree must lie in [0, {MAX_PIECE_DEGREE}], got {self.degree!r}"
            )
        if self.max_jumps < 0:
            raise UsageError(f"max_jumps must be >= 0, got {self.max_jumps!r}")
        if not self.deriv_bound > 0.0:
            raise UsageError(f"deriv_bound must be positive, got {self.deriv_bound!r}")
        if not self.level_bound > 0.0:
            raise UsageError(f"level_bound must be positive, got {self.level_bound!r}")
        if not self.min_gap > 0.0:
            raise UsageError(f"min_gap must be positive, got {self.min_gap!r}")
        if (self.max_jumps - 1) * self.min_gap >= 2.0 * math.pi:
            raise UsageError(
                f"{self.max_jumps} breakpoints cannot keep gaps of {self.min_gap}"
            )

    def spec_string(self) -> str:
        return (
            f"piecewise_smooth(k={self.degree},s={self.max_jumps},"
            f"K2={_fmt(self.deriv_bound)},gap={_fmt(self.min_gap)},"
            f"A={_fmt(self.level_bound)})"
        )

    def coefficient_bounds(self) -> np.ndarray:
        """Per-degree bounds: ``A`` then ``K2 / m!`` for ``m = 1..degree``."""
        bounds = [self.level_bound]
        for m in range(1, self.degree + 1):
            bounds.append(self.deriv_bound / math.factorial(m))
        return np.array(bounds)

    def sample(self, rng: np.random.Generator, ambient_dim: int) -> PiecewiseDescription:
        del ambient_dim  # members are descriptions; the ambient enters later
        for _ in range(_MAX_SAMPLE_ATTEMPTS):
            breakpoints = np.sort(rng.uniform(-math.pi, math.pi, self.max_jumps))
            if breakpoints.size > 1 and np.min(np.diff(breakpoints)) < self.min_gap:
                continue
            bounds = self.coefficient_bounds()
            pieces = tuple(
                tuple(rng.uniform(-b, b) for b in bounds)
                for _ in range(self.max_jumps + 1)
            )
            return PiecewiseDescription(
                breakpoints=tuple(float(b) for b in breakpoints),
                piece_coefficients=pieces,
                periodic=False,
            )
        raise UsageError(
            f"could not draw {self.max_jumps} breakpoints with gaps >= {self.min_gap}"
        )

    def to_signal(self, member: PiecewiseDescription, ambient_dim: int) -> Signal:
        return analyze_piecewise(member, ambient_dim)

    def contains(
        self,
        member: PiecewiseDescription,
        tolerance: float = _MEMBERSHIP_TOLERANCE,
    ) -> bool:
        if member.periodic:
            return False
        if len(member.breakpoints) > self.max_jumps:
            return False
        gaps = np.diff(member.breakpoints)
        if gaps.size and float(np.min(gaps)) < self.min_gap * (1.0 - tolerance):
            return False
        bounds = self.coefficient_bounds() * (1.0 + tolerance)
        for coeffs in member.piece_coefficients:
            if len(coeffs) - 1 > self.degree:
                return False
            for value, bound in zip(coeffs, bounds):
                if abs(value) > bound:
                    return False
        return True

    def distance(self, a: PiecewiseDescription, b: PiecewiseDescription) -> float:
        return exact_l2_distance(a, b)


# ---------------------------------------------------------------------------
# Piecewise analytic class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticStepMember:
    """Analytic coefficients plus a piecewise-constant step component."""

    smooth: Signal
    steps: PiecewiseDescription

    def __post_init__(self) -> None:
        if not self.steps.periodic:
            raise UsageError("step component must use the periodic flavour")
        for coeffs in self.steps.piece_coefficients:
            if len(coeffs) != 1:
                raise UsageError("step component pieces must be constants")


@dataclass(frozen=True)
class PiecewiseAnalyticClass:
    """Analytic part with geometric coefficient decay plus bounded steps.

    The analytic part satisfies ``|c_i| <= K exp(-eta j)`` where ``j`` is the
    frequency of basis index ``i``; the step part has at most ``max_jumps``
    jumps on the circle with levels in ``[-K, K]``.
    """

    max_jumps: int
    strip_width: float
    amplitude: float

    def __post_init__(self) -> None:
        if self.max_jumps < 1:
            raise UsageError(f"max_jumps must be >= 1, got {self.max_jumps!r}")
        if not self.strip_width > 0.0:
            raise UsageError(f"strip_width must be positive, got {self.strip_width!r}")
        if not self.amplitude > 0.0:
            raise UsageError(f"amplitude must be positive, got {self.amplitude!r}")

    def spec_string(self) -> str:
        return (
            f"piecewise_analytic(jumps={self.max_jumps},"
            f"eta={_fmt(self.strip_width)},K={_fmt(self.amplitude)})"
        )

    def coefficient_envelope(self, dim: int) -> np.ndarray:
        """Geometric envelope ``K exp(-eta j)`` per basis index."""
        frequencies = (np.arange(dim) + 1) // 2
        return self.amplitude * np.exp(-self.strip_width * frequencies)

    def sample(self, rng: np.random.Generator, ambient_dim: int) -> AnalyticStepMember:
        envelope = self.coefficient_envelope(ambient_dim)
        smooth = Signal(envelope * rng.uniform(-1.0, 1.0, ambient_dim))
        for _ in range(_MAX_SAMPLE_ATTEMPTS):
            positions = np.sort(rng.uniform(-math.pi, math.pi, self.max_jumps))
            if positions.size > 1 and np.min(np.diff(positions)) == 0.0:
                continue  # pragma: no cover - probability zero
            levels = rng.uniform(-self.amplitude, self.amplitude, self.max_jumps)
            steps = PiecewiseDescription(
                breakpoints=tuple(float(p) for p in positions),
                piece_coefficients=tuple((float(v),) for v in levels),
                periodic=True,
            )
            return AnalyticStepMember(smooth=smooth, steps=steps)
        raise UsageError("could not draw distinct step positions")  # pragma: no cover

    def to_signal(self, member: AnalyticStepMember, ambient_dim: int) -> Signal:
        smooth = np.zeros(ambient_dim)
        keep = min(ambient_dim, member.smooth.ambient_dim)
        smooth[:keep] = member.smooth.coefficients[:keep]
        steps = analyze_piecewise(member.steps, ambient_dim)
        return Signal(smooth + steps.coefficients)

    def contains(
        self,
        member: AnalyticStepMember,
        tolerance: float = _MEMBERSHIP_TOLERANCE,
    ) -> bool:
        envelope = self.coefficient_envelope(member.smooth.ambient_dim)
        if np.any(np.abs(member.smooth.coefficients) > envelope * (1.0 + tolerance) + 1e-300):
            return False
        if len(member.steps.breakpoints) > self.max_jumps:
            return False
        level_cap = self.amplitude * (1.0 + tolerance)
        return all(
            abs(coeffs[0]) <= level_cap for coeffs in member.steps.piece_coefficients
        )

    def distance(self, a: AnalyticStepMember, b: AnalyticStepMember) -> float:
        dim = max(a.smooth.ambient_dim, b.smooth.ambient_dim)
        smooth_a = np.zeros(dim)
        smooth_a[: a.smooth.ambient_dim] = a.smooth.coefficients
        smooth_b = np.zeros(dim)
        smooth_b[: b.smooth.ambient_dim] = b.smooth.coefficients
        smooth_delta = smooth_a - smooth_b
        # || smooth_delta + step_delta ||^2 expands exactly: the smooth part
        # has finite support, so its inner product with the step difference
        # needs only the first ``dim`` step coefficients.
        steps_a = analyze_piecewise(a.steps, dim).coefficients
        steps_b = analyze_piecewise(b.steps, dim).coefficients
        cross = float(np.dot(smooth_delta, steps_a - steps_b))
        step_sq = exact_l2_distance(a.steps, b.steps) ** 2
        total = float(np.dot(smooth_delta, smooth_delta)) + 2.0 * cross + step_sq
        return math.sqrt(max(total, 0.0))


# ---------------------------------------------------------------------------
# Warped class
# ---------------------------------------------------------------------------


def warp_amplitudes(num_params: int) -> np.ndarray:
    """Geometric amplitudes ``0.15 / 2^i`` keeping every warp bi-Lipschitz."""
    return 0.15 / 2.0 ** np.arange(1, num_params + 1)


def warp_map(params: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Increasing reparameterization of ``[-pi, pi]`` fixing both endpoints."""
    params = np.asarray(params, dtype=np.float64)
    amplitudes = warp_amplitudes(params.size) * params

    def psi(x):
        x = np.asarray(x, dtype=np.float64)
        shift = np.zeros_like(x)
        for i, coeff in enumerate(amplitudes, start=1):
            shift = shift + coeff * np.sin(i * (x + math.pi))
        return x + shift

    return psi


@dataclass(frozen=True)
class WarpedMember:
    base_member: object
    warp_params: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "warp_params", _frozen_array(self.warp_params))


@dataclass(frozen=True)
class WarpedClass:
    """Members of a base class composed with smooth domain warps.

    The warp family is ``x + sum_i tau_i a_i sin(i (x + pi))`` with amplitudes
    ``a_i = 0.15 / 2^i`` and parameters ``tau`` in ``[0, 1]^num_warp_params``;
    every warp is increasing with derivative at least ``0.7`` and fixes the
    endpoints.  ``lipschitz_bound`` is the promised Lipschitz constant of base
    members away from their jumps.
    """

    base: object
    num_warp_params: int
    lipschitz_bound: float

    def __post_init__(self) -> None:
        if not isinstance(self.base, (SmoothClass, PiecewiseSmoothClass)):
            raise UsageError("warped base must be a smooth or piecewise smooth class")
        if not 1 <= self.num_warp_params <= 16:
            raise UsageError(
                f"num_warp_params must lie in [1, 16], got {self.num_warp_params!r}"
            )
        if not self.lipschitz_bound > 0.0:
            raise UsageError(
                f"lipschitz_bound must be positive, got {self.lipschitz_bound!r}"
            )

    def spec_string(self) -> str:
        return (
            f"warped(base={self.base.spec_string()},s={self.num_warp_params},"
            f"L={_fmt(self.lipschitz_bound)})"
        )

    def sample(self, rng: np.random.Generator, ambient_dim: int) -> WarpedMember:
        base_member = self.base.sample(rng, ambient_dim)
        params = rng.uniform(0.0, 1.0, self.num_warp_params)
        return WarpedMember(base_member=base_member, warp_params=params)

    def _kink_preimages(self, member: WarpedMember) -> tuple[float, ...]:
        kinks = member_kinks(self.base, member.base_member)
        if len(kinks) == 0:
            return ()
        psi = warp_map(member.warp_params)
        return tuple(
            float(brentq(lambda x, b=b: float(psi(np.float64(x))) - b, -math.pi, math.pi))
            for b in kinks
        )

    def evaluate(self, member: WarpedMember, t: np.ndarray) -> np.ndarray:
        base_eval = member_evaluator(self.base, member.base_member)
        psi = warp_map(member.warp_params)
        return base_eval(psi(t))

    def to_signal(
        self,
        member: WarpedMember,
        ambient_dim: int,
        points_per_piece: int = 2049,
    ) -> Signal:
        from .hilbert import quadrature_analyze

        return Signal(
            quadrature_analyze(
                lambda t: self.evaluate(member, t),
                ambient_dim,
                split_points=self._kink_preimages(member),
                points_per_piece=points_per_piece,
            )
        )

    def contains(
        self,
        member: WarpedMember,
        tolerance: float = _MEMBERSHIP_TOLERANCE,
    ) -> bool:
        if member.warp_params.size != self.num_warp_params:
            return False
        if np.any(member.warp_params < -tolerance) or np.any(
            member.warp_params > 1.0 + tolerance
        ):
            return False
        return self.base.contains(member.base_member, tolerance)

    def distance(
        self,
        a: WarpedMember,
        b: WarpedMember,
        points_per_piece: int = 4097,
    ) -> float:
        kinks = sorted(set(self._kink_preimages(a)) | set(self._kink_preimages(b)))
        return _numeric_l2_distance(
            lambda t: self.evaluate(a, t),
            lambda t: self.evaluate(b, t),
            kinks,
            points_per_piece,
        )


# ---------------------------------------------------------------------------
# Additive span class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdditiveMember:
    base_member: object
    weights: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _frozen_array(self.weights))


@dataclass(frozen=True)
class AdditiveSpanClass:
    """Base members shifted by a bounded span of fixed component signals."""

    base: object
    components: tuple[Signal, ...]
    coeff_bound: float

    def __post_init__(self) -> None:
        if not isinstance(self.base, (SmoothClass, PiecewiseSmoothClass)):
            raise UsageError("additive base must be a smooth or piecewise smooth class")
        components = tuple(self.components)
        if not components:
            raise UsageError("additive span needs at least one component")
        for component in components:
            if not isinstance(component, Signal):
                raise UsageError("components must be coefficient signals")
        if not self.coeff_bound > 0.0:
            raise UsageError(f"coeff_bound must be positive, got {self.coeff_bound!r}")
        object.__setattr__(self, "components", components)

    def spec_string(self) -> str:
        digest = hashlib.sha256()
        for component in self.components:
            buffer = io.StringIO()
            dump_signal(buffer, component)
            digest.update(buffer.getvalue().encode("utf-8"))
        return (
            f"additive(base={self.base.spec_string()},r={len(self.components)},"
            f"bound={_fmt(self.coeff_bound)},components={digest.hexdigest()[:12]})"
        )

    def component_matrix(self, ambient_dim: int) -> np.ndarray:
        out = np.zeros((len(self.components), ambient_dim))
        for row, component in enumerate(self.components):
            if component.ambient_dim > ambient_dim and tail_norm(component, ambient_dim) > 0.0:
                raise UsageError(
                    f"component {row} carries energy beyond ambient dimension {ambient_dim}"
                )
            keep = min(ambient_dim, component.ambient_dim)
            out[row, :keep] = component.coefficients[:keep]
        return out

    def sample(self, rng: np.random.Generator, ambient_dim: int) -> AdditiveMember:
        base_member = self.base.sample(rng, ambient_dim)
        weights = rng.uniform(-self.coeff_bound, self.coeff_bound, len(self.components))
        return AdditiveMember(base_member=base_member, weights=weights)

    def to_signal(self, member: AdditiveMember, ambient_dim: int) -> Signal:
        base = self.base.to_signal(member.base_member, ambient_dim)
        span = member.weights @ self.component_matrix(ambient_dim)
        return Signal(base.coefficients + span)

    def contains(
        self,
        member: AdditiveMember,
        tolerance: float = _MEMBERSHIP_TOLERANCE,
    ) -> bool:
        if member.weights.size != len(self.components):
            return False
        if np.any(np.abs(member.weights) > self.coeff_bound * (1.0 + tolerance)):
            return False
        return self.base.contains(member.base_member, tolerance)

    def distance(self, a: AdditiveMember, b: AdditiveMember) -> float:
        span_dim = max(component.ambient_dim for component in self.components)
        span_delta = (a.weights - b.weights) @ self.component_matrix(span_dim)
        base_sq = self.base.distance(a.base_member, b.base_member) ** 2
        # The span difference has finite support, so the cross term needs the
        # base difference only up to the component dimension — exact either way.
        if isinstance(self.base, SmoothClass):
            base_delta = _coefficient_prefix(
                a.base_member, span_dim
            ) - _coefficient_prefix(b.base_member, span_dim)
        else:
            base_delta = (
                analyze_piecewise(a.base_member, span_dim).coefficients
                - analyze_piecewise(b.base_member, span_dim).coefficients
            )
        cross = float(np.dot(base_delta, span_delta))
        total = base_sq + 2.0 * cross + float(np.dot(span_delta, span_delta))
        return math.sqrt(max(total, 0.0))


# ---------------------------------------------------------------------------
# Member helpers shared across classes
# ---------------------------------------------------------------------------


def member_evaluator(cls: object, member: object) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise evaluator for a member of any supported class."""
    if isinstance(cls, SmoothClass):
        return lambda t: synthesize(member.coefficients, t)
    if isinstance(cls, PiecewiseSmoothClass):
        return member.evaluate
    if isinstance(cls, PiecewiseAnalyticClass):
        return lambda t: synthesize(member.smooth.coefficients, t) + member.steps.evaluate(t)
    if isinstance(cls, WarpedClass):
        return lambda t: cls.evaluate(member, t)
    if isinstance(cls, AdditiveSpanClass):
        base_eval = member_evaluator(cls.base, member.base_member)
        matrix = cls.component_matrix(
            max(component.ambient_dim for component in cls.components)
        )
        span = member.weights @ matrix

        return lambda t: base_eval(t) + synthesize(span, t)
    raise UsageError(f"unsupported class object: {type(cls).__name__}")


def member_kinks(cls: object, member: object) -> tuple[float, ...]:
    """Discontinuity locations of a member, for split-aware quadrature."""
    if isinstance(cls, SmoothClass):
        return ()
    if isinstance(cls, PiecewiseSmoothClass):
        return tuple(float(b) for b in member.breakpoints)
    if isinstance(cls, PiecewiseAnalyticClass):
        return tuple(float(b) for b in member.steps.breakpoints)
    if isinstance(cls, WarpedClass):
        return cls._kink_preimages(member)
    if isinstance(cls, AdditiveSpanClass):
        return member_kinks(cls.base, member.base_member)
    raise UsageError(f"unsupported class object: {type(cls).__name__}")


def _numeric_l2_distance(
    eval_a: Callable[[np.ndarray], np.ndarray],
    eval_b: Callable[[np.ndarray], np.ndarray],
    kinks: Sequence[float],
    points_per_piece: int,
) -> float:
    cuts = [-math.pi]
    for kink in sorted(kinks):
        if -math.pi < kink < math.pi:
            cuts.append(float(kink))
    cuts.append(math.pi)
    total = 0.0
    for start, end in zip(cuts[:-1], cuts[1:]):
        if end - start <= 1e-15:
            continue
        grid = np.linspace(start, end, points_per_piece)
        nudge = 1e-9 * (end - start) / points_per_piece
        points = grid.copy()
        points[0] += nudge
        points[-1] -= nudge
        delta = eval_a(points) - eval_b(points)
        total += float(simpson(delta * delta, x=grid))
    return math.sqrt(max(total, 0.0))


# ---------------------------------------------------------------------------
# Tail-decay models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailDecayModel:
    """Empirical bound ``tail(x, d) <= constant * |x| * d^-decay_exponent``.

    ``norm_bound`` caps member norms, so ``constant * norm_bound * d^-beta``
    bounds absolute tails.  ``decay_exponent`` may be ``inf`` when every
    probed tail vanished; such degenerate fits cannot drive dimension choices.
    """

    constant: float
    decay_exponent: float
    norm_bound: float = field(default=0.0)


def fit_tail_model(samples: Sequence[Signal], dims: Sequence[int]) -> TailDecayModel:
    """Fit a power-law tail bound from sampled coefficient vectors.

    The exponent is the least-squares slope of ``log(tail / |x|)`` against
    ``log d`` over all samples and probe dimensions with a nonzero tail; the
    constant is then the largest residual, so the fitted bound holds with
    equality somewhere and is never violated on the fitting data.
    """
    if not samples:
        raise UsageError("need at least one sample to fit a tail model")
    dims = sorted(set(int(d) for d in dims))
    if len(dims) < 2:
        raise UsageError("need at least two distinct probe dimensions")
    if dims[0] < 1:
        raise UsageError(f"probe dimensions must be positive, got {dims[0]}")
    norms = np.array([sample.norm() for sample in samples])
    if np.any(norms == 0.0):
        raise UsageError("tail fitting requires nonzero samples")
    relative = np.array(
        [[tail_norm(sample, d) for d in dims] for sample in samples]
    ) / norms[:, None]
    log_dims = np.log(np.array(dims, dtype=np.float64))
    positive = relative > 0.0
    if not np.any(positive):
        return TailDecayModel(
            constant=0.0,
            decay_exponent=math.inf,
            norm_bound=1.1 * float(np.max(norms)),
        )
    xs = np.broadcast_to(log_dims, relative.shape)[positive]
    ys = np.log(relative[positive])
    if np.ptp(xs) == 0.0:
        raise UsageError("nonzero tails seen at only one probe dimension")
    slope = float(np.polyfit(xs, ys, 1)[0])
    beta = -slope
    residuals = relative[positive] * np.exp(beta * xs)
    return TailDecayModel(
        constant=float(np.max(residuals)),
        decay_exponent=beta,
        norm_bound=1.1 * float(np.max(norms)),
    )


def fit_class_tail_model(
    family,
    n_samples: int,
    dims: Sequence[int],
    rng: np.random.Generator,
    ambient_dim: int,
) -> TailDecayModel:
    """Sample a class and fit its tail-decay model in one step."""
    if n_samples < 10:
        raise UsageError(f"tail fitting needs at least 10 samples, got {n_samples!r}")
    dims = [int(d) for d in dims]
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise UsageError("probe dimensions must be strictly increasing")
    if dims and not 1 <= dims[0] <= dims[-1] <= ambient_dim:
        raise UsageError(
            f"probe dimensions must lie within [1, {ambient_dim}], got {dims}"
        )
    samples = [
        family.to_signal(family.sample(rng, ambient_dim), ambient_dim)
        for _ in range(n_samples)
    ]
    return fit_tail_model(samples, dims)


def tail_bound(model: TailDecayModel, d: int) -> float:
    """Absolute tail bound ``C * R * d^-beta`` at truncation dimension ``d``."""
    if d < 1:
        raise UsageError(f"truncation dimension must be positive, got {d!r}")
    if math.isinf(model.decay_exponent):
        return 0.0
    return model.constant * model.norm_bound * float(d) ** (-model.decay_exponent)


def count_tail_violations(
    model: TailDecayModel,
    samples: Sequence[Signal],
    dims: Sequence[int],
    slack: float = 1e-12,
) -> int:
    """How many (sample, dimension) pairs exceed the fitted relative bound."""
    violations = 0
    for sample in samples:
        norm = sample.norm()
        for d in dims:
            allowed = model.constant * norm * float(d) ** (-model.decay_exponent)
            if tail_norm(sample, int(d)) > allowed + slack:
                violations += 1
    return violations
