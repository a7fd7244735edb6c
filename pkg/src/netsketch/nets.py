"""Covering-net construction, counting, and exact nearest-member decoding.

A covering net for a function class at resolution ``eps1`` is a finite set of
members within ``eps1`` (in L2) of every member of the class.  Nets here come
in three modes:

- ``counted``: only the construction log is kept — sizes and entropy are
  available, members are never enumerated.  Works at any scale.
- ``materialized``: all members are enumerated (guarded by ``m_max``).
- ``factored``: for single-jump piecewise-constant classes the net is a
  product of a breakpoint grid and two level grids, and the nearest member
  under a measurement operator is found exactly by sweeping configurations
  with the inner minimization solved in closed form.

Grids are "round-image": a symmetric grid with ``2*floor(bound/step + 1/2)+1``
points always contains the rounding of any in-bound value, so per-coordinate
rounding error never exceeds half a step even at the boundary.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import IO, Iterator

import numpy as np

from .errors import FormatError, NetTooLargeError, UsageError
from .function_classes import (
    AdditiveMember,
    AdditiveSpanClass,
    AnalyticStepMember,
    PiecewiseAnalyticClass,
    PiecewiseSmoothClass,
    SmoothClass,
    WarpedClass,
    WarpedMember,
)
from .hilbert import (
    PiecewiseDescription,
    Signal,
    _piece_polynomial_at,
    analyze_piecewise,
    dump_signal,
    load_signal,
    parse_header,
)

__all__ = [
    "AxisLog",
    "CoveringNet",
    "FactoredStepDecoder",
    "DecodeResult",
    "LoadedNet",
    "build_net",
    "round_to_net",
    "grid_count",
    "symmetric_grid",
    "snap_to_symmetric_grid",
    "dump_net",
    "load_net",
    "write_net",
    "read_net",
]

TWO_PI = 2.0 * math.pi
_SQRT_2PI = math.sqrt(TWO_PI)

DEFAULT_NET_BUDGET = 10**6


# ---------------------------------------------------------------------------
# Round-image grids
# ---------------------------------------------------------------------------


def grid_count(bound: float, step: float) -> int:
    """Points in the symmetric grid covering ``[-bound, bound]`` at ``step``."""
    if not bound >= 0.0:
        raise UsageError(f"grid bound must be nonnegative, got {bound!r}")
    if not step > 0.0:
        raise UsageError(f"grid step must be positive, got {step!r}")
    return 2 * int(math.floor(bound / step + 0.5)) + 1


def symmetric_grid(bound: float, step: float) -> np.ndarray:
    count = grid_count(bound, step)
    return (np.arange(count) - (count - 1) / 2.0) * step


def snap_to_symmetric_grid(value: float, bound: float, step: float) -> tuple[int, float]:
    """Nearest grid index and value; the grid always contains the image."""
    half = (grid_count(bound, step) - 1) // 2
    k = int(math.floor(value / step + 0.5))
    k = max(-half, min(half, k))
    return k + half, k * step


def _monomial_norm(m: int) -> float:
    """L2 norm of ``u^m`` over ``[-pi, pi]``: ``sqrt(2 pi^(2m+1) / (2m+1))``."""
    return math.sqrt(2.0 * math.pi ** (2 * m + 1) / (2 * m + 1))


# ---------------------------------------------------------------------------
# Net containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxisLog:
    """One quantized coordinate of the construction: label, size, spacing.

    ``start`` is ``None`` for grids symmetric about zero; one-sided grids
    (warp parameters live in ``[0, 1]``) record their first point instead.
    """

    label: str
    count: int
    step: float
    start: float | None = None


@dataclass(frozen=True)
class LoadedNet:
    """Materialized net read back from disk: header fields plus signals."""

    eps1: float
    size: int
    spec: str
    signals: tuple[Signal, ...]


@dataclass
class FactoredStepDecoder:
    """Exact nearest-member search over a single-jump step-function net.

    Net members are ``c0`` on ``[-pi, b]`` and ``c1`` after the jump, with
    ``b`` on a breakpoint grid and levels on a shared symmetric grid.  For a
    fixed configuration the best ``c1`` solves a scalar quadratic, so the
    sweep touches every configuration without enumerating the full product.
    """

    positions: np.ndarray
    levels: np.ndarray
    level_step: float

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.levels = np.asarray(self.levels, dtype=np.float64)
        self._indicator_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def size(self) -> int:
        return self.positions.size * self.levels.size ** 2

    def _indicators(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        """Truncated coefficients of the pre-jump indicators, with row norms.

        Closed forms: the constant coefficient is ``(b+pi)/sqrt(2 pi)``, the
        cosine-``j`` one ``sin(j b)/(j sqrt(pi))``, and the sine-``j`` one
        ``((-1)^j - cos(j b))/(j sqrt(pi))``.
        """
        if d < 1:
            raise UsageError(f"truncation dimension must be positive, got {d!r}")
        cached = self._indicator_cache.get(d)
        if cached is not None:
            return cached
        b = self.positions
        w = np.zeros((b.size, d))
        w[:, 0] = (b + math.pi) / _SQRT_2PI
        if d > 1:
            n_cos = d // 2
            js = np.arange(1, n_cos + 1, dtype=np.float64)
            phases = np.outer(b, js)
            w[:, 1::2] = np.sin(phases) / (js * math.sqrt(math.pi))
            signs = np.where(js.astype(int) % 2 == 0, 1.0, -1.0)
            sines = (signs - np.cos(phases)) / (js * math.sqrt(math.pi))
            w[:, 2::2] = sines[:, : (d - 1) // 2]
        norms_sq = np.einsum("ij,ij->i", w, w)
        self._indicator_cache[d] = (w, norms_sq)
        return self._indicator_cache[d]

    def _sweep(
        self,
        q0: np.ndarray,
        q_full: float,
        g00: np.ndarray,
        g0f: np.ndarray,
        gff: float,
        target_norm_sq: float,
    ) -> "DecodeResult":
        """Minimize ``|target - c0 w - c1 (v - w)|`` over the grid.

        ``q0``/``q_full`` are inner products of the target with the indicator
        rows and the constant-one function; ``g00``/``g0f``/``gff`` the
        corresponding Gram entries, all in the working geometry.
        """
        c0 = self.levels
        q1 = q_full - q0
        g01 = g0f - g00
        g11 = gff - 2.0 * g0f + g00
        half = (self.levels.size - 1) // 2
        c1_opt = (q1[:, None] - np.outer(g01, c0)) / g11[:, None]
        k = np.floor(c1_opt / self.level_step + 0.5)
        np.clip(k, -half, half, out=k)
        c1 = k * self.level_step
        objective = (
            -2.0 * (c0[None, :] * q0[:, None] + c1 * q1[:, None])
            + c0[None, :] ** 2 * g00[:, None]
            + 2.0 * c0[None, :] * c1 * g01[:, None]
            + c1**2 * g11[:, None]
        )
        flat = int(np.argmin(objective))
        p_idx, c0_idx = divmod(flat, c0.size)
        c1_idx = int(k[p_idx, c0_idx]) + half
        member = PiecewiseDescription(
            breakpoints=(float(self.positions[p_idx]),),
            piece_coefficients=(
                (float(c0[c0_idx]),),
                (float(self.levels[c1_idx]),),
            ),
            periodic=False,
        )
        index = (p_idx * c0.size + c0_idx) * c0.size + c1_idx
        distance_sq = target_norm_sq + float(objective[p_idx, c0_idx])
        return DecodeResult(
            member=member, index=index, distance=math.sqrt(max(distance_sq, 0.0))
        )

    def decode_coefficients(self, target: np.ndarray) -> "DecodeResult":
        """Nearest net member to a truncated coefficient vector (exactly)."""
        target = np.asarray(target, dtype=np.float64)
        if target.ndim != 1 or target.size < 1:
            raise UsageError("decode target must be a nonempty 1-d vector")
        d = target.size
        w, norms_sq = self._indicators(d)
        q0 = w @ target
        q_full = _SQRT_2PI * float(target[0])
        g0f = self.positions + math.pi  # <w(b), 1-function> is exact at any d
        return self._sweep(
            q0, q_full, norms_sq, g0f, TWO_PI, float(np.dot(target, target))
        )

    def decode_measurements(self, y: np.ndarray, operator) -> "DecodeResult":
        """Nearest net member to measurements under a general operator."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (operator.n,):
            raise UsageError(
                f"expected {operator.n} measurements, got shape {y.shape}"
            )
        d = operator.d
        w, _ = self._indicators(d)
        rows = operator.scale * operator.frame
        projected = w @ rows.T
        v_full = _SQRT_2PI * rows[:, 0]
        q0 = projected @ y
        q_full = float(np.dot(v_full, y))
        g00 = np.einsum("ij,ij->i", projected, projected)
        g0f = projected @ v_full
        gff = float(np.dot(v_full, v_full))
        return self._sweep(q0, q_full, g00, g0f, gff, float(np.dot(y, y)))


@dataclass(frozen=True)
class DecodeResult:
    member: PiecewiseDescription
    index: int
    distance: float


@dataclass(frozen=True)
class CoveringNet:
    """A constructed net: counts and logs always, members when materialized."""

    family: object
    eps1: float
    mode: str
    size: int
    entropy_bits: float
    config_count: int
    axes: tuple[AxisLog, ...]
    positions: np.ndarray | None = field(default=None)
    members: tuple | None = field(default=None)
    decoder: FactoredStepDecoder | None = field(default=None)


# ---------------------------------------------------------------------------
# Per-family construction plans
# ---------------------------------------------------------------------------


def _position_grid(eps1: float, num_jumps: int, value_scale: float, periodic: bool):
    """Breakpoint grid: nominal pitch from the jump budget, rescaled to fit.

    The nominal pitch ``(eps1/2)^2 / (jumps * (2*scale)^2)`` (quarter budget
    for the periodic flavour) fixes the point count ``P``; the actual grid
    uses ``2 pi / P`` so all points stay inside the domain.
    """
    budget = eps1 / (4.0 if periodic else 2.0)
    pitch = budget**2 / (num_jumps * (2.0 * value_scale) ** 2)
    count = int(math.ceil(TWO_PI / pitch))
    effective = TWO_PI / count
    if periodic:
        points = -math.pi + effective * np.arange(count)
    else:
        points = -math.pi + effective * (np.arange(count) + 0.5)
    return points, effective, pitch


def _gap_separated_count(total: int, choose: int, gap: int) -> int:
    """Sorted index tuples from ``range(total)`` with consecutive gaps >= gap."""
    return math.comb(total - (choose - 1) * (gap - 1), choose) if choose >= 1 else 1


@dataclass(frozen=True)
class _Plan:
    axes: tuple[AxisLog, ...]
    config_count: int
    positions: np.ndarray | None = None
    index_gap: int = 1
    extra: dict = field(default_factory=dict)


def _smooth_plan(family: SmoothClass, eps1: float) -> _Plan:
    k, big_k = family.smoothness, family.amplitude
    truncation = max(1, int(math.ceil((2.0 * big_k / eps1) ** (1.0 / k))))
    step = eps1 / math.sqrt(truncation)
    envelope = family.coefficient_envelope(truncation)
    axes = tuple(
        AxisLog(label=f"coefficient[{i}]", count=grid_count(envelope[i], step), step=step)
        for i in range(truncation)
    )
    return _Plan(axes=axes, config_count=1)


def _piecewise_plan(family: PiecewiseSmoothClass, eps1: float) -> _Plan:
    s = family.max_jumps
    if s == 0:
        positions = np.array([])
        effective = TWO_PI
        gap = 1
        configs = 1
    elif s == 1:
        positions, effective, _ = _position_grid(
            eps1, s, family.level_bound, periodic=False
        )
        gap = 1
        configs = positions.size
    else:
        positions, effective, pitch = _position_grid(
            eps1, s, family.level_bound, periodic=False
        )
        slack = family.min_gap - 2.0 * pitch
        gap = max(1, int(math.ceil(slack / effective))) if slack > 0.0 else 1
        if positions.size - (s - 1) * (gap - 1) < s:
            raise UsageError(
                "no breakpoint configuration satisfies the gap constraint"
            )
        configs = _gap_separated_count(positions.size, s, gap)
    bounds = family.coefficient_bounds()
    denom = math.sqrt(s + 1.0) * (family.degree + 1)
    steps = [eps1 / (denom * _monomial_norm(m)) for m in range(family.degree + 1)]
    axes = []
    for piece in range(s + 1):
        for m in range(family.degree + 1):
            axes.append(
                AxisLog(
                    label=f"piece[{piece}].coeff[{m}]",
                    count=grid_count(bounds[m], steps[m]),
                    step=steps[m],
                )
            )
    return _Plan(
        axes=tuple(axes),
        config_count=int(configs),
        positions=positions,
        index_gap=gap,
        extra={"effective": effective},
    )


def _analytic_truncation(family: PiecewiseAnalyticClass, eps1: float) -> int:
    eta, big_k = family.strip_width, family.amplitude
    ratio = 4.0 * big_k / ((1.0 - math.exp(-eta)) * eps1)
    return max(1, int(math.ceil(math.log(max(ratio, 1.0 + 1e-12)) / eta)))


def _analytic_plan(family: PiecewiseAnalyticClass, eps1: float) -> _Plan:
    kappa, big_k = family.max_jumps, family.amplitude
    positions, effective, _ = _position_grid(eps1, kappa, big_k, periodic=True)
    configs = math.comb(positions.size, kappa)
    level_step = eps1 / (2.0 * _SQRT_2PI)
    axes = [
        AxisLog(label=f"level[{p}]", count=grid_count(big_k, level_step), step=level_step)
        for p in range(kappa)
    ]
    freq_cut = _analytic_truncation(family, eps1)
    n_coeffs = 2 * freq_cut + 1
    coeff_step = eps1 / (2.0 * math.sqrt(n_coeffs))
    envelope = family.coefficient_envelope(n_coeffs)
    axes.extend(
        AxisLog(
            label=f"coefficient[{i}]",
            count=grid_count(envelope[i], coeff_step),
            step=coeff_step,
        )
        for i in range(n_coeffs)
    )
    return _Plan(
        axes=tuple(axes),
        config_count=int(configs),
        positions=positions,
        extra={"effective": effective, "level_step": level_step,
               "coeff_step": coeff_step, "n_coeffs": n_coeffs},
    )


def _warp_axes(family: WarpedClass, eps1: float) -> tuple[AxisLog, ...]:
    step = eps1 / (
        2.0 * family.lipschitz_bound * math.sqrt(TWO_PI * family.num_warp_params)
    )
    count = int(math.floor(1.0 / step + 0.5)) + 1  # one-sided grid over [0, 1]
    return tuple(
        AxisLog(label=f"warp[{i}]", count=count, step=step, start=0.0)
        for i in range(family.num_warp_params)
    )


def _span_axes(family: AdditiveSpanClass, eps1: float) -> tuple[AxisLog, ...]:
    max_norm = max(component.norm() for component in family.components)
    r = len(family.components)
    step = eps1 / (2.0 * math.sqrt(r) * max_norm)
    return tuple(
        AxisLog(label=f"span[{i}]", count=grid_count(family.coeff_bound, step), step=step)
        for i in range(r)
    )


# ---------------------------------------------------------------------------
# Member enumeration (materialized mode)
# ---------------------------------------------------------------------------


def _axis_grids(axes: tuple[AxisLog, ...]) -> list[np.ndarray]:
    grids = []
    for axis in axes:
        if axis.start is None:
            grids.append((np.arange(axis.count) - (axis.count - 1) / 2.0) * axis.step)
        else:
            grids.append(axis.start + np.arange(axis.count) * axis.step)
    return grids


def _iter_gap_tuples(total: int, choose: int, gap: int) -> Iterator[tuple[int, ...]]:
    if choose == 1:
        yield from ((i,) for i in range(total))
        return
    for combo in itertools.combinations(range(total), choose):
        if all(b - a >= gap for a, b in zip(combo, combo[1:])):
            yield combo


def _enumerate_members(
    family, plan: _Plan, eps1: float, m_max: int | float
) -> Iterator[object]:
    if isinstance(family, SmoothClass):
        for values in itertools.product(*_axis_grids(plan.axes)):
            yield Signal(np.array(values))
    elif isinstance(family, PiecewiseSmoothClass):
        per_piece = family.degree + 1
        grids = _axis_grids(plan.axes)
        for combo in _iter_gap_tuples(
            plan.positions.size, family.max_jumps, plan.index_gap
        ):
            breakpoints = tuple(float(plan.positions[i]) for i in combo)
            for values in itertools.product(*grids):
                pieces = tuple(
                    tuple(values[p * per_piece : (p + 1) * per_piece])
                    for p in range(family.max_jumps + 1)
                )
                yield PiecewiseDescription(
                    breakpoints=breakpoints,
                    piece_coefficients=pieces,
                    periodic=False,
                )
    elif isinstance(family, PiecewiseAnalyticClass):
        kappa = family.max_jumps
        grids = _axis_grids(plan.axes)
        level_grids, coeff_grids = grids[:kappa], grids[kappa:]
        for combo in itertools.combinations(range(plan.positions.size), kappa):
            breakpoints = tuple(float(plan.positions[i]) for i in combo)
            for levels in itertools.product(*level_grids):
                steps = PiecewiseDescription(
                    breakpoints=breakpoints,
                    piece_coefficients=tuple((float(v),) for v in levels),
                    periodic=True,
                )
                for coeffs in itertools.product(*coeff_grids):
                    yield AnalyticStepMember(
                        smooth=Signal(np.array(coeffs)), steps=steps
                    )
    elif isinstance(family, WarpedClass):
        base_net = build_net(family.base, eps1 / 2.0, mode="materialized", m_max=m_max)
        warp_grids = _axis_grids(plan.axes[-family.num_warp_params :])
        for base_member in base_net.members:
            for params in itertools.product(*warp_grids):
                yield WarpedMember(
                    base_member=base_member, warp_params=np.array(params)
                )
    elif isinstance(family, AdditiveSpanClass):
        base_net = build_net(family.base, eps1 / 2.0, mode="materialized", m_max=m_max)
        span_grids = _axis_grids(plan.axes[-len(family.components) :])
        for base_member in base_net.members:
            for weights in itertools.product(*span_grids):
                yield AdditiveMember(
                    base_member=base_member, weights=np.array(weights)
                )
    else:  # pragma: no cover - guarded by build_net
        raise UsageError(f"unsupported class object: {type(family).__name__}")


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------


def _family_plan(family, eps1: float) -> _Plan:
    if isinstance(family, SmoothClass):
        return _smooth_plan(family, eps1)
    if isinstance(family, PiecewiseSmoothClass):
        return _piecewise_plan(family, eps1)
    if isinstance(family, PiecewiseAnalyticClass):
        return _analytic_plan(family, eps1)
    if isinstance(family, WarpedClass):
        base_plan = _family_plan(family.base, eps1 / 2.0)
        return _Plan(
            axes=base_plan.axes + _warp_axes(family, eps1),
            config_count=base_plan.config_count,
            positions=base_plan.positions,
            index_gap=base_plan.index_gap,
        )
    if isinstance(family, AdditiveSpanClass):
        base_plan = _family_plan(family.base, eps1 / 2.0)
        return _Plan(
            axes=base_plan.axes + _span_axes(family, eps1),
            config_count=base_plan.config_count,
            positions=base_plan.positions,
            index_gap=base_plan.index_gap,
        )
    raise UsageError(f"unsupported class object: {type(family).__name__}")


def _supports_factored(family) -> bool:
    return (
        isinstance(family, PiecewiseSmoothClass)
        and family.degree == 0
        and family.max_jumps == 1
    )


def build_net(
    family,
    eps1: float,
    mode: str = "auto",
    m_max: int | float = DEFAULT_NET_BUDGET,
) -> CoveringNet:
    """Construct a covering net at resolution ``eps1`` in the requested mode.

    ``auto`` materializes when the size fits within ``m_max``, falls back to
    the factored representation when one exists, and otherwise keeps counts
    only.  Explicit ``materialized`` raises when the net exceeds ``m_max``.
    """
    if not eps1 > 0.0:
        raise UsageError(f"net resolution must be positive, got {eps1!r}")
    if mode not in ("auto", "counted", "materialized", "factored"):
        raise UsageError(f"unknown net mode: {mode!r}")
    plan = _family_plan(family, eps1)
    size = plan.config_count
    for axis in plan.axes:
        size *= axis.count
    entropy_bits = math.log2(plan.config_count) + float(
        sum(math.log2(axis.count) for axis in plan.axes)
    )
    if mode == "auto":
        if size <= m_max:
            mode = "materialized"
        elif _supports_factored(family):
            mode = "factored"
        else:
            mode = "counted"
    members = None
    decoder = None
    if mode == "materialized":
        if size > m_max:
            raise NetTooLargeError(
                f"net has {size} members, over the materialization budget {m_max}"
            )
        members = tuple(_enumerate_members(family, plan, eps1, m_max))
        if len(members) != size:
            raise UsageError(
                f"enumerated {len(members)} members but counted {size}"
            )  # pragma: no cover - internal consistency
    elif mode == "factored":
        if not _supports_factored(family):
            raise UsageError(
                "factored nets require a single-jump piecewise-constant class"
            )
        level_axis = plan.axes[0]
        decoder = FactoredStepDecoder(
            positions=plan.positions,
            levels=symmetric_grid(family.level_bound, level_axis.step),
            level_step=level_axis.step,
        )
    return CoveringNet(
        family=family,
        eps1=eps1,
        mode=mode,
        size=size,
        entropy_bits=entropy_bits,
        config_count=plan.config_count,
        axes=plan.axes,
        positions=plan.positions,
        members=members,
        decoder=decoder,
    )


# ---------------------------------------------------------------------------
# Witness rounding
# ---------------------------------------------------------------------------


def _snap_breakpoints_interval(
    member_points: np.ndarray, plan: _Plan, num_jumps: int
) -> tuple[float, ...]:
    if num_jumps == 0:
        return ()
    positions = plan.positions
    effective = TWO_PI / positions.size
    indices: list[int] = []
    for b in np.sort(np.asarray(member_points, dtype=np.float64)):
        idx = int(math.floor((b + math.pi) / effective))
        idx = max(0, min(positions.size - 1, idx))
        indices.append(idx)
    # Enforce distinctness and the configuration gap, bumping forward.
    for t in range(1, len(indices)):
        indices[t] = max(indices[t], indices[t - 1] + plan.index_gap)
    while len(indices) < num_jumps:
        candidate = (indices[-1] + plan.index_gap) if indices else 0
        indices.append(candidate)
    if indices and indices[-1] >= positions.size:
        raise UsageError("member breakpoints cannot be snapped into the net grid")
    return tuple(float(positions[i]) for i in indices)


def _round_piecewise(
    family: PiecewiseSmoothClass, plan: _Plan, member: PiecewiseDescription
) -> PiecewiseDescription:
    breakpoints = _snap_breakpoints_interval(
        member.breakpoints, plan, family.max_jumps
    )
    bounds = family.coefficient_bounds()
    steps = [plan.axes[m].step for m in range(family.degree + 1)]
    edges = [-math.pi, *breakpoints, math.pi]
    pieces = []
    for left, right in zip(edges[:-1], edges[1:]):
        midpoint = 0.5 * (left + right)
        polynomial = _piece_polynomial_at(member, midpoint)
        local = polynomial(np.polynomial.Polynomial([midpoint, 1.0]))
        coeffs = np.zeros(family.degree + 1)
        raw = local.coef[: family.degree + 1]
        coeffs[: raw.size] = raw
        rounded = tuple(
            snap_to_symmetric_grid(float(c), bounds[m], steps[m])[1]
            for m, c in enumerate(coeffs)
        )
        pieces.append(rounded)
    return PiecewiseDescription(
        breakpoints=breakpoints, piece_coefficients=tuple(pieces), periodic=False
    )


def _round_analytic(
    family: PiecewiseAnalyticClass, plan: _Plan, member: AnalyticStepMember
) -> AnalyticStepMember:
    positions = plan.positions
    count = positions.size
    taken: set[int] = set()
    indices: list[int] = []
    for b in np.asarray(member.steps.breakpoints, dtype=np.float64):
        idx = int(math.floor((b + math.pi) / plan.extra["effective"] + 0.5)) % count
        while idx in taken:
            idx = (idx + 1) % count
        taken.add(idx)
        indices.append(idx)
    while len(indices) < family.max_jumps:
        idx = 0
        while idx in taken:
            idx += 1
        if idx >= count:
            raise UsageError("step positions cannot be snapped into the net grid")
        taken.add(idx)
        indices.append(idx)
    indices = sorted(indices)
    snapped = [float(positions[i]) for i in indices]
    level_step = plan.extra["level_step"]
    arcs = snapped + [snapped[0] + TWO_PI]
    levels = []
    for left, right in zip(arcs[:-1], arcs[1:]):
        midpoint = 0.5 * (left + right)
        value = float(member.steps.evaluate(np.array([midpoint]))[0])
        levels.append(
            (snap_to_symmetric_grid(value, family.amplitude, level_step)[1],)
        )
    steps = PiecewiseDescription(
        breakpoints=tuple(snapped),
        piece_coefficients=tuple(levels),
        periodic=True,
    )
    n_coeffs = plan.extra["n_coeffs"]
    coeff_step = plan.extra["coeff_step"]
    envelope = family.coefficient_envelope(n_coeffs)
    kept = min(n_coeffs, member.smooth.ambient_dim)
    rounded = np.zeros(max(n_coeffs, 1))
    for i in range(kept):
        rounded[i] = snap_to_symmetric_grid(
            float(member.smooth.coefficients[i]), envelope[i], coeff_step
        )[1]
    return AnalyticStepMember(smooth=Signal(rounded), steps=steps)


def round_to_net(net: CoveringNet, member: object) -> object:
    """Round a class member onto the net, coordinate by coordinate.

    Returns a member-like object of the same structural type; its distance to
    the input (by the class metric) is the witnessed covering error.
    """
    family = net.family
    plan = _family_plan(family, net.eps1)
    if isinstance(family, SmoothClass):
        truncation = len(plan.axes)
        envelope = family.coefficient_envelope(truncation)
        coeffs = np.zeros(truncation)
        kept = min(truncation, member.ambient_dim)
        for i in range(kept):
            coeffs[i] = snap_to_symmetric_grid(
                float(member.coefficients[i]), envelope[i], plan.axes[i].step
            )[1]
        return Signal(coeffs)
    if isinstance(family, PiecewiseSmoothClass):
        return _round_piecewise(family, plan, member)
    if isinstance(family, PiecewiseAnalyticClass):
        return _round_analytic(family, plan, member)
    if isinstance(family, WarpedClass):
        base_net = build_net(family.base, net.eps1 / 2.0, mode="counted")
        base_witness = round_to_net(base_net, member.base_member)
        axes = _warp_axes(family, net.eps1)
        params = []
        for t, axis in zip(member.warp_params, axes):
            k = int(math.floor(float(t) / axis.step + 0.5))
            k = max(0, min(axis.count - 1, k))
            params.append(k * axis.step)
        return WarpedMember(base_member=base_witness, warp_params=np.array(params))
    if isinstance(family, AdditiveSpanClass):
        base_net = build_net(family.base, net.eps1 / 2.0, mode="counted")
        base_witness = round_to_net(base_net, member.base_member)
        axes = _span_axes(family, net.eps1)
        weights = np.array(
            [
                snap_to_symmetric_grid(float(t), family.coeff_bound, axis.step)[1]
                for t, axis in zip(member.weights, axes)
            ]
        )
        return AdditiveMember(base_member=base_witness, weights=weights)
    raise UsageError(f"unsupported class object: {type(family).__name__}")


# ---------------------------------------------------------------------------
# Serialization (materialized nets only)
# ---------------------------------------------------------------------------


def dump_net(stream: IO[str], net: CoveringNet, ambient_dim: int) -> None:
    if net.mode != "materialized":
        raise UsageError(f"only materialized nets can be serialized, not {net.mode}")
    spec = net.family.spec_string()
    stream.write(f"eps1={net.eps1:.17g} M={net.size} spec={spec}\n")
    for index, member in enumerate(net.members):
        if index:
            stream.write("---\n")
        dump_signal(stream, net.family.to_signal(member, ambient_dim))


def load_net(stream: IO[str]) -> LoadedNet:
    header = stream.readline()
    if not header:
        raise FormatError("empty net input")
    fields = parse_header(header, ("eps1", "M", "spec"), context="net header")
    try:
        eps1 = float(fields["eps1"])
        size = int(fields["M"])
    except ValueError as exc:
        raise FormatError(f"bad numeric field in net header: {exc}") from exc
    if size < 0:
        raise FormatError(f"net size must be nonnegative, got {size}")
    signals = []
    for index in range(size):
        if index:
            separator = stream.readline()
            if separator.strip() != "---":
                raise FormatError(f"missing separator before net member {index}")
        try:
            signals.append(load_signal(stream))
        except FormatError as exc:
            raise FormatError(f"net member {index}: {exc}") from exc
    if stream.read().strip():
        raise FormatError("trailing data after net members")
    return LoadedNet(
        eps1=eps1, size=size, spec=fields["spec"], signals=tuple(signals)
    )


def write_net(path, net: CoveringNet, ambient_dim: int) -> None:
    with open(path, "w", encoding="utf-8") as stream:
        dump_net(stream, net, ambient_dim)


def read_net(path) -> LoadedNet:
    with open(path, "r", encoding="utf-8") as stream:
        return load_net(stream)
