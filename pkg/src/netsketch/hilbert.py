"""Trigonometric basis on [-pi, pi], piecewise-polynomial analysis, signal IO.

Basis convention (orthonormal in L2[-pi, pi]):

* index 0:        1 / sqrt(2*pi)
* index 2*j - 1:  cos(j*t) / sqrt(pi)
* index 2*j:      sin(j*t) / sqrt(pi)

so an ambient dimension ``d`` holds frequencies up to ``d // 2``.

Piecewise polynomials come in two flavours.  The interval model treats
[-pi, pi] as a plain interval: ``k`` interior breakpoints split it into
``k + 1`` pieces.  The periodic model treats the domain as a circle:
``k`` breakpoints induce ``k`` arcs, the last one wrapping through the
glue point at +/-pi.  Each piece carries monomial coefficients in the
local coordinate ``u = t - midpoint`` of its (unwrapped) interval, which
keeps coefficient magnitudes comparable across pieces.

Analysis against the basis is closed form: integrals of ``u**m * cos(j*u)``
and ``u**m * sin(j*u)`` obey a two-term recursion in ``m``, evaluated here
as definite integrals vectorized over the frequency ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import FormatError, UsageError

TWO_PI = 2.0 * math.pi
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_PI = math.sqrt(math.pi)

#: Highest local polynomial degree accepted by the analysis recursions.
MAX_PIECE_DEGREE = 8

#: Default ambient truncation: the working model of L2[-pi, pi] is R**4096.
DEFAULT_AMBIENT_DIM = 4096


# ---------------------------------------------------------------------------
# Signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signal:
    """A function represented by its coefficients in the trig basis."""

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.ascontiguousarray(self.coefficients, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise UsageError("signal coefficients must form a non-empty 1-d array")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def ambient_dim(self) -> int:
        return int(self.coefficients.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def evaluate(self, t) -> np.ndarray:
        return synthesize(self.coefficients, t)


def inner(x: Signal, y: Signal) -> float:
    """L2 inner product via Parseval: the coefficient dot product."""
    if x.ambient_dim != y.ambient_dim:
        raise UsageError(
            f"inner product needs matching bases: {x.ambient_dim} vs {y.ambient_dim}"
        )
    return float(np.dot(x.coefficients, y.coefficients))


def project_prefix(x: Signal, d: int) -> Signal:
    """Project onto the span of the first ``d`` basis functions (low-pass)."""
    if not 1 <= d <= x.ambient_dim:
        raise UsageError(f"projection dimension {d} outside [1, {x.ambient_dim}]")
    coeffs = np.zeros(x.ambient_dim)
    coeffs[:d] = x.coefficients[:d]
    return Signal(coeffs)


def tail_norm(x: Signal, d: int) -> float:
    """Euclidean norm of the coefficients beyond the first ``d``."""
    if not 1 <= d <= x.ambient_dim:
        raise UsageError(f"tail dimension {d} outside [1, {x.ambient_dim}]")
    return float(np.linalg.norm(x.coefficients[d:]))


def synthesize(coefficients, t):
    """Evaluate the function with the given basis coefficients at points ``t``."""
    coeffs = np.asarray(coefficients, dtype=float)
    points = np.asarray(t, dtype=float)
    flat = np.atleast_1d(points).ravel()
    out = np.full(flat.shape, coeffs[0] / _SQRT_2PI)
    if coeffs.size > 1:
        jmax = coeffs.size // 2
        js = np.arange(1, jmax + 1, dtype=float)
        cos_coeffs = coeffs[1::2]
        sin_coeffs = np.zeros(jmax)
        sin_coeffs[: (coeffs.size - 1) // 2] = coeffs[2::2]
        for start in range(0, flat.size, 4096):
            block = flat[start : start + 4096, None] * js[None, :]
            out[start : start + 4096] += (
                np.cos(block) @ cos_coeffs + np.sin(block) @ sin_coeffs
            ) / _SQRT_PI
    if points.ndim == 0:
        return float(out[0])
    return out.reshape(points.shape)


# ---------------------------------------------------------------------------
# Piecewise-polynomial descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseDescription:
    """A piecewise polynomial on [-pi, pi], interval or periodic flavour.

    ``breakpoints`` are the jump locations (sorted, strictly increasing).
    ``piece_coefficients`` hold one monomial-coefficient array per piece in
    increasing degree, expressed in the local coordinate around the piece
    midpoint.  The interval flavour has ``len(breakpoints) + 1`` pieces, the
    periodic flavour has ``len(breakpoints)`` arcs.
    """

    breakpoints: np.ndarray
    piece_coefficients: tuple[np.ndarray, ...] = field()
    periodic: bool = False

    def __post_init__(self) -> None:
        points = np.ascontiguousarray(self.breakpoints, dtype=float)
        if points.ndim != 1:
            raise UsageError("breakpoints must form a 1-d array")
        if points.size and not np.all(np.diff(points) > 0):
            raise UsageError("breakpoints must be strictly increasing")
        if self.periodic:
            if points.size < 1:
                raise UsageError("a periodic description needs at least one breakpoint")
            if points.size and (points[0] < -math.pi or points[-1] >= math.pi):
                raise UsageError("periodic breakpoints must lie in [-pi, pi)")
            expected_pieces = points.size
        else:
            if points.size and (points[0] <= -math.pi or points[-1] >= math.pi):
                raise UsageError("interior breakpoints must lie in (-pi, pi)")
            expected_pieces = points.size + 1
        pieces = tuple(
            np.ascontiguousarray(c, dtype=float) for c in self.piece_coefficients
        )
        if len(pieces) != expected_pieces:
            raise UsageError(
                f"expected {expected_pieces} coefficient arrays, got {len(pieces)}"
            )
        for coeffs in pieces:
            if coeffs.ndim != 1 or coeffs.size == 0:
                raise UsageError("piece coefficients must form non-empty 1-d arrays")
            coeffs.flags.writeable = False
        points.flags.writeable = False
        object.__setattr__(self, "breakpoints", points)
        object.__setattr__(self, "piece_coefficients", pieces)

    def piece_intervals(self) -> list[tuple[float, float]]:
        """Piece intervals in unwrapped coordinates (arcs may extend past pi)."""
        if self.periodic:
            edges = np.concatenate([self.breakpoints, [self.breakpoints[0] + TWO_PI]])
        else:
            edges = np.concatenate([[-math.pi], self.breakpoints, [math.pi]])
        return [(float(edges[i]), float(edges[i + 1])) for i in range(len(edges) - 1)]

    def num_pieces(self) -> int:
        return len(self.piece_coefficients)

    def evaluate(self, t):
        """Evaluate at points ``t``; periodic descriptions wrap modulo 2*pi."""
        points = np.asarray(t, dtype=float)
        flat = np.atleast_1d(points).astype(float).ravel()
        if self.periodic:
            origin = float(self.breakpoints[0])
            flat = origin + np.mod(flat - origin, TWO_PI)
            edges = np.concatenate([self.breakpoints, [origin + TWO_PI]])
            idx = np.clip(
                np.searchsorted(edges, flat, side="right") - 1,
                0,
                self.num_pieces() - 1,
            )
        else:
            flat = np.clip(flat, -math.pi, math.pi)
            idx = np.searchsorted(self.breakpoints, flat, side="right")
        intervals = self.piece_intervals()
        out = np.empty_like(flat)
        for piece, (start, end) in enumerate(intervals):
            mask = idx == piece
            if not np.any(mask):
                continue
            local = flat[mask] - 0.5 * (start + end)
            out[mask] = np.polynomial.polynomial.polyval(
                local, self.piece_coefficients[piece]
            )
        if points.ndim == 0:
            return float(out[0])
        return out.reshape(points.shape)


def _monomial_trig_integrals(
    alpha: float, beta: float, js: np.ndarray, degree: int
) -> tuple[np.ndarray, np.ndarray]:
    """Definite integrals of u**m cos(j u) and u**m sin(j u) over [alpha, beta].

    Returns two arrays of shape (degree + 1, len(js)) following the recursion
    obtained by integrating by parts once per degree.
    """
    sin_b, cos_b = np.sin(js * beta), np.cos(js * beta)
    sin_a, cos_a = np.sin(js * alpha), np.cos(js * alpha)
    cos_ints = [(sin_b - sin_a) / js]
    sin_ints = [(cos_a - cos_b) / js]
    pow_a, pow_b = 1.0, 1.0
    for m in range(1, degree + 1):
        pow_a *= alpha
        pow_b *= beta
        cos_ints.append((pow_b * sin_b - pow_a * sin_a) / js - (m / js) * sin_ints[m - 1])
        sin_ints.append((pow_a * cos_a - pow_b * cos_b) / js + (m / js) * cos_ints[m - 1])
    return np.stack(cos_ints), np.stack(sin_ints)


def analyze_piecewise(description: PiecewiseDescription, ambient_dim: int) -> Signal:
    """Exact trig-basis coefficients of a piecewise polynomial.

    Each piece contributes phase-shifted monomial integrals; the recursion in
    the degree keeps everything closed form, so accuracy is limited only by
    floating point.  Local polynomial degree is capped at
    ``MAX_PIECE_DEGREE``.
    """
    if ambient_dim < 1:
        raise UsageError("ambient_dim must be positive")
    for coeffs in description.piece_coefficients:
        if coeffs.size - 1 > MAX_PIECE_DEGREE:
            raise UsageError(
                f"piece degree {coeffs.size - 1} exceeds the cap of {MAX_PIECE_DEGREE}"
            )
    jmax = ambient_dim // 2
    js = np.arange(1, jmax + 1, dtype=float)
    total_const = 0.0
    total_cos = np.zeros(jmax)
    total_sin = np.zeros(jmax)
    for (start, end), coeffs in zip(
        description.piece_intervals(), description.piece_coefficients
    ):
        midpoint = 0.5 * (start + end)
        alpha, beta = start - midpoint, end - midpoint
        degree = coeffs.size - 1
        powers = np.arange(1, degree + 2, dtype=float)
        total_const += float(
            np.dot(coeffs, (beta**powers - alpha**powers) / powers)
        )
        if jmax == 0:
            continue
        cos_ints, sin_ints = _monomial_trig_integrals(alpha, beta, js, degree)
        local_cos = coeffs @ cos_ints
        local_sin = coeffs @ sin_ints
        phase_cos, phase_sin = np.cos(js * midpoint), np.sin(js * midpoint)
        total_cos += phase_cos * local_cos - phase_sin * local_sin
        total_sin += phase_sin * local_cos + phase_cos * local_sin
    coeffs_out = np.zeros(ambient_dim)
    coeffs_out[0] = total_const / _SQRT_2PI
    if ambient_dim > 1:
        coeffs_out[1::2] = total_cos[: ambient_dim // 2] / _SQRT_PI
        coeffs_out[2::2] = total_sin[: (ambient_dim - 1) // 2] / _SQRT_PI
    return Signal(coeffs_out)


def _piece_polynomial_at(
    description: PiecewiseDescription, t: float
) -> np.polynomial.Polynomial:
    """The description's polynomial around ``t``, in global coordinates."""
    if description.periodic:
        origin = float(description.breakpoints[0])
        unwrapped = origin + math.fmod(t - origin, TWO_PI)
        if unwrapped < origin:
            unwrapped += TWO_PI
        edges = np.concatenate(
            [description.breakpoints, [origin + TWO_PI]]
        )
        piece = int(
            np.clip(
                np.searchsorted(edges, unwrapped, side="right") - 1,
                0,
                description.num_pieces() - 1,
            )
        )
        shift = unwrapped - t
    else:
        piece = int(np.searchsorted(description.breakpoints, t, side="right"))
        shift = 0.0
    start, end = description.piece_intervals()[piece]
    midpoint = 0.5 * (start + end)
    local = np.polynomial.Polynomial(description.piece_coefficients[piece])
    return local(np.polynomial.Polynomial([shift - midpoint, 1.0]))


def exact_l2_distance(a: PiecewiseDescription, b: PiecewiseDescription) -> float:
    """Exact L2[-pi, pi] distance between two piecewise polynomials.

    Merges the two breakpoint sets and integrates the squared difference
    polynomial on each resulting subinterval in closed form.
    """
    cuts = {-math.pi, math.pi}
    for desc in (a, b):
        for point in np.asarray(desc.breakpoints, float):
            wrapped = float(point)
            if wrapped >= math.pi:
                wrapped -= TWO_PI
            if -math.pi < wrapped < math.pi:
                cuts.add(wrapped)
    edges = sorted(cuts)
    total = 0.0
    for start, end in zip(edges[:-1], edges[1:]):
        if end - start < 1e-15:
            continue
        midpoint = 0.5 * (start + end)
        diff = _piece_polynomial_at(a, midpoint) - _piece_polynomial_at(b, midpoint)
        antiderivative = (diff * diff).integ()
        total += float(antiderivative(end) - antiderivative(start))
    return math.sqrt(max(total, 0.0))


def quadrature_analyze(
    func,
    ambient_dim: int,
    split_points=(),
    points_per_piece: int = 8193,
) -> np.ndarray:
    """Numerical trig-basis coefficients of an arbitrary callable.

    Composite Simpson between the supplied split points (where ``func`` may
    jump or kink).  The default resolution targets coefficient errors well
    below net tolerances for frequencies up to a few hundred; raise
    ``points_per_piece`` when near machine-precision agreement is needed.
    """
    edges = np.unique(
        np.concatenate([[-math.pi], np.asarray(split_points, float), [math.pi]])
    )
    edges = edges[(edges >= -math.pi) & (edges <= math.pi)]
    jmax = ambient_dim // 2
    js = np.arange(1, jmax + 1, dtype=float)
    total_const = 0.0
    total_cos = np.zeros(jmax)
    total_sin = np.zeros(jmax)
    for start, end in zip(edges[:-1], edges[1:]):
        if end - start < 1e-12:
            continue
        grid = np.linspace(start, end, points_per_piece)
        # Take one-sided limits at the piece boundaries so jumps sitting
        # exactly on a split point cannot contaminate the endpoint samples.
        eval_points = grid.copy()
        nudge = 1e-9 * (end - start) / points_per_piece
        eval_points[0] += nudge
        eval_points[-1] -= nudge
        values = np.asarray(func(eval_points), dtype=float)
        total_const += integrate.simpson(values, x=grid)
        for lo in range(0, jmax, 128):
            phases = js[lo : lo + 128, None] * grid[None, :]
            total_cos[lo : lo + 128] += integrate.simpson(
                values[None, :] * np.cos(phases), x=grid, axis=1
            )
            total_sin[lo : lo + 128] += integrate.simpson(
                values[None, :] * np.sin(phases), x=grid, axis=1
            )
    coeffs = np.zeros(ambient_dim)
    coeffs[0] = total_const / _SQRT_2PI
    if ambient_dim > 1:
        coeffs[1::2] = total_cos[: ambient_dim // 2] / _SQRT_PI
        coeffs[2::2] = total_sin[: (ambient_dim - 1) // 2] / _SQRT_PI
    return coeffs


# ---------------------------------------------------------------------------
# Signal IO
# ---------------------------------------------------------------------------


def parse_header(line: str, required: tuple[str, ...], context: str) -> dict[str, str]:
    """Parse a ``key=value`` header line, requiring exactly the given keys."""
    fields: dict[str, str] = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise FormatError(f"{context}: malformed header token {token!r}")
        if key in fields:
            raise FormatError(f"{context}: duplicate header key {key!r}")
        fields[key] = value
    missing = [key for key in required if key not in fields]
    extra = [key for key in fields if key not in required]
    if missing or extra:
        raise FormatError(
            f"{context}: header must contain exactly {' '.join(required)}"
        )
    return fields


def _parse_float(text: str, context: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise FormatError(f"{context}: invalid number {text.strip()!r}") from exc


def dump_signal(stream, signal: Signal) -> None:
    """Write a signal to a text stream: header line, one coefficient per line."""
    stream.write(f"basis=trig ambient_dim={signal.ambient_dim}\n")
    for value in signal.coefficients:
        stream.write(f"{float(value):.17g}\n")


def load_signal(stream) -> Signal:
    """Read one signal from a text stream (leaves trailing content unread)."""
    header = stream.readline()
    if not header:
        raise FormatError("signal: missing header line")
    fields = parse_header(header, ("basis", "ambient_dim"), "signal")
    if fields["basis"] != "trig":
        raise FormatError(f"signal: unsupported basis {fields['basis']!r}")
    try:
        dim = int(fields["ambient_dim"])
    except ValueError as exc:
        raise FormatError("signal: ambient_dim must be an integer") from exc
    if dim < 1:
        raise FormatError("signal: ambient_dim must be positive")
    coeffs = np.empty(dim)
    for i in range(dim):
        line = stream.readline()
        if not line:
            raise FormatError(f"signal: expected {dim} coefficients, found {i}")
        coeffs[i] = _parse_float(line, "signal")
    return Signal(coeffs)


def write_signal(path, signal: Signal) -> None:
    with open(path, "w", encoding="ascii") as stream:
        dump_signal(stream, signal)


def read_signal(path) -> Signal:
    with open(path, "r", encoding="ascii") as stream:
        signal = load_signal(stream)
        remainder = stream.read().strip()
        if remainder:
            raise FormatError("signal: trailing data after coefficients")
    return signal
