"""Shared test helpers: independent quadrature oracles for trig-basis analysis.

The oracle computes basis coefficients of a piecewise polynomial with
``scipy.integrate.quad`` using its oscillatory-weight rules, which shares no
code with the closed-form recursions in the package.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def oracle_trig_coefficients(description, ambient_dim: int) -> np.ndarray:
    """Compute trig-basis coefficients of ``description`` by adaptive quadrature.

    Integrates ``description.evaluate`` piece by piece with ``quad`` weight
    rules, so smoothness is never violated inside a single call.
    """
    intervals = description.piece_intervals()
    jmax = ambient_dim // 2
    const = 0.0
    cos_part = np.zeros(jmax)
    sin_part = np.zeros(jmax)

    def f(t: float) -> float:
        return float(description.evaluate(t))

    for start, end in intervals:
        const += integrate.quad(f, start, end, epsabs=1e-13, limit=400)[0]
        for j in range(1, jmax + 1):
            cos_part[j - 1] += integrate.quad(
                f, start, end, weight="cos", wvar=j, epsabs=1e-13, limit=400
            )[0]
            sin_part[j - 1] += integrate.quad(
                f, start, end, weight="sin", wvar=j, epsabs=1e-13, limit=400
            )[0]

    coeffs = np.zeros(ambient_dim)
    coeffs[0] = const / math.sqrt(2.0 * math.pi)
    n_cos = (ambient_dim - 1 + 1) // 2
    n_sin = (ambient_dim - 1) // 2
    coeffs[1::2] = cos_part[:n_cos] / math.sqrt(math.pi)
    coeffs[2::2] = sin_part[:n_sin] / math.sqrt(math.pi)
    return coeffs


def grid_l2_inner(values_a: np.ndarray, values_b: np.ndarray, grid: np.ndarray) -> float:
    """L2 inner product of two sampled functions via composite Simpson."""
    return float(integrate.simpson(values_a * values_b, x=grid))
