"""Tests for the generative function classes and tail-decay fitting."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsketch.errors import UsageError
from netsketch.function_classes import (
    AdditiveSpanClass,
    AnalyticStepMember,
    PiecewiseAnalyticClass,
    PiecewiseSmoothClass,
    SmoothClass,
    TailDecayModel,
    WarpedClass,
    WarpedMember,
    _numeric_l2_distance,
    count_tail_violations,
    fit_tail_model,
    member_evaluator,
    member_kinks,
    tail_bound,
    warp_amplitudes,
    warp_map,
)
from netsketch.hilbert import PiecewiseDescription, Signal, tail_norm

# ---------------------------------------------------------------------------
# Tail-decay fitting
# ---------------------------------------------------------------------------


def exact_power_tail_signal(beta: float, dim: int, scale: float = 1.0) -> Signal:
    """Signal whose tail norm is exactly ``scale * d**-beta`` for d < dim."""
    d = np.arange(1, dim - 1, dtype=np.float64)
    coeffs = np.empty(dim)
    coeffs[1:-1] = scale * np.sqrt(d ** (-2 * beta) - (d + 1) ** (-2 * beta))
    # The last coefficient absorbs the whole remaining tail so the telescoping
    # sum gives tail(d)^2 = scale^2 * d^(-2 beta) with no finite-size remainder.
    coeffs[-1] = scale * float(dim - 1) ** (-beta)
    coeffs[0] = scale
    return Signal(coeffs)


def test_fit_recovers_exact_power_law():
    samples = [exact_power_tail_signal(0.75, 512), exact_power_tail_signal(0.75, 512, 3.0)]
    model = fit_tail_model(samples, dims=[2, 4, 8, 16, 32, 64])
    assert abs(model.decay_exponent - 0.75) <= 1e-9
    assert count_tail_violations(model, samples, [2, 4, 8, 16, 32, 64]) == 0
    expected_r = 1.1 * max(s.norm() for s in samples)
    np.testing.assert_allclose(model.norm_bound, expected_r, rtol=1e-12)


def test_fit_constant_is_the_largest_residual():
    sample = exact_power_tail_signal(1.0, 256)
    model = fit_tail_model([sample], dims=[2, 4, 8, 16])
    # tail(d) = d^-1 exactly and |x| = sqrt(2), so C = 1/sqrt(2).
    np.testing.assert_allclose(model.constant, 1.0 / sample.norm(), rtol=1e-9)


def test_fit_rejects_degenerate_inputs():
    sample = exact_power_tail_signal(0.5, 64)
    with pytest.raises(UsageError):
        fit_tail_model([], dims=[2, 4])
    with pytest.raises(UsageError):
        fit_tail_model([sample], dims=[4])
    with pytest.raises(UsageError):
        fit_tail_model([Signal(np.zeros(16))], dims=[2, 4])


def test_fit_flags_vanishing_tails():
    compact = Signal(np.concatenate([np.ones(3), np.zeros(61)]))
    model = fit_tail_model([compact], dims=[4, 8, 16])
    assert math.isinf(model.decay_exponent)
    assert model.constant == 0.0
    assert tail_bound(model, 32) == 0.0


def test_tail_bound_hand_value():
    model = TailDecayModel(constant=2.0, decay_exponent=0.5, norm_bound=3.0)
    np.testing.assert_allclose(tail_bound(model, 4), 3.0, rtol=1e-15)
    with pytest.raises(UsageError):
        tail_bound(model, 0)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.integers(min_value=1, max_value=2**31 - 1),
        min_size=1,
        max_size=6,
    )
)
def test_fitted_model_is_sound_on_its_own_data(seeds):
    rng_samples = [
        Signal(np.random.default_rng(seed).normal(size=128) / np.arange(1, 129))
        for seed in seeds
    ]
    dims = [4, 8, 16, 32, 64]
    model = fit_tail_model(rng_samples, dims)
    assert count_tail_violations(model, rng_samples, dims) == 0


def test_fitted_slope_bands_for_reference_classes():
    rng = np.random.default_rng(2024)
    dims = [16, 32, 64, 128, 256]
    piecewise = PiecewiseSmoothClass(
        degree=1, max_jumps=2, deriv_bound=1.0, min_gap=0.5, level_bound=1.0
    )
    piecewise_samples = [
        piecewise.to_signal(piecewise.sample(rng, 2048), 2048) for _ in range(40)
    ]
    rough = fit_tail_model(piecewise_samples, dims)
    assert 0.4 <= rough.decay_exponent <= 0.6
    smooth = SmoothClass(smoothness=2, amplitude=100.0)
    smooth_samples = [smooth.sample(rng, 2048) for _ in range(40)]
    regular = fit_tail_model(smooth_samples, dims)
    assert 1.3 <= regular.decay_exponent <= 1.7


# ---------------------------------------------------------------------------
# Smooth class
# ---------------------------------------------------------------------------


def test_smooth_samples_are_members():
    cls = SmoothClass(smoothness=2, amplitude=5.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        member = cls.sample(rng, 256)
        assert cls.contains(member)
        assert np.all(np.abs(member.coefficients) <= cls.coefficient_envelope(256))
    assert not cls.contains(Signal(10.0 * np.ones(4)))


def test_smooth_to_signal_pads_and_guards():
    cls = SmoothClass(smoothness=1, amplitude=1.0)
    short = Signal(np.array([0.5, 0.25]))
    padded = cls.to_signal(short, 6)
    assert padded.ambient_dim == 6
    np.testing.assert_array_equal(padded.coefficients[:2], short.coefficients)
    assert np.all(padded.coefficients[2:] == 0.0)
    long = Signal(np.array([0.5, 0.0, 0.0, 0.1]))
    with pytest.raises(UsageError):
        cls.to_signal(long, 3)


def test_smooth_distance_is_coefficient_distance():
    cls = SmoothClass(smoothness=1, amplitude=1.0)
    a = Signal(np.array([1.0, 0.0, 2.0]))
    b = Signal(np.array([0.0, 0.0, 2.0, 2.0]))
    np.testing.assert_allclose(cls.distance(a, b), math.sqrt(5.0), rtol=1e-15)


def test_smooth_validation():
    with pytest.raises(UsageError):
        SmoothClass(smoothness=0, amplitude=1.0)
    with pytest.raises(UsageError):
        SmoothClass(smoothness=1, amplitude=0.0)


# ---------------------------------------------------------------------------
# Piecewise smooth class
# ---------------------------------------------------------------------------


def test_piecewise_samples_are_members():
    cls = PiecewiseSmoothClass(
        degree=1, max_jumps=2, deriv_bound=1.0, min_gap=0.5, level_bound=1.0
    )
    rng = np.random.default_rng(1)
    for _ in range(50):
        member = cls.sample(rng, 64)
        assert cls.contains(member)
        assert len(member.breakpoints) == 2
        assert float(np.min(np.diff(member.breakpoints))) >= 0.5
        for coeffs in member.piece_coefficients:
            assert len(coeffs) == 2
            assert abs(coeffs[0]) <= 1.0 and abs(coeffs[1]) <= 1.0


def test_piecewise_membership_rejections():
    cls = PiecewiseSmoothClass(
        degree=0, max_jumps=1, deriv_bound=1.0, min_gap=0.5, level_bound=1.0
    )
    too_high = PiecewiseDescription(
        breakpoints=(0.0,), piece_coefficients=((2.0,), (0.0,)), periodic=False
    )
    assert not cls.contains(too_high)
    too_many = PiecewiseDescription(
        breakpoints=(-1.0, 1.0),
        piece_coefficients=((0.0,), (0.5,), (0.0,)),
        periodic=False,
    )
    assert not cls.contains(too_many)
    wrong_flavour = PiecewiseDescription(
        breakpoints=(0.0,), piece_coefficients=((0.5,),), periodic=True
    )
    assert not cls.contains(wrong_flavour)


def test_piecewise_gap_infeasibility():
    with pytest.raises(UsageError):
        PiecewiseSmoothClass(
            degree=0, max_jumps=3, deriv_bound=1.0, min_gap=3.2, level_bound=1.0
        )
    nearly_full = PiecewiseSmoothClass(
        degree=0, max_jumps=2, deriv_bound=1.0, min_gap=2 * math.pi - 1e-9,
        level_bound=1.0,
    )
    with pytest.raises(UsageError):
        nearly_full.sample(np.random.default_rng(0), 16)


# ---------------------------------------------------------------------------
# Piecewise analytic class
# ---------------------------------------------------------------------------


def test_analytic_samples_are_members():
    cls = PiecewiseAnalyticClass(max_jumps=2, strip_width=0.5, amplitude=1.0)
    rng = np.random.default_rng(2)
    for _ in range(20):
        member = cls.sample(rng, 128)
        assert cls.contains(member)
        envelope = cls.coefficient_envelope(128)
        assert np.all(np.abs(member.smooth.coefficients) <= envelope)
        assert len(member.steps.breakpoints) == 2


def test_analytic_distance_matches_quadrature():
    cls = PiecewiseAnalyticClass(max_jumps=2, strip_width=0.8, amplitude=1.0)
    rng = np.random.default_rng(3)
    a = cls.sample(rng, 64)
    b = cls.sample(rng, 64)
    exact = cls.distance(a, b)
    numeric = _numeric_l2_distance(
        member_evaluator(cls, a),
        member_evaluator(cls, b),
        sorted(set(member_kinks(cls, a)) | set(member_kinks(cls, b))),
        points_per_piece=2**14 + 1,
    )
    np.testing.assert_allclose(exact, numeric, rtol=1e-7)
    assert cls.distance(a, a) == 0.0


# ---------------------------------------------------------------------------
# Warped class
# ---------------------------------------------------------------------------


def test_warp_map_fixes_endpoints_and_is_increasing():
    params = np.array([1.0, -1.0, 0.5])
    psi = warp_map(params)
    np.testing.assert_allclose(psi(np.array([-math.pi, math.pi])),
                               [-math.pi, math.pi], atol=1e-12)
    grid = np.linspace(-math.pi, math.pi, 4001)
    values = psi(grid)
    slopes = np.diff(values) / np.diff(grid)
    assert np.all(slopes > 0.65)  # derivative bound 0.7 up to discretization
    identity = warp_map(np.zeros(2))
    np.testing.assert_array_equal(identity(grid), grid)
    assert np.sum(np.arange(1, 17) * warp_amplitudes(16)) <= 0.3 + 1e-12


def test_warp_kink_preimages_invert_the_warp():
    base = PiecewiseSmoothClass(
        degree=1, max_jumps=2, deriv_bound=1.0, min_gap=0.8, level_bound=1.0
    )
    cls = WarpedClass(base=base, num_warp_params=2, lipschitz_bound=5.0)
    rng = np.random.default_rng(4)
    member = cls.sample(rng, 64)
    psi = warp_map(member.warp_params)
    preimages = cls._kink_preimages(member)
    np.testing.assert_allclose(
        psi(np.array(preimages)), member.base_member.breakpoints, atol=1e-10
    )


def test_warped_identity_params_reproduce_base_coefficients():
    base = SmoothClass(smoothness=2, amplitude=1.0)
    cls = WarpedClass(base=base, num_warp_params=2, lipschitz_bound=5.0)
    rng = np.random.default_rng(5)
    base_member = base.sample(rng, 32)
    member = WarpedMember(base_member=base_member, warp_params=np.zeros(2))
    analyzed = cls.to_signal(member, 32, points_per_piece=2**14 + 1)
    np.testing.assert_allclose(
        analyzed.coefficients, base_member.coefficients, atol=1e-7
    )
    assert cls.distance(member, member) == 0.0
    assert cls.contains(member)
    stretched = WarpedMember(base_member=base_member, warp_params=np.array([2.0, 0.0]))
    assert not cls.contains(stretched)


def test_warped_base_type_is_validated():
    with pytest.raises(UsageError):
        WarpedClass(base="not a class", num_warp_params=2, lipschitz_bound=1.0)


# ---------------------------------------------------------------------------
# Additive span class
# ---------------------------------------------------------------------------


def make_additive_class() -> AdditiveSpanClass:
    base = SmoothClass(smoothness=2, amplitude=1.0)
    components = (
        Signal(np.eye(8)[3] * 2.0),
        Signal(np.eye(8)[5] * 1.5),
    )
    return AdditiveSpanClass(base=base, components=components, coeff_bound=1.0)


def test_additive_to_signal_is_base_plus_span():
    cls = make_additive_class()
    rng = np.random.default_rng(6)
    member = cls.sample(rng, 16)
    combined = cls.to_signal(member, 16)
    base_part = cls.base.to_signal(member.base_member, 16)
    manual = base_part.coefficients.copy()
    manual[3] += member.weights[0] * 2.0
    manual[5] += member.weights[1] * 1.5
    np.testing.assert_allclose(combined.coefficients, manual, atol=1e-15)
    assert cls.contains(member)


def test_additive_distance_exact_for_orthogonal_components():
    cls = make_additive_class()
    rng = np.random.default_rng(7)
    a = cls.sample(rng, 16)
    b = cls.sample(rng, 16)
    direct = cls.distance(a, b)
    via_signals = float(
        np.linalg.norm(
            cls.to_signal(a, 16).coefficients - cls.to_signal(b, 16).coefficients
        )
    )
    np.testing.assert_allclose(direct, via_signals, rtol=1e-12)


def test_additive_validation():
    base = SmoothClass(smoothness=1, amplitude=1.0)
    with pytest.raises(UsageError):
        AdditiveSpanClass(base=base, components=(), coeff_bound=1.0)
    with pytest.raises(UsageError):
        AdditiveSpanClass(
            base=base, components=(Signal(np.ones(4)),), coeff_bound=0.0
        )


# ---------------------------------------------------------------------------
# Canonical class labels
# ---------------------------------------------------------------------------


def test_spec_strings_are_canonical():
    assert SmoothClass(2, 100.0).spec_string() == "smooth(k=2,K=100)"
    piecewise = PiecewiseSmoothClass(
        degree=1, max_jumps=2, deriv_bound=1.0, min_gap=0.5, level_bound=1.0
    )
    assert piecewise.spec_string() == "piecewise_smooth(k=1,s=2,K2=1,gap=0.5,A=1)"
    analytic = PiecewiseAnalyticClass(max_jumps=2, strip_width=0.5, amplitude=1.0)
    assert analytic.spec_string() == "piecewise_analytic(jumps=2,eta=0.5,K=1)"
    warped = WarpedClass(
        base=SmoothClass(2, 1.0), num_warp_params=2, lipschitz_bound=5.0
    )
    assert warped.spec_string() == "warped(base=smooth(k=2,K=1),s=2,L=5)"
    additive = make_additive_class()
    label = additive.spec_string()
    assert " " not in label and label == make_additive_class().spec_string()
    other = AdditiveSpanClass(
        base=additive.base,
        components=(Signal(np.ones(4)),),
        coeff_bound=1.0,
    )
    assert other.spec_string() != label


def test_sampling_is_deterministic_per_seed():
    cls = PiecewiseSmoothClass(
        degree=1, max_jumps=2, deriv_bound=1.0, min_gap=0.5, level_bound=1.0
    )
    first = cls.sample(np.random.default_rng(99), 32)
    second = cls.sample(np.random.default_rng(99), 32)
    assert np.array_equal(first.breakpoints, second.breakpoints)
    for left, right in zip(first.piece_coefficients, second.piece_coefficients):
        assert np.array_equal(left, right)


def test_tail_norm_behaviour_of_smooth_samples():
    cls = SmoothClass(smoothness=2, amplitude=10.0)
    rng = np.random.default_rng(8)
    member = cls.sample(rng, 1024)
    tails = [tail_norm(member, d) for d in (8, 32, 128, 512)]
    assert all(a >= b for a, b in zip(tails, tails[1:]))
    assert tails[-1] < tails[0] * 1e-2
