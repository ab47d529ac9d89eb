import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluxmag.inhomogeneity import (
    DispersionParams,
    QuadratureWarning,
    contrast_vs_remanence,
    echo_response,
    effective_contrast,
    ensemble_closed_form,
    ensemble_fringe,
    ensemble_signal,
    fringe_period,
)

PRACTICAL = DispersionParams()


def test_default_response_value():
    expected = 2 * math.pi * 28e9 * 0.5774 * 0.096 * (2 / math.pi) * 92.7e-6
    assert echo_response() == pytest.approx(expected, rel=1e-14)
    assert PRACTICAL.kappa == pytest.approx(5.755e5, rel=1e-3)


def test_delta_limit():
    d = PRACTICAL.replace(k=0.0, m=0.0)
    B = np.array([-3e-9, 0.0, 1e-9, 7e-9])
    expected = d.intrinsic()(d.G * B + d.B_r0)
    np.testing.assert_allclose(ensemble_signal(B, d), expected, rtol=1e-14, atol=1e-18)


def test_normalization():
    assert ensemble_signal(2e-9, PRACTICAL, intrinsic=lambda B: np.ones_like(B)) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("B_r0, m, k", [(25e-6, 0.109, 0.015), (2e-6, 0.109, 0.015), (10e-6, 0.3, 0.05)])
def test_closed_form_oracle(B_r0, m, k):
    d = PRACTICAL.replace(B_r0=B_r0, m=m, k=k)
    B = np.linspace(-2, 2, 41) * fringe_period(d)
    quad = ensemble_signal(B, d)
    exact = ensemble_closed_form(B, d)
    assert np.max(np.abs(quad - exact)) < 1e-6 * d.amplitude


def test_linear_in_intrinsic():
    d = PRACTICAL
    B = np.linspace(-1e-8, 1e-8, 7)
    f1 = lambda x: np.sin(3e5 * x)  # noqa: E731
    f2 = lambda x: np.cos(1e5 * x) ** 2  # noqa: E731
    lhs = ensemble_signal(B, d, intrinsic=lambda x: 2 * f1(x) - 0.5 * f2(x))
    rhs = 2 * ensemble_signal(B, d, intrinsic=f1) - 0.5 * ensemble_signal(B, d, intrinsic=f2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-15)


def test_node_doubling_converged_for_defaults():
    with warnings.catch_warnings():
        warnings.simplefilter("error", QuadratureWarning)
        ensemble_signal(np.linspace(-1e-8, 1e-8, 11), PRACTICAL)


def test_under_resolved_quadrature_is_reported():
    d = PRACTICAL.replace(m=0.5, B_r0=200e-6)
    with pytest.warns(QuadratureWarning, match="not converged"):
        ensemble_signal(0.0, d, nodes=4)


def test_practical_contrast_within_factor_1p5():
    C_eff = effective_contrast(PRACTICAL)
    assert 4.5e-3 / 1.5 <= C_eff <= 4.5e-3 * 1.5


def test_homogeneous_contrast_is_intrinsic():
    d = PRACTICAL.replace(B_r0=0.0, k=0.0)
    assert effective_contrast(d) == pytest.approx(d.C, rel=1e-9)


def test_reduction_at_zero_field_matches_formula():
    d = PRACTICAL
    ratio = ensemble_signal(0.0, d) / d.intrinsic()(d.B_r0)
    assert ratio == pytest.approx(math.exp(-0.5 * (d.kappa * d.m * d.B_r0) ** 2), rel=1e-6)


def test_contrast_vs_remanence():
    grid = np.linspace(0, 50e-6, 11)
    C = contrast_vs_remanence(PRACTICAL, grid)
    assert C[0] == pytest.approx(effective_contrast(PRACTICAL.replace(B_r0=0.0)))
    assert np.all(np.diff(C) <= 1e-15)
    with pytest.raises(ValueError):
        contrast_vs_remanence(PRACTICAL, [0.0, -1e-6])


def test_low_remanence_keeps_contrast():
    d = PRACTICAL.replace(B_r0=2e-6)
    c = contrast_vs_remanence(d, [2e-6])[0]
    no_remanence = effective_contrast(d.replace(B_r0=0.0))
    oracle = math.exp(-0.5 * (d.kappa * d.m * 2e-6) ** 2)
    assert c / no_remanence >= 0.95
    assert c / no_remanence == pytest.approx(oracle, rel=1e-3)


@settings(max_examples=5, deadline=None)
@given(scale=st.floats(0.1, 10))
def test_argmax_invariant_under_contrast_scaling(scale):
    B = np.linspace(-0.5, 0.5, 201) * fringe_period(PRACTICAL)
    S1 = ensemble_fringe(PRACTICAL, B)
    S2 = ensemble_fringe(PRACTICAL.replace(C=PRACTICAL.C * scale), B)
    assert np.argmax(S1) == np.argmax(S2)
    np.testing.assert_allclose(S2, scale * S1, rtol=1e-12, atol=1e-18)


def test_remanence_breaks_symmetry():
    probe = fringe_period(PRACTICAL) / 8
    plus, minus = ensemble_fringe(PRACTICAL, [probe, -probe])
    assert abs(plus - minus) > 1e-3 * PRACTICAL.amplitude


def test_invalid_dispersion():
    with pytest.raises(ValueError):
        DispersionParams(k=-0.1)
    with pytest.raises(ValueError):
        DispersionParams(B_r0=-1e-6)
