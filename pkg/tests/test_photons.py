import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from fluxmag.constants import DEFAULT_CONSTANTS, PhysicalConstants
from fluxmag.photons import (
    CURRENT_OPTICS,
    IMPROVED_OPTICS,
    OpticalParams,
    photon_density,
    photon_number,
    pl_rate,
)


def test_pl_rate_trivial():
    assert pl_rate(0.0, 44.8e3, 650e6) == 0.0
    assert pl_rate(650e6, 44.8e3, 650e6) == pytest.approx(22.4e3)


def test_pl_rate_reference_value():
    # 44.8e3 * 2.88 / (2.88 + 6.5) by exact rational arithmetic.
    assert pl_rate(2.88e8, 44.8e3, 6.5e8) == pytest.approx(13755.2238805970149, rel=1e-14)


def test_pl_rate_domain():
    with pytest.raises(ValueError):
        pl_rate(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        pl_rate(-1.0, 1.0, 1.0)


@pytest.mark.parametrize("ppm, beta", [(0.3, 528.0), (0.019, 33.44)])
def test_attenuation_consistency(ppm, beta):
    assert DEFAULT_CONSTANTS.absorption_coefficient(ppm) == pytest.approx(beta, rel=0.005)


def test_current_photon_number():
    assert photon_number(CURRENT_OPTICS) == pytest.approx(7.0e9, rel=0.10)


def test_improved_photon_number():
    assert photon_number(IMPROVED_OPTICS) == pytest.approx(2.6e10, rel=0.10)


def _closed_form(o, consts=DEFAULT_CONSTANTS):
    # Integral of I/(I + I_s) with I = I0 exp(-beta L) is
    # (1/beta) ln((I0 + I_s) / (I0 exp(-beta L) + I_s)).
    b = o.beta(consts)
    I0 = o.I0
    integral = math.log((I0 + o.I_s) / (I0 * math.exp(-b * o.L_max) + o.I_s)) / b
    return o.R_inf * integral * o.t_r * consts.ppm_to_density(o.n_nv) * math.pi * o.r**2


@pytest.mark.parametrize("optics", [CURRENT_OPTICS, IMPROVED_OPTICS])
def test_quadrature_matches_closed_form(optics):
    assert photon_number(optics) == pytest.approx(_closed_form(optics), rel=1e-10)


def test_quadrature_matches_trapezoid_oracle():
    o = CURRENT_OPTICS
    L = np.linspace(0.0, o.L_max, 1_000_001)
    trap = trapezoid(photon_density(L, o), L)
    assert photon_number(o) == pytest.approx(trap, rel=1e-8)


def test_unattenuated_beam():
    o = CURRENT_OPTICS
    expected = pl_rate(o.I0, o.R_inf, o.I_s) * o.t_r * DEFAULT_CONSTANTS.ppm_to_density(o.n_nv) \
        * math.pi * o.r**2 * o.L_max
    assert photon_number(o, beta=0.0) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("name, up", [
    ("P_laser", True), ("t_r", True), ("L_max", True), ("R_inf", True), ("n_nv", True), ("I_s", False),
])
def test_monotonicity(name, up):
    base = photon_number(CURRENT_OPTICS)
    changed = photon_number(CURRENT_OPTICS.replace(**{name: getattr(CURRENT_OPTICS, name) * 1.5}))
    assert (changed > base) if up else (changed < base)


def test_spot_area_independent_of_radius():
    o = CURRENT_OPTICS
    assert o.spot_area != pytest.approx(math.pi * o.r**2)
    assert o.I0 == pytest.approx(0.375 / 1.3e-9)


def test_invalid_optics():
    with pytest.raises(ValueError, match="I_s"):
        OpticalParams(I_s=0.0)
    with pytest.raises(ValueError):
        PhysicalConstants(sigma_nv=0.0)
