import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from pmlperiodic.geometry import (CATALOG, PmlProfile, ProfileKind, SurfaceKind, SurfaceSpec,
                                  p_tilde, sigma_eval, stretch, surface_height)


def hand_sigma(xi, sigma_max=2.0):
    # cubic blend written out from scratch: f1 = t^3/3 + t/6 + 1/2
    f1 = xi**3 / 3 + xi / 6 + Fraction(1, 2)
    f2 = 1 - f1
    return sigma_max * f1**6 / (f1**6 + f2**6)


def test_sigma_endpoints():
    prof = PmlProfile(3.0, 2.0)
    assert sigma_eval(prof, 3.0) == 0.0
    assert sigma_eval(prof, 2.5) == 0.0
    assert sigma_eval(prof, 4.0) == 2.0
    assert sigma_eval(prof, 5.0) == 2.0


def test_sigma_quarter_points():
    prof = PmlProfile(3.0, 2.0)
    # x2 = H + L/4 is the ramp midpoint, x2 = H + L/8 maps to xi = -1/2
    assert sigma_eval(prof, 3.5) == pytest.approx(1.0, abs=1e-15)
    assert sigma_eval(prof, 3.25) == pytest.approx(2 * 729 / (729 + 15625), rel=1e-14)
    assert sigma_eval(prof, 3.25) == pytest.approx(0.0891525009, rel=1e-9)


@given(st.floats(-1.0, 1.0), st.floats(0.1, 5.0), st.floats(0.5, 4.0))
@settings(max_examples=60, deadline=None)
def test_sigma_matches_hand_formula(xi, L, sigma_max):
    H = 3.0
    prof = PmlProfile(H, L, sigma_max)
    x2 = H + L / 4 * (1 + xi)
    # exact rational arithmetic on the float actually passed in
    exact = hand_sigma(4 * (Fraction(x2) - Fraction(H)) / Fraction(L) - 1, Fraction(sigma_max))
    assert sigma_eval(prof, x2) == pytest.approx(float(exact), rel=1e-13, abs=1e-300)


def test_sigma_flat_at_junctions():
    prof = PmlProfile(3.0, 2.0)
    eps = 1e-3
    # every derivative vanishes at both ends of the ramp
    assert sigma_eval(prof, 3.0 + eps) < eps**5
    assert 2.0 - sigma_eval(prof, 4.0 - eps) < eps**5


def test_sigma_monotone():
    prof = PmlProfile(3.0, 2.0)
    s = prof.sigma(np.linspace(2.0, 6.0, 2001))
    assert np.all(np.diff(s) >= 0)


@pytest.mark.parametrize("L", [0.5, 1.0, 2.0, 5.0])
def test_integral_against_scipy(L):
    prof = PmlProfile(3.0, L)
    ref, _ = integrate.quad(lambda t: sigma_eval(prof, t), 3.0, 3.0 + L / 2,
                            epsabs=1e-14, epsrel=1e-13)
    ref += 2.0 * L / 2
    assert prof.sigma_integral(3.0 + L) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("L, sigma_max", [(1.0, 2.0), (3.0, 1.0), (0.4, 5.0)])
def test_p_tilde_closed_form(L, sigma_max):
    # the ramp integrates to half of the plateau value by the f1 <-> f2 symmetry
    prof = PmlProfile(3.0, L, sigma_max)
    assert p_tilde(prof) == pytest.approx(L + 0.75j * L * sigma_max, rel=1e-13)


def test_p_tilde_other_kinds():
    assert p_tilde(PmlProfile(3.0, 2.0, 2.0, ProfileKind.CONSTANT)) == pytest.approx(2 + 4j)
    assert p_tilde(PmlProfile(3.0, 2.0, 2.0, "Zero")) == 2.0


def test_stretch():
    prof = PmlProfile(3.0, 2.0)
    assert stretch(prof, 1.7) == 1.7
    assert stretch(prof, 5.0) == pytest.approx(5.0 + 3.0j, rel=1e-13)
    assert stretch(prof, 5.0) - 3.0 == pytest.approx(p_tilde(prof))


def test_profile_validation():
    with pytest.raises(ValueError):
        PmlProfile(3.0, 0.0)
    with pytest.raises(ValueError):
        PmlProfile(3.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        PmlProfile(3.0, 1.0, 2.0, "Quadratic")


def test_catalog_surfaces():
    x = np.array([-3 * np.pi / 2, -np.pi / 2, 0.5, np.pi / 2, 5 * np.pi / 2])
    assert np.allclose(CATALOG["gamma1"].height(x), np.sin(x))
    flat_sine = CATALOG["gamma2"].height(x)
    assert flat_sine[1] == flat_sine[2] == flat_sine[3] == 0.0
    assert flat_sine[0] == pytest.approx(1.0) and flat_sine[4] == pytest.approx(1.0)
    assert surface_height(CATALOG["flat"], 1.0) == 0.0


def test_binary_grating_widened_tooth():
    g = CATALOG["gamma3"]
    # periodic tooth |x1| <= pi/2; in the central period it widens to 3 pi / 4
    assert g.base_height(2.0) == 0.0 and g.height(2.0) == 1.0
    assert g.height(2.0 + 2 * np.pi) == 0.0
    assert g.height(0.0) == 1.0 and g.height(3.0) == 0.0


def test_obstacle():
    g4 = CATALOG["gamma4"]
    assert g4.obstacle is not None
    assert g4.in_obstacle(0.0, 2.8) and not g4.in_obstacle(0.0, 1.5)
    assert not CATALOG["gamma1"].in_obstacle(0.0, 2.8)
    with pytest.raises(ValueError):
        SurfaceSpec(SurfaceKind.SINE, obstacle=CATALOG["gamma4"].obstacle)
    with pytest.raises(ValueError):
        SurfaceSpec(SurfaceKind.SINE, period=math.pi)
