import math

import numpy as np
import pytest
from sklearn.base import clone

from oracles import d_nodes, flat_h1_error
from pmlperiodic.geometry import CATALOG, TWO_PI, PmlProfile, stretch
from pmlperiodic.solver import (DEFAULT_D, FieldGrid, PmlScatteringSolver, Rect, SolveConfig,
                                central_mesh, cutoff, extract_source, green, h1_relative_error,
                                solve_scattering, source_forcing)

FLAT = CATALOG["flat"]
PROF = PmlProfile(3.0, 2.0)


def config(surface="flat", k=0.6, n=32, **kw):
    return SolveConfig(CATALOG[surface], kw.pop("profile", PROF), k, resolution=n, **kw)


@pytest.fixture(scope="module")
def flat32():
    return solve_scattering(config())


@pytest.fixture(scope="module")
def flat64():
    return solve_scattering(config(n=64))


def test_flat_matches_exact_pml_field(flat32, flat64):
    nodes = d_nodes(flat32)
    e32, e64 = flat_h1_error(flat32, nodes), flat_h1_error(flat64, nodes)
    assert e64 < 1e-2
    assert 1.7 < math.log2(e32 / e64) < 2.6


def test_dirichlet_rows_are_zero(flat32):
    assert np.all(flat32.total[:, 0] == 0)
    assert np.all(flat32.total[:, -1] == 0)
    assert np.all(np.isfinite(flat32.total))


@pytest.mark.parametrize("surface", ["flat", "gamma3"])
def test_mirror_symmetric_geometry_gives_even_field(surface):
    f = solve_scattering(config(surface, k=1.5))
    assert np.allclose(f.x1, -f.x1[::-1])
    scale = np.max(np.abs(f.remainder))
    assert np.max(np.abs(f.remainder - f.remainder[::-1])) < 1e-9 * scale


def test_lateral_truncation_is_exact_for_the_discrete_problem():
    one = solve_scattering(config("gamma1", k=1.5))
    two = solve_scattering(config("gamma1", k=1.5, lateral_half_width=2 * TWO_PI))
    assert h1_relative_error(one, two) < 1e-8


def test_cutoff_radius_self_consistency():
    # two cutoff pairs converge to the same total field
    nodes = None
    diffs = []
    for n in (32, 64):
        a = solve_scattering(config(n=n))
        b = solve_scattering(config(n=n, cutoff_radii=(0.3, 0.45)))
        nodes = nodes or d_nodes(a)
        diffs.append(abs(flat_h1_error(a, nodes) - flat_h1_error(b, nodes)))
        assert h1_relative_error(a, b) < 0.5
    assert diffs[1] < diffs[0] / 3


def test_pml_attenuates_field():
    f = solve_scattering(config("gamma1", k=1.5, n=32))
    y = f.y[0]
    j_h = np.argmin(np.abs(y - PROF.H))
    j_mid = np.argmin(np.abs(y - (PROF.H + PROF.L / 2)))
    ratio = np.max(np.abs(f.total[:, j_mid])) / np.max(np.abs(f.total[:, j_h]))
    assert ratio < 10 * math.exp(-1.5 * stretch(PROF, y[j_mid]).imag)
    assert ratio < 1


def test_forcing_is_helmholtz_of_cut_off_green():
    cfg = config()
    forcing = source_forcing(cfg)
    h = 1e-3

    def chi_g(x1, x2):
        r = np.hypot(x1, x2 - 1.5)
        return cutoff(r, *cfg.cutoff_radii)[0] * green(cfg.k, r)

    for r, ang in [(0.35, 0.3), (0.5, 2.0), (0.7, -1.0)]:
        x1, x2 = r * math.cos(ang), 1.5 + r * math.sin(ang)
        lap = (chi_g(x1 + h, x2) + chi_g(x1 - h, x2) + chi_g(x1, x2 + h)
               + chi_g(x1, x2 - h) - 4 * chi_g(x1, x2)) / h**2
        ref = lap + cfg.k**2 * chi_g(x1, x2)
        assert forcing(np.array(x1), np.array(x2)) == pytest.approx(ref, rel=1e-5, abs=1e-6)


def test_forcing_vanishes_off_the_ring():
    forcing = source_forcing(config())
    assert forcing(np.array(0.0), np.array(1.6)) == 0
    assert forcing(np.array(0.0), np.array(2.4)) == 0
    assert forcing(np.array(1.0), np.array(1.5)) == 0


def test_extract_source_singular_part():
    cfg = config()
    mesh = central_mesh(cfg)
    src = extract_source(cfg, mesh)
    xs, ys = mesh.points()
    far = np.hypot(xs, ys - 1.5).ravel() >= cfg.cutoff_radii[1]
    assert np.all(src.singular.ravel()[far] == 0)
    assert np.all(src.load[far & (np.hypot(xs, ys - 1.5).ravel() > 1.2)] == 0)


def test_h1_error_trivial_cases(flat32):
    assert h1_relative_error(flat32, flat32) == 0.0
    doubled = FieldGrid(flat32.x1, flat32.y, 2 * flat32.total, 2 * flat32.remainder,
                        2 * flat32.singular, flat32.config)
    assert h1_relative_error(doubled, flat32) == pytest.approx(1.0, rel=1e-12)


def test_h1_error_bump_against_hand_value():
    # u_ref = 1 on D, bump b = sin(pi s) sin(pi t) on D = [-0.3, 0.3] x [1.2, 1.8]
    cfg = config()
    x1 = np.linspace(-0.45, 0.45, 361)
    x2 = np.linspace(1.05, 1.95, 361)
    y = np.broadcast_to(x2, (x1.size, x2.size)).copy()
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    bump = np.sin(np.pi * (X1 + 0.3) / 0.6) * np.sin(np.pi * (X2 - 1.2) / 0.6)
    ones = np.ones_like(bump, dtype=complex)
    zero = np.zeros_like(ones)
    ref = FieldGrid(x1, y, ones, ones, zero, cfg)
    u = FieldGrid(x1, y, ones + bump, ones + bump, zero, cfg)
    hand = math.sqrt(0.09 * (1 + 2 * (math.pi / 0.6) ** 2) / 0.36)
    assert h1_relative_error(u, ref, DEFAULT_D) == pytest.approx(hand, rel=1e-3)


def test_h1_error_vanishing_reference(flat32):
    zero = FieldGrid(flat32.x1, flat32.y, 0 * flat32.total, 0 * flat32.total,
                     0 * flat32.total, flat32.config)
    with pytest.raises(ValueError):
        h1_relative_error(flat32, zero)


def test_h1_error_needs_congruent_grids(flat32, flat64):
    with pytest.raises(ValueError):
        h1_relative_error(flat32, flat64)


@pytest.mark.parametrize("kw", [
    dict(lateral_half_width=5.0),
    dict(source=(1.5, 0.5)),
    dict(source=(0.0, 3.5)),
    dict(source=(0.0, 1.0), cutoff_radii=(0.2, 0.8)),
    dict(cutoff_radii=(0.5, 0.2)),
    dict(region_d=Rect((-0.3, 0.3), (1.0, 1.8))),
    dict(region_d=Rect((-0.3, 0.3), (1.2, 3.2))),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        config("gamma1", **kw)


def test_auto_cutoff_radii_fit_the_geometry():
    assert config().cutoff_radii == (0.2, 0.8)
    r0, r1 = config("gamma3").cutoff_radii
    # grating top at x2 = 1, half a unit below the source
    assert r1 == pytest.approx(0.45) and r0 == pytest.approx(r1 / 4)


def test_obstacle_surface_runs():
    cfg = SolveConfig(CATALOG["gamma4"], PmlProfile(4.0, 1.0), 1.5, resolution=32)
    f = solve_scattering(cfg)
    mesh = central_mesh(cfg)
    assert np.all(f.total.ravel()[mesh.dirichlet.ravel()] == 0)
    assert mesh.dirichlet[:, 1:-1].any()


def test_estimator_front_end(flat32):
    est = PmlScatteringSolver(surface="flat", k=0.6, L=2.0, resolution=32)
    assert clone(est).get_params()["k"] == 0.6
    est.fit()
    cols, rows = flat32.block(DEFAULT_D)
    pts = np.array([[flat32.x1[i], flat32.y[i, j]] for i in cols[:2] for j in rows[:2]])
    ref = np.array([flat32.total[i, j] for i in cols[:2] for j in rows[:2]])
    assert np.allclose(est.predict(pts), ref, rtol=1e-10, atol=1e-14)
    assert est.score(pts, ref) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ValueError):
        PmlScatteringSolver(surface="moon").fit()
