import math

import numpy as np
import pytest
from scipy import linalg

from pmlperiodic.fem import RowLayout
from pmlperiodic.geometry import CATALOG, TWO_PI, PmlProfile, ProfileKind, stretch
from pmlperiodic.ntd import (DiscreteResonanceError, MarchingOperator, NtdBlocks, TraceGrid,
                             assemble_cell_ntd, build_lateral_pair, double_ntd, lateral_ntd,
                             riccati_residual, riccati_solve)

FLAT = CATALOG["flat"]
PROFILE = PmlProfile(3.0, 1.0, 2.0)
K = 0.6
G2 = np.array([-1.0, 1.0]) / math.sqrt(3.0)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# discrete separable oracle --------------------------------------------------

def vertical_matrices(y, profile, k):
    """1D P1 matrices in x2 by the two-point rule, Dirichlet ends removed."""
    m = len(y)
    mass = np.zeros((m, m), complex)
    stiff = np.zeros((m, m), complex)
    for a in range(m - 1):
        h = y[a + 1] - y[a]
        t = 0.5 * (G2 + 1)
        al = profile.alpha(y[a] + h * t)
        phi = np.stack([1 - t, t])
        mass[a:a + 2, a:a + 2] += 0.5 * h * (phi * al) @ phi.T
        stiff[a:a + 2, a:a + 2] += np.sum(1 / al) * 0.5 * h / h**2 * np.array([[1, -1], [-1, 1]])
    return mass[1:-1, 1:-1], stiff[1:-1, 1:-1] - k**2 * mass[1:-1, 1:-1]


def vertical_modes(profile, k, n):
    y = RowLayout.build(n, profile.H, profile.top).heights(0.0)
    mass, op = vertical_matrices(y, profile, k)
    lam, v = linalg.eig(op, mass)
    v = v / np.sqrt(np.einsum("im,ij,jm->m", v, mass, v))
    return lam, v, mass


def x_green(lam, n, cells=1):
    """(K + lam M)^-1 columns at both ends for the uniform 1D grid of ``cells`` periods."""
    N = n * cells
    h = TWO_PI / n
    main = np.full(N + 1, 2 / h + 4 * lam * h / 6)
    main[[0, -1]] = 1 / h + 2 * lam * h / 6
    off = np.full(N, -1 / h + lam * h / 6)
    a = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    g = np.linalg.solve(a, np.eye(N + 1)[:, [0, N]])
    return g[0, 0], g[0, 1], g[N, 0], g[N, 1]


def modal_blocks(n, cells=1):
    lam, v, mass = vertical_modes(PROFILE, K, n)
    g = np.array([x_green(l, n, cells) for l in lam])
    proj = v.T @ mass

    def blk(col, sign):
        return sign * (v * g[:, col]) @ proj
    return blk(0, -1), blk(1, 1), blk(2, -1), blk(3, 1)


def modal_half_strip(n):
    lam, v, mass = vertical_modes(PROFILE, K, n)
    h = TWO_PI / n
    off = -1 / h + lam * h / 6
    diag = 2 / h + 4 * lam * h / 6
    # t + 1/t = -diag/off; keep the decaying root
    s = -diag / off
    t = (s - np.sqrt(s * s - 4 + 0j)) / 2
    t = np.where(np.abs(t) < 1, t, 1 / t)
    end = 1 / h + 2 * lam * h / 6
    n_plus = -(v / (end + off * t)) @ (v.T @ mass)
    return n_plus, t**n


@pytest.fixture(scope="module")
def flat64():
    grid = TraceGrid.build(FLAT, PROFILE, 64)
    return grid, assemble_cell_ntd(FLAT, PROFILE, K, grid, 64)


def test_flat_blocks_against_modal_oracle(flat64):
    _, blocks = flat64
    for got, ref in zip(blocks.blocks(), modal_blocks(64)):
        assert rel(got, ref) < 1e-6


def test_flat_lateral_ntd_against_modal_oracle(flat64):
    _, blocks = flat64
    op = riccati_solve(blocks)
    n_plus, mult = modal_half_strip(64)
    assert rel(lateral_ntd(blocks, op), n_plus) < 1e-6
    assert op.spectral_radius == pytest.approx(np.max(np.abs(mult)), rel=1e-6)


def test_flat_against_continuous_modes():
    # stretched Dirichlet strip: modes sin(j pi s / Y), beta_j^2 = k^2 - (j pi / Y)^2
    Y = stretch(PROFILE, PROFILE.top)
    errs = []
    for n in (32, 64):
        grid = TraceGrid.build(FLAT, PROFILE, n)
        blocks = assemble_cell_ntd(FLAT, PROFILE, K, grid, n)
        eig = np.linalg.eigvals(lateral_ntd(blocks, riccati_solve(blocks)))
        err = 0.0
        for j in (1, 2, 3):
            beta = np.sqrt(K**2 - (j * np.pi / Y) ** 2 + 0j)
            beta = beta if beta.imag > 0 else -beta
            exact = -1j / beta
            err = max(err, np.min(np.abs(eig - exact)) / abs(exact))
        errs.append(err)
    assert errs[0] < 2e-2
    assert errs[1] < errs[0] / 3


@pytest.mark.parametrize("name", ["flat", "gamma3"])
def test_mirror_symmetric_cells(name):
    spec = CATALOG[name]
    grid = TraceGrid.build(spec, PROFILE, 32)
    b = assemble_cell_ntd(spec, PROFILE, K, grid, 32)
    scale = np.linalg.norm(b.n11)
    assert np.linalg.norm(b.n22 + b.n11) < 1e-10 * scale
    assert np.linalg.norm(b.n21 + b.n12) < 1e-10 * scale


def test_reciprocity_sine_cell():
    spec = CATALOG["gamma1"]
    grid = TraceGrid.build(spec, PROFILE, 32)
    b = assemble_cell_ntd(spec, PROFILE, K, grid, 32)
    mb = grid.mass
    for blk in (b.n11, b.n22):
        s = mb @ blk
        assert np.linalg.norm(s - s.T) < 1e-12 * np.linalg.norm(s)
    assert np.linalg.norm(mb @ b.n12 + (mb @ b.n21).T) < 1e-12 * np.linalg.norm(mb @ b.n12)


@pytest.mark.parametrize("cells", [2, 4])
def test_doubling_matches_direct_assembly(cells):
    spec = CATALOG["gamma1"]
    grid = TraceGrid.build(spec, PROFILE, 32)
    level = assemble_cell_ntd(spec, PROFILE, K, grid, 32)
    for _ in range(int(math.log2(cells))):
        level = double_ntd(level)
    direct = assemble_cell_ntd(spec, PROFILE, K, grid, 32, cells=cells)
    assert level.level == direct.level == int(math.log2(cells))
    for got, ref in zip(level.blocks(), direct.blocks()):
        assert rel(got, ref) < 1e-8


def test_doubling_flat_against_modal_two_cells():
    grid = TraceGrid.build(FLAT, PROFILE, 32)
    two = double_ntd(assemble_cell_ntd(FLAT, PROFILE, K, grid, 32))
    for got, ref in zip(two.blocks(), modal_blocks(32, cells=2)):
        assert rel(got, ref) < 1e-8


def test_riccati_sine_cell():
    spec = CATALOG["gamma1"]
    grid = TraceGrid.build(spec, PROFILE, 32)
    blocks = assemble_cell_ntd(spec, PROFILE, K, grid, 32)
    op = riccati_solve(blocks)
    assert riccati_residual(blocks, op) < 1e-8
    assert op.spectral_radius < 1
    assert op.weighted_norm(grid) > 0


def test_marching_reconstructs_strip_solution():
    # g_{n+1} = R g_n must reproduce traces of one cell inside the half strip
    spec = CATALOG["gamma1"]
    grid = TraceGrid.build(spec, PROFILE, 32)
    blocks = assemble_cell_ntd(spec, PROFILE, K, grid, 32)
    op = riccati_solve(blocks)
    g0 = np.linspace(1.0, 2.0, grid.size) + 0.5j
    g1 = op.r @ g0
    g2 = op.r @ g1
    right_of_cell0 = blocks.n21 @ g0 + blocks.n22 @ g1
    left_of_cell1 = blocks.n11 @ g1 + blocks.n12 @ g2
    assert rel(right_of_cell0, left_of_cell1) < 1e-10


def test_lateral_pair_mirror_on_flat():
    pair = build_lateral_pair(FLAT, PROFILE, K, 32)
    assert rel(pair.plus, pair.minus) < 1e-12


def test_no_absorption_fails_loudly():
    # k > pi / 4 leaves one propagating mode in the height-4 strip, |multiplier| = 1
    prof = PmlProfile(3.0, 1.0, 2.0, ProfileKind.ZERO)
    grid = TraceGrid.build(FLAT, prof, 32)
    blocks = assemble_cell_ntd(FLAT, prof, 1.3, grid, 32)
    with pytest.raises(DiscreteResonanceError):
        riccati_solve(blocks, max_level=6)


def test_block_validation():
    a = np.eye(3)
    with pytest.raises(ValueError):
        NtdBlocks(a, a, a, np.eye(2))
    with pytest.raises(DiscreteResonanceError):
        NtdBlocks(a * np.nan, a, a, a)
    with pytest.raises(ValueError):
        lateral_ntd(NtdBlocks(a, a, a, a), MarchingOperator(np.eye(2)))


def test_grid_mismatch_rejected():
    grid = TraceGrid.build(FLAT, PROFILE, 32)
    with pytest.raises(ValueError):
        assemble_cell_ntd(FLAT, PROFILE, K, grid, 64)
