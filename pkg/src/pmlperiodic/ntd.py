"""Lateral Neumann-to-Dirichlet operators of periodic PML strips.

Sign convention: every block maps x1-derivatives (not outward normal
derivatives) to traces, so for a left-right symmetric cell n22 = -n11 and
n21 = -n12.  With Mb the alpha-weighted trace mass, Mb @ n11 and Mb @ n22 are
symmetric and Mb @ n12 = -(Mb @ n21).T.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import splu

from .fem import RowLayout, StripMesh, edge_mass, helmholtz_matrix
from .geometry import TWO_PI, PmlProfile, SurfaceSpec


class DiscreteResonanceError(RuntimeError):
    """A cell or doubling system is singular at this wavenumber and resolution."""


@dataclass(frozen=True, eq=False)
class TraceGrid:
    """Free nodes of a lateral cell boundary, their trapezoid weights and alpha-mass."""

    nodes: np.ndarray
    weights: np.ndarray
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.nodes) < 16:
            raise ValueError(f"trace grid needs at least 16 nodes, got {len(self.nodes)}")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("trace nodes must increase strictly")

    @classmethod
    def build(cls, spec: SurfaceSpec, profile: PmlProfile, resolution):
        layout = RowLayout.build(resolution, profile.H, profile.top)
        y = layout.heights(float(spec.base_height(0.0)))
        full_weights = np.zeros_like(y)
        gaps = np.diff(y)
        full_weights[:-1] += 0.5 * gaps
        full_weights[1:] += 0.5 * gaps
        mass = edge_mass(y, profile)[1:-1, 1:-1]
        return cls(y[1:-1], full_weights[1:-1], mass)

    @property
    def size(self):
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class NtdBlocks:
    """[u_left; u_right] = [[n11, n12], [n21, n22]] @ [g_left; g_right] over 2**level cells."""

    n11: np.ndarray
    n12: np.ndarray
    n21: np.ndarray
    n22: np.ndarray
    level: int = 0

    def __post_init__(self):
        shape = self.n11.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError("NtD blocks must be square")
        for b in (self.n12, self.n21, self.n22):
            if b.shape != shape:
                raise ValueError("NtD blocks must share one shape")
        if not all(np.all(np.isfinite(b)) for b in self.blocks()):
            raise DiscreteResonanceError("non-finite NtD block entries")

    def blocks(self):
        return self.n11, self.n12, self.n21, self.n22

    @property
    def size(self):
        return self.n11.shape[0]

    def full(self):
        return np.block([[self.n11, self.n12], [self.n21, self.n22]])


@dataclass(frozen=True, eq=False)
class MarchingOperator:
    """Map g_n -> g_{n+1} of lateral derivative data between consecutive cell edges."""

    r: np.ndarray
    levels: int = 0

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.r))))

    def weighted_norm(self, grid: TraceGrid):
        """Operator 2-norm in the trapezoid-weighted trace inner product."""
        s = np.sqrt(grid.weights)
        return float(np.linalg.norm(s[:, None] * self.r / s[None, :], 2))


def cell_surface(spec: SurfaceSpec, mirrored=False):
    """Height function of the periodic cells right of the central region.

    The left semiwaveguide is handled as a right one after x1 -> -x1.
    """
    if mirrored:
        return lambda x1: spec.base_height(-np.asarray(x1))
    return spec.base_height


def assemble_cell_ntd(spec: SurfaceSpec, profile: PmlProfile, k, grid: TraceGrid,
                      resolution, *, mirrored=False, cells=1) -> NtdBlocks:
    """Blocks of ``cells`` consecutive periods by one sparse LU and 2m solves."""
    layout = RowLayout.build(resolution, profile.H, profile.top)
    x1 = np.linspace(0.0, TWO_PI * cells, resolution * cells + 1)
    mesh = StripMesh.build(x1, cell_surface(spec, mirrored), layout)
    left, right = mesh.edge_nodes(0), mesh.edge_nodes(-1)
    if len(left) != grid.size or not np.allclose(mesh.y[0, 1:-1], grid.nodes):
        raise ValueError("trace grid does not match the cell mesh")
    free = mesh.free
    position = np.full(mesh.y.size, -1)
    position[free] = np.arange(len(free))
    matrix = helmholtz_matrix(mesh, profile, k)[free][:, free].tocsc()
    try:
        lu = splu(matrix)
    except RuntimeError as exc:
        raise DiscreteResonanceError(
            f"cell system singular at k={k}, resolution={resolution}; "
            "change the resolution or the PML profile"
        ) from exc
    m = grid.size
    rhs = np.zeros((len(free), 2 * m), dtype=complex)
    rhs[position[left], :m] = -grid.mass
    rhs[position[right], m:] = grid.mass
    sol = lu.solve(rhs)
    u_left, u_right = sol[position[left]], sol[position[right]]
    level = int(np.log2(cells)) if cells & (cells - 1) == 0 else 0
    return NtdBlocks(u_left[:, :m], u_left[:, m:], u_right[:, :m], u_right[:, m:], level)


def _solve(a, b, what):
    try:
        with np.errstate(all="raise"):
            return linalg.solve(a, b, check_finite=True)
    except (linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise DiscreteResonanceError(f"singular {what}") from exc


def double_ntd(blocks: NtdBlocks, right: NtdBlocks | None = None) -> NtdBlocks:
    """Join two stacks at their shared edge; ``right`` defaults to a copy of ``blocks``."""
    a, b = blocks, blocks if right is None else right
    # shared-edge derivative g = X (b12 g_R - a21 g_L), X = (a22 - b11)^-1
    x_a21, x_b12 = np.hsplit(_solve(a.n22 - b.n11, np.hstack([a.n21, b.n12]),
                                    "interior elimination matrix"), 2)
    return NtdBlocks(
        a.n11 - a.n12 @ x_a21,
        a.n12 @ x_b12,
        -b.n21 @ x_a21,
        b.n22 + b.n21 @ x_b12,
        max(a.level, b.level) + 1,
    )


def riccati_solve(level0: NtdBlocks, max_level=12, tol=1e-12) -> MarchingOperator:
    """Marching operator R with n21 + n22 R = n11 R + n12 R^2.

    Doubles until |n12| |n21| < tol at level M, sets R^(2^(M+1)) = 0 and runs
    R^(2^m) = (n22 - n11)^-1 (n12 R^(2^(m+1)) - n21) back to m = 0.
    """
    levels = [level0]
    while np.linalg.norm(levels[-1].n12, 2) * np.linalg.norm(levels[-1].n21, 2) >= tol:
        if len(levels) > max_level:
            raise DiscreteResonanceError(
                f"doubling did not decouple within {max_level} levels; "
                "the PML absorbs too weakly for this wavenumber"
            )
        levels.append(double_ntd(levels[-1]))
    r = np.zeros_like(level0.n11)
    for blk in reversed(levels):
        r = _solve(blk.n22 - blk.n11, blk.n12 @ r - blk.n21, "Riccati step matrix")
    out = MarchingOperator(r, len(levels) - 1)
    if out.spectral_radius >= 1.0:
        raise DiscreteResonanceError(
            f"marching operator has spectral radius {out.spectral_radius:.6f} >= 1"
        )
    return out


def riccati_residual(level0: NtdBlocks, op: MarchingOperator):
    """|n21 + n22 R - n11 R - n12 R^2| / |n21| in the 2-norm."""
    n11, n12, n21, n22 = level0.blocks()
    r = op.r
    res = n21 + n22 @ r - n11 @ r - n12 @ r @ r
    return float(np.linalg.norm(res, 2) / np.linalg.norm(n21, 2))


def lateral_ntd(level0: NtdBlocks, op: MarchingOperator):
    """NtD of the semi-infinite strip at its first edge: n11 + n12 R."""
    if op.r.shape != level0.n11.shape:
        raise ValueError("marching operator and blocks differ in size")
    return level0.n11 + level0.n12 @ op.r


@dataclass(frozen=True, eq=False)
class LateralPair:
    grid: TraceGrid
    plus: np.ndarray
    minus: np.ndarray
    r_plus: MarchingOperator
    r_minus: MarchingOperator


def build_lateral_pair(spec: SurfaceSpec, profile: PmlProfile, k, resolution,
                       max_level=12, tol=1e-12) -> LateralPair:
    """NtD operators of the right strip and of the mirrored left strip."""
    grid = TraceGrid.build(spec, profile, resolution)
    ops = {}
    for mirrored in (False, True):
        blocks = assemble_cell_ntd(spec, profile, k, grid, resolution, mirrored=mirrored)
        r = riccati_solve(blocks, max_level, tol)
        ops[mirrored] = (lateral_ntd(blocks, r), r)
    return LateralPair(grid, ops[False][0], ops[True][0], ops[False][1], ops[True][1])
