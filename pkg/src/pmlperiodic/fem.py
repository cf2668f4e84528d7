"""Bilinear finite elements on column-aligned strip meshes.

A strip mesh has vertical node columns at uniform x1 spacing 2*pi/n and, in
every column, the same number of rows.  Below x2 = SHEAR_TOP the rows are
sheared to follow the surface; above it they are horizontal lines shared by
all columns, so the PML band and the source region are tensor grids.

The weak form is int(A grad u . grad v) - k^2 int(alpha u v) with
A = diag(alpha, 1/alpha), which gives complex-symmetric matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .geometry import PmlProfile

SHEAR_TOP = 1.2
# Rows between SHEAR_TOP and SOURCE_ZONE_TOP are spaced 0.9/q with q not a
# multiple of 3, which keeps x2 = 1.5 strictly between rows at every resolution.
SOURCE_ZONE_TOP = 2.1
# PML rows are this many times denser than the physical rows; the discrete
# layer reflects like (h sigma')^2, which otherwise floors the error vs L.
PML_REFINE = 4

_G2 = np.array([-1.0, 1.0]) / math.sqrt(3.0)
_W2 = np.ones(2)
# reference corners in the order (i, j), (i+1, j), (i+1, j+1), (i, j+1)
_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def row_spacing(resolution):
    q = max(1, round(5 * resolution / 32))
    if q % 3 == 0:
        q += 1
    return q, 0.9 / q


@dataclass(frozen=True)
class RowLayout:
    """Reference rows: shear parameters s in [0, SHEAR_TOP] and fixed heights above."""

    shear: np.ndarray
    fixed: np.ndarray

    @classmethod
    def build(cls, resolution, H, top, pml_refine=PML_REFINE):
        if resolution < 8:
            raise ValueError(f"resolution must be at least 8, got {resolution}")
        if H < SOURCE_ZONE_TOP - 1e-12:
            raise ValueError(f"H must be at least {SOURCE_ZONE_TOP}, got {H}")
        q, hs = row_spacing(resolution)
        nb = max(2, math.ceil(SHEAR_TOP / hs - 1e-9))
        shear = np.linspace(0.0, SHEAR_TOP, nb + 1)
        source_zone = SHEAR_TOP + hs * np.arange(1, q + 1)
        n_mid = max(1, round((H - SOURCE_ZONE_TOP) / hs)) if H > SOURCE_ZONE_TOP + 1e-12 else 0
        middle = np.linspace(SOURCE_ZONE_TOP, H, n_mid + 1)[1:]
        n_pml = max(4, math.ceil(pml_refine * (top - H) / hs - 1e-9))
        pml = np.linspace(H, top, n_pml + 1)[1:]
        return cls(shear, np.concatenate([source_zone, middle, pml]))

    @property
    def n_rows(self):
        return len(self.shear) + len(self.fixed)

    def heights(self, h):
        """Node heights of a column whose surface point is at height h (< SHEAR_TOP)."""
        h = np.asarray(h, dtype=float)
        if np.any(h >= SHEAR_TOP):
            raise ValueError(f"surface must stay below x2 = {SHEAR_TOP}")
        low = self.shear + np.multiply.outer(h, 1.0 - self.shear / SHEAR_TOP)
        fixed = np.broadcast_to(self.fixed, h.shape + self.fixed.shape)
        return np.concatenate([low, fixed], axis=-1)


@dataclass(frozen=True)
class StripMesh:
    """Columns x1[i] with node heights y[i, j]; ``dirichlet`` marks pinned nodes."""

    x1: np.ndarray
    y: np.ndarray
    dirichlet: np.ndarray

    @classmethod
    def build(cls, x1, surface, layout: RowLayout, obstacle=None):
        x1 = np.asarray(x1, dtype=float)
        y = layout.heights(surface(x1))
        pinned = np.zeros(y.shape, bool)
        pinned[:, 0] = pinned[:, -1] = True
        if obstacle is not None:
            pinned |= obstacle.contains(x1[:, None], y)
        return cls(x1, y, pinned)

    @property
    def shape(self):
        return self.y.shape

    def node(self, i, j):
        return np.asarray(i) * self.shape[1] + np.asarray(j)

    @property
    def free(self):
        return np.flatnonzero(~self.dirichlet.ravel())

    def edge_nodes(self, i):
        """Free node numbers of column i, bottom to top."""
        rows = np.flatnonzero(~self.dirichlet[i])
        return self.node(i, rows)

    def points(self):
        return np.broadcast_to(self.x1[:, None], self.shape), self.y


def _shape(xi, eta):
    return 0.25 * (1 + xi * _CORNERS[:, 0]) * (1 + eta * _CORNERS[:, 1])


def _shape_grad(xi, eta):
    d_xi = 0.25 * _CORNERS[:, 0] * (1 + eta * _CORNERS[:, 1])
    d_eta = 0.25 * _CORNERS[:, 1] * (1 + xi * _CORNERS[:, 0])
    return d_xi, d_eta


def _element_geometry(mesh: StripMesh, xi, eta):
    """Physical x1, x2, shape gradients and det J at one reference point, all elements."""
    x, y = mesh.x1, mesh.y
    hx = np.diff(x)[:, None]
    corners = np.stack([y[:-1, :-1], y[1:, :-1], y[1:, 1:], y[:-1, 1:]], axis=-1)
    n = _shape(xi, eta)
    d_xi, d_eta = _shape_grad(xi, eta)
    a = 0.5 * hx
    c = corners @ d_xi
    d = corners @ d_eta
    if np.any(d <= 0):
        raise ValueError("degenerate strip mesh: rows cross")
    grad_y = d_eta[None, None, :] / d[..., None]
    grad_x = (d_xi[None, None, :] - c[..., None] * grad_y) / a[..., None]
    x_phys = x[:-1, None] + (xi + 1) * a
    y_phys = corners @ n
    return x_phys, y_phys, n, grad_x, grad_y, a * d


def _scatter(mesh: StripMesh, local):
    """COO assembly of per-element 4x4 matrices into the full node numbering."""
    ncol, nrow = mesh.shape
    i, j = np.meshgrid(np.arange(ncol - 1), np.arange(nrow - 1), indexing="ij")
    idx = np.stack([mesh.node(i, j), mesh.node(i + 1, j),
                    mesh.node(i + 1, j + 1), mesh.node(i, j + 1)], axis=-1)
    rows = np.repeat(idx[..., :, None], 4, axis=-1)
    cols = np.repeat(idx[..., None, :], 4, axis=-2)
    size = ncol * nrow
    return sparse.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=(size, size)
    ).tocsr()


def helmholtz_matrix(mesh: StripMesh, profile: PmlProfile, k):
    """Full-node matrix of int(A grad u . grad v - k^2 alpha u v)."""
    local = 0
    for gx, wx in zip(_G2, _W2):
        for gy, wy in zip(_G2, _W2):
            _, y_phys, n, grad_x, grad_y, det = _element_geometry(mesh, gx, gy)
            alpha = profile.alpha(y_phys)[..., None, None]
            w = (wx * wy * det)[..., None, None]
            local = local + w * (
                alpha * grad_x[..., :, None] * grad_x[..., None, :]
                + grad_y[..., :, None] * grad_y[..., None, :] / alpha
                - k**2 * alpha * n[:, None] * n[None, :]
            )
    return _scatter(mesh, local)


def load_vector(mesh: StripMesh, func, order=4):
    """int func(x1, x2) v over the mesh, by order x order Gauss points per element."""
    g, wg = np.polynomial.legendre.leggauss(order)
    ncol, nrow = mesh.shape
    out = np.zeros(ncol * nrow, dtype=complex)
    i, j = np.meshgrid(np.arange(ncol - 1), np.arange(nrow - 1), indexing="ij")
    idx = np.stack([mesh.node(i, j), mesh.node(i + 1, j),
                    mesh.node(i + 1, j + 1), mesh.node(i, j + 1)], axis=-1)
    for gx, wx in zip(g, wg):
        for gy, wy in zip(g, wg):
            x_phys, y_phys, n, _, _, det = _element_geometry(mesh, gx, gy)
            vals = np.asarray(func(np.broadcast_to(x_phys, y_phys.shape), y_phys), complex)
            contrib = (wx * wy * det * vals)[..., None] * n
            np.add.at(out, idx.ravel(), contrib.ravel())
    return out


def edge_mass(heights, profile: PmlProfile):
    """alpha-weighted P1 mass matrix along a vertical edge with the given node heights."""
    y = np.asarray(heights, dtype=float)
    m = len(y)
    out = np.zeros((m, m), dtype=complex)
    # same two-point rule as the element mass, so the strip matrix factors
    # exactly as a Kronecker sum on tensor meshes
    g, wg = _G2, _W2
    for a in range(m - 1):
        h = y[a + 1] - y[a]
        t = 0.5 * (g + 1)
        alpha = profile.alpha(y[a] + h * t)
        phi = np.stack([1 - t, t])
        block = 0.5 * h * np.einsum("q,aq,bq->ab", wg * alpha, phi, phi)
        out[a:a + 2, a:a + 2] += block
    return out
