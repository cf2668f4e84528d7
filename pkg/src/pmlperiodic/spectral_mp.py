"""Extended-precision evaluation of the first-order PML error w1.

Off the half-integer wavenumbers w1 decays like exp(-c |p_tilde|), while the
xi-integrand stays of size |p_tilde|^-3 in narrow windows at the branch points.
The windows cancel to all algebraic orders, so a double-precision quadrature
bottoms out near 1e-18.  Here the same literal Fourier formulas are integrated
with mpmath at a working precision chosen from the expected magnitude.
"""
from __future__ import annotations

import math

import mpmath

from .spectral import OracleParams

# Beyond max|branch point| + _TAIL every term carries exp(-2 Im(m p_tilde)) with
# |m| > _TAIL, far below any value resolved here.
_TAIL = 2.0


def _mu(ctx, xi, k, s=0):
    return ctx.sqrt((k - s - xi) * (k + s + xi))


def _q(ctx, m, p):
    return ctx.exp(2j * m * p)


def _e_over_sin(ctx, m, p):
    q = _q(ctx, m, p)
    return -2j * q / (1 - q)


def _cot(ctx, m, p):
    q = _q(ctx, m, p)
    return -1j * (1 + q) / (1 - q)


def w1_hat_mp(x2, xi, p: OracleParams, ctx=mpmath.mp):
    """Scalar w1_hat(x2; xi) in the working precision of ``ctx``.

    Same closed form as :func:`spectral.w1_hat`; the pole quotients are taken
    literally, so xi = +-1/2 itself must not be a node.
    """
    k, xs, P = ctx.mpf(p.k), ctx.mpf(p.x2_star), ctx.mpc(p.p_tilde)
    x2, xi = ctx.mpf(x2), ctx.mpf(xi)
    m = _mu(ctx, xi, k)
    sm, cm = ctx.sin(m), ctx.cos(m)
    cot = _cot(ctx, m, P)
    c_a = cot * cm + sm
    c_b = (cm - cot * sm) / m
    sin_x2 = ctx.sin(m * x2)
    amp = 0
    layer = 0
    for s in (1, -1):
        ms = _mu(ctx, xi, k, s)
        d = 2 * xi + s
        f = (ctx.sin(ms) / ms * cm - sm / m * ctx.cos(ms)) / d
        amp += ctx.exp(1j * ms * xs) * f
        psi = ctx.sin(ms * x2) - sin_x2 * (c_a * ctx.sin(ms) + c_b * ms * ctx.cos(ms))
        layer += _e_over_sin(ctx, ms, P) * ctx.sin(ms * xs) / ms * psi / d
    return -amp / 2 * _e_over_sin(ctx, m, P) * sin_x2 - layer / 2


def w0_hat_mp(x2, xi, p: OracleParams, ctx=mpmath.mp):
    """Scalar w0_hat(x2; xi) at a physical x2 below the layer."""
    k, xs, P = ctx.mpf(p.k), ctx.mpf(p.x2_star), ctx.mpc(p.p_tilde)
    m = _mu(ctx, ctx.mpf(xi), k)
    if m == 0:
        return 1j * _e_over_sin(ctx, m, P) * xs * x2
    return 1j * _e_over_sin(ctx, m, P) * ctx.sin(m * xs) / m * ctx.sin(m * x2)


def default_dps(p: OracleParams, decay=1.0):
    """Digits to carry: the expected exponent exp(-decay k |P|) plus a margin."""
    return 30 + math.ceil(decay * p.k * abs(p.p_tilde) / math.log(10.0))


def _field_mp(hat, x, p, dps, return_error):
    x1, x2 = map(float, x)
    ctx = mpmath.mp.clone()
    ctx.dps = dps
    # breakpoints are formed in working precision: float(1 + k) can land a
    # rounding error past the branch point and stall the quadrature
    k = ctx.mpf(p.k)
    half = ctx.mpf(1) / 2
    bps = {k, -k, 1 - k, k - 1, 1 + k, -1 - k, half, -half, ctx.zero}
    bps = sorted(bps, key=float)
    cut = bps[-1] + _TAIL
    nodes = [-cut, *bps, cut]
    x2m = ctx.mpf(x2)

    def integrand(xi):
        return hat(x2m, xi, p, ctx) * ctx.expj(-xi * x1)

    val, err = ctx.quad(integrand, nodes, error=True, maxdegree=10)
    val, err = val / (2 * ctx.pi), err / (2 * ctx.pi)
    out = complex(val)
    return (out, float(err)) if return_error else out


def w1_field_mp(x, p: OracleParams, dps=None, return_error=False):
    """w1 at x = (x1, x2), 0 < x2 < 1, by tanh-sinh quadrature in xi.

    The real axis is split at the branch points, at xi = +-1/2 and at 0.
    Returns a Python complex (the value is representable in double
    precision even when far below the double cancellation floor).
    """
    if not 0 < float(x[1]) < 1:
        raise ValueError("w1_field_mp is defined for 0 < x2 < 1")
    dps = default_dps(p) if dps is None else int(dps)
    return _field_mp(w1_hat_mp, x, p, dps, return_error)


def w0_field_mp(x, p: OracleParams, dps=None, return_error=False):
    """w0 at a physical point 0 < x2 < x2*; it decays like exp(-2k Im p_tilde)."""
    if not 0 < float(x[1]) < p.x2_star:
        raise ValueError("w0_field_mp is defined for 0 < x2 < x2*")
    dps = default_dps(p, decay=2.0) if dps is None else int(dps)
    return _field_mp(w0_hat_mp, x, p, dps, return_error)
