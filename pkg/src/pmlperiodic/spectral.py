"""Fourier-domain fields of the layered half-plane model and their inverse transforms.

The model is the half plane x2 > 0 with a Dirichlet wall at x2 = 0, a point
source at (0, x2*) and a weak periodic layer eps * sin(x1) on 0 < x2 < 1.
``u0_hat``/``u1_hat`` are the first two terms of the eps-series of the exact
field, ``w0_hat``/``w1_hat`` those of the PML truncation error.  The PML top
enters only through its complex coordinate ``p_tilde``.

Transform convention: f_hat(xi) = int f(x1) exp(i xi x1) dx1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PmlProfile, stretch
from .quadrature import gauss_kronrod

# Below this |2 xi +- 1| the pole quotients switch to divided-difference form.
DD_SWITCH = 0.05
_GL_Y, _GL_W = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class OracleParams:
    """Wavenumber, source height and the complex coordinate of the PML top.

    ``p_tilde`` is the stretched height at which the truncated problem carries
    its Dirichlet condition.
    """

    k: float
    x2_star: float
    p_tilde: complex
    h_plus_l: float = float("nan")

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        if not self.x2_star > 1:
            raise ValueError(f"source must sit above the layer, got x2*={self.x2_star}")
        if not complex(self.p_tilde).imag > 0:
            raise ValueError(f"Im(p_tilde) must be positive, got {self.p_tilde}")
        object.__setattr__(self, "p_tilde", complex(self.p_tilde))

    @classmethod
    def from_profile(cls, k, x2_star, profile: PmlProfile):
        return cls(k, x2_star, stretch(profile, profile.top), profile.top)


def mu(xi, k, shift=0.0):
    """sqrt(k^2 - (xi + shift)^2), decaying branch on the real axis.

    The radicand is factored as (k - shift - xi)(k + shift + xi) so it stays
    accurate next to the branch points.  Negative real radicands map to
    +i sqrt(|.|); complex radicands use the principal root.
    """
    xi = np.asarray(xi)
    w = ((k - shift) - xi) * ((k + shift) + xi)
    if np.iscomplexobj(w):
        root = np.sqrt(w)
        neg_real = (w.imag == 0) & (w.real < 0)
        root = np.where(neg_real, 1j * np.sqrt(np.abs(w.real)), root)
    else:
        root = np.where(w >= 0, np.sqrt(np.abs(w)) + 0j, 1j * np.sqrt(np.abs(w)))
    return root if root.ndim else complex(root)


def _sinc_scaled(m, x):
    """sin(m x) / m, continuous at m = 0."""
    z = m * x
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    return x * np.where(small, 1.0 - z**2 / 6.0 + z**4 / 120.0, np.sin(safe) / safe)


def _expm1(z):
    """exp(z) - 1 for complex z without cancellation."""
    x, y = np.real(z), np.imag(z)
    return np.expm1(x) * np.cos(y) - 2.0 * np.sin(y / 2.0) ** 2 + 1j * np.exp(x) * np.sin(y)


def _e_over_sin(m, p):
    """exp(i m p) / sin(m p) written through q = exp(2 i m p), |q| < 1."""
    z = 2j * m * p
    return -2j * np.exp(z) / (-_expm1(z))


def _cot(m, p):
    z = 2j * m * p
    return -1j * (2.0 + _expm1(z)) / (-_expm1(z))


def _sinc(z):
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z**2 / 6.0 + z**4 / 120.0, np.sin(safe) / safe)


def _dd_cos(alpha, beta):
    """[cos(alpha) - cos(beta)] / (alpha^2 - beta^2), exact near alpha^2 = beta^2."""
    p, q = 0.5 * (alpha + beta), 0.5 * (alpha - beta)
    return -0.5 * _sinc(p) * _sinc(q)


def _dd_sin_scaled(alpha, beta, x):
    """[sin(alpha x)/alpha - sin(beta x)/beta] / (alpha^2 - beta^2).

    Written as -1/2 int_0^x y^2 sinc(p y) sinc(q y) dy, which has no
    cancellation; a 24-point Gauss-Legendre rule is exact to rounding for the
    moderate arguments where this form is used.
    """
    p, q = 0.5 * (alpha + beta), 0.5 * (alpha - beta)
    y = 0.5 * x * (_GL_Y + 1.0)
    shape = np.broadcast(p, q).shape
    pp = np.asarray(p).reshape(shape + (1,))
    qq = np.asarray(q).reshape(shape + (1,))
    vals = y**2 * _sinc(pp * y) * _sinc(qq * y)
    return -0.25 * x * np.sum(_GL_W * vals, axis=-1)


def _maybe_scalar(arr, *inputs):
    return complex(arr.reshape(-1)[0]) if all(np.ndim(a) == 0 for a in inputs) else arr


# ---------------------------------------------------------------- u0, u1


def u0_hat(x2, xi, p: OracleParams):
    """Half-plane Green's function in the xi domain.

    Complex ``x2`` is read as a stretched height above the source.
    """
    x2 = np.asarray(x2)
    m = mu(xi, p.k)
    if np.iscomplexobj(x2):
        out = -1j * np.exp(1j * m * x2) * _sinc_scaled(m, p.x2_star)
    else:
        lo = np.minimum(x2, p.x2_star)
        hi = np.maximum(x2, p.x2_star)
        out = -1j * np.exp(1j * m * hi) * _sinc_scaled(m, lo)
    return _maybe_scalar(np.asarray(out), x2, xi)


def bracket_f(xi, k, s=1):
    """[S(mu_s) cos(mu) - S(mu) cos(mu_s)] / (2 xi + s) with S(m) = sin(m)/m.

    Analytic in xi; s = +1 gives the function whose value at -1/2 is -1/3
    for k = 1/2.  Near xi = -s/2 the quotient is evaluated through divided
    differences in mu^2 (2 xi + s = s (mu^2 - mu_s^2)).
    """
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    m, ms = mu(xi_arr, k), mu(xi_arr, k, s)
    d = 2.0 * xi_arr + s
    near = np.abs(d) < DD_SWITCH
    safe_d = np.where(near, 1.0, d)
    direct = (_sinc_scaled(ms, 1.0) * np.cos(m) - _sinc_scaled(m, 1.0) * np.cos(ms)) / safe_d
    dd = s * (_sinc_scaled(m, 1.0) * _dd_cos(ms, m) - np.cos(m) * _dd_sin_scaled(ms, m, 1.0))
    return _maybe_scalar(np.where(near, dd, direct), xi)


def _u1_amplitude(xi, p: OracleParams):
    """Coefficient U(xi) with u1_hat(x2) = U exp(i mu x2) above the layer."""
    amp = 0.0
    for s in (1, -1):
        amp = amp + np.exp(1j * mu(xi, p.k, s) * p.x2_star) * bracket_f(xi, p.k, s)
    return 0.5 * np.asarray(amp)


def u1_hat(x2, xi, p: OracleParams):
    """First-order field above the layer (x2 > 1); complex x2 allowed."""
    x2 = np.asarray(x2)
    if not np.iscomplexobj(x2) and np.any(x2 <= 1):
        raise ValueError("exterior form of u1_hat requires x2 > 1")
    out = _u1_amplitude(xi, p) * np.exp(1j * mu(xi, p.k) * x2)
    return _maybe_scalar(np.asarray(out), x2, xi)


def _u1_particular(x2, xi, p):
    """Particular solution inside the layer and its x2-derivative."""
    val = 0.0
    der = 0.0
    for s in (1, -1):
        ms = mu(xi, p.k, s)
        pref = 0.5 * np.exp(1j * ms * p.x2_star) / (2.0 * xi + s)
        val = val + pref * _sinc_scaled(ms, x2)
        der = der + pref * np.cos(ms * x2)
    return val, der


def u1_layer_coefficients(xi, p: OracleParams):
    """(A, B) of the continuity system at x2 = 1."""
    m = mu(xi, p.k)
    a = _u1_amplitude(xi, p) * np.exp(1j * m)
    w, dw = _u1_particular(1.0, xi, p)
    s, c = np.sin(m), np.cos(m)
    b_sin = (a - w) / np.where(s == 0, 1.0, s)
    b_cos = (1j * a - dw / m) / np.where(c == 0, 1.0, c)
    b = np.where(np.abs(s) > np.abs(c), b_sin, b_cos)
    return a, b


def u1_hat_interior(x2, xi, p: OracleParams):
    """First-order field inside the layer (0 <= x2 <= 1)."""
    _, b = u1_layer_coefficients(xi, p)
    w, _ = _u1_particular(np.asarray(x2), xi, p)
    out = w + b * np.sin(mu(xi, p.k) * np.asarray(x2))
    return _maybe_scalar(np.asarray(out), x2, xi)


# ---------------------------------------------------------------- w0, w1


def w0_hat(x2, xi, p: OracleParams, profile: PmlProfile | None = None):
    # without a profile x2 is taken as a physical point below the layer
    xt = x2 if profile is None else stretch(profile, x2)
    m = mu(xi, p.k)
    out = 1j * _e_over_sin(m, p.p_tilde) * _sinc_scaled(m, p.x2_star) * np.sin(m * xt)
    return _maybe_scalar(np.asarray(out), x2, xi)


def _w1_pieces(xi, p):
    """Layer-side ingredients: G_s terms, C1 and mu."""
    k, P = p.k, p.p_tilde
    m = mu(xi, k)
    g = {}
    for s in (1, -1):
        ms = mu(xi, k, s)
        g[s] = (ms, _e_over_sin(ms, P) * _sinc_scaled(ms, p.x2_star) / (2.0 * xi + s))
    cot = _cot(m, P)
    sum_sin = sum(gs * np.sin(ms) for ms, gs in g.values())
    sum_cos = sum(gs * ms * np.cos(ms) for ms, gs in g.values())
    c1 = (
        -_u1_amplitude(xi, p) * _e_over_sin(m, P)
        + 0.5 * (cot * np.cos(m) + np.sin(m)) * sum_sin
        + 0.5 * (np.cos(m) - cot * np.sin(m)) / m * sum_cos
    )
    return m, g, c1


def w1_c1(xi, p: OracleParams):
    """The coefficient C1(xi) of sin(mu x2) in the layer."""
    xi = np.asarray(xi, dtype=float)
    return _maybe_scalar(np.asarray(_w1_pieces(xi, p)[2]), xi)


def w1_particular(x2, xi, p: OracleParams):
    """Particular layer solution and its x2-derivative."""
    _, g, _ = _w1_pieces(np.asarray(xi, dtype=float), p)
    val = -0.5 * sum(gs * np.sin(ms * x2) for ms, gs in g.values())
    der = -0.5 * sum(gs * ms * np.cos(ms * x2) for ms, gs in g.values())
    return val, der


def _w1_layer_quotient(x2, xi, p, s, m, ms, cot):
    """psi(mu_s) / (2 xi + s) where psi(m') vanishes at m' = +-mu.

    psi(m') = sin(m' x2) - sin(mu x2) [c_a sin m' + c_b m' cos m'] with
    c_a = cos(mu (P - 1)) / sin(mu P), c_b = sin(mu (P - 1)) / (mu sin(mu P)).
    """
    c_a = cot * np.cos(m) + np.sin(m)
    c_b = (np.cos(m) - cot * np.sin(m)) / m
    d = 2.0 * xi + s
    near = np.abs(d) < DD_SWITCH
    psi = np.sin(ms * x2) - np.sin(m * x2) * (c_a * np.sin(ms) + c_b * ms * np.cos(ms))
    direct = psi / np.where(near, 1.0, d)
    # psi(m')/m' = chi(m'^2); psi(mu_s)/d = -s mu_s DD[chi](mu_s^2, mu^2)
    dd_chi = _dd_sin_scaled(ms, m, x2) - np.sin(m * x2) * (
        c_a * _dd_sin_scaled(ms, m, 1.0) + c_b * _dd_cos(ms, m)
    )
    return np.where(near, -s * ms * dd_chi, direct)


def w1_hat(x2, xi, p: OracleParams, profile: PmlProfile | None = None):
    """First-order PML error inside the layer, 0 < x2 < 1.

    Assembled as -U E(mu) sin(mu x2) - 1/2 sum_s E(mu_s) S(mu_s, x2*) psi_s/(2 xi + s),
    which is the particular solution plus C1 sin(mu x2) with the poles at
    xi = -+1/2 cancelled analytically.
    """
    x2 = float(x2)
    if not 0 < x2 < 1:
        raise ValueError("w1_hat is defined for 0 < x2 < 1")
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    P = p.p_tilde
    m = mu(xi_arr, p.k)
    cot = _cot(m, P)
    out = -_u1_amplitude(xi_arr, p) * _e_over_sin(m, P) * np.sin(m * x2)
    for s in (1, -1):
        ms = mu(xi_arr, p.k, s)
        quot = _w1_layer_quotient(x2, xi_arr, p, s, m, ms, cot)
        out = out - 0.5 * _e_over_sin(ms, P) * _sinc_scaled(ms, p.x2_star) * quot
    return _maybe_scalar(out, xi)


def w1_exterior_coefficients(xi, p: OracleParams):
    """(A1, B1, C1) solving the continuity and PML-top conditions."""
    m, g, c1 = _w1_pieces(np.asarray(xi, dtype=float), p)
    w = -0.5 * sum(gs * np.sin(ms) for ms, gs in g.values())
    dw = -0.5 * sum(gs * ms * np.cos(ms) for ms, gs in g.values())
    a1 = 0.5 * (w + dw / (1j * m)) * np.exp(-1j * m) - 0.5j * c1
    b1 = 0.5 * (w - dw / (1j * m)) * np.exp(1j * m) + 0.5j * c1
    return a1, b1, c1


def w1_hat_exterior(x2, xi, p: OracleParams, profile: PmlProfile):
    """First-order PML error above the layer, x2 > 1 (stretched inside the PML)."""
    xt = stretch(profile, x2)
    a1, b1, _ = w1_exterior_coefficients(xi, p)
    m = mu(xi, p.k)
    out = a1 * np.exp(1j * m * xt) + b1 * np.exp(-1j * m * xt)
    return _maybe_scalar(np.asarray(out), x2, xi)


# ---------------------------------------------------------------- inverse transform


def branch_points(k):
    pts = sorted({round(v, 15) for v in (k, -k, 1 - k, k - 1, 1 + k, -1 - k)})
    return [float(v) for v in pts]


def _pieces(k, cutoff, sub_width=0.1):
    """Integration pieces (kind, a, b) covering [-cutoff, cutoff]."""
    bps = branch_points(k)
    edges = [-cutoff] + bps + [cutoff]
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        left_bp = a in bps
        right_bp = b in bps
        lo, hi = a, b
        if left_bp and right_bp:
            d = min(sub_width, (b - a) / 2)
        else:
            d = min(sub_width, b - a)
        if left_bp:
            pieces.append(("left", a, a + d))
            lo = a + d
        if right_bp:
            pieces.append(("right", b - d, b))
            hi = b - d
        if hi > lo:
            pieces.append(("plain", lo, hi))
    order = {"left": 0, "plain": 1, "right": 2}
    pieces.sort(key=lambda q: (q[1], order[q[0]]))
    return pieces


def inverse_fourier(field, x1, k, tol=1e-10, *, decay_rate=1.0, rel_tol=0.0,
                    max_evals=4_000_000, return_error=False):
    """(2 pi)^-1 int field(xi) exp(-i xi x1) dxi along the real axis.

    The axis is split at the branch points +-k, +-(1-k), +-(1+k); within 0.1
    of each one xi = xi0 +- t^2 removes the square-root behaviour.  Tails are
    dropped where exp(-(|xi| - k) * decay_rate) < tol / 100.
    """
    bps = branch_points(k)
    cutoff = max(abs(bps[0]), abs(bps[-1])) + 1.0
    cutoff += np.log(100.0 / max(tol, 1e-300)) / decay_rate
    pieces = _pieces(k, cutoff)
    kinds = np.array([{"plain": 0, "left": 1, "right": 2}[q[0]] for q in pieces])
    aa = np.array([q[1] for q in pieces])
    bb = np.array([q[2] for q in pieces])

    def integrand(u):
        j = np.clip(np.floor(u).astype(int), 0, len(pieces) - 1)
        tau = u - j
        kind, a, b = kinds[j], aa[j], bb[j]
        width = b - a
        root = np.sqrt(width)
        t = tau * root
        xi = np.where(kind == 0, a + tau * width, np.where(kind == 1, a + t * t, b - t * t))
        # deep bisection can round xi onto the branch point itself (mu = 0);
        # step one ulp inside, the weight there is negligible
        xi = np.where((kind == 1) & (xi == a), np.nextafter(a, b), xi)
        xi = np.where((kind == 2) & (xi == b), np.nextafter(b, a), xi)
        jac = np.where(kind == 0, width, 2.0 * t * root)
        vals = np.asarray(field(xi), dtype=complex)
        return vals * np.exp(-1j * xi * x1) * jac

    value, err = gauss_kronrod(
        integrand, np.arange(len(pieces) + 1, dtype=float),
        abs_tol=tol * 2 * np.pi, rel_tol=rel_tol, max_evals=max_evals,
    )
    value /= 2 * np.pi
    return (value, err / (2 * np.pi)) if return_error else value


def _check_x1(x1):
    if np.isclose(np.mod(x1 / (2 * np.pi) + 0.5, 1.0) - 0.5, 0.0, atol=1e-12):
        raise ValueError("x1 / (2 pi) must not be an integer")


def u0_field(x, p: OracleParams, tol=1e-10, **kw):
    x1, x2 = x
    return inverse_fourier(lambda xi: u0_hat(x2, xi, p), x1, p.k, tol,
                           decay_rate=abs(p.x2_star - x2) or 1.0, **kw)


def w0_field(x, p: OracleParams, profile: PmlProfile | None = None, tol=1e-10, **kw):
    x1, x2 = x
    return inverse_fourier(lambda xi: w0_hat(x2, xi, p, profile), x1, p.k, tol,
                           decay_rate=max(p.x2_star - x2, 0.5), **kw)


def w1_field(x, p: OracleParams, profile: PmlProfile | None = None, tol=1e-10,
             allow_lattice=False, **kw):
    """First-order PML error w1 at a physical point inside the layer.

    Points with x1 on the lattice 2*pi*Z are rejected unless
    ``allow_lattice``; there the leading algebraic term vanishes.
    """
    x1, x2 = x
    if not 0 < x2 < 1:
        raise ValueError("w1_field needs 0 < x2 < 1")
    if not allow_lattice:
        _check_x1(x1)
    return inverse_fourier(lambda xi: w1_hat(x2, xi, p), x1, p.k, tol,
                           decay_rate=p.x2_star - x2, **kw)
