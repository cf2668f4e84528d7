"""Leading-order PML error at k = 1/2 and decay-rate fitting."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

EPS = np.finfo(float).eps
CONCLUSIVE_R2 = 0.95
# Within this r^2 margin the algebraic model wins only for plausible exponents.
TIE_MARGIN = 0.01
ALGEBRAIC_WINDOW = (2.5, 5.5)


def w1_leading(x, x2_star, p_tilde):
    """Claimed leading term p_tilde^-4 * (-pi^3 x2 x2* / 45) * sin(x1 / 2) at k = 1/2."""
    x1, x2 = x
    return complex(p_tilde) ** -4 * (-math.pi**3 * x2 * x2_star / 45.0) * math.sin(x1 / 2.0)


def _planck_integrand(s, n):
    # s^n / (1 - e^{2s}) = s^n e^{-2s} / expm1(-2s), removable at 0 for n >= 2
    return 0.0 if s == 0.0 else s**n * math.exp(-2.0 * s) / math.expm1(-2.0 * s)


def planck_integral(n):
    """int_0^inf s^n / (1 - e^{2s}) ds for n in {2, 3}."""
    if n not in (2, 3):
        raise ValueError(f"planck_integral supports n in {{2, 3}}, got {n}")
    # beyond s = 60 the integrand is below 1e-46
    val, _ = integrate.quad(_planck_integrand, 0.0, 60.0, args=(n,),
                            epsabs=1e-15, epsrel=1e-13, limit=200)
    return val


class DecayModel(enum.Enum):
    EXPONENTIAL = "Exponential"
    ALGEBRAIC = "Algebraic"


@dataclass(frozen=True)
class DecayFit:
    """Fitted law E ~ prefactor * exp(-rate |P|) or prefactor * |P|^-rate."""

    model: DecayModel
    rate: float
    r_squared: float
    prefactor: float

    @property
    def conclusive(self):
        return self.r_squared >= CONCLUSIVE_R2


@dataclass(frozen=True)
class ErrorCurve:
    """Error samples against |p_tilde|; values at or below ``floor`` are unusable."""

    p_abs: np.ndarray
    errors: np.ndarray
    floor: float = 10 * EPS

    def __post_init__(self):
        p = np.asarray(self.p_abs, dtype=float).ravel()
        e = np.abs(np.asarray(self.errors)).astype(float).ravel()
        if p.shape != e.shape:
            raise ValueError("p_abs and errors must have the same length")
        if np.any(np.diff(p) <= 0):
            raise ValueError("|p_tilde| samples must be strictly increasing")
        object.__setattr__(self, "p_abs", p)
        object.__setattr__(self, "errors", e)

    @property
    def usable(self):
        return np.isfinite(self.errors) & (self.errors > self.floor)


class InconclusiveFit(ValueError):
    """Too few usable samples; ``diagnostics`` holds what could be measured."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def _linear_fit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return slope, intercept, float(min(max(r2, 0.0), 1.0))


def fit_decay(curve: ErrorCurve) -> DecayFit:
    """Least-squares fits of log E against |P| and log|P|; the better r^2 wins."""
    mask = curve.usable
    diagnostics = {"usable": int(mask.sum()), "total": len(curve.errors)}
    if mask.sum() < 4:
        raise InconclusiveFit("need at least 4 samples above the numerical floor", diagnostics)
    p, logE = curve.p_abs[mask], np.log(curve.errors[mask])
    s_exp, b_exp, r_exp = _linear_fit(p, logE)
    s_alg, b_alg, r_alg = _linear_fit(np.log(p), logE)
    exp_fit = DecayFit(DecayModel.EXPONENTIAL, -s_exp, r_exp, math.exp(b_exp))
    alg_fit = DecayFit(DecayModel.ALGEBRAIC, -s_alg, r_alg, math.exp(b_alg))
    if abs(r_alg - r_exp) <= TIE_MARGIN:
        lo, hi = ALGEBRAIC_WINDOW
        return alg_fit if lo <= alg_fit.rate <= hi else exp_fit
    return alg_fit if r_alg > r_exp else exp_fit


class DecayRateEstimator(BaseEstimator, RegressorMixin):
    """Estimator wrapper around :func:`fit_decay`.

    ``fit(X, y)`` takes |p_tilde| as a single feature and the errors as
    targets; ``predict`` evaluates the selected law.
    """

    def __init__(self, floor=10 * EPS):
        self.floor = floor

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("DecayRateEstimator expects a single feature |p_tilde|")
            X = X[:, 0]
        order = np.argsort(X)
        self.fit_ = fit_decay(ErrorCurve(X[order], np.asarray(y)[order], self.floor))
        self.model_ = self.fit_.model
        self.rate_ = self.fit_.rate
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        p = np.asarray(X, dtype=float).reshape(-1)
        f = self.fit_
        if f.model is DecayModel.EXPONENTIAL:
            return f.prefactor * np.exp(-f.rate * p)
        return f.prefactor * p ** (-f.rate)

    def score(self, X, y, sample_weight=None):
        """r^2 in log space, which is the scale the fit is made on."""
        pred = np.log(self.predict(X))
        obs = np.log(np.abs(np.asarray(y, dtype=float)))
        return 1.0 - np.sum((obs - pred) ** 2) / np.sum((obs - obs.mean()) ** 2)
