"""PML absorption profiles, the complex coordinate stretch and the surface catalog."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

TWO_PI = 2.0 * np.pi

# 32-point Gauss-Legendre rule on [-1, 1], reused for every half-band integral.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


class ProfileKind(str, enum.Enum):
    PAPER_SMOOTH = "PaperSmooth"
    CONSTANT = "Constant"
    ZERO = "Zero"


class SurfaceKind(str, enum.Enum):
    SINE = "Sine"
    SINE_FLATTENED = "SineFlattened"
    BINARY_GRATING = "BinaryGrating"
    SINE_WITH_OBSTACLE = "SineWithObstacle"
    FLAT = "Flat"


@dataclass(frozen=True)
class PmlProfile:
    """Absorption profile sigma(x2) supported on the band [H, H + L].

    ``PaperSmooth`` ramps from 0 at ``H`` to ``sigma_max`` at ``H + L/2``
    through the ratio of sixth powers of two cubic blending polynomials and
    stays flat above; the ramp is C-infinity at both junctions.
    """

    H: float
    L: float
    sigma_max: float = 2.0
    kind: ProfileKind = ProfileKind.PAPER_SMOOTH

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if not self.L > 0:
            raise ValueError(f"PML thickness must be positive, got L={self.L}")
        if self.sigma_max < 0:
            raise ValueError(f"sigma_max must be non-negative, got {self.sigma_max}")

    @property
    def top(self) -> float:
        return self.H + self.L

    def sigma(self, x2):
        """Vectorised sigma(x2)."""
        x2 = np.asarray(x2, dtype=float)
        if self.kind is ProfileKind.ZERO or self.sigma_max == 0.0:
            return np.zeros_like(x2)
        if self.kind is ProfileKind.CONSTANT:
            return np.where(x2 > self.H, self.sigma_max, 0.0)
        half = self.L / 2.0
        # 1 + t and 1 - t straight from x2: f1, f2 have simple roots at the ramp ends
        lo = np.clip(2.0 * (x2 - self.H) / half, 0.0, 2.0)
        hi = np.clip(2.0 * (self.H + half - x2) / half, 0.0, 2.0)
        t = lo - 1.0
        f1 = lo * (t * t / 3.0 - t / 3.0 + 0.5)
        f2 = hi * (t * t / 3.0 + t / 3.0 + 0.5)
        ramp = self.sigma_max * f1**6 / (f1**6 + f2**6)
        out = np.where(x2 >= self.H + half, self.sigma_max, ramp)
        return np.where(x2 <= self.H, 0.0, out)

    def alpha(self, x2):
        return 1.0 + 1j * self.sigma(x2)

    def sigma_integral(self, x2):
        """int_0^{x2} sigma(t) dt, vectorised."""
        x2 = np.asarray(x2, dtype=float)
        above = np.maximum(x2 - self.H, 0.0)
        if self.kind is ProfileKind.ZERO or self.sigma_max == 0.0:
            return np.zeros_like(x2)
        if self.kind is ProfileKind.CONSTANT:
            return self.sigma_max * above
        half = self.L / 2.0
        ramp_end = np.minimum(x2, self.H + half)
        width = np.maximum(ramp_end - self.H, 0.0)
        nodes = self.H + 0.5 * width[..., None] * (_GL_NODES + 1.0)
        ramp = 0.5 * width * np.sum(_GL_WEIGHTS * self.sigma(nodes), axis=-1)
        flat = self.sigma_max * np.maximum(x2 - (self.H + half), 0.0)
        return ramp + flat


@dataclass(frozen=True)
class StretchParam:
    p_tilde: complex
    profile: PmlProfile

    def alpha_of(self, x2):
        return self.profile.alpha(x2)


def sigma_eval(profile: PmlProfile, x2: float) -> float:
    return float(profile.sigma(x2))


def stretch(profile: PmlProfile, x2):
    """Complexified height x2 + i int_0^x2 sigma."""
    x2a = np.asarray(x2, dtype=float)
    out = x2a + 1j * profile.sigma_integral(x2a)
    return complex(out) if out.ndim == 0 else out


def p_tilde(profile: PmlProfile) -> complex:
    return complex(profile.L + 1j * profile.sigma_integral(profile.top))


def stretch_param(profile: PmlProfile) -> StretchParam:
    return StretchParam(p_tilde(profile), profile)


@dataclass(frozen=True)
class Disc:
    center: Tuple[float, float]
    radius: float

    def contains(self, x1, x2):
        return (np.asarray(x1) - self.center[0]) ** 2 + (
            np.asarray(x2) - self.center[1]
        ) ** 2 <= self.radius**2


@dataclass(frozen=True)
class SurfaceSpec:
    """A 2*pi periodic surface, optionally locally perturbed.

    The binary grating has levels ``grating_levels`` with the high level on
    ``|x1 mod 2pi| < grating_half_width``; on the central period the tooth
    is widened to ``grating_perturbed_half_width``.
    """

    kind: SurfaceKind = SurfaceKind.SINE
    period: float = TWO_PI
    obstacle: Optional[Disc] = None
    grating_levels: Tuple[float, float] = (0.0, 1.0)
    grating_half_width: float = np.pi / 2
    grating_perturbed_half_width: float = 3 * np.pi / 4

    def __post_init__(self):
        object.__setattr__(self, "kind", SurfaceKind(self.kind))
        if self.kind is SurfaceKind.SINE_WITH_OBSTACLE and self.obstacle is None:
            object.__setattr__(self, "obstacle", Disc((0.0, 2.8), 0.4))
        if self.kind is not SurfaceKind.SINE_WITH_OBSTACLE and self.obstacle is not None:
            raise ValueError(f"{self.kind.value} surfaces carry no obstacle")
        if not np.isclose(self.period, TWO_PI):
            raise ValueError("only 2*pi periodic surfaces are supported")

    @cached_property
    def perturbation_interval(self) -> Tuple[float, float]:
        if self.kind in (SurfaceKind.SINE_FLATTENED, SurfaceKind.BINARY_GRATING):
            return (-np.pi, np.pi)
        if self.kind is SurfaceKind.SINE_WITH_OBSTACLE:
            c, r = self.obstacle.center, self.obstacle.radius
            return (c[0] - r, c[0] + r)
        return (0.0, 0.0)

    def _grating(self, x1, half_width):
        lo, hi = self.grating_levels
        wrapped = np.mod(np.asarray(x1, dtype=float) + np.pi, TWO_PI) - np.pi
        return np.where(np.abs(wrapped) <= half_width + 1e-12, hi, lo)

    def base_height(self, x1):
        """Height of the unperturbed periodic curve."""
        x1 = np.asarray(x1, dtype=float)
        if self.kind is SurfaceKind.FLAT:
            return np.zeros_like(x1)
        if self.kind is SurfaceKind.BINARY_GRATING:
            return self._grating(x1, self.grating_half_width)
        return np.sin(x1)

    def height(self, x1):
        x1 = np.asarray(x1, dtype=float)
        base = self.base_height(x1)
        central = np.abs(x1) < np.pi
        if self.kind is SurfaceKind.SINE_FLATTENED:
            return np.where(central, 0.0, base)
        if self.kind is SurfaceKind.BINARY_GRATING:
            wide = self._grating(x1, self.grating_perturbed_half_width)
            return np.where(central, wide, base)
        return base

    def max_height(self) -> float:
        if self.kind is SurfaceKind.FLAT:
            return 0.0
        if self.kind is SurfaceKind.BINARY_GRATING:
            return float(max(self.grating_levels))
        return 1.0

    def in_obstacle(self, x1, x2):
        if self.obstacle is None:
            return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape, bool)
        return self.obstacle.contains(x1, x2)


def surface_height(spec: SurfaceSpec, x1):
    out = spec.height(x1)
    return float(out) if np.ndim(out) == 0 else out


# Surfaces of the numerical study, keyed by their conventional labels.
CATALOG = {
    "gamma1": SurfaceSpec(SurfaceKind.SINE),
    "gamma2": SurfaceSpec(SurfaceKind.SINE_FLATTENED),
    "gamma3": SurfaceSpec(SurfaceKind.BINARY_GRATING),
    "gamma4": SurfaceSpec(SurfaceKind.SINE_WITH_OBSTACLE),
    "flat": SurfaceSpec(SurfaceKind.FLAT),
}

# Default PML start height per catalog surface.
DEFAULT_H = {"gamma1": 3.0, "gamma2": 3.0, "gamma3": 3.0, "gamma4": 4.0, "flat": 3.0}
