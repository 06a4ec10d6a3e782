"""Closed-form energies for Gaussian profiles.

Independent of the quadrature and the differentiation matrices: everything
reduces to the moment formula ``int_0^inf r^k exp(-a r^2) dr`` assembled by
hand, so these values certify the discrete operators rather than the other
way around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .radial import EnergyReport, RadialField, RadialGrid

_PI_SQ = math.pi * math.pi


def _gamma_half(j: int) -> float:
    """Gamma(j/2) for integer j >= 1, by recurrence from Gamma(1/2) and Gamma(1)."""
    if j <= 0:
        raise ParameterError(f"gamma argument must be a positive half-integer, got {j}/2")
    val = math.sqrt(math.pi) if j % 2 == 1 else 1.0
    base = j % 2 if j % 2 == 1 else 2
    z = base / 2.0
    while base < j:
        val *= z
        z += 1.0
        base += 2
    return val


def moments(k: int, alpha: float) -> float:
    """``int_0^inf r^k exp(-alpha r^2) dr = 0.5 * alpha^{-(k+1)/2} Gamma((k+1)/2)``."""
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise ParameterError(f"moment order must be an integer >= 0, got {k!r}")
    a = float(alpha)
    if not math.isfinite(a) or a <= 0.0:
        raise ParameterError(f"decay rate must be positive, got {alpha!r}")
    return 0.5 * a ** (-(k + 1) / 2.0) * _gamma_half(k + 1)


@dataclass(frozen=True)
class GaussianProfile:
    """The radial profile ``w(r) = a * exp(-r^2 / (2 sigma^2))``."""

    a: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.sigma) or self.sigma <= 0.0:
            raise ParameterError(f"width must be positive, got {self.sigma!r}")
        if not math.isfinite(self.a):
            raise ParameterError(f"amplitude must be finite, got {self.a!r}")

    def __call__(self, r):
        return self.a * np.exp(-np.asarray(r) ** 2 / (2.0 * self.sigma**2))

    def sample(self, grid: RadialGrid) -> RadialField:
        return RadialField(grid, self(grid.nodes))


def closed_form_report(p: GaussianProfile) -> EnergyReport:
    """Exact functionals of a Gaussian profile.

    ``V`` is the potential integral under the logarithmic potential
    ``|u|^2 ln|u|``, for which it coincides with the entropy.  For the unit
    profile (a=1, sigma=1): K = 3 pi^2, l2 = pi^2, grad = 2 pi^2,
    hess = 6 pi^2, entropy = -pi^2.
    """
    a, sig = p.a, p.sigma
    a2 = a * a
    if a2 == 0.0:
        return EnergyReport.from_parts(K=0.0, V=0.0, l2_sq=0.0,
                                       grad_sq=0.0, entropy=0.0, hess_sq=0.0)
    s4 = sig**4
    ent = _PI_SQ * a2 * s4 * (math.log(abs(a)) - 1.0)
    return EnergyReport.from_parts(
        K=3.0 * _PI_SQ * a2,
        V=ent,
        l2_sq=_PI_SQ * a2 * s4,
        grad_sq=2.0 * _PI_SQ * a2 * sig**2,
        entropy=ent,
        hess_sq=6.0 * _PI_SQ * a2,
    )
