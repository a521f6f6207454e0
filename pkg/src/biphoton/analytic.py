"""Closed forms for the double-Gaussian biphoton.

Every expression is left unnormalized. Widths are the 1/e parameters ``D`` of
``exp(-x**2 / D**2)``; multiply by :data:`FWHM_PER_WIDTH` to get the full width
at half maximum of such a Gaussian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError

FWHM_PER_WIDTH = 2.0 * math.sqrt(math.log(2.0))


def _check(a, b):
    if not (a > 0 and b > 0):
        raise ValidationError(f"a and b must be positive, got a={a!r}, b={b!r}")


def k_2g(eta: float) -> float:
    """Schmidt number of the double-Gaussian state, ``(1 + eta**2) / (2*eta)``."""
    if not eta > 0:
        raise ValidationError(f"eta must be positive, got {eta!r}")
    return (1.0 + eta * eta) / (2.0 * eta)


def psi_2g(k1, k2, a, b):
    _check(a, b)
    k1, k2 = np.asarray(k1, dtype=float), np.asarray(k2, dtype=float)
    return np.exp(-a * a * (k1 + k2) ** 2 / 2.0 - b * b * (k1 - k2) ** 2 / 2.0)


def psi_2g_x(x1, x2, a, b, zeta=0.0):
    _check(a, b)
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    return np.exp(-(x1 + x2) ** 2 / (8.0 * (a * a + 1j * zeta))
                  - (x1 - x2) ** 2 / (8.0 * (b * b + 1j * zeta)))


def momentum_widths(a, b):
    """1/e widths of the unconditional and conditional momentum distributions.

    The unconditional width is ``sqrt(a^2+b^2)/(2ab)``, i.e. the width of
    ``exp(-4 a^2 b^2 k^2/(a^2+b^2))``.
    """
    _check(a, b)
    return math.sqrt(a * a + b * b) / (2.0 * a * b), 1.0 / math.sqrt(a * a + b * b)


def widths_coordinate(a, b, zeta=0.0):
    """Return ``(uc, c, sd, md)`` coordinate widths at propagation ``zeta``."""
    _check(a, b)
    a2, b2, z2 = a * a, b * b, zeta * zeta
    uc = math.sqrt((a2 + b2) * (a2 * b2 + z2)) / (a * b)
    c = 2.0 * math.sqrt((a2 * a2 + z2) * (b2 * b2 + z2) / ((a2 + b2) * (a2 * b2 + z2)))
    md = 2.0 * math.sqrt((a2 * b2 + z2) / (a2 + b2))
    return uc, c, uc, md


def r_tr_x(a, b, zeta=0.0):
    _check(a, b)
    a2, b2, z2 = a * a, b * b, zeta * zeta
    return (a2 + b2) / (2.0 * a * b) * (a2 * b2 + z2) / math.sqrt((a2 * a2 + z2) * (b2 * b2 + z2))


def rho_r_2g(x1, x1p, a, b, zeta=0.0):
    """Coordinate reduced density matrix of the double-Gaussian state."""
    _, _, sd, md = widths_coordinate(a, b, zeta)
    x1, x1p = np.asarray(x1, dtype=float), np.asarray(x1p, dtype=float)
    return np.exp(-(x1 + x1p) ** 2 / (4.0 * sd * sd)
                  - (x1 - x1p) ** 2 / (4.0 * md * md)
                  - 1j * zeta * (x1 * x1 - x1p * x1p) / (4.0 * (a * a * b * b + zeta * zeta)))


def rho_r_2g_momentum(q1, q1p, eta):
    """Near-zone momentum reduced density matrix in units ``delta_x = 1``."""
    if not eta > 0:
        raise ValidationError(f"eta must be positive, got {eta!r}")
    q1, q1p = np.asarray(q1, dtype=float), np.asarray(q1p, dtype=float)
    return np.exp(-eta / (1.0 + eta * eta) * (q1 + q1p) ** 2
                  - (1.0 + eta * eta) / (4.0 * eta) * (q1 - q1p) ** 2)


def phase_2g_x(x1, x2, a, b, zeta):
    """Unwrapped argument of :func:`psi_2g_x`."""
    _check(a, b)
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    return ((x1 + x2) ** 2 * zeta / (8.0 * (a ** 4 + zeta * zeta))
            + (x1 - x2) ** 2 * zeta / (8.0 * (b ** 4 + zeta * zeta)))


@dataclass(frozen=True)
class TwoGaussianReport:
    K_2G: float
    dk_uc: float
    dk_c: float
    dx_uc: float
    dx_c: float
    dx_sd: float
    dx_md: float
    R_tr_x: float
    R_diag_x: float
    zeta: float


def two_gaussian_report(a, b, zeta=0.0) -> TwoGaussianReport:
    dk_uc, dk_c = momentum_widths(a, b)
    uc, c, sd, md = widths_coordinate(a, b, zeta)
    return TwoGaussianReport(K_2G=k_2g(b / a), dk_uc=dk_uc, dk_c=dk_c, dx_uc=uc, dx_c=c,
                             dx_sd=sd, dx_md=md, R_tr_x=r_tr_x(a, b, zeta),
                             R_diag_x=sd / md, zeta=zeta)
