"""Choose the sinc fitting parameter ``s`` so that K(eta) is smallest at eta = 1."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BiphotonError, Grid, ValidationError, momentum_extent, params_dimensionless
from .engine import build_field, schmidt_k_trace

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
MAX_BISECTIONS = 60


class CalibrationError(BiphotonError):
    pass


def golden_section(f, lo, hi, tol):
    """Minimize a unimodal ``f`` on ``[lo, hi]`` until the bracket is shorter than ``tol``."""
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def scan_etas(eta_range=(1 / 6, 6.0), points=61) -> np.ndarray:
    lo, hi = eta_range
    if not (0 < lo < 1 < hi):
        raise ValidationError(f"eta range {eta_range} must lie in (0, inf) and contain 1")
    return np.geomspace(lo, hi, points)


def scan_grid(s: float, eta_range=(1 / 6, 6.0), n: int = 512, model: str = "gauss-sinc") -> Grid:
    """One momentum grid wide enough for every eta of the scan, so K(eta) is smooth in eta."""
    sinc_s = s if model == "gauss-sinc" else None
    return Grid(n, max(momentum_extent(eta, sinc_s) for eta in eta_range))


def schmidt_curve(s: float, etas, grid: Grid, model: str = "gauss-sinc") -> np.ndarray:
    return np.array([schmidt_k_trace(build_field(params_dimensionless(eta, s=s), grid, model))
                     for eta in etas])


def eta_of_min(s: float, eta_range=(1 / 6, 6.0), grid: Grid | None = None, n: int = 512,
               points: int = 61, tol: float = 1e-3, model: str = "gauss-sinc") -> tuple[float, float]:
    """Location and value of the minimum of K(eta; s).

    Coarse scan on a log-spaced eta grid, then golden-section refinement in
    ``log eta`` between the neighbours of the best scan point.
    """
    etas = scan_etas(eta_range, points)
    if grid is None:
        grid = scan_grid(s, eta_range, n, model)
    curve = schmidt_curve(s, etas, grid, model)
    i = int(np.argmin(curve))
    if i == 0 or i == len(etas) - 1:
        raise CalibrationError("eta range too narrow: minimum of K at the range boundary")

    def k_of_log(log_eta):
        return schmidt_k_trace(build_field(params_dimensionless(math.exp(log_eta), s=s), grid, model))

    lo, hi = math.log(etas[i - 1]), math.log(etas[i + 1])
    # |d eta| = eta |d log eta|; eta < 2 near the optimum
    log_eta = golden_section(k_of_log, lo, hi, tol / max(etas[i + 1], 1.0))
    return math.exp(log_eta), k_of_log(log_eta)


@dataclass(frozen=True)
class CalibrationResult:
    s_opt: float | None
    eta_min: float
    K_min: float
    asymmetry: float
    scan: list = field(default_factory=list)
    curve: list = field(default_factory=list)
    degenerate: bool = False
    model: str = "gauss-sinc"


def optimize_s(s_range=(0.5, 1.5), eta_range=(1 / 6, 6.0), n: int = 512, probe_points: int = 11,
               g_tol: float = 1e-2, s_tol: float = 1e-3, eta_points: int = 61,
               model: str = "gauss-sinc") -> CalibrationResult:
    """Bisection on ``g(s) = eta_min(s) - 1``.

    A table of ``eta_min`` over ``s_range`` is computed first; it must be
    monotone and change sign, otherwise the bracket is rejected. For the
    double-Gaussian model every ``s`` puts the minimum at 1 and the result is
    flagged degenerate with ``s_opt = None``.
    """
    s_lo, s_hi = s_range
    if not 0 < s_lo < s_hi:
        raise ValidationError(f"invalid s range {s_range}")
    etas = scan_etas(eta_range, eta_points)

    def g(s):
        return eta_of_min(s, eta_range, n=n, points=eta_points, model=model)

    scan = []
    for s in np.linspace(s_lo, s_hi, probe_points):
        eta_min, k_min = g(s)
        scan.append((float(s), eta_min, k_min))
    offsets = np.array([row[1] - 1.0 for row in scan])

    if np.all(np.abs(offsets) < g_tol):
        s_ref = 0.5 * (s_lo + s_hi)
        rows, asym = symmetry_rows(s_ref, etas, scan_grid(s_ref, eta_range, n, model), model)
        return CalibrationResult(None, scan[0][1], scan[0][2], asym, scan, rows,
                                 degenerate=True, model=model)

    steps = np.sign(np.diff(offsets))
    if not (np.all(steps <= 0) or np.all(steps >= 0)):
        raise CalibrationError("eta_min(s) is not monotone over the s range; bisection bracket unsafe")
    if offsets[0] * offsets[-1] > 0:
        raise CalibrationError("bracket failure; widen s_range")

    # tighten to the probe cell holding the sign change
    j = int(np.nonzero(np.sign(offsets[:-1]) != np.sign(offsets[1:]))[0][0])
    lo, hi = scan[j][0], scan[j + 1][0]
    g_lo = offsets[j]
    for _ in range(MAX_BISECTIONS):
        s_mid = 0.5 * (lo + hi)
        eta_min, k_min = g(s_mid)
        g_mid = eta_min - 1.0
        if abs(g_mid) < g_tol and hi - lo < s_tol:
            break
        if g_mid * g_lo > 0:
            lo, g_lo = s_mid, g_mid
        else:
            hi = s_mid
    else:
        raise CalibrationError(f"bisection did not converge in {MAX_BISECTIONS} steps")
    rows, asym = symmetry_rows(s_mid, etas, scan_grid(s_mid, eta_range, n, model), model)
    return CalibrationResult(s_mid, eta_min, k_min, asym, scan, rows, model=model)


def symmetry_rows(s, etas, grid, model="gauss-sinc"):
    """Rows ``(eta, K(eta), K(1/eta))`` and the mean asymmetry ``|K(eta) - K(1/eta)|``."""
    curve = schmidt_curve(s, etas, grid, model)
    if np.allclose(etas * etas[::-1], 1.0):
        mirrored = curve[::-1]
    else:
        mirrored = schmidt_curve(s, 1.0 / etas, grid, model)
    rows = [(float(e), float(k), float(kr)) for e, k, kr in zip(etas, curve, mirrored)]
    return rows, float(np.mean(np.abs(curve - mirrored)))
