"""Shared domain types: source parameters, grids, fields and 1-D distributions.

Internally everything is dimensionless with the characteristic length
``delta_x = sqrt(a*b)`` set to one, so momenta are ``q = k*delta_x``,
coordinates ``X = x/delta_x`` and the propagation parameter is
``zeta_hat = zeta/(a*b)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

Representation = Literal["momentum", "coordinate"]

# amplitude of a Gaussian factor allowed at the grid edge
EDGE_AMPLITUDE = 1e-8
# number of sinc lobes the default momentum extent must cover
SINC_LOBES = 6


class BiphotonError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(BiphotonError, ValueError):
    pass


class GridError(BiphotonError):
    pass


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class BiphotonParams:
    """Source and propagation parameters.

    ``gauss_scale`` (a) and ``sinc_scale`` (b) carry physical length units when
    built by :func:`params_from_physical` and are expressed in units of
    ``delta_x`` when built by :func:`params_dimensionless`.
    """

    gauss_scale: float
    sinc_scale: float
    zeta: float = 0.0
    fit_s: float = 0.85
    pump_waist: float | None = None
    crystal_length: float | None = None
    pump_wavelength: float | None = None
    refractive_index: float | None = None

    def __post_init__(self):
        _positive("gauss_scale", self.gauss_scale)
        _positive("sinc_scale", self.sinc_scale)
        _positive("fit_s", self.fit_s)
        if not math.isfinite(self.zeta):
            raise ValidationError("zeta must be finite")

    @property
    def a(self) -> float:
        return self.gauss_scale

    @property
    def b(self) -> float:
        return self.sinc_scale

    @property
    def eta(self) -> float:
        return self.sinc_scale / self.gauss_scale

    @property
    def s(self) -> float:
        return self.fit_s

    @property
    def delta_x(self) -> float:
        return math.sqrt(self.gauss_scale * self.sinc_scale)

    @property
    def zeta_hat(self) -> float:
        return self.zeta / (self.gauss_scale * self.sinc_scale)

    def with_zeta_hat(self, zeta_hat: float) -> "BiphotonParams":
        return replace(self, zeta=float(zeta_hat) * self.gauss_scale * self.sinc_scale)


def params_from_physical(pump_waist, crystal_length, pump_wavelength,
                         refractive_index, s=0.85) -> BiphotonParams:
    """Build parameters from the pump waist, crystal length, pump wavelength,
    ordinary refractive index and the sinc fitting parameter ``s``.

    ``a = w_p/sqrt(2)`` and ``b = sqrt(L*lambda_p / (8*pi*n_o*s))``.
    """
    w_p = _positive("pump_waist", pump_waist)
    length = _positive("crystal_length", crystal_length)
    lam = _positive("pump_wavelength", pump_wavelength)
    n_o = _positive("refractive_index", refractive_index)
    s = _positive("s", s)
    a = w_p / math.sqrt(2.0)
    b = math.sqrt(length * lam / (8.0 * math.pi * n_o * s))
    return BiphotonParams(gauss_scale=a, sinc_scale=b, zeta=0.0, fit_s=s,
                          pump_waist=w_p, crystal_length=length,
                          pump_wavelength=lam, refractive_index=n_o)


def params_dimensionless(eta, zeta_hat=0.0, s=0.85) -> BiphotonParams:
    """Canonical internal parameters: ``delta_x = 1`` so ``a = 1/sqrt(eta)``, ``b = sqrt(eta)``."""
    eta = _positive("eta", eta)
    s = _positive("s", s)
    return BiphotonParams(gauss_scale=1.0 / math.sqrt(eta), sinc_scale=math.sqrt(eta),
                          zeta=float(zeta_hat), fit_s=s)


def zeta_from_distance(z: float, pump_wavelength: float) -> float:
    """Paraxial propagation parameter ``zeta = z*lambda_p/(2*pi)``."""
    return float(z) * _positive("pump_wavelength", pump_wavelength) / (2.0 * math.pi)


@dataclass(frozen=True)
class Grid:
    """Uniform lattice on ``[-extent, extent]`` that always contains the node 0.

    An even requested size is rounded up to the next odd count so that
    ``u = 0`` and every mirror pair ``(u, -u)`` fall exactly on nodes.
    """

    n: int
    extent: float

    def __post_init__(self):
        n = int(self.n)
        if n < 16:
            raise GridError(f"grid needs at least 16 nodes, got {n}")
        if n % 2 == 0:
            n += 1
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "extent", _positive("extent", self.extent))

    @property
    def nodes(self) -> np.ndarray:
        m = self.n // 2
        return np.arange(-m, m + 1) * self.spacing

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.n - 1)

    @property
    def center(self) -> int:
        return self.n // 2

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def mirror(self) -> np.ndarray:
        """Index map ``i -> j`` with ``u_j = -u_i``."""
        return np.arange(self.n)[::-1]


def momentum_extent(eta: float, s: float | None = None) -> float:
    """Default half-width of the dimensionless momentum grid.

    The Gaussian factors must drop below ``EDGE_AMPLITUDE`` at the edge and,
    for the Gauss-sinc kernel (``s`` given), the first ``SINC_LOBES`` sinc
    lobes must be covered.
    """
    eta = _positive("eta", eta)
    depth = math.log(1.0 / EDGE_AMPLITUDE)
    # (q1+q2)^2/(2 eta) at q1 = q2 = U
    extent = math.sqrt(depth * eta / 2.0)
    if s is None:
        # eta (q1-q2)^2 / 2 at q1 = -q2 = U
        extent = max(extent, math.sqrt(depth / (2.0 * eta)))
    else:
        extent = max(extent, math.sqrt(SINC_LOBES * math.pi / (_positive("s", s) * eta)))
    return extent


def default_grid(eta: float, s: float | None = None, n: int = 512) -> Grid:
    return Grid(n, momentum_extent(eta, s))


@dataclass(frozen=True)
class ComplexField2D:
    """Two-photon amplitude ``values[i, j] = psi(u_i, v_j)``.

    ``zeta_hat`` records the accumulated propagation phase; ``warnings`` lists
    non-fatal construction problems such as a grid smaller than the sizing rule.
    """

    grid_u: Grid
    grid_v: Grid
    values: np.ndarray
    representation: Representation = "momentum"
    zeta_hat: float = 0.0
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid_u.n, self.grid_v.n):
            raise ValidationError(
                f"field shape {values.shape} does not match grids "
                f"({self.grid_u.n}, {self.grid_v.n})")
        if not np.all(np.isfinite(values)):
            raise ValidationError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.norm() <= 0:
            raise ValidationError("field has zero norm")

    def norm(self) -> float:
        """Trapezoid L2 norm squared."""
        intensity = np.abs(self.values) ** 2
        return float(self.grid_u.weights @ intensity @ self.grid_v.weights)


@dataclass(frozen=True)
class ReducedDensityMatrix:
    grid: Grid
    values: np.ndarray
    representation: Representation = "momentum"

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def trace(self) -> complex:
        return complex(self.weights @ np.diag(self.values))

    def hermiticity_residual(self) -> float:
        v = self.values
        return float(np.max(np.abs(v - v.conj().T)) / np.max(np.abs(v)))

    def side_diagonal(self) -> np.ndarray:
        return np.diag(self.values).copy()

    def main_diagonal(self) -> np.ndarray:
        return self.values[np.arange(self.grid.n), self.grid.mirror()].copy()


@dataclass(frozen=True)
class Distribution1D:
    grid: Grid
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValidationError(f"distribution has {values.shape} samples for a {self.grid.n}-node grid")
        if not np.all(np.isfinite(values)):
            raise ValidationError("distribution contains non-finite values")
        object.__setattr__(self, "values", values)

    def peak_normalized(self) -> "Distribution1D":
        peak = self.values.max()
        if peak <= 0:
            raise ValidationError("distribution has no positive peak")
        return Distribution1D(self.grid, self.values / peak, normalized=True)


def width_at_half_max(dist: Distribution1D | np.ndarray, nodes: np.ndarray | None = None) -> float:
    """Full width at level 0.5 of the peak-normalized curve.

    Starting from the global maximum, walks outward on each side to the first
    sample below one half and locates the crossing by linear interpolation.
    Accepts a :class:`Distribution1D` or a pair of arrays ``(values, nodes)``.
    """
    if isinstance(dist, Distribution1D):
        values, nodes = dist.values, dist.grid.nodes
    else:
        values = np.asarray(dist, dtype=float)
        if nodes is None:
            raise ValidationError("nodes are required when passing a bare array")
        nodes = np.asarray(nodes, dtype=float)
    peak_idx = int(np.argmax(values))
    peak = values[peak_idx]
    if peak <= 0:
        raise ValidationError("distribution has no positive peak")
    if peak_idx == 0 or peak_idx == len(values) - 1:
        raise GridError("peak at boundary")
    y = values / peak

    below = np.nonzero(y[peak_idx::-1] < 0.5)[0]
    if below.size == 0:
        raise GridError("grid extent insufficient: level 0.5 not crossed on the left")
    i = peak_idx - below[0]
    left = nodes[i] + (0.5 - y[i]) * (nodes[i + 1] - nodes[i]) / (y[i + 1] - y[i])

    below = np.nonzero(y[peak_idx:] < 0.5)[0]
    if below.size == 0:
        raise GridError("grid extent insufficient: level 0.5 not crossed on the right")
    j = peak_idx + below[0]
    right = nodes[j - 1] + (0.5 - y[j - 1]) * (nodes[j] - nodes[j - 1]) / (y[j] - y[j - 1])
    return float(right - left)
