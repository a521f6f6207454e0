"""Discretized two-photon amplitudes, propagation, partial traces and entanglement measures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core import (BiphotonError, BiphotonParams, ComplexField2D, Distribution1D, Grid,
                   ReducedDensityMatrix, ValidationError, momentum_extent, width_at_half_max)

Model = Literal["2g", "gauss-sinc"]

# ratio of coordinate-marginal tail to peak used to size the output grid
COORDINATE_TAIL = 1e-6
# output grid extent relative to the detected support
COORDINATE_MARGIN = 1.15


class ChirpUnderResolved(BiphotonError):
    pass


def sinc(u):
    """``sin(u)/u`` with a series branch near zero."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-4
    us = u[small]
    out[small] = 1.0 - us * us / 6.0 + us ** 4 / 120.0
    ul = u[~small]
    out[~small] = np.sin(ul) / ul
    return out


def _momentum_field(values, grid, params, model, zeta_hat=0.0):
    needed = momentum_extent(params.eta, params.s if model == "gauss-sinc" else None)
    warnings = ()
    if grid.extent < needed * (1 - 1e-12):
        warnings = (f"grid extent {grid.extent:.4g} below sizing rule {needed:.4g}",)
    return ComplexField2D(grid, grid, values, "momentum", zeta_hat, warnings)


def build_psi_gs(params: BiphotonParams, grid: Grid) -> ComplexField2D:
    """Gauss-sinc amplitude ``exp[-(q1+q2)^2/(2 eta)] sinc[s eta (q1-q2)^2]``."""
    q = grid.nodes
    q1, q2 = q[:, None], q[None, :]
    eta, s = params.eta, params.s
    values = np.exp(-(q1 + q2) ** 2 / (2.0 * eta)) * sinc(s * eta * (q1 - q2) ** 2)
    return _momentum_field(values, grid, params, "gauss-sinc")


def build_psi_2g(params: BiphotonParams, grid: Grid) -> ComplexField2D:
    """Double-Gaussian amplitude ``exp[-(q1+q2)^2/(2 eta) - eta (q1-q2)^2 / 2]``."""
    q = grid.nodes
    q1, q2 = q[:, None], q[None, :]
    eta = params.eta
    values = np.exp(-(q1 + q2) ** 2 / (2.0 * eta) - eta * (q1 - q2) ** 2 / 2.0)
    return _momentum_field(values, grid, params, "2g")


def build_field(params: BiphotonParams, grid: Grid, model: Model) -> ComplexField2D:
    if model == "2g":
        return build_psi_2g(params, grid)
    if model == "gauss-sinc":
        return build_psi_gs(params, grid)
    raise ValidationError(f"unknown model {model!r}")


def apply_propagation(psi: ComplexField2D, zeta_hat: float) -> ComplexField2D:
    """Multiply by the free-space factor ``exp[-i zeta_hat (q1^2 + q2^2)]``."""
    if psi.representation != "momentum":
        raise ValidationError("propagation acts on momentum-representation fields")
    q1 = psi.grid_u.nodes[:, None]
    q2 = psi.grid_v.nodes[None, :]
    phase = np.exp(-1j * zeta_hat * (q1 ** 2 + q2 ** 2))
    return ComplexField2D(psi.grid_u, psi.grid_v, psi.values * phase, "momentum",
                          psi.zeta_hat + zeta_hat, psi.warnings)


def check_chirp(grid: Grid, zeta_hat: float) -> None:
    if abs(zeta_hat) * grid.extent * grid.spacing > math.pi / 4:
        raise ChirpUnderResolved(
            f"chirp under-resolved (zeta_hat={zeta_hat:g}, extent={grid.extent:.4g}, "
            f"n={grid.n}); increase n or reduce extent")


def chirp_grid_size(extent: float, zeta_hat: float) -> int:
    """Smallest odd node count that resolves the propagation chirp on ``[-extent, extent]``."""
    if zeta_hat == 0:
        return 17
    n = math.ceil(4.0 * abs(zeta_hat) * extent * 2.0 * extent / math.pi) + 1
    return n + (1 - n % 2)


def _transform_matrix(out_nodes, in_grid: Grid):
    return in_grid.weights[None, :] * np.exp(1j * np.outer(out_nodes, in_grid.nodes))


def coordinate_support(psi: ComplexField2D, tail: float = COORDINATE_TAIL) -> float:
    """Half-width of the region where the coordinate marginal exceeds ``tail`` times its peak.

    Evaluated on the reciprocal lattice ``dX = 2 pi / (n dq)`` which covers the
    whole alias-free window.
    """
    grid = psi.grid_u
    m = grid.n // 2
    x = np.arange(-m, m + 1) * (2.0 * np.pi / (grid.n * grid.spacing))
    e = _transform_matrix(x, grid)
    coarse = e @ psi.values @ e.T
    marginal = np.sum(np.abs(coarse) ** 2, axis=1)
    inside = np.nonzero(marginal > tail * marginal.max())[0]
    return float(max(abs(x[inside[0]]), abs(x[inside[-1]])) + (x[1] - x[0]))


def to_coordinate(psi: ComplexField2D, out_grid: Grid | None = None) -> ComplexField2D:
    """Direct quadrature of ``int dq1 dq2 psi(q1, q2) exp[i (X1 q1 + X2 q2)]``.

    Without ``out_grid`` the output lattice has the input node count and an
    extent fitted to the coordinate-space support, capped at the alias-free
    window ``pi/dq``.
    """
    if psi.representation != "momentum":
        raise ValidationError("to_coordinate expects a momentum-representation field")
    grid = psi.grid_u
    check_chirp(grid, psi.zeta_hat)
    if out_grid is None:
        window = math.pi / grid.spacing
        extent = min(COORDINATE_MARGIN * coordinate_support(psi), window)
        out_grid = Grid(grid.n, extent)
    e = _transform_matrix(out_grid.nodes, grid)
    values = e @ psi.values @ e.T
    return ComplexField2D(out_grid, out_grid, values, "coordinate", psi.zeta_hat, psi.warnings)


def reduce(psi: ComplexField2D) -> ReducedDensityMatrix:
    """Trace over the second photon and normalize to unit trace."""
    w = psi.grid_v.weights
    v = psi.values
    rho = (v * w[None, :]) @ v.conj().T
    # enforce exact conjugate symmetry lost to rounding in the product
    rho = 0.5 * (rho + rho.conj().T)
    trace = float(np.real(psi.grid_u.weights @ np.diag(rho)))
    if trace <= 0:
        raise ValidationError("zero-norm field cannot be reduced")
    return ReducedDensityMatrix(psi.grid_u, rho / trace, psi.representation)


def _weighted_kernel(psi: ComplexField2D) -> np.ndarray:
    wu = np.sqrt(psi.grid_u.weights)
    wv = np.sqrt(psi.grid_v.weights)
    return wu[:, None] * psi.values * wv[None, :]


def schmidt_k(psi: ComplexField2D) -> float:
    """Schmidt number ``(sum s^2)^2 / sum s^4`` from the singular values of the weighted kernel."""
    sv = np.linalg.svd(_weighted_kernel(psi), compute_uv=False)
    p = sv ** 2
    total = p.sum()
    if total <= np.finfo(float).tiny:
        raise ValidationError("field is numerically zero")
    return float(total * total / np.sum(p * p))


def schmidt_k_trace(psi: ComplexField2D) -> float:
    """Same quantity as :func:`schmidt_k` via ``1/Tr(rho^2)``, without an SVD."""
    m = _weighted_kernel(psi)
    gram = m @ m.conj().T
    total = float(np.real(np.trace(gram)))
    if total <= np.finfo(float).tiny:
        raise ValidationError("field is numerically zero")
    return total * total / float(np.sum(np.abs(gram) ** 2))


def conditional_dist(psi: ComplexField2D) -> Distribution1D:
    """``|psi(u, 0)|^2`` with the partner pinned at the ``v = 0`` node."""
    return Distribution1D(psi.grid_u, np.abs(psi.values[:, psi.grid_v.center]) ** 2).peak_normalized()


def unconditional_dist(psi: ComplexField2D) -> Distribution1D:
    marginal = np.abs(psi.values) ** 2 @ psi.grid_v.weights
    return Distribution1D(psi.grid_u, marginal).peak_normalized()


@dataclass(frozen=True)
class DiagonalDists:
    side: Distribution1D
    main: Distribution1D
    side_max_imag: float
    main_max_imag: float

    def __iter__(self):
        return iter((self.side, self.main))


def diag_dists(rho: ReducedDensityMatrix) -> DiagonalDists:
    """Reduced density matrix along ``u' = u`` (side) and ``u' = -u`` (main).

    The imaginary parts, which vanish for this family of states, are reported
    relative to ``max|rho|``.
    """
    scale = float(np.max(np.abs(rho.values)))
    side = rho.side_diagonal()
    main = rho.main_diagonal()
    return DiagonalDists(
        side=Distribution1D(rho.grid, side.real).peak_normalized(),
        main=Distribution1D(rho.grid, main.real).peak_normalized(),
        side_max_imag=float(np.max(np.abs(side.imag)) / scale),
        main_max_imag=float(np.max(np.abs(main.imag)) / scale),
    )


@dataclass(frozen=True)
class EntanglementReport:
    K: float
    R_tr: float
    R_diag: float
    widths: dict = field(default_factory=dict)
    representation: str = "momentum"
    zeta_hat: float = 0.0
    eta: float = 1.0
    model: str = "2g"
    max_imag_diag: float = 0.0


def analyze(psi: ComplexField2D, model: str = "", eta: float = float("nan")) -> EntanglementReport:
    """Widths, width ratios and Schmidt number of an already-built field."""
    rho = reduce(psi)
    diag = diag_dists(rho)
    widths = {
        "uc": width_at_half_max(unconditional_dist(psi)),
        "c": width_at_half_max(conditional_dist(psi)),
        "sd": width_at_half_max(diag.side),
        "md": width_at_half_max(diag.main),
    }
    return EntanglementReport(
        K=schmidt_k(psi),
        R_tr=widths["uc"] / widths["c"],
        R_diag=widths["sd"] / widths["md"],
        widths=widths,
        representation=psi.representation,
        zeta_hat=psi.zeta_hat,
        eta=eta,
        model=model,
        max_imag_diag=max(diag.side_max_imag, diag.main_max_imag),
    )


def propagated_field(params: BiphotonParams, grid: Grid, zeta_hat: float, model: Model,
                     representation: str = "momentum") -> ComplexField2D:
    psi = apply_propagation(build_field(params, grid, model), zeta_hat)
    if representation == "coordinate":
        psi = to_coordinate(psi)
    elif representation != "momentum":
        raise ValidationError(f"unknown representation {representation!r}")
    return psi


def entanglement_report(params: BiphotonParams, grid: Grid | None = None, zeta_hat: float = 0.0,
                        representation: str = "momentum", model: Model = "gauss-sinc",
                        ) -> EntanglementReport:
    """Build, propagate, optionally transform, then measure K, R_tr and R_diag."""
    if grid is None:
        grid = auto_grid(params, model, zeta_hat if representation == "coordinate" else 0.0)
    psi = propagated_field(params, grid, zeta_hat, model, representation)
    return analyze(psi, model=model, eta=params.eta)


def auto_grid(params: BiphotonParams, model: Model, zeta_hat: float = 0.0,
              n: int = 512, n_max: int = 1024) -> Grid:
    """Default momentum grid, refined up to ``n_max`` nodes when the chirp demands it."""
    extent = momentum_extent(params.eta, params.s if model == "gauss-sinc" else None)
    need = chirp_grid_size(extent, zeta_hat)
    if need > n:
        if need > n_max + 1:
            raise ChirpUnderResolved(
                f"zeta_hat={zeta_hat:g} needs {need} nodes on extent {extent:.4g}; "
                f"limit is {n_max}")
        n = need
    return Grid(n, extent)
