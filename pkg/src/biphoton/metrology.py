"""Monte-Carlo model of the coincidence-count and polarization phase measurement.

Counts give ``|psi(x1, x2)|``; two series of polarization measurements per
cell (without and with a quarter-wave plate) give ``cos 2phi`` and
``sin 2phi``. Together they rebuild both diagonals of the coordinate reduced
density matrix from measured data only.

Every stochastic routine takes ``exact=True`` to replace sampled frequencies
with their probabilities, which isolates the reconstruction algebra from shot
noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BiphotonError, ComplexField2D, Distribution1D, Grid, ValidationError, width_at_half_max

# cells whose amplitude is below this fraction of the peak carry no phase
PHASE_MASK_LEVEL = 1e-6


class MetrologyError(BiphotonError):
    pass


def fold_phase(phi):
    """Map angles onto the branch ``(-pi/2, pi/2]``; the protocol only sees ``phi mod pi``."""
    folded = np.mod(np.asarray(phi, dtype=float) + np.pi / 2, np.pi) - np.pi / 2
    return np.where(np.isclose(folded, -np.pi / 2, rtol=0, atol=1e-15), np.pi / 2, folded)


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(tag,))))


@dataclass(frozen=True)
class PhaseMap:
    grid: Grid
    phi: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        valid = np.asarray(self.valid, dtype=bool)
        if phi.shape != (self.grid.n, self.grid.n) or valid.shape != phi.shape:
            raise ValidationError("phase map shape does not match its grid")
        if np.any(np.abs(phi[valid]) > np.pi / 2 + 1e-12):
            raise ValidationError("phases must lie in [-pi/2, pi/2]")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "valid", valid)


@dataclass(frozen=True)
class CountsTable:
    """Relative coincidence frequencies ``n(x1, x2)`` summing to one."""

    grid: Grid
    freq: np.ndarray
    n_total: int
    seed: int | None = None
    exact: bool = False

    def __post_init__(self):
        freq = np.asarray(self.freq, dtype=float)
        if freq.shape != (self.grid.n, self.grid.n):
            raise ValidationError("counts table shape does not match its grid")
        if np.any(freq < 0):
            raise ValidationError("negative frequencies")
        if abs(freq.sum() - 1.0) > 1e-12:
            raise ValidationError(f"frequencies sum to {freq.sum()!r}, expected 1")
        object.__setattr__(self, "freq", freq)


@dataclass(frozen=True)
class PolarizationTallies:
    """Event counts of one cell: first series (``n45``, ``n135``) and the
    quarter-wave-plate series (``nt45``, ``nt135``). Counts are expected
    values, hence fractional, in exact mode."""

    n45: float
    n135: float
    nt45: float
    nt135: float

    def probabilities(self):
        first = self.n45 + self.n135
        second = self.nt45 + self.nt135
        if first <= 0 or second <= 0:
            raise MetrologyError("empty measurement series")
        return self.n45 / first, self.n135 / first, self.nt45 / second, self.nt135 / second


def true_phase(psi: ComplexField2D) -> PhaseMap:
    """Argument of the coordinate amplitude folded onto the measurable branch."""
    if psi.representation != "coordinate":
        raise ValidationError("phase maps are defined for coordinate-representation fields")
    amp = np.abs(psi.values)
    valid = amp >= PHASE_MASK_LEVEL * amp.max()
    phi = np.where(valid, fold_phase(np.angle(psi.values)), 0.0)
    return PhaseMap(psi.grid_u, phi, valid)


def cell_probabilities(psi: ComplexField2D) -> np.ndarray:
    intensity = np.abs(psi.values) ** 2
    return intensity / intensity.sum()


def simulate_counts(psi: ComplexField2D, n_events: int, seed: int = 0, exact: bool = False) -> CountsTable:
    """Draw ``n_events`` coincidences over the cells with probability ``|psi|^2 * area``."""
    if psi.representation != "coordinate":
        raise ValidationError("counts are simulated from a coordinate-representation field")
    n_events = int(n_events)
    if n_events < 1:
        raise ValidationError("need at least one event")
    p = cell_probabilities(psi)
    if exact:
        return CountsTable(psi.grid_u, p, n_events, seed, exact=True)
    rng = _stream(seed, 0)
    counts = rng.multinomial(n_events, p.ravel()).reshape(p.shape)
    return CountsTable(psi.grid_u, counts / n_events, n_events, seed)


def side_diag_from_counts(counts: CountsTable) -> Distribution1D:
    """Side-diagonal distribution as the ``x2``-sum of the count frequencies."""
    rows = counts.freq.sum(axis=1)
    if not np.any(rows > 0):
        raise MetrologyError("all row sums are zero")
    return Distribution1D(counts.grid, rows).peak_normalized()


def phase_from_probabilities(w45, w135, wt45, wt135):
    """``2 phi = arccos(w45 - w135) * Sign(wt45 - wt135)`` with ``Sign(0) = +1``.

    With ``w45 + w135 = 1`` the arccos is evaluated as
    ``2 atan2(sqrt(w135), sqrt(w45))``, which stays accurate near
    ``phi = 0`` where the arccos form loses half the digits. Works
    elementwise; ``phi = -pi/2`` is reported as ``+pi/2``.
    """
    w45 = np.clip(np.asarray(w45, dtype=float), 0.0, None)
    w135 = np.clip(np.asarray(w135, dtype=float), 0.0, None)
    sign = np.where(np.asarray(wt45, dtype=float) - np.asarray(wt135, dtype=float) >= 0, 1.0, -1.0)
    phi = np.arctan2(np.sqrt(w135), np.sqrt(w45)) * sign
    return np.where(phi <= -np.pi / 2, np.pi / 2, phi)


def _series_probabilities(phi):
    """``(P45, P135, P~45, P~135)`` of the plain and quarter-wave-plate series."""
    phi = np.asarray(phi, dtype=float)
    s2 = np.sin(2.0 * phi)
    return np.cos(phi) ** 2, np.sin(phi) ** 2, 0.5 * (1.0 + s2), 0.5 * (1.0 - s2)


def measure_phase_cell(phi_true: float, n_pairs: int, seed: int = 0, exact: bool = False):
    """Simulate both polarization series for one cell; return ``(tallies, phi_hat)``."""
    n_pairs = int(n_pairs)
    if n_pairs < 1:
        raise ValidationError("need at least one pair per series")
    p45, p135, pt45, pt135 = _series_probabilities(phi_true)
    if exact:
        tallies = PolarizationTallies(*(n_pairs * float(p) for p in (p45, p135, pt45, pt135)))
    else:
        rng = _stream(seed, 1)
        n45, nt45 = (float(v) for v in rng.binomial(n_pairs, [p45, pt45]))
        tallies = PolarizationTallies(n45, n_pairs - n45, nt45, n_pairs - nt45)
    return tallies, float(phase_from_probabilities(*tallies.probabilities()))


def measure_phase_map(phase: PhaseMap, n_pairs: int, seed: int = 0, exact: bool = False) -> PhaseMap:
    """Run :func:`measure_phase_cell` on every valid cell, vectorized.

    All cells draw from one stream derived from ``seed``, so the map depends
    only on ``(seed, grid, n_pairs)``.
    """
    n_pairs = int(n_pairs)
    if n_pairs < 1:
        raise ValidationError("need at least one pair per series")
    p45, p135, pt45, pt135 = _series_probabilities(phase.phi)
    if exact:
        phi_hat = phase_from_probabilities(p45, p135, pt45, pt135)
    else:
        rng = _stream(seed, 2)
        n45 = rng.binomial(n_pairs, p45)
        nt45 = rng.binomial(n_pairs, pt45)
        phi_hat = phase_from_probabilities(n45 / n_pairs, (n_pairs - n45) / n_pairs,
                                           nt45 / n_pairs, (n_pairs - nt45) / n_pairs)
    return PhaseMap(phase.grid, np.where(phase.valid, phi_hat, 0.0), phase.valid)


def unwrap_branch(phase: PhaseMap) -> np.ndarray:
    """Lift branch phases (known mod pi) to a continuous surface, up to a global multiple of pi.

    Doubles the phases, unwraps them along the ``x1`` axis through the centre
    column and then along ``x2`` outward from it, and halves the result.
    Invalid cells are skipped and keep the value of their last valid neighbour.
    """
    n = phase.grid.n
    c = n // 2
    doubled = 2.0 * phase.phi
    out = np.zeros_like(doubled)

    def lift(values, mask):
        if not mask.any():
            return values
        lifted = values.copy()
        idx = np.nonzero(mask)[0]
        lifted[idx] = np.unwrap(values[idx])
        return lifted

    def outward(values, mask, start):
        # unwrap from `start` toward both ends so the anchor keeps its value
        right = lift(values[start:], mask[start:])
        left = lift(values[start::-1], mask[start::-1])[::-1]
        res = values.copy()
        res[start:] = right
        res[:start + 1] = left
        return res

    centre = outward(doubled[:, c], phase.valid[:, c], c)
    for i in range(n):
        row = doubled[i].copy()
        row[c] = centre[i]
        mask = phase.valid[i].copy()
        mask[c] = True
        out[i] = outward(row, mask, c)
    return 0.5 * out


@dataclass(frozen=True)
class MainDiagReconstruction:
    dist: Distribution1D
    max_imag: float
    unreliable: np.ndarray


def reconstruct_main_diag(counts: CountsTable, phase: PhaseMap, unwrap: bool = True) -> MainDiagReconstruction:
    """Main diagonal ``sum_x2 sqrt(n(x1,x2) n(-x1,x2)) exp(i[phi(x1,x2) - phi(-x1,x2)])``.

    The real part is the estimate; ``max_imag`` (relative to the peak) is kept
    as a diagnostic. Cells without a valid phase are dropped and the remaining
    sum rescaled by the fraction of amplitude weight retained; points that
    lose more than half of their cells are flagged ``unreliable``.
    """
    if counts.grid != phase.grid:
        raise ValidationError("counts and phase map live on different grids")
    phi = unwrap_branch(phase) if unwrap else phase.phi
    mirror = counts.grid.mirror()
    amp = np.sqrt(counts.freq * counts.freq[mirror, :])
    both = phase.valid & phase.valid[mirror, :]
    terms = amp * np.exp(1j * (phi - phi[mirror, :]))
    kept = np.where(both, amp, 0.0).sum(axis=1)
    total = amp.sum(axis=1)
    scale = np.divide(total, kept, out=np.zeros_like(total), where=kept > 0)
    values = np.where(both, terms, 0.0).sum(axis=1) * scale
    has_data = total > 0
    unreliable = has_data & (both.sum(axis=1) < 0.5 * (amp > 0).sum(axis=1))
    peak = np.max(values.real)
    if peak <= 0:
        raise MetrologyError("reconstructed main diagonal has no positive peak")
    return MainDiagReconstruction(
        dist=Distribution1D(counts.grid, values.real).peak_normalized(),
        max_imag=float(np.max(np.abs(values.imag)) / peak),
        unreliable=unreliable,
    )


def r_diag_measured(counts: CountsTable, phase: PhaseMap, unwrap: bool = True) -> float:
    side = side_diag_from_counts(counts)
    main = reconstruct_main_diag(counts, phase, unwrap=unwrap).dist
    return width_at_half_max(side) / width_at_half_max(main)


def phase_rms_error(estimate: PhaseMap, truth: PhaseMap) -> float:
    """RMS of the branch-aware difference over cells valid in both maps."""
    mask = estimate.valid & truth.valid
    diff = fold_phase(estimate.phi - truth.phi)
    return float(math.sqrt(np.mean(diff[mask] ** 2)))
