import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biphoton import engine, metrology
from biphoton.cli import metrology_field
from biphoton.core import ValidationError, params_dimensionless, width_at_half_max


@pytest.fixture(scope="module")
def field_2g():
    return metrology_field(params_dimensionless(3.0), "2g", 2.0)


def test_fold_phase_branch():
    phi = np.array([-math.pi / 2, 0.3, math.pi, 3 * math.pi / 2 + 0.1])
    np.testing.assert_allclose(metrology.fold_phase(phi), [math.pi / 2, 0.3, 0.0, -math.pi / 2 + 0.1])


@settings(max_examples=200, deadline=None)
@given(phi=st.floats(-math.pi / 2 + 1e-9, math.pi / 2))
def test_exact_cell_measurement_is_identity(phi):
    tallies, est = metrology.measure_phase_cell(phi, 10_000, exact=True)
    assert est == pytest.approx(phi, abs=1e-12)
    assert tallies.n45 + tallies.n135 == pytest.approx(10_000)


def test_arccos_form_agrees_in_the_bulk():
    phi = np.linspace(-1.5, 1.5, 31)
    w45, w135 = np.cos(phi) ** 2, np.sin(phi) ** 2
    est = metrology.phase_from_probabilities(w45, w135, 0.5 * (1 + np.sin(2 * phi)), 0.5 * (1 - np.sin(2 * phi)))
    np.testing.assert_allclose(est, 0.5 * np.arccos(w45 - w135) * np.sign(phi + 1e-300), atol=1e-12)


def test_sign_of_zero_is_positive():
    assert metrology.phase_from_probabilities(0.0, 1.0, 0.5, 0.5) == pytest.approx(math.pi / 2)


def test_cell_measurement_reproducible():
    a = metrology.measure_phase_cell(0.4, 500, seed=11)
    b = metrology.measure_phase_cell(0.4, 500, seed=11)
    c = metrology.measure_phase_cell(0.4, 500, seed=12)
    assert a == b and a != c


def test_counts_sum_and_reproducible(field_2g):
    c1 = metrology.simulate_counts(field_2g, 10_000, seed=5)
    c2 = metrology.simulate_counts(field_2g, 10_000, seed=5)
    np.testing.assert_array_equal(c1.freq, c2.freq)
    assert c1.freq.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(c1.freq * 10_000, np.round(c1.freq * 10_000), atol=1e-9)


def test_counts_need_coordinate_field():
    p = params_dimensionless(1.0)
    psi = engine.build_field(p, engine.auto_grid(p, "2g"), "2g")
    with pytest.raises(ValidationError):
        metrology.simulate_counts(psi, 10)


def test_exact_reconstruction_matches_direct(field_2g):
    direct = engine.diag_dists(engine.reduce(field_2g)).main
    truth = metrology.true_phase(field_2g)
    counts = metrology.simulate_counts(field_2g, 1, exact=True)
    phase = metrology.measure_phase_map(truth, 1, exact=True)
    rec = metrology.reconstruct_main_diag(counts, phase)
    np.testing.assert_allclose(rec.dist.values, direct.values, atol=1e-8)
    assert rec.max_imag < 1e-10
    # only the far tails, where the amplitude sits under the phase mask, lose cells
    assert not rec.unreliable[direct.values > 1e-6].any()


def test_unwrapping_is_needed_at_finite_zeta(field_2g):
    truth = metrology.true_phase(field_2g)
    counts = metrology.simulate_counts(field_2g, 1, exact=True)
    phase = metrology.measure_phase_map(truth, 1, exact=True)
    direct = engine.diag_dists(engine.reduce(field_2g)).main
    folded = metrology.reconstruct_main_diag(counts, phase, unwrap=False).dist
    assert np.max(np.abs(folded.values - direct.values)) > 1e-3


def test_side_diagonal_from_counts_is_exact(field_2g):
    counts = metrology.simulate_counts(field_2g, 1, exact=True)
    side = metrology.side_diag_from_counts(counts)
    direct = engine.diag_dists(engine.reduce(field_2g)).side
    # equal-area cells versus trapezoid end weights
    np.testing.assert_allclose(side.values, direct.values, atol=1e-7)


def test_sampled_r_diag_close_to_direct(field_2g):
    d = engine.diag_dists(engine.reduce(field_2g))
    direct = width_at_half_max(d.side) / width_at_half_max(d.main)
    truth = metrology.true_phase(field_2g)
    est = [metrology.r_diag_measured(metrology.simulate_counts(field_2g, 1_000_000, k),
                                     metrology.measure_phase_map(truth, 10_000, k)) for k in range(10)]
    assert np.mean(est) == pytest.approx(direct, rel=0.02)


def test_phase_rms_is_branch_aware():
    g = metrology.true_phase(metrology_field(params_dimensionless(1.0), "2g", 1.0)).grid
    phi = np.full((g.n, g.n), math.pi / 2 - 1e-3)
    truth = metrology.PhaseMap(g, phi, np.ones_like(phi, dtype=bool))
    est = metrology.PhaseMap(g, -phi, truth.valid)
    assert metrology.phase_rms_error(est, truth) == pytest.approx(2e-3, rel=1e-6)


def test_mismatched_grids_rejected(field_2g):
    other = metrology_field(params_dimensionless(1.0), "2g", 0.0, cells=32)
    with pytest.raises(ValidationError):
        metrology.reconstruct_main_diag(metrology.simulate_counts(field_2g, 1, exact=True),
                                        metrology.true_phase(other))
