"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The lines are printed in the terminal summary (see ``conftest.py``) and also
as the tests run.
"""
import math
import subprocess
import sys

import numpy as np
import pytest

from biphoton import analytic, engine, metrology
from biphoton.calibration import optimize_s
from biphoton.cli import metrology_field
from biphoton.core import params_dimensionless, width_at_half_max

RESULTS = {}


def record(key, ok, detail):
    RESULTS[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# 1 -----------------------------------------------------------------------

ETAS_1 = [1 / 3, 1 / 2, 1.0, 2.0, 3.0]
ZETAS_1 = [0.0, 0.5, 1.0, 2.0, 5.0]


def test_criterion_1_two_gaussian_oracle():
    f = analytic.FWHM_PER_WIDTH
    worst_k = worst_w = worst_r = 0.0
    r_tr_at_1 = []
    for eta in ETAS_1:
        p = params_dimensionless(eta)
        mom = engine.entanglement_report(p, model="2g")
        dk_uc, dk_c = analytic.momentum_widths(p.a, p.b)
        worst_w = max(worst_w, abs(mom.widths["uc"] / (f * dk_uc) - 1),
                      abs(mom.widths["c"] / (f * dk_c) - 1))
        for zeta in ZETAS_1:
            rep = engine.entanglement_report(p, zeta_hat=zeta, representation="coordinate", model="2g")
            ref = analytic.two_gaussian_report(p.a, p.b, zeta)
            worst_k = max(worst_k, abs(rep.K / ref.K_2G - 1))
            for key, width in (("uc", ref.dx_uc), ("c", ref.dx_c), ("sd", ref.dx_sd), ("md", ref.dx_md)):
                worst_w = max(worst_w, abs(rep.widths[key] / (f * width) - 1))
            worst_r = max(worst_r, abs(rep.R_tr / ref.R_tr_x - 1), abs(rep.R_diag / ref.R_diag_x - 1))
            if zeta == 1.0:
                r_tr_at_1.append(rep.R_tr)
    dev_1 = max(abs(r - 1) for r in r_tr_at_1)
    ok = worst_k < 1e-3 and worst_w < 1e-2 and worst_r < 1e-2 and dev_1 < 1e-2
    record("1", ok, f"max rel err K {worst_k:.1e}, widths {worst_w:.1e}, ratios {worst_r:.1e}; "
                    f"max |R_tr(1)-1| {dev_1:.1e}")


# 2 -----------------------------------------------------------------------

def test_criterion_2_diagonal_reality():
    worst_diag = 0.0
    min_off = math.inf
    for eta in (1 / 3, 1.0, 3.0):
        p = params_dimensionless(eta)
        grid = engine.auto_grid(p, "gauss-sinc", 3.0)
        for zeta in (0.0, 1.0, 3.0):
            rho = engine.reduce(engine.propagated_field(p, grid, zeta, "gauss-sinc", "coordinate"))
            scale = np.max(np.abs(rho.values))
            d = engine.diag_dists(rho)
            worst_diag = max(worst_diag, d.side_max_imag, d.main_max_imag)
            if zeta == 3.0:
                min_off = min(min_off, np.max(np.abs(rho.values.imag)) / scale)
    ok = worst_diag < 1e-6 and min_off > 1e-2
    record("2", ok, f"max diagonal |Im|/max|rho| {worst_diag:.1e}; "
                    f"min over eta of off-diagonal max|Im|/max|rho| at zeta=3: {min_off:.2f}")


# 3 -----------------------------------------------------------------------

def test_criterion_3_zeta_invariance():
    worst = 0.0
    for model in ("2g", "gauss-sinc"):
        for eta in (1 / 3, 1.0, 3.0):
            p = params_dimensionless(eta)
            grid = engine.auto_grid(p, model, 5.0)
            k0 = engine.schmidt_k(engine.build_field(p, grid, model))
            for zeta in (1.0, 2.0, 5.0):
                for rep in ("momentum", "coordinate"):
                    k = engine.schmidt_k(engine.propagated_field(p, grid, zeta, model, rep))
                    worst = max(worst, abs(k - k0))
    record("3", worst < 1e-3, f"max |K(zeta)-K(0)| = {worst:.1e}")


# 4 -----------------------------------------------------------------------

def test_criterion_4_calibration():
    res = optimize_s()
    ok = (0.80 <= res.s_opt <= 0.90 and abs(res.eta_min - 1) <= 0.05 and res.asymmetry > 0)
    record("4", ok, f"s_opt {res.s_opt:.4f}, eta_min {res.eta_min:.4f}, K_min {res.K_min:.4f}, "
                    f"asymmetry {res.asymmetry:.4f}")


# 5 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig6():
    rows = []
    for eta in np.geomspace(1 / 6, 6, 61):
        rep = engine.entanglement_report(params_dimensionless(eta), model="gauss-sinc")
        rows.append((eta, rep.K, analytic.k_2g(eta), rep.R_tr, rep.R_diag))
    return np.array(rows)


def test_criterion_5a_k_above_2g(fig6):
    gap = np.min(fig6[:, 1] - fig6[:, 2])
    record("5a", gap > 0, f"min K_Gs - K_2G = {gap:.4f}")


def test_criterion_5b_diag_ratio_close_to_k(fig6):
    rel = np.abs(fig6[:, 4] - fig6[:, 1]) / fig6[:, 1]
    i = int(np.argmax(rel))
    record("5b", rel[i] < 0.10, f"max |R_diag-K|/K = {rel[i]:.3f} at eta = {fig6[i, 0]:.3f} "
                                f"(limit 0.10; exceeded for eta < {fig6[rel >= 0.10, 0].max(initial=0):.3f})")


def test_criterion_5c_r_tr_below_one(fig6):
    below = fig6[fig6[:, 3] < 1, 0]
    detail = (f"R_tr < 1 for eta in [{below.min():.3f}, {below.max():.3f}]" if len(below)
              else "R_tr never below 1")
    record("5c", len(below) > 0, detail)


# 6 -----------------------------------------------------------------------

def sweep_zeta(eta, zetas):
    p = params_dimensionless(eta)
    grid = engine.auto_grid(p, "gauss-sinc", max(zetas))
    reps = [engine.entanglement_report(p, grid, z, "coordinate", "gauss-sinc") for z in zetas]
    return engine.schmidt_k(engine.build_field(p, grid, "gauss-sinc")), reps


def fig78_claims(eta):
    zetas = np.linspace(0.0, 5.0, 21)
    k, reps = sweep_zeta(eta, zetas)
    tail = reps[1:]
    tr_dev = max(abs(r.R_tr / k - 1) for r in tail)
    diag_dev = max(abs(r.R_diag / k - 1) for r in tail)
    sd = np.array([r.widths["sd"] for r in reps])
    md = np.array([r.widths["md"] for r in reps])
    mono = bool(np.all(np.diff(sd) > 0) and np.all(np.diff(md) > 0))
    return tr_dev, diag_dev, mono, k


def test_criterion_6_propagation_claims():
    tr_dev, diag_dev, mono, k = fig78_claims(3.0)
    info = []
    for eta in (1 / 3, 1.0):
        t, d, m, kk = fig78_claims(eta)
        info.append(f"eta={eta:.3g}: R_tr dev {t:.2f}, R_diag dev {d:.3f}, monotone {m}")
    ok = tr_dev > 0.25 and diag_dev < 0.10 and mono
    record("6", ok, f"eta=3 (K={k:.4f}): max R_tr dev {tr_dev:.2f}, max R_diag dev {diag_dev:.3f}, "
                    f"widths monotone {mono} | informational {'; '.join(info)}")


# 7 -----------------------------------------------------------------------

def test_criterion_7_reconstruction_identity():
    phis = np.linspace(-np.pi / 2, np.pi / 2, 20001)[1:-1]
    id_err = max(abs(metrology.measure_phase_cell(phi, 10_000, exact=True)[1] - phi) for phi in phis)
    rec_err = 0.0
    for zeta in (0.0, 2.0):
        psi = metrology_field(params_dimensionless(3.0), "2g", zeta)
        direct = engine.diag_dists(engine.reduce(psi)).main.values
        counts = metrology.simulate_counts(psi, 1, exact=True)
        phase = metrology.measure_phase_map(metrology.true_phase(psi), 1, exact=True)
        rec = metrology.reconstruct_main_diag(counts, phase).dist.values
        rec_err = max(rec_err, np.max(np.abs(rec - direct)) / np.max(direct))
    ok = id_err < 1e-12 and rec_err < 1e-3
    record("7", ok, f"max |phi_hat - phi| {id_err:.1e}; max main-diagonal rel err {rec_err:.1e}")


# 8 -----------------------------------------------------------------------

def test_criterion_8_statistical_metrology():
    psi = metrology_field(params_dimensionless(3.0), "2g", 2.0)
    d = engine.diag_dists(engine.reduce(psi))
    direct = width_at_half_max(d.side) / width_at_half_max(d.main)
    truth = metrology.true_phase(psi)
    est = np.array([metrology.r_diag_measured(metrology.simulate_counts(psi, 1_000_000, seed),
                                              metrology.measure_phase_map(truth, 10_000, seed))
                    for seed in range(100)])
    mean_err = abs(est.mean() / direct - 1)

    pairs = np.array([1e2, 1e3, 1e4, 1e5])
    rms = [np.mean([metrology.phase_rms_error(metrology.measure_phase_map(truth, int(n), seed), truth)
                    for seed in range(20)]) for n in pairs]
    alpha = np.polyfit(np.log(pairs), np.log(rms), 1)[0]
    ok = mean_err < 0.05 and -0.6 <= alpha <= -0.4
    record("8", ok, f"R_diag sampled {est.mean():.4f} +/- {est.std(ddof=1):.4f} vs direct {direct:.4f} "
                    f"(rel {mean_err:.1e}); phase RMS exponent {alpha:.3f}")


# 9 -----------------------------------------------------------------------

CLI_RUNS = [
    ["sweep-eta", "--eta", "0.25:4:9", "--grid-n", "256"],
    ["sweep-eta", "--eta", "0.25:4:5", "--grid-n", "256", "--workers", "2", "--format", "json"],
    ["sweep-zeta", "--eta", "3", "--zeta", "0:3:4", "--grid-n", "256"],
    ["calibrate-s", "--grid-n", "256", "--eta", "0.25:4:21"],
    ["calibrate-s", "--model", "2g", "--grid-n", "128", "--eta", "0.25:4:11"],
    *[["figure", str(k), "--grid-n", "256", "--eta", "0.5:2:5", "--zeta", "0:2:3"] for k in range(2, 9)],
    ["metrology", "--seed", "7", "--seeds", "5"],
    ["metrology", "--seed", "7", "--seeds", "5", "--format", "json"],
]


def test_criterion_9_reproducibility():
    mismatched = []
    for args in CLI_RUNS:
        outs = [subprocess.run([sys.executable, "-m", "biphoton", *args], capture_output=True,
                               check=True).stdout for _ in range(2)]
        if outs[0] != outs[1] or not outs[0]:
            mismatched.append(" ".join(args))
    record("9", not mismatched, f"{len(CLI_RUNS) - len(mismatched)}/{len(CLI_RUNS)} CLI runs "
                                f"byte-identical" + (f"; differing: {mismatched}" if mismatched else ""))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
