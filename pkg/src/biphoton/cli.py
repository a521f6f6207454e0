"""Command-line front end: sweeps, calibration, figure data and metrology runs.

Settings are resolved with the precedence command-line flags > config file >
defaults, and the resolved configuration is echoed into every output header.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, analytic, engine, metrology
from .calibration import optimize_s, scan_grid, symmetry_rows
from .core import BiphotonError, Grid, ValidationError, params_dimensionless, width_at_half_max
from .tables import Report, Table, emit_csv, emit_json

MODES = ("sweep-eta", "sweep-zeta", "calibrate-s", "figure", "metrology")
MODELS = ("2g", "gauss-sinc")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "sweep-eta"
    model: str = "gauss-sinc"
    eta: str = "0.16666666666666666:6:61"
    zeta: str = "0:5:21"
    s: float = 0.85
    s_range: str = "0.5:1.5"
    grid_n: int = 512
    extent: float | None = None
    seed: int | None = None
    events: int = 1_000_000
    pairs: int = 10_000
    seeds: int = 100
    cells: int = 64
    figure: int | None = None
    workers: int = 1
    out: str | None = None
    format: str = "csv"

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.model not in MODELS:
            raise ValidationError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.format not in FORMATS:
            raise ValidationError(f"format must be one of {FORMATS}, got {self.format!r}")
        parse_range(self.eta, log=True)
        parse_range(self.zeta)
        parse_range(self.s_range)
        if self.s <= 0:
            raise ValidationError("s must be positive")
        if self.grid_n < 16 or self.cells < 16:
            raise ValidationError("grids need at least 16 nodes")
        if self.extent is not None and self.extent <= 0:
            raise ValidationError("extent must be positive")
        if min(self.events, self.pairs, self.seeds, self.workers) < 1:
            raise ValidationError("events, pairs, seeds and workers must be >= 1")
        if self.mode == "metrology" and self.seed is None:
            raise ValidationError("metrology runs need an explicit --seed")
        if self.mode == "figure" and self.figure not in range(2, 9):
            raise ValidationError("figure number must be between 2 and 8")
        return self


def parse_range(text: str, log: bool = False) -> np.ndarray:
    """``"v"`` for one value, ``"lo:hi"`` for the endpoints, ``"lo:hi:steps"`` for a sweep.

    Sweeps are log-spaced when ``log`` is set (used for eta) and linear otherwise.
    """
    parts = str(text).split(":")
    try:
        values = [float(p) for p in parts[:2]]
        steps = int(parts[2]) if len(parts) == 3 else (1 if len(parts) == 1 else 2)
    except ValueError as exc:
        raise ValidationError(f"cannot parse range {text!r}") from exc
    if len(parts) > 3 or steps < 1:
        raise ValidationError(f"invalid range {text!r}")
    if len(values) == 1:
        return np.array(values)
    lo, hi = values
    if hi < lo:
        raise ValidationError(f"empty range {text!r}")
    if steps == 1:
        return np.array([lo])
    if log:
        if lo <= 0:
            raise ValidationError(f"log range must be positive: {text!r}")
        return np.geomspace(lo, hi, steps)
    return np.linspace(lo, hi, steps)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(name: str, value):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    if name not in kinds:
        raise ValidationError(f"unknown config key {name!r}")
    kind = kinds[name]
    if value is None or value == "None":
        return None
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return str(value)


def build_config(file_values: dict, flag_values: dict,
                 mode_defaults: dict | None = None) -> tuple[RunConfig, dict]:
    """Merge defaults, file and flags; also return where each non-default came from."""
    merged, sources = {}, {}
    layers = (("mode-default", mode_defaults or {}), ("file", file_values), ("flag", flag_values))
    for origin, values in layers:
        for key, value in values.items():
            if value is None:
                continue
            merged[key] = _coerce(key, value)
            sources[key] = origin
    return replace(RunConfig(), **merged).validate(), sources


# ---------------------------------------------------------------- runs

def _map(func, items, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _grid(cfg: RunConfig, params, zeta_max=0.0) -> Grid:
    if cfg.extent is not None:
        return Grid(cfg.grid_n, cfg.extent)
    return engine.auto_grid(params, cfg.model, zeta_max, n=cfg.grid_n)


def _eta_point(args):
    cfg, eta = args
    params = params_dimensionless(eta, s=cfg.s)
    try:
        rep = engine.entanglement_report(params, _grid(cfg, params), 0.0, "momentum", cfg.model)
    except BiphotonError as exc:
        raise type(exc)(f"eta={eta:g}: {exc}") from exc
    return (float(eta), rep.K, analytic.k_2g(eta), rep.R_tr, rep.R_diag)


def run_sweep_eta(cfg: RunConfig) -> Report:
    """Momentum-representation K, K_2G, R_tr and R_diag over the eta range."""
    etas = parse_range(cfg.eta, log=True)
    rows = _map(_eta_point, [(cfg, float(e)) for e in etas], cfg.workers)
    return Report({"sweep_eta": Table(["eta", "K", "K_2G", "R_tr", "R_diag"], rows)})


def _zeta_point(args):
    cfg, eta, zeta, grid = args
    params = params_dimensionless(eta, s=cfg.s)
    try:
        rep = engine.entanglement_report(params, grid, zeta, "coordinate", cfg.model)
    except BiphotonError as exc:
        raise type(exc)(f"zeta_hat={zeta:g}: {exc}") from exc
    unit = math.sqrt(params.a ** 2 + params.b ** 2)
    w = rep.widths
    return (float(zeta), w["uc"] / unit, w["c"] / unit, w["sd"] / unit, w["md"] / unit,
            rep.R_tr, rep.R_diag, rep.K)


def run_sweep_zeta(cfg: RunConfig) -> Report:
    """Coordinate-representation widths (units sqrt(a^2+b^2), level-0.5) and ratios vs zeta_hat."""
    zetas = parse_range(cfg.zeta)
    eta = float(parse_range(cfg.eta, log=True)[0])
    params = params_dimensionless(eta, s=cfg.s)
    grid = _grid(cfg, params, float(np.max(np.abs(zetas))))
    rows = _map(_zeta_point, [(cfg, eta, float(z), grid) for z in zetas], cfg.workers)
    cols = ["zeta_hat", "dx_uc", "dx_c", "dx_sd", "dx_md", "R_tr", "R_diag", "K"]
    return Report({"sweep_zeta": Table(cols, rows)}, {"eta": eta, "grid": [grid.n, grid.extent]})


def run_calibrate(cfg: RunConfig) -> Report:
    lo, hi = parse_range(cfg.s_range)[[0, -1]]
    eta_range = tuple(parse_range(cfg.eta, log=True)[[0, -1]])
    result = optimize_s((float(lo), float(hi)), eta_range, n=cfg.grid_n, model=cfg.model)
    summary = {
        "s_opt": result.s_opt,
        "eta_min": result.eta_min,
        "K_min": result.K_min,
        "asymmetry": result.asymmetry,
        "status": "degenerate: every s optimal" if result.degenerate else "ok",
    }
    return Report({
        "scan": Table(["s", "eta_min", "K_min"], [tuple(r) for r in result.scan]),
        "symmetry": Table(["eta", "K_eta", "K_inv_eta"], [tuple(r) for r in result.curve]),
    }, {"summary": summary})


def run_metrology(cfg: RunConfig) -> Report:
    """Counts, phase maps, direct and reconstructed diagonals and R_diag estimates."""
    eta = float(parse_range(cfg.eta, log=True)[0])
    zeta = float(parse_range(cfg.zeta)[0])
    params = params_dimensionless(eta, s=cfg.s)
    psi = metrology_field(params, cfg.model, zeta, cfg.cells, _grid(cfg, params, zeta))
    x = psi.grid_u.nodes

    diag = engine.diag_dists(engine.reduce(psi))
    r_direct = width_at_half_max(diag.side) / width_at_half_max(diag.main)
    truth = metrology.true_phase(psi)

    exact_counts = metrology.simulate_counts(psi, cfg.events, cfg.seed, exact=True)
    exact_phase = metrology.measure_phase_map(truth, cfg.pairs, cfg.seed, exact=True)
    exact_main = metrology.reconstruct_main_diag(exact_counts, exact_phase)
    r_exact = metrology.r_diag_measured(exact_counts, exact_phase)

    estimates = []
    for k in range(cfg.seeds):
        counts = metrology.simulate_counts(psi, cfg.events, cfg.seed + k)
        phase = metrology.measure_phase_map(truth, cfg.pairs, cfg.seed + k)
        estimates.append(metrology.r_diag_measured(counts, phase))
        if k == 0:
            first_counts, first_phase = counts, phase
    first_main = metrology.reconstruct_main_diag(first_counts, first_phase)
    side_counts = metrology.side_diag_from_counts(first_counts)

    n = len(x)
    counts_rows = [(float(x[i]), float(x[j]), float(first_counts.freq[i, j]))
                   for i in range(n) for j in range(n)]
    phase_rows = [(float(x[i]), float(x[j]), float(truth.phi[i, j]), float(first_phase.phi[i, j]),
                   int(truth.valid[i, j])) for i in range(n) for j in range(n)]
    diag_rows = [(float(x[i]), float(diag.side.values[i]), float(diag.main.values[i]),
                  float(side_counts.values[i]), float(exact_main.dist.values[i]),
                  float(first_main.dist.values[i])) for i in range(n)]
    est = np.array(estimates)
    summary = {
        "R_diag_direct": r_direct,
        "R_diag_exact": r_exact,
        "R_diag_sampled_mean": float(est.mean()),
        "R_diag_sampled_std": float(est.std(ddof=1)) if len(est) > 1 else 0.0,
        "seeds": cfg.seeds,
        "max_imag_exact": exact_main.max_imag,
        "max_imag_sampled": first_main.max_imag,
        "phase_rms_error": metrology.phase_rms_error(first_phase, truth),
        "K_2G": analytic.k_2g(eta),
    }
    return Report({
        "counts": Table(["x1", "x2", "n"], counts_rows),
        "phase": Table(["x1", "x2", "phi_true", "phi_measured", "valid"], phase_rows),
        "diagonals": Table(["x", "side_direct", "main_direct", "side_counts", "main_exact",
                            "main_sampled"], diag_rows),
        "estimates": Table(["seed", "R_diag"], [(cfg.seed + k, float(v)) for k, v in enumerate(est)]),
    }, {"summary": summary})


def metrology_field(params, model, zeta_hat, cells=64, grid: Grid | None = None):
    """Coordinate field on a coarse ``cells``-node detector lattice covering the 1e-6 support."""
    if grid is None:
        grid = engine.auto_grid(params, model, zeta_hat)
    mom = engine.apply_propagation(engine.build_field(params, grid, model), zeta_hat)
    extent = engine.coordinate_support(mom, metrology.PHASE_MASK_LEVEL)
    return engine.to_coordinate(mom, Grid(cells, extent))


# mode-specific defaults sit between the global defaults and the config file
MODE_DEFAULTS = {
    "sweep-zeta": {"eta": "3"},
    "metrology": {"model": "2g", "eta": "3", "zeta": "2"},
}

FIGURE_DEFAULTS = {
    # double-Gaussian propagation plots use b/a = 1/3
    3: {"model": "2g", "eta": str(1 / 3)},
    4: {"model": "2g", "eta": str(1 / 3)},
    5: {"model": "gauss-sinc"},
    6: {"model": "gauss-sinc"},
    7: {"model": "gauss-sinc", "eta": "3"},
    8: {"model": "gauss-sinc", "eta": "3"},
}


def run_figure(cfg: RunConfig) -> Report:
    """Data behind one figure; no rendering."""
    number = cfg.figure
    if number == 2:
        u = np.linspace(-2.0, 2.0, 401)
        gauss = np.exp(-u * u)
        sinc2 = engine.sinc(2.0 * u * u) ** 2
        meta = {"fwhm_gauss": width_at_half_max(gauss, u), "fwhm_sinc2": width_at_half_max(sinc2, u)}
        rows = [(float(a), float(b), float(c)) for a, b, c in zip(u, gauss, sinc2)]
        return Report({"figure2": Table(["u", "exp_u2", "sinc2_2u2"], rows)}, meta)
    if number in (3, 4):
        eta = float(parse_range(cfg.eta, log=True)[0])
        params = params_dimensionless(eta)
        a, b = params.a, params.b
        unit = math.sqrt(a * a + b * b)
        rows = []
        for z in parse_range(cfg.zeta):
            uc, c, sd, md = analytic.widths_coordinate(a, b, z)
            if number == 3:
                rows.append((float(z), uc / unit, c / unit, analytic.r_tr_x(a, b, z), analytic.k_2g(eta)))
            else:
                rows.append((float(z), sd / unit, md / unit, c / unit, sd / md, analytic.k_2g(eta)))
        cols = (["zeta_hat", "dx_uc", "dx_c", "R_tr", "K_2G"] if number == 3
                else ["zeta_hat", "dx_sd", "dx_md", "dx_c", "R_diag", "K_2G"])
        return Report({f"figure{number}": Table(cols, rows)},
                      {"eta": eta, "widths": "1/e, units sqrt(a^2+b^2)"})
    if number == 5:
        etas = parse_range(cfg.eta, log=True)
        lo, hi = float(etas[0]), float(etas[-1])
        rows, asym = symmetry_rows(cfg.s, etas, scan_grid(cfg.s, (lo, hi), cfg.grid_n, cfg.model), cfg.model)
        return Report({"figure5": Table(["eta", "K_eta", "K_inv_eta"], rows)}, {"asymmetry": asym})
    if number == 6:
        return Report({"figure6": run_sweep_eta(cfg).tables["sweep_eta"]})
    report = run_sweep_zeta(cfg)
    table = report.tables["sweep_zeta"]
    keep = (["zeta_hat", "dx_uc", "dx_c", "R_tr", "K"] if number == 7
            else ["zeta_hat", "dx_sd", "dx_md", "R_diag", "K"])
    idx = [table.columns.index(c) for c in keep]
    rows = [tuple(row[i] for i in idx) for row in table.rows]
    return Report({f"figure{number}": Table(keep, rows)}, report.meta)


RUNNERS = {
    "sweep-eta": run_sweep_eta,
    "sweep-zeta": run_sweep_zeta,
    "calibrate-s": run_calibrate,
    "figure": run_figure,
    "metrology": run_metrology,
}


def execute(cfg: RunConfig, sources: dict | None = None) -> str:
    """Run ``cfg`` and return the serialized output."""
    report = RUNNERS[cfg.mode](cfg)
    header = {"version": __version__, "config": asdict(cfg), "sources": sources or {}}
    report.meta = {**header, **report.meta}
    return emit_csv(report) if cfg.format == "csv" else emit_json(report)


# ---------------------------------------------------------------- argparse

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biphoton", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--eta", help="value, lo:hi or lo:hi:steps (log-spaced)")
    common.add_argument("--zeta", help="value, lo:hi or lo:hi:steps (dimensionless zeta/ab)")
    common.add_argument("--s", type=float, help="sinc fitting parameter")
    common.add_argument("--s-range", dest="s_range", help="lo:hi bracket for calibrate-s")
    common.add_argument("--grid-n", dest="grid_n", type=int, help="momentum grid nodes")
    common.add_argument("--extent", type=float, help="momentum grid half-width override")
    common.add_argument("--seed", type=int)
    common.add_argument("--events", type=int, help="coincidence events per run")
    common.add_argument("--pairs", type=int, help="polarization pairs per cell and series")
    common.add_argument("--seeds", type=int, help="number of seeds for the sampled error bar")
    common.add_argument("--cells", type=int, help="detector lattice nodes per axis")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output file (stdout if omitted)")
    common.add_argument("--format", choices=FORMATS)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("sweep-eta", "sweep-zeta", "calibrate-s", "metrology"):
        sub.add_parser(mode, parents=[common])
    fig = sub.add_parser("figure", parents=[common])
    fig.add_argument("figure", type=int, choices=range(2, 9))
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k != "config" and v is not None}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        defaults = MODE_DEFAULTS.get(args.mode, {})
        if args.mode == "figure":
            defaults = FIGURE_DEFAULTS.get(args.figure, {})
        cfg, sources = build_config(file_values, flags, defaults)
        text = execute(cfg, sources)
    except (BiphotonError, ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "mode": args.mode}
        sys.stderr.write(json.dumps(err) + "\n")
        return 2
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
