"""``rbswitch`` command-line entry point.

Exit status: 0 success, 2 configuration error, 3 domain or precondition
error, 4 output error, 5 optimizer did not converge, 1 any other simulator
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .atomic import doppler_susceptibility, rabi_frequency
from .cavity import bandwidth, finesse, free_spectral_range, ring_up_time
from .config import ENV_VAR, RunConfig, load_config
from .constants import ghz_to_rad_s
from .dynamics import simulate_switching, window_metrics, write_metrics_json, write_trace_csv
from .errors import ConfigError, ConvergenceError, DomainError, OutputError, SwitchError
from .fitting import PARAM_NAMES, FitProblem, fit_least_squares, load_fit_data, synthetic_data
from .sweeps import (
    sweep_2d,
    sweep_contrast_diagonal,
    write_contours_json,
    write_diagonal_csv,
    write_matrix_csv,
)

log = logging.getLogger("rbswitch")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_OUTPUT = 4
EXIT_CONVERGENCE = 5


def _outdir(cfg: RunConfig) -> Path:
    path = cfg.output_dir
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _write_json(path: Path, payload) -> Path:
    return _write_text(path, json.dumps(payload, indent=2) + "\n")


def cmd_response(cfg: RunConfig) -> list[Path]:
    """Susceptibility, index, absorption and phase against signal detuning (control on)."""
    s = cfg.raw["sweep"]
    axis = np.linspace(s["delta_s_min_ghz"], s["delta_s_max_ghz"], s["points_s"])
    fld = cfg.field_config()
    omega = rabi_frequency(fld.control_power, fld.beam_waist, cfg.atom.dipole_ed)
    chi = doppler_susceptibility(
        ghz_to_rad_s(axis), fld.delta_c, omega, cfg.atom, cfg.cell, fld.geometry, **cfg.doppler
    )
    n = np.sqrt(1 + np.asarray(chi))
    k = cfg.atom.k_s
    alpha = 2 * k * n.imag
    phase = k * (n.real - 1) * cfg.cell.length_v
    transmission = np.exp(-alpha * cfg.cell.length_v)
    lines = ["delta_s_ghz,chi_re,chi_im,n_re,n_im,alpha_per_m,phase_rad,transmission"]
    for row in zip(axis, chi.real, chi.imag, n.real, n.imag, alpha, phase, transmission):
        lines.append(",".join(f"{v:.9e}" for v in row))
    return [_write_text(_outdir(cfg) / "response.csv", "\n".join(lines) + "\n")]


def cmd_sweep2d(cfg: RunConfig) -> list[Path]:
    s = cfg.raw["sweep"]
    grid = sweep_2d(
        (s["delta_s_min_ghz"], s["delta_s_max_ghz"]),
        (s["delta_c_min_ghz"], s["delta_c_max_ghz"]),
        (s["points_s"], s["points_c"]),
        cfg.field_config(),
        cfg.atom,
        cfg.cell,
        **cfg.doppler,
    )
    out = _outdir(cfg)
    return [
        write_matrix_csv(grid, out / "phase_map.csv", "phase"),
        write_matrix_csv(grid, out / "transmission_map.csv", "transmission"),
        write_contours_json(grid, out / "contours.json"),
    ]


def _diagonal_axis(cfg: RunConfig) -> np.ndarray:
    s = cfg.raw["sweep"]
    return np.linspace(s["diagonal_min_ghz"], s["diagonal_max_ghz"], s["diagonal_points"])


def cmd_sweep1d(cfg: RunConfig) -> list[Path]:
    points = sweep_contrast_diagonal(
        _diagonal_axis(cfg), cfg.field_config(), cfg.atom, cfg.cell, cfg.cavity, bias_policy=cfg.bias_policy, **cfg.doppler
    )
    return [write_diagonal_csv(points, _outdir(cfg) / "diagonal.csv")]


def cmd_dynamics(cfg: RunConfig) -> list[Path]:
    p = cfg.raw["pulses"]
    out = _outdir(cfg)
    files, summary = [], {}
    for pulses in cfg.pulse_trains():
        trace = simulate_switching(
            cfg.cavity,
            cfg.atom,
            cfg.cell,
            cfg.field_config(),
            pulses,
            p["periods"] * pulses.period,
            samples_per_round_trip=p["samples_per_round_trip"],
            bias_policy=cfg.bias_policy,
            **cfg.doppler,
        )
        label = f"{pulses.modulation_rate / 1e6:g}MHz"
        files.append(write_trace_csv(trace, out / f"trace_{label}.csv"))
        summary[label] = {"modulation_rate_hz": pulses.modulation_rate, **window_metrics(trace).to_dict()}
        log.info("%s: %s", label, summary[label])
    files.append(write_metrics_json(summary, out / "dynamics_metrics.json"))
    return files


def _fit_problem(cfg: RunConfig, data_path: str | None) -> tuple[FitProblem, str, list[Path]]:
    t = cfg.raw["fit"]
    bounds = {"temperature_K": tuple(t["temperature_bounds_K"]), "intracavity_power_W": tuple(t["power_bounds_W"])}
    fixed = dict(field=cfg.field_config(), atom=cfg.atom, cell=cfg.cell, cavity=cfg.cavity, bias_policy=cfg.bias_policy)
    data_path = data_path or t["data_file"]
    written: list[Path] = []
    if data_path:
        x, y = load_fit_data(data_path)
        source = str(data_path)
    else:
        s = cfg.raw["sweep"]
        x = np.linspace(s["diagonal_min_ghz"], s["diagonal_max_ghz"], t["synthetic_points"])
        template = FitProblem(x, np.zeros_like(x), bounds=bounds, **fixed)
        y = synthetic_data(
            template, x, t["synthetic_temperature_K"], t["synthetic_power_W"], noise_sigma=t["synthetic_noise"], seed=cfg.seed
        )
        source = "synthetic"
        lines = ["detuning_ghz,contrast"] + [f"{a:.9e},{b:.9e}" for a, b in zip(x, y)]
        written.append(_write_text(_outdir(cfg) / "fit_data.csv", "\n".join(lines) + "\n"))
    return FitProblem(x, y, bounds=bounds, **fixed), source, written


def cmd_fit(cfg: RunConfig, data_path: str | None = None) -> list[Path]:
    t = cfg.raw["fit"]
    problem, source, files = _fit_problem(cfg, data_path)
    results = {
        "nelder_mead": fit_least_squares(
            problem, "nelder_mead", starts=t["nm_starts"], xtol=t["xtol"], max_iter=t["max_iter"]
        ),
        "grid_refine": fit_least_squares(problem, "grid_refine"),
    }
    out = _outdir(cfg)
    payload = {
        "data_source": source,
        "n_points": int(problem.detuning_ghz.size),
        "seed": cfg.seed if source == "synthetic" else None,
        "results": {name: r.to_dict() for name, r in results.items()},
    }
    files.append(_write_json(out / "fit_result.json", payload))
    axis = _diagonal_axis(cfg)
    curves = {}
    for name, r in results.items():
        T, P = (r.best_params[k] for k in PARAM_NAMES)
        model = replace(problem, detuning_ghz=axis, contrast=np.zeros_like(axis)) if axis.size >= 5 else problem
        curves[name] = model.model(T, P)
    lines = ["detuning_ghz,contrast_nelder_mead,contrast_grid_refine"]
    for a, c1, c2 in zip(model.detuning_ghz, curves["nelder_mead"], curves["grid_refine"]):
        lines.append(f"{a:.9e},{c1:.9e},{c2:.9e}")
    files.append(_write_text(out / "fit_curve.csv", "\n".join(lines) + "\n"))
    failed = [name for name, r in results.items() if not r.converged]
    if failed:
        raise ConvergenceError(f"optimizer(s) {failed} did not converge; best-so-far results written to {out}")
    return files


def cavity_info(cfg: RunConfig) -> dict:
    cav = cfg.cavity
    F = finesse(cav)
    return {
        "round_trip_factor": cav.round_trip_factor,
        "finesse": F,
        "round_trip_length_m": cav.round_trip_length,
        "free_spectral_range_hz": free_spectral_range(cav),
        "bandwidth_hz": bandwidth(cav),
        "ring_up_time_s": ring_up_time(F, cav.round_trip_length),
    }


def cmd_cavity_info(cfg: RunConfig, as_json: bool = False) -> list[Path]:
    info = cavity_info(cfg)
    if as_json:
        print(json.dumps(info, indent=2))
    else:
        width = max(map(len, info))
        for key, value in info.items():
            print(f"{key:<{width}}  {value:.6g}")
    return []


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help=f"JSON run configuration (default: ${ENV_VAR}, else built-in defaults)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config key, e.g. cell.temperature_K=340"
    )
    common.add_argument("-o", "--output-dir", help="output directory (overrides output_dir)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rbswitch", description="Warm-vapor ring-cavity optical switch simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("response", parents=[common], help="write chi, n, alpha and phase vs signal detuning")
    sub.add_parser("sweep2d", parents=[common], help="phase-shift and transmission maps over both detunings")
    sub.add_parser("sweep1d", parents=[common], help="steady-state contrast and losses with delta_c = delta_s")
    sub.add_parser("dynamics", parents=[common], help="time-domain switching traces and window metrics")
    fit = sub.add_parser("fit", parents=[common], help="fit temperature and intra-cavity power to contrast data")
    fit.add_argument("--data", help="CSV with columns detuning_ghz,contrast (default: fit.data_file, else synthetic)")
    info = sub.add_parser("cavity-info", parents=[common], help="print finesse, ring-up time and bandwidth")
    info.add_argument("--json", action="store_true", help="print JSON instead of a table")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if args.output_dir:
        overrides.append(f"output_dir={json.dumps(args.output_dir)}")
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "response":
            files = cmd_response(cfg)
        elif args.command == "sweep2d":
            files = cmd_sweep2d(cfg)
        elif args.command == "sweep1d":
            files = cmd_sweep1d(cfg)
        elif args.command == "dynamics":
            files = cmd_dynamics(cfg)
        elif args.command == "fit":
            files = cmd_fit(cfg, args.data)
        else:
            files = cmd_cavity_info(cfg, args.json)
    except ConfigError as exc:
        print(f"rbswitch: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"rbswitch: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OutputError as exc:
        print(f"rbswitch: output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except ConvergenceError as exc:
        print(f"rbswitch: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except SwitchError as exc:
        print(f"rbswitch: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for path in files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
