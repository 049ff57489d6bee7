"""Command line front end: figure-level experiments emitting CSV.

Subcommands: zz-sweep (ZZ landscape over bus frequency), cz-scan (calibrated
CZ error versus gate time), q-scan (CZ error versus resonator quality
factor), idle-find, and spectrum.  Every CSV starts with comment lines that
echo the fully resolved configuration and tool version, and output is
byte-identical for a given config regardless of the worker count.

Exit codes: 0 success, 2 configuration error, 3 numerical-accuracy error.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .circuit import ChainConfig, build_hamiltonian
from .config import ConfigError, ExperimentConfig, load_config
from .control import SHAPE_FOURIER, CalibrationInfeasibleError, CZPulse, calibrate_cz
from .dynamics import (AccuracyError, NoiseSpec, average_gate_error, gate_report,
                       propagate_channel, step_unitaries)
from .spectrum import (NoZeroCrossingError, dressed_spectrum, find_idle_frequency,
                       sweep_zz, zz_coupling)

IDLE_BRACKET_HALFWIDTH = 0.35  # GHz around the configured idle frequency


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: str, echo: list[str], header: str, rows: list[str]) -> None:
    text = "\n".join(echo + [header] + rows) + "\n"
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write output file {path!r}: {exc}") from exc


def _pool_map(fn, items, threads: int):
    """Map preserving input order; results are independent of completion order."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _resolve_idle(cfg: ExperimentConfig, chain: ChainConfig) -> float:
    bracket = (cfg.idle - IDLE_BRACKET_HALFWIDTH, cfg.idle + IDLE_BRACKET_HALFWIDTH)
    return find_idle_frequency(chain, bracket)


def _calibrated_pulse(cfg: ExperimentConfig, chain: ChainConfig, idle: float,
                      gate_time: float) -> CZPulse:
    return calibrate_cz(
        chain, gate_time, idle, shape=cfg.shape, ramp_frac=cfg.ramp_frac,
        fourier_coeffs=cfg.fourier_coeffs, dt=cfg.dt,
        optimize_coeffs=cfg.optimize and cfg.shape == SHAPE_FOURIER,
    )


def _phase_branch(phi: float) -> float:
    """Map the conditional phase to [0, 2pi) so a CZ reads as pi."""
    return float(np.mod(phi, 2.0 * np.pi))


def cmd_zz_sweep(cfg: ExperimentConfig, threads: int) -> tuple[str, list[str]]:
    grid = cfg.grid_points()

    def one_g(g_mhz: float) -> list[str]:
        chain = cfg.chain_for(g_mhz)
        points = sweep_zz(chain, grid, hermiticity_tol=cfg.eig_tol)
        return [
            f"{_fmt(p.nu_bus)},{_fmt(g_mhz)},{_fmt(p.zeta * 1e3)},{1 if p.ambiguous else 0}"
            for p in points
        ]

    blocks = _pool_map(one_g, list(cfg.g_list_mhz), threads)
    return "bus_freq_ghz,g_mhz,zeta_mhz,ambiguous", [row for block in blocks for row in block]


def cmd_cz_scan(cfg: ExperimentConfig, threads: int) -> tuple[str, list[str]]:
    idles: dict[float, float | Exception] = {}
    for g in cfg.g_list_mhz:
        try:
            idles[g] = _resolve_idle(cfg, cfg.chain_for(g))
        except NoZeroCrossingError as exc:
            idles[g] = exc

    tasks = [(g, t) for g in cfg.g_list_mhz for t in cfg.gate_times]

    def one(task) -> str:
        g_mhz, gate_time = task
        idle = idles[g_mhz]
        if isinstance(idle, Exception):
            return f"{_fmt(gate_time)},{_fmt(g_mhz)},,,,,idle-not-found: {idle}"
        chain = cfg.chain_for(g_mhz)
        try:
            pulse = _calibrated_pulse(cfg, chain, idle, gate_time)
        except CalibrationInfeasibleError as exc:
            return (f"{_fmt(gate_time)},{_fmt(g_mhz)},,,,"
                    f",infeasible: max phase {exc.max_phase:.4f} rad")
        report = gate_report(chain, pulse, dt=cfg.dt)
        phi = _phase_branch(report.conditional_phase)
        return (f"{_fmt(gate_time)},{_fmt(g_mhz)},{_fmt(pulse.nu_op)},{_fmt(phi)},"
                f"{_fmt(report.leakage)},{_fmt(report.error_avg)},")

    rows = _pool_map(one, tasks, threads)
    return "gate_time_ns,g_mhz,nu_op_ghz,cond_phase_rad,leakage,error,reason", rows


def cmd_q_scan(cfg: ExperimentConfig, threads: int) -> tuple[str, list[str]]:
    problems = []
    if len(cfg.g_list_mhz) != 1:
        problems.append("device.g_mhz: q-scan needs exactly one coupling")
    if len(cfg.gate_times) != 1:
        problems.append("pulse.gate_times_ns: q-scan needs exactly one gate time")
    if problems:
        raise ConfigError("; ".join(problems))

    g_mhz = cfg.g_list_mhz[0]
    chain = cfg.chain_for(g_mhz)
    idle = _resolve_idle(cfg, chain)
    pulse = _calibrated_pulse(cfg, chain, idle, cfg.gate_times[0])
    baseline_report = gate_report(chain, pulse, dt=cfg.dt)
    baseline = baseline_report.unitary_baseline
    steps, _ = step_unitaries(chain, pulse, dt=cfg.dt)

    def one(q: float) -> str:
        if np.isinf(q):
            error = baseline
        else:
            channel = propagate_channel(chain, pulse, NoiseSpec((q, q)), dt=cfg.dt, steps=steps)
            error = average_gate_error(channel)
        return f"{_fmt(q)},{_fmt(error)},{_fmt(baseline)}"

    rows = _pool_map(one, list(cfg.q_factors), threads)
    return "quality_factor,error,unitary_baseline", rows


def cmd_idle_find(cfg: ExperimentConfig, threads: int) -> tuple[str, list[str]]:
    def one(g_mhz: float) -> str:
        chain = cfg.chain_for(g_mhz)
        nu_idle = _resolve_idle(cfg, chain)
        zeta = zz_coupling(chain, nu_idle).zeta
        return f"{_fmt(g_mhz)},{_fmt(nu_idle)},{_fmt(zeta)}"

    rows = _pool_map(one, list(cfg.g_list_mhz), threads)
    return "g_mhz,nu_idle_ghz,zeta_ghz", rows


def cmd_spectrum(cfg: ExperimentConfig, threads: int, nu_bus: float | None) -> tuple[str, list[str]]:
    nu = cfg.idle if nu_bus is None else nu_bus

    def one(g_mhz: float) -> list[str]:
        chain = cfg.chain_for(g_mhz)
        spec = dressed_spectrum(build_hamiltonian(chain, nu), chain.dims,
                                hermiticity_tol=cfg.eig_tol)
        entries = sorted(spec.label_of.items(), key=lambda kv: spec.energies[kv[1]])
        return [
            (f"{_fmt(g_mhz)},{''.join(map(str, label))},{_fmt(float(spec.energies[idx]))},"
             f"{_fmt(spec.overlap_of[label])},{1 if label in spec.ambiguous else 0}")
            for label, idx in entries
        ]

    blocks = _pool_map(one, list(cfg.g_list_mhz), threads)
    return "g_mhz,label,energy_ghz,overlap,ambiguous", [r for b in blocks for r in b]


def _parse_dims(text: str) -> tuple[int, ...]:
    dims = tuple(int(tok) for tok in text.split(","))
    if len(dims) != 5:
        raise ConfigError("--dims needs five comma-separated integers")
    return dims


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="buschain",
                                     description="five-mode chain ZZ and CZ experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("zz-sweep", "cz-scan", "q-scan", "idle-find", "spectrum"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="experiment config file")
        p.add_argument("--out", default=None, help="output CSV path (overrides config)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--dims", default=None, help="override truncation, e.g. 3,3,3,3,3")
        if name == "spectrum":
            p.add_argument("--nu-bus", type=float, default=None,
                           help="bus frequency (default: configured idle)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.dims is not None:
            dims = _parse_dims(args.dims)
            if any(d < 3 for d in dims):
                raise ConfigError("--dims: truncation dimensions must be >= 3")
            cfg.dims = dims
        if args.out is not None:
            cfg.out_path = args.out

        if args.command == "zz-sweep":
            header, rows = cmd_zz_sweep(cfg, args.threads)
        elif args.command == "cz-scan":
            header, rows = cmd_cz_scan(cfg, args.threads)
        elif args.command == "q-scan":
            header, rows = cmd_q_scan(cfg, args.threads)
        elif args.command == "idle-find":
            header, rows = cmd_idle_find(cfg, args.threads)
        else:
            header, rows = cmd_spectrum(cfg, args.threads, args.nu_bus)

        _write_csv(cfg.out_path, cfg.echo_lines(__version__), header, rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AccuracyError, NoZeroCrossingError) as exc:
        print(f"numerical-accuracy error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
