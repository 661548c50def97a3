"""Command-line interface: sweep drivers with CSV (and optional PNG) output.

Subcommands
-----------
modes-info   basis ordering and derived cavity geometry
stiffness    radiation-pressure stiffness coefficients versus detuning
dp-static    static demodulated error signals versus detuning
dp-coeffs    dynamic error-signal coefficients versus detuning
spectrum     closed-loop noise spectra of selected outputs
entangle     bipartite quadrature variances of the mirror drum modes
squeeze      reflected-port homodyne variance versus quadrature angle

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, forces, noise, presets, signals
from .bipartite import bipartite_spectrum, homodyne_variance
from .cavity import (CavityConfig, ResonanceSingularity, build_basis_cached,
                     derive_geometry, resonant_detuning, spectral_point)
from .config import ConfigError, RunConfig, load_config
from .mechanics import build_model
from .modes import input_vector
from .report import render_plot, write_csv

CONVERGENCE_NMAX = 8
CONVERGENCE_TOL = 1.0e-2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpcavity",
        description="Frequency-domain simulator of a suspended, misaligned, "
                    "detuned optical cavity.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="TOML configuration file (defaults to a "
                             "near-concentric preset)")
    common.add_argument("--out", type=Path, default=None,
                        help="output CSV path (default <command>.csv)")
    common.add_argument("--n-max", type=int, default=None,
                        help="largest total transverse mode order")
    common.add_argument("--check-convergence", action="store_true",
                        help=f"recompute with n_max={CONVERGENCE_NMAX} and "
                             "report the relative change")
    common.add_argument("--finesse-convention", choices=("log", "standard"),
                        default=None)
    common.add_argument("--thermal-model",
                        choices=sorted(noise.THERMAL_MODELS), default=None)
    common.add_argument("--freeze-suspensions", action="store_true",
                        help="hold the suspension degrees of freedom fixed")
    common.add_argument("--open-loop", action="store_true",
                        help="disable the servo feedback paths")
    common.add_argument("--levin-mirrors", action="store_true",
                        help="add substrate thermal noise of both mirrors "
                             "to displacement spectra")
    common.add_argument("--plot", action="store_true",
                        help="render a PNG figure alongside the CSV")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("modes-info", parents=[common],
                   help="basis ordering and derived geometry")

    p = sub.add_parser("stiffness", parents=[common],
                       help="stiffness coefficients versus detuning")
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--span-fraction", type=float, default=0.5,
                   help="detuning half-span in units of pi/finesse")
    p.add_argument("--recipient", type=int, choices=(1, 2), default=1)
    p.add_argument("--source", type=int, choices=(1, 2), default=1)
    p.add_argument("--freq", type=float, default=0.0,
                   help="spectral frequency in Hz")

    for name, hlp in (("dp-static", "static error signals versus detuning"),
                      ("dp-coeffs", "error-signal coefficients")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--points", type=int, default=81)
        p.add_argument("--span-fraction", type=float, default=2.0)
        if name == "dp-coeffs":
            p.add_argument("--kind", choices=("dp", "qd_y", "qd_z"),
                           default="dp")
            p.add_argument("--source", type=int, choices=(1, 2), default=1)
            p.add_argument("--freq", type=float, default=0.0)

    p = sub.add_parser("spectrum", parents=[common],
                       help="closed-loop noise spectra")
    p.add_argument("--fmin", type=float, default=1.0e-1)
    p.add_argument("--fmax", type=float, default=1.0e4)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--outputs", type=str, default="s_dp,x_1",
                   help="comma-separated output names")

    p = sub.add_parser("entangle", parents=[common],
                       help="bipartite drum-mode variances")
    p.add_argument("--fmin", type=float, default=None)
    p.add_argument("--fmax", type=float, default=None)
    p.add_argument("--points", type=int, default=120)
    p.add_argument("--temperature", type=float, default=None)

    p = sub.add_parser("squeeze", parents=[common],
                       help="homodyne variance versus quadrature angle")
    p.add_argument("--freq", type=float, default=None,
                   help="analysis frequency in Hz (default: drum resonance)")
    p.add_argument("--points", type=int, default=181)
    p.add_argument("--temperature", type=float, default=None)
    return parser


def _load_run(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        run = load_config(args.config, n_max=args.n_max,
                          finesse_convention=args.finesse_convention)
    else:
        cfg = presets.near_concentric_config(
            n_max=args.n_max if args.n_max is not None else 6,
            finesse_convention=args.finesse_convention or "log")
        run = RunConfig(cavity=cfg,
                        beam_params={"theta_y": 1.0e-5, "theta_z": 1.0e-4},
                        system=presets.pendulum_suspension(),
                        config_hash="preset")
    if args.thermal_model is not None:
        run.thermal_model = args.thermal_model
    if args.open_loop:
        run.open_loop = True
    return run


def _base_comments(run: RunConfig) -> list[str]:
    cfg = run.cavity
    geom = derive_geometry(cfg)
    basis = build_basis_cached(cfg.n_max)
    return [
        f"fpcavity {__version__}",
        f"config sha256 {run.config_hash}",
        f"n_max {cfg.n_max} (dim {basis.dim}), mode ordering: "
        + " ".join(basis.labels()),
        f"finesse convention {cfg.finesse_convention}; "
        f"finesse {geom.finesse:.6g}; gouy {geom.phi_gouy:.9g} rad",
        "spectral convention: fields go as exp(-i omega t); "
        "single-sided spectra",
    ]


def _with_nmax(run: RunConfig, n_max: int) -> RunConfig:
    from dataclasses import replace
    out = RunConfig(cavity=replace(run.cavity, n_max=n_max),
                    beam_params=run.beam_params, system=run.system,
                    temperature=run.temperature,
                    thermal_model=run.thermal_model,
                    open_loop=run.open_loop, config_hash=run.config_hash,
                    raw=run.raw)
    return out


def _convergence_delta(builder: Callable[[RunConfig], dict],
                       run: RunConfig, columns: dict) -> float:
    fine = builder(_with_nmax(run, CONVERGENCE_NMAX))
    worst = 0.0
    for name, coarse in columns.items():
        a = np.asarray(coarse, dtype=np.complex128).ravel()
        b = np.asarray(fine[name], dtype=np.complex128).ravel()
        scale = max(float(np.max(np.abs(b))), 1e-300)
        worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    return worst


def _detunings(run: RunConfig, span_fraction: float,
               points: int) -> np.ndarray:
    geom = derive_geometry(run.cavity)
    half = span_fraction * math.pi / geom.finesse
    return resonant_detuning(geom) + np.linspace(-half, half, points)


def _input_vector(run: RunConfig) -> np.ndarray:
    return input_vector(build_basis_cached(run.cavity.n_max), run.beam())


def _sweep(point: Callable[[int], dict], count: int) -> dict:
    """Evaluate a per-index point function on a worker pool.

    Results are reassembled in sweep order.  A point that lands on a cavity
    pole yields NaN values and a raised ``singular`` flag instead of
    aborting the whole sweep.
    """
    def safe(i: int):
        try:
            return point(i), 0.0
        except ResonanceSingularity:
            return None, 1.0

    with ThreadPoolExecutor() as pool:
        results = list(pool.map(safe, range(count)))
    rows = [row for row, _ in results]
    flags = np.array([flag for _, flag in results])
    template = next((row for row in rows if row is not None), None)
    if template is None:
        raise ResonanceSingularity("every sweep point is pole-adjacent")
    columns: dict = {}
    for name, val in template.items():
        dtype = (np.complex128 if np.iscomplexobj(np.asarray(val))
                 else np.float64)
        arr = np.full(count, np.nan, dtype=dtype)
        for i, row in enumerate(rows):
            if row is not None:
                arr[i] = row[name]
        columns[name] = arr
    columns["singular"] = flags
    return columns


def _cmd_modes_info(args: argparse.Namespace, run: RunConfig) -> dict:
    cfg = run.cavity
    geom = derive_geometry(cfg)
    basis = build_basis_cached(cfg.n_max)
    ny = np.array([m[0] for m in basis.modes], dtype=float)
    nz = np.array([m[1] for m in basis.modes], dtype=float)
    order = ny + nz
    columns = {
        "index": np.arange(basis.dim, dtype=float),
        "n_y": ny, "n_z": nz, "order": order,
        "gouy_multiplier": (order + 1.0) * geom.phi_gouy,
    }
    print(f"basis n_max={cfg.n_max} dim={basis.dim}")
    print("ordering:", " ".join(basis.labels()))
    print(f"finesse={geom.finesse:.6g} gouy={geom.phi_gouy:.9g} rad "
          f"waist={geom.waist_radius:.6g} m at x0={geom.waist_pos:.6g} m")
    print(f"spot sizes w1={geom.w1:.6g} m, w2={geom.w2:.6g} m; "
          f"fsr={geom.fsr:.6g} rad/s; near_instability={geom.near_instability}")
    return columns


def _stiffness_columns(args: argparse.Namespace) -> Callable[[RunConfig], dict]:
    def build(run: RunConfig) -> dict:
        cfg0 = run.cavity
        psis = _detunings(run, args.span_fraction, args.points)
        v = _input_vector(run)
        omega = 2.0 * math.pi * args.freq

        def point(i: int) -> dict:
            cfg = presets.with_detuning(cfg0, float(psis[i]))
            geom = derive_geometry(cfg)
            sp = spectral_point(cfg, geom, omega)
            coefs = forces.stiffness_coefficients(
                cfg, geom, sp, v, recipient=args.recipient,
                source=args.source).coef
            return {f"{o}_per_{g}": coefs[a, b]
                    for a, o in enumerate(forces.OUTER_LABELS)
                    for b, g in enumerate(forces.GEN_LABELS)}

        return {"detuning": psis, **_sweep(point, len(psis))}
    return build


def _dp_static_columns(args: argparse.Namespace) -> Callable[[RunConfig], dict]:
    def build(run: RunConfig) -> dict:
        cfg0 = run.cavity
        psis = _detunings(run, args.span_fraction, args.points)
        v = _input_vector(run)
        def point(i: int) -> dict:
            cfg = presets.with_detuning(cfg0, float(psis[i]))
            geom = derive_geometry(cfg)
            sp = spectral_point(cfg, geom, 0.0)
            return {kind: signals.static_signal(cfg, geom, sp, v, kind)
                    for kind in ("dp", "qd_y", "qd_z")}

        return {"detuning": psis, **_sweep(point, len(psis))}
    return build


def _dp_coeffs_columns(args: argparse.Namespace) -> Callable[[RunConfig], dict]:
    def build(run: RunConfig) -> dict:
        cfg0 = run.cavity
        psis = _detunings(run, args.span_fraction, args.points)
        v = _input_vector(run)
        omega = 2.0 * math.pi * args.freq

        def point(i: int) -> dict:
            cfg = presets.with_detuning(cfg0, float(psis[i]))
            geom = derive_geometry(cfg)
            sp = spectral_point(cfg, geom, omega)
            coefs = signals.signal_coefficients(cfg, geom, sp, v, args.kind,
                                                source=args.source)
            return {g: coefs[b] for b, g in enumerate(forces.GEN_LABELS)}

        return {"detuning": psis, **_sweep(point, len(psis))}
    return build


def _spectrum_columns(args: argparse.Namespace) -> Callable[[RunConfig], dict]:
    names = [s.strip() for s in args.outputs.split(",") if s.strip()]

    def build(run: RunConfig) -> dict:
        cfg = run.cavity
        geom = derive_geometry(cfg)
        v = _input_vector(run)
        freqs = np.logspace(math.log10(args.fmin), math.log10(args.fmax),
                            args.points)
        def point(i: int) -> dict:
            model = build_model(cfg, geom, v, run.system,
                                omega=2.0 * math.pi * freqs[i],
                                thermal_model=run.thermal_model,
                                temperature=run.temperature,
                                freeze_suspensions=args.freeze_suspensions,
                                open_loop=run.open_loop)
            psd = model.solve_psd(names)
            return {name: psd[name] for name in names}

        data = _sweep(point, len(freqs))
        if args.levin_mirrors:
            for name in names:
                if name not in ("x_1", "x_2"):
                    continue
                mirror = int(name[-1])
                w = geom.w1 if mirror == 1 else geom.w2
                basis = build_basis_cached(cfg.n_max)
                extra = np.array([
                    noise.substrate_displacement_psd(
                        basis, v, w, 2.0 * math.pi * f,
                        temperature=run.temperature)
                    for f in freqs])
                data[f"substrate_{name}"] = extra
                data[name] = data[name] + extra
        return {"freq": freqs, **data}
    return build


def _drums(run: RunConfig):
    defs = [d for d in run.system.deformations]
    by_mirror = {d.mirror: d for d in defs}
    if len(defs) == 2 and set(by_mirror) == {1, 2}:
        return (by_mirror[1], by_mirror[2])
    return presets.drum_modes()


def _entangle_columns(args: argparse.Namespace) -> Callable[[RunConfig], dict]:
    def build(run: RunConfig) -> dict:
        cfg = run.cavity
        geom = derive_geometry(cfg)
        v = _input_vector(run)
        modes = _drums(run)
        f0 = modes[0].f0
        fmin = args.fmin if args.fmin is not None else 0.8 * f0
        fmax = args.fmax if args.fmax is not None else 1.2 * f0
        temp = (args.temperature if args.temperature is not None
                else run.temperature)
        freqs = np.linspace(fmin, fmax, args.points)
        def point(i: int) -> dict:
            res = bipartite_spectrum(cfg, geom, v, modes,
                                     omega=2.0 * math.pi * freqs[i],
                                     thermal_model=run.thermal_model,
                                     temperature=temp)
            return {"v_x_1": res.v_x[0], "v_x_2": res.v_x[1],
                    "v_y_1": res.v_y[0], "v_y_2": res.v_y[1],
                    "v_sum_px": res.v_sum[0], "v_sum_mx": res.v_sum[1],
                    "v_sum_py": res.v_sum[2], "v_sum_my": res.v_sum[3],
                    "epr_a": res.epr_products[0],
                    "epr_b": res.epr_products[1],
                    "entangled": float(res.entangled)}

        return {"freq": freqs, **_sweep(point, len(freqs))}
    return build


def _squeeze_columns(args: argparse.Namespace) -> Callable[[RunConfig], dict]:
    def build(run: RunConfig) -> dict:
        cfg = run.cavity
        geom = derive_geometry(cfg)
        v = _input_vector(run)
        modes = _drums(run)
        f = args.freq if args.freq is not None else modes[0].f0
        temp = (args.temperature if args.temperature is not None
                else run.temperature)
        thetas = np.linspace(0.0, math.pi, args.points)
        var = homodyne_variance(cfg, geom, v, modes,
                                omega=2.0 * math.pi * f, thetas=thetas,
                                thermal_model=run.thermal_model,
                                temperature=temp)
        return {"theta": thetas, "variance": var}
    return build


_BUILDERS = {
    "stiffness": _stiffness_columns,
    "dp-static": _dp_static_columns,
    "dp-coeffs": _dp_coeffs_columns,
    "spectrum": _spectrum_columns,
    "entangle": _entangle_columns,
    "squeeze": _squeeze_columns,
}

_PLOT_LOGY = {"spectrum", "entangle"}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        run = _load_run(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        comments = _base_comments(run)
        if args.command == "modes-info":
            columns = _cmd_modes_info(args, run)
        else:
            builder = _BUILDERS[args.command](args)
            columns = builder(run)
            if args.check_convergence:
                delta = _convergence_delta(builder, run, columns)
                status = "ok" if delta < CONVERGENCE_TOL else "NOT CONVERGED"
                comments.append(
                    f"convergence n_max {run.cavity.n_max} vs "
                    f"{CONVERGENCE_NMAX}: max relative delta {delta:.3e} "
                    f"({status})")
                print(f"convergence delta {delta:.3e} ({status})")
        out = args.out or Path(f"{args.command}.csv")
        write_csv(out, columns, comments)
        print(f"wrote {out}")
        if args.plot:
            x_name = next(iter(columns))
            png = render_plot(out, x_name, columns, title=args.command,
                              logy=args.command in _PLOT_LOGY)
            print(f"wrote {png}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ResonanceSingularity, np.linalg.LinAlgError,
            FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
