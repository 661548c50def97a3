"""TOML configuration loading for the command-line tool.

A configuration file describes the cavity, the input beam, the mechanical
catalog and run options:

.. code-block:: toml

    [cavity]
    length = 0.099
    mirror_radius = 0.05        # or curvature_1 / curvature_2
    wavelength = 1.064e-6
    finesse = 500.0             # or r1/t1/r2/t2
    detuning_fraction = 0.1     # or detuning (radians)
    power_in = 1.0
    mod_freq = 1.5e9
    mod_depth = 0.3

    [beam]
    theta_y = 1.0e-5
    theta_z = 1.0e-4

    [[oscillators]]
    label = "pend_1"
    mirror = 1
    f0 = 1.0
    mass = 0.1
    q_factor = 1.0e6
    couplings = { axial = 1.0 }

    [servo.dp]
    gain = 1.0e3
    pole = 100.0                # one-pole low-pass, or a freq/re/im table

    [run]
    temperature = 295.0
    thermal_model = "brownian"
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:               # Python < 3.11
    import tomli as tomllib

from .cavity import CavityConfig, derive_geometry
from .mechanics import DeformationMode, MechanicalSystem, Oscillator
from .modes import InputBeam


class ConfigError(ValueError):
    """Raised when a configuration file is malformed."""


@dataclass
class RunConfig:
    """Everything assembled from one configuration file."""
    cavity: CavityConfig
    beam_params: dict[str, float]
    system: MechanicalSystem
    temperature: float = 295.0
    thermal_model: str = "brownian"
    open_loop: bool = False
    config_hash: str = ""
    raw: dict[str, Any] = field(default_factory=dict)

    def beam(self) -> InputBeam:
        geom = derive_geometry(self.cavity)
        p = self.beam_params
        return InputBeam(theta_y=p.get("theta_y", 0.0),
                         theta_z=p.get("theta_z", 0.0),
                         eps_y=p.get("eps_y", 0.0),
                         eps_z=p.get("eps_z", 0.0),
                         q_y=complex(p["q_y_re"], p["q_y_im"])
                         if "q_y_re" in p else geom.q1,
                         q_z=complex(p["q_z_re"], p["q_z_im"])
                         if "q_z_re" in p else geom.q1,
                         q_cav=geom.q1, w1=geom.w1, k=geom.k)


def _cavity_from_table(tab: dict[str, Any], n_max: int,
                       finesse_convention: str) -> CavityConfig:
    tab = dict(tab)
    if "mirror_radius" in tab:
        rm = float(tab.pop("mirror_radius"))
        tab.setdefault("curvature_1", -rm)
        tab.setdefault("curvature_2", rm)
    if "detuning_fraction" in tab:
        frac = float(tab.pop("detuning_fraction"))
    else:
        frac = None
    try:
        common = dict(
            length=float(tab["length"]),
            curvature_1=float(tab["curvature_1"]),
            curvature_2=float(tab["curvature_2"]),
            wavelength=float(tab.get("wavelength", 1.064e-6)),
            power_in=float(tab.get("power_in", 1.0)),
            mod_freq=float(tab.get("mod_freq", 1.0e9)),
            mod_depth=float(tab.get("mod_depth", 0.3)),
            demod_harmonic=int(tab.get("demod_harmonic", 1)),
            demod_phase=float(tab.get("demod_phase", 0.0)),
            loss_1=float(tab.get("loss_1", 0.0)),
            loss_2=float(tab.get("loss_2", 0.0)),
            n_max=n_max,
            finesse_convention=finesse_convention,
        )
        detuning = float(tab.get("detuning", 0.0))
        if "finesse" in tab:
            cfg = CavityConfig.from_finesse(finesse=float(tab["finesse"]),
                                            detuning=detuning, **common)
        else:
            cfg = CavityConfig(r1=float(tab["r1"]), t1=float(tab["t1"]),
                               r2=float(tab["r2"]), t2=float(tab["t2"]),
                               detuning=detuning, **common)
        if frac is not None:
            # Fractions of pi/finesse, measured from fundamental resonance.
            from dataclasses import replace
            from .cavity import resonant_detuning
            geom = derive_geometry(cfg)
            cfg = replace(cfg, detuning=resonant_detuning(
                geom, frac * math.pi / geom.finesse))
        return cfg
    except KeyError as exc:
        raise ConfigError(f"missing cavity key: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _servo_from_table(tab: dict[str, Any]) -> Callable[[complex], complex]:
    if "freq" in tab:
        freq = np.asarray(tab["freq"], dtype=float)
        vals = (np.asarray(tab["re"], dtype=float)
                + 1j * np.asarray(tab.get("im", np.zeros_like(freq)),
                                  dtype=float))
        if freq.shape != vals.shape or freq.size < 2:
            raise ConfigError("servo table needs matching freq/re/im arrays")

        def table_tf(omega: complex) -> complex:
            f = abs(float(np.real(omega))) / (2.0 * math.pi)
            re = float(np.interp(f, freq, vals.real))
            im = float(np.interp(f, freq, vals.imag))
            return complex(re, im)
        return table_tf
    gain = float(tab.get("gain", 0.0))
    pole = float(tab.get("pole", 0.0))
    if pole > 0.0:
        wp = 2.0 * math.pi * pole

        def one_pole(omega: complex) -> complex:
            return gain / (1.0 - 1j * omega / wp)
        return one_pole
    return lambda omega: gain


def _system_from_tables(data: dict[str, Any]) -> MechanicalSystem:
    oscillators = []
    for tab in data.get("oscillators", []):
        try:
            oscillators.append(Oscillator(
                label=str(tab["label"]), mirror=int(tab["mirror"]),
                f0=float(tab["f0"]), mass=float(tab["mass"]),
                q_factor=float(tab.get("q_factor", 1.0e6)),
                couplings={str(k): float(c)
                           for k, c in tab.get("couplings",
                                               {"axial": 1.0}).items()}))
        except KeyError as exc:
            raise ConfigError(f"missing oscillator key: {exc}") from exc
    deformations = []
    for tab in data.get("deformations", []):
        try:
            deformations.append(DeformationMode(
                label=str(tab["label"]), mirror=int(tab["mirror"]),
                f0=float(tab["f0"]), mass=float(tab["mass"]),
                q_factor=float(tab.get("q_factor", 1.0e5))))
        except KeyError as exc:
            raise ConfigError(f"missing deformation key: {exc}") from exc
    servos = {}
    for key in ("dp", "qd_y", "qd_z"):
        tab = data.get("servo", {}).get(key)
        if tab:
            servos[f"servo_{key}"] = _servo_from_table(tab)
    rin = None
    rin_tab = data.get("rin")
    if rin_tab:
        if "freq" in rin_tab:
            freq = np.asarray(rin_tab["freq"], dtype=float)
            psd = np.asarray(rin_tab["psd"], dtype=float)

            def rin_psd(omega: complex) -> float:
                f = abs(float(np.real(omega))) / (2.0 * math.pi)
                return float(np.interp(f, freq, psd))
            rin = rin_psd
        else:
            level = float(rin_tab.get("level", 0.0))
            rin = lambda omega: level
    kwargs: dict[str, Any] = dict(servos)
    if rin is not None:
        kwargs["rin_psd"] = rin
    return MechanicalSystem(oscillators=tuple(oscillators),
                            deformations=tuple(deformations), **kwargs)


def load_config(path: str | Path, n_max: int | None = None,
                finesse_convention: str | None = None) -> RunConfig:
    """Parse a TOML file into a :class:`RunConfig`.

    ``n_max`` and ``finesse_convention`` override the file when given.
    """
    raw_bytes = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw_bytes.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    if "cavity" not in data:
        raise ConfigError("configuration needs a [cavity] table")
    run = data.get("run", {})
    nm = n_max if n_max is not None else int(run.get("n_max", 6))
    conv = (finesse_convention if finesse_convention is not None
            else str(run.get("finesse_convention", "log")))
    cavity = _cavity_from_table(data["cavity"], nm, conv)
    beam = {str(k): float(x) for k, x in data.get("beam", {}).items()}
    system = _system_from_tables(data)
    return RunConfig(
        cavity=cavity, beam_params=beam, system=system,
        temperature=float(run.get("temperature", 295.0)),
        thermal_model=str(run.get("thermal_model", "brownian")),
        open_loop=bool(run.get("open_loop", False)),
        config_hash=hashlib.sha256(raw_bytes).hexdigest()[:16],
        raw=data)
