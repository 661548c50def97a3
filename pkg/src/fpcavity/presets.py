"""Ready-made cavity, beam and suspension configurations.

These builders capture the scenarios exercised by the command-line tool and
the regression tests: a symmetric near-concentric cavity probed close to
instability, a torsion-pendulum style suspension set, and a pair of internal
drum modes used for the bipartite correlation studies.
"""
from __future__ import annotations

import math

import numpy as np

from .cavity import (CavityConfig, CavityGeometry, derive_geometry,
                     resonant_detuning)
from .mechanics import DeformationMode, MechanicalSystem, Oscillator
from .modes import InputBeam, input_vector


def near_concentric_config(distance: float = 1.0e-3,
                           mirror_radius: float = 0.05,
                           finesse: float = 500.0,
                           detuning_fraction: float = 0.1,
                           wavelength: float = 1.064e-6,
                           power_in: float = 1.0,
                           mod_freq: float | None = None,
                           mod_depth: float = 0.3,
                           n_max: int = 6,
                           finesse_convention: str = "log") -> CavityConfig:
    """Symmetric cavity a small ``distance`` short of the concentric point.

    ``detuning_fraction`` is the detuning in units of pi / finesse (half a
    linewidth per unit).  The default modulation frequency is half the free
    spectral range, far outside the linewidth.
    """
    length = 2.0 * mirror_radius - distance
    if length <= 0:
        raise ValueError("distance exceeds the concentric length")
    if mod_freq is None:
        mod_freq = 0.5 * 2.0 * math.pi * 299792458.0 / (2.0 * length)
    cfg = CavityConfig.from_finesse(
        length=length, curvature_1=-mirror_radius, curvature_2=mirror_radius,
        wavelength=wavelength, finesse=finesse, detuning=0.0,
        power_in=power_in, mod_freq=mod_freq, mod_depth=mod_depth,
        n_max=n_max, finesse_convention=finesse_convention)
    # Lock to the fundamental resonance, then apply the detuning offset.
    geom = derive_geometry(cfg)
    from dataclasses import replace
    return replace(cfg, detuning=resonant_detuning(
        geom, detuning_fraction * math.pi / geom.finesse))


def misaligned_beam(cfg: CavityConfig, geom: CavityGeometry,
                    theta_y: float = 1.0e-5, theta_z: float = 1.0e-4,
                    eps_y: float = 0.0, eps_z: float = 0.0) -> InputBeam:
    """Input beam tilted and displaced with respect to the cavity axis."""
    return InputBeam(theta_y=theta_y, theta_z=theta_z, eps_y=eps_y,
                     eps_z=eps_z, q_y=geom.q1, q_z=geom.q1,
                     q_cav=geom.q1, w1=geom.w1, k=geom.k)


def input_field(cfg: CavityConfig, geom: CavityGeometry,
                theta_y: float = 1.0e-5, theta_z: float = 1.0e-4,
                eps_y: float = 0.0, eps_z: float = 0.0) -> np.ndarray:
    """Mode-amplitude vector for a tilted, displaced, mode-matched beam."""
    beam = misaligned_beam(cfg, geom, theta_y, theta_z, eps_y, eps_z)
    from .cavity import build_basis_cached
    return input_vector(build_basis_cached(cfg.n_max), beam)


def pendulum_suspension(mass: float = 0.1,
                        f_axial: float = 1.0,
                        f_tilt: float = 0.5,
                        q_factor: float = 1.0e6,
                        mirrors: tuple[int, ...] = (1, 2)
                        ) -> MechanicalSystem:
    """Pendulum plus two torsion modes per suspended mirror."""
    oscillators = []
    for j in mirrors:
        oscillators.append(Oscillator(
            label=f"pend_{j}", mirror=j, f0=f_axial, mass=mass,
            q_factor=q_factor, couplings={"axial": 1.0}))
        for ax in ("y", "z"):
            oscillators.append(Oscillator(
                label=f"tilt_{ax}_{j}", mirror=j, f0=f_tilt, mass=mass,
                q_factor=q_factor, couplings={f"tilt_{ax}": 1.0}))
    return MechanicalSystem(oscillators=tuple(oscillators))


def drum_modes(mass: float = 1.0e-3, f0: float = 1.0e5,
               q_factor: float = 1.0e5) -> tuple[DeformationMode,
                                                 DeformationMode]:
    """Identical piston-like internal modes, one per mirror."""
    return (DeformationMode(label="drum_1", mirror=1, f0=f0, mass=mass,
                            q_factor=q_factor),
            DeformationMode(label="drum_2", mirror=2, f0=f0, mass=mass,
                            q_factor=q_factor))


def detuning_scan(cfg: CavityConfig, fraction_span: float = 0.3,
                  count: int = 7) -> np.ndarray:
    """Detunings evenly spaced in +-fraction_span * pi / finesse."""
    geom = derive_geometry(cfg)
    half = fraction_span * math.pi / geom.finesse
    return resonant_detuning(geom) + np.linspace(-half, half, count)


def with_detuning(cfg: CavityConfig, detuning: float) -> CavityConfig:
    """Copy of a configuration at a different detuning."""
    from dataclasses import replace
    return replace(cfg, detuning=detuning)
