"""Shared fixtures and oracle helpers for the test suite."""
from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from scipy.linalg import expm

from fpcavity import forces, presets
from fpcavity.cavity import (CavityConfig, build_basis_cached, derive_geometry,
                             resonant_detuning)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260826)


def random_config(rng: np.random.Generator, n_max: int = 4) -> CavityConfig:
    """A random stable, near-symmetric cavity away from the pole guard."""
    mirror_radius = 0.05
    distance = 10.0 ** rng.uniform(-4.0, -1.7)   # short of concentric [m]
    finesse = rng.uniform(50.0, 300.0)
    cfg = CavityConfig.from_finesse(
        finesse=finesse,
        length=2.0 * mirror_radius - distance,
        curvature_1=-mirror_radius, curvature_2=mirror_radius,
        wavelength=1.064e-6, power_in=1.0,
        mod_depth=rng.uniform(0.1, 1.0),
        n_max=n_max)
    geom = derive_geometry(cfg)
    cfg = dataclasses.replace(
        cfg, mod_freq=0.5 * geom.fsr,
        detuning=resonant_detuning(
            geom, rng.uniform(-0.5, 0.5) * math.pi / geom.finesse))
    return cfg


def static_observable_perturbed(cfg, geom, sp, v, outer, gen, eps,
                                recipient=1, source=1) -> float:
    """Steady-state observable with a finite modal insertion in the loop.

    Inserts exp(-i eps gen) in the round trip and recomputes the carrier
    observable sum_p J_p^2 v+ G_p+ outer G_p v from scratch; the derivative
    with respect to eps is an independent oracle for the resummed stiffness
    coefficients at zero sideband frequency.
    """
    basis = build_basis_cached(cfg.n_max)
    o = outer if recipient == 1 else \
        forces.transport_far_to_near(outer, basis, geom.phi_gouy)
    g = gen if source == 1 else \
        forces.transport_far_to_near(gen, basis, geom.phi_gouy)
    orders = np.array([ly + lz for ly, lz in basis.modes])
    phi = np.diag(np.exp(-2j * (orders + 1) * geom.phi_gouy))
    eye = np.eye(basis.dim)
    insertion = expm(-1j * eps * g)
    total = 0.0
    for p, jp in sp.weights.items():
        loop = sp.r_p[p] * np.exp(-1j * cfg.detuning) * (phi @ insertion)
        gv = np.linalg.solve(eye - loop, v)
        total += jp * jp * float(np.real(np.conj(gv) @ (o @ gv)))
    return total


def stiffness_fd(cfg, geom, sp, v, outer, gen, recipient=1, source=1,
                 h: float = 1.0e-4) -> float:
    """Richardson-extrapolated central difference of the static observable."""
    def central(step):
        return (static_observable_perturbed(cfg, geom, sp, v, outer, gen,
                                            step, recipient, source)
                - static_observable_perturbed(cfg, geom, sp, v, outer, gen,
                                              -step, recipient, source)
                ) / (2.0 * step)
    d1 = central(h)
    d2 = central(0.5 * h)
    return (4.0 * d2 - d1) / 3.0


def aligned_vector(cfg, geom) -> np.ndarray:
    return presets.input_field(cfg, geom, theta_y=0.0, theta_z=0.0)
