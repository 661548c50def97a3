"""Noise-source models: thermal correlators, substrate Brownian noise, shot.

Thermal baths are described by dimensionless symmetric correlators
C_xx, C_yy, C_xy of the normalized quadrature pair of each mechanical mode,
together with the model-independent commutator spectral density 4 w / w_j.
Three bath models are provided:

* ``brownian`` -- classical white-force bath, all entries 4 kT / (hbar w_j).
* ``diosi``    -- Brownian bath with the minimal quantum completion: a
  momentum-diffusion floor and the antisymmetric zero-point term.
* ``gv``       -- Ohmic quantum bath, all entries 2 (w / w_j)(1 + coth).

The physical double-sided thermal force PSD of a mode of mass m, resonance
w_j and damping gamma is (m gamma hbar w_j / 2) C_xx(w); for the Brownian
model this is the standard 2 m gamma kT.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.constants import hbar as HBAR
from scipy.constants import k as K_B

from .modes import ModeBasis, _hermite_factors

THERMAL_MODELS = ("brownian", "diosi", "gv")


@dataclass(frozen=True)
class ThermalCorrelators:
    xx: complex
    yy: complex
    xy: complex
    commutator: float


def thermal_commutator(omega: float, omega_j: float) -> float:
    """Model-independent quadrature commutator spectral density 4 w / w_j."""
    return 4.0 * omega / omega_j


def thermal_correlators(model: str, omega: float, omega_j: float,
                        gamma: float, temperature: float) -> ThermalCorrelators:
    """Dimensionless bath correlators of one mechanical mode at frequency w."""
    comm = thermal_commutator(omega, omega_j)
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    theta = K_B * temperature / HBAR       # thermal frequency kT / hbar
    classical = 4.0 * theta / omega_j
    if model == "brownian":
        return ThermalCorrelators(xx=classical, yy=classical, xy=classical,
                                  commutator=comm)
    if model == "diosi":
        floor = (abs(omega + 1j * gamma) ** 2 / omega_j ** 2) * (omega_j / (3.0 * theta))
        xx = classical + floor + 2.0 * omega / omega_j
        floor_y = ((abs(omega + 1j * gamma) ** 2 / omega ** 2)
                   * (omega_j / (3.0 * theta))) if omega != 0 else np.inf
        yy = classical + floor_y + 2.0 * omega / omega_j
        xy = 2j * omega / omega_j
        return ThermalCorrelators(xx=xx, yy=yy, xy=xy, commutator=comm)
    if model == "gv":
        x = HBAR * omega / (2.0 * K_B * temperature)
        val = 2.0 * (omega / omega_j) * (1.0 + 1.0 / math.tanh(x))
        return ThermalCorrelators(xx=val, yy=val, xy=val, commutator=comm)
    raise ValueError(f"unknown thermal model {model!r}; "
                     f"choose one of {THERMAL_MODELS}")


def thermal_force_psd(model: str, omega: float, omega_j: float, gamma: float,
                      mass: float, temperature: float) -> float:
    """Double-sided physical thermal generalized-force PSD of one mode."""
    c = thermal_correlators(model, omega, omega_j, gamma, temperature)
    return float(np.real(c.xx)) * mass * gamma * HBAR * omega_j / 2.0


def shot_pairing(rows_a: dict[tuple[int, int], NDArray],
                 rows_b: dict[tuple[int, int], NDArray] | None = None) -> complex:
    """Cross-spectral density of two vacuum-projected channels.

    Channels are of the form sum Re''{ u_(m, port) . da_(m, port) } with
    independent vacuum inputs per (harmonic, port); their pairing is
    C_ab = (1/4) sum u_a . u_b^dag.
    """
    if rows_b is None:
        rows_b = rows_a
    total = 0.0 + 0.0j
    for key, ua in rows_a.items():
        ub = rows_b.get(key)
        if ub is not None:
            total += np.dot(ua, np.conj(ub))
    return 0.25 * total


# ---------------------------------------------------------------------------
# Substrate Brownian (internal) noise via the pressure-response method.
# ---------------------------------------------------------------------------

_BEAM_FACTOR_CACHE: dict[tuple, float] = {}


def _intensity_ft_table(basis: ModeBasis, w: float, k_grid: NDArray
                        ) -> NDArray[np.complex128]:
    """1-D Fourier transforms f[n, m, j] = FT{h_n h_m}(k_j) at spot w."""
    degree = 96 + 8 * basis.n_max
    t, a = _hermite_factors(basis.n_max, degree)
    y = w * t / math.sqrt(2.0)
    phase = np.exp(-1j * np.outer(k_grid, y))          # (nk, deg)
    return np.einsum("ni,mi,ki->nmk", a, a, phase, optimize=True)


def beam_pressure_factor(basis: ModeBasis, v: NDArray, w: float,
                         n_k: int = 160, n_theta: int = 64) -> float:
    """Elastic self-overlap W of the beam intensity profile on a half-space.

    W = (2 pi)^-2 integral |I~(k_vec)|^2 / |k_vec| d^2k, where I~ is the
    Fourier transform of the normalized intensity pattern of the modal state
    ``v``.  For the fundamental mode W = 1 / (2 sqrt(pi) w).
    """
    key = (basis.n_max, w, tuple(np.round(np.asarray(v), 12)))
    if key in _BEAM_FACTOR_CACHE:
        return _BEAM_FACTOR_CACHE[key]
    # Radial Gauss-Legendre grid; |I~|^2 decays like e^{-k^2 w^2 / 4}.
    kmax = (12.0 + 4.0 * math.sqrt(basis.n_max + 1.0)) / w
    x, wq = np.polynomial.legendre.leggauss(n_k)
    k_r = 0.5 * kmax * (x + 1.0)
    k_w = 0.5 * kmax * wq
    thetas = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    cmat = np.outer(v, np.conj(v))     # mode-pair weights v_l v_l'^*
    # Evaluate I~(k cos th, k sin th) on the polar grid via 1-D FT tables.
    ky = np.outer(k_r, np.cos(thetas)).ravel()
    kz = np.outer(k_r, np.sin(thetas)).ravel()
    grid, inverse = np.unique(np.concatenate([ky, kz]), return_inverse=True)
    table = _intensity_ft_table(basis, w, grid)
    iy = inverse[: ky.size]
    iz = inverse[ky.size:]
    dim = basis.dim
    fy = np.empty((dim, dim, ky.size), dtype=np.complex128)
    fz = np.empty((dim, dim, ky.size), dtype=np.complex128)
    for r, (ly, lz) in enumerate(basis.modes):
        for c, (my, mz) in enumerate(basis.modes):
            fy[r, c] = table[ly, my][iy]
            fz[r, c] = table[lz, mz][iz]
    intensity_ft = np.einsum("rc,rck,rck->k", cmat, fy, fz, optimize=True)
    mag2 = np.abs(intensity_ft) ** 2
    ang = mag2.reshape(n_k, n_theta).mean(axis=1) * 2.0 * math.pi
    radial = float(np.sum(k_w * ang))
    out = radial / (2.0 * math.pi) ** 2
    _BEAM_FACTOR_CACHE[key] = out
    return out


def substrate_displacement_psd(basis: ModeBasis, v: NDArray, w: float,
                               omega: float, temperature: float,
                               young: float = 7.2e10, poisson: float = 0.17,
                               loss_angle: float = 1.0e-6) -> float:
    """Single-sided substrate Brownian displacement PSD of one mirror [m^2/Hz].

    Pressure-response (half-space) result generalized to an arbitrary modal
    intensity pattern: S_x(w) = (8 kT / w) phi (1 - sigma^2) / E * W, with W
    from :func:`beam_pressure_factor`; the fundamental mode reproduces the
    textbook 4 kT phi (1 - sigma^2) / (w_freq sqrt(pi) E w_spot).
    """
    W = beam_pressure_factor(basis, v, w)
    return (8.0 * K_B * temperature / omega) * loss_angle \
        * (1.0 - poisson ** 2) / young * W
