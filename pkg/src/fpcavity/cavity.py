"""Cavity configuration, derived geometry and frequency-domain Green functions.

The intracavity field is described per modulation harmonic p by diagonal
resolvent ("Green") matrices on the Hermite-Gauss basis,

    G_p(w)_l = 1 / (1 - R_p e^{-i psi} e^{i w tau} Phi_l),

with R_p = r1 r2 e^{i p Lambda tau}, psi the carrier detuning per round trip,
tau the round-trip time and Phi_l the Gouy phase factor of mode l.  The
Fourier convention is e^{-i w t}, so a delay by tau multiplies spectra by
e^{+i w tau} and frequencies with negative imaginary part are decaying.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray
from scipy.constants import c as C_LIGHT
from scipy.constants import hbar as HBAR
from scipy.special import jv

from .modes import ModeBasis, gouy_phases


class ResonanceSingularity(Exception):
    """Green function evaluated too close to a cavity pole."""


@dataclass(frozen=True)
class CavityConfig:
    """Physical cavity parameters (SI units, angles in rad).

    Mirror curvature sign convention: a concave mirror facing the cavity has
    curvature_1 < 0 for the input mirror and curvature_2 > 0 for the end
    mirror, so a symmetric cavity has curvature_2 = -curvature_1.
    """

    length: float
    curvature_1: float
    curvature_2: float
    wavelength: float = 1.064e-6
    r1: float = 0.9968629
    t1: float = math.sqrt(1.0 - 0.9968629 ** 2)
    r2: float = 0.9968629
    t2: float = math.sqrt(1.0 - 0.9968629 ** 2)
    loss_1: float = 0.0
    loss_2: float = 0.0
    detuning: float = 0.0
    power_in: float = 1.0
    mod_freq: float = 0.0          # phase-modulation angular frequency [rad/s]
    mod_depth: float = 0.0
    demod_harmonic: int = 1
    demod_phase: float = 0.0
    n_max: int = 6
    finesse_convention: str = "log"   # 'log': R = e^{-pi/F}; 'standard'

    def validate(self) -> None:
        if self.length <= 0:
            raise ValueError("cavity length must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        for name in ("r1", "t1", "r2", "t2"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} must lie strictly in (0, 1), got {val}")
        for j, (r, t, a) in enumerate(((self.r1, self.t1, self.loss_1),
                                       (self.r2, self.t2, self.loss_2)), start=1):
            budget = r * r + t * t + a
            if budget > 1.0 + 1e-9:
                raise ValueError(
                    f"mirror {j} power budget r^2 + t^2 + loss = {budget} > 1")
        if self.demod_harmonic % 2 == 0 or self.demod_harmonic < 1:
            raise ValueError("demodulation harmonic must be a positive odd integer")
        if self.mod_depth < 0:
            raise ValueError("modulation depth must be non-negative")
        if self.finesse_convention not in ("log", "standard"):
            raise ValueError("finesse_convention must be 'log' or 'standard'")

    @classmethod
    def from_finesse(cls, finesse: float, finesse_convention: str = "log",
                     **kwargs) -> "CavityConfig":
        """Symmetric lossless mirrors from a target finesse.

        finesse_convention='log' uses R = r1 r2 = exp(-pi/finesse);
        'standard' solves finesse = pi sqrt(R) / (1 - R).
        """
        convention = finesse_convention
        if convention == "log":
            R = math.exp(-math.pi / finesse)
        elif convention == "standard":
            # Solve F (1 - R) = pi sqrt(R) for R in (0, 1).
            x = math.pi / (2.0 * finesse)
            s = -x + math.sqrt(x * x + 1.0)   # sqrt(R)
            R = s * s
        else:
            raise ValueError("convention must be 'log' or 'standard'")
        r = math.sqrt(R)
        t = math.sqrt(1.0 - R)
        return cls(r1=r, t1=t, r2=r, t2=t,
                   finesse_convention=convention, **kwargs)


@dataclass(frozen=True)
class CavityGeometry:
    """Geometry and field scales derived from a :class:`CavityConfig`."""

    g1: float
    g2: float
    waist_pos: float          # distance of the waist from mirror 1 [m]
    waist_radius: float       # w0 [m]
    rayleigh: float           # b = z_R [m]
    w1: float                 # spot radius at mirror 1 [m]
    w2: float                 # spot radius at mirror 2 [m]
    phi_gouy: float           # one-way Gouy phase [rad]
    tau: float                # round-trip time [s]
    fsr: float                # free spectral range [rad/s]
    k: float                  # wavenumber [1/m]
    finesse: float
    loop_reflectivity: float  # R = r1 r2
    e_in: float               # input amplitude sqrt(P / hbar omega_laser)
    e_cav: float              # t1 * e_in
    q1: complex               # cavity-mode complex curvature at mirror 1
    near_instability: bool = False


def derive_geometry(cfg: CavityConfig) -> CavityGeometry:
    """Resolve the resonator geometry, Gouy phase and field normalization."""
    cfg.validate()
    L = cfg.length
    g1 = 1.0 + L / cfg.curvature_1
    g2 = 1.0 - L / cfg.curvature_2
    gg = g1 * g2
    if not 0.0 <= gg <= 1.0:
        raise ValueError(
            f"resonator unstable: g1 g2 = {gg:.6g} outside [0, 1]")
    near = gg < 1e-6 or gg > 1.0 - 1e-6
    den = g1 + g2 - 2.0 * gg
    if abs(den) < 1e-12:
        # Symmetric degenerate cases (confocal g1 = g2 = 0, planar g1 = g2 = 1)
        if abs(g1 - g2) > 1e-9:
            raise ValueError("degenerate asymmetric resonator geometry")
        x0 = L / 2.0
        if g1 >= 1.0:
            raise ValueError("planar resonator has no confined mode")
        zr = 0.5 * L * math.sqrt((1.0 + g1) / (1.0 - g1))
    else:
        x0 = L * g2 * (1.0 - g1) / den
        zr2 = gg * (1.0 - gg) * L * L / (den * den)
        if zr2 <= 0:
            raise ValueError("resonator on a stability boundary, no waist defined")
        zr = math.sqrt(zr2)
    k = 2.0 * math.pi / cfg.wavelength
    w0 = math.sqrt(2.0 * zr / k)
    w1 = w0 * math.sqrt(1.0 + (x0 / zr) ** 2)
    w2 = w0 * math.sqrt(1.0 + ((L - x0) / zr) ** 2)
    phi_g = math.atan2(L - x0, zr) + math.atan2(x0, zr)
    R_loop = cfg.r1 * cfg.r2
    if cfg.finesse_convention == "log":
        finesse = -math.pi / math.log(R_loop)
    else:
        finesse = math.pi * math.sqrt(R_loop) / (1.0 - R_loop)
    tau = 2.0 * L / C_LIGHT
    omega_laser = k * C_LIGHT
    e_in = math.sqrt(cfg.power_in / (HBAR * omega_laser))
    # Complex curvature at mirror 1 (1/q = 1/R + 2i/(k w^2)); the mode
    # wavefront matches the mirror there, R(mirror 1) = curvature_1 < 0.
    inv_r = 0.0 if x0 == 0 else -x0 / (x0 * x0 + zr * zr)
    inv_q1 = inv_r + 2j / (k * w1 * w1)
    return CavityGeometry(
        g1=g1, g2=g2, waist_pos=x0, waist_radius=w0, rayleigh=zr,
        w1=w1, w2=w2, phi_gouy=phi_g, tau=tau, fsr=2.0 * math.pi * C_LIGHT / (2 * L),
        k=k, finesse=finesse, loop_reflectivity=R_loop,
        e_in=e_in, e_cav=cfg.t1 * e_in, q1=1.0 / inv_q1,
        near_instability=near)


def harmonic_weights(mod_depth: float, cutoff: float = 1e-12) -> dict[int, float]:
    """Bessel sideband weights J_p(mod_depth) for |J_p| >= cutoff."""
    weights = {0: float(jv(0, mod_depth))}
    p = 1
    while True:
        val = float(jv(p, mod_depth))
        if abs(val) < cutoff and p > mod_depth:
            break
        if abs(val) >= cutoff:
            weights[p] = val
            weights[-p] = val if p % 2 == 0 else -val
        p += 1
        if p > 200:
            break
    return weights


def loop_phase(cfg: CavityConfig, geom: CavityGeometry, p: int,
               omega: complex) -> NDArray[np.complex128]:
    """Per-mode round-trip factor R_p e^{-i psi} e^{i omega tau} Phi_l."""
    basis = build_basis_cached(cfg.n_max)
    phi = gouy_phases(basis, geom.phi_gouy)
    R_p = geom.loop_reflectivity * np.exp(1j * p * cfg.mod_freq * geom.tau)
    return R_p * np.exp(-1j * cfg.detuning) * np.exp(1j * omega * geom.tau) * phi


_BASIS_CACHE: dict[int, ModeBasis] = {}


def build_basis_cached(n_max: int) -> ModeBasis:
    from .modes import build_basis
    if n_max not in _BASIS_CACHE:
        _BASIS_CACHE[n_max] = build_basis(n_max)
    return _BASIS_CACHE[n_max]


def green_diagonal(cfg: CavityConfig, geom: CavityGeometry, p: int,
                   omega: complex, pole_tol: float = 1e-9
                   ) -> NDArray[np.complex128]:
    """Diagonal of the intracavity Green matrix G_p(omega)."""
    denom = 1.0 - loop_phase(cfg, geom, p, omega)
    small = np.abs(denom) < pole_tol
    if np.any(small):
        basis = build_basis_cached(cfg.n_max)
        idx = int(np.argmin(np.abs(denom)))
        raise ResonanceSingularity(
            f"Green function within {pole_tol:.0e} of a pole for mode "
            f"{basis.modes[idx]} at harmonic p={p}, omega={omega}")
    return 1.0 / denom


def resonant_detuning(geom: CavityGeometry, offset: float = 0.0) -> float:
    """Detuning that puts the fundamental mode on resonance, plus an offset.

    The round-trip phase of mode lambda is -psi - 2 (lambda + 1) phi_gouy, so
    the fundamental resonates at psi = -2 phi_gouy (mod 2 pi).
    """
    return float((-2.0 * geom.phi_gouy) % (2.0 * math.pi) + offset)


def green_out_diagonal(cfg: CavityConfig, geom: CavityGeometry, p: int,
                       omega: complex) -> NDArray[np.complex128]:
    """Diagonal of the reflection-port Green matrix (G_p - 1)/r1 - r1/t1**2.

    The reflected amplitude for input v is t1**2 G_out v; the 1/r1 factor on
    the circulating part keeps the lossless input/output map exactly unitary.
    """
    g = green_diagonal(cfg, geom, p, omega)
    return (g - 1.0) / cfg.r1 - cfg.r1 / (cfg.t1 ** 2)


def green_perturb(cfg: CavityConfig, geom: CavityGeometry, p: int,
                  omega: complex, generator: NDArray) -> NDArray[np.complex128]:
    """First-order response of the round trip to a modal generator insertion.

    Returns e^{-i psi} R_p G_p(omega) Phi gen G_p(omega) as a dense matrix;
    this is +i times the derivative of G_p with respect to a perturbation
    epsilon inserted as e^{-i epsilon gen} in the round trip.  Propagation
    delays between the insertion plane and an observation plane are not
    included here.
    """
    basis = build_basis_cached(cfg.n_max)
    g = green_diagonal(cfg, geom, p, omega)
    phi = gouy_phases(basis, geom.phi_gouy)
    R_p = geom.loop_reflectivity * np.exp(1j * p * cfg.mod_freq * geom.tau)
    pref = R_p * np.exp(-1j * cfg.detuning)
    return pref * (g[:, None] * phi[:, None] * generator * g[None, :])


def adjoint_reversed(mat_at_minus: NDArray) -> NDArray:
    """M''(w) = M(-w*)^dag, the adjoint-reversed spectral matrix.

    Given M evaluated at -conj(omega), returns the matrix such that for a
    Hermitian-symmetric spectral family the combinations (M + M'')/2 and
    (M - M'')/2i are the real and imaginary spectral parts.
    """
    return np.asarray(mat_at_minus).conj().T


def re_spectral(m_plus: NDArray, m_minus: NDArray) -> NDArray:
    """Real spectral part (M(w) + M(-w*)^dag) / 2 from the two evaluations."""
    return 0.5 * (np.asarray(m_plus) + adjoint_reversed(m_minus))


def im_spectral(m_plus: NDArray, m_minus: NDArray) -> NDArray:
    """Imaginary spectral part (M(w) - M(-w*)^dag) / 2i."""
    return (np.asarray(m_plus) - adjoint_reversed(m_minus)) / 2j


@dataclass
class SpectralPoint:
    """All Green diagonals needed at one sideband frequency.

    For every retained modulation harmonic p, stores the static (omega = 0)
    and sideband (omega, -omega*) Green diagonals of the cavity and of the
    reflection output port.
    """

    omega: complex
    weights: dict[int, float]
    g0: dict[int, NDArray]
    gw: dict[int, NDArray]
    gm: dict[int, NDArray]
    g0_out: dict[int, NDArray]
    gw_out: dict[int, NDArray]
    gm_out: dict[int, NDArray]
    r_p: dict[int, complex]


def spectral_point(cfg: CavityConfig, geom: CavityGeometry, omega: complex,
                   cutoff: float = 1e-12) -> SpectralPoint:
    """Evaluate Green diagonals for all harmonics p (and p +- demod)."""
    weights = harmonic_weights(cfg.mod_depth, cutoff)
    k = cfg.demod_harmonic
    harmonics = set(weights)
    for p in list(weights):
        harmonics.add(p + k)
        harmonics.add(p - k)
    g0, gw, gm, g0o, gwo, gmo, r_p = {}, {}, {}, {}, {}, {}, {}
    minus = -np.conj(omega)
    for p in sorted(harmonics):
        g0[p] = green_diagonal(cfg, geom, p, 0.0)
        gw[p] = green_diagonal(cfg, geom, p, omega)
        gm[p] = green_diagonal(cfg, geom, p, minus)
        off = cfg.r1 / (cfg.t1 ** 2)
        g0o[p] = (g0[p] - 1.0) / cfg.r1 - off
        gwo[p] = (gw[p] - 1.0) / cfg.r1 - off
        gmo[p] = (gm[p] - 1.0) / cfg.r1 - off
        r_p[p] = geom.loop_reflectivity * np.exp(1j * p * cfg.mod_freq * geom.tau)
    return SpectralPoint(omega=omega, weights=weights, g0=g0, gw=gw, gm=gm,
                         g0_out=g0o, gw_out=gwo, gm_out=gmo, r_p=r_p)
