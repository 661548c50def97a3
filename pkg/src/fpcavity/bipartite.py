"""Bipartite opto-mechanical correlations of the two mirror surfaces.

One internal deformation mode per mirror, coupled only through the
intracavity field, forms a 2x2 closed-loop system

    P X = n,   P_JJ = 1 - c_J f_JJ e^{i w tau},  P_JJ' = + c_J f_JJ' e^{i w tau/2},

with c_J = 4 hbar k^2 R_J E^2 / (M_J D_J) and f the deformation force
coefficients.  Sources are the thermal baths (dimensionless correlators from
:mod:`fpcavity.noise`) and radiation-pressure shot noise.  Variances are
normalized per mode-quadrature pair by half the commutator spectral density,
so an uncorrelated vacuum-driven mode has V_x = V_y = 1 and Heisenberg
requires V_x V_y >= 1.  EPR-type combinations use the weights

    alpha = (P_22, P_12) |P_1^+ P_2^+ P_1^- P_2^-|^(-1/2),  P_J^+- = P_JJ +- P_JJ'.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.constants import hbar as HBAR

from . import forces, noise
from .cavity import (CavityConfig, CavityGeometry, SpectralPoint,
                     build_basis_cached, gouy_phases, spectral_point)
from .mechanics import DeformationMode, deformation_profile_matrix


@dataclass(frozen=True)
class BipartiteResult:
    omega: float
    p_matrix: NDArray
    alpha: NDArray
    v_x: NDArray          # normalized single-mode X variances (2,)
    v_y: NDArray          # normalized single-mode Y variances (2,)
    v_sum: NDArray        # normalized variances of (u+, u-, w+, w-)
    epr_products: tuple[float, float]
    entangled: bool


def _chi(mode: DeformationMode, omega: complex) -> complex:
    return 1.0 / (mode.omega0 ** 2 - omega ** 2 - 1j * omega * mode.gamma)


def _setup(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
           v: NDArray, modes: tuple[DeformationMode, DeformationMode]):
    """P matrix, thermal coefficients and shot rows of the 2x2 system."""
    mats = [deformation_profile_matrix(cfg, geom, m) for m in modes]
    refl = {1: cfg.r1 ** 2, 2: cfg.r2 ** 2}
    e2 = geom.e_cav ** 2
    k = geom.k
    omega = sp.omega
    tau = geom.tau
    P = np.zeros((2, 2), dtype=np.complex128)
    th_coef = np.zeros(2, dtype=np.complex128)
    sn_rows: list[dict] = []
    for a, ma in enumerate(modes):
        chi_a = _chi(ma, omega)
        denom_gain = 4.0 * HBAR * k * k * refl[ma.mirror] * e2 * chi_a / ma.mass
        for b, mb in enumerate(modes):
            f_ab = forces.deformation_coefficient(
                cfg, geom, sp, v, outer_profile=mats[a], gen_profile=mats[b],
                recipient=ma.mirror, source=mb.mirror)
            if a == b:
                delay = np.exp(1j * omega * tau)
                P[a, b] = 1.0 - denom_gain * f_ab * delay
            else:
                delay = np.exp(1j * omega * tau / 2.0)
                P[a, b] = +denom_gain * f_ab * delay
        # Thermal drive coefficient in zero-point units: sqrt(g) w_a chi_a.
        th_coef[a] = math.sqrt(ma.gamma) * ma.omega0 * chi_a
        # Shot drive per vacuum row: 2 k hbar R E chi / (M x_zpf).
        x_zpf = math.sqrt(HBAR / (2.0 * ma.mass * ma.omega0))
        c_sn = (2.0 * k * HBAR * refl[ma.mirror] * geom.e_cav * chi_a
                / (ma.mass * x_zpf))
        rows = forces.shot_force_rows(cfg, geom, sp, v, mats[a],
                                      recipient=ma.mirror)
        sn_rows.append({key: c_sn * u for key, u in rows.items()})
    return mats, P, th_coef, sn_rows


def _variances(weights: NDArray, inv_p: NDArray, th_coef: NDArray,
               sn_rows: list[dict], corr: list, comm_scale: NDArray,
               omega_ratio: NDArray, quad: str, scale: float
               ) -> tuple[float, float]:
    """(raw variance, commutator bound) of a weighted mode combination.

    ``quad`` selects the position-like ('x') or momentum-like ('y')
    quadrature; the momentum transfer carries an extra -i w / w_J.
    """
    w_x = weights @ inv_p
    w_y = w_x * (-1j) * omega_ratio
    w_t = w_x if quad == "x" else w_y
    var = 0.0
    comm = 0.0
    merged: dict = {}
    merged_x: dict = {}
    merged_y: dict = {}
    for j in range(2):
        c_sym = corr[j].xx if quad == "x" else corr[j].yy
        var += abs(w_t[j] * th_coef[j]) ** 2 * float(np.real(c_sym)) * scale ** 2
        comm += abs(w_x[j] * th_coef[j]) ** 2 * comm_scale[j] * scale ** 2
        for key, u in sn_rows[j].items():
            merged[key] = merged.get(key, 0.0) + w_t[j] * u * scale
            merged_x[key] = merged_x.get(key, 0.0) + w_x[j] * u * scale
            merged_y[key] = merged_y.get(key, 0.0) + w_y[j] * u * scale
    var += float(np.real(noise.shot_pairing(merged)))
    # Shot part of the cross X-Y commutator: rows differ by -i w/w_J per mode.
    comm += abs(float(np.imag(noise.shot_pairing(merged_x, merged_y))))
    return var, comm


def bipartite_spectrum(cfg: CavityConfig, geom: CavityGeometry, v: NDArray,
                       modes: tuple[DeformationMode, DeformationMode],
                       omega: float, thermal_model: str = "diosi",
                       temperature: float = 295.0,
                       source_scale: float = 1.0) -> BipartiteResult:
    """Normalized quadrature variances and EPR products at one frequency."""
    sp = spectral_point(cfg, geom, omega)
    _, P, th_coef, sn_rows = _setup(cfg, geom, sp, v, modes)
    inv_p = np.linalg.inv(P)
    corr = [noise.thermal_correlators(thermal_model, omega, m.omega0,
                                      m.gamma, temperature) for m in modes]
    omega_ratio = np.array([omega / m.omega0 for m in modes])
    # Thermal commutator density per unit |transfer|^2: (w/w_J) * (comm/2).
    comm_scale = np.array([omega_ratio[j] * 0.5 * corr[j].commutator
                           for j in range(2)])

    p_plus = np.array([P[0, 0] + P[0, 1], P[1, 1] + P[1, 0]])
    p_minus = np.array([P[0, 0] - P[0, 1], P[1, 1] - P[1, 0]])
    norm = abs(p_plus[0] * p_plus[1] * p_minus[0] * p_minus[1]) ** 0.25
    alpha = np.array([abs(P[1, 1]), abs(P[0, 1])]) / max(norm, 1e-300)

    def norm_var(weights, quad):
        var, comm = _variances(np.asarray(weights, dtype=np.complex128),
                               inv_p, th_coef, sn_rows, corr, comm_scale,
                               omega_ratio, quad, source_scale)
        return var / max(comm, 1e-300)

    v_x = np.array([norm_var([1, 0], "x"), norm_var([0, 1], "x")])
    v_y = np.array([norm_var([1, 0], "y"), norm_var([0, 1], "y")])
    combos = [np.array([alpha[0], alpha[1]]), np.array([alpha[0], -alpha[1]])]
    v_sum = np.array([norm_var(combos[0], "x"), norm_var(combos[1], "x"),
                      norm_var(combos[0], "y"), norm_var(combos[1], "y")])
    # EPR products pairing opposite-parity combinations.
    prod_a = float(v_sum[0] * v_sum[3])
    prod_b = float(v_sum[1] * v_sum[2])
    return BipartiteResult(
        omega=float(np.real(omega)), p_matrix=P, alpha=alpha,
        v_x=v_x, v_y=v_y, v_sum=v_sum,
        epr_products=(prod_a, prod_b),
        entangled=bool(min(prod_a, prod_b) < 1.0 - 1e-9))


def homodyne_variance(cfg: CavityConfig, geom: CavityGeometry, v: NDArray,
                      modes: tuple[DeformationMode, DeformationMode],
                      omega: float, thetas: NDArray,
                      thermal_model: str = "diosi",
                      temperature: float = 295.0,
                      include_motion: bool = True) -> NDArray[np.float64]:
    """Reflected-port homodyne quadrature variance versus LO angle.

    Vacuum level is 1; values below 1 indicate ponderomotive squeezing.
    """
    sp = spectral_point(cfg, geom, omega)
    mats, P, th_coef, sn_rows = _setup(cfg, geom, sp, v, modes)
    inv_p = np.linalg.inv(P)
    corr = [noise.thermal_correlators(thermal_model, omega, m.omega0,
                                      m.gamma, temperature) for m in modes]
    basis = build_basis_cached(cfg.n_max)
    phi = gouy_phases(basis, geom.phi_gouy)
    k = geom.k

    # Direct vacuum rows of the projected output field (harmonic 0).
    direct = {
        (0, 1): (cfg.t1 ** 2) * np.conj(v) * sp.gw_out[0],
        (0, 2): (cfg.t1 * cfg.t2) * np.conj(v) * sp.gw[0],
    }

    # Output response z_J to the deformation coordinates (zero-point units).
    def z_coef(j: int, gdiag, g0) -> complex:
        m = modes[j]
        mat = mats[j]
        if m.mirror == 2:
            mat = forces.transport_far_to_near(mat, basis, geom.phi_gouy)
        pref = -1j * (cfg.t1 ** 2) * geom.e_in * sp.weights[0] \
            * sp.r_p[0] / cfg.r1 * np.exp(-1j * cfg.detuning)
        val = np.conj(v) @ ((gdiag * phi) * (mat @ (g0 * v)))
        delay = np.exp(1j * sp.omega * geom.tau
                       * (1.0 if m.mirror == 1 else 0.5))
        zpf = math.sqrt(HBAR / (2.0 * m.mass * m.omega0))
        return pref * val * delay * 2.0 * k * zpf

    z_plus = np.array([z_coef(j, sp.gw[0], sp.g0[0]) for j in range(2)])
    z_minus = np.array([z_coef(j, sp.gm[0], sp.g0[0]) for j in range(2)])

    out = np.empty(len(thetas))
    for i, theta in enumerate(thetas):
        e = np.exp(-1j * theta)
        c = e * z_plus + np.conj(e * z_minus)   # spectral-real coefficients
        merged = {key: 2.0 * e * row for key, row in direct.items()}
        var_th = 0.0
        if include_motion:
            w_t = (c @ inv_p)
            for j in range(2):
                var_th += abs(w_t[j] * th_coef[j]) ** 2 * float(np.real(corr[j].xx))
                for key, u in sn_rows[j].items():
                    add = w_t[j] * u
                    merged[key] = add if key not in merged else merged[key] + add
        out[i] = float(np.real(noise.shot_pairing(merged))) + var_th
    return out
