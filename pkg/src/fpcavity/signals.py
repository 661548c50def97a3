"""Demodulated reflection-port signals of the modulated cavity.

The reflected field at modulation harmonic p is b_p = E t1^2 J_p G_out_p v
(plus vacuum).  The longitudinal error signal demodulated at harmonic k with
phase phi is

    s = Im''{ e^{i phi} sum_p b_p^dag b_(p-k) },

and the transverse (split-diode) signals insert the sign-function overlap
matrix Q_q on the detection side.  This module provides the static signals,
their linear coefficients with respect to round-trip generator insertions
and surface deformations, and the vacuum projection rows used for shot
noise.  All outputs are scaled by the physical carrier amplitudes
(E_in^2 t1^4 for signal terms, E_in t1^2 included in the vacuum rows).

Sign conventions match the force layer: a positive scalar insertion adds to
the round-trip detuning psi, and the coefficient of that channel equals the
derivative of the static signal with respect to psi.
"""
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .cavity import CavityConfig, CavityGeometry, SpectralPoint, build_basis_cached
from .forces import generator_set, transport_far_to_near
from .modes import gouy_phases, quadrant_split_matrix


def _carrier_rows(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
                  v: NDArray, detector: NDArray | None
                  ) -> dict[int, NDArray[np.complex128]]:
    """Row vectors (G_out_p(0) v)^dag [Q] for every harmonic with weight."""
    rows = {}
    for p in sp.weights:
        left = np.conj(sp.g0_out[p] * v)
        if detector is not None:
            left = left @ detector
        rows[p] = left
    return rows


def _detector_matrix(cfg: CavityConfig, kind: str) -> NDArray | None:
    basis = build_basis_cached(cfg.n_max)
    if kind == "dp":
        return None
    if kind in ("qd_y", "qd_z"):
        return quadrant_split_matrix(basis, kind[-1])
    raise ValueError(f"unknown signal kind {kind!r}")


def static_signal(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
                  v: NDArray, kind: str = "dp") -> float:
    """Static demodulated signal (longitudinal 'dp' or transverse 'qd_q')."""
    det = _detector_matrix(cfg, kind)
    k = cfg.demod_harmonic
    phase = np.exp(1j * cfg.demod_phase)
    scale = (geom.e_in * cfg.t1 ** 2) ** 2
    total = 0.0
    for p, jp in sp.weights.items():
        jm = sp.weights.get(p - k)
        if jm is None:
            continue
        left = np.conj(sp.g0_out[p] * v)
        if det is not None:
            left = left @ det
        total += jp * jm * np.imag(phase * (left @ (sp.g0_out[p - k] * v)))
    return scale * float(total)


def _coef_one_sign(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
                   v: NDArray, gens: list[NDArray], det: NDArray | None,
                   side: str) -> NDArray[np.complex128]:
    """sum_p [upper - lower] sideband pairings at omega (side='plus') or -w*."""
    basis = build_basis_cached(cfg.n_max)
    phi = gouy_phases(basis, geom.phi_gouy)
    k = cfg.demod_harmonic
    e_phi = np.exp(1j * cfg.demod_phase)
    gmid = sp.gw if side == "plus" else sp.gm
    out = np.zeros(len(gens), dtype=np.complex128)
    for p, jp in sp.weights.items():
        left = np.conj(sp.g0_out[p] * v)
        if det is not None:
            left = left @ det
        for sign, m, e in ((+1, p + k, np.conj(e_phi)), (-1, p - k, e_phi)):
            jm = sp.weights.get(m)
            if jm is None:
                continue
            # The output tap passes the far mirror once, hence the 1/r1 on
            # the round-trip reflectivity.
            pref = (sign * jp * jm * e * sp.r_p[m] / cfg.r1
                    * np.exp(-1j * cfg.detuning))
            tail = left * (gmid[m] * phi)     # row through G_m(w) Phi
            for i, gen in enumerate(gens):
                out[i] += pref * (tail @ (gen @ (sp.g0[m] * v)))
    return out


def signal_coefficients(cfg: CavityConfig, geom: CavityGeometry,
                        sp: SpectralPoint, v: NDArray, kind: str = "dp",
                        source: int = 1,
                        profiles: list[NDArray] | None = None
                        ) -> NDArray[np.complex128]:
    """Signal response to generator insertions of one source mirror.

    Returns the coefficient vector over the five round-trip generators
    (psi, x_y, x_z, y_y, y_z), or over ``profiles`` (deformation overlap
    matrices) when given.  Coefficients are the spectral-real pairing of the
    evaluations at omega and -omega*; inter-mirror delay phases are applied
    by the caller.
    """
    basis = build_basis_cached(cfg.n_max)
    det = _detector_matrix(cfg, kind)
    if profiles is not None:
        gens = list(profiles)
    else:
        gens = generator_set(basis)
    if source == 2:
        gens = [transport_far_to_near(g, basis, geom.phi_gouy) for g in gens]
    plus = _coef_one_sign(cfg, geom, sp, v, gens, det, "plus")
    minus = _coef_one_sign(cfg, geom, sp, v, gens, det, "minus")
    scale = (geom.e_in * cfg.t1 ** 2) ** 2
    return scale * 0.5 * (plus + np.conj(minus))


def shot_rows(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
              v: NDArray, kind: str = "dp"
              ) -> dict[tuple[int, int], NDArray[np.complex128]]:
    """Vacuum projection rows of the demodulated signal.

    The shot contribution is sum_(m,port) Re''{ u_(m,port) . da_(m,port) }
    with da the vacuum entering the input coupler (port 1) or the end mirror
    (port 2).  Physical carrier scales are included.
    """
    det = _detector_matrix(cfg, kind)
    k = cfg.demod_harmonic
    e_phi = np.exp(1j * cfg.demod_phase)
    scale = geom.e_in * cfg.t1 ** 2
    rows: dict[tuple[int, int], NDArray[np.complex128]] = {}
    harmonics = set(sp.g0_out)
    for m in harmonics:
        lead = np.zeros(build_basis_cached(cfg.n_max).dim, dtype=np.complex128)
        any_term = False
        for sign, p, e in ((+1, m + k, e_phi), (-1, m - k, np.conj(e_phi))):
            jp = sp.weights.get(p)
            if jp is None:
                continue
            left = np.conj(sp.g0_out[p] * v)
            if det is not None:
                left = left @ det
            lead = lead + sign * e * jp * left
            any_term = True
        if not any_term:
            continue
        lead = -1j * scale * lead
        rows[(m, 1)] = (cfg.t1 ** 2) * lead * sp.gw_out[m]
        rows[(m, 2)] = (cfg.t1 * cfg.t2) * lead * sp.gw[m]
    return rows


def rin_coefficient(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
                    v: NDArray, kind: str = "dp") -> complex:
    """Signal response to relative input power fluctuation mu.

    An input power fluctuation mu(t) modulates every carrier harmonic by
    mu/2 in amplitude; the coefficient is the spectral-real pairing of the
    resulting sideband signal.
    """
    det = _detector_matrix(cfg, kind)
    k = cfg.demod_harmonic
    e_phi = np.exp(1j * cfg.demod_phase)
    scale = (geom.e_in * cfg.t1 ** 2) ** 2

    def one_sign(gout):
        total = 0.0 + 0j
        for p, jp in sp.weights.items():
            left = np.conj(sp.g0_out[p] * v)
            if det is not None:
                left = left @ det
            for sign, m, e in ((+1, p + k, np.conj(e_phi)), (-1, p - k, e_phi)):
                jm = sp.weights.get(m)
                if jm is None:
                    continue
                # i * (pairing sign) * e * J_p J_m <left, G_out_m(w) v> / 2
                total += 0.5j * sign * e * jp * jm * (left @ (gout[m] * v))
        return total

    plus = one_sign(sp.gw_out)
    minus = one_sign(sp.gm_out)
    return scale * 0.5 * (plus + np.conj(minus))
