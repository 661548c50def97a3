"""Radiation-pressure couplings of intracavity light to mirror motion.

Mirror motion enters the round trip as a phase-front insertion
e^{-i (psi + sum_i eps_i G_i)} with generators G_i drawn from

    (1, X_y, X_z, Y_y, Y_z)

paired with the cavity-frame coordinates (detuning, tilt-like and
shift-like transverse misalignments per axis).  The force and torque
responses are frequency-dependent sandwich contractions of the static and
sideband Green diagonals; all outputs here are dimensionless coefficients,
the physical scales (hbar k E^2 ...) are applied by the mechanics layer.

Sign convention: a positive eps_0 (the scalar generator) adds to the
round-trip detuning psi.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .cavity import CavityConfig, CavityGeometry, SpectralPoint, build_basis_cached
from .modes import ModeBasis, gouy_phases, quadrature_matrices

GEN_LABELS = ("psi", "x_y", "x_z", "y_y", "y_z")
OUTER_LABELS = ("force", "torque_y", "torque_z")


def generator_set(basis: ModeBasis) -> list[NDArray[np.complex128]]:
    """The five round-trip generators (1, X_y, X_z, Y_y, Y_z)."""
    xy, yy = quadrature_matrices(basis, "y")
    xz, yz = quadrature_matrices(basis, "z")
    eye = np.eye(basis.dim, dtype=np.complex128)
    return [eye, xy, xz, yy, yz]


def outer_set(basis: ModeBasis) -> list[NDArray[np.complex128]]:
    """Left insertions selecting force, torque_y, torque_z responses."""
    xy, _ = quadrature_matrices(basis, "y")
    xz, _ = quadrature_matrices(basis, "z")
    eye = np.eye(basis.dim, dtype=np.complex128)
    return [eye, xy, xz]


def transport_far_to_near(mat: NDArray, basis: ModeBasis,
                          phi_gouy: float) -> NDArray[np.complex128]:
    """Express an insertion at the far mirror at the input-mirror plane.

    Conjugation by the one-way propagator: entries pick up
    e^{-i (n_row - n_col) phi_gouy}.  For X quadratures this is the rotation
    X -> cos(phi) X + sin(phi) Y.
    """
    orders = np.array([ly + lz for ly, lz in basis.modes], dtype=float)
    phase = np.exp(-1j * (orders[:, None] - orders[None, :]) * phi_gouy)
    return np.asarray(mat) * phase


def _sandwich(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
              p: int, outer: NDArray, gen: NDArray, side: str
              ) -> NDArray[np.complex128]:
    """G_p(0)^dag outer G_p(w) Phi gen G_p(0) with the loop prefactor."""
    basis = build_basis_cached(cfg.n_max)
    phi = gouy_phases(basis, geom.phi_gouy)
    g0 = sp.g0[p]
    gmid = sp.gw[p] if side == "plus" else sp.gm[p]
    pref = sp.r_p[p] * np.exp(-1j * cfg.detuning)
    inner = (gmid * phi)[:, None] * (gen * g0[None, :])
    return pref * (np.conj(g0)[:, None] * (outer @ inner))


def response_matrix(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
                    outer: NDArray, gen: NDArray, part: str = "im"
                    ) -> NDArray[np.complex128]:
    """Spectral-real or -imaginary sandwich response, summed over harmonics.

    part='im' gives 2 sum_p J_p^2 Im''{...} (force/torque stiffness); the
    spectral imaginary part pairs the evaluation at omega with the adjoint of
    the evaluation at -omega*.
    """
    out = None
    for p, jp in sp.weights.items():
        m_plus = _sandwich(cfg, geom, sp, p, outer, gen, "plus")
        m_minus = _sandwich(cfg, geom, sp, p, outer, gen, "minus")
        if part == "im":
            term = (jp * jp) * (m_plus - m_minus.conj().T) / 1j
        elif part == "re":
            term = (jp * jp) * (m_plus + m_minus.conj().T)
        else:
            raise ValueError("part must be 're' or 'im'")
        out = term if out is None else out + term
    return out


@dataclass(frozen=True)
class StiffnessSet:
    """Dimensionless stiffness coefficients of one recipient/source pair.

    ``coef[o, i]`` is the response of observable o (force, torque_y,
    torque_z) on the recipient mirror to generator coordinate i
    (psi, x_y, x_z, y_y, y_z) of the source mirror.  Delay phases between
    the mirrors are *not* included here.
    """

    recipient: int
    source: int
    coef: NDArray[np.complex128]   # shape (3, 5)


def stiffness_matrices(cfg: CavityConfig, geom: CavityGeometry,
                       sp: SpectralPoint, recipient: int = 1,
                       source: int = 1) -> list[list[NDArray]]:
    """Modal stiffness matrices K[o][i] (each dim x dim)."""
    basis = build_basis_cached(cfg.n_max)
    outers = outer_set(basis)
    gens = generator_set(basis)
    if recipient == 2:
        outers = [transport_far_to_near(o, basis, geom.phi_gouy) for o in outers]
    if source == 2:
        gens = [transport_far_to_near(g, basis, geom.phi_gouy) for g in gens]
    return [[response_matrix(cfg, geom, sp, o, g, "im") for g in gens]
            for o in outers]


def stiffness_coefficients(cfg: CavityConfig, geom: CavityGeometry,
                           sp: SpectralPoint, v: NDArray,
                           recipient: int = 1, source: int = 1) -> StiffnessSet:
    """Contract the stiffness matrices on the steady-state mode vector."""
    mats = stiffness_matrices(cfg, geom, sp, recipient, source)
    coef = np.array([[np.conj(v) @ m @ v for m in row] for row in mats])
    return StiffnessSet(recipient=recipient, source=source, coef=coef)


def deformation_coefficient(cfg: CavityConfig, geom: CavityGeometry,
                            sp: SpectralPoint, v: NDArray,
                            outer_profile: NDArray, gen_profile: NDArray,
                            recipient: int = 1, source: int = 1) -> complex:
    """Deformation-mode force coefficient between two surface profiles.

    ``outer_profile`` is the overlap matrix of the recipient deformation
    shape, ``gen_profile`` that of the source shape; each is transported to
    the input-mirror plane when it lives on mirror 2.
    """
    basis = build_basis_cached(cfg.n_max)
    o = outer_profile
    g = gen_profile
    if recipient == 2:
        o = transport_far_to_near(o, basis, geom.phi_gouy)
    if source == 2:
        g = transport_far_to_near(g, basis, geom.phi_gouy)
    m = response_matrix(cfg, geom, sp, o, g, "im")
    return complex(np.conj(v) @ m @ v)


def static_observables(cfg: CavityConfig, geom: CavityGeometry,
                       sp: SpectralPoint, v: NDArray,
                       recipient: int = 1) -> NDArray[np.complex128]:
    """Static (force, torque_y, torque_z) contractions sum_p J_p^2 v+ G+ O G v."""
    basis = build_basis_cached(cfg.n_max)
    outers = outer_set(basis)
    if recipient == 2:
        outers = [transport_far_to_near(o, basis, geom.phi_gouy) for o in outers]
    out = np.zeros(3, dtype=np.complex128)
    for p, jp in sp.weights.items():
        g0 = sp.g0[p]
        gv = g0 * v
        for i, o in enumerate(outers):
            out[i] += (jp * jp) * (np.conj(gv) @ o @ gv)
    return out


def rin_force_coefficients(cfg: CavityConfig, geom: CavityGeometry,
                           sp: SpectralPoint, v: NDArray,
                           recipient: int = 1) -> NDArray[np.complex128]:
    """(force, torque_y, torque_z) response to relative input power noise.

    Spectral-real pairing of sum_p J_p^2 v+ G_p(0)+ O G_p(w) v; reduces to
    the static observables at zero frequency.
    """
    basis = build_basis_cached(cfg.n_max)
    outers = outer_set(basis)
    if recipient == 2:
        outers = [transport_far_to_near(o, basis, geom.phi_gouy) for o in outers]
    plus = np.zeros(3, dtype=np.complex128)
    minus = np.zeros(3, dtype=np.complex128)
    for p, jp in sp.weights.items():
        left = np.conj(sp.g0[p] * v)
        for i, o in enumerate(outers):
            plus[i] += (jp * jp) * (left @ (o @ (sp.gw[p] * v)))
            minus[i] += (jp * jp) * (left @ (o @ (sp.gm[p] * v)))
    return 0.5 * (plus + np.conj(minus))


def shot_force_rows(cfg: CavityConfig, geom: CavityGeometry, sp: SpectralPoint,
                    v: NDArray, outer: NDArray, recipient: int = 1
                    ) -> dict[tuple[int, int], NDArray[np.complex128]]:
    """Vacuum-field projection rows of the back-action channel of ``outer``.

    The shot contribution to the generalized force is
    sum_(m,port) Re''{ u_(m,port) . da_(m,port) }; this returns the row
    vectors u keyed by (harmonic, port).  Port 1 is the input coupler, port 2
    the end-mirror transmission (weight t2/t1).
    """
    basis = build_basis_cached(cfg.n_max)
    o = outer
    if recipient == 2:
        o = transport_far_to_near(o, basis, geom.phi_gouy)
    rows: dict[tuple[int, int], NDArray[np.complex128]] = {}
    ratio = cfg.t2 / cfg.t1
    for p, jp in sp.weights.items():
        left = np.conj(sp.g0[p] * v) @ o          # v+ G_p(0)+ outer
        row = 2.0 * jp * (left * sp.gw[p])        # ... G_p(w), diagonal
        rows[(p, 1)] = rows.get((p, 1), 0) + row
        rows[(p, 2)] = rows.get((p, 2), 0) + ratio * row
    return rows


# --- Reduced scalar forms for small misalignment (single carrier, p = 0) ---

def _fundamental_entries(cfg: CavityConfig, geom: CavityGeometry,
                         sp: SpectralPoint):
    basis = build_basis_cached(cfg.n_max)
    i0 = basis.index(0, 0)
    iy = basis.index(1, 0)
    iz = basis.index(0, 1)
    pref = sp.r_p[0] * np.exp(-1j * cfg.detuning)
    phi0 = np.exp(-2j * geom.phi_gouy)
    phi1 = np.exp(-4j * geom.phi_gouy)
    return basis, (i0, iy, iz), pref, (phi0, phi1)


def _im_ddag_scalar(f_plus: complex, f_minus: complex) -> complex:
    return (f_plus - np.conj(f_minus)) / 2j


def detuning_force(cfg: CavityConfig, geom: CavityGeometry,
                   sp: SpectralPoint) -> complex:
    """Scalar detuning-force stiffness of the fundamental mode (p = 0)."""
    _, (i0, _, _), pref, (phi0, _) = _fundamental_entries(cfg, geom, sp)
    j0 = sp.weights[0]
    a0 = abs(sp.g0[0][i0]) ** 2
    f_p = pref * a0 * sp.gw[0][i0] * phi0
    f_m = pref * a0 * sp.gm[0][i0] * phi0
    return 2.0 * j0 * j0 * _im_ddag_scalar(f_p, f_m)


def tilt_torque(cfg: CavityConfig, geom: CavityGeometry,
                sp: SpectralPoint, axis: str) -> complex:
    """Scalar angular stiffness (torque_q response to x_q) of the fundamental."""
    _, (i0, iy, iz), pref, (_, phi1) = _fundamental_entries(cfg, geom, sp)
    iq = iy if axis == "y" else iz
    j0 = sp.weights[0]
    a0 = abs(sp.g0[0][i0]) ** 2
    f_p = pref * a0 * sp.gw[0][iq] * phi1
    f_m = pref * a0 * sp.gm[0][iq] * phi1
    return 2.0 * j0 * j0 * _im_ddag_scalar(f_p, f_m)


def first_order_coefficients(cfg: CavityConfig, geom: CavityGeometry,
                             sp: SpectralPoint, dv_y: complex, dv_z: complex
                             ) -> dict[str, complex]:
    """Leading small-misalignment couplings for v = e0 + dv_q e_q.

    Returns the first-order force response to transverse generators
    ('force_x_q') and the first-order torque_q response to detuning
    ('torque_q_psi'), per axis, plus the zeroth-order scalars.
    """
    _, (i0, iy, iz), pref, (phi0, phi1) = _fundamental_entries(cfg, geom, sp)
    j0 = sp.weights[0]
    g00 = sp.g0[0]
    out: dict[str, complex] = {
        "force_psi": detuning_force(cfg, geom, sp),
        "torque_y_x_y": tilt_torque(cfg, geom, sp, "y"),
        "torque_z_x_z": tilt_torque(cfg, geom, sp, "z"),
    }
    for axis, iq, dv in (("y", iy, dv_y), ("z", iz, dv_z)):
        # Force response to the X_q generator, first order in dv_q:
        # entries M[q0] (weight dv*) and M[0q] (weight dv) of the sandwich.
        m_q0_p = pref * np.conj(g00[iq]) * g00[i0] * sp.gw[0][iq] * phi1
        m_q0_m = pref * np.conj(g00[iq]) * g00[i0] * sp.gm[0][iq] * phi1
        m_0q_p = pref * np.conj(g00[i0]) * g00[iq] * sp.gw[0][i0] * phi0
        m_0q_m = pref * np.conj(g00[i0]) * g00[iq] * sp.gm[0][i0] * phi0
        # Im''-part of a matrix family: (M(w) - M(-w*)^dag)/2i, so the (q,0)
        # entry pairs with the conjugate of the (0,q) entry at -w* and
        # vice versa.
        f1 = np.conj(dv) * (m_q0_p - np.conj(m_0q_m)) / 2j \
            + dv * (m_0q_p - np.conj(m_q0_m)) / 2j
        out[f"force_x_{axis}"] = 2.0 * j0 * j0 * f1
        # Torque_q response to the detuning generator, first order in dv_q:
        t_q0_p = pref * np.conj(g00[iq]) * g00[i0] * sp.gw[0][i0] * phi0
        t_q0_m = pref * np.conj(g00[iq]) * g00[i0] * sp.gm[0][i0] * phi0
        t_0q_p = pref * np.conj(g00[i0]) * g00[iq] * sp.gw[0][iq] * phi1
        t_0q_m = pref * np.conj(g00[i0]) * g00[iq] * sp.gm[0][iq] * phi1
        t1 = np.conj(dv) * (t_q0_p - np.conj(t_0q_m)) / 2j \
            + dv * (t_0q_p - np.conj(t_q0_m)) / 2j
        out[f"torque_{axis}_psi"] = 2.0 * j0 * j0 * t1
    return out
