"""Transverse Hermite-Gauss mode basis and modal operators.

All cavity fields are expanded on a truncated basis of Hermite-Gauss modes
(ly, lz) ordered by total transverse order n = ly + lz and, within an order,
by increasing ly.  Operators (ladder, quadrature, Gouy rotation, displacement,
mirror-surface overlaps) are dense complex matrices on that basis.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermvander
from numpy.polynomial.hermite import hermgauss
from numpy.typing import NDArray
from scipy.linalg import expm


class QuadratureConvergenceWarning(UserWarning):
    """Raised when an adaptive overlap quadrature stops before reaching tol."""


@dataclass(frozen=True)
class ModeBasis:
    """Truncated Hermite-Gauss basis up to total order ``n_max``."""

    n_max: int
    modes: tuple[tuple[int, int], ...]

    @property
    def dim(self) -> int:
        return len(self.modes)

    def index(self, ly: int, lz: int) -> int:
        return self._lookup[(ly, lz)]

    def __contains__(self, mode: tuple[int, int]) -> bool:
        return mode in self._lookup

    @property
    def _lookup(self) -> dict[tuple[int, int], int]:
        # Cached on first use; frozen dataclass, so stash via object.__setattr__.
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {m: i for i, m in enumerate(self.modes)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def labels(self) -> list[str]:
        return [f"{ly}{lz}" if self.n_max < 10 else f"{ly}.{lz}"
                for ly, lz in self.modes]


def build_basis(n_max: int) -> ModeBasis:
    """Basis of all (ly, lz) with ly + lz <= n_max, graded-lex ordered."""
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    modes = []
    for order in range(n_max + 1):
        for ly in range(order + 1):
            modes.append((ly, order - ly))
    return ModeBasis(n_max=n_max, modes=tuple(modes))


def ladder_matrix(basis: ModeBasis, axis: str) -> NDArray[np.complex128]:
    """Annihilation operator along 'y' or 'z': B e_l = sqrt(l_axis) e_(l-1)."""
    if axis not in ("y", "z"):
        raise ValueError(f"axis must be 'y' or 'z', got {axis!r}")
    dim = basis.dim
    B = np.zeros((dim, dim), dtype=np.complex128)
    for col, (ly, lz) in enumerate(basis.modes):
        if axis == "y" and ly > 0:
            B[basis.index(ly - 1, lz), col] = math.sqrt(ly)
        elif axis == "z" and lz > 0:
            B[basis.index(ly, lz - 1), col] = math.sqrt(lz)
    return B


def quadrature_matrices(
    basis: ModeBasis, axis: str
) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Hermitian quadrature pair (X, Y) = (B + B^dag, i(B - B^dag))."""
    B = ladder_matrix(basis, axis)
    Bd = B.conj().T
    return B + Bd, 1j * (B - Bd)


def gouy_matrix(basis: ModeBasis, phi_gouy: float) -> NDArray[np.complex128]:
    """Diagonal round-trip Gouy rotation exp(-2i (ly+lz+1) phi_gouy)."""
    orders = np.array([ly + lz for ly, lz in basis.modes])
    return np.diag(np.exp(-2j * (orders + 1) * phi_gouy))


def gouy_phases(basis: ModeBasis, phi_gouy: float) -> NDArray[np.complex128]:
    """Diagonal of :func:`gouy_matrix` as a vector."""
    orders = np.array([ly + lz for ly, lz in basis.modes])
    return np.exp(-2j * (orders + 1) * phi_gouy)


def displacement_matrix(
    basis: ModeBasis, alpha_y: complex, alpha_z: complex
) -> NDArray[np.complex128]:
    """exp(alpha B^dag - alpha* B), applied jointly on both axes."""
    G = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for axis, alpha in (("y", alpha_y), ("z", alpha_z)):
        if alpha == 0:
            continue
        B = ladder_matrix(basis, axis)
        G += alpha * B.conj().T - np.conj(alpha) * B
    return expm(G)


def squeeze_matrix(
    basis: ModeBasis, zeta_y: complex, zeta_z: complex
) -> NDArray[np.complex128]:
    """exp(zeta/2 B^dag^2 - zeta*/2 B^2), applied jointly on both axes."""
    G = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for axis, zeta in (("y", zeta_y), ("z", zeta_z)):
        if zeta == 0:
            continue
        B = ladder_matrix(basis, axis)
        Bd = B.conj().T
        G += 0.5 * zeta * (Bd @ Bd) - 0.5 * np.conj(zeta) * (B @ B)
    return expm(G)


@dataclass(frozen=True)
class InputBeam:
    """Input beam state relative to the cavity fundamental mode at mirror 1.

    Complex curvature convention: 1/Q = 1/R + 2i / (k w**2), where R is the
    wavefront radius of curvature and w the intensity spot radius.

    theta_y, theta_z : tilt angles of the input beam axis [rad]
    eps_y, eps_z     : transverse offsets of the beam axis at mirror 1 [m]
    q_y, q_z         : complex curvature of the input beam per axis at mirror 1
    q_cav            : complex curvature of the cavity mode at mirror 1
    w1               : cavity-mode spot radius at mirror 1 [m]
    k                : laser wavenumber [1/m]
    """

    theta_y: float = 0.0
    theta_z: float = 0.0
    eps_y: float = 0.0
    eps_z: float = 0.0
    q_y: complex = 0j
    q_z: complex = 0j
    q_cav: complex = 0j
    w1: float = 1.0
    k: float = 1.0

    @classmethod
    def matched(cls, q_cav: complex, w1: float, k: float,
                theta_y: float = 0.0, theta_z: float = 0.0,
                eps_y: float = 0.0, eps_z: float = 0.0) -> "InputBeam":
        return cls(theta_y=theta_y, theta_z=theta_z, eps_y=eps_y, eps_z=eps_z,
                   q_y=q_cav, q_z=q_cav, q_cav=q_cav, w1=w1, k=k)


def mismatch_parameters(beam: InputBeam) -> tuple[complex, complex, complex, complex]:
    """(dv_y, dv_z, zeta_y, zeta_z) for the displaced/squeezed input state.

    dv_q is the coherent displacement produced by tilt/offset, zeta_q the
    squeeze-like parameter produced by waist size/position mismatch.  Both
    vanish for a perfectly aligned mode-matched beam.
    """
    q1 = beam.q_cav
    inv_r1 = np.real(1.0 / q1)
    out = []
    for theta, eps, qq in ((beam.theta_y, beam.eps_y, beam.q_y),
                           (beam.theta_z, beam.eps_z, beam.q_z)):
        tilt = theta - eps * inv_r1
        denom = np.conj(q1) - qq
        if abs(denom) < 1e-14 * abs(q1):
            # Conjugate-matched beam: the first-order expansion is singular.
            raise ValueError(
                "input beam curvature coincides with the conjugate of the "
                "cavity mode curvature; misalignment expansion is degenerate")
        dv = -(math.sqrt(2.0) / beam.w1) * (np.conj(q1) * qq / denom) * tilt
        denom_z = qq - np.conj(q1)
        zeta = (qq - q1) / denom_z
        out.extend([dv, zeta])
    dv_y, zeta_y, dv_z, zeta_z = out
    return dv_y, dv_z, zeta_y, zeta_z


def input_vector(basis: ModeBasis, beam: InputBeam) -> NDArray[np.complex128]:
    """Unit-norm modal amplitude vector of the input beam.

    Built by applying a squeeze-like mismatch operator followed by a coherent
    displacement to the fundamental mode, then renormalizing.  Exact (within
    basis truncation) in the displacement; the mismatch operator reproduces
    the leading-order couplings to even modes.
    """
    dv_y, dv_z, zeta_y, zeta_z = mismatch_parameters(beam)
    v = np.zeros(basis.dim, dtype=np.complex128)
    v[basis.index(0, 0)] = 1.0
    if zeta_y != 0 or zeta_z != 0:
        v = squeeze_matrix(basis, zeta_y, zeta_z) @ v
    if dv_y != 0 or dv_z != 0:
        v = displacement_matrix(basis, dv_y, dv_z) @ v
    return v / np.linalg.norm(v)


def _hermite_factors(n_max: int, degree: int) -> tuple[NDArray, NDArray]:
    """Nodes t_i and normalized weighted Hermite table a[n, i].

    a[n, i] = phi_n(t_i) sqrt(W_i) with phi_n orthonormal under the
    Gauss-Hermite rule: sum_i a[n, i] a[m, i] -> delta_nm.
    """
    t, w = hermgauss(degree)
    H = hermvander(t, n_max).T  # H[n, i] = H_n(t_i)
    norms = np.array([1.0 / math.sqrt((2.0 ** n) * math.factorial(n) * math.sqrt(math.pi))
                      for n in range(n_max + 1)])
    return t, norms[:, None] * H * np.sqrt(w)[None, :]


def _overlap_at_degree(basis: ModeBasis, surface, w: float, degree: int
                       ) -> NDArray[np.complex128]:
    t, a = _hermite_factors(basis.n_max, degree)
    # Physical coordinates: y = w t / sqrt(2); the Jacobian and Gaussian
    # weights are absorbed into the orthonormal table `a`.
    coords = w * t / math.sqrt(2.0)
    Y, Z = np.meshgrid(coords, coords, indexing="ij")
    S = np.asarray(surface(Y, Z), dtype=np.complex128)
    if S.shape != Y.shape:
        S = np.broadcast_to(S, Y.shape).astype(np.complex128)
    M4 = np.einsum("ni,mi,pj,qj,ij->npmq", a, a, a, a, S, optimize=True)
    dim = basis.dim
    out = np.empty((dim, dim), dtype=np.complex128)
    for r, (ly, lz) in enumerate(basis.modes):
        for c, (my, mz) in enumerate(basis.modes):
            out[r, c] = M4[ly, lz, my, mz]
    return out


def overlap_matrix(basis: ModeBasis, surface, w: float, prefactor: float = 1.0,
                   tol: float = 1e-10, start_degree: int = 32,
                   max_degree: int = 512) -> NDArray[np.complex128]:
    """Modal overlap matrix of a smooth scalar surface profile.

    Entries are prefactor * integral of u_l(y,z) S(y,z) u_l'(y,z) over the
    transverse plane, with u_l the orthonormal Hermite-Gauss profiles of spot
    radius ``w``.  Evaluated by tensor Gauss-Hermite quadrature whose degree
    is doubled until successive results agree to ``tol`` (max-abs).
    """
    degree = start_degree
    prev = _overlap_at_degree(basis, surface, w, degree)
    while degree * 2 <= max_degree:
        degree *= 2
        cur = _overlap_at_degree(basis, surface, w, degree)
        err = float(np.max(np.abs(cur - prev)))
        scale = max(1.0, float(np.max(np.abs(cur))))
        if err <= tol * scale:
            return prefactor * cur
        prev = cur
    warnings.warn(
        f"overlap quadrature did not converge below {tol:.1e} at degree "
        f"{max_degree} (estimated error {err:.2e})",
        QuadratureConvergenceWarning)
    return prefactor * prev


def quadrant_split_matrix(basis: ModeBasis, axis: str) -> NDArray[np.complex128]:
    """Overlap matrix of the sign function sgn(axis coordinate).

    Dimensionless split-photodiode response: entries are the 1-D integrals of
    sgn(y) times two orthonormal Hermite-Gauss profiles (Kronecker delta on
    the other axis).  Spot-size independent.  Computed semi-analytically with
    Gauss-Legendre quadrature on the half line.
    """
    if axis not in ("y", "z"):
        raise ValueError(f"axis must be 'y' or 'z', got {axis!r}")
    n_max = basis.n_max
    # 1-D quadrature on t in [0, T], weight e^{-t^2} carried explicitly.
    T = math.sqrt(2.0 * (n_max + 60.0))
    t, wq = np.polynomial.legendre.leggauss(400)
    t = 0.5 * T * (t + 1.0)
    wq = 0.5 * T * wq
    H = hermvander(t, n_max).T
    norms = np.array([1.0 / math.sqrt((2.0 ** n) * math.factorial(n) * math.sqrt(math.pi))
                      for n in range(n_max + 1)])
    phi = norms[:, None] * H  # orthonormal polynomials, weight separate
    gauss = np.exp(-t * t) * wq
    # s1d[n, m] = 2 * int_0^inf phi_n phi_m e^{-t^2} dt   (n + m odd)
    s1d = 2.0 * np.einsum("ni,mi,i->nm", phi, phi, gauss)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            if (n + m) % 2 == 0:
                s1d[n, m] = 0.0
    dim = basis.dim
    out = np.zeros((dim, dim), dtype=np.complex128)
    for r, (ly, lz) in enumerate(basis.modes):
        for c, (my, mz) in enumerate(basis.modes):
            if axis == "y" and lz == mz:
                out[r, c] = s1d[ly, my]
            elif axis == "z" and ly == my:
                out[r, c] = s1d[lz, mz]
    return out


def embed(basis_small: ModeBasis, basis_large: ModeBasis,
          v: NDArray) -> NDArray:
    """Zero-pad a modal vector from a smaller basis into a larger one."""
    out = np.zeros(basis_large.dim, dtype=np.complex128)
    for i, mode in enumerate(basis_small.modes):
        out[basis_large.index(*mode)] = v[i]
    return out
