"""Suspended-mirror mechanics and the closed-loop Langevin system.

Each mirror hangs from a set of damped harmonic suspension modes; a modal
coordinate A_j maps to the physical mirror degrees of freedom through its
coupling table.  Radiation pressure, thermal baths, input power noise and
demodulated-signal feedback close the loop.  The system is assembled and
solved per sideband frequency as a complex linear system over

    [A_1 .. A_n, zeta_1 .. zeta_m, s_dp, s_qy, s_qz]

with zeta the mirror surface deformation modes and s the demodulated
signals (kept as unknowns so that servo loops close algebraically).

Normalized optical coordinates:
  psi_J  = 2 k x_J                       (round-trip phase per axial motion)
  a_Jq   = sgn_J k w_J (theta_Jq - eps_Jq / |R_J|)   (transverse generator)
with sgn_1 = +1, sgn_2 = -1 accounting for the opposing mirror normals.
Inter-mirror propagation delays: same mirror e^{i w tau}, opposite mirror
e^{i w tau / 2}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.constants import hbar as HBAR

from . import forces, noise, signals
from .cavity import (CavityConfig, CavityGeometry, SpectralPoint,
                     build_basis_cached, spectral_point)
from .modes import overlap_matrix

DOF_KEYS = ("axial", "tilt_y", "tilt_z", "lateral_y", "lateral_z")


@dataclass(frozen=True)
class Oscillator:
    """One suspension normal mode of a mirror.

    ``mass`` is the modal mass in the units of the primary coordinate
    (kg for translations, kg m^2 for tilts); ``couplings`` maps modal
    amplitude to physical mirror DOFs (keys from DOF_KEYS).
    """

    label: str
    mirror: int
    f0: float
    mass: float
    q_factor: float = 1e6
    couplings: dict[str, float] = field(default_factory=lambda: {"axial": 1.0})

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * self.f0

    @property
    def gamma(self) -> float:
        return self.omega0 / self.q_factor

    def validate(self) -> None:
        if self.mirror not in (1, 2):
            raise ValueError(f"oscillator {self.label}: mirror must be 1 or 2")
        if self.f0 <= 0 or self.mass <= 0 or self.q_factor <= 0:
            raise ValueError(f"oscillator {self.label}: f0, mass, Q must be positive")
        for key in self.couplings:
            if key not in DOF_KEYS:
                raise ValueError(
                    f"oscillator {self.label}: unknown coupling {key!r}")


@dataclass(frozen=True)
class DeformationMode:
    """One internal surface deformation mode of a mirror.

    ``profile`` is a callable S(y, z) giving the dimensionless mode shape
    (peak-normalized); the modal coordinate zeta is its amplitude in meters
    and ``mass`` the effective modal mass.
    """

    label: str
    mirror: int
    f0: float
    mass: float
    q_factor: float = 1e5
    profile: object = None

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * self.f0

    @property
    def gamma(self) -> float:
        return self.omega0 / self.q_factor

    def shape(self):
        if self.profile is not None:
            return self.profile
        return lambda y, z: np.ones_like(y)  # piston


@dataclass
class MechanicalSystem:
    """Suspension catalog, deformation modes, servo filters and input noise."""

    oscillators: list[Oscillator] = field(default_factory=list)
    deformations: list[DeformationMode] = field(default_factory=list)
    servo_dp: object = None     # callable H(omega) -> complex, feeds psi_1
    servo_qd_y: object = None   # feeds a_1y
    servo_qd_z: object = None   # feeds a_1z
    rin_psd: object = None      # callable S_mu(omega), double-sided

    def validate(self) -> None:
        for osc in self.oscillators:
            osc.validate()
        labels = [o.label for o in self.oscillators] + \
                 [d.label for d in self.deformations]
        if len(labels) != len(set(labels)):
            raise ValueError("duplicate mechanical mode labels")


def _mirror_spot(geom: CavityGeometry, mirror: int) -> float:
    return geom.w1 if mirror == 1 else geom.w2


def deformation_profile_matrix(cfg: CavityConfig, geom: CavityGeometry,
                               mode: DeformationMode) -> NDArray:
    """Overlap matrix of a deformation shape at its mirror's spot size."""
    basis = build_basis_cached(cfg.n_max)
    return overlap_matrix(basis, mode.shape(), _mirror_spot(geom, mode.mirror))


class LangevinModel:
    """The closed-loop linear system at one sideband frequency."""

    def __init__(self, cfg: CavityConfig, geom: CavityGeometry,
                 sp: SpectralPoint, v: NDArray, system: MechanicalSystem,
                 thermal_model: str = "brownian", temperature: float = 295.0,
                 freeze_suspensions: bool = False, open_loop: bool = False,
                 light_on: bool = True):
        self.cfg, self.geom, self.sp, self.v = cfg, geom, sp, v
        self.system = system
        self.thermal_model = thermal_model
        self.temperature = temperature
        self.freeze = freeze_suspensions
        self.open_loop = open_loop
        self.light_on = light_on
        self._build()

    # -- bookkeeping -------------------------------------------------------

    @property
    def n_osc(self) -> int:
        return len(self.system.oscillators)

    @property
    def n_def(self) -> int:
        return len(self.system.deformations)

    @property
    def size(self) -> int:
        return self.n_osc + self.n_def + 3

    def _sig_index(self, kind: str) -> int:
        return self.n_osc + self.n_def + ("dp", "qd_y", "qd_z").index(kind)

    # -- linear-expression helpers ------------------------------------------

    def _dof_rows(self) -> dict[tuple[int, int], NDArray]:
        """Rows of the normalized coordinates (psi_s, a_sy, a_sz) over x."""
        cfg, geom = self.cfg, self.geom
        omega = self.sp.omega
        rows: dict[tuple[int, int], NDArray] = {}
        radius = {1: abs(cfg.curvature_1), 2: abs(cfg.curvature_2)}
        sgn = {1: 1.0, 2: -1.0}
        for s in (1, 2):
            w_s = _mirror_spot(geom, s)
            psi = np.zeros(self.size, dtype=np.complex128)
            ay = np.zeros(self.size, dtype=np.complex128)
            az = np.zeros(self.size, dtype=np.complex128)
            if not self.freeze:
                for j, osc in enumerate(self.system.oscillators):
                    if osc.mirror != s:
                        continue
                    k = geom.k
                    psi[j] += 2.0 * k * osc.couplings.get("axial", 0.0)
                    ay[j] += sgn[s] * k * w_s * (
                        osc.couplings.get("tilt_y", 0.0)
                        - osc.couplings.get("lateral_y", 0.0) / radius[s])
                    az[j] += sgn[s] * k * w_s * (
                        osc.couplings.get("tilt_z", 0.0)
                        - osc.couplings.get("lateral_z", 0.0) / radius[s])
            if s == 1 and not self.open_loop:
                if self.system.servo_dp is not None:
                    psi[self._sig_index("dp")] += complex(self.system.servo_dp(omega))
                if self.system.servo_qd_y is not None:
                    ay[self._sig_index("qd_y")] += complex(self.system.servo_qd_y(omega))
                if self.system.servo_qd_z is not None:
                    az[self._sig_index("qd_z")] += complex(self.system.servo_qd_z(omega))
            rows[(s, 0)] = psi
            rows[(s, 1)] = ay
            rows[(s, 2)] = az
        return rows

    def _delay(self, recipient: int, source: int) -> complex:
        tau = self.geom.tau
        omega = self.sp.omega
        return np.exp(1j * omega * tau) if recipient == source \
            else np.exp(1j * omega * tau / 2.0)

    # -- assembly ------------------------------------------------------------

    def _build(self) -> None:
        cfg, geom, sp, v = self.cfg, self.geom, self.sp, self.v
        sys_ = self.system
        n = self.size
        A = np.zeros((n, n), dtype=np.complex128)
        # Source bookkeeping.
        th_cols = np.zeros((n, self.n_osc + self.n_def), dtype=np.complex128)
        th_psd = np.zeros(self.n_osc + self.n_def)
        rin_col = np.zeros(n, dtype=np.complex128)
        shot_cols: list[dict[tuple[int, int], NDArray]] = [dict() for _ in range(n)]

        dof_rows = self._dof_rows()
        e2 = geom.e_cav ** 2
        e1 = geom.e_cav
        light = 1.0 if self.light_on else 0.0

        # Deformation profile matrices and their per-recipient couplings.
        def_mats = [deformation_profile_matrix(cfg, geom, d)
                    for d in sys_.deformations]

        # Generalized optical forces Q_(r,o) as (row over x, shot rows, rin).
        refl = {1: cfg.r1 ** 2, 2: cfg.r2 ** 2}
        q_row: dict[tuple[int, int], NDArray] = {}
        q_shot: dict[tuple[int, int], dict] = {}
        q_rin: dict[tuple[int, int], complex] = {}
        for r in (1, 2):
            coef = {s: forces.stiffness_coefficients(cfg, geom, sp, v,
                                                     recipient=r, source=s).coef
                    for s in (1, 2)}
            rin_c = forces.rin_force_coefficients(cfg, geom, sp, v, recipient=r)
            basis = build_basis_cached(cfg.n_max)
            outers_raw = forces.outer_set(basis)
            for o_idx in range(3):
                row = np.zeros(n, dtype=np.complex128)
                for s in (1, 2):
                    d_rs = self._delay(r, s)
                    for i in range(3):   # mirror DOFs drive generators 0..2
                        row += d_rs * coef[s][o_idx, i] * dof_rows[(s, i)]
                for m_idx, dmode in enumerate(sys_.deformations):
                    cval = forces.deformation_coefficient(
                        cfg, geom, sp, v, outer_profile=outers_raw[o_idx],
                        gen_profile=def_mats[m_idx],
                        recipient=r, source=dmode.mirror)
                    row[self.n_osc + m_idx] += \
                        self._delay(r, dmode.mirror) * cval * 2.0 * geom.k
                q_row[(r, o_idx)] = row
                q_shot[(r, o_idx)] = forces.shot_force_rows(
                    cfg, geom, sp, v, outers_raw[o_idx], recipient=r)
                q_rin[(r, o_idx)] = rin_c[o_idx]

        # Oscillator equations: m (w0^2 - w^2 - i w gamma) A = K . F + F_th.
        omega = sp.omega
        for j, osc in enumerate(sys_.oscillators):
            dnm = osc.omega0 ** 2 - omega ** 2 - 1j * omega * osc.gamma
            A[j, j] += osc.mass * dnm
            if self.freeze:
                continue
            w_r = _mirror_spot(geom, osc.mirror)
            radius = abs(cfg.curvature_1 if osc.mirror == 1 else cfg.curvature_2)
            sgn = 1.0 if osc.mirror == 1 else -1.0
            chains = {
                "axial": (0, 2.0 * geom.k),
                "tilt_y": (1, sgn * geom.k * w_r),
                "tilt_z": (2, sgn * geom.k * w_r),
                "lateral_y": (1, -sgn * geom.k * w_r / radius),
                "lateral_z": (2, -sgn * geom.k * w_r / radius),
            }
            scale = HBAR * refl[osc.mirror]
            for dof, kc in osc.couplings.items():
                o_idx, chain = chains[dof]
                pref = kc * chain * scale * light
                A[j, :] -= pref * e2 * q_row[(osc.mirror, o_idx)]
                for key, u in q_shot[(osc.mirror, o_idx)].items():
                    cur = shot_cols[j].get(key)
                    add = pref * e1 * u
                    shot_cols[j][key] = add if cur is None else cur + add
                rin_col[j] += pref * e2 * q_rin[(osc.mirror, o_idx)]
            th_cols[j, j] = 1.0
            th_psd[j] = noise.thermal_force_psd(
                self.thermal_model, float(np.real(omega)) or 1e-6, osc.omega0,
                osc.gamma, osc.mass, self.temperature)

        # Deformation-mode equations.
        for m_idx, dmode in enumerate(sys_.deformations):
            row_i = self.n_osc + m_idx
            dnm = dmode.omega0 ** 2 - omega ** 2 - 1j * omega * dmode.gamma
            A[row_i, row_i] += dmode.mass * dnm
            scale = HBAR * refl[dmode.mirror] * 2.0 * geom.k * light
            # Q conjugate to the deformation coordinate: outer = profile.
            prof = def_mats[m_idx]
            row = np.zeros(n, dtype=np.complex128)
            for s in (1, 2):
                d_rs = self._delay(dmode.mirror, s)
                cvec = self._def_recipient_coefs(prof, dmode.mirror, s)
                for i in range(3):
                    row += d_rs * cvec[i] * dof_rows[(s, i)]
            for m2, d2 in enumerate(sys_.deformations):
                d_rd = self._delay(dmode.mirror, d2.mirror)
                cval = forces.deformation_coefficient(
                    cfg, geom, sp, v, outer_profile=prof,
                    gen_profile=def_mats[m2],
                    recipient=dmode.mirror, source=d2.mirror)
                row[self.n_osc + m2] += d_rd * cval * 2.0 * geom.k
            A[row_i, :] -= scale * e2 * row
            srows = forces.shot_force_rows(cfg, geom, sp, v, prof,
                                           recipient=dmode.mirror)
            for key, u in srows.items():
                shot_cols[row_i][key] = scale * e1 * u
            rin_here = self._def_rin_coef(prof, dmode.mirror)
            rin_col[row_i] += scale * e2 * rin_here
            th_cols[row_i, self.n_osc + m_idx] = 1.0
            th_psd[self.n_osc + m_idx] = noise.thermal_force_psd(
                self.thermal_model, float(np.real(omega)) or 1e-6,
                dmode.omega0, dmode.gamma, dmode.mass, self.temperature)

        # Demodulated signal definitions.
        for kind in ("dp", "qd_y", "qd_z"):
            idx = self._sig_index(kind)
            A[idx, idx] += 1.0
            row = np.zeros(n, dtype=np.complex128)
            for s in (1, 2):
                svec = signals.signal_coefficients(cfg, geom, sp, v,
                                                   kind=kind, source=s)
                d_1s = self._delay(1, s)
                for i in range(3):
                    row += d_1s * svec[i] * dof_rows[(s, i)]
            for m_idx, dmode in enumerate(sys_.deformations):
                svec = signals.signal_coefficients(
                    cfg, geom, sp, v, kind=kind, source=dmode.mirror,
                    profiles=[def_mats[m_idx]])
                row[self.n_osc + m_idx] += \
                    self._delay(1, dmode.mirror) * svec[0] * 2.0 * geom.k
            A[idx, :] -= light * row
            srows = signals.shot_rows(cfg, geom, sp, v, kind=kind)
            for key, u in srows.items():
                shot_cols[idx][key] = math.sqrt(light) * u
            rin_col[idx] += light * signals.rin_coefficient(cfg, geom, sp, v,
                                                            kind=kind)

        self.matrix = A
        self.thermal_columns = th_cols
        self.thermal_psd = th_psd
        self.rin_column = rin_col
        self.shot_columns = shot_cols

    def _def_recipient_coefs(self, prof: NDArray, recipient: int,
                             source: int) -> NDArray:
        """Force on a deformation profile from the 3 mirror generators."""
        basis = build_basis_cached(self.cfg.n_max)
        gens = forces.generator_set(basis)[:3]
        if source == 2:
            gens = [forces.transport_far_to_near(g, basis, self.geom.phi_gouy)
                    for g in gens]
        o = prof
        if recipient == 2:
            o = forces.transport_far_to_near(o, basis, self.geom.phi_gouy)
        m = [forces.response_matrix(self.cfg, self.geom, self.sp, o, g, "im")
             for g in gens]
        return np.array([np.conj(self.v) @ mm @ self.v for mm in m])

    def _def_rin_coef(self, prof: NDArray, recipient: int) -> complex:
        basis = build_basis_cached(self.cfg.n_max)
        o = prof
        if recipient == 2:
            o = forces.transport_far_to_near(o, basis, self.geom.phi_gouy)
        sp = self.sp
        plus = 0j
        minus = 0j
        for p, jp in sp.weights.items():
            left = np.conj(sp.g0[p] * self.v)
            plus += (jp * jp) * (left @ (o @ (sp.gw[p] * self.v)))
            minus += (jp * jp) * (left @ (o @ (sp.gm[p] * self.v)))
        return 0.5 * (plus + np.conj(minus))

    # -- outputs -------------------------------------------------------------

    def output_row(self, name: str) -> NDArray[np.complex128]:
        """Linear functional of the unknown vector for a named output."""
        n = self.size
        row = np.zeros(n, dtype=np.complex128)
        if name in ("s_dp", "s_qd_y", "s_qd_z"):
            kind = {"s_dp": "dp", "s_qd_y": "qd_y", "s_qd_z": "qd_z"}[name]
            row[self._sig_index(kind)] = 1.0
            return row
        dof_rows = self._dof_rows()
        named = {"psi_1": (1, 0), "psi_2": (2, 0),
                 "a_1y": (1, 1), "a_2y": (2, 1),
                 "a_1z": (1, 2), "a_2z": (2, 2)}
        if name in named:
            return dof_rows[named[name]]
        if name in ("x_1", "x_2"):
            mirror = int(name[-1])
            for j, osc in enumerate(self.system.oscillators):
                if osc.mirror == mirror:
                    row[j] = osc.couplings.get("axial", 0.0)
            return row
        for prefix, dof in (("theta_y_", "tilt_y"), ("theta_z_", "tilt_z"),
                            ("y_", "lateral_y"), ("z_", "lateral_z")):
            if name.startswith(prefix):
                mirror = int(name[len(prefix):])
                for j, osc in enumerate(self.system.oscillators):
                    if osc.mirror == mirror:
                        row[j] = osc.couplings.get(dof, 0.0)
                return row
        for m_idx, dmode in enumerate(self.system.deformations):
            if name == f"zeta_{dmode.label}":
                row[self.n_osc + m_idx] = 1.0
                return row
        raise KeyError(f"unknown output {name!r}")

    def solve_psd(self, names: list[str]) -> dict[str, float]:
        """Single-sided output PSDs at this frequency (units^2 / Hz)."""
        inv = np.linalg.inv(self.matrix)
        rows = {name: self.output_row(name) @ inv for name in names}
        out = {}
        omega = self.sp.omega
        s_rin = 0.0
        if self.system.rin_psd is not None:
            s_rin = float(self.system.rin_psd(float(np.real(omega))))
        for name, trow in rows.items():
            total = 0.0
            # Thermal channels (independent white-force sources per mode).
            resp = trow @ self.thermal_columns
            total += float(np.sum(np.abs(resp) ** 2 * self.thermal_psd))
            # Shot channels via the vacuum pairing rule.
            merged: dict[tuple[int, int], NDArray] = {}
            for r_idx, cols in enumerate(self.shot_columns):
                if not cols or trow[r_idx] == 0:
                    continue
                for key, u in cols.items():
                    add = trow[r_idx] * u
                    merged[key] = add if key not in merged else merged[key] + add
            total += float(np.real(noise.shot_pairing(merged)))
            # Input power noise.
            total += float(np.abs(trow @ self.rin_column) ** 2) * s_rin
            out[name] = 2.0 * total    # single-sided
        return out


def build_model(cfg: CavityConfig, geom: CavityGeometry, v: NDArray,
                system: MechanicalSystem, omega: complex,
                **kwargs) -> LangevinModel:
    sp = spectral_point(cfg, geom, omega)
    return LangevinModel(cfg, geom, sp, v, system, **kwargs)


def mechanical_determinant(cfg: CavityConfig, geom: CavityGeometry,
                           v: NDArray, system: MechanicalSystem,
                           omega: complex, light_on: bool = True) -> complex:
    """det of the open-loop mechanical block at complex frequency omega."""
    model = build_model(cfg, geom, v, system, omega,
                        open_loop=True, light_on=light_on)
    nm = model.n_osc + model.n_def
    return complex(np.linalg.det(model.matrix[:nm, :nm]))


def count_roots(f, re_range: tuple[float, float], im_range: tuple[float, float],
                n_samples: int = 400) -> int:
    """Winding number of f around a rectangle (argument principle)."""
    r0, r1 = re_range
    i0, i1 = im_range
    bottom = [complex(x, i0) for x in np.linspace(r0, r1, n_samples)]
    right = [complex(r1, y) for y in np.linspace(i0, i1, n_samples)]
    top = [complex(x, i1) for x in np.linspace(r1, r0, n_samples)]
    left = [complex(r0, y) for y in np.linspace(i1, i0, n_samples)]
    path = bottom + right + top + left
    vals = np.array([f(z) for z in path])
    if np.any(vals == 0):
        raise ValueError("root on the contour")
    phases = np.angle(vals)
    dphi = np.diff(np.concatenate([phases, phases[:1]]))
    dphi = (dphi + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(float(np.sum(dphi)) / (2.0 * np.pi)))


def _newton_root(f, z0: complex, tol: float = 1e-10, max_iter: int = 60
                 ) -> complex:
    z = z0
    for _ in range(max_iter):
        h = 1e-6 * max(abs(z), 1.0)
        df = (f(z + h) - f(z - h)) / (2.0 * h)
        if df == 0:
            break
        step = f(z) / df
        z = z - step
        if abs(step) <= tol * max(abs(z), 1.0):
            break
    return z


@dataclass(frozen=True)
class FreeOscillation:
    label: str
    root: complex           # complex angular frequency [rad/s]
    stable: bool            # decaying under the e^{-i w t} convention


def free_oscillations(cfg: CavityConfig, geom: CavityGeometry, v: NDArray,
                      system: MechanicalSystem, light_on: bool = True
                      ) -> list[FreeOscillation]:
    """Complex eigenfrequencies of the open-loop opto-mechanical system.

    Newton-refined from the uncoupled damped-oscillator poles; a root with
    negative imaginary part decays in time (stable).
    """
    def det(z: complex) -> complex:
        return mechanical_determinant(cfg, geom, v, system, z,
                                      light_on=light_on)

    out = []
    modes = list(system.oscillators) + list(system.deformations)
    for mode in modes:
        w0, g = mode.omega0, mode.gamma
        guess = math.sqrt(max(w0 * w0 - 0.25 * g * g, 0.0)) - 0.5j * g
        root = _newton_root(det, guess)
        out.append(FreeOscillation(label=mode.label, root=root,
                                   stable=root.imag < 0.0))
    return out
