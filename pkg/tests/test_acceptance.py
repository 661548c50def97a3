"""Acceptance gate: one test per shipped acceptance criterion.

Each test prints a single machine-readable pass/fail line of the form

    criterion NN PASS <description> (<runtime> s)

and enforces both the numerical tolerance and the runtime cap stated in its
docstring.
"""
from __future__ import annotations

import dataclasses
import math
import time

import numpy as np
import pytest
from scipy.constants import hbar as HBAR
from scipy.constants import k as K_B

from conftest import aligned_vector, random_config, stiffness_fd
from fpcavity import forces, noise, presets, signals
from fpcavity.bipartite import (_setup, _variances, bipartite_spectrum,
                                homodyne_variance)
from fpcavity.cavity import (build_basis_cached, derive_geometry,
                             green_diagonal, loop_phase, resonant_detuning,
                             spectral_point)
from fpcavity.mechanics import (MechanicalSystem, Oscillator, build_model,
                                free_oscillations)
from fpcavity.modes import build_basis

RNG = np.random.default_rng(123)


class _Timed:
    def __init__(self, number: int, description: str, cap: float):
        self.number, self.description, self.cap = number, description, cap

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        dt = time.perf_counter() - self.t0
        status = "PASS" if exc_type is None and dt < self.cap else "FAIL"
        print(f"criterion {self.number:2d} {status} {self.description} "
              f"({dt:.3f} s, cap {self.cap:g} s)")
        if exc_type is None:
            assert dt < self.cap, \
                f"criterion {self.number}: runtime {dt:.2f} s exceeds cap"
        return False


def test_criterion_01_field_amplitude():
    """1 W at 1 um gives a field amplitude within 15% of 2.5e9 Hz^1/2."""
    cfg = presets.near_concentric_config(wavelength=1.0e-6, power_in=1.0)
    derive_geometry(cfg)        # warm caches before timing
    with _Timed(1, "input field amplitude normalization", 1.0e-3):
        geom = derive_geometry(cfg)
        assert abs(geom.e_in - 2.5e9) / 2.5e9 < 0.15
        assert geom.e_in == pytest.approx(2.2437e9, rel=1e-3)


def test_criterion_02_green_function_series_oracle():
    """Green diagonals match a 1e5-term geometric series to 1e-10 relative
    for 100 random (detuning, frequency, harmonic, length) tuples."""
    tuples = []
    while len(tuples) < 100:
        cfg = random_config(RNG, n_max=6)
        cfg = dataclasses.replace(
            cfg, detuning=float(RNG.uniform(0.0, 2.0 * math.pi)))
        geom = derive_geometry(cfg)
        p = int(RNG.integers(-3, 4))
        omega = float(RNG.uniform(0.0, 1.0e6))
        z = loop_phase(cfg, geom, p, omega)
        if np.min(np.abs(1.0 - z)) < 1e-6:
            continue                      # stay away from the pole guard
        tuples.append((cfg, geom, p, omega, z))
    with _Timed(2, "Green function versus geometric series", 5.0):
        z_all = np.array([z for *_, z in tuples])
        series = np.ones_like(z_all)
        for _ in range(100_000):
            series = 1.0 + z_all * series
        for i, (cfg, geom, p, omega, _) in enumerate(tuples):
            g = green_diagonal(cfg, geom, p, omega)
            assert np.max(np.abs(g - series[i]) / np.abs(series[i])) < 1e-10


def test_criterion_03_stiffness_finite_difference_oracle():
    """All 10 suspension stiffness scalars match central differences of the
    resummed observables to 1e-6 relative on 20 random configurations."""
    pairs = ((0, 0), (1, 1), (2, 2), (1, 3), (2, 4))
    with _Timed(3, "stiffness versus finite differences", 30.0):
        for _ in range(20):
            cfg = random_config(RNG, n_max=4)
            geom = derive_geometry(cfg)
            v = presets.input_field(cfg, geom)
            sp = spectral_point(cfg, geom, 0.0)
            basis = build_basis_cached(cfg.n_max)
            outers = forces.outer_set(basis)
            gens = forces.generator_set(basis)
            for mirror in (1, 2):
                coef = forces.stiffness_coefficients(cfg, geom, sp, v,
                                                     mirror, mirror).coef
                for oi, gi in pairs:
                    fd = stiffness_fd(cfg, geom, sp, v, outers[oi],
                                      gens[gi], mirror, mirror)
                    scale = max(abs(fd), 1e-9 * abs(coef[0, 0]))
                    assert abs(coef[oi, gi].real - fd) / scale < 1e-6


def _stiffness_sweep(theta_y, theta_z, fraction=0.1, points=20):
    dists = np.geomspace(1e-3, 2e-6, points)
    out = []
    for d in dists:
        cfg = presets.near_concentric_config(distance=float(d),
                                             detuning_fraction=fraction)
        geom = derive_geometry(cfg)
        v = presets.input_field(cfg, geom, theta_y=theta_y, theta_z=theta_z)
        sp = spectral_point(cfg, geom, 0.0)
        out.append(forces.stiffness_coefficients(cfg, geom, sp, v, 1, 1).coef)
    return dists, out


def test_criterion_04_stiffness_versus_length_shape():
    """Cross stiffness vanishes aligned, exceeds 0.1 |F_psi| near
    concentricity at theta_z = 0.1 mrad, and the misalignment-induced
    magnitudes grow monotonically over the last 10% of the sweep."""
    with _Timed(4, "stiffness versus cavity length shape", 60.0):
        # (a) aligned: no coupling between length and angular coordinates.
        _, aligned = _stiffness_sweep(0.0, 0.0, points=4)
        for coef in aligned:
            scale = abs(coef[0, 0])
            cross = max(abs(coef[0, 1]), abs(coef[0, 2]), abs(coef[1, 0]),
                        abs(coef[2, 0]))
            assert cross < 1e-12 * scale
        # (b), (c) misaligned sweep toward concentricity.
        dists, sets = _stiffness_sweep(1e-5, 1e-4, points=20)
        ratio = np.array([max(abs(c[0, 2]), abs(c[2, 0])) / abs(c[0, 0])
                          for c in sets])
        last_third = ratio[len(ratio) - len(ratio) // 3:]
        assert np.max(last_third) > 0.1
        cross_mags = np.array(
            [[abs(c[0, 1]), abs(c[0, 2]), abs(c[0, 3]),
              abs(c[2, 2]), abs(c[2, 3]), abs(c[2, 4])] for c in sets])
        tail = cross_mags[-3:]          # last 10% of a 20-point sweep
        assert np.all(np.diff(tail, axis=0) > 0.0)


def test_criterion_05_static_error_signal_shape():
    """Aligned static length signal is odd about resonance, crosses zero
    once per free spectral range, with extrema a linewidth apart (+-30%)."""
    cfg = presets.near_concentric_config(distance=1e-3)
    geom = derive_geometry(cfg)
    v0 = aligned_vector(cfg, geom)
    res = resonant_detuning(geom)

    def static(psi):
        c = dataclasses.replace(cfg, detuning=float(psi))
        g = derive_geometry(c)
        return signals.static_signal(c, g, spectral_point(c, g, 0.0), v0)

    with _Timed(5, "static error signal shape", 10.0):
        # Oddness about resonance.
        offs = np.linspace(0.05, 3.0, 12) * math.pi / geom.finesse
        plus = np.array([static(res + o) for o in offs])
        minus = np.array([static(res - o) for o in offs])
        assert np.max(np.abs(plus + minus)) < 1e-10 * np.max(np.abs(plus))
        # One zero crossing inside one free spectral range: dense scan near
        # resonance, coarse scan elsewhere.
        lw = 2.0 * math.pi / geom.finesse
        grid = np.concatenate([
            np.linspace(res - math.pi, res - 3 * lw, 400, endpoint=False),
            np.linspace(res - 3 * lw, res + 3 * lw, 601),
            np.linspace(res + 3 * lw, res + math.pi, 400, endpoint=False)[1:],
        ])
        vals = np.array([static(p) for p in grid])
        signs = np.sign(vals[np.abs(vals) > 1e-9 * np.max(np.abs(vals))])
        crossings = int(np.sum(signs[1:] != signs[:-1]))
        assert crossings == 1
        # Extrema separation approximately one linewidth.
        dense = np.linspace(res - 3 * lw, res + 3 * lw, 1201)
        dvals = np.array([static(p) for p in dense])
        sep = abs(dense[np.argmax(dvals)] - dense[np.argmin(dvals)])
        assert 0.7 * lw < sep < 1.3 * lw


def test_criterion_06_signal_cross_coupling_shape():
    """The tilt-to-length signal ratio |s_X / s_psi| climbs as the cavity
    approaches instability, exceeding 0.1 misaligned and vanishing aligned."""
    with _Timed(6, "error-signal cross coupling shape", 60.0):
        dists = np.geomspace(1e-3, 5e-7, 10)
        ratios = []
        for d in dists:
            cfg = presets.near_concentric_config(distance=float(d),
                                                 detuning_fraction=0.3)
            geom = derive_geometry(cfg)
            v = presets.input_field(cfg, geom, theta_y=0.0, theta_z=1e-4)
            sp = spectral_point(cfg, geom, 0.0)
            coef = signals.signal_coefficients(cfg, geom, sp, v, "dp",
                                               source=1)
            ratios.append(max(abs(coef[2]), abs(coef[4])) / abs(coef[0]))
            if d == dists[0]:
                v0 = aligned_vector(cfg, geom)
                c0 = signals.signal_coefficients(cfg, geom, sp, v0, "dp",
                                                 source=1)
                assert max(abs(c0[1]), abs(c0[2]), abs(c0[3]),
                           abs(c0[4])) < 1e-12 * abs(c0[0])
        ratios = np.array(ratios)
        assert np.all(np.diff(ratios) > 0.0)
        assert ratios[-1] > 0.1


def test_criterion_07_langevin_solver():
    """Hand-solved 2-DOF instance to 1e-10; dark-cavity eigenfrequencies to
    1e-8; weak-coupling optical-spring shift within 1% of perturbation."""
    cfg = presets.near_concentric_config(distance=1e-3, detuning_fraction=0.15)
    geom = derive_geometry(cfg)
    v = presets.input_field(cfg, geom)
    temp = 295.0
    with _Timed(7, "closed-loop solver oracles", 10.0):
        # (a) two axial suspensions on the input mirror, solved by hand.
        osc_a = Oscillator(label="a", mirror=1, f0=1.0, mass=0.1,
                           q_factor=1e4)
        osc_b = Oscillator(label="b", mirror=1, f0=1.7, mass=0.25,
                           q_factor=2e3)
        system = MechanicalSystem(oscillators=[osc_a, osc_b])
        omega = 2.0 * math.pi * 3.1
        model = build_model(cfg, geom, v, system, omega, temperature=temp)
        solved = model.solve_psd(["x_1"])["x_1"]
        sp = spectral_point(cfg, geom, omega)
        k = geom.k
        kappa = (2.0 * k) ** 2 * HBAR * cfg.r1 ** 2 * geom.e_cav ** 2 \
            * forces.stiffness_coefficients(cfg, geom, sp, v, 1, 1).coef[0, 0] \
            * np.exp(1j * omega * geom.tau)
        def dnm(o):
            return o.mass * (o.omega0 ** 2 - omega ** 2
                             - 1j * omega * o.gamma)
        mat = np.array([[dnm(osc_a) - kappa, -kappa],
                        [-kappa, dnm(osc_b) - kappa]])
        w = np.array([1.0, 1.0]) @ np.linalg.inv(mat)
        total = sum(
            abs(w[j]) ** 2 * noise.thermal_force_psd(
                "brownian", omega, o.omega0, o.gamma, o.mass, temp)
            for j, o in enumerate((osc_a, osc_b)))
        outer = forces.outer_set(build_basis_cached(cfg.n_max))[0]
        rows = forces.shot_force_rows(cfg, geom, sp, v, outer, recipient=1)
        pref = 2.0 * k * HBAR * cfg.r1 ** 2 * geom.e_cav
        merged = {key: (w[0] + w[1]) * pref * u for key, u in rows.items()}
        total += float(np.real(noise.shot_pairing(merged)))
        assert solved == pytest.approx(2.0 * total, rel=1e-10)
        # (b) dark cavity: poles of the damped oscillators.
        roots = free_oscillations(cfg, geom, v, system, light_on=False)
        for fo, o in zip(roots, (osc_a, osc_b)):
            expect = math.sqrt(o.omega0 ** 2 - 0.25 * o.gamma ** 2) \
                - 0.5j * o.gamma
            assert abs(fo.root - expect) / abs(expect) < 1e-8
        # (c) weak-coupling optical spring versus perturbation theory.
        weak = dataclasses.replace(cfg, power_in=1e-6)
        gw = derive_geometry(weak)
        v0 = aligned_vector(weak, gw)
        single = MechanicalSystem(oscillators=[osc_a])
        root = free_oscillations(weak, gw, v0, single)[0].root
        sp0 = spectral_point(weak, gw, osc_a.omega0)
        kappa0 = (2.0 * gw.k) ** 2 * HBAR * weak.r1 ** 2 * gw.e_cav ** 2 \
            * forces.stiffness_coefficients(weak, gw, sp0, v0, 1, 1).coef[0, 0] \
            * np.exp(1j * osc_a.omega0 * gw.tau)
        shift = (root ** 2).real - (osc_a.omega0 ** 2
                                    - 0.25 * osc_a.gamma ** 2)
        expect_shift = -float(np.real(kappa0)) / osc_a.mass
        assert shift == pytest.approx(expect_shift, rel=1e-2)


def test_criterion_08_thermal_models():
    """Commutator identical across bath models; the quantum-completed bath
    meets the classical one within hbar w_J / kT; substrate noise scales
    exactly with T, loss angle and 1/frequency."""
    with _Timed(8, "thermal bath models", 5.0):
        omega_j = 2.0 * math.pi * 10.0
        gamma = omega_j / 1e6
        for omega in (0.3 * omega_j, omega_j, 4.7 * omega_j):
            comms = {m: noise.thermal_correlators(m, omega, omega_j, gamma,
                                                  300.0).commutator
                     for m in noise.THERMAL_MODELS}
            assert comms["brownian"] == comms["diosi"] == comms["gv"]
        cb = noise.thermal_correlators("brownian", omega_j, omega_j,
                                       gamma, 300.0)
        cd = noise.thermal_correlators("diosi", omega_j, omega_j,
                                       gamma, 300.0)
        bound = HBAR * omega_j / (K_B * 300.0)
        assert abs(cd.xx - cb.xx) / abs(cb.xx) < bound
        basis = build_basis(2)
        vg = np.zeros(basis.dim, dtype=complex)
        vg[basis.index(0, 0)] = 1.0
        base = dict(w=2e-4, omega=2.0 * math.pi * 100.0, temperature=290.0,
                    young=7.2e10, poisson=0.17, loss_angle=1e-6)
        ref = noise.substrate_displacement_psd(basis, vg, **base)
        assert noise.substrate_displacement_psd(
            basis, vg, **{**base, "temperature": 580.0}) == \
            pytest.approx(2.0 * ref, rel=1e-14)
        assert noise.substrate_displacement_psd(
            basis, vg, **{**base, "loss_angle": 2e-6}) == \
            pytest.approx(2.0 * ref, rel=1e-14)
        assert noise.substrate_displacement_psd(
            basis, vg, **{**base, "omega": 2.0 * base["omega"]}) == \
            pytest.approx(0.5 * ref, rel=1e-14)


def test_criterion_09_shot_noise_two_path():
    """Vacuum pairing rule equals direct covariance contraction to 1e-12 on
    20 random instances."""
    with _Timed(9, "shot-noise pairing versus direct contraction", 30.0):
        for _ in range(20):
            n_keys = int(RNG.integers(2, 7))
            dim = int(RNG.integers(3, 30))
            keys = [(int(RNG.integers(-4, 5)), int(RNG.integers(1, 3)))
                    for _ in range(n_keys)]
            keys = sorted(set(keys))
            rows_a = {k: RNG.normal(size=dim) + 1j * RNG.normal(size=dim)
                      for k in keys}
            rows_b = {k: RNG.normal(size=dim) + 1j * RNG.normal(size=dim)
                      for k in keys}
            ua = np.concatenate([rows_a[k] for k in keys])
            ub = np.concatenate([rows_b[k] for k in keys])
            cov = 0.25 * np.eye(dim * len(keys))
            direct = ua @ cov @ np.conj(ub)
            paired = noise.shot_pairing(rows_a, rows_b)
            assert abs(paired - direct) <= 1e-12 * max(abs(direct), 1.0)
        # And once on physical back-action rows.
        cfg = presets.near_concentric_config(distance=1e-3,
                                             detuning_fraction=0.1)
        geom = derive_geometry(cfg)
        v = presets.input_field(cfg, geom)
        sp = spectral_point(cfg, geom, 2.0 * math.pi * 100.0)
        outer = forces.outer_set(build_basis_cached(cfg.n_max))[0]
        rows = forces.shot_force_rows(cfg, geom, sp, v, outer)
        keys = sorted(rows)
        ua = np.concatenate([rows[k] for k in keys])
        direct = ua @ (0.25 * np.eye(ua.size)) @ np.conj(ua)
        paired = noise.shot_pairing(rows)
        assert abs(paired - direct) <= 1e-12 * abs(direct)


def test_criterion_10_bipartite_variances():
    """Normalized variances invariant under common source rescaling to
    1e-12; parallelogram identity exact; vacuum homodyne baseline 1; the
    uncertainty product stays >= 1 over a 200-point window."""
    cfg = presets.near_concentric_config(distance=1e-3, detuning_fraction=0.1)
    geom = derive_geometry(cfg)
    v = presets.input_field(cfg, geom)
    drums = presets.drum_modes()
    f0 = drums[0].f0
    with _Timed(10, "bipartite variances and uncertainty bounds", 30.0):
        omega = 2.0 * math.pi * 1.03 * f0
        a = bipartite_spectrum(cfg, geom, v, drums, omega, source_scale=1.0)
        b = bipartite_spectrum(cfg, geom, v, drums, omega, source_scale=9.0)
        for field in ("v_x", "v_y", "v_sum"):
            assert np.allclose(getattr(a, field), getattr(b, field),
                               rtol=1e-12)
        sp = spectral_point(cfg, geom, omega)
        _, P, th_coef, sn_rows = _setup(cfg, geom, sp, v, drums)
        inv_p = np.linalg.inv(P)
        corr = [noise.thermal_correlators("diosi", omega, m.omega0, m.gamma,
                                          295.0) for m in drums]
        omega_ratio = np.array([omega / m.omega0 for m in drums])
        comm_scale = omega_ratio * 0.5 * np.array([c.commutator
                                                   for c in corr])

        def raw(weights, quad):
            var, _ = _variances(np.asarray(weights, dtype=complex), inv_p,
                                th_coef, sn_rows, corr, comm_scale,
                                omega_ratio, quad, 1.0)
            return var

        for quad in ("x", "y"):
            lhs = raw([0.7, 1.1], quad) + raw([0.7, -1.1], quad)
            rhs = 2.0 * raw([0.7, 0.0], quad) + 2.0 * raw([0.0, 1.1], quad)
            assert lhs == pytest.approx(rhs, rel=1e-12)
        thetas = np.linspace(0.0, math.pi, 11)
        dark = dataclasses.replace(cfg, power_in=1e-30)
        baseline = homodyne_variance(dark, derive_geometry(dark), v, drums,
                                     omega, thetas)
        assert np.allclose(baseline, 1.0, atol=1e-9)
        for fac in np.linspace(0.85, 1.15, 200):
            res = bipartite_spectrum(cfg, geom, v, drums,
                                     2.0 * math.pi * fac * f0)
            assert res.v_x[0] * res.v_y[0] >= 1.0 - 1e-9
            assert res.v_x[1] * res.v_y[1] >= 1.0 - 1e-9
            assert min(res.epr_products) >= 1.0 - 1e-9


def _preset_observables(n_max: int) -> dict[str, complex]:
    cfg = presets.near_concentric_config(distance=1e-3, detuning_fraction=0.15,
                                         n_max=n_max)
    geom = derive_geometry(cfg)
    v = presets.input_field(cfg, geom)
    sp = spectral_point(cfg, geom, 0.0)
    coef = forces.stiffness_coefficients(cfg, geom, sp, v, 1, 1).coef
    sig = signals.signal_coefficients(cfg, geom, sp, v, "dp", source=1)
    out: dict[str, complex] = {
        "f_psi": coef[0, 0], "t_z_per_x_z": coef[2, 2],
        "f_per_x_z": coef[0, 2],
        "dp_static": signals.static_signal(cfg, geom, sp, v),
        "s_psi": sig[0], "s_x_z": sig[2],
    }
    system = presets.pendulum_suspension()
    model = build_model(cfg, geom, v, system, 2.0 * math.pi * 10.0,
                        temperature=295.0)
    psd = model.solve_psd(["s_dp", "x_1"])
    out["psd_s_dp"] = psd["s_dp"]
    out["psd_x_1"] = psd["x_1"]
    drums = presets.drum_modes()
    omega = 2.0 * math.pi * 1.02 * drums[0].f0
    res = bipartite_spectrum(cfg, geom, v, drums, omega)
    out["epr_a"], out["epr_b"] = res.epr_products
    thetas = np.linspace(0.0, math.pi, 13)
    hv = homodyne_variance(cfg, geom, v, drums, omega, thetas)
    out["squeeze_min"] = float(np.min(hv))
    out["squeeze_max"] = float(np.max(hv))
    return out


def test_criterion_11_basis_convergence():
    """Every preset observable moves by less than 1e-2 relative between
    n_max = 6 and n_max = 8."""
    with _Timed(11, "transverse-basis convergence", 120.0):
        coarse = _preset_observables(6)
        fine = _preset_observables(8)
        for name, val in coarse.items():
            rel = abs(val - fine[name]) / max(abs(fine[name]), 1e-300)
            assert rel < 1e-2, f"{name}: relative change {rel:.2e}"
