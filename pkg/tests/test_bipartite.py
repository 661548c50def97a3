"""Bipartite mirror-mode correlation and homodyne squeezing tests."""
from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from fpcavity import noise, presets
from fpcavity.bipartite import (_setup, _variances, bipartite_spectrum,
                                homodyne_variance)
from fpcavity.cavity import derive_geometry, spectral_point
from fpcavity.mechanics import DeformationMode


@pytest.fixture
def setup():
    cfg = presets.near_concentric_config(distance=1e-3, detuning_fraction=0.1)
    geom = derive_geometry(cfg)
    v = presets.input_field(cfg, geom)
    drums = presets.drum_modes()
    return cfg, geom, v, drums


def test_result_shapes_and_alpha(setup):
    cfg, geom, v, drums = setup
    omega = 2.0 * math.pi * 1.05 * drums[0].f0
    res = bipartite_spectrum(cfg, geom, v, drums, omega)
    assert res.p_matrix.shape == (2, 2)
    P = res.p_matrix
    p_plus = (P[0, 0] + P[0, 1]) * (P[1, 1] + P[1, 0])
    p_minus = (P[0, 0] - P[0, 1]) * (P[1, 1] - P[1, 0])
    norm = abs(p_plus * p_minus) ** 0.25
    assert res.alpha[0] == pytest.approx(abs(P[1, 1]) / norm)
    assert res.alpha[1] == pytest.approx(abs(P[0, 1]) / norm)
    assert np.all(res.v_x > 0) and np.all(res.v_y > 0)


def test_source_rescaling_invariance(setup):
    """Normalized variances cannot depend on a common source rescaling."""
    cfg, geom, v, drums = setup
    omega = 2.0 * math.pi * 0.97 * drums[0].f0
    a = bipartite_spectrum(cfg, geom, v, drums, omega, source_scale=1.0)
    b = bipartite_spectrum(cfg, geom, v, drums, omega, source_scale=37.0)
    for field in ("v_x", "v_y", "v_sum"):
        assert np.allclose(getattr(a, field), getattr(b, field), rtol=1e-12)
    assert a.epr_products == pytest.approx(b.epr_products, rel=1e-12)


def test_parallelogram_identity(setup):
    """Raw variances form a quadratic form: V(u+v) + V(u-v) = 2V(u) + 2V(v)."""
    cfg, geom, v, drums = setup
    omega = 2.0 * math.pi * 1.02 * drums[0].f0
    sp = spectral_point(cfg, geom, omega)
    _, P, th_coef, sn_rows = _setup(cfg, geom, sp, v, drums)
    inv_p = np.linalg.inv(P)
    corr = [noise.thermal_correlators("diosi", omega, m.omega0, m.gamma,
                                      295.0) for m in drums]
    omega_ratio = np.array([omega / m.omega0 for m in drums])
    comm_scale = np.array([omega_ratio[j] * 0.5 * corr[j].commutator
                           for j in range(2)])

    def raw(weights, quad="x"):
        var, _ = _variances(np.asarray(weights, dtype=np.complex128), inv_p,
                            th_coef, sn_rows, corr, comm_scale, omega_ratio,
                            quad, 1.0)
        return var

    a1, a2 = 0.8, 1.3
    for quad in ("x", "y"):
        lhs = raw([a1, a2], quad) + raw([a1, -a2], quad)
        rhs = 2.0 * raw([a1, 0.0], quad) + 2.0 * raw([0.0, a2], quad)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_heisenberg_products(setup):
    cfg, geom, v, drums = setup
    for fac in np.linspace(0.85, 1.15, 9):
        omega = 2.0 * math.pi * fac * drums[0].f0
        res = bipartite_spectrum(cfg, geom, v, drums, omega)
        assert res.v_x[0] * res.v_y[0] >= 1.0 - 1e-9
        assert res.v_x[1] * res.v_y[1] >= 1.0 - 1e-9
        assert res.epr_products[0] >= 1.0 - 1e-9
        assert res.epr_products[1] >= 1.0 - 1e-9
        assert res.entangled == (min(res.epr_products) < 1.0 - 1e-9)


def test_pure_shot_regime_saturates_heisenberg(setup):
    """With thermal forces negligible the mode is minimum-uncertainty."""
    cfg, geom, v, _ = setup
    quiet = tuple(dataclasses.replace(d, q_factor=1e13)
                  for d in presets.drum_modes())
    omega = 2.0 * math.pi * 1.3 * quiet[0].f0
    res = bipartite_spectrum(cfg, geom, v, quiet, omega, temperature=1e-3)
    assert res.v_x[0] * res.v_y[0] == pytest.approx(1.0, rel=1e-6)
    assert res.v_x[1] * res.v_y[1] == pytest.approx(1.0, rel=1e-6)


def test_homodyne_vacuum_baseline(setup):
    cfg, geom, v, drums = setup
    omega = 2.0 * math.pi * drums[0].f0
    thetas = np.linspace(0.0, math.pi, 7)
    var = homodyne_variance(cfg, geom, v, drums, omega, thetas,
                            include_motion=False)
    assert np.allclose(var, 1.0, atol=1e-10)
    # A dark cavity (no carrier) is also exactly vacuum-limited.
    dark = dataclasses.replace(cfg, power_in=1e-30)
    gd = derive_geometry(dark)
    var_dark = homodyne_variance(dark, gd, v, drums, omega, thetas)
    assert np.allclose(var_dark, 1.0, atol=1e-6)


def test_homodyne_motion_adds_thermal_noise(setup):
    cfg, geom, v, drums = setup
    omega = 2.0 * math.pi * drums[0].f0
    thetas = np.linspace(0.0, math.pi, 25)
    var = homodyne_variance(cfg, geom, v, drums, omega, thetas)
    assert np.max(var) > 1.0
    assert np.all(var > 0.0)
