import math

import numpy as np
import pytest

from bateman.classical import BoundaryData, CausticError, recombine, static_fs
from bateman.kernel import (
    composition_check,
    delta_limit_check,
    detect_caustics,
    fluctuation_factor,
    kernel_cartesian,
    kernel_grid,
    kernel_hyperbolic,
    morse_index,
    schrodinger_residual_kernel,
    symplectic_flow,
    symplectic_flow_closed_form,
    van_vleck_factor,
)
from bateman.model import make_params

from conftest import closed_form_kernel, random_recombination

SIGMA3 = np.diag([1.0, -1.0])
SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def fs(damped):
    return static_fs(damped)


def test_flow_identity(damped):
    np.testing.assert_allclose(symplectic_flow(damped, 0.4, 0.4).matrix, np.eye(4), atol=1e-15)


def test_flow_quarter_period(figure_params):
    p = figure_params
    S = symplectic_flow(p, 0.0, math.pi / (2 * p.Omega))
    dt = math.pi / (2 * p.Omega)
    exact = SIGMA3 @ (math.cosh(p.Gamma * dt) * np.eye(2) + math.sinh(p.Gamma * dt) * SIGMA1) / (p.m * p.Omega)
    np.testing.assert_allclose(S.S1, exact, atol=1e-12)


def test_flow_undamped_block():
    p = make_params(1.3, 0.0, 2.0)
    for dt in (0.3, 1.1, 2.9):
        np.testing.assert_allclose(symplectic_flow(p, 0, dt).S1,
                                   math.sin(p.Omega * dt) / (p.Omega * p.m) * SIGMA3, atol=1e-12)


def test_flow_symplectic_and_closed_form(damped, rng):
    for dt in rng.uniform(0, 6, 20):
        S = symplectic_flow(damped, 0, dt)
        assert S.symplectic_residual() < 1e-10
        assert np.linalg.det(S.matrix) == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(S.matrix, symplectic_flow_closed_form(damped, 0, dt).matrix, atol=1e-10)


def test_flow_maps_classical_orbit(fs, rng):
    from bateman.classical import canonical_momentum, classical_velocity
    p = fs.params
    bd = BoundaryData(0.0, 1.2, rng.normal(size=2), rng.normal(size=2))
    za = np.concatenate([canonical_momentum(p, bd.x_a, classical_velocity(fs, bd, 0.0)), bd.x_a])
    zb = np.concatenate([canonical_momentum(p, bd.x_b, classical_velocity(fs, bd, 1.2)), bd.x_b])
    np.testing.assert_allclose(symplectic_flow(p, 0, 1.2).matrix @ za, zb, atol=1e-10)


def test_caustics_one_period(figure_params):
    p = figure_params
    rec = detect_caustics(p, 0.0, math.pi / p.Omega)
    assert rec.multiplicities == (2,)
    assert rec.times[0] == pytest.approx(math.pi / p.Omega, abs=1e-12 * p.period)
    assert rec.morse_index == 2


def test_caustics_two_periods(figure_params):
    p = figure_params
    rec = detect_caustics(p, 0.0, 2 * math.pi / p.Omega)
    assert rec.multiplicities == (2, 2)
    assert rec.morse_index == 4
    assert all(a < b for a, b in zip(rec.times, rec.times[1:]))


def test_caustics_none_before_first(figure_params):
    p = figure_params
    assert detect_caustics(p, 0.0, math.pi / (2 * p.Omega)).morse_index == 0


def test_morse_additivity(damped):
    tau = damped.period
    assert morse_index(damped, 0, 2 * tau) == 2 * morse_index(damped, 0, tau)


def test_caustics_translation(damped):
    a = detect_caustics(damped, 0.0, 3.0)
    b = detect_caustics(damped, 1.7, 4.7)
    np.testing.assert_allclose(np.array(b.times) - 1.7, a.times, atol=1e-12)


def test_fluctuation_static(fs, rng):
    p = fs.params
    for dt in rng.uniform(0.1, 6.0, 10):
        if abs(math.sin(p.Omega * dt)) < 1e-3:
            continue
        F = fluctuation_factor(fs, 0.0, dt)
        assert F.magnitude == pytest.approx(p.m / (2 * math.pi) * p.Omega / abs(math.sin(p.Omega * dt)), rel=1e-10)


def test_fluctuation_translation(fs):
    assert fluctuation_factor(fs, 0.0, 1.1).magnitude == pytest.approx(fluctuation_factor(fs, 0.8, 1.9).magnitude,
                                                                       rel=1e-10)


def test_van_vleck_oracle(fs, rng):
    for _ in range(3):
        bd = BoundaryData(0.0, rng.uniform(0.2, 2.0), rng.normal(size=2), rng.normal(size=2))
        assert van_vleck_factor(fs, bd) == pytest.approx(fluctuation_factor(fs, bd.t_a, bd.t_b).magnitude, rel=1e-5)


def test_fluctuation_at_caustic(fs):
    with pytest.raises(CausticError):
        fluctuation_factor(fs, 0.0, fs.params.period)


def test_kernel_near_caustic_refused(fs):
    p = fs.params
    bd = BoundaryData(0.0, p.period * (1 + 5e-7), np.ones(2) * 0.3, np.zeros(2))
    with pytest.raises(CausticError):
        kernel_cartesian(fs, bd)


def test_kernel_closed_form(fs, rng):
    p = fs.params
    for _ in range(20):
        r_a, r_b = rng.uniform(0.05, 1.5, 2)
        u_a, u_b = rng.uniform(-1, 1, 2)
        dt = rng.uniform(0.05, 0.95) * p.period
        K = kernel_cartesian(fs, BoundaryData.hyperbolic(0.0, dt, r_a, u_a, r_b, u_b))
        ref = closed_form_kernel(p, dt, r_a, u_a, r_b, u_b)
        assert abs(K.amplitude - ref) < 1e-8 * abs(ref)
        assert K.morse_index == 0


def test_kernel_morse_phase_beyond_caustic(fs):
    p = fs.params
    dt = 1.4 * p.period
    K = kernel_cartesian(fs, BoundaryData.hyperbolic(0.0, dt, 0.4, 0.1, 0.7, -0.3))
    assert K.morse_index == 2
    assert K.amplitude == pytest.approx(-K.bare, rel=1e-14)
    ref = closed_form_kernel(p, dt, 0.4, 0.1, 0.7, -0.3)
    assert abs(K.bare - ref) < 1e-8 * abs(ref)


def test_kernel_grid_matches_scalar(fs, rng):
    xa = rng.normal(size=2)
    xb = rng.normal(size=(2, 3))
    grid = kernel_grid(fs, 0.0, 1.0, xa[:, None], xb)
    for k in range(3):
        assert grid[k] == pytest.approx(kernel_cartesian(fs, BoundaryData(0.0, 1.0, xa, xb[:, k])).amplitude,
                                        rel=1e-10)


def test_kernel_gauge_invariance(fs, rng):
    bd = BoundaryData(0.0, 1.3, rng.normal(size=2) * 0.5, rng.normal(size=2) * 0.5)
    ref = kernel_cartesian(fs, bd).amplitude
    for _ in range(5):
        other = recombine(fs, random_recombination(rng))
        assert abs(kernel_cartesian(other, bd).amplitude - ref) < 1e-8 * abs(ref)


def test_hyperbolic_matches_cartesian(fs, rng):
    p = fs.params
    for _ in range(20):
        r_a, r_b = rng.uniform(0.05, 1.5, 2)
        u_a, u_b = rng.uniform(-1, 1, 2)
        dt = rng.uniform(0.05, 1.9) * p.period
        if abs(math.sin(p.Omega * dt)) < 0.05:
            continue
        Kc = kernel_cartesian(fs, BoundaryData.hyperbolic(0.0, dt, r_a, u_a, r_b, u_b)).amplitude
        Kh = kernel_hyperbolic(fs, 0.0, dt, r_a, u_a, r_b, u_b)
        assert abs(Kh.amplitude - Kc) < 1e-10 * abs(Kc)
        assert Kh.branch["ipi_shift"] in (0, 1)


def test_hyperbolic_reflection_symmetry(fs):
    alpha = kernel_hyperbolic(fs, 0.0, 1.0, 0.5, 0.0, 0.8, 0.3).branch["alpha"].real
    du = 0.3
    a = kernel_hyperbolic(fs, 0.0, 1.0, 0.5, 0.0, 0.8, du).amplitude
    b = kernel_hyperbolic(fs, 0.0, 1.0, 0.5, 0.0, 0.8, 2 * alpha - du).amplitude
    assert abs(a - b) < 1e-10 * abs(a)


def test_hyperbolic_static_closed_form(fs):
    p = fs.params
    Kh = kernel_hyperbolic(fs, 0.0, 0.9, 0.6, 0.2, 1.1, -0.4).amplitude
    ref = closed_form_kernel(p, 0.9, 0.6, 0.2, 1.1, -0.4)
    assert abs(Kh - ref) < 1e-10 * abs(ref)


def test_kernel_schrodinger_residual(fs):
    pts = [[0.4, -0.2], [0.9, 0.3], [-0.5, 0.7]]
    assert schrodinger_residual_kernel(fs, 0.0, [0.3, 0.1], 1.1, pts) < 1e-4


def test_delta_limit_monotone(fs):
    devs = delta_limit_check(fs, 0.0, [0.2, 0.0], [0.2, 0.0], width=0.5)
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-3


def test_composition(fs):
    assert composition_check(fs, 0.0, 0.5, 1.1, [0.3, 0.1], [0.4, -0.2]) < 0.02
