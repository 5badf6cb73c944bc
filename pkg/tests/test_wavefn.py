import math

import numpy as np
import pytest
from scipy.special import eval_genlaguerre

from bateman.classical import b_coefficients, recombine, reanchor, static_fs
from bateman.kernel import kernel_hyperbolic
from bateman.model import make_params
from bateman.wavefn import (
    DivergentProductError,
    InvalidLabelError,
    QuantumLabel,
    alpha_rate_defect,
    envelopes,
    hermite,
    j2_apply,
    laguerre,
    laurent_partial_sum,
    mehler_reconstruct,
    mehler_single_l,
    modified_bessel_I,
    modified_inner_product,
    psi_full,
    psi_lho_hermite,
    psi_radial,
    psi_radial_star,
    psi_star,
    reduce_to_lho,
    schrodinger_residual_full,
    schrodinger_residual_radial,
)

from conftest import random_recombination

U_ROTATION = np.array([[math.cos(0.5), math.sin(0.5), 0, 0], [-math.sin(0.5), math.cos(0.5), 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
U_SCALING = np.diag([2.0, 0.5, 1.0, 1.0])


@pytest.fixture(scope="module")
def general_fs():
    p = make_params(1.0, 0.7, 2.3)
    return recombine(static_fs(p), random_recombination(np.random.default_rng(1)))


@pytest.fixture(scope="module")
def static_env():
    return envelopes(static_fs(make_params(1.0, 0.7, 2.3)))


# ------------------------------------------------------------ special functions

def test_laguerre_low_degrees():
    x = np.linspace(-1, 3, 7)
    assert np.allclose(laguerre(0, 0.3, x), 1.0)
    assert np.allclose(laguerre(1, 0.3, x), 1.3 - x)


@pytest.mark.parametrize("l", [0.5, 1, 2, 3.5])
def test_laguerre_matches_scipy_for_positive_order(l):
    x = np.linspace(0, 6, 13)
    for n in range(8):
        assert np.allclose(laguerre(n, l, x), eval_genlaguerre(n, l, x), rtol=1e-12, atol=1e-12)


def test_laguerre_hermite_rule_even():
    x = math.sqrt(0.7)
    h4 = 16 * x ** 4 - 48 * x ** 2 + 12
    assert abs(laguerre(2, -0.5, 0.7) - h4 / (2 ** 4 * 2)) < 1e-12


def test_laguerre_hermite_rule_odd():
    x = 0.9
    assert abs(laguerre(3, 0.5, x * x) - (-1) ** 3 * hermite(7, x) / (2 ** 7 * 6 * x)) < 1e-12


def test_laguerre_negative_integer_order_shift():
    x = np.linspace(0.1, 4, 9)
    # L_n^{-k} for n >= k through the explicit coefficient sum
    for n, k in [(3, 1), (4, 2), (5, 5)]:
        explicit = sum(math.comb(n - k, n - j) * (-x) ** j / math.factorial(j) for j in range(n + 1))
        assert np.allclose(laguerre(n, -k, x), explicit, rtol=1e-12)


def test_hermite_basics():
    assert hermite(0, 0.3) == 1.0
    assert hermite(1, 0.3) == pytest.approx(0.6)
    assert hermite(2, 1.0) == pytest.approx(2.0)
    x = np.random.default_rng(3).normal(size=9)
    for k in range(7):
        assert np.allclose(hermite(k, -x), (-1) ** k * hermite(k, x))


def test_bessel_values_and_symmetry():
    assert modified_bessel_I(0, 0.0) == 1.0
    assert modified_bessel_I(3, 0.0) == 0.0
    z = 1.7 - 0.4j
    for l in range(1, 6):
        assert abs(modified_bessel_I(-l, z) - modified_bessel_I(l, z)) < 1e-14
    with pytest.raises(OverflowError):
        modified_bessel_I(1, 60.0)
    with pytest.raises(ValueError):
        modified_bessel_I(41, 1.0)


def test_laurent_identity():
    assert abs(laurent_partial_sum(1.3, 0.4, l_terms=40) - np.exp(1.3j * math.cosh(0.4))) < 1e-8


def test_single_l_mehler_identity():
    for l, z1, z2, theta in [(1, 0.9, 1.4, 0.7), (2, 0.3, 2.0, 1.5), (-2, 1.1, 0.6, 0.4), (5, 2.5, 1.0, 2.2)]:
        lhs, rhs = mehler_single_l(l, z1, z2, np.exp(-2j * theta))
        assert abs(lhs - rhs) <= 1e-8 * abs(rhs)


# ------------------------------------------------------------ labels

def test_label_constraints():
    assert QuantumLabel(2, -0.5).continued
    assert QuantumLabel(3, -2).l == -2
    for bad in [(1, 0), (0, 0.3), (-1, 1), (1.5, 1), (0, -1), (1, -3)]:
        with pytest.raises(InvalidLabelError):
            QuantumLabel(*bad)


def test_negative_integer_l_is_shifted_positive_state(static_env):
    r = np.linspace(0.2, 2.5, 7)
    for n, k in [(2, 1), (3, 2), (4, 3)]:
        lhs = psi_radial((n, -k), static_env, r, 0.6)
        rhs = (-1) ** k * psi_radial((n - k, k), static_env, r, 0.6)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


def test_negative_r_only_for_half_integer_order(static_env):
    assert np.isfinite(psi_radial((1, 0.5), static_env, -0.4, 0.2))
    with pytest.raises(ValueError):
        psi_radial((1, 2), static_env, -0.4, 0.2)


# ------------------------------------------------------------ envelopes

def test_static_envelopes(static_env):
    p = static_env.params
    t = np.linspace(0, 3, 11)
    assert np.allclose(static_env.rho(t), 2.0, atol=1e-14)
    assert np.allclose(static_env.V(t), 2 * np.sin(p.Omega * t) ** 2, atol=1e-13)
    assert np.allclose(static_env.b(t), np.exp(-2j * p.Omega * t), atol=1e-10)
    assert np.allclose(static_env.zeta(t), 0.0, atol=1e-14)
    assert np.allclose(static_env.xi(t), 0.0, atol=1e-14)


def test_anchor_values_general(general_fs):
    fs = reanchor(general_fs, 0.3)
    env = envelopes(fs)
    U_a = b_coefficients(fs, 0.3, 1.0).U_a
    assert env.rho(0.3) == pytest.approx(U_a, rel=1e-12)
    assert abs(env.b(0.3) - 1) < 1e-15
    t = np.linspace(0.3, 4.0, 9)
    assert np.allclose(np.abs(env.b(t)), 1.0, atol=1e-12)


def test_angle_matches_envelope_ratio(general_fs):
    """sin^2 of the integrated angle reproduces V / rho on both sides of turning points."""
    env = envelopes(general_fs)
    for t in [0.2, 0.9, 1.7, 2.6, 4.1]:
        assert math.sin(env.theta(t)) ** 2 == pytest.approx(env.V(t) / env.rho(t), abs=1e-10)


def test_integral_form_of_envelope(general_fs):
    """d/dt sqrt((rho - V)/(W V)) = -1/V away from zeros of V."""
    env = envelopes(general_fs)
    h = 1e-5
    f = lambda s: math.copysign(1, math.cos(env.theta(s))) * math.sqrt((env.rho(s) - env.V(s)) / (env.W * env.V(s)))
    for t in [0.4, 1.1, 1.9]:
        deriv = (f(t + h) - f(t - h)) / (2 * h)
        assert deriv == pytest.approx(-1 / env.V(t), rel=1e-6)


def test_wedge_sum_form_agreement():
    p = make_params(1.0, 0.7, 2.3)
    t = np.linspace(0.1, 3, 7)
    for fs in (static_fs(p), recombine(static_fs(p), U_ROTATION)):
        env = envelopes(fs)
        assert np.allclose(env.rho(t), env.rho_wedge_sum(t), rtol=1e-9)
    scaled = envelopes(recombine(static_fs(p), U_SCALING))
    assert np.max(np.abs(scaled.rho(t) - scaled.rho_wedge_sum(t))) > 0.1


# ------------------------------------------------------------ wave functions

def test_ground_l1_static_closed_form(static_env):
    p = static_env.params
    r = np.linspace(0.1, 2.5, 6)
    u = np.linspace(-0.4, 0.4, 5)[:, None]
    t = 0.35
    expected = (p.m * p.Omega / p.hbar) / math.sqrt(math.pi) * r * np.exp(-p.m * p.Omega * r ** 2 / (2 * p.hbar)) \
        * np.exp(-(u + p.Gamma * t)) * np.exp(-2j * p.Omega * t)
    assert np.allclose(psi_full((0, 1), static_env, r, u, t), expected, rtol=1e-10, atol=0)


def test_static_eigenphase(static_env):
    p = static_env.params
    r = np.linspace(0.2, 2, 5)
    for n, l in [(0, 1), (2, 3), (1, -0.5)]:
        ratio = psi_radial((n, l), static_env, r, 0.8) / psi_radial((n, l), static_env, r, 0.0)
        assert np.allclose(ratio, np.exp(-1j * p.Omega * (2 * n + l + 1) * 0.8), atol=1e-10)


def test_j2_eigenvalue(static_env):
    r, u = np.array([0.7, 1.3]), np.linspace(-0.5, 0.5, 5)
    for lab in [(1, 2), (0, -0.5)]:
        psi = lambda rr, uu: psi_full(lab, static_env, rr, uu, 0.4)
        assert np.allclose(j2_apply(psi, r[:, None], u), 0.5j * lab[1] * psi(r[:, None], u), atol=1e-6)


def test_star_is_time_reversal_for_static(static_env):
    r, u = np.linspace(0.3, 2, 5), 0.25
    for lab in [(1, 1), (2, -0.5)]:
        assert np.allclose(psi_star(lab, static_env, r, u, 0.7), psi_full(lab, static_env, r, -u, -0.7), atol=1e-12)


@pytest.mark.parametrize("which", ["static", "general"])
def test_schrodinger_residuals(which, static_env, general_fs):
    env = static_env if which == "static" else envelopes(general_fs)
    r = np.linspace(0.3, 2.2, 7)
    u = np.linspace(-0.5, 0.5, 5)[:, None]
    for lab in [(0, 1), (2, 1), (1, 3), (1, -0.5), (2, 0.5)]:
        assert schrodinger_residual_radial(lab, env, r, 0.9) < 1e-4
    for lab in [(1, 1), (2, -1), (1, 0.5)]:
        assert schrodinger_residual_full(lab, env, r, u, 0.9) < 1e-4
        assert schrodinger_residual_full(lab, env, r, u, 0.9, reversed_time=True) < 1e-4


def test_alpha_rate_vanishes(general_fs):
    for t_b in [0.5, 1.3, 3.0]:
        assert alpha_rate_defect(general_fs, 0.0, t_b) < 1e-9


def test_hermite_form_matches_laguerre_form(general_fs):
    env = envelopes(general_fs)
    r = np.linspace(-2, 2, 9)
    for n in range(5):
        sign = (-1) ** n
        assert np.allclose(psi_lho_hermite(n, -1, env, r, 0.7), sign * psi_radial((n, -0.5), env, r, 0.7), atol=1e-12)
        assert np.allclose(psi_lho_hermite(n, +1, env, r, 0.7), sign * psi_radial((n, 0.5), env, r, 0.7), atol=1e-12)


def test_half_integer_shift_rule(static_env):
    r = np.linspace(-2, 2, 9)
    for n in range(4):
        odd = psi_lho_hermite(n, +1, static_env, r, 0.5)
        shifted = psi_lho_hermite(n + 0.5, -1, static_env, r, 0.5)
        assert np.allclose(odd, shifted, atol=1e-12)


def test_reduction_gives_oscillator_ground_state(static_env):
    p = static_env.params
    r = np.linspace(0.05, 2.5, 8)
    t = 0.6
    expected = (p.m * p.Omega / (math.pi * p.hbar)) ** 0.25 * np.exp(-p.m * p.Omega * r ** 2 / (2 * p.hbar)) \
        * np.exp(-0.5j * p.Omega * t)
    assert np.allclose(reduce_to_lho(0, -1, static_env, r, t), expected, atol=1e-12)


def test_reduction_u_factor_cancels(static_env):
    r = np.linspace(0.2, 2, 5)
    p = static_env.params
    for t in (0.1, 0.9):
        u = -p.Gamma * t
        bare = psi_radial((2, -0.5), static_env, r, t)
        assert np.allclose(np.sqrt(math.pi * r) * psi_full((2, -0.5), static_env, r, u, t), bare, atol=1e-13)


# ------------------------------------------------------------ inner product

@pytest.mark.parametrize("which", ["static", "general"])
@pytest.mark.parametrize("l", [1, 2, -0.5])
def test_orthonormality(which, l, static_env, general_fs):
    env = static_env if which == "static" else envelopes(general_fs)
    gram = np.array([[modified_inner_product((a, l), (b, l), env, 0.8) for b in range(6)] for a in range(6)])
    assert np.max(np.abs(gram - np.eye(6))) < 1e-8


def test_pairing_is_u_independent(general_fs):
    env = envelopes(general_fs)
    u = np.linspace(-2, 2, 41)
    prod = psi_star((1, 2), env, 0.9, u, 0.4) * psi_full((3, 2), env, 0.9, u, 0.4)
    assert np.max(np.abs(prod - prod[0])) < 1e-10 * abs(prod[0])


def test_mismatched_orders_diverge_on_full_domain(static_env):
    with pytest.raises(DivergentProductError):
        modified_inner_product((0, 1), (0, 2), static_env, 0.3, domain="full")
    same = modified_inner_product((1, 2), (1, 2), static_env, 0.3, domain="full", u_window=(0, math.pi))
    assert same == pytest.approx(1.0, abs=1e-8)


def test_j2_hermitian_under_pairing(static_env):
    """<psi | J2 phi> against <J2 psi | phi>, with (J2 psi)^(*) = (i/2) d_u psi^(*)."""
    t, us = 0.4, np.linspace(-0.6, 0.6, 13)
    rs = np.linspace(1e-3, 7, 1401)
    for a, b in [((1, 2), (3, 2)), ((0, -0.5), (2, -0.5)), ((2, 1), (2, 1))]:
        phi = lambda r, u: psi_full(b, static_env, r, u, t)
        star = lambda r, u: psi_star(a, static_env, r, u, t)
        R, U = np.meshgrid(rs, us, indexing="ij")
        left = star(R, U) * j2_apply(phi, R, U)
        right = -j2_apply(star, R, U) * phi(R, U)
        lhs = np.trapezoid(np.trapezoid(left * R, rs, axis=0), us)
        rhs = np.trapezoid(np.trapezoid(right * R, rs, axis=0), us)
        assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(lhs))


def test_completeness_mollifier(static_env):
    """2 sum_n psi*_n(r) psi_n(r') acts as a delta on a smooth test packet."""
    r = np.linspace(1e-4, 8, 4001)
    packet = np.exp(-((r - 1.6) / 0.35) ** 2)
    errs = []
    for N in (10, 30, 60):
        acc = np.zeros_like(r, dtype=complex)
        for n in range(N + 1):
            bra = psi_radial_star((n, 1), static_env, r, 0.5)
            ket = psi_radial((n, 1), static_env, r, 0.5)
            acc += ket * 2 * np.trapezoid(bra * packet, r)
        errs.append(np.max(np.abs(acc - packet)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


# ------------------------------------------------------------ spectral reconstruction

MEHLER_POINTS = [(0.8, 0.2, 1.1, -0.1, 1.0), (0.5, 0.0, 0.9, 0.3, 0.5), (1.2, 0.1, 0.7, 0.5, 1.8)]


@pytest.mark.parametrize("point", MEHLER_POINTS)
def test_mehler_reconstructs_static_kernel(point):
    fs = static_fs(make_params(1.0, 0.7, 2.3))
    ra, ua, rb, ub, dt = point
    kernel = kernel_hyperbolic(fs, 0.0, dt, ra, ua, rb, ub).amplitude
    res = mehler_reconstruct(fs, 0.0, dt, ra, ua, rb, ub, n_terms=60, l_terms=40)
    assert abs(res.value - kernel) < 1e-6 * abs(kernel)


def test_mehler_general_fs_and_past_caustic(general_fs):
    ra, ua, rb, ub = 0.8, 0.2, 1.1, -0.1
    for dt in (1.0, 2.5):
        kernel = kernel_hyperbolic(general_fs, 0.0, dt, ra, ua, rb, ub).amplitude
        res = mehler_reconstruct(general_fs, 0.0, dt, ra, ua, rb, ub)
        assert abs(res.value - kernel) < 1e-6 * abs(kernel)


def test_mehler_zero_truncation_is_single_term(static_env):
    fs = static_env.fs
    ra, ua, rb, ub, dt = 0.8, 0.2, 1.1, -0.1, 1.0
    res = mehler_reconstruct(fs, 0.0, dt, ra, ua, rb, ub, n_terms=0, l_terms=0)
    p = fs.params
    k2 = p.m * 2 * p.Omega / (p.hbar * 2)
    term = 1j / math.pi * k2 * np.exp(-1j * p.Omega * dt) * np.exp(-k2 / 2 * (ra ** 2 + rb ** 2))
    assert abs(res.value - term) < 1e-12
