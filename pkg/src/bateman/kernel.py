"""Propagator assembly: phase-space flow, focal points, the fluctuation factor
and the kernel in Cartesian and hyperbolic coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq, minimize_scalar
from scipy.special import roots_legendre

from .classical import (
    BoundaryData,
    CausticError,
    FundamentalSystem,
    action_matrix,
    alpha_factor,
    b_coefficients,
    boundary_determinant,
    normalized_determinant,
    wronskian,
    CAUSTIC_TOL,
)
from .model import BatemanParams, SIGMA1

__all__ = [
    "SymplecticFlow",
    "CausticRecord",
    "FluctuationFactor",
    "KernelValue",
    "generator",
    "symplectic_flow",
    "symplectic_flow_closed_form",
    "detect_caustics",
    "morse_index",
    "fluctuation_factor",
    "van_vleck_factor",
    "kernel_cartesian",
    "kernel_grid",
    "kernel_hyperbolic",
    "delta_limit_check",
    "composition_check",
    "schrodinger_residual_kernel",
    "bateman_hamiltonian_cartesian",
]

SIGMA3 = np.diag([1.0, -1.0])
J4 = np.block([[np.zeros((2, 2)), -np.eye(2)], [np.eye(2), np.zeros((2, 2))]])
# grid density for the focal-point scan, in samples per half period
_SCAN_PER_PERIOD = 64
_RANK_TOL = 1.0e-8
# kernel evaluations this close to a focal time (in periods) are refused
CAUSTIC_GUARD = 1.0e-6


@dataclass(frozen=True)
class SymplecticFlow:
    """Linear map ``(p_a, x_a) -> (p_b, x_b)`` with lower-index momenta."""

    matrix: np.ndarray
    t_a: float
    t_b: float

    @property
    def S1(self) -> np.ndarray:
        """``d x_b / d p_a``."""
        return self.matrix[2:, :2]

    @property
    def S2(self) -> np.ndarray:
        """``d x_b / d x_a``."""
        return self.matrix[2:, 2:]

    def symplectic_residual(self) -> float:
        S = self.matrix
        return float(np.abs(S.T @ J4 @ S - J4).max())


def generator(params: BatemanParams) -> np.ndarray:
    """Constant Hamiltonian matrix acting on ``z = (p1, p2, x1, x2)``."""
    g = params.gamma / (2.0 * params.m)
    return np.block([
        [g * SIGMA1, -params.m * params.Omega ** 2 * SIGMA3],
        [SIGMA3 / params.m, -g * SIGMA1],
    ])


def symplectic_flow(params: BatemanParams, t_a: float, t_b: float) -> SymplecticFlow:
    if t_b < t_a:
        raise ValueError("need t_b >= t_a")
    return SymplecticFlow(expm((t_b - t_a) * generator(params)), t_a, t_b)


def symplectic_flow_closed_form(params: BatemanParams, t_a: float, t_b: float) -> SymplecticFlow:
    """Product of the commuting rotation and boost factors."""
    dt = t_b - t_a
    m, Om, G = params.m, params.Omega, params.Gamma
    c, s = math.cos(Om * dt), math.sin(Om * dt)
    rot = np.block([[c * np.eye(2), -m * Om * s * SIGMA3], [s / (m * Om) * SIGMA3, c * np.eye(2)]])
    boost_p = math.cosh(G * dt) * np.eye(2) + math.sinh(G * dt) * SIGMA1
    boost_x = math.cosh(G * dt) * np.eye(2) - math.sinh(G * dt) * SIGMA1
    boost = np.block([[boost_p, np.zeros((2, 2))], [np.zeros((2, 2)), boost_x]])
    return SymplecticFlow(rot @ boost, t_a, t_b)


@dataclass(frozen=True)
class CausticRecord:
    times: tuple[float, ...]
    multiplicities: tuple[int, ...]

    @property
    def morse_index(self) -> int:
        return int(sum(self.multiplicities))

    def rows(self):
        return list(zip(self.times, self.multiplicities))


def _smallest_singular(params, t_a, t):
    return np.linalg.svd(symplectic_flow(params, t_a, t).S1, compute_uv=False)[-1]


def _refine_dip(params, lo, mid, hi, period):
    # project S1 onto the singular pair of the dip: the projection is smooth and
    # changes sign through the focal time, unlike the kinked singular value
    U, _, Vt = np.linalg.svd(symplectic_flow(params, 0.0, mid).S1)

    def signed(t):
        return float(U[:, -1] @ symplectic_flow(params, 0.0, t).S1 @ Vt[-1])

    f_lo, f_hi = signed(lo), signed(hi)
    if f_lo * f_hi < 0:
        return float(brentq(signed, lo, hi, xtol=1e-15 * period, rtol=4 * np.finfo(float).eps))
    res = minimize_scalar(lambda t: _smallest_singular(params, 0.0, t), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-13 * period, "maxiter": 500})
    return float(res.x)


@lru_cache(maxsize=256)
def _focal_catalogue(params: BatemanParams, horizon_periods: int) -> tuple[tuple[float, int], ...]:
    # the flow is time-translation invariant, so focal times are tabulated per
    # elapsed time and shared by all intervals of the same parameters
    period = params.period
    horizon = horizon_periods * period
    n = _SCAN_PER_PERIOD * horizon_periods + 1
    grid = np.linspace(0.0, horizon, n)
    smin = np.array([_smallest_singular(params, 0.0, t) for t in grid])
    scale = max(1.0 / (params.m * params.Omega), float(
        np.linalg.svd(symplectic_flow(params, 0.0, 0.5 * period).S1, compute_uv=False)[0]))
    found = []
    for k in range(1, n - 1):
        if smin[k] <= smin[k - 1] and smin[k] <= smin[k + 1]:
            t_star = _refine_dip(params, grid[k - 1], grid[k], grid[k + 1], period)
            sv = np.linalg.svd(symplectic_flow(params, 0.0, t_star).S1, compute_uv=False)
            if sv[-1] < _RANK_TOL * scale:
                mult = int(np.sum(sv < math.sqrt(_RANK_TOL) * scale))
                if not found or t_star - found[-1][0] > 1e-9 * period:
                    found.append((t_star, mult))
    return tuple(found)


def detect_caustics(params: BatemanParams, t_a: float, t_b: float) -> CausticRecord:
    """Focal times in ``(t_a, t_b]`` and their multiplicities (rank loss of ``S1``).

    ``det S1`` has double zeros here and does not change sign, so the scan
    brackets dips of the smallest singular value and refines each one by
    root-finding on the projection of ``S1`` onto its near-null singular pair.
    """
    if not t_b > t_a:
        raise ValueError("need t_b > t_a")
    dt = t_b - t_a
    period = params.period
    horizon = int(math.ceil(dt / period)) + 1
    tol = 1e-9 * period
    times, mults = [], []
    for tau, mult in _focal_catalogue(params, horizon):
        if tau <= dt + tol:
            times.append(t_a + tau)
            mults.append(mult)
    return CausticRecord(tuple(times), tuple(mults))


def morse_index(params: BatemanParams, t_a: float, t_b: float) -> int:
    return detect_caustics(params, t_a, t_b).morse_index


def _check_not_at_caustic(params, t_a, t_b):
    rec = detect_caustics(params, t_a, t_b + 2 * CAUSTIC_GUARD * params.period)
    for tau in rec.times:
        if abs(tau - t_b) < CAUSTIC_GUARD * params.period:
            raise CausticError(f"t_b={t_b!r} lies on a focal time ({tau!r})")
    return detect_caustics(params, t_a, t_b).morse_index if t_b > t_a else 0


@dataclass(frozen=True)
class FluctuationFactor:
    magnitude: float
    morse_index: int

    @property
    def phase(self) -> complex:
        return complex(np.exp(-0.5j * math.pi * self.morse_index))

    @property
    def value(self) -> complex:
        return self.magnitude * self.phase


def fluctuation_factor(fs: FundamentalSystem, t_a: float, t_b: float) -> FluctuationFactor:
    """``(m / 2 pi hbar) sqrt(|W/D|)`` with the Morse index of ``(t_a, t_b]``."""
    p = fs.params
    if abs(normalized_determinant(fs, t_a, t_b)) < CAUSTIC_TOL:
        raise CausticError("boundary determinant vanishes")
    n = _check_not_at_caustic(p, t_a, t_b)
    W = wronskian(fs)
    D = boundary_determinant(fs, t_a, t_b)
    return FluctuationFactor(p.m / (2 * math.pi * p.hbar) * math.sqrt(abs(W / D)), n)


def van_vleck_factor(fs: FundamentalSystem, bd: BoundaryData, step: float = 1e-4) -> float:
    """``(1/2 pi hbar) sqrt|det d2S/dx_a dx_b|`` by central differences of the action."""
    from .classical import classical_action

    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            acc = 0.0
            for si in (1, -1):
                for sj in (1, -1):
                    xa = bd.x_a.copy()
                    xb = bd.x_b.copy()
                    xa[i] += si * step
                    xb[j] += sj * step
                    acc += si * sj * classical_action(fs, BoundaryData(bd.t_a, bd.t_b, xa, xb))
            H[i, j] = acc / (4 * step * step)
    return math.sqrt(abs(np.linalg.det(H))) / (2 * math.pi * fs.params.hbar)


@dataclass(frozen=True)
class KernelValue:
    amplitude: complex
    bare: complex
    morse_index: int
    branch: dict = field(default_factory=dict)

    def __complex__(self):
        return complex(self.amplitude)


def kernel_grid(fs: FundamentalSystem, t_a: float, t_b: float, x_a, x_b) -> np.ndarray:
    """Vectorised kernel: ``x_a`` and ``x_b`` broadcast with leading axis 2."""
    F = fluctuation_factor(fs, t_a, t_b)
    Q = action_matrix(fs, t_a, t_b)
    xa = np.asarray(x_a, dtype=float)
    xb = np.asarray(x_b, dtype=float)
    xa, xb = np.broadcast_arrays(xa, xb)
    z = np.concatenate([xa, xb], axis=0)
    S = 0.5 * np.sum(z * np.tensordot(Q, z, axes=1), axis=0)
    return F.value * np.exp(1j * S / fs.params.hbar)


def kernel_cartesian(fs: FundamentalSystem, bd: BoundaryData) -> KernelValue:
    """``exp(-i pi n/2) F exp(i S_cl / hbar)`` with the Morse index ``n`` of the interval."""
    from .classical import classical_action

    F = fluctuation_factor(fs, bd.t_a, bd.t_b)
    S = classical_action(fs, bd)
    bare = F.magnitude * np.exp(1j * S / fs.params.hbar)
    return KernelValue(complex(F.phase * bare), complex(bare), F.morse_index)


def kernel_hyperbolic(fs: FundamentalSystem, t_a: float, t_b: float, r_a: float, u_a: float,
                      r_b: float, u_b: float) -> KernelValue:
    """Kernel through ``cosh(du - alpha)`` with ``du = u_b - u_a``.

    ``alpha`` comes from the ``(x, y)`` frame ratio and is fixed only modulo
    ``i pi``; the branch shift making ``sqrt(W/D) e^alpha`` equal to the
    rotated-frame combination of B-derivatives is recorded in ``branch``.
    """
    if r_a < 0 or r_b < 0:
        raise ValueError("radial coordinates must be non-negative")
    p = fs.params
    F = fluctuation_factor(fs, t_a, t_b)
    B = b_coefficients(fs, t_a, t_b)
    D, W = B.D, B.W
    dD_a = 2.0 * B.derivative(t_a)[0, 0]
    dD_b = 2.0 * B.derivative(t_b)[2, 0]
    root = np.sqrt(complex(W / D))
    db = B.derivative(t_b)
    alpha = alpha_factor(fs, t_a, t_b)
    alpha_eff = complex(np.log((db[0, 0] + db[0, 1]) / (D * root)))
    shift = (alpha_eff - alpha) / (1j * math.pi)
    k = round(shift.real)
    if abs(shift - k) > 1e-6:
        raise ArithmeticError(f"alpha branches disagree beyond i*pi multiples: shift={shift!r}")
    du = u_b - u_a
    phase = (-1j * p.m / (4.0 * D * p.hbar)) * (dD_a * r_a ** 2 - dD_b * r_b ** 2)
    phase += (1j * p.m / p.hbar) * root * r_a * r_b * np.cosh(du - alpha - 1j * math.pi * k)
    bare = F.magnitude * np.exp(phase)
    return KernelValue(complex(F.phase * bare), complex(bare), F.morse_index,
                       {"alpha": alpha, "ipi_shift": int(k)})


def bateman_hamiltonian_cartesian(params: BatemanParams, psi, x1, x2, h: float) -> np.ndarray:
    """Apply the quantum Hamiltonian by fourth-order central differences.

    ``psi(x1, x2)`` must accept arrays.
    """
    m, hb, G, Om = params.m, params.hbar, params.Gamma, params.Omega

    def d1(f, axis_shift):
        return (-f(2 * h * axis_shift) + 8 * f(h * axis_shift) - 8 * f(-h * axis_shift) + f(-2 * h * axis_shift)) / (12 * h)

    def d2(f, axis_shift):
        return (-f(2 * h * axis_shift) + 16 * f(h * axis_shift) - 30 * f(0 * axis_shift)
                + 16 * f(-h * axis_shift) - f(-2 * h * axis_shift)) / (12 * h * h)

    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])

    def shifted(v):
        return psi(x1 + v[0], x2 + v[1])

    lap = d2(shifted, e1) - d2(shifted, e2)
    du = x2 * d1(shifted, e1) + x1 * d1(shifted, e2)
    pot = 0.5 * m * Om ** 2 * (x1 ** 2 - x2 ** 2) * psi(x1, x2)
    return -hb ** 2 / (2 * m) * lap + 1j * hb * G * du + pot


def schrodinger_residual_kernel(fs: FundamentalSystem, t_a: float, x_a, t_b: float, points,
                                h: float = 2e-3, ht: float = 2e-3) -> float:
    """Max relative residual of ``(i hbar d/dt_b - H) K`` over endpoint samples."""
    p = fs.params
    xa = np.asarray(x_a, dtype=float).reshape(2, 1)
    worst = 0.0
    for x1, x2 in np.asarray(points, dtype=float):

        def K_at(tb):
            return lambda a, b: kernel_grid(fs, t_a, tb, xa, np.array([np.atleast_1d(a), np.atleast_1d(b)]))[0]

        dt = (-K_at(t_b + 2 * ht)(x1, x2) + 8 * K_at(t_b + ht)(x1, x2)
              - 8 * K_at(t_b - ht)(x1, x2) + K_at(t_b - 2 * ht)(x1, x2)) / (12 * ht)
        lhs = 1j * p.hbar * dt
        rhs = bateman_hamiltonian_cartesian(p, K_at(t_b), np.atleast_1d(x1), np.atleast_1d(x2), h)
        worst = max(worst, float(np.abs(lhs - rhs).max() / (np.abs(lhs).max() + np.abs(rhs).max())))
    return worst


def _gauss_box(center, half_width, nodes):
    xg, wg = roots_legendre(nodes)
    return center + half_width * xg, half_width * wg


def delta_limit_check(fs: FundamentalSystem, t_a: float, x_b, packet_center, width: float = 0.5,
                      steps=(0.1, 0.01, 0.001), nodes: int | None = None) -> list[float]:
    """Deviation ``|int K g - g(x_b)|`` for shrinking elapsed times ``steps / Omega``.

    ``g`` is the Gaussian ``exp(-|x - c|^2 / (2 w^2))``; the integral runs over a
    tensor Gauss-Legendre box of six widths around the packet centre.
    """
    p = fs.params
    c = np.asarray(packet_center, dtype=float)
    xb = np.asarray(x_b, dtype=float).reshape(2, 1, 1)
    target = math.exp(-float(np.sum((np.asarray(x_b, dtype=float) - c) ** 2)) / (2 * width ** 2))
    out = []
    for s in steps:
        dt = s / p.Omega
        span = 6.0 * width
        # enough nodes to resolve the quadratic phase at the box edge
        n = nodes or int(min(6000, max(200, 2.5 * p.m * (2 * span) ** 2 / (p.hbar * dt * math.pi))))
        g1, w1 = _gauss_box(c[0], span, n)
        g2, w2 = _gauss_box(c[1], span, n)
        total = 0.0 + 0.0j
        for start in range(0, n, 256):
            X1 = g1[start:start + 256, None]
            X2 = g2[None, :]
            xa = np.array(np.broadcast_arrays(X1, X2))
            K = kernel_grid(fs, t_a, t_a + dt, xa, xb)
            g = np.exp(-((X1 - c[0]) ** 2 + (X2 - c[1]) ** 2) / (2 * width ** 2))
            total += np.sum(w1[start:start + 256, None] * w2[None, :] * K * g)
        out.append(abs(total - target))
    return out


def composition_check(fs: FundamentalSystem, t_a: float, t_m: float, t_b: float, x_a, x_b,
                      dampings=(0.05, 0.1, 0.2, 0.4), nodes: int = 500, edge_decay: float = 30.0) -> float:
    """Relative mismatch of ``int K(b;m) K(m;a) dx_m`` against ``K(b;a)``.

    The pure-phase integrand is tamed by ``exp(-eps |x_m|^2)`` on a box where
    the factor has decayed to ``exp(-edge_decay)``.  The regulated integral is
    analytic in ``eps``, so a polynomial fit through the damping ladder is
    extrapolated to ``eps = 0``.
    """
    xa = np.asarray(x_a, dtype=float).reshape(2, 1, 1)
    xb = np.asarray(x_b, dtype=float).reshape(2, 1, 1)
    values = []
    for eps in dampings:
        g, w = _gauss_box(0.0, math.sqrt(edge_decay / eps), nodes)
        X1, X2 = np.meshgrid(g, g, indexing="ij")
        xm = np.array([X1, X2])
        integrand = kernel_grid(fs, t_m, t_b, xm, xb) * kernel_grid(fs, t_a, t_m, xa, xm)
        values.append(np.sum(np.outer(w, w) * integrand * np.exp(-eps * (X1 ** 2 + X2 ** 2))))
    coeffs = np.polyfit(np.asarray(dampings), np.asarray(values), len(dampings) - 1)
    direct = kernel_grid(fs, t_a, t_b, xa, xb)[0, 0]
    return float(abs(np.polyval(coeffs, 0.0) - direct) / abs(direct))
