"""Classical machinery: fundamental systems, Wronskian, boundary determinant,
B-coefficients, Cramer-rule trajectories, the classical action and the
hyperbolic shift ``alpha``.

Every fundamental system exposes a *jet*: an array of shape ``(3, 4, 2, ...)``
holding value, first and second derivative (axis 0) of the curves
``u1, u2, v1, v2`` (axis 1) in the rotated frame components (axis 2), with the
time grid broadcast on the trailing axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .model import SIGMA1, BatemanParams, dot, frame_transform, from_hyperbolic, wedge

__all__ = [
    "CausticError",
    "SingularSystemError",
    "AnchorViolationError",
    "FundamentalSystem",
    "BoundaryData",
    "BCoefficients",
    "static_fs",
    "custom_fs",
    "numerical_fs",
    "recombine",
    "reanchor",
    "to_xy_frame",
    "eom_residual",
    "wronskian",
    "boundary_matrix",
    "boundary_determinant",
    "normalized_determinant",
    "b_coefficients",
    "classical_trajectory",
    "classical_velocity",
    "classical_action",
    "canonical_momentum",
    "action_matrix",
    "alpha_factor",
    "CAUSTIC_TOL",
]

CURVES = ("u1", "u2", "v1", "v2")
# |D| * Omega^2 / |W| below this marks a focal configuration
CAUSTIC_TOL = 1.0e-10
ANCHOR_TOL = 1.0e-10
WRONSKIAN_TOL = 1.0e-12


class CausticError(ArithmeticError):
    """No unique classical orbit: the boundary determinant vanishes."""


class SingularSystemError(ArithmeticError):
    """The four curves are linearly dependent (vanishing Wronskian)."""


class AnchorViolationError(ValueError):
    """The v-curves do not vanish at the anchor time."""


JetFunction = Callable[[np.ndarray], np.ndarray]


class FundamentalSystem:
    """Four solution curves with value, velocity and acceleration on demand."""

    def __init__(self, params: BatemanParams, jet: JetFunction, anchor: float = 0.0,
                 kind: str = "closed-form-custom", label: str = ""):
        self.params = params
        self._jet = jet
        self.anchor = float(anchor)
        self.kind = kind
        self.label = label

    def __repr__(self):
        return f"FundamentalSystem(kind={self.kind!r}, anchor={self.anchor!r}, label={self.label!r})"

    def jet(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.asarray(self._jet(t), dtype=float)
        if out.shape[:3] != (3, 4, 2):
            raise ValueError(f"jet must have leading shape (3, 4, 2), got {out.shape}")
        return out

    def values(self, t) -> np.ndarray:
        return self.jet(t)[0]

    def derivatives(self, t) -> np.ndarray:
        return self.jet(t)[1]

    def matrix(self, t) -> np.ndarray:
        """2x4 matrix of curve values at a scalar time (rows: components)."""
        return self.values(float(t)).T

    def velocity_matrix(self, t) -> np.ndarray:
        return self.derivatives(float(t)).T


@dataclass(frozen=True)
class BoundaryData:
    t_a: float
    t_b: float
    x_a: np.ndarray
    x_b: np.ndarray

    def __post_init__(self):
        if not self.t_b > self.t_a:
            raise ValueError(f"need t_b > t_a, got t_a={self.t_a!r}, t_b={self.t_b!r}")
        object.__setattr__(self, "x_a", np.asarray(self.x_a, dtype=float).reshape(2))
        object.__setattr__(self, "x_b", np.asarray(self.x_b, dtype=float).reshape(2))

    @classmethod
    def hyperbolic(cls, t_a, t_b, r_a, u_a, r_b, u_b) -> "BoundaryData":
        return cls(t_a, t_b, from_hyperbolic(r_a, u_a), from_hyperbolic(r_b, u_b))

    @property
    def duration(self) -> float:
        return self.t_b - self.t_a


# ---------------------------------------------------------------- constructors

def static_fs(params: BatemanParams, anchor: float = 0.0) -> FundamentalSystem:
    """Closed-form system built from ``cos/sin(Omega s)`` times ``cosh/sinh(Gamma s)``.

    ``u1 = sqrt2 cos(Om s) (cosh Gs, -sinh Gs)``, ``u2 = sqrt2 cos(Om s) (sinh Gs, -cosh Gs)``
    and the v-curves likewise with ``sin``, where ``s = t - anchor``.
    """
    Om, G = params.Omega, params.Gamma
    r2 = math.sqrt(2.0)

    def jet(t):
        s = t - anchor
        c, sn = np.cos(Om * s), np.sin(Om * s)
        ch, sh = np.cosh(G * s), np.sinh(G * s)
        # scalar oscillating factors and their derivatives
        f = {"c": (c, -Om * sn, -Om * Om * c), "s": (sn, Om * c, -Om * Om * sn)}
        # vector hyperbolic factors: g, g', g''
        g_a = (np.array([ch, -sh]), G * np.array([sh, -ch]), G * G * np.array([ch, -sh]))
        g_b = (np.array([sh, -ch]), G * np.array([ch, -sh]), G * G * np.array([sh, -ch]))
        out = np.empty((3, 4, 2) + np.shape(t))
        for i, (fk, g) in enumerate((("c", g_a), ("c", g_b), ("s", g_a), ("s", g_b))):
            f0, f1, f2 = f[fk]
            out[0, i] = r2 * f0 * g[0]
            out[1, i] = r2 * (f1 * g[0] + f0 * g[1])
            out[2, i] = r2 * (f2 * g[0] + 2.0 * f1 * g[1] + f0 * g[2])
        return out

    return FundamentalSystem(params, jet, anchor=anchor, kind="closed-form-static", label="static")


def custom_fs(params: BatemanParams, jet: JetFunction, anchor: float = 0.0, label: str = "") -> FundamentalSystem:
    fs = FundamentalSystem(params, jet, anchor=anchor, kind="closed-form-custom", label=label)
    _check_anchor(fs)
    return fs


def _acceleration(params: BatemanParams, x, v):
    """Solve the equation of motion for the second derivative."""
    return -(params.gamma * np.einsum("ab,b...->a...", SIGMA1, v) + params.kappa * x) / params.m


def numerical_fs(params: BatemanParams, initial_values, initial_velocities, anchor: float = 0.0,
                 t_span: tuple[float, float] | None = None, rtol: float = 1e-13,
                 atol: float = 1e-14) -> FundamentalSystem:
    """Integrate four curves from Cauchy data at the anchor (DOP853, dense output).

    ``initial_values`` and ``initial_velocities`` have shape ``(4, 2)``; the
    last two value rows must vanish so that the v-curves are anchored.
    """
    x0 = np.asarray(initial_values, dtype=float).reshape(4, 2)
    v0 = np.asarray(initial_velocities, dtype=float).reshape(4, 2)
    if t_span is None:
        t_span = (anchor - 4.0 * params.period, anchor + 4.0 * params.period)
    lo, hi = t_span
    if not lo <= anchor <= hi:
        raise ValueError("anchor must lie inside t_span")

    def rhs(_, y):
        x = y[:8].reshape(4, 2).T
        v = y[8:].reshape(4, 2).T
        a = _acceleration(params, x, v)
        return np.concatenate([v.T.ravel(), a.T.ravel()])

    y0 = np.concatenate([x0.ravel(), v0.ravel()])
    branches = []
    for end in (lo, hi):
        if end != anchor:
            sol = solve_ivp(rhs, (anchor, end), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True)
            if not sol.success:
                raise RuntimeError(f"integration failed: {sol.message}")
            branches.append((min(anchor, end), max(anchor, end), sol.sol))

    def jet(t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        y = np.empty((16, flat.size))
        for k, tk in enumerate(flat):
            if tk < lo - 1e-12 or tk > hi + 1e-12:
                raise ValueError(f"time {tk!r} outside integrated span {t_span!r}")
            if tk == anchor:
                y[:, k] = y0
                continue
            for a, b, dense in branches:
                if a <= tk <= b:
                    y[:, k] = dense(tk)
                    break
        x = y[:8].reshape(4, 2, -1)
        v = y[8:].reshape(4, 2, -1)
        acc = np.stack([_acceleration(params, x[i], v[i]) for i in range(4)])
        out = np.stack([x, v, acc]).reshape((3, 4, 2) + t.shape)
        return out

    fs = FundamentalSystem(params, jet, anchor=anchor, kind="numerical", label="numerical")
    _check_anchor(fs)
    return fs


def recombine(fs: FundamentalSystem, coefficients) -> FundamentalSystem:
    """New curves ``new_i = sum_j C[i, j] old_j`` with the anchor preserved."""
    C = np.asarray(coefficients, dtype=float)
    if C.shape != (4, 4):
        raise ValueError("coefficients must be a 4x4 matrix")
    if abs(np.linalg.det(C)) < WRONSKIAN_TOL:
        raise SingularSystemError("recombination matrix is singular")

    def jet(t):
        return np.einsum("ij,kj...->ki...", C, fs.jet(t))

    new = FundamentalSystem(fs.params, jet, anchor=fs.anchor, kind="recombination", label=f"{fs.label}*C")
    new.coefficients = C
    new.parent = fs
    _check_anchor(new)
    wronskian(new)
    return new


def reanchor(fs: FundamentalSystem, t_a: float) -> FundamentalSystem:
    """Recombine so that the v-curves vanish at ``t_a`` while keeping ``W``."""
    if abs(t_a - fs.anchor) <= ANCHOR_TOL * max(1.0, abs(t_a)):
        return fs
    X = fs.matrix(t_a)
    _, _, vt = np.linalg.svd(X)
    null = vt[2:]
    C = np.zeros((4, 4))
    C[2:] = null
    C[:2] = np.eye(4)[:2]
    if abs(np.linalg.det(C)) < 1e-8:
        C[:2] = vt[:2]
    C[3] /= np.linalg.det(C)
    moved = recombine_unchecked(fs, C)
    moved.anchor = float(t_a)
    moved.kind = "recombination"
    _check_anchor(moved)
    return moved


def recombine_unchecked(fs: FundamentalSystem, C) -> FundamentalSystem:
    C = np.asarray(C, dtype=float)
    new = FundamentalSystem(fs.params, lambda t: np.einsum("ij,kj...->ki...", C, fs.jet(t)),
                            anchor=fs.anchor, kind="recombination", label=f"{fs.label}*C")
    new.coefficients = C
    new.parent = fs
    return new


def to_xy_frame(fs: FundamentalSystem) -> FundamentalSystem:
    """The same curves expressed in ``(x, y)`` components."""

    def jet(t):
        return np.moveaxis(frame_transform(np.moveaxis(fs.jet(t), 2, 0)), 0, 2)

    return FundamentalSystem(fs.params, jet, anchor=fs.anchor, kind="xy-frame", label=f"{fs.label}@xy")


def _check_anchor(fs: FundamentalSystem):
    vals = fs.values(fs.anchor)
    scale = max(1.0, float(np.abs(vals[:2]).max()))
    if np.abs(vals[2:]).max() > ANCHOR_TOL * scale:
        raise AnchorViolationError(
            f"v-curves do not vanish at anchor t={fs.anchor!r}: max |v| = {np.abs(vals[2:]).max():.3e}"
        )


# ------------------------------------------------------------------ invariants

def eom_residual(fs: FundamentalSystem, times) -> float:
    """Largest relative residual of ``m x'' + gamma sigma1 x' + kappa x`` over a grid."""
    p = fs.params
    j = fs.jet(np.asarray(times, dtype=float))
    res = p.m * j[2] + p.gamma * np.einsum("ab,ib...->ia...", SIGMA1, j[1]) + p.kappa * j[0]
    scale = p.kappa * np.linalg.norm(j[0], axis=1) + p.m * np.linalg.norm(j[2], axis=1)
    scale = np.maximum(scale, p.kappa * np.abs(j[0]).max())
    return float((np.linalg.norm(res, axis=1) / scale).max())


def _wronski_matrix(fs: FundamentalSystem, t: float) -> np.ndarray:
    j = fs.jet(float(t))
    return np.vstack([j[0].T, j[1].T])


def wronskian(fs: FundamentalSystem, t: float | None = None) -> float:
    """Determinant of stacked values over velocities; constant in time."""
    t = fs.anchor if t is None else t
    W = float(np.linalg.det(_wronski_matrix(fs, t)))
    if abs(W) < WRONSKIAN_TOL:
        raise SingularSystemError(f"vanishing Wronskian ({W!r})")
    return W


def boundary_matrix(fs: FundamentalSystem, t_a: float, t_b: float) -> np.ndarray:
    return np.vstack([fs.matrix(t_a), fs.matrix(t_b)])


def boundary_determinant(fs: FundamentalSystem, t_a: float, t_b: float) -> float:
    """The Cramer denominator ``D``; equals ``U_a V_b`` when anchored at ``t_a``."""
    if not t_b > t_a:
        raise ValueError("need t_b > t_a")
    return float(np.linalg.det(boundary_matrix(fs, t_a, t_b)))


def normalized_determinant(fs: FundamentalSystem, t_a: float, t_b: float) -> float:
    """Dimensionless ``D Omega^2 / W``; it is ``sin^2(Omega dt)`` for the static system."""
    return boundary_determinant(fs, t_a, t_b) * fs.params.Omega ** 2 / wronskian(fs)


def _solve_boundary(fs, t_a, t_b):
    M = boundary_matrix(fs, t_a, t_b)
    D = float(np.linalg.det(M))
    W = wronskian(fs)
    if abs(D * fs.params.Omega ** 2 / W) < CAUSTIC_TOL:
        raise CausticError(f"boundary determinant vanishes between t_a={t_a!r} and t_b={t_b!r}")
    return M, D


@dataclass
class BCoefficients:
    """Response of the classical orbit to unit boundary data, scaled by ``D``.

    ``value(t)[i, a]`` is ``B_{i+1}^{a+1}(t)``; same layout for ``derivative``.
    """

    fs: FundamentalSystem
    t_a: float
    t_b: float
    D: float
    U_a: float
    V_b: float
    W: float
    _green: np.ndarray

    def _apply(self, arr):
        # arr: (4 curves, 2 comps, ...) -> B (4 index, 2 comps, ...)
        return self.D * np.einsum("ja...,ji->ia...", arr, self._green)

    def value(self, t) -> np.ndarray:
        return self._apply(self.fs.values(t))

    def derivative(self, t) -> np.ndarray:
        return self._apply(self.fs.derivatives(t))


def b_coefficients(fs: FundamentalSystem, t_a: float, t_b: float) -> BCoefficients:
    if not t_b > t_a:
        raise ValueError("need t_b > t_a")
    M = boundary_matrix(fs, t_a, t_b)
    D = float(np.linalg.det(M))
    if D == 0.0:
        raise CausticError("boundary matrix is exactly singular")
    green = np.linalg.inv(M)
    anchored = reanchor(fs, t_a)
    ua = anchored.values(t_a)
    vb = anchored.values(t_b)
    return BCoefficients(fs, t_a, t_b, D, float(wedge(ua[0], ua[1])), float(wedge(vb[2], vb[3])),
                         wronskian(fs), green)


def _coefficients(fs, bd: BoundaryData):
    M, _ = _solve_boundary(fs, bd.t_a, bd.t_b)
    return np.linalg.solve(M, np.concatenate([bd.x_a, bd.x_b]))


def classical_trajectory(fs: FundamentalSystem, bd: BoundaryData, t) -> np.ndarray:
    """Orbit through ``x_a`` at ``t_a`` and ``x_b`` at ``t_b`` evaluated at ``t``."""
    c = _coefficients(fs, bd)
    return np.einsum("j,ja...->a...", c, fs.values(t))


def classical_velocity(fs: FundamentalSystem, bd: BoundaryData, t) -> np.ndarray:
    c = _coefficients(fs, bd)
    return np.einsum("j,ja...->a...", c, fs.derivatives(t))


def canonical_momentum(params: BatemanParams, x, xdot) -> np.ndarray:
    """Lower-index momenta ``dL/dxdot``: ``sigma3 (m xdot + (gamma/2) sigma1 x)``."""
    upper = params.m * np.asarray(xdot) + 0.5 * params.gamma * SIGMA1 @ np.asarray(x)
    return np.array([upper[0], -upper[1]])


def action_matrix(fs: FundamentalSystem, t_a: float, t_b: float) -> np.ndarray:
    """Symmetric 4x4 ``Q`` with ``S_cl = z.Q.z / 2`` for ``z = (x_a, x_b)``."""
    M, _ = _solve_boundary(fs, t_a, t_b)
    Minv = np.linalg.inv(M)
    g = np.diag([1.0, -1.0])
    Pa = np.hstack([np.eye(2), np.zeros((2, 2))])
    Pb = np.hstack([np.zeros((2, 2)), np.eye(2)])
    Q = fs.params.m * (Pb.T @ g @ fs.velocity_matrix(t_b) @ Minv - Pa.T @ g @ fs.velocity_matrix(t_a) @ Minv)
    return 0.5 * (Q + Q.T)


def classical_action(fs: FundamentalSystem, bd: BoundaryData) -> float:
    """``(m/2) [x . xdot]`` between the endpoints, indefinite metric."""
    c = _coefficients(fs, bd)
    ja = fs.jet(bd.t_a)
    jb = fs.jet(bd.t_b)
    xa, va = c @ ja[0], c @ ja[1]
    xb, vb = c @ jb[0], c @ jb[1]
    return 0.5 * fs.params.m * float(dot(xb, vb) - dot(xa, va))


def alpha_factor(fs: FundamentalSystem, t_a: float, t_b: float) -> complex:
    """``alpha = 1/2 log(B'_xx(t_b) / B'_yy(t_b))`` from the ``(x, y)`` frame coefficients.

    The principal logarithm is used; the ratio keeps a fixed sign along
    ``t_b``, so this branch is the continuous continuation from ``t_b -> t_a``.
    """
    _solve_boundary(fs, t_a, t_b)
    d = b_coefficients(to_xy_frame(fs), t_a, t_b).derivative(t_b)
    return complex(0.5 * np.log(complex(d[0, 0] / d[1, 1])))
