"""Physical parameters, coordinate frames and the indefinite-metric plane algebra.

Plane vectors live in the rotated frame ``(x1, x2)`` where the kinetic form
carries the metric ``diag(1, -1)``.  Functions accept anything array-like with
a leading axis of length 2, so grids of vectors broadcast naturally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BatemanParams",
    "HyperbolicPoint",
    "ParameterError",
    "NonPositiveParameter",
    "OverdampedError",
    "OutsideWedgeError",
    "make_params",
    "dot",
    "wedge",
    "to_hyperbolic",
    "from_hyperbolic",
    "frame_transform",
    "frame_transform_inverse",
    "METRIC",
    "SIGMA1",
]

METRIC = np.diag([1.0, -1.0])
SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
_SQRT2 = math.sqrt(2.0)


class ParameterError(ValueError):
    """Base class for rejected physical parameters."""


class NonPositiveParameter(ParameterError):
    pass


class OverdampedError(ParameterError):
    """Raised when the reduced frequency would not be real and positive."""


class OutsideWedgeError(ValueError):
    """Raised for points off the principal sheet ``x1 > |x2|``."""


@dataclass(frozen=True)
class BatemanParams:
    """Mass, damping, spring constant and action scale of the dual oscillator.

    ``Gamma`` (damping rate) and ``Omega`` (reduced frequency) are derived on
    construction; the constructor refuses the overdamped and critical regimes.
    """

    m: float
    gamma: float
    kappa: float
    hbar: float = 1.0
    Gamma: float = field(init=False)
    Omega: float = field(init=False)

    def __post_init__(self):
        for name in ("m", "kappa", "hbar"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise NonPositiveParameter(f"{name} must be positive, got {value!r}")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise NonPositiveParameter(f"gamma must be non-negative, got {self.gamma!r}")
        Gamma = self.gamma / (2.0 * self.m)
        omega_sq = self.kappa / self.m - Gamma**2
        if omega_sq <= 0:
            raise OverdampedError(
                f"kappa/m = {self.kappa / self.m!r} does not exceed Gamma^2 = {Gamma**2!r}"
            )
        object.__setattr__(self, "Gamma", Gamma)
        object.__setattr__(self, "Omega", math.sqrt(omega_sq))

    @property
    def period(self) -> float:
        """Conjugate-point spacing ``pi / Omega``."""
        return math.pi / self.Omega

    def replace(self, **changes) -> "BatemanParams":
        base = {"m": self.m, "gamma": self.gamma, "kappa": self.kappa, "hbar": self.hbar}
        base.update(changes)
        return BatemanParams(**base)

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "hbar": self.hbar,
            "Gamma": self.Gamma,
            "Omega": self.Omega,
        }


def make_params(m: float = 1.0, gamma: float = 0.0, kappa: float = 1.0, hbar: float = 1.0) -> BatemanParams:
    return BatemanParams(float(m), float(gamma), float(kappa), float(hbar))


def dot(a, b):
    """Indefinite dot product ``a1*b1 - a2*b2``."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[0] * b[0] - a[1] * b[1]


def wedge(a, b):
    """Antisymmetric product with lowered indices, ``a2*b1 - a1*b2``.

    This is minus the column determinant ``det[a b]``.  With this sign the
    envelope ``v1 ^ v2`` of the static fundamental system is non-negative.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    return a[1] * b[0] - a[0] * b[1]


@dataclass(frozen=True)
class HyperbolicPoint:
    r: float
    u: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"radial coordinate must be non-negative, got {self.r!r}")

    def to_cartesian(self) -> np.ndarray:
        return from_hyperbolic(self.r, self.u)


def to_hyperbolic(x) -> HyperbolicPoint:
    """Map a point with ``x1 > |x2|`` to ``(r, u)``."""
    x1, x2 = (float(c) for c in np.asarray(x, dtype=float))
    if x1 == 0.0 and x2 == 0.0:
        return HyperbolicPoint(0.0, 0.0)
    if x1 <= 0 or abs(x2) >= x1:
        raise OutsideWedgeError(f"point ({x1!r}, {x2!r}) is not on the principal sheet")
    r = math.sqrt((x1 - x2) * (x1 + x2))
    u = math.atanh(x2 / x1)
    return HyperbolicPoint(r, u)


def from_hyperbolic(r, u) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    return np.array([r * np.cosh(u), r * np.sinh(u)])


def frame_transform(x_rot) -> np.ndarray:
    """Rotated ``(x1, x2)`` components to the original ``(x, y)`` pair."""
    x_rot = np.asarray(x_rot, dtype=float)
    return np.array([(x_rot[0] + x_rot[1]) / _SQRT2, (x_rot[0] - x_rot[1]) / _SQRT2])


def frame_transform_inverse(x_xy) -> np.ndarray:
    # the 45 degree map is its own inverse
    return frame_transform(x_xy)
