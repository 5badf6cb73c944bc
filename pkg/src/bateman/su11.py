"""Truncated two-mode Fock space realization of the SU(1,1) ladder algebra.

The basis is ``|n_A, n_B>`` with ``0 <= n_A, n_B <= n_max``, flattened as
``n_A * (n_max + 1) + n_B``.  Operator identities only hold away from the
truncation edge, so every residual is measured on a region that keeps a
configurable boundary shell out of play.

States of the non-unitary representation (``exp(+-pi/2 J_1)|j,m>``) are not
normalizable: their coefficients grow along the ``J_+`` chain.  They are
compared on the low-excitation window ``n_A + n_B <= n_max // 2`` with
fidelities, never norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import comb, gammaln

from .model import BatemanParams

__all__ = [
    "TruncationError",
    "FockSpace",
    "AlgebraElements",
    "RepresentationState",
    "SqueezedDispersions",
    "CoherentExpansion",
    "BCHResult",
    "build_fock",
    "algebra_residuals",
    "fock_labels",
    "nominal_labels",
    "stationary_from_nominal",
    "basis_ket",
    "nonunitary_state",
    "stationary_state",
    "polynomial_state",
    "j2_eigen_residual",
    "j2_full_residual",
    "casimir_residual",
    "window_fidelity",
    "bch_check",
    "doublet_residual",
    "squeezed_vacuum_dispersions",
    "time_reversal",
    "modified_product",
    "coherent_expansion_check",
]

TAIL_TOL = 1e-6


class TruncationError(ArithmeticError):
    """The Fock cutoff is too small for the requested state."""


@dataclass(frozen=True, eq=False)
class FockSpace:
    n_max: int
    shell: int
    n_a: np.ndarray
    n_b: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def dim(self) -> int:
        return (self.n_max + 1) ** 2

    @property
    def Ad(self) -> np.ndarray:
        return self.A.T

    @property
    def Bd(self) -> np.ndarray:
        return self.B.T

    def index(self, n_a: int, n_b: int) -> int:
        if not (0 <= n_a <= self.n_max and 0 <= n_b <= self.n_max):
            raise TruncationError(f"|{n_a},{n_b}> lies outside n_max={self.n_max}")
        return n_a * (self.n_max + 1) + n_b

    def ket(self, n_a: int, n_b: int) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.index(n_a, n_b)] = 1.0
        return v

    @property
    def interior(self) -> np.ndarray:
        edge = self.n_max - self.shell
        return (self.n_a <= edge) & (self.n_b <= edge)

    def window(self, total: int | None = None) -> np.ndarray:
        return (self.n_a + self.n_b) <= (self.n_max // 2 if total is None else total)


@dataclass(eq=False)
class AlgebraElements:
    J_plus: np.ndarray
    J_minus: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    J3: np.ndarray
    casimir: np.ndarray
    parity: np.ndarray
    _rotations: dict = field(default_factory=dict, repr=False)

    def hamiltonian(self, params: BatemanParams) -> np.ndarray:
        return 2 * params.hbar * (params.Omega * self.casimir - params.Gamma * self.J2)

    def rotation(self, sign: int) -> np.ndarray:
        """``exp(sign * pi/2 * J_1)`` by scaling and squaring, cached per sign."""
        if sign not in self._rotations:
            self._rotations[sign] = expm(sign * 0.5 * math.pi * self.J1)
        return self._rotations[sign]


@lru_cache(maxsize=8)
def build_fock(n_max: int, shell: int = 2) -> tuple[FockSpace, AlgebraElements]:
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    a = np.diag(np.sqrt(np.arange(1.0, n_max + 1)), 1)
    eye = np.eye(n_max + 1)
    A, B = np.kron(a, eye), np.kron(eye, a)
    counts = np.arange(n_max + 1)
    n_a, n_b = np.repeat(counts, n_max + 1), np.tile(counts, n_max + 1)
    space = FockSpace(n_max, shell, n_a, n_b, A, B)
    Jp, Jm = A.T @ B.T, A @ B
    alg = AlgebraElements(
        J_plus=Jp,
        J_minus=Jm,
        J1=0.5 * (Jp + Jm),
        J2=-0.5j * (Jp - Jm),
        J3=np.diag(0.5 * (n_a + n_b + 1.0)),
        casimir=np.diag(0.5 * (n_a - n_b).astype(float)),
        parity=np.diag((-1.0) ** n_a),
    )
    return space, alg


def _comm(x, y):
    return x @ y - y @ x


def _interior_norm(space: FockSpace, M: np.ndarray) -> float:
    return float(np.max(np.abs(M[:, space.interior]))) if M.size else 0.0


def algebra_residuals(space: FockSpace, alg: AlgebraElements, params: BatemanParams | None = None) -> dict:
    """Largest interior matrix element of each identity's defect."""
    A, B, Ad, Bd = space.A, space.B, space.Ad, space.Bd
    one = np.eye(space.dim)
    J1, J2, J3, Jp, Jm, C = alg.J1, alg.J2, alg.J3, alg.J_plus, alg.J_minus, alg.casimir
    out = {
        "[A,A+]-1": _comm(A, Ad) - one,
        "[B,B+]-1": _comm(B, Bd) - one,
        "[A,B]": _comm(A, B),
        "[A,B+]": _comm(A, Bd),
        "[J+,J-]+2J3": _comm(Jp, Jm) + 2 * J3,
        "[J3,J+]-J+": _comm(J3, Jp) - Jp,
        "[J3,J-]+J-": _comm(J3, Jm) + Jm,
        "[J1,J2]+iJ3": _comm(J1, J2) + 1j * J3,
        "[J3,J2]+iJ1": _comm(J3, J2) + 1j * J1,
        "[J1,J3]+iJ2": _comm(J1, J3) + 1j * J2,
        "C^2-(J3^2-J2^2-J1^2+1/4)": C @ C - (J3 @ J3 - J2 @ J2 - J1 @ J1 + 0.25 * one),
    }
    if params is not None:
        H = alg.hamiltonian(params)
        out["[C,H]"] = _comm(C, H)
        out["[J2,H]"] = _comm(J2, H)
    return {name: _interior_norm(space, M) for name, M in out.items()}


# ---------------------------------------------------------------- labels

def nominal_labels(n: int, l: int) -> tuple[float, float]:
    """``(j, m)`` attached to ``psi^s_{n,l}`` by the nominal identification (violates m >= |j| for (0, 1))."""
    if l >= 1:
        return n + l / 2 + 0.5, l / 2 - 0.5
    if l <= -1:
        return n + l / 2 + 0.5, -l / 2 - 0.5
    raise ValueError("l must be a nonzero integer")


def stationary_from_nominal(j: float, m: float, sign: int) -> tuple[int, int]:
    """Inverse of :func:`nominal_labels` for the ``+`` and ``-`` families."""
    if sign > 0:
        return int(round(j - m - 1)), int(round(2 * m + 1))
    return int(round(j + m)), int(round(-2 * m - 1))


def fock_labels(n: int, l: int) -> tuple[float, float, int]:
    """Basis labels ``(j, m)`` and family sign realizing ``psi^s_{n,l}`` on Fock space.

    ``m`` follows from the ``J_2`` eigenvalue ``i l / 2``.  ``j`` is fixed by
    the exponents of the polynomial form for ``l >= 1`` and by the
    time-reversal image ``(n, l) -> (n + l, -l)`` for ``l <= -1``; both
    cases read ``j = (2n + l + 1)/2 - |l|``.
    """
    if l == 0 or int(l) != l:
        raise ValueError("l must be a nonzero integer")
    m = (abs(l) - 1) / 2
    j = (2 * n + l + 1) / 2 - abs(l)
    if abs(j) > m:
        lo, hi = (0, l - 1) if l > 0 else (-l, -2 * l - 1)
        raise ValueError(f"(n,l)=({n},{l}) has no Fock realization; need {lo} <= n <= {hi}")
    return j, m, 1 if l > 0 else -1


def basis_ket(space: FockSpace, j: float, m: float) -> np.ndarray:
    n_a, n_b = j + m, m - j
    if m < abs(j) or n_a != int(n_a) or n_b != int(n_b):
        raise ValueError(f"|j={j}, m={m}> is not a Fock state (need m >= |j|, j+m integer)")
    return space.ket(int(n_a), int(n_b))


# ---------------------------------------------------------------- states

@dataclass(frozen=True, eq=False)
class RepresentationState:
    vector: np.ndarray
    j: float
    m: float
    sign: int
    truncation: float
    n_max: int


def window_fidelity(space: FockSpace, x: np.ndarray, y: np.ndarray, total: int | None = None) -> float:
    w = space.window(total)
    xw, yw = x[w], y[w]
    return float(abs(np.vdot(xw, yw)) ** 2 / (np.vdot(xw, xw).real * np.vdot(yw, yw).real))


def _truncation_sensitivity(space, j, m, sign, vector) -> float:
    small, alg_small = build_fock(space.n_max - 4, space.shell)
    coarse = alg_small.rotation(sign) @ basis_ket(small, j, m)
    keep_small = small.window()
    rows = np.array([space.index(a, b) for a, b in zip(small.n_a[keep_small], small.n_b[keep_small])])
    fine = vector[rows]
    return float(np.linalg.norm(fine - coarse[keep_small]) / np.linalg.norm(fine))


def nonunitary_state(space: FockSpace, alg: AlgebraElements, j: float, m: float, sign: int,
                     tail_tol: float | None = TAIL_TOL) -> RepresentationState:
    """``exp(sign pi/2 J_1)|j, m>`` on the truncated space.

    The truncation diagnostic is the relative change of the windowed
    coefficients against the same construction with ``n_max - 4``.
    """
    sign = 1 if sign > 0 else -1
    vec = alg.rotation(sign) @ basis_ket(space, j, m)
    tail = _truncation_sensitivity(space, j, m, sign, vec) if space.n_max >= 8 else float("inf")
    if tail_tol is not None and tail > tail_tol:
        raise TruncationError(f"truncation sensitivity {tail:.2e} exceeds {tail_tol:.0e} at n_max={space.n_max}")
    return RepresentationState(vec, j, m, sign, tail, space.n_max)


def stationary_state(space, alg, n: int, l: int, tail_tol: float | None = TAIL_TOL) -> RepresentationState:
    j, m, sign = fock_labels(n, l)
    return nonunitary_state(space, alg, j, m, sign, tail_tol)


def _exp_raise(space, alg, v, z=1.0):
    """``exp(z J_+) v``; ``J_+`` is nilpotent on the truncated space so the series ends."""
    out, term = v.astype(complex), v.astype(complex)
    for k in range(1, 2 * space.n_max + 2):
        term = z * (alg.J_plus @ term) / k
        if not term.any():
            break
        out = out + term
    return out


def polynomial_state(space, alg, n: int, l: int) -> np.ndarray:
    """``(c/sqrt 2)(A+ + B)^n (B+ + A)^(l-n-1) exp(J_+)|0,0>`` for ``l >= 1``."""
    if l < 1 or not 0 <= n <= l - 1:
        raise ValueError("polynomial form needs l >= 1 and 0 <= n <= l - 1")
    v = _exp_raise(space, alg, space.ket(0, 0))
    raise_a, raise_b = space.Ad + space.B, space.Bd + space.A
    for _ in range(l - n - 1):
        v = raise_b @ v
    for _ in range(n):
        v = raise_a @ v
    norm = math.exp(-0.5 * (gammaln(n + 1) + gammaln(l - n) + (l - 1) * math.log(2)))
    return norm / math.sqrt(2) * v


def j2_eigen_residual(space, alg, state: RepresentationState, total: int | None = None) -> float:
    """``||J_2 psi - i sign (m + 1/2) psi|| / ||psi||`` on the low-excitation window."""
    w = space.window(total)
    r = alg.J2 @ state.vector - 1j * state.sign * (state.m + 0.5) * state.vector
    return float(np.linalg.norm(r[w]) / np.linalg.norm(state.vector[w]))


def j2_full_residual(alg, state: RepresentationState) -> float:
    """Same residual over the whole truncated space; bounded below by 1 (see notes)."""
    r = alg.J2 @ state.vector - 1j * state.sign * (state.m + 0.5) * state.vector
    return float(np.linalg.norm(r) / np.linalg.norm(state.vector))


def casimir_residual(space, alg, state: RepresentationState, total: int | None = None) -> float:
    w = space.window(total)
    r = alg.casimir @ state.vector - state.j * state.vector
    return float(np.linalg.norm(r[w]) / np.linalg.norm(state.vector[w]))


# ---------------------------------------------------------------- BCH and doublets

@dataclass(frozen=True)
class BCHResult:
    theta: float
    residual: float
    flipped_residual: float


def bch_check(theta: float, n_max: int = 30, support: int = 6, rows: int | None = None) -> BCHResult:
    """Gaussian decomposition of ``exp(theta J_1)`` on low test vectors.

    ``residual`` uses ``exp(tan(theta/2) J_+) cos(theta/2)^(-2 J_3)
    exp(tan(theta/2) J_-)``; ``flipped_residual`` the same product with the
    exponent of the middle factor negated.
    """
    if not abs(theta) < math.pi:
        raise ValueError("need |theta| < pi")
    space, alg = build_fock(n_max)
    cols = space.window(support)
    keep = space.window(rows)
    lhs = expm(theta * alg.J1)[:, cols]
    t = math.tan(theta / 2)
    outer_p, outer_m = expm(t * alg.J_plus), expm(t * alg.J_minus)
    j3 = np.diag(alg.J3)
    log_cos = math.log(math.cos(theta / 2))

    def defect(power):
        middle = np.exp(power * log_cos * j3)[:, None]
        rhs = outer_p @ (middle * outer_m[:, cols])
        return float(np.max(np.abs(lhs - rhs)[keep]))

    return BCHResult(theta, defect(-2.0), defect(2.0))


def doublet_residual(eta: float, n_max: int = 20) -> float:
    """``e^{i eta J_1} (A+, B) e^{-i eta J_1}`` against the hyperbolic rotation of the pair."""
    space, alg = build_fock(n_max)
    U = expm(1j * eta * alg.J1)
    c, s = math.cosh(eta / 2), math.sinh(eta / 2)
    lhs_a = U @ space.Ad @ U.conj().T
    lhs_b = U @ space.B @ U.conj().T
    rhs_a = c * space.Ad + 1j * s * space.B
    rhs_b = -1j * s * space.Ad + c * space.B
    low = space.window(n_max // 2)
    block = np.ix_(low, low)
    return float(max(np.max(np.abs((lhs_a - rhs_a)[block])), np.max(np.abs((lhs_b - rhs_b)[block]))))


# ---------------------------------------------------------------- dispersions

@dataclass(frozen=True)
class SqueezedDispersions:
    var_x1: float
    var_x2: float
    var_p1: float
    var_p2: float
    hbar: float

    @property
    def uncertainty_product(self) -> float:
        return self.var_x1 * self.var_p1

    @property
    def excess(self) -> float:
        """Product above the Heisenberg floor ``hbar^2 / 4``."""
        return self.uncertainty_product - 0.25 * self.hbar ** 2


def squeezed_vacuum_dispersions(zeta: float, zeta_dot: float, params: BatemanParams) -> SqueezedDispersions:
    hb, m, Om = params.hbar, params.m, params.Omega
    var_x = hb / (2 * m * Om) * math.exp(-2 * zeta)
    var_p = 0.5 * hb * m * Om * (math.exp(2 * zeta) + (zeta_dot / Om) ** 2 * math.exp(-2 * zeta))
    return SqueezedDispersions(var_x, var_x, var_p, var_p, hb)


# ---------------------------------------------------------------- time reversal

def time_reversal(alg: AlgebraElements, obj: np.ndarray) -> np.ndarray:
    """Antiunitary map: complex conjugation composed with ``A -> -A``, ``B -> B``.

    Vectors map to ``P conj(v)``; square matrices to ``P conj(X) P``, where
    ``P = (-1)^{n_A}``.
    """
    P = np.diag(alg.parity)
    if obj.ndim == 1:
        return P * np.conj(obj)
    return (P[:, None] * np.conj(obj)) * P[None, :]


def modified_product(alg, bra: np.ndarray, ket: np.ndarray, space: FockSpace | None = None,
                     total: int | None = None) -> complex:
    """``(T bra)^dagger ket`` for stationary (time-independent) states."""
    tb = time_reversal(alg, bra)
    if space is None:
        return complex(np.vdot(tb, ket))
    w = space.window(total)
    return complex(np.vdot(tb[w], ket[w]))


# ---------------------------------------------------------------- coherent-state expansion

@dataclass(frozen=True)
class CoherentExpansion:
    n: int
    l: int
    j: float
    m: float
    fidelity: float
    quarter_scale_fidelity: float
    truncation: float


def _laguerre_of_raising(space, alg, degree, alpha, v, scale):
    """``L^alpha_degree(scale * J_+) v`` by its explicit power series."""
    out = np.zeros_like(v)
    term = v.copy()
    for k in range(degree + 1):
        out = out + (-1) ** k * comb(degree + alpha, degree - k, exact=False) / math.factorial(k) * term
        term = scale * (alg.J_plus @ term)
    return out


def coherent_expansion_check(n: int, l: int, n_max: int = 30) -> CoherentExpansion:
    """Excited coherent-state form of ``psi^s_{n,l}`` against ``exp(pi/2 J_1)|j,m>``.

    Builds ``L^{2|j|}_{m-|j|}(c J_+) exp(J_+)|j,|j|>`` with the consistent
    ``c = -2`` (``fidelity``) and with ``c = -1/2`` (``quarter_scale_fidelity``).
    """
    space, alg = build_fock(n_max)
    j, m, sign = fock_labels(n, l)
    if sign < 0:
        raise ValueError("the coherent-state form is stated for the + family (l >= 1)")
    ref = stationary_state(space, alg, n, l, tail_tol=None)
    vac = _exp_raise(space, alg, basis_ket(space, j, abs(j)))
    degree, alpha = int(round(m - abs(j))), int(round(2 * abs(j)))
    built = _laguerre_of_raising(space, alg, degree, alpha, vac, -2.0)
    quarter = _laguerre_of_raising(space, alg, degree, alpha, vac, -0.5)
    return CoherentExpansion(n, l, j, m, window_fidelity(space, built, ref.vector),
                             window_fidelity(space, quarter, ref.vector), ref.truncation)
