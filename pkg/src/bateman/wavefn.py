"""Time-dependent wave functions built from a fundamental system.

The envelope ``rho`` and the accumulated angle ``theta`` (with
``sin(theta)^2 = V / rho`` continued through the turning points) carry all the
time dependence.  ``b = exp(-2 i theta)`` and its fractional powers always use
this continued branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, iv, rgamma

from .classical import FundamentalSystem, alpha_factor, reanchor, wronskian
from .model import wedge

__all__ = [
    "InvalidLabelError",
    "DivergentProductError",
    "QuantumLabel",
    "Envelope",
    "MehlerResult",
    "laguerre",
    "hermite",
    "modified_bessel_I",
    "norm_ratio",
    "envelopes",
    "psi_radial",
    "psi_radial_star",
    "psi_full",
    "psi_star",
    "psi_lho_hermite",
    "reduce_to_lho",
    "radial_hamiltonian",
    "full_hamiltonian",
    "schrodinger_residual_radial",
    "schrodinger_residual_full",
    "modified_inner_product",
    "j2_apply",
    "alpha_rate_defect",
    "laurent_partial_sum",
    "mehler_single_l",
    "mehler_reconstruct",
    "laguerre_sequence",
    "SUMMATION_METHODS",
]

BESSEL_ARG_LIMIT = 50.0
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


class InvalidLabelError(ValueError):
    """Quantum numbers outside the bounded, pole-free set."""


class DivergentProductError(ArithmeticError):
    """The pairing integrand grows without bound along ``u``."""


@dataclass(frozen=True)
class QuantumLabel:
    """``(n, l)`` with ``2n + l + 1`` integral and ``l != 0``, or ``l = +-1/2`` when continued."""

    n: int
    l: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise InvalidLabelError(f"n must be a non-negative integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.continued:
            return
        if float(self.l) != round(self.l):
            raise InvalidLabelError(f"2n + l + 1 must be an integer (l={self.l!r}); only l = +-1/2 may be continued")
        if self.l == 0:
            raise InvalidLabelError("l = 0 is excluded")
        if self.n + self.l + 1 <= 0:
            raise InvalidLabelError(f"Gamma(n + l + 1) has a pole at (n, l) = ({self.n}, {self.l}); the state vanishes")
        object.__setattr__(self, "l", int(round(self.l)))

    @property
    def continued(self) -> bool:
        return abs(abs(self.l) - 0.5) < 1e-15

    @property
    def energy_factor(self) -> float:
        return 2 * self.n + self.l + 1


def _label(obj) -> QuantumLabel:
    if isinstance(obj, QuantumLabel):
        return obj
    n, l = obj
    return QuantumLabel(n, l)


# ---------------------------------------------------------------- special functions

def laguerre(n: int, l: float, x):
    """Generalised Laguerre polynomial by the three-term recurrence.

    For negative integer ``l = -k`` with ``n >= k`` the shift identity
    ``L_n^{-k}(x) = (-x)^k (n-k)!/n! L_{n-k}^k(x)`` is used for stability.
    """
    x = np.asarray(x, dtype=complex if np.iscomplexobj(x) else float)
    if n < 0:
        raise ValueError("degree must be non-negative")
    if float(l) == round(l) and l < 0 and n >= -l:
        k = int(-l)
        return (-x) ** k * math.exp(gammaln(n - k + 1) - gammaln(n + 1)) * laguerre(n - k, k, x)
    prev = np.ones_like(x)
    if n == 0:
        return prev
    cur = 1.0 + l - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + l - x) * cur - (k + l) * prev) / (k + 1)
    return cur


def hermite(k: int, x):
    """Physicists' Hermite polynomial by recurrence."""
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev
    cur = 2.0 * x
    for j in range(1, k):
        prev, cur = cur, 2.0 * x * cur - 2.0 * j * prev
    return cur


def modified_bessel_I(l: int, z, l_max: int = 40):
    if abs(l) > l_max:
        raise ValueError(f"|l| = {abs(l)} exceeds l_max = {l_max}")
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > BESSEL_ARG_LIMIT):
        raise OverflowError(f"|z| > {BESSEL_ARG_LIMIT} is outside the supported range")
    return iv(l, z)


def norm_ratio(n: int, l: float) -> float:
    """``n! / Gamma(n + l + 1)``, zero on the poles."""
    arg = n + l + 1
    if arg > 0:
        return math.exp(gammaln(n + 1) - gammaln(arg))
    return float(math.factorial(n) * rgamma(arg))


def laurent_partial_sum(a: float, u, l_terms: int = 40):
    """Partial sum of the Laurent series of ``exp(i a cosh u)`` over ``|l| <= l_terms``."""
    u = np.asarray(u, dtype=float)
    total = np.zeros_like(u, dtype=complex)
    for l in range(-l_terms, l_terms + 1):
        total = total + (-1) ** l * modified_bessel_I(l, -1j * a, l_max=l_terms) * np.exp(-l * u)
    return total


# ---------------------------------------------------------------- envelopes

class Envelope:
    """``rho``, ``V``, ``theta`` and the derived squeeze data of one fundamental system.

    The v-curves must vanish at ``fs.anchor``; that instant is where
    ``theta = 0`` and ``b = 1``.  ``rho`` is the positive quadratic form in
    ``cos, sin`` of ``Omega (t - anchor)`` fixed by ``rho = U``,
    ``rho' = U'`` at the anchor and the invariant ``2 rho rho'' - rho'^2
    + 4 Omega^2 rho^2 = 4 W``.  :meth:`rho_wedge_sum` is the root-sum-square of
    all pairwise wedges, which coincides with it only for orthonormal-like
    systems (e.g. the static one and rotations of its u-pair).
    """

    def __init__(self, fs: FundamentalSystem):
        self.fs = fs
        self.params = fs.params
        self.anchor = fs.anchor
        self.W = wronskian(fs)
        if self.W <= 0:
            raise ValueError("envelope construction needs a positive Wronskian")
        w, wd = self.wedges(self.anchor)
        Om = self.params.Omega
        self._cos2 = float(w[0])
        if self._cos2 <= 0:
            raise ValueError("u1 ^ u2 must be positive at the anchor")
        self._cross = float(wd[0]) / (2 * Om)
        self._sin2 = (self.W / Om ** 2 + self._cross ** 2) / self._cos2
        self._theta_cache: dict[float, float] = {}

    def wedges(self, t):
        j = self.fs.jet(np.asarray(t, dtype=float))
        w = np.array([wedge(j[0, a], j[0, b]) for a, b in PAIRS])
        wd = np.array([wedge(j[1, a], j[0, b]) + wedge(j[0, a], j[1, b]) for a, b in PAIRS])
        return w, wd

    def _trig(self, t):
        phase = self.params.Omega * (np.asarray(t, dtype=float) - self.anchor)
        return np.cos(phase), np.sin(phase)

    def rho(self, t):
        c, s = self._trig(t)
        return self._cos2 * c * c + 2 * self._cross * s * c + self._sin2 * s * s

    def rho_dot(self, t):
        c, s = self._trig(t)
        Om = self.params.Omega
        return Om * ((self._sin2 - self._cos2) * 2 * s * c + 2 * self._cross * (c * c - s * s))

    def rho_wedge_sum(self, t):
        w, _ = self.wedges(t)
        return np.sqrt(np.sum(w ** 2, axis=0))

    def V(self, t):
        w, _ = self.wedges(t)
        return w[5]

    def theta_rate(self, t):
        return math.sqrt(self.W) / self.rho(t)

    def _theta_scalar(self, t: float) -> float:
        if t in self._theta_cache:
            return self._theta_cache[t]
        if t == self.anchor:
            return 0.0
        span = abs(t - self.anchor)
        limit = max(50, int(20 * span / self.params.period) + 50)
        val, _ = quad(lambda s: float(self.theta_rate(s)), self.anchor, t, epsabs=1e-13, epsrel=1e-13, limit=limit)
        self._theta_cache[t] = val
        return val

    def theta(self, t):
        """Continued angle ``int_{anchor}^t sqrt(W) / rho``."""
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self._theta_scalar(float(t))
        return np.vectorize(self._theta_scalar, otypes=[float])(t)

    def b(self, t, power: float = 1.0):
        return np.exp(-2j * power * self.theta(t))

    def zeta(self, t):
        return 0.25 * np.log(self.W / (self.params.Omega ** 2 * self.rho(t) ** 2))

    def zeta_dot(self, t):
        return -0.5 * self.rho_dot(t) / self.rho(t)

    def xi(self, t):
        return self.params.m / (4 * self.params.hbar) * self.rho_dot(t) / self.rho(t)

    def scale(self, t):
        """Inverse width ``sqrt(m sqrt(W) / (hbar rho))``."""
        return np.sqrt(self.params.m * math.sqrt(self.W) / (self.params.hbar * self.rho(t)))

    def chirp(self, t):
        """Complex Gaussian coefficient multiplying ``r^2`` in the exponent."""
        p = self.params
        return p.m / (2 * p.hbar) * (0.5j * self.rho_dot(t) / self.rho(t) - math.sqrt(self.W) / self.rho(t))


def envelopes(fs: FundamentalSystem, t_a: float | None = None) -> Envelope:
    if t_a is not None:
        fs = reanchor(fs, t_a)
    return Envelope(fs)


def _env(obj) -> Envelope:
    return obj if isinstance(obj, Envelope) else Envelope(obj)


def _radial_power(r, l):
    p = l + 0.5
    if float(p) == round(p) and p >= 0:
        return np.asarray(r, dtype=float) ** int(round(p))
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("negative r is only meaningful for l = +-1/2")
    return r ** p


# ---------------------------------------------------------------- wave functions

def _radial_parts(lab: QuantumLabel, env: Envelope, r, t):
    k = env.scale(t)
    z = k ** 2 * np.asarray(r, dtype=float) ** 2
    amp = math.sqrt(norm_ratio(lab.n, lab.l)) * k ** (lab.l + 1) * laguerre(lab.n, lab.l, z) * _radial_power(r, lab.l)
    return amp, env.chirp(t), lab.n + 0.5 * (lab.l + 1)


def psi_radial(label, fs_or_env, r, t):
    lab, env = _label(label), _env(fs_or_env)
    amp, c, p = _radial_parts(lab, env, r, t)
    r = np.asarray(r, dtype=float)
    return amp * env.b(t, p) * np.exp(c * r ** 2)


def psi_radial_star(label, fs_or_env, r, t):
    lab, env = _label(label), _env(fs_or_env)
    amp, c, p = _radial_parts(lab, env, r, t)
    r = np.asarray(r, dtype=float)
    return amp * np.conj(env.b(t, p)) * np.exp(np.conj(c) * r ** 2)


def psi_full(label, fs_or_env, r, u, t, beta: float = 0.0):
    lab, env = _label(label), _env(fs_or_env)
    r = np.asarray(r, dtype=float)
    radial = psi_radial(lab, env, r, t) / np.sqrt(math.pi * r)
    return radial * np.exp(-lab.l * (np.asarray(u) + env.params.Gamma * t - 0.5 * beta))


def psi_star(label, fs_or_env, r, u, t, beta: float = 0.0):
    """Time-reversed partner: conjugated ``b`` power and chirp, mirrored ``u`` factor."""
    lab, env = _label(label), _env(fs_or_env)
    r = np.asarray(r, dtype=float)
    radial = psi_radial_star(lab, env, r, t) / np.sqrt(math.pi * r)
    return radial * np.exp(lab.l * (np.asarray(u) + env.params.Gamma * t - 0.5 * beta))


def psi_lho_hermite(n: float, sign: float, fs_or_env, r, t):
    """Hermite form of the ``l = +-1/2`` radial functions; ``n`` may be a half-integer for ``l = -1/2``.

    For integer ``n`` this equals ``(-1)^n psi_radial((n, +-1/2), ...)``:
    the Hermite normalisation absorbs the sign of the Laguerre leading
    coefficient.  Without that sign the half-integer shift
    ``(n, +1/2) -> (n + 1/2, -1/2)`` is an identity.
    """
    env = _env(fs_or_env)
    k = env.scale(t)
    r = np.asarray(r, dtype=float)
    if sign < 0:
        degree = int(round(2 * n))
        pref = 0.5 ** (2 * n) / math.sqrt(math.gamma(n + 1) * math.gamma(n + 0.5))
        power = n + 0.25
    else:
        degree = int(round(2 * n + 1))
        pref = 0.5 ** (2 * n + 1) / math.sqrt(math.gamma(n + 1) * math.gamma(n + 1.5))
        power = n + 0.75
    return pref * np.sqrt(k) * env.b(t, power) * hermite(degree, k * r) * np.exp(env.chirp(t) * r ** 2)


def reduce_to_lho(n: int, sign: float, fs_or_env, r, t, beta: float = 0.0):
    """Oscillator state obtained by freezing ``u`` on the classical path ``u = -Gamma t + beta/2``."""
    env = _env(fs_or_env)
    l = math.copysign(0.5, sign)
    u = -env.params.Gamma * t + 0.5 * beta
    r = np.asarray(r, dtype=float)
    return np.sqrt(math.pi * r) * psi_full(QuantumLabel(n, l), env, r, u, t, beta)


# ---------------------------------------------------------------- Hamiltonians and residuals

def _d1(f, x, h):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def _d2(f, x, h):
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def radial_hamiltonian(l: float, params, psi, r, h: float = 1e-3, alpha_rate: float | None = None):
    """Centrifugal radial operator applied to ``psi(r)`` by finite differences."""
    m, hb, Om, G = params.m, params.hbar, params.Omega, params.Gamma
    r = np.asarray(r, dtype=float)
    out = (-hb ** 2 * _d2(psi, r, h) + hb ** 2 * (l * l - 0.25) / r ** 2 * psi(r) + (m * Om * r) ** 2 * psi(r)) / (2 * m)
    rate = -G if alpha_rate is None else alpha_rate
    return out - 1j * hb * (rate + G) * l * psi(r)


def full_hamiltonian(params, psi, r, u, h: float = 1e-3):
    """Bateman operator in hyperbolic coordinates applied to ``psi(r, u)``."""
    m, hb, Om, G = params.m, params.hbar, params.Omega, params.Gamma
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    prr = _d2(lambda x: psi(x, u), r, h)
    pr = _d1(lambda x: psi(x, u), r, h)
    puu = _d2(lambda y: psi(r, y), u, h)
    pu = _d1(lambda y: psi(r, y), u, h)
    kin = -hb ** 2 * prr - hb ** 2 / r * pr + hb ** 2 / r ** 2 * puu + (m * Om * r) ** 2 * psi(r, u)
    return kin / (2 * m) + 1j * hb * G * pu


def _relative(lhs, rhs):
    return float(np.max(np.abs(lhs - rhs)) / (np.max(np.abs(lhs)) + np.max(np.abs(rhs))))


def schrodinger_residual_radial(label, fs_or_env, r, t, h: float = 1e-3, ht: float = 1e-3) -> float:
    lab, env = _label(label), _env(fs_or_env)
    p = env.params
    dt = _d1(lambda s: psi_radial(lab, env, r, s), t, ht)
    H = radial_hamiltonian(lab.l, p, lambda x: psi_radial(lab, env, x, t), r, h)
    return _relative(1j * p.hbar * dt, H)


def schrodinger_residual_full(label, fs_or_env, r, u, t, h: float = 1e-3, ht: float = 1e-3,
                              reversed_time: bool = False) -> float:
    """Residual of the forward equation for ``psi`` or, with ``reversed_time``,
    of ``(i hbar d/dt + H*) psi_star = 0``."""
    lab, env = _label(label), _env(fs_or_env)
    p = env.params
    if reversed_time:
        wave = psi_star
        conj_params = p
        dt = _d1(lambda s: wave(lab, env, r, u, s), t, ht)
        H = np.conj(full_hamiltonian(conj_params, lambda a, c: np.conj(wave(lab, env, a, c, t)), r, u, h))
        return _relative(-1j * p.hbar * dt, H)
    dt = _d1(lambda s: psi_full(lab, env, r, u, s), t, ht)
    H = full_hamiltonian(p, lambda a, c: psi_full(lab, env, a, c, t), r, u, h)
    return _relative(1j * p.hbar * dt, H)


def alpha_rate_defect(fs: FundamentalSystem, t_a: float, t_b: float, h: float = 1e-4) -> float:
    """``d alpha / d t_b + Gamma``, which must vanish."""
    rate = (alpha_factor(fs, t_a, t_b + h) - alpha_factor(fs, t_a, t_b - h)) / (2 * h)
    return abs(rate + fs.params.Gamma)


def j2_apply(psi, r, u, h: float = 1e-3):
    """``-(i/2) d/du`` by fourth-order differences; ``psi(r, u)``."""
    return -0.5j * _d1(lambda y: psi(r, y), np.asarray(u, dtype=float), h)


# ---------------------------------------------------------------- inner products

def _complex_quad(f, a, b, **kw):
    re, _ = quad(lambda x: float(np.real(f(x))), a, b, **kw)
    im, _ = quad(lambda x: float(np.imag(f(x))), a, b, **kw)
    return complex(re, im)


def _radial_cutoff(env, labels, times):
    k2 = min(float(env.scale(t)) ** 2 for t in times)
    top = max(4 * lab.n + 2 * abs(lab.l) for lab in labels)
    return math.sqrt((top + 90.0) / k2)


def modified_inner_product(label_a, label_b, fs_or_env, t: float, t_b: float | None = None,
                           domain: str = "radial", u_window: tuple[float, float] = (-1.0, 1.0)) -> complex:
    """Pairing of ``psi_a`` at ``t`` (bra side, time-reversed partner) with ``psi_b`` at ``t_b``.

    Radial integrals are taken over the even extension of the integrand to
    the whole line, i.e. twice the half-line value.  ``domain="full"``
    integrates ``r dr du`` over a finite ``u`` window and is only bounded
    when the two ``l`` agree.
    """
    a, b_lab, env = _label(label_a), _label(label_b), _env(fs_or_env)
    t_b = t if t_b is None else t_b
    R = _radial_cutoff(env, (a, b_lab), (t, t_b))

    def integrand(r):
        return psi_radial_star(a, env, r, t) * psi_radial(b_lab, env, r, t_b)

    radial = 2.0 * _complex_quad(integrand, 0.0, R, epsabs=1e-13, epsrel=1e-12, limit=400)
    if domain == "radial":
        return radial
    if domain != "full":
        raise ValueError(f"unknown domain {domain!r}")
    if a.l != b_lab.l:
        raise DivergentProductError("the u-integrand grows like exp((l_a - l_b) u)")
    G = env.params.Gamma
    u_factor = math.exp(a.l * G * t - b_lab.l * G * t_b)
    return radial * u_factor * (u_window[1] - u_window[0]) / math.pi


# ---------------------------------------------------------------- spectral reconstruction

@dataclass(frozen=True)
class MehlerResult:
    value: complex
    raw_value: complex
    last_term: float
    n_terms: int
    l_terms: int


def _shanks_limit(partial_sums) -> complex:
    if len(partial_sums) < 3:
        return complex(partial_sums[-1])
    # exactly repeated partial sums (a vanishing term) would stop the table;
    # the randomized variant nudges those denominators by a few ulps instead
    table = mpmath.shanks([mpmath.mpc(complex(s)) for s in partial_sums], randomized=True)
    rows = [row for row in table if len(row)]
    return complex(rows[-1][-1]) if rows else complex(partial_sums[-1])


def laguerre_sequence(n_max: int, l: float, x: float) -> np.ndarray:
    """``L_0^l(x) .. L_{n_max}^l(x)`` in one recurrence pass."""
    if float(l) == round(l) and l < 0 and n_max >= -l:
        # forward recurrence reaches degrees >= k only through cancellation
        k = int(-l)
        out = laguerre_sequence(k - 1, l, x) if k > 0 else np.empty(0)
        n = np.arange(k, n_max + 1)
        shifted = laguerre_sequence(n_max - k, k, x)
        return np.concatenate([out, (-x) ** k * np.exp(gammaln(n - k + 1) - gammaln(n + 1)) * shifted])
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max:
        out[1] = 1.0 + l - x
    for k in range(1, n_max):
        out[k + 1] = ((2 * k + 1 + l - x) * out[k] - (k + l) * out[k - 1]) / (k + 1)
    return out


def _weights(n_max: int, l: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    w = np.zeros(n_max + 1)
    live = n + l + 1 > 0
    w[live] = np.exp(gammaln(n[live] + 1) - gammaln(n[live] + l + 1))
    return w


SUMMATION_METHODS = ("shanks", "plain")


def _sum_series(terms: np.ndarray, method: str, first: int) -> complex:
    if method == "plain":
        return complex(terms.sum())
    if method == "shanks":
        # negative l: the leading terms vanish and would stall the table
        return _shanks_limit(np.cumsum(terms[first:]))
    raise ValueError(f"unknown summation method {method!r}; choose from {SUMMATION_METHODS}")


def mehler_single_l(l: int, z1: float, z2: float, b: complex, n_terms: int = 60, method: str = "shanks"):
    """Both sides of the Laguerre addition theorem for one order ``l``."""
    terms = _weights(n_terms, l) * laguerre_sequence(n_terms, l, z1) * laguerre_sequence(n_terms, l, z2) \
        * b ** np.arange(n_terms + 1)
    lhs = _sum_series(terms, method, max(0, -l))
    root = np.sqrt(z1 * z2 * b)
    rhs = (z1 * z2 * b) ** (-0.5 * l) / (1 - b) * np.exp(-b * (z1 + z2) / (1 - b)) * iv(l, 2 * root / (1 - b))
    return lhs, complex(rhs)


def mehler_reconstruct(fs: FundamentalSystem, t_a: float, t_b: float, r_a: float, u_a: float, r_b: float,
                       u_b: float, n_terms: int = 60, l_terms: int = 40, method: str = "shanks") -> MehlerResult:
    """Double series of radial products for the kernel, summed over ``n <= N`` and ``|l| <= L``.

    On the unit circle the ``n`` series converges only conditionally (terms
    fall off like ``n^-1/2``), so the raw truncation is poor.  ``method``
    picks how the same ``N + 1`` terms are summed: ``"shanks"`` (Wynn epsilon
    on the partial sums) or ``"plain"``.  The plain sum is always reported
    as ``raw_value``.  Acceleration degrades as ``b -> 1``, i.e. for
    ``Omega (t_b - t_a)`` close to a multiple of ``pi``.
    """
    env = envelopes(fs, t_a)
    alpha = alpha_factor(fs, t_a, t_b).real
    kb = env.scale(t_b) ** 2
    ka = env.scale(t_a) ** 2
    za, zb = ka * r_a ** 2, kb * r_b ** 2
    gauss = np.exp(env.chirp(t_b) * r_b ** 2 + np.conj(env.chirp(t_a)) * r_a ** 2)
    dtheta = env.theta(t_b) - env.theta(t_a)
    pref = math.sqrt(ka * kb)
    phases = np.exp(-2j * dtheta * np.arange(n_terms + 1))
    X = u_a - u_b + alpha
    total, raw, last = 0j, 0j, 0.0
    for l in range(0, l_terms + 1):
        # the order -l series is the order +l one times exp(-2 l X) (Laguerre shift identity)
        lfac = (pref ** (l + 1)) * (r_a * r_b) ** l * math.exp(l * X)
        if lfac == 0.0 or not math.isfinite(lfac):
            continue
        mirror = math.exp(-2 * l * X) if l else 0.0
        terms = _weights(n_terms, l) * laguerre_sequence(n_terms, l, za) * laguerre_sequence(n_terms, l, zb) * phases
        terms = terms * lfac * np.exp(-1j * dtheta * (l + 1))
        raw += terms.sum() * (1 + mirror) - (terms[n_terms - l + 1:].sum() * mirror if l else 0)
        last = max(last, float(abs(terms[-1])))
        total += _sum_series(terms, method, 0) * (1 + mirror)
    scale = 1j / math.pi * gauss
    return MehlerResult(complex(scale * total), complex(scale * raw), float(abs(scale) * last), n_terms, l_terms)
