"""Dynamical, total and geometric phases of the time-dependent states.

Conventions:

* ``winding_index`` is the accumulated angle of ``z = i sqrt(V/rho) +
  sqrt(1 - V/rho)`` divided by ``2 pi``, with both roots continued through
  their touching zeros.  It is real for open paths.
* ``phi_P = Re(phi_tot) - Re(phi_dyn)`` is the authoritative assembly; the
  rearranged dispersion form is reported next to it, not substituted.
* Spectra use the unreduced Pancharatnam phase; reducing it mod ``2 pi``
  only relabels ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

from .kernel import morse_index
from .wavefn import (
    Envelope,
    QuantumLabel,
    envelopes,
    modified_inner_product,
    psi_radial,
    psi_radial_star,
    radial_hamiltonian,
)

__all__ = [
    "NotPeriodicError",
    "OrthogonalEndpointsError",
    "PhaseReport",
    "SpectrumResult",
    "DispersionReport",
    "wrap_phase",
    "winding_index",
    "continued_angle",
    "dynamical_phase",
    "dynamical_phase_expectation",
    "total_phase",
    "overlap_phase",
    "pancharatnam_phase",
    "dispersion_form",
    "wavepacket_dispersions",
    "berry_anandan_spectrum",
]

OVERLAP_TOL = 1e-8
PERIOD_TOL = 1e-9
_QUAD = dict(epsabs=1e-12, epsrel=1e-10, limit=400)


class NotPeriodicError(ValueError):
    """``rho`` or ``V`` does not repeat after the requested period."""


class OrthogonalEndpointsError(ArithmeticError):
    """The endpoint states are orthogonal, so their relative phase is undefined."""


def wrap_phase(x: float) -> float:
    """Reduce to ``(-pi, pi]``."""
    y = math.remainder(x, 2 * math.pi)
    return math.pi if y == -math.pi else y


def _envelope(obj) -> Envelope:
    return envelopes(obj) if hasattr(obj, "jet") else obj


def _label(label) -> QuantumLabel:
    return label if isinstance(label, QuantumLabel) else QuantumLabel(*label)


def _morse(env, t_i, t_f) -> int:
    return morse_index(env.params, t_i, t_f) if t_f > t_i else 0


# ---------------------------------------------------------------- winding

def winding_index(fs_or_env, t_i: float, t_f: float, samples_per_period: int = 4096) -> float:
    """Revolutions of ``z(t)`` around the origin by dense sampling and unwrapping.

    ``sqrt(V/rho)`` and ``sqrt(1 - V/rho)`` only touch zero (the underlying
    angle is monotone), so each sampled local minimum marks a sign change of
    the continued root.
    """
    env = _envelope(fs_or_env)
    if t_f == t_i:
        return 0.0
    period = env.params.period
    count = max(64, int(samples_per_period * abs(t_f - t_i) / period) + 1)
    t = np.linspace(t_i, t_f, count)
    ratio = np.clip(np.asarray(env.V(t), dtype=float) / np.asarray(env.rho(t), dtype=float), 0.0, 1.0)
    if np.ndim(ratio) == 0:
        ratio = np.full(count, float(ratio))
    s, c = np.sqrt(ratio), np.sqrt(1.0 - ratio)
    s = s * _touch_signs(s)
    c = c * _touch_signs(c)
    angle = np.unwrap(np.arctan2(s, c))
    return float((angle[-1] - angle[0]) / (2 * math.pi))


def _touch_signs(values: np.ndarray) -> np.ndarray:
    interior = (values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:])
    flips = np.zeros(len(values), dtype=int)
    flips[2:][interior] = 1
    return np.where(np.cumsum(flips) % 2, -1.0, 1.0)


def continued_angle(fs_or_env, t_i: float, t_f: float) -> float:
    """``theta(t_f) - theta(t_i)`` from the integrated angular rate."""
    env = _envelope(fs_or_env)
    return float(env.theta(t_f) - env.theta(t_i))


# ---------------------------------------------------------------- phases

def _primary_integral(env, t_i, t_f) -> float:
    sqrtW = math.sqrt(env.W)
    Om = env.params.Omega

    def rate(t):
        rho = float(env.rho(t))
        return float(env.rho_dot(t)) ** 2 / (8 * rho * sqrtW) + Om ** 2 * rho / (2 * sqrtW)

    return quad(rate, t_i, t_f, **_QUAD)[0]


def dynamical_phase(label, fs_or_env, t_i: float, t_f: float) -> complex:
    lab, env = _label(label), _envelope(fs_or_env)
    k = lab.energy_factor
    ind = winding_index(env, t_i, t_f)
    real = -k * (_primary_integral(env, t_i, t_f) + math.pi * ind)
    return complex(real, env.params.Gamma * lab.l * (t_f - t_i))


def dynamical_phase_expectation(label, fs_or_env, t_i: float, t_f: float, nodes: int = 24,
                                h: float = 1e-3, radial_nodes: int = 400) -> complex:
    """``-(1/hbar) int <psi|H|psi> dt`` with the radial operator applied by finite differences."""
    lab, env = _label(label), _envelope(fs_or_env)
    p = env.params
    r_max = math.sqrt((4 * lab.n + 2 * abs(lab.l) + 90.0) / min(float(env.scale(t)) ** 2 for t in (t_i, t_f)))
    r_min = 4 * h if not lab.continued else 0.0

    xr, wr = roots_legendre(radial_nodes)
    rs = 0.5 * (r_max - r_min) * xr + 0.5 * (r_max + r_min)
    wr = 0.5 * (r_max - r_min) * wr

    def energy(t):
        psi = lambda r: psi_radial(lab, env, r, t)
        values = psi_radial_star(lab, env, rs, t) * radial_hamiltonian(lab.l, p, psi, rs, h)
        return 2 * np.dot(wr, values) - 1j * p.hbar * p.Gamma * lab.l

    x, w = roots_legendre(nodes)
    ts = 0.5 * (t_f - t_i) * x + 0.5 * (t_f + t_i)
    total = sum(wk * energy(tk) for wk, tk in zip(w, ts)) * 0.5 * (t_f - t_i)
    return complex(-total / p.hbar)


def _endpoint_overlap(lab, env, t_i, t_f) -> complex:
    radial = modified_inner_product(lab, lab, env, t_i, t_f)
    return radial * math.exp(-lab.l * env.params.Gamma * (t_f - t_i))


def overlap_phase(label, fs_or_env, t_i: float, t_f: float) -> complex:
    """``-i log <psi(t_i)|psi(t_f)>`` by quadrature; the real part is the argument."""
    lab, env = _label(label), _envelope(fs_or_env)
    ov = _endpoint_overlap(lab, env, t_i, t_f)
    if abs(ov) < OVERLAP_TOL:
        raise OrthogonalEndpointsError(f"|<psi(t_i)|psi(t_f)>| = {abs(ov):.3e}")
    return complex(-1j * np.log(ov))


def total_phase(label, fs_or_env, t_i: float, t_f: float, check_overlap: bool = True) -> complex:
    lab, env = _label(label), _envelope(fs_or_env)
    if check_overlap and t_f != t_i and abs(_endpoint_overlap(lab, env, t_i, t_f)) < OVERLAP_TOL:
        raise OrthogonalEndpointsError("endpoint states are orthogonal")
    ind = winding_index(env, t_i, t_f)
    real = -lab.energy_factor * 2 * math.pi * ind - 0.5 * math.pi * _morse(env, t_i, t_f)
    return complex(real, env.params.Gamma * lab.l * (t_f - t_i))


@dataclass(frozen=True)
class PhaseReport:
    label: QuantumLabel
    interval: tuple[float, float]
    phi_dyn: complex
    phi_tot: complex
    phi_P: float
    phi_P_raw: float
    phi_P_imag: float
    winding_index: float
    morse_index: int
    energy: float = field(default=float("nan"))

    @property
    def decomposition_defect(self) -> float:
        return abs(wrap_phase(self.phi_tot.real - self.phi_dyn.real - self.phi_P))

    def as_dict(self) -> dict:
        return {
            "n": self.label.n,
            "l": self.label.l,
            "t_i": self.interval[0],
            "t_f": self.interval[1],
            "phi_dyn_re": self.phi_dyn.real,
            "phi_dyn_im": self.phi_dyn.imag,
            "phi_tot_re": self.phi_tot.real,
            "phi_tot_im": self.phi_tot.imag,
            "phi_P": self.phi_P,
            "phi_P_raw": self.phi_P_raw,
            "phi_P_im": self.phi_P_imag,
            "winding_index": self.winding_index,
            "morse_index": self.morse_index,
            "energy": self.energy,
        }


def pancharatnam_phase(label, fs_or_env, t_i: float, t_f: float, check_overlap: bool = True) -> PhaseReport:
    lab, env = _label(label), _envelope(fs_or_env)
    dyn = dynamical_phase(lab, env, t_i, t_f)
    tot = total_phase(lab, env, t_i, t_f, check_overlap=check_overlap)
    raw = tot.real - dyn.real
    # mean energy over the interval implied by the dynamical phase
    energy = -env.params.hbar * dyn.real / (t_f - t_i) if t_f != t_i else float("nan")
    return PhaseReport(lab, (t_i, t_f), dyn, tot, wrap_phase(raw), raw, tot.imag - dyn.imag,
                       winding_index(env, t_i, t_f), _morse(env, t_i, t_f), energy)


# ---------------------------------------------------------------- dispersion form

@dataclass(frozen=True)
class DispersionReport:
    integral_zeta: float
    integral_dispersion: float
    integral_primary: float
    winding_term: float
    phi_P_dispersion: float
    phi_P_primary: float

    @property
    def integral_offset(self) -> float:
        """Dispersion-form integral minus primary integral; equals ``pi * ind``."""
        return self.integral_dispersion - self.integral_primary

    @property
    def assembly_difference(self) -> float:
        return self.phi_P_dispersion - self.phi_P_primary


def wavepacket_dispersions(fs_or_env, t: float, h: float = 1e-3) -> tuple[float, float]:
    """Position and momentum variances of the reduced ground packet by quadrature."""
    env = _envelope(fs_or_env)
    lab = QuantumLabel(0, -0.5)
    hb = env.params.hbar
    width = 1.0 / float(env.scale(t))
    R = 14 * width
    dens = lambda r: abs(psi_radial(lab, env, r, t)) ** 2
    f = lambda r: psi_radial(lab, env, r, t)
    grad = lambda r: abs((8 * (f(r + h) - f(r - h)) - (f(r + 2 * h) - f(r - 2 * h))) / (12 * h)) ** 2
    norm = quad(dens, -R, R, **_QUAD)[0]
    mean_x = quad(lambda r: r * dens(r), -R, R, **_QUAD)[0] / norm
    var_x = quad(lambda r: (r - mean_x) ** 2 * dens(r), -R, R, **_QUAD)[0] / norm
    var_p = hb ** 2 * quad(grad, -R, R, **_QUAD)[0] / norm
    return var_x, var_p


def dispersion_form(label, fs_or_env, t_i: float, t_f: float, dispersion_samples: int = 0) -> DispersionReport:
    """Pancharatnam phase rebuilt from the squeeze parameter and the packet dispersions.

    ``integral_zeta`` uses ``(Omega/2)(e^{-2 zeta} + e^{2 zeta} + e^{-2 zeta}
    (zeta'/Omega)^2)``; ``integral_dispersion`` uses
    ``<dp^2>/(hbar m) + m Omega^2 <dx^2>/hbar`` with the closed-form
    dispersions.  With ``dispersion_samples > 0`` the dispersions are instead
    measured on the packet by quadrature at that many Gauss nodes.
    """
    lab, env = _label(label), _envelope(fs_or_env)
    p = env.params
    Om, m, hb = p.Omega, p.m, p.hbar

    def zeta_rate(t):
        z, zd = float(env.zeta(t)), float(env.zeta_dot(t))
        return 0.5 * Om * (math.exp(-2 * z) + math.exp(2 * z) + math.exp(-2 * z) * (zd / Om) ** 2)

    def closed_dispersions(t):
        z, zd = float(env.zeta(t)), float(env.zeta_dot(t))
        var_x = hb / (2 * m * Om) * math.exp(-2 * z)
        var_p = 0.5 * hb * m * Om * (math.exp(2 * z) + (zd / Om) ** 2 * math.exp(-2 * z))
        return var_x, var_p

    def dispersion_rate(t, source):
        var_x, var_p = source(t)
        return var_p / (hb * m) + m * Om ** 2 * var_x / hb

    integral_zeta = quad(zeta_rate, t_i, t_f, **_QUAD)[0]
    if dispersion_samples:
        x, w = roots_legendre(dispersion_samples)
        ts = 0.5 * (t_f - t_i) * x + 0.5 * (t_f + t_i)
        integral_disp = 0.5 * (t_f - t_i) * sum(
            wk * dispersion_rate(tk, lambda s: wavepacket_dispersions(env, s)) for wk, tk in zip(w, ts))
    else:
        integral_disp = quad(lambda t: dispersion_rate(t, closed_dispersions), t_i, t_f, **_QUAD)[0]
    primary = _primary_integral(env, t_i, t_f)
    ind = winding_index(env, t_i, t_f)
    n_if = _morse(env, t_i, t_f)
    k = lab.energy_factor
    return DispersionReport(
        integral_zeta=integral_zeta,
        integral_dispersion=integral_disp,
        integral_primary=primary,
        winding_term=math.pi * ind,
        phi_P_dispersion=k * integral_disp + 0.5 * math.pi * n_if,
        phi_P_primary=k * (primary - math.pi * ind) - 0.5 * math.pi * n_if,
    )


# ---------------------------------------------------------------- spectrum

@dataclass(frozen=True)
class SpectrumResult:
    tau: float
    l: float
    phi_BA: tuple[float, ...]
    energies: tuple[float, ...]
    textbook: tuple[float, ...]
    morse_index: int

    @property
    def ground_energy(self) -> float:
        return self.energies[0]

    def rows(self):
        return [(n, e, phi, tb) for n, (e, phi, tb) in enumerate(zip(self.energies, self.phi_BA, self.textbook))]


def _check_periodic(env, t0, tau, samples=257):
    t = np.linspace(t0, t0 + tau, samples)
    d_rho = np.max(np.abs(env.rho(t + tau) - env.rho(t)))
    d_V = np.max(np.abs(env.V(t + tau) - env.V(t)))
    if d_rho > PERIOD_TOL or d_V > PERIOD_TOL:
        raise NotPeriodicError(f"tau={tau!r} is not a common period: |d rho|={d_rho:.2e}, |d V|={d_V:.2e}")


def berry_anandan_spectrum(fs_or_env, tau: float, l: float = -0.5, levels: int = 5,
                           t0: float | None = None) -> SpectrumResult:
    """Levels ``E_n = (hbar/tau)(2 pi n - phi_BA)`` from the cyclic phase over one period.

    The textbook row applies the same rule to a plain oscillator whose only
    cyclic phase is the Morse term, ``-pi/2 * 2`` over ``2 pi / Omega``.
    """
    env = _envelope(fs_or_env)
    p = env.params
    t0 = env.anchor if t0 is None else t0
    _check_periodic(env, t0, tau)
    phis, energies = [], []
    for n in range(levels):
        report = pancharatnam_phase((n, l), env, t0, t0 + tau)
        phis.append(report.phi_P_raw)
        energies.append(p.hbar / tau * (2 * math.pi * n - report.phi_P_raw))
    tau_lho = 2 * math.pi / p.Omega
    phi_lho = -0.5 * math.pi * 2
    textbook = tuple(p.hbar / tau_lho * (2 * math.pi * n - phi_lho) for n in range(levels))
    return SpectrumResult(tau, l, tuple(phis), tuple(energies), textbook, _morse(env, t0, t0 + tau))
