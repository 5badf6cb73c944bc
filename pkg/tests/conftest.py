import numpy as np
import pytest

from bateman.model import make_params


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def damped():
    return make_params(m=1.0, gamma=0.7, kappa=2.3)


@pytest.fixture
def figure_params():
    return make_params(m=1.0, gamma=1.2, kappa=40.0)


def lagrangian(params, x, xdot):
    """Independent Lagrangian in the rotated frame (oracle for the action)."""
    return (0.5 * params.m * (xdot[0] ** 2 - xdot[1] ** 2)
            + 0.5 * params.gamma * (x[1] * xdot[0] - x[0] * xdot[1])
            - 0.5 * params.kappa * (x[0] ** 2 - x[1] ** 2))


def closed_form_action(params, dt, r_a, u_a, r_b, u_b):
    Om, G = params.Omega, params.Gamma
    s, c = np.sin(Om * dt), np.cos(Om * dt)
    return params.m * Om / (2 * s) * ((r_a ** 2 + r_b ** 2) * c - 2 * r_a * r_b * np.cosh(u_b - u_a + G * dt))


def closed_form_kernel(params, dt, r_a, u_a, r_b, u_b):
    Om = params.Omega
    pref = params.m / (2 * np.pi * params.hbar) * Om / abs(np.sin(Om * dt))
    return pref * np.exp(1j * closed_form_action(params, dt, r_a, u_a, r_b, u_b) / params.hbar)


def random_recombination(rng, scale=1.0):
    """Admissible mix: u's take any admixture, v's only mix among themselves."""
    while True:
        C = np.zeros((4, 4))
        C[:2] = rng.normal(scale=scale, size=(2, 4))
        C[2:, 2:] = rng.normal(scale=scale, size=(2, 2))
        if abs(np.linalg.det(C[:2, :2])) > 0.2 and abs(np.linalg.det(C[2:, 2:])) > 0.2:
            return C


ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record_acceptance(criterion: int, part: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[criterion]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{name}: {'ok' if ok else 'FAIL'}{' (' + d + ')' if d else ''}"
                           for name, ok, d in parts)
        terminalreporter.write_line(f"criterion {criterion:2d} {status}  {detail}")
