"""Command-line front end: validated configs in, deterministic CSV/JSON tables out.

Usage: ``bateman <verb> [--config PATH] [--format csv|json] [--out PATH]
[--tolerance-scale X]``.  Configs are TOML or JSON with the sections
``params``, ``fs``, ``task`` and ``output``; anything missing falls back to the
verb's defaults.  A relative ``--config`` path (or ``<verb>.toml`` /
``<verb>.json`` when no path is given) is looked up in ``$BATEMAN_CONFIG_DIR``.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .classical import (
    CausticError,
    custom_fs,
    eom_residual,
    numerical_fs,
    recombine,
    static_fs,
    wronskian,
    boundary_determinant,
)
from .kernel import (
    detect_caustics,
    kernel_hyperbolic,
    morse_index,
    symplectic_flow,
    symplectic_flow_closed_form,
)
from .model import ParameterError, make_params
from .phase import (
    NotPeriodicError,
    OrthogonalEndpointsError,
    berry_anandan_spectrum,
    dispersion_form,
    pancharatnam_phase,
)
from .su11 import (
    TruncationError,
    algebra_residuals,
    build_fock,
    coherent_expansion_check,
    j2_eigen_residual,
    nonunitary_state,
)
from .wavefn import (
    DivergentProductError,
    InvalidLabelError,
    QuantumLabel,
    mehler_reconstruct,
    modified_inner_product,
    psi_full,
    psi_radial,
    schrodinger_residual_radial,
)

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

CONFIG_ENV = "BATEMAN_CONFIG_DIR"
SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELFTEST = 0, 2, 3, 4
VERBS = ("trajectory", "kernel", "wavefn", "phases", "caustics", "spectrum", "su11-verify", "selftest")
NUMERIC_ERRORS = (CausticError, OrthogonalEndpointsError, TruncationError, NotPeriodicError,
                  DivergentProductError, ArithmeticError)


class ConfigError(ValueError):
    """Configuration could not be read or does not match the schema."""


class VerificationFailed(RuntimeError):
    def __init__(self, table):
        super().__init__("verification failed")
        self.table = table


# ---------------------------------------------------------------- schema

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_TIME = {"oneOf": [
    _NUM,
    {"type": "object", "properties": {"half_periods": _NUM}, "required": ["half_periods"],
     "additionalProperties": False},
]}
_LABELS = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}}
_VEC2 = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


TASK_SCHEMAS = {
    "trajectory": _obj({"x_a": _VEC2, "momenta": {"type": "array", "items": _VEC2},
                        "t_start": _TIME, "t_stop": _TIME, "samples": {"type": "integer", "minimum": 2}}),
    "kernel": _obj({"t_a": _TIME, "t_b": _TIME,
                    "points": {"type": "array", "items": {"type": "array", "items": _NUM,
                                                          "minItems": 4, "maxItems": 4}},
                    "mehler": {"type": "boolean"}, "n_terms": _INT, "l_terms": _INT}),
    "wavefn": _obj({"labels": _LABELS, "t": _TIME,
                    "r": _obj({"start": _NUM, "stop": _NUM, "count": {"type": "integer", "minimum": 1}}),
                    "u": _NUM, "domain": {"enum": ["radial", "full"]}}),
    "phases": _obj({"labels": _LABELS,
                    "intervals": {"type": "array", "items": {"type": "array", "items": _TIME,
                                                             "minItems": 2, "maxItems": 2}},
                    "dispersion": {"type": "boolean"}}),
    "caustics": _obj({"t_a": _TIME, "t_b": _TIME}),
    "spectrum": _obj({"tau": _TIME, "l": _NUM, "levels": {"type": "integer", "minimum": 1}}),
    "su11-verify": _obj({"n_max": {"type": "integer", "minimum": 4}, "shell": _INT,
                         "eigen_n_max": {"type": "integer", "minimum": 8},
                         "coherent_n_max": {"type": "integer", "minimum": 8},
                         "coherent_labels": _LABELS}),
    "selftest": _obj({}),
}


def config_schema(verb: str) -> dict:
    return _obj({
        "schema_version": {"const": SCHEMA_VERSION},
        "params": _obj({"m": _NUM, "gamma": _NUM, "kappa": _NUM, "hbar": _NUM}),
        "fs": _obj({
            "kind": {"enum": ["static", "recombination", "initial-data"]},
            "anchor": _NUM,
            "coefficients": {"type": "array", "minItems": 4, "maxItems": 4,
                             "items": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4}},
            "values": {"type": "array", "minItems": 4, "maxItems": 4, "items": _VEC2},
            "velocities": {"type": "array", "minItems": 4, "maxItems": 4, "items": _VEC2},
        }),
        "task": TASK_SCHEMAS[verb],
        "output": _obj({"format": {"enum": ["csv", "json"]}, "path": {"type": ["string", "null"]},
                        "precision": {"type": "integer", "minimum": 1, "maximum": 17}}),
    })


BASE_DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "params": {"m": 1.0, "gamma": 1.2, "kappa": 40.0, "hbar": 1.0},
    "fs": {"kind": "static", "anchor": 0.0},
    "output": {"format": "csv", "path": None, "precision": 17},
}

TASK_DEFAULTS = {
    "trajectory": {"x_a": [1.0, 0.5], "momenta": [[-3.0, 1.0], [0.0, 0.0], [4.0, -2.0]],
                   "t_start": 0.0, "t_stop": {"half_periods": 2}, "samples": 81},
    "kernel": {"t_a": 0.0, "t_b": {"half_periods": 0.5}, "points": [[1.0, 0.2, 1.3, -0.1]],
               "mehler": False, "n_terms": 60, "l_terms": 40},
    "wavefn": {"labels": [[0, 1]], "t": 0.0, "r": {"start": 0.0, "stop": 3.0, "count": 31},
               "u": 0.0, "domain": "radial"},
    "phases": {"labels": [[0, 1]], "intervals": [[0.0, {"half_periods": 1}]], "dispersion": False},
    "caustics": {"t_a": 0.0, "t_b": {"half_periods": 2}},
    "spectrum": {"tau": {"half_periods": 1}, "l": -0.5, "levels": 5},
    "su11-verify": {"n_max": 10, "shell": 2, "eigen_n_max": 24, "coherent_n_max": 30,
                    "coherent_labels": [[0, 1], [1, 3]]},
    "selftest": {},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate_config(verb: str, raw: dict) -> None:
    errors = sorted(jsonschema.Draft202012Validator(config_schema(verb)).iter_errors(raw),
                    key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {e.message}")


def _locate(path: str | None, verb: str) -> Path | None:
    base = os.environ.get(CONFIG_ENV)
    if path is None:
        if base:
            for ext in (".toml", ".json"):
                cand = Path(base) / f"{verb}{ext}"
                if cand.is_file():
                    return cand
        return None
    p = Path(path)
    if not p.is_absolute() and not p.exists() and base:
        p = Path(base) / p
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return p


def load_config(verb: str, path: str | None = None) -> dict:
    raw = {}
    located = _locate(path, verb)
    if located is not None:
        text = located.read_bytes()
        try:
            raw = json.loads(text) if located.suffix == ".json" else tomllib.loads(text.decode())
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot parse {located}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a table/object")
    validate_config(verb, raw)
    defaults = _merge(BASE_DEFAULTS, {"task": TASK_DEFAULTS[verb]})
    return _merge(defaults, raw)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- tables

@dataclass
class ResultTable:
    columns: list[tuple[str, str]]
    rows: list[tuple]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"row has {len(row)} cells, expected {len(self.columns)}")

    def to_csv(self, precision: int = 17) -> str:
        buf = io.StringIO()
        header = [f"{name}[{unit}]" for name, unit in self.columns] + ["config_hash[-]"]
        buf.write(",".join(header) + "\n")
        tag = self.meta.get("config_hash", "")
        for row in self.rows:
            buf.write(",".join([_fmt(v, precision) for v in row] + [tag]) + "\n")
        return buf.getvalue()

    def to_json(self, precision: int = 17) -> str:
        payload = {
            "meta": self.meta,
            "columns": [{"name": n, "unit": u} for n, u in self.columns],
            "rows": [[_json_cell(v, precision) for v in row] for row in self.rows],
        }
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def _fmt(v, precision: int) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), f".{precision}g")


def _json_cell(v, precision: int):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    x = float(format(float(v), f".{precision}g"))
    return x if math.isfinite(x) else repr(x)


# ---------------------------------------------------------------- builders

def build_params(cfg: dict):
    p = cfg["params"]
    return make_params(p["m"], p["gamma"], p["kappa"], p["hbar"])


def build_fs(cfg: dict, params=None):
    params = params or build_params(cfg)
    spec = cfg["fs"]
    anchor = spec.get("anchor", 0.0)
    kind = spec["kind"]
    if kind == "static":
        return static_fs(params, anchor)
    if kind == "recombination":
        if "coefficients" not in spec:
            raise ConfigError("fs/coefficients is required for kind 'recombination'")
        return recombine(static_fs(params, anchor), spec["coefficients"])
    if "values" not in spec or "velocities" not in spec:
        raise ConfigError("fs/values and fs/velocities are required for kind 'initial-data'")
    return numerical_fs(params, spec["values"], spec["velocities"], anchor)


def resolve_time(value, params) -> float:
    if isinstance(value, dict):
        return float(value["half_periods"]) * math.pi / params.Omega
    return float(value)


def _meta(verb: str, cfg: dict, operations: list[str], **extra) -> dict:
    return {"tool": "bateman", "version": __version__, "command": verb, "schema_version": SCHEMA_VERSION,
            "config_hash": config_hash(cfg), "operations": operations, **extra}


# ---------------------------------------------------------------- commands

def orbit_bundle(params, x_a, momenta, times, t_start=0.0) -> np.ndarray:
    """Phase-space points ``(orbit, time, [p1, p2, x1, x2])`` for a momentum bundle."""
    x_a = np.asarray(x_a, dtype=float)
    out = np.empty((len(momenta), len(times), 4))
    for k, t in enumerate(times):
        S = symplectic_flow(params, t_start, t).matrix
        for i, p in enumerate(momenta):
            out[i, k] = S @ np.concatenate([np.asarray(p, dtype=float), x_a])
    return out


def focal_spread(params, x_a, momenta, t, t_start=0.0) -> float:
    """Largest distance of the bundle's positions at ``t`` from the focal image of ``x_a``."""
    focus = symplectic_flow_closed_form(params, t_start, t).S2 @ np.asarray(x_a, dtype=float)
    pts = orbit_bundle(params, x_a, momenta, [t], t_start)[:, 0, 2:]
    return float(np.max(np.linalg.norm(pts - focus, axis=1))) if len(momenta) else 0.0


def cmd_trajectory(cfg: dict, tolerance_scale: float = 1.0) -> ResultTable:
    params = build_params(cfg)
    task = cfg["task"]
    t0, t1 = resolve_time(task["t_start"], params), resolve_time(task["t_stop"], params)
    times = np.linspace(t0, t1, task["samples"])
    momenta = task["momenta"]
    pts = orbit_bundle(params, task["x_a"], momenta, times, t0)
    rows = [(i, float(t), *map(float, pts[i, k, 2:]), *map(float, pts[i, k, :2]))
            for i in range(len(momenta)) for k, t in enumerate(times)]
    half = math.pi / params.Omega
    focal = []
    k = 1
    while t0 + k * half <= t1 + 1e-12:
        t = t0 + k * half
        focal.append({"t": t, "spread": focal_spread(params, task["x_a"], momenta, t, t0)})
        k += 1
    tol = 1e-6 * tolerance_scale
    meta = _meta("trajectory", cfg, ["symplectic_flow"], focal=focal, focal_tolerance=tol,
                 refocused=all(f["spread"] < tol for f in focal))
    cols = [("orbit", "1"), ("t", "T"), ("x1", "L"), ("x2", "L"), ("p1", "M L/T"), ("p2", "M L/T")]
    return ResultTable(cols, rows, meta)


def cmd_kernel(cfg: dict, tolerance_scale: float = 1.0) -> ResultTable:
    params = build_params(cfg)
    fs = build_fs(cfg, params)
    task = cfg["task"]
    t_a, t_b = resolve_time(task["t_a"], params), resolve_time(task["t_b"], params)
    cols = [("r_a", "L"), ("u_a", "1"), ("r_b", "L"), ("u_b", "1"), ("K_re", "1/L^2"), ("K_im", "1/L^2"),
            ("morse_index", "1")]
    if task["mehler"]:
        cols += [("mehler_re", "1/L^2"), ("mehler_im", "1/L^2")]
    rows = []
    for r_a, u_a, r_b, u_b in task["points"]:
        k = kernel_hyperbolic(fs, t_a, t_b, r_a, u_a, r_b, u_b)
        row = [r_a, u_a, r_b, u_b, k.amplitude.real, k.amplitude.imag, k.morse_index]
        if task["mehler"]:
            m = mehler_reconstruct(fs, t_a, t_b, r_a, u_a, r_b, u_b, task["n_terms"], task["l_terms"])
            row += [m.value.real, m.value.imag]
        rows.append(tuple(row))
    ops = ["kernel_hyperbolic"] + (["mehler_reconstruct"] if task["mehler"] else [])
    return ResultTable(cols, rows, _meta("kernel", cfg, ops, t_a=t_a, t_b=t_b))


def cmd_wavefn(cfg: dict, tolerance_scale: float = 1.0) -> ResultTable:
    params = build_params(cfg)
    fs = build_fs(cfg, params)
    task = cfg["task"]
    t = resolve_time(task["t"], params)
    grid = np.linspace(task["r"]["start"], task["r"]["stop"], task["r"]["count"])
    rows = []
    for n, l in task["labels"]:
        lab = QuantumLabel(int(n), float(l))
        for r in grid:
            if task["domain"] == "full":
                val = complex(psi_full(lab, fs, r, task["u"], t))
            else:
                val = complex(psi_radial(lab, fs, r, t))
            rows.append((lab.n, lab.l, float(r), val.real, val.imag))
    unit = "1/L" if task["domain"] == "full" else "1/L^(1/2)"
    cols = [("n", "1"), ("l", "1"), ("r", "L"), ("psi_re", unit), ("psi_im", unit)]
    op = "psi_full" if task["domain"] == "full" else "psi_radial"
    return ResultTable(cols, rows, _meta("wavefn", cfg, [op], t=t))


def cmd_phases(cfg: dict, tolerance_scale: float = 1.0) -> ResultTable:
    params = build_params(cfg)
    fs = build_fs(cfg, params)
    task = cfg["task"]
    cols = [("n", "1"), ("l", "1"), ("t_i", "T"), ("t_f", "T"), ("phi_dyn_re", "rad"), ("phi_dyn_im", "1"),
            ("phi_tot_re", "rad"), ("phi_tot_im", "1"), ("phi_P", "rad"), ("phi_P_raw", "rad"),
            ("winding_index", "1"), ("morse_index", "1")]
    if task["dispersion"]:
        cols += [("phi_P_dispersion_form", "rad"), ("dispersion_discrepancy", "rad")]
    rows = []
    for n, l in task["labels"]:
        for a, b in task["intervals"]:
            t_i, t_f = resolve_time(a, params), resolve_time(b, params)
            r = pancharatnam_phase((int(n), float(l)), fs, t_i, t_f)
            row = [r.label.n, r.label.l, t_i, t_f, r.phi_dyn.real, r.phi_dyn.imag, r.phi_tot.real,
                   r.phi_tot.imag, r.phi_P, r.phi_P_raw, r.winding_index, r.morse_index]
            if task["dispersion"]:
                d = dispersion_form(r.label, fs, t_i, t_f)
                row += [d.phi_P_dispersion, d.assembly_difference]
            rows.append(tuple(row))
    ops = ["pancharatnam_phase"] + (["dispersion_form"] if task["dispersion"] else [])
    return ResultTable(cols, rows, _meta("phases", cfg, ops))


def cmd_caustics(cfg: dict, tolerance_scale: float = 1.0) -> ResultTable:
    params = build_params(cfg)
    task = cfg["task"]
    t_a, t_b = resolve_time(task["t_a"], params), resolve_time(task["t_b"], params)
    rec = detect_caustics(params, t_a, t_b)
    rows, total = [], 0
    for t, mult in rec.rows():
        total += mult
        rows.append((float(t), int(mult), total))
    cols = [("t", "T"), ("multiplicity", "1"), ("morse_index", "1")]
    return ResultTable(cols, rows, _meta("caustics", cfg, ["detect_caustics"], t_a=t_a, t_b=t_b))


def cmd_spectrum(cfg: dict, tolerance_scale: float = 1.0) -> ResultTable:
    params = build_params(cfg)
    fs = build_fs(cfg, params)
    task = cfg["task"]
    tau = resolve_time(task["tau"], params)
    spec = berry_anandan_spectrum(fs, tau, l=task["l"], levels=task["levels"])
    rows = [(n, e, tb, phi) for n, e, phi, tb in spec.rows()]
    cols = [("n", "1"), ("E", "M L^2/T^2"), ("E_textbook", "M L^2/T^2"), ("phi_BA", "rad")]
    return ResultTable(cols, rows, _meta("spectrum", cfg, ["berry_anandan_spectrum"], tau=tau,
                                         morse_index=spec.morse_index))


def cmd_su11_verify(cfg: dict, tolerance_scale: float = 1.0) -> ResultTable:
    params = build_params(cfg)
    task = cfg["task"]
    rows = []
    space, alg = build_fock(task["n_max"], task["shell"])
    tol = 1e-12 * tolerance_scale
    for name, value in algebra_residuals(space, alg, params).items():
        rows.append((name, value, tol, value < tol))
    big, big_alg = build_fock(task["eigen_n_max"], task["shell"])
    state = nonunitary_state(big, big_alg, 0.5, 0.5, +1)
    r = j2_eigen_residual(big, big_alg, state)
    rows.append(("J2 eigen (1/2,1/2)", r, 1e-6 * tolerance_scale, r < 1e-6 * tolerance_scale))
    for n, l in task["coherent_labels"]:
        res = coherent_expansion_check(int(n), int(l), task["coherent_n_max"])
        infid = 1.0 - res.fidelity
        rows.append((f"coherent expansion ({int(n)},{int(l)})", infid, 1e-4 * tolerance_scale,
                     infid < 1e-4 * tolerance_scale))
    cols = [("check", "-"), ("residual", "1"), ("tolerance", "1"), ("pass", "1")]
    table = ResultTable(cols, rows, _meta("su11-verify", cfg, ["algebra_residuals", "nonunitary_state",
                                                               "coherent_expansion_check"]))
    if not all(row[3] for row in rows):
        raise VerificationFailed(table)
    return table


# ---------------------------------------------------------------- self-test

def corrupted_fs(params):
    """Curves that solve the wrong equation of motion (stiffer spring)."""
    wrong = make_params(params.m, params.gamma, 1.3 * params.kappa, params.hbar)
    return custom_fs(params, static_fs(wrong).jet, label="corrupted")


def selftest_checks(params, fs, scale: float = 1.0):
    """Named invariants as ``(name, thunk -> value, tolerance)``; reduced tolerances."""
    Om = params.Omega
    half = math.pi / Om
    grid = np.linspace(0.05, 2 * half, 17)
    mix = np.array([[1.1, 0.3, 0.2, -0.4], [-0.2, 0.9, 0.5, 0.1], [0, 0, 1.3, 0.4], [0, 0, -0.2, 0.8]])

    def eom():
        return eom_residual(fs, grid)

    def wronskian_value():
        return abs(wronskian(fs, 0.7) / (4 * Om ** 2) - 1)

    def determinant():
        return max(abs(boundary_determinant(fs, 0.0, t) - 4 * math.sin(Om * t) ** 2) for t in (0.3, 0.8 * half))

    def kernel_gauge():
        other = recombine(fs, mix)
        a = kernel_hyperbolic(fs, 0.1, 0.6 * half, 1.0, 0.2, 1.3, -0.1).amplitude
        b = kernel_hyperbolic(other, 0.1, 0.6 * half, 1.0, 0.2, 1.3, -0.1).amplitude
        return abs(a - b) / abs(a)

    def flow_routes():
        return float(np.abs(symplectic_flow(params, 0.0, 1.3).matrix
                            - symplectic_flow_closed_form(params, 0.0, 1.3).matrix).max())

    def schrodinger():
        return schrodinger_residual_radial((1, 1), fs, np.linspace(0.3, 2.0, 7), 0.4)

    def orthonormality():
        worst = 0.0
        for n in range(3):
            for k in range(3):
                v = modified_inner_product((n, 1), (k, 1), fs, 0.4)
                worst = max(worst, abs(v - (1.0 if n == k else 0.0)))
        return worst

    def morse():
        return abs(morse_index(params, 0.0, half) - 2) + abs(morse_index(params, 0.0, 2 * half) - 4)

    def ground_energy():
        return abs(berry_anandan_spectrum(fs, half, levels=1).ground_energy / (params.hbar * Om) - 1)

    def phase_identity():
        return pancharatnam_phase((0, 1), fs, 0.1, 1.3 * half).decomposition_defect

    def su11_algebra():
        space, alg = build_fock(10)
        return max(algebra_residuals(space, alg, params).values())

    def refocusing():
        momenta = [[-3.0, 1.0], [0.0, 0.0], [4.0, -2.0]]
        return max(focal_spread(params, [1.0, 0.5], momenta, k * half) for k in (1, 2))

    return [
        ("eom_residual", eom, 1e-9),
        ("wronskian_static", wronskian_value, 1e-9),
        ("boundary_determinant_static", determinant, 1e-8),
        ("kernel_gauge_invariance", kernel_gauge, 1e-7),
        ("symplectic_flow_routes", flow_routes, 1e-9),
        ("schrodinger_radial", schrodinger, 1e-4),
        ("orthonormality", orthonormality, 1e-7),
        ("morse_index", morse, 0.5),
        ("ground_energy", ground_energy, 1e-9),
        ("phase_decomposition", phase_identity, 1e-8),
        ("su11_algebra", su11_algebra, 1e-11),
        ("refocusing", refocusing, 1e-6),
    ]


def run_selftest(corrupt: bool = False, tolerance_scale: float = 1.0, params=None) -> ResultTable:
    params = params or make_params(1.0, 0.7, 2.3)
    fs = corrupted_fs(params) if corrupt else static_fs(params)
    rows = []
    for name, thunk, tol in selftest_checks(params, fs):
        tol = tol * tolerance_scale
        try:
            value = float(thunk())
            ok = math.isfinite(value) and value < tol
            note = ""
        except Exception as exc:  # a raising invariant counts as failed
            value, ok, note = float("nan"), False, type(exc).__name__
        rows.append((name, value, tol, ok, note))
    cols = [("check", "-"), ("value", "1"), ("tolerance", "1"), ("pass", "1"), ("error", "-")]
    cfg = {"selftest": {"corrupt": corrupt, "tolerance_scale": tolerance_scale}}
    meta = _meta("selftest", cfg, ["selftest_checks"],
                 failed=[r[0] for r in rows if not r[3]])
    return ResultTable(cols, rows, meta)


COMMANDS = {
    "trajectory": cmd_trajectory,
    "kernel": cmd_kernel,
    "wavefn": cmd_wavefn,
    "phases": cmd_phases,
    "caustics": cmd_caustics,
    "spectrum": cmd_spectrum,
    "su11-verify": cmd_su11_verify,
}


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help=f"TOML or JSON config; relative paths also searched in ${CONFIG_ENV}")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="write the table here instead of standard output")
    common.add_argument("--tolerance-scale", type=float, help="multiply every verification tolerance")
    parser = argparse.ArgumentParser(prog="bateman", parents=[common],
                                     description="Propagator, wave functions and phases of the dual damped oscillator.")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb, parents=[common])
        if verb == "selftest":
            p.add_argument("--corrupt-fs", action="store_true", default=False,
                           help="negative control: run the suite on curves violating the equation of motion")
    return parser


def _emit(table: ResultTable, fmt: str, out: str | None, precision: int, stream) -> None:
    text = table.to_json(precision) if fmt == "json" else table.to_csv(precision)
    if out:
        Path(out).write_text(text)
    else:
        stream.write(text)


def _error(kind: str, exc: BaseException, code: int, stream) -> int:
    stream.write(json.dumps({"error": {"type": type(exc).__name__, "category": kind,
                                       "message": str(exc), "exit_code": code}}, sort_keys=True) + "\n")
    return code


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = _parser().parse_args(argv)
    scale = getattr(args, "tolerance_scale", 1.0)
    if not scale > 0:
        return _error("config", ConfigError("--tolerance-scale must be positive"), EXIT_CONFIG, stderr)
    if args.verb == "selftest":
        table = run_selftest(corrupt=args.corrupt_fs, tolerance_scale=scale)
        _emit(table, getattr(args, "format", "csv"), getattr(args, "out", None), 17, stdout)
        failed = table.meta["failed"]
        if failed:
            stderr.write(f"selftest failed: {', '.join(failed)}\n")
            return EXIT_SELFTEST
        return EXIT_OK
    try:
        cfg = load_config(args.verb, getattr(args, "config", None))
        fmt = getattr(args, "format", cfg["output"]["format"])
        out = getattr(args, "out", cfg["output"]["path"])
        table = COMMANDS[args.verb](cfg, scale)
    except (ConfigError, ParameterError, InvalidLabelError, ValueError) as exc:
        if isinstance(exc, NUMERIC_ERRORS):
            return _error("numerical", exc, EXIT_NUMERIC, stderr)
        return _error("config", exc, EXIT_CONFIG, stderr)
    except VerificationFailed as exc:
        _emit(exc.table, getattr(args, "format", "csv"), getattr(args, "out", None), 17, stdout)
        return EXIT_SELFTEST
    except NUMERIC_ERRORS as exc:
        return _error("numerical", exc, EXIT_NUMERIC, stderr)
    _emit(table, fmt, out, cfg["output"]["precision"], stdout)
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
