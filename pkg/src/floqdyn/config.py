"""Run configuration: strict YAML schema, defaults, and shipped presets.

One YAML document describes one run.  Every workflow has a fixed schema;
unknown keys anywhere in the document are rejected before any computation,
and parsing materializes all defaults so the echoed "effective config" is
complete and round-trips through parse_config unchanged.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import yaml

__all__ = [
    "ConfigError",
    "RunConfig",
    "WORKFLOWS",
    "PRESETS",
    "parse_config",
    "preset_config",
    "effective_yaml",
]

WORKFLOWS = ("floquet-propagate", "qme-run", "friction-scan", "sh-run")

MAX_RATE_DT = 0.02  # mirrors the surface-hopping step-size bound


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    """A validated run: workflow name plus its effective parameter document."""

    workflow: str
    model: dict
    numerics: dict
    output: dict
    seed: int

    def as_dict(self) -> dict:
        return {
            "workflow": self.workflow,
            "seed": self.seed,
            "model": copy.deepcopy(self.model),
            "numerics": copy.deepcopy(self.numerics),
            "output": copy.deepcopy(self.output),
        }


# --- leaf validators -------------------------------------------------------

def _number(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    return float(v)


def _positive(key, v):
    v = _number(key, v)
    if not v > 0:
        raise ConfigError(f"{key}: must be > 0, got {v:g}")
    return v


def _nonneg(key, v):
    v = _number(key, v)
    if v < 0:
        raise ConfigError(f"{key}: must be >= 0, got {v:g}")
    return v


def _int_min(lo):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        if v < lo:
            raise ConfigError(f"{key}: must be >= {lo}, got {v}")
        return v

    return check


def _matrix(key, v):
    try:
        m = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a real matrix as a list of rows") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ConfigError(f"{key}: expected a square matrix, got shape {m.shape}")
    return [[float(x) for x in row] for row in m]


def _symmetric_matrix(key, v):
    m = _matrix(key, v)
    a = np.array(m)
    if np.max(np.abs(a - a.T)) > 1e-12:
        raise ConfigError(f"{key}: matrix must be symmetric")
    return m


def _number_list(key, v):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key}: expected a non-empty list of numbers")
    return [_number(f"{key}[{i}]", x) for i, x in enumerate(v)]


def _choice(*options):
    def check(key, v):
        if v not in options:
            raise ConfigError(f"{key}: must be one of {options}, got {v!r}")
        return v

    return check


def _string(key, v):
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{key}: expected a non-empty string")
    return v


# --- schemas ---------------------------------------------------------------
# Each field: (default, validator).  _REQUIRED defaults must appear in the
# document; None defaults are computed afterwards by the _finalize hooks.

_REQUIRED = object()

_LEAD_SCHEMA = {
    "gamma": (_REQUIRED, _matrix),
    "mu": (0.0, _number),
    "beta": (_REQUIRED, _positive),
}

_SCHEMAS = {
    "floquet-propagate": {
        "model": {
            "h0": (_REQUIRED, _symmetric_matrix),
            "h1": (None, _symmetric_matrix),
            "omega": (_REQUIRED, _positive),
        },
        "numerics": {
            "n_max": (8, _int_min(0)),
            "n_periods": (5.0, _positive),
            "n_out": (201, _int_min(2)),
            "observable": (None, _symmetric_matrix),
        },
    },
    "qme-run": {
        "model": {
            "h0": (_REQUIRED, _symmetric_matrix),
            "h1": (None, _symmetric_matrix),
            "omega": (_REQUIRED, _positive),
            "leads": (_REQUIRED, None),  # list of lead blocks, validated below
        },
        "numerics": {
            "flavor": ("hilbert", _choice("hilbert", "floquet")),
            "n_max": (4, _int_min(0)),
            "t_max": (_REQUIRED, _positive),
            "n_out": (201, _int_min(2)),
            "dt_max": (None, _positive),
        },
    },
    "friction-scan": {
        "model": {
            "A": (_REQUIRED, _number),
            "B": (_REQUIRED, _number_list),
            "Delta": (_REQUIRED, _number),
            "omega": (_REQUIRED, _positive),
            "gamma_L": (1.0, _nonneg),
            "gamma_R": (1.0, _nonneg),
            "mu_L": (0.0, _number),
            "mu_R": (0.0, _number),
            "beta": (_REQUIRED, _positive),
        },
        "numerics": {
            "n_max": (8, _int_min(0)),
            "x_min": (-2.0, _number),
            "x_max": (2.0, _number),
            "n_x": (21, _int_min(1)),
            "y_min": (-2.0, _number),
            "y_max": (2.0, _number),
            "n_y": (21, _int_min(1)),
        },
    },
    "sh-run": {
        "model": {
            "E_d": (None, _number),
            "A": (_REQUIRED, _nonneg),
            "Omega": (_REQUIRED, _positive),
            "g": (_REQUIRED, _number),
            "hbar_omega": (_REQUIRED, _positive),
            "kT": (_REQUIRED, _positive),
            "Gamma": (_REQUIRED, _positive),
            "mu": (0.0, _number),
            "n_bessel": (None, _int_min(0)),
        },
        "numerics": {
            "n_traj": (1000, _int_min(1)),
            "t_max": (_REQUIRED, _positive),
            "dt": (None, _positive),
            "init": ("origin", _choice("origin", "boltzmann")),
            "n_out": (201, _int_min(2)),
        },
    },
}

_OUTPUT_SCHEMA = {
    "path": (None, _string),
    "format": ("csv", _choice("csv")),
}

_DEFAULT_PATHS = {
    "floquet-propagate": "floquet_propagate.csv",
    "qme-run": "qme_run.csv",
    "friction-scan": "friction_scan.csv",
    "sh-run": "sh_run.csv",
}


def _apply_schema(section: str, schema: dict, given) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"{section}: expected a mapping")
    unknown = set(given) - set(schema)
    if unknown:
        raise ConfigError(f"{section}.{sorted(unknown)[0]}: unknown key")
    out = {}
    missing = [k for k, (d, _) in schema.items() if d is _REQUIRED and k not in given]
    if missing:
        raise ConfigError(f"{section}: missing required keys {sorted(missing)}")
    for key, (default, check) in schema.items():
        if key in given and given[key] is not None:
            v = given[key]
            out[key] = check(f"{section}.{key}", v) if check else v
        else:
            out[key] = default if default is not _REQUIRED else None
    return out


def _finalize(workflow: str, model: dict, numerics: dict) -> None:
    """Materialize computed defaults and enforce cross-field invariants."""
    if workflow in ("floquet-propagate", "qme-run"):
        dim = len(model["h0"])
        if model["h1"] is None:
            model["h1"] = [[0.0] * dim for _ in range(dim)]
        elif len(model["h1"]) != dim:
            raise ConfigError("model.h1: dimension differs from model.h0")
    if workflow == "floquet-propagate":
        if numerics["observable"] is None:
            if len(model["h0"]) != 2:
                raise ConfigError(
                    "numerics.observable: required when the system is not two-level"
                )
            numerics["observable"] = [[1.0, 0.0], [0.0, -1.0]]
        elif len(numerics["observable"]) != len(model["h0"]):
            raise ConfigError("numerics.observable: dimension differs from model.h0")
    if workflow == "qme-run":
        leads = model["leads"]
        if not isinstance(leads, list) or not leads:
            raise ConfigError("model.leads: expected a non-empty list")
        dim = len(model["h0"])
        checked = []
        for i, lead in enumerate(leads):
            lb = _apply_schema(f"model.leads[{i}]", _LEAD_SCHEMA, lead)
            if len(lb["gamma"]) != dim:
                raise ConfigError(
                    f"model.leads[{i}].gamma: dimension differs from model.h0"
                )
            g = np.array(lb["gamma"])
            if np.min(np.linalg.eigvalsh(0.5 * (g + g.T))) < -1e-10:
                raise ConfigError(
                    f"model.leads[{i}].gamma: must be positive semidefinite"
                )
            checked.append(lb)
        model["leads"] = checked
    if workflow == "friction-scan":
        if numerics["x_max"] < numerics["x_min"]:
            raise ConfigError("numerics.x_max: must be >= numerics.x_min")
        if numerics["y_max"] < numerics["y_min"]:
            raise ConfigError("numerics.y_max: must be >= numerics.y_min")
    if workflow == "sh-run":
        if model["E_d"] is None:
            # particle-hole symmetric default: renormalized level at mu = 0
            model["E_d"] = model["g"] ** 2 / model["hbar_omega"]
        n_min = int(np.ceil(model["A"] / model["Omega"])) + 20
        if model["n_bessel"] is None:
            model["n_bessel"] = n_min
        elif model["n_bessel"] < n_min:
            raise ConfigError(f"model.n_bessel: must be >= {n_min}")
        if numerics["dt"] is None:
            numerics["dt"] = MAX_RATE_DT / max(model["Gamma"], model["hbar_omega"])
        elif numerics["dt"] * model["Gamma"] > MAX_RATE_DT * (1 + 1e-12) or numerics[
            "dt"
        ] * model["hbar_omega"] > MAX_RATE_DT * (1 + 1e-12):
            raise ConfigError(
                f"numerics.dt: violates dt*Gamma <= {MAX_RATE_DT} and "
                f"dt*omega <= {MAX_RATE_DT}"
            )


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run document into an effective RunConfig."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML: {e}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a mapping")
    allowed = {"workflow", "seed", "model", "numerics", "output"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown top-level key")
    if "workflow" not in doc:
        raise ConfigError(
            f"workflow: required, one of {WORKFLOWS}; "
            "other top-level keys: seed, model, numerics, output"
        )
    workflow = doc["workflow"]
    if workflow not in WORKFLOWS:
        raise ConfigError(f"workflow: must be one of {WORKFLOWS}, got {workflow!r}")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed: expected an integer, got {seed!r}")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed: must fit in an unsigned 64-bit integer")
    schema = _SCHEMAS[workflow]
    model = _apply_schema("model", schema["model"], doc.get("model"))
    numerics = _apply_schema("numerics", schema["numerics"], doc.get("numerics"))
    output = _apply_schema("output", _OUTPUT_SCHEMA, doc.get("output"))
    if output["path"] is None:
        output["path"] = _DEFAULT_PATHS[workflow]
    _finalize(workflow, model, numerics)
    return RunConfig(workflow, model, numerics, output, seed)


def effective_yaml(cfg: RunConfig) -> str:
    """Serialize the effective config; parse_config on it is the identity."""
    return yaml.safe_dump(cfg.as_dict(), sort_keys=True, default_flow_style=None)


# --- shipped presets -------------------------------------------------------

def _fig1(omega: float, A: float, B_list, Delta: float) -> dict:
    return {
        "workflow": "friction-scan",
        "seed": 0,
        "model": {
            "A": A,
            "B": B_list,
            "Delta": Delta,
            "omega": omega,
            "gamma_L": 1.0,
            "gamma_R": 1.0,
            "mu_L": 0.0,
            "mu_R": 0.0,
            "beta": 2.0,
        },
        "numerics": {"n_max": 8, "n_x": 21, "n_y": 21},
    }


def _fig2(A: float) -> dict:
    g = 0.0075
    return {
        "workflow": "sh-run",
        "seed": 0,
        "model": {
            "A": A,
            "Omega": 0.01,
            "g": g,
            "hbar_omega": 0.003,
            "kT": 0.01,
            "Gamma": 0.01,
        },
        "numerics": {"n_traj": 1000, "t_max": 4.0e4, "dt": 2.0, "init": "origin"},
    }


PRESETS = {
    "fig1a": _fig1(1.0, 1.0, [0.0, 0.5, 1.0, 2.0], 2.0),
    "fig1b": _fig1(0.5, 1.0, [0.0, 0.5, 1.0, 2.0], 2.0),
    "fig1-text": _fig1(1.0, 1.0, [2.0], 3.0),
    "fig2-A0.001": _fig2(0.001),
    "fig2-A0.01": _fig2(0.01),
    "fig2-A0.02": _fig2(0.02),
}


def preset_config(name: str) -> RunConfig:
    """Load one of the shipped named configurations."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return parse_config(yaml.safe_dump(PRESETS[name]))
