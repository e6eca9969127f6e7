"""Config parsing and result files.

Units in files: frequencies in Hz, durations in seconds, angles in radians.
Conversion to angular frequencies happens here, at the config boundary.

CSV layout (format ``ququart-scan/1``)::

    # ququart <version> config-sha256=<hash> format=ququart-scan/1
    <parameter>,<curve>,<curve>_err,...
    <one row per grid point>

Every JSON output carries ``version`` and ``config_sha256`` keys.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .ms import NBAR_STRETCH, STRETCH_MODE_FREQ, TAU_MS_PAPER, MotionState, params_for_duration, solve_gate_params
from .noise import NoiseModel
from .transpiler import SUPPORTED_GATES, QubitCircuit

CSV_FORMAT = "ququart-scan/1"
SUMMARY_FORMAT = "ququart-summary/1"
KINDS = ("rabi", "ms-scan", "parity", "bell", "transpile")

_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

GRID_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"start": _nonneg, "stop": _pos, "points": {"type": "integer", "minimum": 2},
                           "endpoint": {"type": "boolean"}},
            "required": ["start", "stop", "points"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"values": {"type": "array", "items": {"type": "number"}, "minItems": 2}},
            "required": ["values"],
            "additionalProperties": False,
        },
    ]
}

NOISE_SCHEMA = {
    "type": "object",
    "properties": {
        "dephasing_rate_per_level": {"type": "array", "items": _nonneg, "minItems": 4, "maxItems": 4},
        "laser_dephasing_rate": _nonneg,
        "crosstalk_fraction": {"type": "number", "minimum": 0, "maximum": 0.2},
        "spam": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}, "minItems": 2, "maxItems": 2},
        "transfer_error": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}

CIRCUIT_SCHEMA = {
    "type": "object",
    "properties": {
        "format": {"type": "string"},
        "n_qubits": {"type": "integer", "minimum": 1, "maximum": 4},
        "gates": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "gate": {"enum": list(SUPPORTED_GATES)},
                    "qubits": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1, "maxItems": 2},
                    "angle": {"type": "number"},
                },
                "required": ["gate", "qubits"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["n_qubits", "gates"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "experiment": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "shots": {"type": "integer", "minimum": 0},
        "rabi_frequency_hz": _pos,
        "detuning_hz": _pos,
        "gate_duration": _pos,
        "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.3},
        "mode_frequency_hz": _pos,
        "nbar": _nonneg,
        "fock_cutoff": {"type": "integer", "minimum": 1},
        "debye_waller": {"type": "boolean"},
        "ion": {"type": "integer", "minimum": 0, "maximum": 1},
        "level": {"type": "integer", "minimum": 1, "maximum": 3},
        "grid": GRID_SCHEMA,
        "noise": NOISE_SCHEMA,
        "state": {
            "type": "object",
            "properties": {"A": {"type": "number", "minimum": 0, "maximum": 1}, "phi0": {"type": "number"}},
            "required": ["A", "phi0"],
            "additionalProperties": False,
        },
        "bootstrap": {"type": "integer", "minimum": 0},
        "circuit": {"oneOf": [{"type": "string"}, CIRCUIT_SCHEMA]},
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "required": ["experiment"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"experiment": {"const": "rabi"}}},
         "then": {"required": ["rabi_frequency_hz", "level", "grid"]}},
        {"if": {"properties": {"experiment": {"const": "ms-scan"}}}, "then": {"required": ["grid"]}},
        {"if": {"properties": {"experiment": {"const": "transpile"}}}, "then": {"required": ["circuit"]}},
    ],
}


class ConfigError(ValueError):
    """Schema or parse failure; ``location`` names the offending field or line."""

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


def _location(err: jsonschema.ValidationError) -> str:
    path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
    return "$" + path


def load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, f"{path}:{e.lineno}:{e.colno}") from None


def _validate(data, schema):
    validator = jsonschema.Draft202012Validator(schema)
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        raise ConfigError(err.message, _location(err))


def validate_config(config: dict) -> dict:
    _validate(config, CONFIG_SCHEMA)
    grid = config.get("grid")
    if grid and "values" in grid and np.any(np.diff(grid["values"]) <= 0):
        raise ConfigError("grid values must be strictly increasing", "$.grid.values")
    if grid and "start" in grid and grid["stop"] <= grid["start"]:
        raise ConfigError("stop must exceed start", "$.grid.stop")
    return config


def load_config(path, overrides: dict | None = None) -> dict:
    config = load_json(path)
    for k, v in (overrides or {}).items():
        if v is not None:
            config[k] = v
    return validate_config(config)


def parse_circuit(data) -> QubitCircuit:
    _validate(data, CIRCUIT_SCHEMA)
    for i, g in enumerate(data["gates"]):
        if any(q >= data["n_qubits"] for q in g["qubits"]):
            raise ConfigError(f"qubit index out of range for {data['n_qubits']} qubits", f"$.gates[{i}].qubits")
    try:
        return QubitCircuit(data["n_qubits"], [dict(name=g["gate"], qubits=tuple(g["qubits"]), angle=g.get("angle"))
                                                for g in data["gates"]])
    except ValueError as e:
        raise ConfigError(str(e), "$.gates") from None


def load_circuit(path) -> QubitCircuit:
    return parse_circuit(load_json(path))


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# --- config -> physics objects (Hz -> rad/s here) ---

def grid_from_config(grid: dict) -> np.ndarray:
    if "values" in grid:
        return np.asarray(grid["values"], dtype=float)
    return np.linspace(grid["start"], grid["stop"], grid["points"], endpoint=grid.get("endpoint", True))


def noise_from_config(config: dict) -> NoiseModel:
    return NoiseModel(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in config.get("noise", {}).items()})


def pulse_params_from_config(config: dict):
    omega_m = 2 * np.pi * config.get("mode_frequency_hz", STRETCH_MODE_FREQ / (2 * np.pi))
    dw = config.get("debye_waller", True)
    eta = config.get("eta")
    if "detuning_hz" in config:
        from .ms import lamb_dicke_parameter

        eta = eta if eta is not None else lamb_dicke_parameter(omega_m)
        return solve_gate_params(eta, 2 * np.pi * config["detuning_hz"], omega_m, debye_waller=dw)
    return params_for_duration(config.get("gate_duration", TAU_MS_PAPER), eta, omega_m, debye_waller=dw)


def motion_from_config(config: dict) -> MotionState:
    return MotionState.thermal(config.get("nbar", NBAR_STRETCH), config.get("fock_cutoff"))


# --- writers ---

def _fmt(x) -> str:
    return format(float(x), ".17g")


def scan_to_csv(scan, config_sha: str) -> str:
    buf = _io.StringIO()
    buf.write(f"# ququart {__version__} config-sha256={config_sha} format={CSV_FORMAT}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = scan.columns()
    w.writerow([scan.parameter] + [c for name in cols for c in (name, f"{name}_err")])
    for i, x in enumerate(scan.grid):
        row = [_fmt(x)]
        for name in cols:
            row += [_fmt(scan.estimates[name][i]), _fmt(scan.errors[name][i])]
        w.writerow(row)
    return buf.getvalue()


def read_scan_csv(path):
    lines = Path(path).read_text().splitlines()
    header = next(csv.reader([lines[1]]))
    data = np.array([[float(v) for v in row] for row in csv.reader(lines[2:])])
    return header, data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def summary_json(summary: dict, config_sha: str) -> str:
    out = {"format": SUMMARY_FORMAT, "version": __version__, "config_sha256": config_sha}
    out.update(_jsonable(summary))
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
