"""
JSON run configuration.

A config is one JSON object with a versioned ``schema`` field.  Matrices
are row-major nested arrays; lag families are lists of matrices.  Unknown
keys are rejected everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from dcclab.errors import DomainError
from dcclab.innovations import InnovationSpec
from dcclab.model import DccSpec, validate
from dcclab.simulator import SimConfig
from dcclab.stationarity import McSettings

__all__ = ["SCHEMA_VERSION", "CONFIG_SCHEMA", "ConfigError", "RunConfig", "load_config", "parse_config"]

SCHEMA_VERSION = "dcc-lab/1"

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}
_mats = {"type": "array", "items": _mat, "minItems": 1}

_innovation = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "family": {"enum": ["gaussian", "student_t"]},
        "dof": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "standardization": {"enum": ["unit_variance", "unit_scale", None]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "stream": {"type": "integer", "minimum": 0},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "model": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["V0", "A", "B", "W0", "M", "N"],
                    "properties": {
                        "kind": {"const": "general"},
                        "V0": _vec,
                        "A": _mats,
                        "B": _mats,
                        "W0": _mat,
                        "M": _mats,
                        "N": _mats,
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "m", "v0", "a", "b", "m_coefs", "n_coefs", "W0"],
                    "properties": {
                        "kind": {"const": "scalar"},
                        "m": {"type": "integer", "minimum": 1},
                        "v0": _num,
                        "a": _vec,
                        "b": _vec,
                        "m_coefs": _vec,
                        "n_coefs": _vec,
                        "W0": _mat,
                    },
                },
            ]
        },
        "innovations": _innovation,
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "integer", "minimum": 1},
                "burn_in": {"type": "integer", "minimum": 0},
                "Q0": {"oneOf": [_mat, {"type": "null"}]},
                "h0": {"oneOf": [_num, _vec]},
                "explode_threshold": {"type": "number", "exclusiveMinimum": 0},
                "stride": {"type": "integer", "minimum": 1},
            },
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "norm": {"enum": ["induced_inf", "spectral"]},
                "uniqueness": {"type": "boolean"},
                "lyapunov": {"type": "boolean"},
                "log_moment": {"type": "boolean"},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "integer", "minimum": 1000},
                "replications": {"type": "integer", "minimum": 1},
                "samples": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "starred": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["json", "text", "csv"]},
                    "uniqueItems": True,
                },
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m1_sq": _vec,
                "n1": _num,
                "innovations": {"type": "array", "items": _innovation, "minItems": 1},
                "runs": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class ConfigError(Exception):
    """Malformed or inadmissible configuration (CLI exit code 2)."""


@dataclass
class RunConfig:
    model: DccSpec | None
    innovations: InnovationSpec
    sim: SimConfig
    mc: McSettings
    norm: str = "induced_inf"
    check_uniqueness: bool = False
    starred: bool = False
    out_dir: Path = Path("out")
    formats: tuple = ("json", "text", "csv")
    experiment: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def require_model(self) -> DccSpec:
        if self.model is None:
            raise ConfigError("config has no 'model' section")
        return self.model


def _error_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def parse_config(raw: dict) -> RunConfig:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            detail = e.message
            if e.context:
                # oneOf: report the branch that got furthest
                best = max(e.context, key=lambda c: len(c.absolute_path))
                detail = f"{best.message} (at {_error_path(best)})"
            msgs.append(f"{_error_path(e)}: {detail}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))

    model = None
    if "model" in raw:
        try:
            model = DccSpec.from_dict(raw["model"])
        except (DomainError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc
        report = validate(model)
        if not report.ok:
            raise ConfigError(f"model is not admissible:\n{report}")

    try:
        innovations = InnovationSpec.from_dict(raw.get("innovations", {}))
        sim_raw = dict(raw.get("sim", {}))
        if sim_raw.get("Q0") is not None:
            sim_raw["Q0"] = np.asarray(sim_raw["Q0"], dtype=float)
        sim = SimConfig(**sim_raw)
    except (DomainError, ValueError, TypeError) as exc:
        raise ConfigError(f"{exc}") from exc

    checks = raw.get("checks", {})
    mc_raw = raw.get("mc", {})
    mc = McSettings(
        horizon=mc_raw.get("horizon", 10_000),
        replications=mc_raw.get("replications", 20),
        samples=mc_raw.get("samples", 4000),
        seed=mc_raw.get("seed"),
        lyapunov=checks.get("lyapunov", True),
        log_moment=checks.get("log_moment", True),
    )
    out = raw.get("output", {})
    return RunConfig(
        model=model,
        innovations=innovations,
        sim=sim,
        mc=mc,
        norm=checks.get("norm", "induced_inf"),
        check_uniqueness=checks.get("uniqueness", False),
        starred=mc_raw.get("starred", False),
        out_dir=Path(out.get("dir", "out")),
        formats=tuple(out.get("formats", ("json", "text", "csv"))),
        experiment=dict(raw.get("experiment", {})),
        raw=raw,
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(raw)
