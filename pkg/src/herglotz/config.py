"""Scenario configuration: JSON schema validation and object construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from . import catalog
from .errors import ConfigError, ExpressionError
from .expr import generator_from_expression, lagrangian_from_expression, time_function_from_expression
from .lagrangian import GaugeSpec, LagrangianSpec, check_gauge

KINDS = ("mechanics", "field-string", "field-kg", "discrete")

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_positive = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

# parameters that must be strictly positive / non-negative wherever they appear
_PARAMETERS = {
    "type": "object",
    "properties": {
        "m": _positive,
        "mu": _positive,
        "tension": _positive,
        "l": _positive,
        "k": _nonneg,
        "g": _nonneg,
        "mass": _nonneg,
        "gamma": _nonneg,
    },
    "additionalProperties": _number,
}

_LAGRANGIAN = {
    "oneOf": [
        {"type": "string"},
        {
            "type": "object",
            "properties": {
                "expression": {"type": "string"},
                "n_dof": {"type": "integer", "minimum": 1},
                "gauge": {
                    "type": "object",
                    "properties": {"f": {"type": "string"}, "gamma": {"type": "string"}},
                    "required": ["f", "gamma"],
                    "additionalProperties": False,
                },
            },
            "required": ["expression", "n_dof"],
            "additionalProperties": False,
        },
    ]
}

_CHECK = {
    "type": "object",
    "properties": {"name": {"type": "string"}, "tolerance": _positive},
    "required": ["name", "tolerance"],
}

_GENERATOR = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "type": {"enum": ["time_translation", "coordinate_translation", "expression"]},
        "index": {"type": "integer", "minimum": 1},
        "xi": {"type": "string"},
        "eta": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["name", "type"],
}

_BASE = {
    "scenario": {"type": "string", "minLength": 1},
    "kind": {"enum": list(KINDS)},
    "lagrangian": _LAGRANGIAN,
    "parameters": _PARAMETERS,
    "output": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "checks": {"type": "array", "items": _CHECK},
}

_GRID = {
    "type": "object",
    "properties": {
        "x_min": _number,
        "x_max": _number,
        "nx": {"type": "integer", "minimum": 8},
        "dt": _positive,
        "courant": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.9},
        "boundary": {"enum": ["fixed", "periodic"]},
    },
    "required": ["x_min", "x_max", "nx", "boundary"],
    "oneOf": [{"required": ["dt"]}, {"required": ["courant"]}],
}

_INITIAL_FIELD = {
    "type": "object",
    "properties": {"profile": {"enum": ["sine", "gaussian", "plane-wave", "homogeneous"]}},
    "required": ["profile"],
    "additionalProperties": _number,
}

SCHEMAS = {
    "mechanics": {
        "type": "object",
        "properties": {
            **_BASE,
            "initial": {
                "type": "object",
                "properties": {"t": _number, "q": _vector, "v": _vector, "S": _number},
                "required": ["q", "v"],
                "additionalProperties": False,
            },
            "t_end": _number,
            "h": _positive,
            "generators": {"type": "array", "items": _GENERATOR},
            "threshold": _positive,
            "closed_form": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "name": {"type": "string"},
                        "component": {"type": "string", "pattern": "^(q|v)[1-9][0-9]*$|^S$"},
                        "expression": {"type": "string"},
                        "tolerance": _positive,
                    },
                    "required": ["name", "component", "expression", "tolerance"],
                },
            },
        },
        "required": ["scenario", "kind", "lagrangian", "parameters", "initial", "t_end", "h"],
    },
    "field": {
        "type": "object",
        "properties": {
            **_BASE,
            "lagrangian": {"enum": ["damped-string", "dissipative-kg"]},
            "grid": _GRID,
            "initial": _INITIAL_FIELD,
            "t_end": _positive,
            "record_every": {"type": "integer", "minimum": 1},
            "reference": {"type": "string"},
        },
        "required": ["scenario", "kind", "lagrangian", "parameters", "grid", "initial", "t_end", "checks"],
    },
    "discrete": {
        "type": "object",
        "properties": {
            **_BASE,
            "t_a": _number,
            "t_b": _number,
            "q_a": _vector,
            "q_b": {"oneOf": [_vector, {"const": "shoot"}]},
            "shoot_velocity": _vector,
            "s_a": _number,
            "K": {"type": "integer", "minimum": 2},
            "tol": _positive,
            "max_iter": {"type": "integer", "minimum": 1},
            "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "reference_h": _positive,
        },
        "required": ["scenario", "kind", "lagrangian", "parameters", "t_a", "t_b", "q_a", "q_b", "K"],
    },
}

# physical parameters each catalog entry requires
REQUIRED_PARAMETERS = {
    "damped-oscillator": ("m", "k", "gamma"),
    "free-particle-dissipative": ("m", "gamma"),
    "spherical-pendulum": ("m", "l", "g", "gamma"),
    "damped-string": ("mu", "tension", "gamma"),
    "dissipative-kg": ("mass", "gamma"),
}


def _schema_for(kind: str) -> dict:
    return SCHEMAS["field" if kind.startswith("field-") else kind]


def _describe(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in (err.instance or {})]
        return f"missing required key {missing[0]!r} at {where}"
    return f"{where}: {err.message}"


@dataclass
class ScenarioConfig:
    scenario: str
    kind: str
    raw: dict = field(repr=False)
    source: Path | None = None

    @property
    def parameters(self) -> dict[str, float]:
        return dict(self.raw.get("parameters", {}))

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def checks(self) -> list[dict]:
        return list(self.raw.get("checks", []))

    def get(self, key: str, default: Any = None) -> Any:
        return self.raw.get(key, default)

    def output_dir(self, override=None) -> Path:
        if override is not None:
            return Path(override)
        out = self.raw.get("output", f"out/{self.scenario}")
        base = self.source.parent if self.source is not None else Path.cwd()
        return (base / out) if not Path(out).is_absolute() else Path(out)

    # -- object construction -------------------------------------------------
    def lagrangian(self) -> LagrangianSpec:
        lag = self.raw["lagrangian"]
        params = self.parameters
        if isinstance(lag, str):
            return catalog.lookup(lag, **params)
        try:
            L = lagrangian_from_expression(lag["expression"], lag["n_dof"], params)
            gauge = GaugeSpec()
            if "gauge" in lag:
                f = time_function_from_expression(lag["gauge"]["f"], params)
                gam = time_function_from_expression(lag["gauge"]["gamma"], params)
                gauge = GaugeSpec(f, lambda *x: [float(gam(*x))])
        except ExpressionError as exc:
            raise ConfigError(f"lagrangian: {exc}") from exc
        if "gauge" in lag:
            report = check_gauge(gauge, [[0.0], [0.5], [1.0], [2.0]])
            if not report.passed:
                raise ConfigError(f"gauge gamma is not the derivative of f (deviation {report.max_deviation[0]:.3g})")
        return LagrangianSpec(lag["n_dof"], L, gauge, "expression")

    def field_model(self):
        return catalog.lookup(self.raw["lagrangian"], **self.parameters)

    def generators(self, n_dof: int):
        from .noether import SymmetryGenerator, coordinate_translation, time_translation

        out = []
        for g in self.raw.get("generators", []):
            kind = g["type"]
            if kind == "time_translation":
                out.append(time_translation(n_dof, g["name"]))
            elif kind == "coordinate_translation":
                i = g.get("index")
                if i is None or i > n_dof:
                    raise ConfigError(f"generator {g['name']!r}: index must be in 1..{n_dof}")
                out.append(coordinate_translation(i - 1, n_dof, g["name"]))
            else:
                if "xi" not in g or "eta" not in g:
                    raise ConfigError(f"generator {g['name']!r}: missing required key 'xi' or 'eta'")
                if len(g["eta"]) != n_dof:
                    raise ConfigError(f"generator {g['name']!r}: eta needs {n_dof} components")
                try:
                    xi = generator_from_expression(g["xi"], n_dof, self.parameters)
                    etas = [generator_from_expression(e, n_dof, self.parameters) for e in g["eta"]]
                except ExpressionError as exc:
                    raise ConfigError(f"generator {g['name']!r}: {exc}") from exc
                out.append(SymmetryGenerator(xi, lambda t, q, etas=etas: [e(t, q) for e in etas], g["name"]))
        return out


def validate(raw: Any, source: Path | None = None) -> ScenarioConfig:
    """Schema-check ``raw`` and return a :class:`ScenarioConfig`; raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("scenario", "kind"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r} at <root>")
    kind = raw["kind"]
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {list(KINDS)}, got {kind!r}")
    validator = jsonschema.Draft202012Validator(_schema_for(kind))
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(e.absolute_path), list(e.absolute_path)))
    if errors:
        raise ConfigError(_describe(errors[0]))

    lag = raw["lagrangian"]
    if kind == "field-string" and lag != "damped-string":
        raise ConfigError("field-string scenarios use lagrangian 'damped-string'")
    if kind == "field-kg" and lag != "dissipative-kg":
        raise ConfigError("field-kg scenarios use lagrangian 'dissipative-kg'")
    if kind == "field-kg" and raw["grid"]["boundary"] != "periodic":
        raise ConfigError("field-kg scenarios require periodic boundaries")
    if isinstance(lag, str):
        if lag not in REQUIRED_PARAMETERS:
            raise ConfigError(f"unknown lagrangian {lag!r}; choose from {sorted(REQUIRED_PARAMETERS)}")
        for key in REQUIRED_PARAMETERS[lag]:
            if key not in raw["parameters"]:
                raise ConfigError(f"missing required key {key!r} at parameters")
    if kind == "discrete" and raw["q_b"] == "shoot" and "shoot_velocity" not in raw:
        raise ConfigError("missing required key 'shoot_velocity' (needed when q_b is 'shoot')")
    return ScenarioConfig(raw["scenario"], kind, raw, source)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return validate(raw, path)


def bundled_dir() -> Path:
    return Path(__file__).parent / "scenarios"


def bundled() -> list[Path]:
    return sorted(bundled_dir().glob("*.json"))


def resolve(name_or_path) -> Path:
    """A config path, or the stem of a bundled scenario."""
    p = Path(name_or_path)
    if p.exists():
        return p
    candidate = bundled_dir() / (p.name if p.suffix == ".json" else f"{p.name}.json")
    if candidate.exists():
        return candidate
    raise ConfigError(f"no config at {name_or_path!r} and no bundled scenario of that name")
