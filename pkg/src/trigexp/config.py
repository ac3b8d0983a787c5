"""Versioned JSON configuration for the study commands.

Unknown keys are rejected rather than ignored, so a misspelled
hyperparameter fails loudly instead of silently taking its default.
"""
import json

import jsonschema

from .expfam import ModelConfig
from .harness import TargetDensity
from .posterior import MCMCParams

SCHEMA_VERSION = 1

_TARGET = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["logsine", "finite_theta"]},
        "theta": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_MCMC = {
    "type": "object",
    "properties": {
        "step_scale": {"type": "number", "minimum": 0},
        "burn_in": {"type": "integer", "minimum": 0},
        "thin": {"type": "integer", "minimum": 1},
        "n_draws": {"type": "integer", "minimum": 1},
        "tune": {"type": "boolean"},
        "target_accept": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "quad_points": {"type": "integer", "minimum": 256},
    },
    "additionalProperties": False,
}

_COMMON = {
    "schema": {"const": SCHEMA_VERSION},
    "target": _TARGET,
    "p": {"type": "integer", "minimum": 1},
    "Q": {"type": "number", "exclusiveMinimum": 0},
    "quad_points": {"type": "integer", "minimum": 256},
    "sigma2": {"type": "number", "exclusiveMinimum": 0},
    "seed": {"type": "integer", "minimum": 0},
    "threads": {"type": "integer", "minimum": 1},
    "n_grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
}

RATE_STUDY_SCHEMA = {
    "type": "object",
    "properties": {
        **_COMMON,
        "estimator": {"enum": ["fixed", "sieve", "laplace"]},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "replications": {"type": "integer", "minimum": 50},
        "n_grid": {**_COMMON["n_grid"], "minItems": 3},
    },
    "required": ["schema"],
    "additionalProperties": False,
}

ADAPTIVE_STUDY_SCHEMA = {
    "type": "object",
    "properties": {
        **_COMMON,
        "smoothness_grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "weights": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "p0": {"type": "integer", "minimum": 1},
        "replications": {"type": "integer", "minimum": 1},
    },
    "required": ["schema"],
    "additionalProperties": False,
}

CONTRACTION_SCHEMA = {
    "type": "object",
    "properties": {
        **_COMMON,
        "M": {"type": "number", "exclusiveMinimum": 0},
        "radius": {"type": ["number", "null"], "minimum": 0},
        "replications": {"type": "integer", "minimum": 1},
        "mcmc": _MCMC,
    },
    "required": ["schema"],
    "additionalProperties": False,
}

RATE_STUDY_DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "target": {"kind": "logsine"},
    "p": 2,
    "Q": 1.0,
    "quad_points": 4096,
    "sigma2": 1.0,
    "estimator": "laplace",
    "gamma": 0.1,
    "n_grid": [256, 512, 1024, 2048, 4096, 8192, 16384],
    "replications": 100,
    "seed": 0,
    "threads": 1,
}

ADAPTIVE_STUDY_DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "target": {"kind": "logsine"},
    "p": 2,
    "Q": 1.0,
    "quad_points": 4096,
    "sigma2": 1.0,
    "smoothness_grid": [1, 2, 3],
    "weights": None,
    "p0": 2,
    "n_grid": [4000],
    "replications": 20,
    "seed": 0,
    "threads": 1,
}

CONTRACTION_DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "target": {"kind": "logsine"},
    "p": 2,
    "Q": 1.0,
    "quad_points": 4096,
    "sigma2": 1.0,
    "n_grid": [250, 1000, 4000],
    "M": 5.0,
    "radius": None,
    "replications": 5,
    "mcmc": {},
    "seed": 0,
    "threads": 1,
}


class ConfigError(ValueError):
    pass


def resolve(raw, schema, defaults):
    """Validate ``raw`` and merge it over ``defaults``; returns the resolved dict."""
    try:
        jsonschema.validate(raw, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from None
    out = dict(defaults)
    out.update(raw)
    if "mcmc" in out:
        out["mcmc"] = {**MCMCParams().to_dict(), **(out["mcmc"] or {})}
    return out


def load(path, schema, defaults):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return resolve(raw, schema, defaults)


def model_config(cfg):
    try:
        return ModelConfig(p=cfg["p"], Q=cfg["Q"], quad_points=cfg["quad_points"], sigma2=cfg["sigma2"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def target(cfg):
    return TargetDensity.from_dict(cfg["target"])
