"""JSON schemas for files read and written by the toolkit."""

import jsonschema

_NUMBER = {"type": "number"}
_PIECEWISE = {
    "type": "object",
    "required": ["breakpoints", "pieces"],
    "properties": {
        "breakpoints": {"type": "array", "items": _NUMBER, "minItems": 2},
        "pieces": {
            "type": "array",
            "items": {"type": "array", "items": _NUMBER, "minItems": 1, "maxItems": 4},
            "minItems": 1,
        },
    },
    "additionalProperties": False,
}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "SLProblem",
    "type": "object",
    "required": ["a", "b", "q", "r"],
    "properties": {
        "a": _NUMBER,
        "b": _NUMBER,
        "init_slope": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
        "q": _PIECEWISE,
        "r": _PIECEWISE,
        "name": {"type": "string"},
    },
    "additionalProperties": False,
}

SPECTRUM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "SpectrumReport",
    "type": "object",
    "required": ["real_eigs", "nonreal", "M", "N", "bound_ok"],
    "properties": {
        "real_eigs": {"type": "array", "items": _NUMBER},
        "nonreal": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["re", "im", "residual"],
                "properties": {"re": _NUMBER, "im": _NUMBER, "residual": _NUMBER,
                               "multiplicity": {"enum": ["simple", "suspected_multiple"]}},
            },
        },
        "M": {"type": "integer", "minimum": 0},
        "N": {"type": "integer", "minimum": 0},
        "bound_ok": {"type": "boolean"},
        "search_region": {"type": "array", "items": _NUMBER, "minItems": 4, "maxItems": 4},
        "real_window": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}

_ENDPOINT_ROW = {
    "type": "object",
    "required": ["lemma", "case", "reference", "predicted", "observed", "applicable", "match"],
    "properties": {
        "lemma": {"type": "string"},
        "case": {"type": ["integer", "null"]},
        "respective": {"type": "boolean"},
        "reference": {"enum": ["phi", "psi"]},
        "reference_zero": {"type": ["number", "null"]},
        "predicted": {"enum": ["none", "once", None]},
        "observed": {"type": ["integer", "null"]},
        "applicable": {"type": "boolean"},
        "match": {"type": ["boolean", "null"]},
        "reason": {"type": ["string", "null"]},
    },
}

_ENDPOINT = {
    "type": "object",
    "required": ["endpoint", "rows", "match"],
    "properties": {
        "endpoint": {"enum": ["a", "b"]},
        "rows": {"type": "array", "items": _ENDPOINT_ROW},
        "match": {"type": ["boolean", "null"]},
    },
}

GHOST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "GhostReport",
    "type": "object",
    "required": ["lambda", "G_sign", "identity_residual", "interlace_ok", "left", "right",
                 "interior_vanish_count", "phi_zeros", "psi_zeros"],
    "properties": {
        "lambda": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
        "G_sign": {"enum": ["positive", "negative", "indefinite"]},
        "G_b_relative": _NUMBER,
        "identity_residual": _NUMBER,
        "interlace_ok": {"type": "boolean"},
        "interlace_violations": {"type": "array"},
        "phi_zeros": {"type": "array", "items": _NUMBER},
        "psi_zeros": {"type": "array", "items": _NUMBER},
        "left": _ENDPOINT,
        "right": _ENDPOINT,
        "endpoint_audit": {"type": "boolean"},
        "interior_vanish_count": {"type": "integer", "minimum": 0},
        "weight_kind": {"type": "string"},
    },
}


def validate(instance, schema, error_cls=ValueError):
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        raise error_cls(f"schema violation at {list(exc.absolute_path)}: {exc.message}") from exc
