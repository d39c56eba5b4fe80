"""JSON experiment configuration: parsing, validation, serialization.

The document schema (all keys optional except ``kind``)::

    {
      "kind": "diag-decay" | "gmrf" | "shrink-compare",
      "grid": {"rows": 10, "cols": 10},
      "truth": {"c": 30.0, "alpha": 0.002}        # diag-decay / shrink-compare
             | {"theta": [5.0, -0.2, 0.5]},       # gmrf
      "sample_sizes": [5, 6, ...],
      "replications": 50,
      "seed": 0,
      "estimators": ["sample", "decay2", ...]
    }

Unknown keys are rejected.  Structural problems raise :class:`ParseError`,
violated invariants raise :class:`ValidationError`.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ParseError, ValidationError
from .simulation import (
    DEFAULT_DIAG_TRUTH,
    DEFAULT_GMRF_TRUTH,
    ExperimentConfig,
    ExperimentKind,
)

__all__ = ["parse_config", "config_from_json", "serialize_config"]

_TOP_KEYS = {"kind", "grid", "truth", "sample_sizes", "replications", "seed", "estimators"}


def _require_int(doc, key, default):
    if key not in doc:
        return default
    v = doc[key]
    if type(v) is not int:
        raise ParseError(f"field '{key}' must be an integer")
    return v


def _parse_grid(doc) -> tuple[int, int]:
    if "grid" not in doc:
        return (10, 10)
    g = doc["grid"]
    if not isinstance(g, dict) or set(g) != {"rows", "cols"}:
        raise ParseError("field 'grid' must be an object with keys 'rows' and 'cols'")
    if type(g["rows"]) is not int or type(g["cols"]) is not int:
        raise ParseError("grid dimensions must be integers")
    return (g["rows"], g["cols"])


def _parse_truth(doc, kind: ExperimentKind) -> tuple[float, ...]:
    default = DEFAULT_GMRF_TRUTH if kind is ExperimentKind.GMRF else DEFAULT_DIAG_TRUTH
    if "truth" not in doc:
        return default
    t = doc["truth"]
    if not isinstance(t, dict):
        raise ParseError("field 'truth' must be an object")
    if kind is ExperimentKind.GMRF:
        if set(t) - {"theta"}:
            raise ParseError(f"unknown truth keys for gmrf: {sorted(set(t) - {'theta'})}")
        theta = t.get("theta", list(default))
        if (
            not isinstance(theta, list)
            or len(theta) != 3
            or not all(isinstance(v, (int, float)) and type(v) is not bool for v in theta)
        ):
            raise ParseError("truth 'theta' must be a list of 3 numbers")
        return tuple(float(v) for v in theta)
    if set(t) - {"c", "alpha"}:
        raise ParseError(f"unknown truth keys: {sorted(set(t) - {'c', 'alpha'})}")
    c = t.get("c", default[0])
    alpha = t.get("alpha", default[1])
    for name, v in (("c", c), ("alpha", alpha)):
        if not isinstance(v, (int, float)) or type(v) is bool:
            raise ParseError(f"truth '{name}' must be a number")
    return (float(c), float(alpha))


def config_from_json(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level value must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown configuration keys: {sorted(unknown)}")
    if "kind" not in doc:
        raise ParseError("missing required key 'kind'")
    try:
        kind = ExperimentKind(doc["kind"])
    except ValueError:
        valid = ", ".join(k.value for k in ExperimentKind)
        raise ParseError(f"unknown kind {doc['kind']!r}; expected one of: {valid}") from None

    grid = _parse_grid(doc)
    truth = _parse_truth(doc, kind)

    sizes = doc.get("sample_sizes", [])
    if not isinstance(sizes, list) or not all(type(v) is int for v in sizes):
        raise ParseError("field 'sample_sizes' must be a list of integers")

    replications = _require_int(doc, "replications", 50)
    seed = _require_int(doc, "seed", 0)

    estimators = doc.get("estimators", [])
    if not isinstance(estimators, list) or not all(isinstance(e, str) for e in estimators):
        raise ParseError("field 'estimators' must be a list of strings")

    try:
        return ExperimentConfig(
            kind=kind,
            grid=grid,
            truth_params=truth,
            sample_sizes=tuple(sizes),
            replications=replications,
            seed=seed,
            estimator_set=tuple(estimators),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def parse_config(path) -> ExperimentConfig:
    """Read and parse a configuration file."""
    return config_from_json(Path(path).read_text(encoding="utf-8"))


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical JSON for a configuration; parses back to an equal config."""
    if config.kind is ExperimentKind.GMRF:
        truth = {"theta": list(config.truth_params)}
    else:
        truth = {"c": config.truth_params[0], "alpha": config.truth_params[1]}
    doc = {
        "kind": config.kind.value,
        "grid": {"rows": config.grid[0], "cols": config.grid[1]},
        "truth": truth,
        "sample_sizes": list(config.sample_sizes),
        "replications": config.replications,
        "seed": config.seed,
        "estimators": list(config.estimator_set),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
