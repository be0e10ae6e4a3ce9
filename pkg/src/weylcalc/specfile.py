"""Manifold specification files (JSON) and their validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import jsonschema

from .connection import WeylManifold
from .expr import ParseError, ScalarField, parse
from .mapping import ConformalMapping
from .verify import DEFAULT_GAP, DEFAULT_TOL, SuiteConfig

__all__ = ["SpecError", "ManifoldSpec", "SCHEMA", "load_spec", "spec_from_dict"]

_EXPR = {"type": "string"}
_FORM = {"type": "array", "items": _EXPR, "minItems": 2}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["dimension", "coordinates", "metric"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 2},
        "coordinates": {"type": "array", "items": {"type": "string", "minLength": 1}, "uniqueItems": True},
        "metric": {
            "type": "array",
            "items": {"type": "array", "items": {"type": ["string", "null"]}},
        },
        "weyl_form": _FORM,
        "connection_form": _FORM,
        "T": _FORM,
        "S": _FORM,
        "mapping": {
            "type": "object",
            "additionalProperties": False,
            "required": ["P", "Q"],
            "properties": {"P": _FORM, "Q": _FORM},
        },
        "gauge": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lambda"],
            "properties": {"lambda": _EXPR},
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "box": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
                "points": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "gap": {"type": "number", "exclusiveMinimum": 0},
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


class SpecError(ValueError):
    """Invalid specification. ``field`` is a slash path such as ``metric/0/1``."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field or '<root>'}: {message}")


@dataclass(frozen=True)
class ManifoldSpec:
    name: str
    manifold: WeylManifold
    mapping: ConformalMapping | None
    gauge: ScalarField | None
    box: tuple[tuple[float, float], ...]
    points: int
    seed: int
    tolerance: float
    gap: float
    source: dict

    @property
    def dimension(self) -> int:
        return self.manifold.n

    @property
    def coordinates(self) -> tuple[str, ...]:
        return self.manifold.coords

    def suite_config(self, **overrides) -> SuiteConfig:
        cfg = SuiteConfig(
            box=list(self.box),
            points=self.points,
            seed=self.seed,
            tol=self.tolerance,
            gap=self.gap,
            mapping=self.mapping,
            gauge=self.gauge,
            name=self.name,
        )
        return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def _parse(text: str, coords, where: str) -> ScalarField:
    try:
        return parse(text, coords)
    except ParseError as exc:
        raise SpecError(where, str(exc)) from None


def _form(data: dict, keys: tuple[str, str], n: int, coords) -> tuple[ScalarField, ...]:
    present = [k for k in keys if k in data]
    if len(present) > 1:
        raise SpecError(keys[1], f"give either {keys[0]!r} or its alias {keys[1]!r}, not both")
    if not present:
        return tuple(_parse("0", coords, keys[0]) for _ in range(n))
    key = present[0]
    return _vector(data[key], n, coords, key)


def _vector(values, n: int, coords, key: str) -> tuple[ScalarField, ...]:
    if len(values) != n:
        raise SpecError(key, f"expected {n} expressions, got {len(values)}")
    return tuple(_parse(v, coords, f"{key}/{i}") for i, v in enumerate(values))


def spec_from_dict(data: Any, name: str = "") -> ManifoldSpec:
    """Validate an already decoded spec object."""
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SpecError("/".join(str(p) for p in err.absolute_path), err.message)

    n = data["dimension"]
    coords = data["coordinates"]
    if len(coords) != n:
        raise SpecError("coordinates", f"expected {n} names, got {len(coords)}")
    for i, c in enumerate(coords):
        if not c.isidentifier():
            raise SpecError(f"coordinates/{i}", f"{c!r} is not an identifier")
    try:
        parse("0", coords)
    except ValueError as exc:
        raise SpecError("coordinates", str(exc)) from None

    metric = data["metric"]
    if len(metric) != n or any(len(row) != n for row in metric):
        raise SpecError("metric", f"expected a {n}x{n} matrix")
    g: list[list[Any]] = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            text = metric[i][j]
            if text is None:
                raise SpecError(f"metric/{i}/{j}", "upper-triangle entries are required")
            g[i][j] = g[j][i] = _parse(text, coords, f"metric/{i}/{j}")
            if j > i and metric[j][i] is not None and metric[j][i] != text:
                raise SpecError(f"metric/{j}/{i}", f"must be null or equal to metric/{i}/{j} ({text!r})")

    T = _form(data, ("weyl_form", "T"), n, coords)
    S = _form(data, ("connection_form", "S"), n, coords)
    label = data.get("name", name)
    m = WeylManifold.build(coords, g, T, S, name=label)

    mapping = None
    if "mapping" in data:
        P = _vector(data["mapping"]["P"], n, coords, "mapping/P")
        Q = _vector(data["mapping"]["Q"], n, coords, "mapping/Q")
        mapping = ConformalMapping(P, Q)
    gauge = _parse(data["gauge"]["lambda"], coords, "gauge/lambda") if "gauge" in data else None

    sampling = data.get("sampling", {})
    box = sampling.get("box", [[-0.5, 0.5]] * n)
    if len(box) != n:
        raise SpecError("sampling/box", f"expected {n} intervals, got {len(box)}")
    for i, (lo, hi) in enumerate(box):
        if not lo < hi:
            raise SpecError(f"sampling/box/{i}", f"need lo < hi, got [{lo}, {hi}]")

    tol = float(data.get("tolerance", DEFAULT_TOL))
    gap = float(data.get("gap", DEFAULT_GAP))
    if gap < 1000 * tol:
        raise SpecError("gap", f"gap must be at least 1000 * tolerance ({1000 * tol:g})")
    return ManifoldSpec(
        name=label,
        manifold=m,
        mapping=mapping,
        gauge=gauge,
        box=tuple((float(lo), float(hi)) for lo, hi in box),
        points=int(sampling.get("points", 100)),
        seed=int(sampling.get("seed", 0)),
        tolerance=tol,
        gap=gap,
        source=data,
    )


def load_spec(path: str | Path) -> ManifoldSpec:
    """Read and validate a spec file; every expression is parsed eagerly.

    Raises ``OSError`` for I/O problems and :class:`SpecError` otherwise.
    """
    path = Path(path)
    raw = path.read_bytes()
    try:
        data = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise SpecError("", f"file is not UTF-8: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SpecError("", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return spec_from_dict(data, name=path.stem)
