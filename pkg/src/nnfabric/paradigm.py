"""Paradigm descriptor language: parse, validate, render, summarize.

A paradigm descriptor is a JSON document describing a trainable
neural-network family: topology constraints, tunable hyperparameters,
an I/O schema, and the engine that executes it. Descriptors are stored
as ``.paradigm.json`` files and published to the registry.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable

CONNECTIVITIES = ("fully_connected",)
HYPERPARAM_KINDS = ("real", "integer", "enumeration")
VARIABLE_DIM = "variable"

REQUIRED_FIELDS = (
    "id",
    "name",
    "version",
    "description",
    "topology",
    "hyperparams",
    "io_schema",
    "engine_ref",
)


class DescriptorError(ValueError):
    """Base class for descriptor parsing and rendering failures."""


class DescriptorSyntaxError(DescriptorError):
    """The document is not well-formed JSON."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class DescriptorSchemaError(DescriptorError):
    """The document is JSON but violates the descriptor schema."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class Violation:
    """A single descriptor invariant violation; data, not an exception."""

    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass(frozen=True)
class TopologySpec:
    min_layers: int
    max_layers: int
    connectivity: str = "fully_connected"
    # One (min_units, max_units) pair per layer; requires a fixed layer count.
    layer_size_bounds: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class HyperparamDecl:
    name: str
    kind: str
    default: Any
    range: tuple[float, float] | None = None
    values: tuple[Any, ...] | None = None


@dataclass(frozen=True)
class IOSchema:
    input_dim: int | str = VARIABLE_DIM
    output_dim: int | str = VARIABLE_DIM


@dataclass(frozen=True)
class ParadigmDescriptor:
    id: str
    name: str
    version: str
    description: str
    topology: TopologySpec
    hyperparams: tuple[HyperparamDecl, ...]
    io_schema: IOSchema
    engine_ref: str


def _require(doc: dict, key: str, kind: type | tuple[type, ...], where: str) -> Any:
    if key not in doc:
        raise DescriptorSchemaError(f"{where}{key}", "required field missing")
    value = doc[key]
    if kind is int and isinstance(value, bool):
        raise DescriptorSchemaError(f"{where}{key}", "expected an integer")
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise DescriptorSchemaError(f"{where}{key}", f"expected {names}, got {type(value).__name__}")
    return value


def _parse_topology(doc: Any) -> TopologySpec:
    if not isinstance(doc, dict):
        raise DescriptorSchemaError("topology", "expected an object")
    min_layers = _require(doc, "min_layers", int, "topology.")
    max_layers = _require(doc, "max_layers", int, "topology.")
    connectivity = _require(doc, "connectivity", str, "topology.")
    if connectivity not in CONNECTIVITIES:
        raise DescriptorSchemaError(
            "topology.connectivity", f"unknown connectivity {connectivity!r}"
        )
    bounds = None
    if doc.get("layer_size_bounds") is not None:
        raw = doc["layer_size_bounds"]
        if not isinstance(raw, list):
            raise DescriptorSchemaError("topology.layer_size_bounds", "expected a list")
        pairs = []
        for i, pair in enumerate(raw):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in pair)
            ):
                raise DescriptorSchemaError(
                    f"topology.layer_size_bounds[{i}]", "expected a [min, max] integer pair"
                )
            pairs.append((pair[0], pair[1]))
        bounds = tuple(pairs)
    return TopologySpec(min_layers, max_layers, connectivity, bounds)


def _parse_hyperparam(doc: Any, index: int) -> HyperparamDecl:
    where = f"hyperparams[{index}]."
    if not isinstance(doc, dict):
        raise DescriptorSchemaError(f"hyperparams[{index}]", "expected an object")
    name = _require(doc, "name", str, where)
    kind = _require(doc, "kind", str, where)
    if kind not in HYPERPARAM_KINDS:
        raise DescriptorSchemaError(f"{where}kind", f"unknown kind {kind!r}")
    if "default" not in doc:
        raise DescriptorSchemaError(f"{where}default", "required field missing")
    default = doc["default"]
    if kind == "enumeration":
        values = _require(doc, "values", list, where)
        if not values:
            raise DescriptorSchemaError(f"{where}values", "must be non-empty")
        return HyperparamDecl(name, kind, default, values=tuple(values))
    raw_range = _require(doc, "range", list, where)
    if len(raw_range) != 2 or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw_range
    ):
        raise DescriptorSchemaError(f"{where}range", "expected a [low, high] numeric pair")
    return HyperparamDecl(name, kind, default, range=(raw_range[0], raw_range[1]))


def _parse_io_schema(doc: Any) -> IOSchema:
    if not isinstance(doc, dict):
        raise DescriptorSchemaError("io_schema", "expected an object")
    dims = {}
    for key in ("input_dim", "output_dim"):
        if key not in doc:
            raise DescriptorSchemaError(f"io_schema.{key}", "required field missing")
        value = doc[key]
        if value != VARIABLE_DIM and not (isinstance(value, int) and not isinstance(value, bool)):
            raise DescriptorSchemaError(
                f"io_schema.{key}", f'expected a positive integer or "{VARIABLE_DIM}"'
            )
        dims[key] = value
    return IOSchema(dims["input_dim"], dims["output_dim"])


def parse_descriptor(text: str) -> ParadigmDescriptor:
    """Parse the canonical JSON form into a ParadigmDescriptor.

    Raises DescriptorSyntaxError for malformed JSON (with position) and
    DescriptorSchemaError for structurally invalid documents. Semantic
    invariants (ranges, engine existence) are left to validate_descriptor.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DescriptorSyntaxError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise DescriptorSchemaError("document", "top level must be an object")
    for key in REQUIRED_FIELDS:
        if key not in doc:
            raise DescriptorSchemaError(key, "required field missing")
    unknown = set(doc) - set(REQUIRED_FIELDS)
    if unknown:
        raise DescriptorSchemaError(sorted(unknown)[0], "unknown field")
    hyperparams_raw = _require(doc, "hyperparams", list, "")
    return ParadigmDescriptor(
        id=_require(doc, "id", str, ""),
        name=_require(doc, "name", str, ""),
        version=_require(doc, "version", str, ""),
        description=_require(doc, "description", str, ""),
        topology=_parse_topology(doc["topology"]),
        hyperparams=tuple(_parse_hyperparam(h, i) for i, h in enumerate(hyperparams_raw)),
        io_schema=_parse_io_schema(doc["io_schema"]),
        engine_ref=_require(doc, "engine_ref", str, ""),
    )


def _validate_hyperparam(decl: HyperparamDecl, where: str, out: list[Violation]) -> None:
    if decl.kind == "enumeration":
        if not decl.values:
            out.append(Violation(where, "enumeration has no allowed values"))
        elif decl.default not in decl.values:
            out.append(Violation(where, f"default {decl.default!r} not in allowed values"))
        return
    if decl.range is None:
        out.append(Violation(where, f"{decl.kind} hyperparameter needs a range"))
        return
    low, high = decl.range
    if low > high:
        out.append(Violation(where, f"range [{low}, {high}] is inverted"))
        return
    if not isinstance(decl.default, (int, float)) or isinstance(decl.default, bool):
        out.append(Violation(where, "default must be numeric"))
        return
    if decl.kind == "integer" and decl.default != int(decl.default):
        out.append(Violation(where, f"default {decl.default!r} is not an integer"))
    if not (low <= decl.default <= high):
        out.append(Violation(where, f"default {decl.default} outside range [{low}, {high}]"))


def validate_descriptor(
    d: ParadigmDescriptor, known_engines: Iterable[str] | None = None
) -> list[Violation]:
    """Check every descriptor invariant; an empty list means valid.

    known_engines defaults to the engines shipped by nnfabric.engine.
    """
    if known_engines is None:
        from nnfabric.engine import list_engines

        known_engines = list_engines()
    violations: list[Violation] = []
    if not d.id:
        violations.append(Violation("id", "must be non-empty"))
    topo = d.topology
    if topo.min_layers < 2:
        violations.append(Violation("topology.min_layers", "must be at least 2"))
    if topo.max_layers < topo.min_layers:
        violations.append(Violation("topology.max_layers", "must be >= min_layers"))
    if topo.connectivity not in CONNECTIVITIES:
        violations.append(
            Violation("topology.connectivity", f"unknown connectivity {topo.connectivity!r}")
        )
    if topo.layer_size_bounds is not None:
        if topo.min_layers != topo.max_layers:
            violations.append(
                Violation("topology.layer_size_bounds", "requires a fixed layer count")
            )
        elif len(topo.layer_size_bounds) != topo.max_layers:
            violations.append(
                Violation("topology.layer_size_bounds", "needs one [min, max] pair per layer")
            )
        for i, (low, high) in enumerate(topo.layer_size_bounds):
            if low < 1 or high < low:
                violations.append(
                    Violation(f"topology.layer_size_bounds[{i}]", "bounds must be positive and ordered")
                )
    seen: set[str] = set()
    for i, decl in enumerate(d.hyperparams):
        where = f"hyperparams[{i}].{decl.name}"
        if decl.name in seen:
            violations.append(Violation(where, "duplicate hyperparameter name"))
        seen.add(decl.name)
        _validate_hyperparam(decl, where, violations)
    for key, dim in (("input_dim", d.io_schema.input_dim), ("output_dim", d.io_schema.output_dim)):
        if dim != VARIABLE_DIM and (not isinstance(dim, int) or dim < 1):
            violations.append(Violation(f"io_schema.{key}", "fixed dimension must be >= 1"))
    if d.engine_ref not in set(known_engines):
        violations.append(Violation("engine_ref", f"unknown engine {d.engine_ref!r}"))
    return violations


def descriptor_to_document(d: ParadigmDescriptor) -> dict:
    """Plain-dict form of a descriptor, as serialized in the canonical JSON."""
    topo: dict[str, Any] = {
        "min_layers": d.topology.min_layers,
        "max_layers": d.topology.max_layers,
        "connectivity": d.topology.connectivity,
    }
    if d.topology.layer_size_bounds is not None:
        topo["layer_size_bounds"] = [list(pair) for pair in d.topology.layer_size_bounds]
    hyperparams = []
    for decl in d.hyperparams:
        h: dict[str, Any] = {"name": decl.name, "kind": decl.kind, "default": decl.default}
        if decl.kind == "enumeration":
            h["values"] = list(decl.values or ())
        else:
            h["range"] = list(decl.range or ())
        hyperparams.append(h)
    return {
        "id": d.id,
        "name": d.name,
        "version": d.version,
        "description": d.description,
        "topology": topo,
        "hyperparams": hyperparams,
        "io_schema": {"input_dim": d.io_schema.input_dim, "output_dim": d.io_schema.output_dim},
        "engine_ref": d.engine_ref,
    }


def render_descriptor(d: ParadigmDescriptor, known_engines: Iterable[str] | None = None) -> str:
    """Serialize a valid descriptor to its canonical textual form.

    Output is deterministic: the same descriptor always renders to
    byte-identical text, and parse_descriptor(render_descriptor(d)) == d.
    """
    violations = validate_descriptor(d, known_engines)
    if violations:
        raise DescriptorError(
            "cannot render invalid descriptor: " + "; ".join(str(v) for v in violations)
        )
    return json.dumps(descriptor_to_document(d), indent=2, sort_keys=True) + "\n"


def _topology_sentence(topo: TopologySpec) -> str:
    if topo.min_layers == topo.max_layers:
        layers = f"{topo.min_layers} layers"
    else:
        layers = f"{topo.min_layers}-{topo.max_layers} layers"
    return f"{layers}, {topo.connectivity.replace('_', ' ')}"


def _bounds_text(decl: HyperparamDecl) -> str:
    if decl.kind == "enumeration":
        return "{" + ", ".join(str(v) for v in decl.values or ()) + "}"
    low, high = decl.range or (0, 0)
    return f"[{low}, {high}]"


def summarize_descriptor(d: ParadigmDescriptor) -> str:
    """Human-readable summary: name, version, topology, hyperparameter table."""
    lines = [
        f"{d.name} v{d.version} (engine: {d.engine_ref})",
        f"  {_topology_sentence(d.topology)}",
        f"  inputs: {d.io_schema.input_dim}, outputs: {d.io_schema.output_dim}",
    ]
    if d.description:
        lines.append(f"  {d.description}")
    if d.hyperparams:
        lines.append("  hyperparameters:")
        width = max(len(h.name) for h in d.hyperparams)
        for h in d.hyperparams:
            lines.append(
                f"    {h.name:<{width}}  {h.kind:<11}  {_bounds_text(h)}  default {h.default}"
            )
    else:
        lines.append("  hyperparameters: none")
    return "\n".join(lines)


def summary_table_rows(summary: str) -> list[str]:
    """The hyperparameter rows of a summary, one per declared hyperparameter."""
    return [line for line in summary.splitlines() if line.startswith("    ")]
