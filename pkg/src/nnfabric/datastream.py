"""Datastream resolution: explicit lists or query statements over tabular
and document stores, turned into pattern sets for training and evaluation.

Two query dialects are supported (grammar in docs/query-grammar.md):
a single-table SELECT-WHERE-LIMIT subset for tabular stores, and
``db.<collection>.find({...}).limit(n)`` filters for document stores.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Union

import httpx

from nnfabric.engine import PatternSet
from nnfabric.paradigm import VARIABLE_DIM, IOSchema


class DatastreamError(ValueError):
    """Base class for datastream failures."""


class QuerySyntaxError(DatastreamError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnsupportedConstructError(QuerySyntaxError):
    pass


class QueryExecutionError(DatastreamError):
    pass


class StoreError(DatastreamError):
    pass


class MappingError(DatastreamError):
    pass


# --- stores ---------------------------------------------------------------

NUMBER = "number"
TEXT = "text"


@dataclass(frozen=True)
class TableStore:
    """An immutable table: ordered typed columns and tuple rows."""

    name: str
    columns: tuple[tuple[str, str], ...]  # (name, "number" | "text")
    rows: tuple[tuple[Any, ...], ...]

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def column_kind(self, name: str) -> str:
        for col, kind in self.columns:
            if col == name:
                return kind
        raise QueryExecutionError(f"unknown column {name!r}")


@dataclass(frozen=True)
class DocumentStore:
    """An immutable collection of flat key/value documents."""

    name: str
    documents: tuple[dict, ...]


Store = Union[TableStore, DocumentStore]


def load_csv_table(path: str | Path, name: str | None = None) -> TableStore:
    """Load a CSV file: header row names the columns; a column is numeric
    iff every one of its values parses as a number."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise StoreError(f"cannot read table {path}: {exc}") from exc
    if not rows:
        raise StoreError(f"{path}: missing header row")
    header, data = rows[0], rows[1:]
    for i, row in enumerate(data):
        if len(row) != len(header):
            raise StoreError(f"{path}: row {i + 2} has {len(row)} values, expected {len(header)}")
    kinds = []
    for j, col in enumerate(header):
        numeric = True
        for row in data:
            try:
                float(row[j])
            except ValueError:
                numeric = False
                break
        kinds.append(NUMBER if numeric else TEXT)
    typed_rows = tuple(
        tuple(float(v) if kinds[j] == NUMBER else v for j, v in enumerate(row)) for row in data
    )
    return TableStore(name or path.stem, tuple(zip(header, kinds)), typed_rows)


def _check_document(doc: Any, where: str) -> dict:
    if not isinstance(doc, dict):
        raise StoreError(f"{where}: expected a flat object")
    clean = {}
    for key, value in doc.items():
        if not isinstance(key, str) or not key:
            raise StoreError(f"{where}: keys must be non-empty strings")
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise StoreError(f"{where}: value for {key!r} must be a number or text")
        clean[key] = float(value) if isinstance(value, (int, float)) else value
    return clean


def load_jsonl_documents(path: str | Path, name: str | None = None) -> DocumentStore:
    """Load a JSON-lines file of flat objects with number or text values."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise StoreError(f"cannot read collection {path}: {exc}") from exc
    documents = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StoreError(f"{path}:{i + 1}: invalid JSON: {exc.msg}") from exc
        documents.append(_check_document(doc, f"{path}:{i + 1}"))
    return DocumentStore(name or path.stem, tuple(documents))


def fetch_remote_store(endpoint: str, name: str | None = None, timeout: float = 10.0) -> DocumentStore:
    """Fetch a document store over HTTP: GET returning a JSON array of flat objects."""
    try:
        response = httpx.get(endpoint, timeout=timeout)
        response.raise_for_status()
    except httpx.HTTPError as exc:
        raise StoreError(f"store {endpoint} unreachable: {exc}") from exc
    try:
        payload = response.json()
    except ValueError as exc:
        raise StoreError(f"store {endpoint}: malformed payload (not JSON)") from exc
    if not isinstance(payload, list):
        raise StoreError(f"store {endpoint}: malformed payload (expected a JSON array)")
    documents = tuple(_check_document(doc, f"{endpoint}[{i}]") for i, doc in enumerate(payload))
    return DocumentStore(name or endpoint, documents)


# --- query AST ------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    column: str
    op: str  # = != < <= > >=
    value: float | str


@dataclass(frozen=True)
class And:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Or:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Not:
    operand: "Predicate"


Predicate = Union[Comparison, And, Or, Not]


@dataclass(frozen=True)
class TabularQuery:
    source: str
    projection: tuple[str, ...] | None  # None means *
    predicate: Predicate | None = None
    limit: int | None = None


@dataclass(frozen=True)
class DocumentQuery:
    collection: str
    # key -> (op, value) clauses, all of which must hold
    filter: tuple[tuple[str, tuple[str, Any]], ...] = ()
    limit: int | None = None


Query = Union[TabularQuery, DocumentQuery]


# --- SQL-subset tokenizer and parser ---------------------------------------

_KEYWORDS = {"SELECT", "FROM", "WHERE", "LIMIT", "AND", "OR", "NOT"}
_UNSUPPORTED = {
    "JOIN", "INNER", "OUTER", "LEFT", "RIGHT", "CROSS", "ON", "GROUP", "ORDER",
    "BY", "HAVING", "UNION", "DISTINCT", "OFFSET", "INSERT", "UPDATE", "DELETE",
    "CREATE", "DROP", "AS", "LIKE", "IN", "BETWEEN", "NULL", "IS",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<number>[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<op><=|>=|!=|<>|≤|≥|≠|=|<|>)
  | (?P<punct>[*,();])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_OP_NORMALIZE = {"<>": "!=", "≠": "!=", "≤": "<=", "≥": ">="}


@dataclass(frozen=True)
class _Token:
    kind: str  # keyword | unsupported | ident | number | string | op | punct | end
    text: str
    value: Any
    pos: int  # 1-based character offset


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    while i < len(text):
        match = _TOKEN_RE.match(text, i)
        if match is None:
            raise QuerySyntaxError(f"unexpected character {text[i]!r}", i + 1)
        pos = i + 1
        i = match.end()
        if match.lastgroup == "ws":
            continue
        raw = match.group()
        if match.lastgroup == "string":
            if not raw.endswith("'") or len(raw) < 2:
                raise QuerySyntaxError("unterminated string literal", pos)
            tokens.append(_Token("string", raw, raw[1:-1].replace("''", "'"), pos))
        elif match.lastgroup == "number":
            tokens.append(_Token("number", raw, float(raw), pos))
        elif match.lastgroup == "op":
            tokens.append(_Token("op", raw, _OP_NORMALIZE.get(raw, raw), pos))
        elif match.lastgroup == "punct":
            tokens.append(_Token("punct", raw, raw, pos))
        else:
            upper = raw.upper()
            if upper in _KEYWORDS:
                tokens.append(_Token("keyword", upper, upper, pos))
            elif upper in _UNSUPPORTED:
                tokens.append(_Token("unsupported", upper, upper, pos))
            else:
                tokens.append(_Token("ident", raw, raw, pos))
    tokens.append(_Token("end", "", None, len(text) + 1))
    return tokens


class _TabularParser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect_keyword(self, word: str) -> None:
        token = self.advance()
        if token.kind != "keyword" or token.value != word:
            raise QuerySyntaxError(f"expected {word}, got {token.text or 'end of query'}", token.pos)

    def reject_unsupported(self) -> None:
        token = self.peek()
        if token.kind == "unsupported":
            raise UnsupportedConstructError(f"unsupported construct: {token.text}", token.pos)

    def parse(self) -> TabularQuery:
        self.expect_keyword("SELECT")
        self.reject_unsupported()
        projection = self.parse_projection()
        self.expect_keyword("FROM")
        source = self.parse_ident("table name")
        predicate = None
        limit = None
        self.reject_unsupported()
        if self.peek().kind == "keyword" and self.peek().value == "WHERE":
            self.advance()
            predicate = self.parse_or()
        self.reject_unsupported()
        if self.peek().kind == "keyword" and self.peek().value == "LIMIT":
            self.advance()
            limit = self.parse_limit()
        if self.peek().kind == "punct" and self.peek().value == ";":
            self.advance()
        self.reject_unsupported()
        tail = self.peek()
        if tail.kind != "end":
            raise QuerySyntaxError(f"unexpected {tail.text!r} after query", tail.pos)
        return TabularQuery(source, projection, predicate, limit)

    def parse_projection(self) -> tuple[str, ...] | None:
        if self.peek().kind == "punct" and self.peek().value == "*":
            self.advance()
            return None
        columns = [self.parse_ident("column name")]
        while self.peek().kind == "punct" and self.peek().value == ",":
            self.advance()
            columns.append(self.parse_ident("column name"))
        return tuple(columns)

    def parse_ident(self, what: str) -> str:
        self.reject_unsupported()
        token = self.advance()
        if token.kind != "ident":
            raise QuerySyntaxError(f"expected {what}, got {token.text or 'end of query'}", token.pos)
        return token.value

    def parse_limit(self) -> int:
        token = self.advance()
        if token.kind != "number" or token.value != int(token.value) or token.value < 0:
            raise QuerySyntaxError("LIMIT takes a non-negative integer", token.pos)
        return int(token.value)

    def parse_or(self) -> Predicate:
        left = self.parse_and()
        while self.peek().kind == "keyword" and self.peek().value == "OR":
            self.advance()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Predicate:
        left = self.parse_factor()
        while self.peek().kind == "keyword" and self.peek().value == "AND":
            self.advance()
            left = And(left, self.parse_factor())
        return left

    def parse_factor(self) -> Predicate:
        self.reject_unsupported()
        token = self.peek()
        if token.kind == "keyword" and token.value == "NOT":
            self.advance()
            return Not(self.parse_factor())
        if token.kind == "punct" and token.value == "(":
            self.advance()
            inner = self.parse_or()
            closing = self.advance()
            if closing.kind != "punct" or closing.value != ")":
                raise QuerySyntaxError("expected )", closing.pos)
            return inner
        column = self.parse_ident("column name")
        op_token = self.advance()
        if op_token.kind != "op":
            raise QuerySyntaxError(f"expected comparison operator, got {op_token.text!r}", op_token.pos)
        literal = self.advance()
        if literal.kind not in ("number", "string"):
            raise QuerySyntaxError("expected a number or string literal", literal.pos)
        return Comparison(column, op_token.value, literal.value)


_DOCUMENT_RE = re.compile(
    r"^db\.([A-Za-z_][A-Za-z0-9_]*)\.find\((.*?)\)\s*(?:\.\s*limit\(\s*(\d+)\s*\))?\s*;?\s*$",
    re.DOTALL,
)

_DOCUMENT_OPS = {
    "$eq": "=",
    "$ne": "!=",
    "$lt": "<",
    "$lte": "<=",
    "$gt": ">",
    "$gte": ">=",
}


def _parse_document_query(text: str) -> DocumentQuery:
    stripped = text.strip()
    match = _DOCUMENT_RE.match(stripped)
    if match is None:
        raise QuerySyntaxError("expected db.<collection>.find({...})[.limit(n)]", 1)
    collection, filter_text, limit_text = match.groups()
    filter_text = filter_text.strip() or "{}"
    try:
        raw_filter = json.loads(filter_text)
    except json.JSONDecodeError as exc:
        raise QuerySyntaxError(f"invalid filter document: {exc.msg}", exc.pos + 1) from exc
    if not isinstance(raw_filter, dict):
        raise QuerySyntaxError("filter must be a JSON object", 1)
    clauses = []
    for key, value in raw_filter.items():
        if isinstance(value, dict):
            if len(value) != 1:
                raise QuerySyntaxError(f"filter for {key!r} must hold exactly one operator", 1)
            (op_name, operand), = value.items()
            if op_name not in _DOCUMENT_OPS:
                raise UnsupportedConstructError(f"unsupported construct: {op_name}", 1)
            if isinstance(operand, bool) or not isinstance(operand, (int, float, str)):
                raise QuerySyntaxError(f"filter value for {key!r} must be a number or text", 1)
            operand = float(operand) if isinstance(operand, (int, float)) else operand
            clauses.append((key, (_DOCUMENT_OPS[op_name], operand)))
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float, str)):
                raise QuerySyntaxError(f"filter value for {key!r} must be a number or text", 1)
            value = float(value) if isinstance(value, (int, float)) else value
            clauses.append((key, ("=", value)))
    limit = int(limit_text) if limit_text is not None else None
    return DocumentQuery(collection, tuple(clauses), limit)


def parse_query(text: str) -> Query:
    """Parse a query statement in either dialect into its AST."""
    stripped = text.strip()
    if re.match(r"(?i)^select\b", stripped):
        return _TabularParser(stripped).parse()
    if stripped.startswith("db."):
        return _parse_document_query(stripped)
    raise QuerySyntaxError("expected SELECT ... or db.<collection>.find(...)", 1)


# --- execution --------------------------------------------------------------

_COMPARATORS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _check_comparison_kinds(column: str, kind: str, value: Any) -> None:
    if kind == NUMBER and not isinstance(value, float):
        raise QueryExecutionError(f"kind mismatch: column {column!r} is numeric, literal is text")
    if kind == TEXT and not isinstance(value, str):
        raise QueryExecutionError(f"kind mismatch: column {column!r} is text, literal is numeric")


def _eval_predicate(pred: Predicate, store: TableStore, row_env: dict) -> bool:
    if isinstance(pred, Comparison):
        kind = store.column_kind(pred.column)
        _check_comparison_kinds(pred.column, kind, pred.value)
        return _COMPARATORS[pred.op](row_env[pred.column], pred.value)
    if isinstance(pred, And):
        return _eval_predicate(pred.left, store, row_env) and _eval_predicate(pred.right, store, row_env)
    if isinstance(pred, Or):
        return _eval_predicate(pred.left, store, row_env) or _eval_predicate(pred.right, store, row_env)
    if isinstance(pred, Not):
        return not _eval_predicate(pred.operand, store, row_env)
    raise TypeError(f"not a predicate: {pred!r}")


def tabular_result_columns(store: TableStore, q: TabularQuery) -> list[str]:
    """Column names of the query's result rows, in result order."""
    if q.projection is None:
        return store.column_names()
    names = store.column_names()
    for column in q.projection:
        if column not in names:
            raise QueryExecutionError(f"unknown column {column!r}")
    return list(q.projection)


def _execute_tabular(store: TableStore, q: TabularQuery) -> list[tuple]:
    if q.source != store.name:
        raise QueryExecutionError(f"unknown table {q.source!r}")
    names = store.column_names()
    projection = tabular_result_columns(store, q)
    if q.predicate is not None:
        _check_predicate_columns(q.predicate, names)
    selected = []
    for row in store.rows:
        if q.limit is not None and len(selected) >= q.limit:
            break
        env = dict(zip(names, row))
        if q.predicate is None or _eval_predicate(q.predicate, store, env):
            selected.append(tuple(env[c] for c in projection))
    return selected


def _check_predicate_columns(pred: Predicate, names: list[str]) -> None:
    if isinstance(pred, Comparison):
        if pred.column not in names:
            raise QueryExecutionError(f"unknown column {pred.column!r}")
    elif isinstance(pred, (And, Or)):
        _check_predicate_columns(pred.left, names)
        _check_predicate_columns(pred.right, names)
    elif isinstance(pred, Not):
        _check_predicate_columns(pred.operand, names)


def _document_matches(doc: dict, clauses) -> bool:
    for key, (op, value) in clauses:
        if key not in doc:
            return False
        actual = doc[key]
        same_kind = isinstance(actual, str) == isinstance(value, str)
        if not same_kind:
            if op == "=":
                return False
            if op == "!=":
                continue
            raise QueryExecutionError(
                f"kind mismatch: key {key!r} holds {'text' if isinstance(actual, str) else 'a number'}"
            )
        if not _COMPARATORS[op](actual, value):
            return False
    return True


def _execute_document(store: DocumentStore, q: DocumentQuery) -> list[dict]:
    if q.collection != store.name:
        raise QueryExecutionError(f"unknown collection {q.collection!r}")
    selected = []
    for doc in store.documents:
        if q.limit is not None and len(selected) >= q.limit:
            break
        if _document_matches(doc, q.filter):
            selected.append(dict(doc))
    return selected


def execute_query(store: Store, q: Query):
    """Run a parsed query against a store. Equivalent to a naive
    scan-filter-project-truncate pass in store order; never mutates."""
    if isinstance(q, TabularQuery):
        if not isinstance(store, TableStore):
            raise DatastreamError("tabular query requires a tabular store")
        return _execute_tabular(store, q)
    if isinstance(q, DocumentQuery):
        if not isinstance(store, DocumentStore):
            raise DatastreamError("document query requires a document store")
        return _execute_document(store, q)
    raise TypeError(f"not a query: {q!r}")


# --- datastream specs -------------------------------------------------------


@dataclass(frozen=True)
class ColumnMapping:
    input_columns: tuple[str, ...]
    target_columns: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.input_columns:
            raise MappingError("mapping needs at least one input column")
        overlap = set(self.input_columns) & set(self.target_columns)
        if overlap:
            raise MappingError(f"columns {sorted(overlap)} mapped as both input and target")


@dataclass(frozen=True)
class ExplicitStream:
    inputs: tuple[tuple[float, ...], ...]
    targets: tuple[tuple[float, ...], ...] | None = None


@dataclass(frozen=True)
class QueryStream:
    query_text: str
    store_ref: str  # catalog name, or an http(s) endpoint serving documents
    mapping: ColumnMapping


DatastreamSpec = Union[ExplicitStream, QueryStream]


def datastream_spec_to_document(spec: DatastreamSpec) -> dict:
    if isinstance(spec, ExplicitStream):
        return {
            "kind": "explicit",
            "inputs": [list(v) for v in spec.inputs],
            "targets": None if spec.targets is None else [list(v) for v in spec.targets],
        }
    return {
        "kind": "query",
        "query": spec.query_text,
        "store": spec.store_ref,
        "mapping": {
            "input_columns": list(spec.mapping.input_columns),
            "target_columns": list(spec.mapping.target_columns),
        },
    }


def datastream_spec_from_document(doc: Any) -> DatastreamSpec:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise DatastreamError("datastream spec must be an object with a 'kind' field")
    kind = doc["kind"]
    if kind == "explicit":
        if "inputs" not in doc:
            raise DatastreamError("explicit datastream needs 'inputs'")
        inputs = tuple(tuple(float(x) for x in v) for v in doc["inputs"])
        targets = doc.get("targets")
        if targets is not None:
            targets = tuple(tuple(float(x) for x in v) for v in targets)
        return ExplicitStream(inputs, targets)
    if kind == "query":
        for field_name in ("query", "store", "mapping"):
            if field_name not in doc:
                raise DatastreamError(f"query datastream needs {field_name!r}")
        mapping = doc["mapping"]
        return QueryStream(
            query_text=doc["query"],
            store_ref=doc["store"],
            mapping=ColumnMapping(
                tuple(mapping.get("input_columns", ())),
                tuple(mapping.get("target_columns", ())),
            ),
        )
    raise DatastreamError(f"unknown datastream kind {kind!r}")


def _is_remote_ref(store_ref: str) -> bool:
    return store_ref.startswith("http://") or store_ref.startswith("https://")


def _rows_to_vectors(
    rows: list, columns: tuple[str, ...], result_columns: list[str] | None
) -> list[list[float]]:
    index: dict[str, int] = {}
    if result_columns is not None:
        index = {name: i for i, name in enumerate(result_columns)}
        missing = [c for c in columns if c not in index]
        if missing:
            raise MappingError(f"mapping column {missing[0]!r} missing from query result")
    vectors = []
    for row in rows:
        if isinstance(row, dict):
            values = []
            for column in columns:
                if column not in row:
                    raise MappingError(f"mapping column {column!r} missing from document")
                values.append(row[column])
        else:
            values = [row[index[c]] for c in columns]
        for column, value in zip(columns, values):
            if isinstance(value, str):
                raise MappingError(f"mapping column {column!r} holds text, expected numbers")
        vectors.append([float(v) for v in values])
    return vectors


def _check_dim(dim, actual: int, what: str) -> None:
    if dim != VARIABLE_DIM and actual != dim:
        raise DatastreamError(f"dimension mismatch: {what} is {actual}-dimensional, schema wants {dim}")


def resolve_datastream(
    spec: DatastreamSpec,
    schema: IOSchema,
    catalog: Mapping[str, Store] | None = None,
) -> PatternSet:
    """Resolve a datastream spec into a PatternSet, validated against the
    paradigm's I/O schema. Query specs run against a catalog store (by
    name) or a remote document endpoint (by URL)."""
    provenance = datastream_spec_to_document(spec)
    if isinstance(spec, ExplicitStream):
        inputs = [list(v) for v in spec.inputs]
        targets = None if spec.targets is None else [list(v) for v in spec.targets]
    else:
        query = parse_query(spec.query_text)
        if _is_remote_ref(spec.store_ref):
            if not isinstance(query, DocumentQuery):
                raise DatastreamError(
                    "remote stores serve documents; use a db.<collection>.find query"
                )
            store = fetch_remote_store(spec.store_ref, name=query.collection)
        else:
            if catalog is None or spec.store_ref not in catalog:
                raise StoreError(f"store {spec.store_ref!r} not found")
            store = catalog[spec.store_ref]
        rows = execute_query(store, query)
        result_columns = (
            tabular_result_columns(store, query) if isinstance(query, TabularQuery) else None
        )
        mapping = spec.mapping
        inputs = _rows_to_vectors(rows, mapping.input_columns, result_columns)
        targets = (
            _rows_to_vectors(rows, mapping.target_columns, result_columns)
            if mapping.target_columns
            else None
        )
    if inputs:
        _check_dim(schema.input_dim, len(inputs[0]), "input")
    if targets:
        _check_dim(schema.output_dim, len(targets[0]), "target")
    return PatternSet(inputs, targets, provenance=provenance)
