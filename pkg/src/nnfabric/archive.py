"""Write-once keyed archive for network objects, results, and pattern sets.

Layout: ``<root>/<kind>/<id>.json`` holds each payload verbatim, with
``<root>/index.json`` carrying key metadata. Payloads never change after a
successful put; new versions of an object get new ids, and lineage is
tracked through parent keys (training result -> network object,
evaluation result -> training result).
"""
from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

KINDS = ("network_object", "training_result", "evaluation_result", "pattern_set")

# Required parent kind per entry kind, when a parent is set.
PARENT_KINDS = {
    "training_result": "network_object",
    "evaluation_result": "training_result",
}


class ArchiveError(Exception):
    """Base class for archive failures."""


class DuplicateKeyError(ArchiveError):
    pass


class NotFoundError(ArchiveError):
    pass


class MissingParentError(ArchiveError):
    pass


@dataclass(frozen=True)
class ArchiveKey:
    kind: str
    id: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ArchiveError(f"unknown archive kind {self.kind!r}")
        if not self.id or "/" in self.id or self.id in (".", ".."):
            raise ArchiveError(f"invalid archive id {self.id!r}")

    def __str__(self) -> str:
        return f"{self.kind}/{self.id}"

    @classmethod
    def parse(cls, text: str) -> "ArchiveKey":
        kind, sep, id_ = text.partition("/")
        if not sep:
            raise ArchiveError(f"archive key must look like kind/id, got {text!r}")
        return cls(kind, id_)


@dataclass(frozen=True)
class EntryMetadata:
    owner: str
    created_at: float
    paradigm_id: str | None = None
    parent: ArchiveKey | None = None


@dataclass(frozen=True)
class ArchiveEntry:
    key: ArchiveKey
    payload: str  # UTF-8 JSON text, stored byte-for-byte
    metadata: EntryMetadata


class Archive:
    """Filesystem-backed archive; safe for concurrent use in one process."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        self._index: dict[ArchiveKey, EntryMetadata] = {}
        self.root.mkdir(parents=True, exist_ok=True)
        for kind in KINDS:
            (self.root / kind).mkdir(exist_ok=True)
        self._load_index()

    # -- persistence -------------------------------------------------------

    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _payload_path(self, key: ArchiveKey) -> Path:
        return self.root / key.kind / f"{key.id}.json"

    def _load_index(self) -> None:
        path = self._index_path()
        if not path.exists():
            return
        raw = json.loads(path.read_text(encoding="utf-8"))
        for key_text, meta in raw.items():
            parent = ArchiveKey.parse(meta["parent"]) if meta.get("parent") else None
            self._index[ArchiveKey.parse(key_text)] = EntryMetadata(
                owner=meta["owner"],
                created_at=meta["created_at"],
                paradigm_id=meta.get("paradigm_id"),
                parent=parent,
            )

    def _write_index(self) -> None:
        doc = {
            str(key): {
                "owner": meta.owner,
                "created_at": meta.created_at,
                "paradigm_id": meta.paradigm_id,
                "parent": str(meta.parent) if meta.parent else None,
            }
            for key, meta in self._index.items()
        }
        tmp = self._index_path().with_suffix(".json.tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        tmp.replace(self._index_path())

    # -- operations ----------------------------------------------------------

    def put(self, entry: ArchiveEntry) -> None:
        """Store an entry durably; the key must be fresh and any parent present."""
        with self._lock:
            if entry.key in self._index:
                raise DuplicateKeyError(f"key {entry.key} already archived")
            parent = entry.metadata.parent
            if parent is not None:
                expected = PARENT_KINDS.get(entry.key.kind)
                if expected is not None and parent.kind != expected:
                    raise ArchiveError(
                        f"{entry.key.kind} parent must be a {expected}, got {parent.kind}"
                    )
                if parent not in self._index:
                    raise MissingParentError(f"parent {parent} not archived")
            path = self._payload_path(entry.key)
            try:
                with path.open("x", encoding="utf-8") as fh:
                    fh.write(entry.payload)
                    fh.flush()
                    os.fsync(fh.fileno())
            except FileExistsError:
                raise DuplicateKeyError(f"key {entry.key} already archived") from None
            self._index[entry.key] = entry.metadata
            self._write_index()

    def get(self, key: ArchiveKey) -> ArchiveEntry:
        with self._lock:
            meta = self._index.get(key)
        if meta is None:
            raise NotFoundError(f"no entry for {key}")
        payload = self._payload_path(key).read_text(encoding="utf-8")
        return ArchiveEntry(key, payload, meta)

    def __contains__(self, key: ArchiveKey) -> bool:
        with self._lock:
            return key in self._index

    def list(
        self,
        kind: str,
        owner: str | None = None,
        paradigm_id: str | None = None,
    ) -> list[tuple[ArchiveKey, EntryMetadata]]:
        """Keys and metadata of matching entries, oldest first; no payloads."""
        if kind not in KINDS:
            raise ArchiveError(f"unknown archive kind {kind!r}")
        with self._lock:
            matches = [
                (key, meta)
                for key, meta in self._index.items()
                if key.kind == kind
                and (owner is None or meta.owner == owner)
                and (paradigm_id is None or meta.paradigm_id == paradigm_id)
            ]
        matches.sort(key=lambda pair: (pair[1].created_at, pair[0].id))
        return matches


def make_entry(
    kind: str,
    id_: str,
    payload: str,
    owner: str,
    paradigm_id: str | None = None,
    parent: ArchiveKey | None = None,
    created_at: float | None = None,
) -> ArchiveEntry:
    return ArchiveEntry(
        key=ArchiveKey(kind, id_),
        payload=payload,
        metadata=EntryMetadata(
            owner=owner,
            created_at=time.time() if created_at is None else created_at,
            paradigm_id=paradigm_id,
            parent=parent,
        ),
    )
