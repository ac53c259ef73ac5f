"""Registry and monitor: published paradigms, service liveness, user
management, sessions, access policies, and usage metering.

One consistency domain guarded by a single lock: publishes, heartbeats,
session checks, and ledger appends are each atomic. Paradigm entries and
the usage ledger persist under a data directory (one JSON file per entry,
JSON-lines for the ledger); sessions and service liveness are runtime
state and start fresh on every boot.
"""
from __future__ import annotations

import hashlib
import hmac
import json
import secrets
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from nnfabric.datastream import (
    QueryExecutionError,
    TableStore,
    TabularQuery,
    execute_query,
    parse_query,
    tabular_result_columns,
)
from nnfabric.paradigm import (
    ParadigmDescriptor,
    Violation,
    descriptor_to_document,
    parse_descriptor,
    validate_descriptor,
)

SERVICE_KINDS = ("simulation_worker", "archive", "registry", "gateway")
AFFINITIES = ("compute", "data", "admin")
POLICY_MODES = ("public", "restricted", "metered")
JOB_KINDS = ("train", "retrain", "evaluate")

DEFAULT_HEARTBEAT_TIMEOUT = 6.0
DEFAULT_SESSION_LIFETIME = 1800.0

PBKDF2_ITERATIONS = 50_000


class RegistryError(Exception):
    pass


class DuplicateParadigmError(RegistryError):
    pass


class InvalidDescriptorError(RegistryError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class UnknownParadigmError(RegistryError):
    pass


class UnknownServiceError(RegistryError):
    pass


class InvalidSessionError(RegistryError):
    pass


@dataclass(frozen=True)
class AccessPolicy:
    mode: str = "public"
    allowed_users: frozenset[str] = frozenset()
    fee_per_job: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in POLICY_MODES:
            raise RegistryError(f"unknown policy mode {self.mode!r}")
        if self.mode == "restricted" and not self.allowed_users:
            raise RegistryError("restricted policy needs allowed_users")
        if self.fee_per_job < 0:
            raise RegistryError("fee_per_job must be non-negative")

    def to_document(self) -> dict:
        return {
            "mode": self.mode,
            "allowed_users": sorted(self.allowed_users),
            "fee_per_job": self.fee_per_job,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "AccessPolicy":
        return cls(
            mode=doc.get("mode", "public"),
            allowed_users=frozenset(doc.get("allowed_users", ())),
            fee_per_job=doc.get("fee_per_job", 0.0),
        )


@dataclass
class ParadigmEntry:
    descriptor: ParadigmDescriptor
    owner: str
    policy: AccessPolicy
    published_at: float
    replicated_to: set[str] = field(default_factory=set)


@dataclass
class ServiceRecord:
    service_id: str
    kind: str
    endpoint: str
    affinity: str
    last_heartbeat: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in SERVICE_KINDS:
            raise RegistryError(f"unknown service kind {self.kind!r}")
        if self.affinity not in AFFINITIES:
            raise RegistryError(f"unknown affinity {self.affinity!r}")


@dataclass(frozen=True)
class Session:
    session_id: str
    user_id: str
    created_at: float
    expires_at: float


@dataclass(frozen=True)
class UsageRecord:
    session_id: str
    user_id: str
    paradigm_id: str
    job_id: str
    job_kind: str
    units: int  # requested epochs (train/retrain) or patterns (evaluate)
    charge: float
    recorded_at: float

    def to_document(self) -> dict:
        return {
            "session_id": self.session_id,
            "user_id": self.user_id,
            "paradigm_id": self.paradigm_id,
            "job_id": self.job_id,
            "job_kind": self.job_kind,
            "units": self.units,
            "charge": self.charge,
            "recorded_at": self.recorded_at,
        }


@dataclass(frozen=True)
class Grant:
    session_id: str
    user_id: str
    paradigm_id: str
    job_kind: str
    charge: float


@dataclass(frozen=True)
class Denial:
    reason: str


class UserStore:
    """Salted PBKDF2 credential file: {user: {salt, hash}}."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._users: dict[str, dict] = {}
        if self.path.exists():
            self._users = json.loads(self.path.read_text(encoding="utf-8"))

    @staticmethod
    def _digest(password: str, salt: bytes) -> bytes:
        return hashlib.pbkdf2_hmac("sha256", password.encode(), salt, PBKDF2_ITERATIONS)

    def add(self, user: str, password: str) -> None:
        salt = secrets.token_bytes(16)
        self._users[user] = {
            "salt": salt.hex(),
            "hash": self._digest(password, salt).hex(),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self._users, indent=2, sort_keys=True), encoding="utf-8")

    def verify(self, user: str, password: str) -> bool:
        record = self._users.get(user)
        if record is None:
            return False
        expected = bytes.fromhex(record["hash"])
        actual = self._digest(password, bytes.fromhex(record["salt"]))
        return hmac.compare_digest(expected, actual)

    def known_users(self) -> list[str]:
        return sorted(self._users)


PARADIGM_TABLE_COLUMNS = (
    ("id", "text"),
    ("name", "text"),
    ("version", "text"),
    ("engine_ref", "text"),
    ("owner", "text"),
    ("mode", "text"),
)


class RegistryMonitor:
    """Registry + monitor co-located behind separable method groups."""

    def __init__(
        self,
        data_dir: str | Path,
        heartbeat_timeout: float = DEFAULT_HEARTBEAT_TIMEOUT,
        session_lifetime: float = DEFAULT_SESSION_LIFETIME,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.data_dir = Path(data_dir)
        self.heartbeat_timeout = heartbeat_timeout
        self.session_lifetime = session_lifetime
        self._clock = clock
        self._lock = threading.RLock()
        self._entries: dict[str, ParadigmEntry] = {}
        self._publication_order: list[str] = []
        self._services: dict[str, ServiceRecord] = {}
        self._installers: dict[str, Callable[[ParadigmDescriptor], None]] = {}
        self._sessions: dict[str, Session] = {}
        self._ledger: list[UsageRecord] = []
        self.users = UserStore(self.data_dir / "users.json")
        self._paradigm_dir = self.data_dir / "paradigms"
        self._paradigm_dir.mkdir(parents=True, exist_ok=True)
        self._ledger_path = self.data_dir / "ledger.jsonl"
        self._load_persisted()

    def _load_persisted(self) -> None:
        for path in sorted(self._paradigm_dir.glob("*.json")):
            doc = json.loads(path.read_text(encoding="utf-8"))
            descriptor = parse_descriptor(json.dumps(doc["descriptor"]))
            entry = ParadigmEntry(
                descriptor=descriptor,
                owner=doc["owner"],
                policy=AccessPolicy.from_document(doc["policy"]),
                published_at=doc["published_at"],
            )
            self._entries[descriptor.id] = entry
        self._publication_order = sorted(
            self._entries, key=lambda pid: self._entries[pid].published_at
        )
        if self._ledger_path.exists():
            for line in self._ledger_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    doc = json.loads(line)
                    self._ledger.append(UsageRecord(**doc))

    # -- user management and sessions ---------------------------------------

    def authenticate(self, user: str, credential: str) -> Session | Denial:
        if not self.users.verify(user, credential):
            return Denial("invalid credentials")
        now = time.time()
        session = Session(
            session_id=secrets.token_hex(16),
            user_id=user,
            created_at=now,
            expires_at=now + self.session_lifetime,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def validate_session(self, session_id: str | None) -> Session:
        """Resolve a live session, sliding its expiry; raises on anything else."""
        if not session_id:
            raise InvalidSessionError("missing session id")
        now = time.time()
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise InvalidSessionError("unknown session id")
            if session.expires_at <= now:
                del self._sessions[session_id]
                raise InvalidSessionError("session expired")
            session = replace(session, expires_at=now + self.session_lifetime)
            self._sessions[session_id] = session
            return session

    # -- paradigm registry ------------------------------------------------

    def publish_paradigm(
        self, owner: str, descriptor: ParadigmDescriptor, policy: AccessPolicy
    ) -> ParadigmEntry:
        violations = validate_descriptor(descriptor)
        if violations:
            raise InvalidDescriptorError(violations)
        with self._lock:
            if descriptor.id in self._entries:
                raise DuplicateParadigmError(f"paradigm {descriptor.id!r} already published")
            entry = ParadigmEntry(
                descriptor=descriptor,
                owner=owner,
                policy=policy,
                published_at=time.time(),
            )
            self._entries[descriptor.id] = entry
            self._publication_order.append(descriptor.id)
            path = self._paradigm_dir / f"{descriptor.id}.json"
            path.write_text(
                json.dumps(
                    {
                        "descriptor": descriptor_to_document(descriptor),
                        "owner": owner,
                        "policy": policy.to_document(),
                        "published_at": entry.published_at,
                    },
                    indent=2,
                    sort_keys=True,
                ),
                encoding="utf-8",
            )
            self._replicate_entry(entry)
            return entry

    def _replicate_entry(self, entry: ParadigmEntry) -> None:
        # Push to every up simulation worker that exposed an installer.
        for service_id, record in self._services.items():
            if record.kind != "simulation_worker":
                continue
            if self._status(record) != "up":
                continue
            installer = self._installers.get(service_id)
            if installer is None:
                continue
            installer(entry.descriptor)
            entry.replicated_to.add(service_id)

    def get_entry(self, paradigm_id: str) -> ParadigmEntry:
        with self._lock:
            entry = self._entries.get(paradigm_id)
        if entry is None:
            raise UnknownParadigmError(f"unknown paradigm {paradigm_id!r}")
        return entry

    def entries(self) -> list[ParadigmEntry]:
        with self._lock:
            return [self._entries[pid] for pid in self._publication_order]

    def user_can_see(self, user: str, entry: ParadigmEntry) -> bool:
        if entry.policy.mode == "restricted":
            return user == entry.owner or user in entry.policy.allowed_users
        return True

    def query_paradigms(self, session_id: str, query_text: str):
        """Run a tabular query over the session user's visible paradigms.

        Returns (column names, rows) of the virtual `paradigms` table
        (id, name, version, engine_ref, owner, mode), in publication order.
        """
        session = self.validate_session(session_id)
        query = parse_query(query_text)
        if not isinstance(query, TabularQuery):
            raise QueryExecutionError("paradigm queries use the SELECT dialect")
        with self._lock:
            visible = [
                self._entries[pid]
                for pid in self._publication_order
                if self.user_can_see(session.user_id, self._entries[pid])
            ]
        rows = tuple(
            (
                e.descriptor.id,
                e.descriptor.name,
                e.descriptor.version,
                e.descriptor.engine_ref,
                e.owner,
                e.policy.mode,
            )
            for e in visible
        )
        table = TableStore("paradigms", PARADIGM_TABLE_COLUMNS, rows)
        return tabular_result_columns(table, query), execute_query(table, query)

    # -- service monitor -----------------------------------------------------

    def register_service(
        self,
        record: ServiceRecord,
        paradigm_installer: Callable[[ParadigmDescriptor], None] | None = None,
    ) -> ServiceRecord:
        with self._lock:
            record.last_heartbeat = self._clock()
            self._services[record.service_id] = record
            if paradigm_installer is not None:
                self._installers[record.service_id] = paradigm_installer
            # Late joiners catch up on everything published so far.
            if record.kind == "simulation_worker" and paradigm_installer is not None:
                for pid in self._publication_order:
                    entry = self._entries[pid]
                    paradigm_installer(entry.descriptor)
                    entry.replicated_to.add(record.service_id)
            return record

    def heartbeat(self, service_id: str) -> None:
        with self._lock:
            record = self._services.get(service_id)
            if record is None:
                raise UnknownServiceError(f"unknown service {service_id!r}")
            record.last_heartbeat = self._clock()

    def _status(self, record: ServiceRecord) -> str:
        age = self._clock() - record.last_heartbeat
        if age <= self.heartbeat_timeout:
            return "up"
        if age <= 2 * self.heartbeat_timeout:
            return "suspect"
        return "down"

    def service_status(self, service_id: str) -> str:
        with self._lock:
            record = self._services.get(service_id)
            if record is None:
                raise UnknownServiceError(f"unknown service {service_id!r}")
            return self._status(record)

    def services(self, kind: str | None = None) -> list[tuple[ServiceRecord, str]]:
        with self._lock:
            return [
                (record, self._status(record))
                for record in self._services.values()
                if kind is None or record.kind == kind
            ]

    def up_workers(self) -> list[str]:
        return [
            record.service_id
            for record, status in self.services("simulation_worker")
            if status == "up"
        ]

    # -- authorization and metering -----------------------------------------

    def authorize_job(
        self, session_id: str, paradigm_id: str, job_kind: str, job_id: str, units: int = 0
    ) -> Grant | Denial:
        """Grant or deny a job under the paradigm's policy.

        A grant atomically appends a usage record (charge = fee_per_job for
        metered paradigms, else 0); denials leave no ledger trace.
        """
        if job_kind not in JOB_KINDS:
            raise RegistryError(f"unknown job kind {job_kind!r}")
        session = self.validate_session(session_id)
        with self._lock:
            entry = self._entries.get(paradigm_id)
            if entry is None:
                return Denial(f"unknown paradigm {paradigm_id!r}")
            policy = entry.policy
            if policy.mode == "restricted" and not (
                session.user_id == entry.owner or session.user_id in policy.allowed_users
            ):
                return Denial(f"user {session.user_id!r} not allowed on {paradigm_id!r}")
            charge = policy.fee_per_job if policy.mode == "metered" else 0.0
            record = UsageRecord(
                session_id=session.session_id,
                user_id=session.user_id,
                paradigm_id=paradigm_id,
                job_id=job_id,
                job_kind=job_kind,
                units=units,
                charge=charge,
                recorded_at=time.time(),
            )
            self._ledger.append(record)
            with self._ledger_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_document(), sort_keys=True) + "\n")
            return Grant(
                session_id=session.session_id,
                user_id=session.user_id,
                paradigm_id=paradigm_id,
                job_kind=job_kind,
                charge=charge,
            )

    def ledger(self) -> list[UsageRecord]:
        with self._lock:
            return list(self._ledger)

    def ledger_total(self) -> float:
        with self._lock:
            return sum(record.charge for record in self._ledger)
