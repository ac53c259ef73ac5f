"""Platform configuration: one YAML file, overridable by environment
variables (NNFABRIC_*). Paths in the file resolve relative to the file.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WorkerConfig:
    """A simulation worker's whole configuration.

    Workers are archive-blind by design: nothing here locates an archive,
    registry store, or any other persistence backend.
    """

    service_id: str
    affinity: str = "compute"
    capacity: int = 1

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ConfigError(f"worker {self.service_id}: capacity must be >= 1")


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8870


@dataclass(frozen=True)
class HeartbeatConfig:
    interval_s: float = 2.0
    timeout_s: float = 6.0


@dataclass(frozen=True)
class StoreConfig:
    format: str  # csv | jsonl
    path: str

    def __post_init__(self) -> None:
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"unknown store format {self.format!r}")


@dataclass(frozen=True)
class UserConfig:
    name: str
    password: str


@dataclass(frozen=True)
class ClientConfig:
    endpoint: str = "http://127.0.0.1:8870"
    token: str | None = None
    output: str = "text"


@dataclass(frozen=True)
class PlatformConfig:
    data_dir: str = "./nnfabric-data"
    gateway: GatewayConfig = GatewayConfig()
    heartbeat: HeartbeatConfig = HeartbeatConfig()
    session_lifetime_s: float = 1800.0
    workers: tuple[WorkerConfig, ...] = (
        WorkerConfig("worker-1"),
        WorkerConfig("worker-2"),
    )
    users: tuple[UserConfig, ...] = ()
    stores: tuple[tuple[str, StoreConfig], ...] = ()
    client: ClientConfig = ClientConfig()


def _as_mapping(doc, where: str) -> dict:
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected a mapping")
    return doc


def config_from_document(doc: dict, base_dir: Path | None = None) -> PlatformConfig:
    doc = _as_mapping(doc, "config")
    base = base_dir or Path.cwd()

    def resolve(path_text: str) -> str:
        path = Path(path_text)
        return str(path if path.is_absolute() else base / path)

    gateway_doc = _as_mapping(doc.get("gateway"), "gateway")
    heartbeat_doc = _as_mapping(doc.get("heartbeat"), "heartbeat")
    session_doc = _as_mapping(doc.get("session"), "session")
    client_doc = _as_mapping(doc.get("client"), "client")

    workers = []
    for i, worker_doc in enumerate(doc.get("workers", []) or []):
        worker_doc = _as_mapping(worker_doc, f"workers[{i}]")
        if "id" not in worker_doc:
            raise ConfigError(f"workers[{i}]: missing id")
        workers.append(
            WorkerConfig(
                service_id=worker_doc["id"],
                affinity=worker_doc.get("affinity", "compute"),
                capacity=int(worker_doc.get("capacity", 1)),
            )
        )
    if not workers:
        workers = [WorkerConfig("worker-1"), WorkerConfig("worker-2")]

    users = tuple(
        UserConfig(u["name"], u["password"])
        for u in (doc.get("users", []) or [])
    )
    stores = tuple(
        (name, StoreConfig(format=s["format"], path=resolve(s["path"])))
        for name, s in _as_mapping(doc.get("stores"), "stores").items()
    )

    return PlatformConfig(
        data_dir=resolve(doc.get("data_dir", "./nnfabric-data")),
        gateway=GatewayConfig(
            host=gateway_doc.get("host", "127.0.0.1"),
            port=int(gateway_doc.get("port", 8870)),
        ),
        heartbeat=HeartbeatConfig(
            interval_s=float(heartbeat_doc.get("interval_s", 2.0)),
            timeout_s=float(heartbeat_doc.get("timeout_s", 6.0)),
        ),
        session_lifetime_s=float(session_doc.get("lifetime_s", 1800.0)),
        workers=tuple(workers),
        users=users,
        stores=stores,
        client=ClientConfig(
            endpoint=client_doc.get("endpoint", "http://127.0.0.1:8870"),
            token=client_doc.get("token"),
            output=client_doc.get("output", "text"),
        ),
    )


_ENV_OVERRIDES = {
    "NNFABRIC_DATA_DIR": ("data_dir",),
    "NNFABRIC_GATEWAY_HOST": ("gateway", "host"),
    "NNFABRIC_GATEWAY_PORT": ("gateway", "port"),
    "NNFABRIC_HEARTBEAT_INTERVAL": ("heartbeat", "interval_s"),
    "NNFABRIC_HEARTBEAT_TIMEOUT": ("heartbeat", "timeout_s"),
    "NNFABRIC_SESSION_LIFETIME": ("session", "lifetime_s"),
    "NNFABRIC_ENDPOINT": ("client", "endpoint"),
    "NNFABRIC_TOKEN": ("client", "token"),
    "NNFABRIC_OUTPUT": ("client", "output"),
}


def apply_env_overrides(doc: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    for variable, path in _ENV_OVERRIDES.items():
        if variable not in environ:
            continue
        target = doc
        for key in path[:-1]:
            target = target.setdefault(key, {})
        target[path[-1]] = environ[variable]
    return doc


def load_config(path: str | Path | None, environ=None) -> PlatformConfig:
    """Load the platform config file, or defaults when path is None."""
    if path is None:
        doc: dict = {}
        base = Path.cwd()
    else:
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid config {path}: {exc}") from exc
        base = path.parent.resolve()
    doc = apply_env_overrides(doc, environ)
    return config_from_document(doc, base)
