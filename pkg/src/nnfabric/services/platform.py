"""Platform assembly: registry/monitor, archive, store catalog, worker
pool, and scheduler wired together, plus the workflow operations the
gateway exposes. The platform (not any worker) writes job results to the
archive.
"""
from __future__ import annotations

import logging
import threading
import uuid
from pathlib import Path

from nnfabric import engine as eng
from nnfabric.archive import Archive, ArchiveKey, NotFoundError, make_entry
from nnfabric.datastream import (
    Store,
    datastream_spec_from_document,
    load_csv_table,
    load_jsonl_documents,
    resolve_datastream,
)
from nnfabric.registry import (
    Denial,
    RegistryMonitor,
    ServiceRecord,
    Session,
)
from nnfabric.services.config import PlatformConfig
from nnfabric.services.jobs import Job, JobSpec, Scheduler
from nnfabric.services.worker import Worker

log = logging.getLogger(__name__)


class PolicyDeniedError(Exception):
    """The paradigm's access policy denies this user's request."""


class Platform:
    def __init__(self, config: PlatformConfig):
        self.config = config
        data_dir = Path(config.data_dir)
        self.monitor = RegistryMonitor(
            data_dir / "registry",
            heartbeat_timeout=config.heartbeat.timeout_s,
            session_lifetime=config.session_lifetime_s,
        )
        self.archive = Archive(data_dir / "archive")
        for user in config.users:
            if user.name not in self.monitor.users.known_users():
                self.monitor.users.add(user.name, user.password)
        self.stores: dict[str, Store] = {}
        for name, store_config in config.stores:
            loader = load_csv_table if store_config.format == "csv" else load_jsonl_documents
            self.stores[name] = loader(store_config.path, name=name)
        self.scheduler = Scheduler(self.monitor, self._write_job_result)
        self.workers = [
            Worker(wc, self.monitor, heartbeat_interval=config.heartbeat.interval_s)
            for wc in config.workers
        ]
        self._supervisor: threading.Thread | None = None
        self._stop = threading.Event()
        self._started = False

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        endpoint = f"http://{self.config.gateway.host}:{self.config.gateway.port}"
        for service_id, kind in (
            ("gateway", "gateway"),
            ("registry", "registry"),
            ("archive", "archive"),
        ):
            self.monitor.register_service(
                ServiceRecord(service_id, kind, endpoint, "admin" if kind == "gateway" else "data")
            )
        for worker in self.workers:
            worker.start()
            self.scheduler.attach_worker(worker)
        self._supervisor = threading.Thread(
            target=self._supervision_loop, name="platform-supervisor", daemon=True
        )
        self._supervisor.start()
        log.info(
            "platform up: %d workers, %d stores, data at %s",
            len(self.workers),
            len(self.stores),
            self.config.data_dir,
        )

    def stop(self) -> None:
        self._stop.set()
        for worker in self.workers:
            worker.stop()

    def add_worker(self, worker_config) -> Worker:
        """Register and start one more worker on the running platform."""
        worker = Worker(
            worker_config, self.monitor, heartbeat_interval=self.config.heartbeat.interval_s
        )
        self.workers.append(worker)
        worker.start()
        self.scheduler.attach_worker(worker)
        return worker

    def _supervision_loop(self) -> None:
        # Heartbeats for the co-located services; reaps jobs on lost workers.
        interval = self.config.heartbeat.interval_s
        while not self._stop.wait(interval):
            for service_id in ("gateway", "registry", "archive"):
                try:
                    self.monitor.heartbeat(service_id)
                except Exception:
                    pass
            reaped = self.scheduler.reap_lost_jobs()
            if reaped:
                log.warning("reaped lost jobs: %s", ", ".join(reaped))

    # -- result persistence (single archive writer) -------------------------

    def _write_job_result(self, job: Job, result) -> ArchiveKey:
        spec = job.spec
        if spec.kind in ("train", "retrain"):
            key = ArchiveKey("training_result", spec.job_id)
            self.archive.put(
                make_entry(
                    key.kind,
                    key.id,
                    eng.training_result_to_json(result),
                    owner=job.owner,
                    paradigm_id=spec.paradigm_id,
                    parent=ArchiveKey("network_object", spec.network.id),
                )
            )
            return key
        key = ArchiveKey("evaluation_result", spec.job_id)
        parent = (
            ArchiveKey("training_result", spec.created_from) if spec.created_from else None
        )
        self.archive.put(
            make_entry(
                key.kind,
                key.id,
                eng.evaluation_result_to_json(result),
                owner=job.owner,
                paradigm_id=spec.paradigm_id,
                parent=parent,
            )
        )
        return key

    # -- workflow operations ------------------------------------------------

    def create_network(
        self,
        session: Session,
        paradigm_id: str,
        layer_sizes: list[int],
        activation: str,
        seed: int,
    ) -> tuple[str, ArchiveKey]:
        entry = self.monitor.get_entry(paradigm_id)
        if not self.monitor.user_can_see(session.user_id, entry):
            raise PolicyDeniedError(f"user {session.user_id!r} not allowed on {paradigm_id!r}")
        network = eng.instantiate_network(
            entry.descriptor,
            layer_sizes,
            activation,
            seed,
            network_id=f"net-{uuid.uuid4().hex[:12]}",
        )
        key = ArchiveKey("network_object", network.id)
        self.archive.put(
            make_entry(
                key.kind,
                key.id,
                eng.network_to_json(network),
                owner=session.user_id,
                paradigm_id=paradigm_id,
            )
        )
        return network.id, key

    def _load_network(self, network_id: str) -> eng.NetworkObject:
        entry = self.archive.get(ArchiveKey("network_object", network_id))
        return eng.network_from_json(entry.payload)

    def _trained_network_from_result(self, result_key: ArchiveKey):
        """Reconstruct the trained network a training result captured."""
        entry = self.archive.get(result_key)
        result = eng.training_result_from_json(entry.payload)
        parent = entry.metadata.parent
        if parent is None:
            raise NotFoundError(f"{result_key} has no parent network object")
        network = eng.network_from_json(self.archive.get(parent).payload)
        network.weights = [w.copy() for w in result.final_weights]
        network.state = "trained"
        network.check_shapes()
        return network, result

    def _resolve_patterns(self, paradigm_id: str, datastream_doc: dict) -> eng.PatternSet:
        descriptor = self.monitor.get_entry(paradigm_id).descriptor
        spec = datastream_spec_from_document(datastream_doc)
        return resolve_datastream(spec, descriptor.io_schema, self.stores)

    def _archive_pattern_set(self, job_id: str, patterns, owner: str, paradigm_id: str) -> None:
        self.archive.put(
            make_entry(
                "pattern_set",
                f"{job_id}-data",
                eng.pattern_set_to_json(patterns),
                owner=owner,
                paradigm_id=paradigm_id,
            )
        )

    def submit_training_job(
        self,
        session: Session,
        network_id: str,
        datastream_doc: dict,
        params_doc: dict,
        kind: str = "train",
        result_key: str | None = None,
    ) -> Job:
        if kind not in ("train", "retrain"):
            raise ValueError(f"training jobs are train or retrain, not {kind!r}")
        created_from = None
        if kind == "retrain":
            if not result_key:
                raise ValueError("retrain needs the previous training result key")
            key = ArchiveKey.parse(result_key)
            if key.kind != "training_result":
                raise ValueError(f"retrain continues from a training_result, got {key}")
            network, previous = self._trained_network_from_result(key)
            if network.id != network_id:
                raise ValueError(
                    f"result {key} belongs to network {network.id!r}, not {network_id!r}"
                )
            created_from = key.id
        else:
            network = self._load_network(network_id)
        params = eng.TrainingParams(
            learning_rate=params_doc["learning_rate"],
            momentum=params_doc.get("momentum", 0.0),
            max_epochs=params_doc["max_epochs"],
            target_error=params_doc.get("target_error", 0.0),
            seed=params_doc.get("seed", 0),
        )
        patterns = self._resolve_patterns(network.paradigm_id, datastream_doc)
        job_id = f"job-{uuid.uuid4().hex[:12]}"
        outcome = self.monitor.authorize_job(
            session.session_id, network.paradigm_id, kind, job_id, units=params.max_epochs
        )
        if isinstance(outcome, Denial):
            raise PolicyDeniedError(outcome.reason)
        self._archive_pattern_set(job_id, patterns, session.user_id, network.paradigm_id)
        spec = JobSpec(
            job_id=job_id,
            kind=kind,
            network=network,
            patterns=patterns,
            params=params,
            session_id=session.session_id,
            paradigm_id=network.paradigm_id,
            created_from=created_from,
        )
        return self.scheduler.submit(spec, owner=session.user_id)

    def submit_evaluation_job(
        self, session: Session, result_key: str, datastream_doc: dict
    ) -> Job:
        key = ArchiveKey.parse(result_key)
        if key.kind != "training_result":
            raise ValueError(f"evaluation uses a training_result key, got {key}")
        network, _result = self._trained_network_from_result(key)
        patterns = self._resolve_patterns(network.paradigm_id, datastream_doc)
        job_id = f"job-{uuid.uuid4().hex[:12]}"
        outcome = self.monitor.authorize_job(
            session.session_id, network.paradigm_id, "evaluate", job_id, units=len(patterns)
        )
        if isinstance(outcome, Denial):
            raise PolicyDeniedError(outcome.reason)
        self._archive_pattern_set(job_id, patterns, session.user_id, network.paradigm_id)
        spec = JobSpec(
            job_id=job_id,
            kind="evaluate",
            network=network,
            patterns=patterns,
            params=None,
            session_id=session.session_id,
            paradigm_id=network.paradigm_id,
            created_from=key.id,
        )
        return self.scheduler.submit(spec, owner=session.user_id)
