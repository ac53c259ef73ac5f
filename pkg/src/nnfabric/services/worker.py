"""Simulation worker runtime: executes inlined jobs with the engine.

A worker holds replicated paradigm ids, heartbeats to the monitor, and
runs up to `capacity` jobs concurrently. It has no archive or registry
storage access; results are returned to the dispatcher in memory.
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor

from nnfabric import engine as eng
from nnfabric.registry import RegistryMonitor, ServiceRecord
from nnfabric.services.config import WorkerConfig
from nnfabric.services.jobs import Job

log = logging.getLogger(__name__)


class Worker:
    def __init__(
        self,
        config: WorkerConfig,
        monitor: RegistryMonitor,
        heartbeat_interval: float = 2.0,
    ):
        self.config = config
        self._monitor = monitor
        self._heartbeat_interval = heartbeat_interval
        self.local_paradigms: set[str] = set()
        self._executor = ThreadPoolExecutor(
            max_workers=config.capacity, thread_name_prefix=config.service_id
        )
        self._stop = threading.Event()
        self._crash_next_job = False
        self._crashed = False
        self._heartbeat_thread: threading.Thread | None = None

    @property
    def service_id(self) -> str:
        return self.config.service_id

    @property
    def affinity(self) -> str:
        return self.config.affinity

    @property
    def capacity(self) -> int:
        return self.config.capacity

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._monitor.register_service(
            ServiceRecord(
                service_id=self.service_id,
                kind="simulation_worker",
                endpoint=f"local://{self.service_id}",
                affinity=self.affinity,
            ),
            paradigm_installer=self.install_paradigm,
        )
        self._heartbeat_thread = threading.Thread(
            target=self._heartbeat_loop, name=f"{self.service_id}-heartbeat", daemon=True
        )
        self._heartbeat_thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._executor.shutdown(wait=False)

    def _heartbeat_loop(self) -> None:
        while not self._stop.wait(self._heartbeat_interval):
            if self._crashed:
                return
            try:
                self._monitor.heartbeat(self.service_id)
            except Exception:  # monitor gone during shutdown
                return

    # -- replication target ----------------------------------------------

    def install_paradigm(self, descriptor) -> None:
        self.local_paradigms.add(descriptor.id)

    # -- job execution -----------------------------------------------------

    def execute(self, job: Job, on_finished) -> None:
        """Run the job on the worker's executor; report through on_finished."""
        self._executor.submit(self._run, job, on_finished)

    def _run(self, job: Job, on_finished) -> None:
        if self._crash_next_job:
            # Fault injection: die mid-job. Heartbeats stop and the result
            # never reaches the dispatcher; supervision must reap the job.
            self._crashed = True
            log.warning("%s: injected crash while running %s", self.service_id, job.job_id)
            return
        spec = job.spec
        try:
            if spec.kind in ("train", "retrain"):
                run = eng.retrain if spec.kind == "retrain" else eng.train
                result = run(spec.network, spec.patterns, spec.params, job.record_error)
            elif spec.kind == "evaluate":
                result = eng.evaluate(spec.network, spec.patterns, created_from=spec.created_from)
            else:
                raise ValueError(f"unknown job kind {spec.kind!r}")
        except Exception as exc:
            log.info("%s: job %s failed: %s", self.service_id, job.job_id, exc)
            on_finished(job, error=str(exc))
            return
        on_finished(job, result=result)

    # -- fault injection (tests only) ---------------------------------------

    def inject_crash_on_next_job(self) -> None:
        self._crash_next_job = True
