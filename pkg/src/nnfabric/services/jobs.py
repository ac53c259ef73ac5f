"""Job model and the dispatch authority for the compute worker pool.

A JobSpec inlines everything a worker needs (network object, resolved
patterns, training parameters); workers never call back into the archive
or any store. Results flow back to the gateway, which is the single
archive writer.
"""
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable

from nnfabric.archive import ArchiveKey
from nnfabric.engine import NetworkObject, PatternSet, TrainingParams

JOB_KINDS = ("train", "retrain", "evaluate")

_ALLOWED_TRANSITIONS = {
    "queued": {"running", "failed"},
    "running": {"done", "failed"},
    "done": set(),
    "failed": set(),
}


@dataclass
class JobSpec:
    """Fully inlined work order; self-contained by design."""

    job_id: str
    kind: str
    network: NetworkObject
    patterns: PatternSet
    params: TrainingParams | None
    session_id: str
    paradigm_id: str
    created_from: str | None = None  # training-result id, for evaluate lineage


@dataclass(frozen=True)
class JobStatus:
    job_id: str
    phase: str
    error_series_so_far: tuple[float, ...]
    result_key: str | None
    failure_reason: str | None

    def to_document(self) -> dict:
        return {
            "job_id": self.job_id,
            "phase": self.phase,
            "error_series_so_far": list(self.error_series_so_far),
            "result_key": self.result_key,
            "failure_reason": self.failure_reason,
        }


class Job:
    """Gateway-side runtime record of a submitted job."""

    def __init__(self, spec: JobSpec, owner: str):
        self.spec = spec
        self.owner = owner
        self.worker_id: str | None = None
        self._lock = threading.Lock()
        self._phase = "queued"
        self._error_series: list[float] = []
        self._result_key: ArchiveKey | None = None
        self._failure_reason: str | None = None
        self._done_event = threading.Event()

    @property
    def job_id(self) -> str:
        return self.spec.job_id

    def _transition(self, phase: str) -> None:
        if phase not in _ALLOWED_TRANSITIONS[self._phase]:
            raise RuntimeError(f"job {self.job_id}: illegal transition {self._phase} -> {phase}")
        self._phase = phase

    def mark_running(self, worker_id: str) -> None:
        with self._lock:
            self._transition("running")
            self.worker_id = worker_id

    def record_error(self, sse: float) -> None:
        with self._lock:
            self._error_series.append(sse)

    def complete(self, result_key: ArchiveKey) -> None:
        with self._lock:
            if self._phase == "failed":  # reaped as lost before the result landed
                return
            self._transition("done")
            self._result_key = result_key
        self._done_event.set()

    def fail(self, reason: str) -> None:
        with self._lock:
            if self._phase in ("done", "failed"):
                return
            self._transition("failed")
            self._failure_reason = reason
        self._done_event.set()

    def status(self) -> JobStatus:
        with self._lock:
            return JobStatus(
                job_id=self.job_id,
                phase=self._phase,
                error_series_so_far=tuple(self._error_series),
                result_key=str(self._result_key) if self._result_key else None,
                failure_reason=self._failure_reason,
            )

    def wait(self, timeout: float | None = None) -> bool:
        return self._done_event.wait(timeout)

    @property
    def phase(self) -> str:
        with self._lock:
            return self._phase


class Scheduler:
    """Single dispatch authority: least-loaded placement over up,
    compute-affinity workers holding the job's paradigm; FIFO overflow queue."""

    def __init__(self, monitor, result_writer: Callable[[Job, object], ArchiveKey]):
        self._monitor = monitor
        self._result_writer = result_writer
        self._lock = threading.Lock()
        self._workers: dict[str, object] = {}  # service_id -> Worker
        self._running: dict[str, set[str]] = {}  # service_id -> running job ids
        self._queue: deque[Job] = deque()
        self._jobs: dict[str, Job] = {}

    # -- pool wiring -------------------------------------------------------

    def attach_worker(self, worker) -> None:
        with self._lock:
            self._workers[worker.service_id] = worker
            self._running.setdefault(worker.service_id, set())
        self.kick()

    def workers(self) -> list:
        with self._lock:
            return list(self._workers.values())

    # -- submission and dispatch -------------------------------------------

    def submit(self, spec: JobSpec, owner: str) -> Job:
        if spec.kind not in JOB_KINDS:
            raise ValueError(f"unknown job kind {spec.kind!r}")
        job = Job(spec, owner)
        no_compute = False
        with self._lock:
            self._jobs[spec.job_id] = job
            if not self._compute_workers_exist():
                no_compute = True
            else:
                worker = self._pick_worker(spec.paradigm_id)
                if worker is not None:
                    self._dispatch(worker, job)
                else:
                    self._queue.append(job)
        if no_compute:
            job.fail("no compute capacity")
        return job

    def get_job(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def jobs(self) -> list[Job]:
        with self._lock:
            return list(self._jobs.values())

    def _compute_workers_exist(self) -> bool:
        return any(
            worker.affinity == "compute" for worker in self._workers.values()
        )

    def _pick_worker(self, paradigm_id: str):
        """Least-loaded up compute worker holding the paradigm, with spare
        capacity; ties broken by lowest service_id. Caller holds the lock."""
        up = set(self._monitor.up_workers())
        candidates = []
        for service_id, worker in self._workers.items():
            if worker.affinity != "compute" or service_id not in up:
                continue
            if paradigm_id not in worker.local_paradigms:
                continue
            load = len(self._running[service_id])
            if load >= worker.capacity:
                continue
            candidates.append((load, service_id, worker))
        if not candidates:
            return None
        candidates.sort(key=lambda c: (c[0], c[1]))
        return candidates[0][2]

    def _dispatch(self, worker, job: Job) -> None:
        """Reserve a slot and hand the job to the worker. Caller holds the lock."""
        self._running[worker.service_id].add(job.job_id)
        job.mark_running(worker.service_id)
        worker.execute(job, self._on_worker_finished)

    def kick(self) -> None:
        """Dispatch every queued job that now has an eligible worker, FIFO."""
        with self._lock:
            remaining: deque[Job] = deque()
            while self._queue:
                job = self._queue.popleft()
                worker = self._pick_worker(job.spec.paradigm_id)
                if worker is None:
                    remaining.append(job)
                else:
                    self._dispatch(worker, job)
            self._queue = remaining

    # -- completion --------------------------------------------------------

    def _on_worker_finished(self, job: Job, result=None, error: str | None = None) -> None:
        with self._lock:
            running = self._running.get(job.worker_id or "")
            if running is not None:
                running.discard(job.job_id)
        if job.phase != "running":
            return  # already reaped as lost; drop the late result
        if error is not None:
            job.fail(error)
        else:
            try:
                key = self._result_writer(job, result)
            except Exception as exc:
                job.fail(f"archive write failed: {exc}")
            else:
                job.complete(key)
        self.kick()

    # -- supervision -------------------------------------------------------

    def reap_lost_jobs(self) -> list[str]:
        """Fail running jobs whose worker's heartbeat has lapsed to down."""
        lost: list[Job] = []
        with self._lock:
            for service_id, job_ids in self._running.items():
                if not job_ids:
                    continue
                try:
                    status = self._monitor.service_status(service_id)
                except Exception:
                    status = "down"
                if status == "down":
                    for job_id in list(job_ids):
                        job = self._jobs[job_id]
                        lost.append(job)
                        job_ids.discard(job_id)
        for job in lost:
            job.fail(f"worker {job.worker_id} lost (heartbeat lapsed)")
        if lost:
            self.kick()
        return [job.job_id for job in lost]

    def queue_depth(self) -> int:
        with self._lock:
            return len(self._queue)
