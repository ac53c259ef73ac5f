from __future__ import annotations

import dataclasses
import time

import pytest
from fastapi.testclient import TestClient

from nnfabric.archive import ArchiveError, ArchiveKey
from nnfabric.engine import (
    PatternSet,
    instantiate_network,
    training_result_from_document,
)
from nnfabric.registry import RegistryMonitor, ServiceRecord
from nnfabric.services.config import (
    HeartbeatConfig,
    PlatformConfig,
    StoreConfig,
    UserConfig,
    WorkerConfig,
)
from nnfabric.services.gateway import create_app
from nnfabric.services.jobs import JobSpec, Scheduler
from nnfabric.services.platform import Platform

from .conftest import (
    XOR_INPUTS,
    XOR_SEED,
    XOR_TARGETS,
    make_backprop_descriptor,
    xor_params,
    xor_pattern_set,
)

FAST_HEARTBEAT = HeartbeatConfig(interval_s=0.05, timeout_s=0.25)

XOR_CSV = "a,b,xor\n0,0,0\n0,1,1\n1,0,1\n1,1,0\n"

EXPLICIT_XOR_DOC = {"kind": "explicit", "inputs": XOR_INPUTS, "targets": XOR_TARGETS}
QUERY_XOR_DOC = {
    "kind": "query",
    "query": "SELECT a, b, xor FROM xor",
    "store": "xor",
    "mapping": {"input_columns": ["a", "b"], "target_columns": ["xor"]},
}
XOR_PARAMS_DOC = {
    "learning_rate": 0.5,
    "momentum": 0.9,
    "max_epochs": 20000,
    "target_error": 0.01,
    "seed": 0,
}


def make_platform_config(tmp_path, workers=2, capacity=1, heartbeat=FAST_HEARTBEAT):
    xor_csv = tmp_path / "xor.csv"
    if not xor_csv.exists():
        xor_csv.write_text(XOR_CSV)
    return PlatformConfig(
        data_dir=str(tmp_path / "data"),
        heartbeat=heartbeat,
        workers=tuple(
            WorkerConfig(f"worker-{i}", "compute", capacity) for i in range(workers)
        ),
        users=(
            UserConfig("dev", "dev-pass"),
            UserConfig("alice", "alice-pass"),
            UserConfig("bob", "bob-pass"),
        ),
        stores=(("xor", StoreConfig("csv", str(xor_csv))),),
    )


@pytest.fixture
def platform(tmp_path):
    p = Platform(make_platform_config(tmp_path))
    p.start()
    yield p
    p.stop()


def login(platform, user="dev"):
    session = platform.monitor.authenticate(user, f"{user}-pass")
    assert hasattr(session, "session_id"), session
    return session


def publish_backprop(platform, policy=None, descriptor=None):
    from nnfabric.registry import AccessPolicy

    return platform.monitor.publish_paradigm(
        "dev", descriptor or make_backprop_descriptor(), policy or AccessPolicy()
    )


def wait_done(job, timeout=20.0):
    assert job.wait(timeout), f"job {job.job_id} still {job.phase} after {timeout}s"
    return job.status()


# --- scheduler unit tests (stub workers, manual completion) -----------------


class StubWorker:
    def __init__(self, service_id, capacity=1, affinity="compute", paradigms=("p",)):
        self.service_id = service_id
        self.capacity = capacity
        self.affinity = affinity
        self.local_paradigms = set(paradigms)
        self.pending = []

    def execute(self, job, on_finished):
        self.pending.append((job, on_finished))

    def finish(self, index=0, error=None):
        job, on_finished = self.pending.pop(index)
        if error is not None:
            on_finished(job, error=error)
        else:
            on_finished(job, result=object())


def tiny_spec(job_id: str, paradigm_id="p") -> JobSpec:
    net = instantiate_network(
        make_backprop_descriptor(id=paradigm_id), [2, 2, 1], "sigmoid", 0
    )
    return JobSpec(
        job_id=job_id,
        kind="train",
        network=net,
        patterns=xor_pattern_set(),
        params=xor_params(max_epochs=1, target_error=0.0),
        session_id="s",
        paradigm_id=paradigm_id,
    )


@pytest.fixture
def stub_pool(tmp_path):
    monitor = RegistryMonitor(tmp_path / "reg", heartbeat_timeout=60.0)
    scheduler = Scheduler(monitor, lambda job, result: ArchiveKey("training_result", job.job_id))

    def add(service_id, capacity=1, affinity="compute"):
        worker = StubWorker(service_id, capacity, affinity)
        monitor.register_service(
            ServiceRecord(service_id, "simulation_worker", f"local://{service_id}", affinity)
        )
        scheduler.attach_worker(worker)
        return worker

    return monitor, scheduler, add


class TestScheduler:
    def test_tie_break_prefers_lowest_service_id(self, stub_pool):
        _, scheduler, add = stub_pool
        worker_b = add("worker-b")
        worker_a = add("worker-a")
        job = scheduler.submit(tiny_spec("j1"), owner="dev")
        assert job.status().phase == "running"
        assert worker_a.pending and not worker_b.pending

    def test_least_loaded_wins(self, stub_pool):
        _, scheduler, add = stub_pool
        busy = add("worker-a", capacity=2)
        idle = add("worker-b", capacity=2)
        scheduler.submit(tiny_spec("j1"), owner="dev")  # lands on worker-a
        scheduler.submit(tiny_spec("j2"), owner="dev")  # worker-b now least loaded
        assert len(busy.pending) == 1
        assert len(idle.pending) == 1

    def test_queue_when_at_capacity_then_dispatch_on_free(self, stub_pool):
        _, scheduler, add = stub_pool
        worker = add("worker-a", capacity=1)
        first = scheduler.submit(tiny_spec("j1"), owner="dev")
        second = scheduler.submit(tiny_spec("j2"), owner="dev")
        assert first.status().phase == "running"
        assert second.status().phase == "queued"
        assert scheduler.queue_depth() == 1
        worker.finish()
        assert first.status().phase == "done"
        assert second.status().phase == "running"
        worker.finish()
        assert second.status().phase == "done"

    def test_fifo_order(self, stub_pool):
        _, scheduler, add = stub_pool
        worker = add("worker-a", capacity=1)
        jobs = [scheduler.submit(tiny_spec(f"j{i}"), owner="dev") for i in range(4)]
        order = []
        while worker.pending:
            order.append(worker.pending[0][0].job_id)
            worker.finish()
        assert order == ["j0", "j1", "j2", "j3"]
        assert all(job.status().phase == "done" for job in jobs)

    def test_no_compute_workers_fails_immediately(self, stub_pool):
        _, scheduler, add = stub_pool
        add("datastore-1", affinity="data")
        job = scheduler.submit(tiny_spec("j1"), owner="dev")
        status = job.status()
        assert status.phase == "failed"
        assert status.failure_reason == "no compute capacity"

    def test_worker_without_paradigm_not_eligible(self, stub_pool):
        _, scheduler, add = stub_pool
        worker = add("worker-a")
        worker.local_paradigms = set()
        job = scheduler.submit(tiny_spec("j1"), owner="dev")
        assert job.status().phase == "queued"
        worker.local_paradigms.add("p")
        scheduler.kick()
        assert job.status().phase == "running"

    def test_worker_error_marks_failed(self, stub_pool):
        _, scheduler, add = stub_pool
        worker = add("worker-a")
        job = scheduler.submit(tiny_spec("j1"), owner="dev")
        worker.finish(error="engine exploded")
        status = job.status()
        assert status.phase == "failed"
        assert status.failure_reason == "engine exploded"

    def test_result_writer_failure_marks_failed(self, tmp_path):
        monitor = RegistryMonitor(tmp_path / "reg", heartbeat_timeout=60.0)

        def broken_writer(job, result):
            raise ArchiveError("archive unavailable")

        scheduler = Scheduler(monitor, broken_writer)
        worker = StubWorker("worker-a")
        monitor.register_service(
            ServiceRecord("worker-a", "simulation_worker", "local://w", "compute")
        )
        scheduler.attach_worker(worker)
        job = scheduler.submit(tiny_spec("j1"), owner="dev")
        worker.finish()
        status = job.status()
        assert status.phase == "failed"
        assert "archive write failed" in status.failure_reason

    def test_capacity_never_exceeded(self, stub_pool):
        _, scheduler, add = stub_pool
        worker = add("worker-a", capacity=2)
        for i in range(6):
            scheduler.submit(tiny_spec(f"j{i}"), owner="dev")
        max_seen = len(worker.pending)
        while worker.pending:
            max_seen = max(max_seen, len(worker.pending))
            worker.finish()
        assert max_seen <= 2


# --- platform integration ----------------------------------------------------


class TestPlatformJobs:
    def test_xor_train_job_end_to_end(self, platform):
        publish_backprop(platform)
        session = login(platform)
        network_id, network_key = platform.create_network(
            session, "backprop-3layer", [2, 2, 1], "sigmoid", XOR_SEED
        )
        job = platform.submit_training_job(
            session, network_id, EXPLICIT_XOR_DOC, XOR_PARAMS_DOC
        )
        status = wait_done(job)
        assert status.phase == "done"
        assert status.result_key == f"training_result/{job.job_id}"
        entry = platform.archive.get(ArchiveKey.parse(status.result_key))
        assert entry.metadata.parent == network_key
        result = training_result_from_document(__import__("json").loads(entry.payload))
        assert result.converged
        assert status.error_series_so_far == tuple(result.error_series)

    def test_query_datastream_trains_identically(self, platform):
        publish_backprop(platform)
        session = login(platform)
        results = []
        for doc in (EXPLICIT_XOR_DOC, QUERY_XOR_DOC):
            network_id, _ = platform.create_network(
                session, "backprop-3layer", [2, 2, 1], "sigmoid", XOR_SEED
            )
            job = platform.submit_training_job(session, network_id, doc, XOR_PARAMS_DOC)
            status = wait_done(job)
            assert status.phase == "done"
            results.append(status.error_series_so_far)
        assert results[0] == results[1]

    def test_evaluate_untrained_network_fails_with_engine_reason(self, platform):
        publish_backprop(platform)
        net = instantiate_network(make_backprop_descriptor(), [2, 2, 1], "sigmoid", 0)
        spec = JobSpec(
            job_id="job-direct",
            kind="evaluate",
            network=net,
            patterns=PatternSet(XOR_INPUTS, XOR_TARGETS),
            params=None,
            session_id="s",
            paradigm_id="backprop-3layer",
        )
        job = platform.scheduler.submit(spec, owner="dev")
        status = wait_done(job)
        assert status.phase == "failed"
        assert "untrained" in status.failure_reason

    def test_worker_crash_reaps_job(self, platform):
        publish_backprop(platform)
        session = login(platform)
        network_id, _ = platform.create_network(
            session, "backprop-3layer", [2, 2, 1], "sigmoid", XOR_SEED
        )
        for worker in platform.workers:
            worker.inject_crash_on_next_job()
        job = platform.submit_training_job(
            session, network_id, EXPLICIT_XOR_DOC, XOR_PARAMS_DOC
        )
        status = wait_done(job, timeout=10.0)
        assert status.phase == "failed"
        assert "lost" in status.failure_reason

    def test_archive_outage_fails_result_write_not_computation(self, platform, monkeypatch):
        publish_backprop(platform)
        session = login(platform)
        network_id, _ = platform.create_network(
            session, "backprop-3layer", [2, 2, 1], "sigmoid", XOR_SEED
        )
        original_put = platform.archive.put

        def failing_put(entry):
            if entry.key.kind == "training_result":
                raise ArchiveError("archive unavailable (injected outage)")
            return original_put(entry)

        monkeypatch.setattr(platform.archive, "put", failing_put)
        job = platform.submit_training_job(
            session, network_id, EXPLICIT_XOR_DOC, dict(XOR_PARAMS_DOC, max_epochs=50, target_error=0.0)
        )
        status = wait_done(job)
        assert status.phase == "failed"
        assert "archive write failed" in status.failure_reason
        # The worker's computation path ran to completion regardless.
        assert len(status.error_series_so_far) == 50

        monkeypatch.setattr(platform.archive, "put", original_put)
        job2 = platform.submit_training_job(
            session, network_id, EXPLICIT_XOR_DOC, dict(XOR_PARAMS_DOC, max_epochs=5, target_error=0.0)
        )
        assert wait_done(job2).phase == "done"

    def test_worker_config_schema_is_archive_blind(self):
        forbidden = ("archive", "registry", "store", "endpoint", "url", "path", "dir", "db")
        for field in dataclasses.fields(WorkerConfig):
            assert not any(term in field.name.lower() for term in forbidden), field.name

    def test_replication_closure_with_late_joiner(self, platform):
        entry = publish_backprop(platform)
        assert entry.replicated_to == {"worker-0", "worker-1"}
        late = platform.add_worker(WorkerConfig("worker-late", "compute", 1))
        assert "backprop-3layer" in late.local_paradigms
        assert entry.replicated_to == {"worker-0", "worker-1", "worker-late"}
        registry_ids = {e.descriptor.id for e in platform.monitor.entries()}
        for worker in platform.workers:
            assert worker.local_paradigms == registry_ids

    def test_retrain_continues_from_stored_result(self, platform):
        publish_backprop(platform)
        session = login(platform)
        network_id, _ = platform.create_network(
            session, "backprop-3layer", [2, 2, 1], "sigmoid", XOR_SEED
        )
        first = platform.submit_training_job(
            session, network_id, EXPLICIT_XOR_DOC, dict(XOR_PARAMS_DOC, max_epochs=100, target_error=0.0)
        )
        first_status = wait_done(first)
        second = platform.submit_training_job(
            session,
            network_id,
            EXPLICIT_XOR_DOC,
            dict(XOR_PARAMS_DOC, max_epochs=100, target_error=0.0),
            kind="retrain",
            result_key=first_status.result_key,
        )
        second_status = wait_done(second)
        assert second_status.phase == "done"
        # Retraining resumes from the stored weights, so error keeps falling.
        assert second_status.error_series_so_far[0] < first_status.error_series_so_far[0]

    def test_concurrent_jobs_saturate_and_finish(self, platform):
        publish_backprop(platform)
        session = login(platform)
        network_id, _ = platform.create_network(
            session, "backprop-3layer", [2, 2, 1], "sigmoid", XOR_SEED
        )
        params = dict(XOR_PARAMS_DOC, max_epochs=200, target_error=0.0)
        jobs = [
            platform.submit_training_job(session, network_id, EXPLICIT_XOR_DOC, params)
            for _ in range(6)
        ]
        for job in jobs:
            status = wait_done(job)
            assert status.phase == "done", status
            assert len(status.error_series_so_far) == 200
        # Two capacity-1 workers: every job landed on a real worker slot.
        assert {job.worker_id for job in jobs} <= {"worker-0", "worker-1"}

    def test_retrain_against_wrong_network_rejected(self, platform):
        publish_backprop(platform)
        session = login(platform)
        network_id, _ = platform.create_network(
            session, "backprop-3layer", [2, 2, 1], "sigmoid", XOR_SEED
        )
        other_id, _ = platform.create_network(
            session, "backprop-3layer", [2, 2, 1], "sigmoid", 7
        )
        job = platform.submit_training_job(
            session, network_id, EXPLICIT_XOR_DOC, dict(XOR_PARAMS_DOC, max_epochs=5, target_error=0.0)
        )
        status = wait_done(job)
        with pytest.raises(ValueError):
            platform.submit_training_job(
                session,
                other_id,
                EXPLICIT_XOR_DOC,
                XOR_PARAMS_DOC,
                kind="retrain",
                result_key=status.result_key,
            )


# --- gateway (HTTP) -----------------------------------------------------------


@pytest.fixture
def client(platform):
    app = create_app(platform)
    with TestClient(app) as test_client:
        test_client.platform = platform
        yield test_client


def http_login(client, user="dev"):
    response = client.post("/api/v1/login", json={"user": user, "password": f"{user}-pass"})
    assert response.status_code == 200, response.text
    return {"X-Session-Id": response.json()["session_id"]}


def descriptor_doc():
    from nnfabric.paradigm import descriptor_to_document

    return descriptor_to_document(make_backprop_descriptor())


class TestGateway:
    def test_login_denied(self, client):
        response = client.post("/api/v1/login", json={"user": "dev", "password": "wrong"})
        assert response.status_code == 401
        assert response.json()["error"]["code"] == "denied"

    def test_forged_session_rejected(self, client):
        response = client.post(
            "/api/v1/paradigms/query",
            json={"query": "SELECT * FROM paradigms"},
            headers={"X-Session-Id": "forged"},
        )
        assert response.status_code == 401

    def test_full_workflow_over_http(self, client):
        headers = http_login(client)

        published = client.post(
            "/api/v1/paradigms/publish",
            json={"descriptor": descriptor_doc(), "policy": {"mode": "public"}},
            headers=headers,
        )
        assert published.status_code == 200, published.text
        assert sorted(published.json()["replicated_to"]) == ["worker-0", "worker-1"]

        rows = client.post(
            "/api/v1/paradigms/query",
            json={"query": "SELECT id, engine_ref FROM paradigms WHERE name = 'backprop'"},
            headers=headers,
        ).json()["rows"]
        assert rows == [["backprop-3layer", "backprop"]]

        created = client.post(
            "/api/v1/networks/create",
            json={
                "paradigm_id": "backprop-3layer",
                "layer_sizes": [2, 2, 1],
                "activation": "sigmoid",
                "seed": XOR_SEED,
            },
            headers=headers,
        )
        assert created.status_code == 200, created.text
        network_id = created.json()["network_id"]

        submitted = client.post(
            "/api/v1/jobs/train",
            json={"network_id": network_id, "datastream": QUERY_XOR_DOC, "params": XOR_PARAMS_DOC},
            headers=headers,
        )
        assert submitted.status_code == 200, submitted.text
        job_id = submitted.json()["job_id"]

        previous: list[float] = []
        phase_rank = {"queued": 0, "running": 1, "done": 2, "failed": 2}
        observed_phases: list[str] = []
        deadline = time.time() + 20
        while True:
            status = client.get(f"/api/v1/jobs/{job_id}/status", headers=headers).json()
            series = status["error_series_so_far"]
            assert series[: len(previous)] == previous  # prefix property
            previous = series
            observed_phases.append(status["phase"])
            if status["phase"] in ("done", "failed"):
                break
            assert time.time() < deadline, "training did not finish in time"
            time.sleep(0.05)
        assert status["phase"] == "done", status
        # Phase observations only ever move forward through the lifecycle.
        ranks = [phase_rank[phase] for phase in observed_phases]
        assert ranks == sorted(ranks)
        result_key = status["result_key"]

        evaluated = client.post(
            "/api/v1/jobs/evaluate",
            json={"result_key": result_key, "datastream": EXPLICIT_XOR_DOC},
            headers=headers,
        )
        assert evaluated.status_code == 200, evaluated.text
        eval_job = evaluated.json()["job_id"]
        deadline = time.time() + 10
        while True:
            eval_status = client.get(f"/api/v1/jobs/{eval_job}/status", headers=headers).json()
            if eval_status["phase"] in ("done", "failed"):
                break
            assert time.time() < deadline
            time.sleep(0.05)
        assert eval_status["phase"] == "done", eval_status

        fetched = client.get(f"/api/v1/results/{eval_status['result_key']}", headers=headers)
        assert fetched.status_code == 200
        payload = fetched.json()["payload"]
        assert len(payload["outputs"]) == 4
        assert fetched.json()["metadata"]["parent"] == result_key

        listed = client.get("/api/v1/results", headers=headers).json()["results"]
        assert any(item["key"] == result_key for item in listed)

    def test_restricted_paradigm_flow(self, client):
        from nnfabric.registry import AccessPolicy

        publish_backprop(
            client.platform,
            AccessPolicy("restricted", allowed_users=frozenset({"alice"})),
        )
        bob = http_login(client, "bob")
        response = client.post(
            "/api/v1/networks/create",
            json={"paradigm_id": "backprop-3layer", "layer_sizes": [2, 2, 1]},
            headers=bob,
        )
        assert response.status_code == 403
        assert response.json()["error"]["code"] == "policy_denied"
        rows = client.post(
            "/api/v1/paradigms/query", json={"query": "SELECT id FROM paradigms"}, headers=bob
        ).json()["rows"]
        assert rows == []

    def test_unknown_ids_return_404(self, client):
        headers = http_login(client)
        assert client.get("/api/v1/jobs/ghost/status", headers=headers).status_code == 404
        assert (
            client.get("/api/v1/results/training_result/ghost", headers=headers).status_code
            == 404
        )
        response = client.post(
            "/api/v1/networks/create",
            json={"paradigm_id": "ghost", "layer_sizes": [2, 2, 1]},
            headers=headers,
        )
        assert response.status_code == 404

    def test_duplicate_publish_conflicts(self, client):
        headers = http_login(client)
        body = {"descriptor": descriptor_doc(), "policy": {"mode": "public"}}
        assert client.post("/api/v1/paradigms/publish", json=body, headers=headers).status_code == 200
        response = client.post("/api/v1/paradigms/publish", json=body, headers=headers)
        assert response.status_code == 409

    def test_invalid_descriptor_rejected(self, client):
        headers = http_login(client)
        bad = descriptor_doc()
        bad["engine_ref"] = "jordan"
        response = client.post(
            "/api/v1/paradigms/publish", json={"descriptor": bad}, headers=headers
        )
        assert response.status_code == 400
        assert "jordan" in response.json()["error"]["message"]

    def test_bad_query_rejected(self, client):
        headers = http_login(client)
        response = client.post(
            "/api/v1/paradigms/query",
            json={"query": "SELECT * FROM paradigms JOIN other"},
            headers=headers,
        )
        assert response.status_code == 400
        assert "JOIN" in response.json()["error"]["message"]

    def test_metering_over_http(self, client):
        from nnfabric.registry import AccessPolicy

        publish_backprop(client.platform, AccessPolicy("metered", fee_per_job=2.0))
        headers = http_login(client, "alice")
        created = client.post(
            "/api/v1/networks/create",
            json={"paradigm_id": "backprop-3layer", "layer_sizes": [2, 2, 1], "seed": 1},
            headers=headers,
        ).json()
        params = dict(XOR_PARAMS_DOC, max_epochs=5, target_error=0.0)
        for _ in range(3):
            response = client.post(
                "/api/v1/jobs/train",
                json={
                    "network_id": created["network_id"],
                    "datastream": EXPLICIT_XOR_DOC,
                    "params": params,
                },
                headers=headers,
            )
            assert response.status_code == 200
        ledger = client.get("/api/v1/ledger", headers=headers).json()
        assert ledger["total"] == 6.0
        assert len(ledger["records"]) == 3

    def test_paradigm_detail_includes_summary(self, client):
        headers = http_login(client)
        publish_backprop(client.platform)
        response = client.get("/api/v1/paradigms/backprop-3layer", headers=headers)
        assert response.status_code == 200
        body = response.json()
        assert "3 layers" in body["summary"]
        assert body["descriptor"]["engine_ref"] == "backprop"

    def test_health_needs_no_session(self, client):
        assert client.get("/api/v1/health").status_code == 200

    def test_session_sweep_across_endpoints(self, client):
        payloads = {
            ("POST", "/api/v1/paradigms/publish"): {"descriptor": descriptor_doc()},
            ("POST", "/api/v1/paradigms/query"): {"query": "SELECT * FROM paradigms"},
            ("GET", "/api/v1/paradigms/backprop-3layer"): None,
            ("POST", "/api/v1/networks/create"): {
                "paradigm_id": "backprop-3layer",
                "layer_sizes": [2, 2, 1],
            },
            ("POST", "/api/v1/jobs/train"): {
                "network_id": "x",
                "datastream": EXPLICIT_XOR_DOC,
                "params": XOR_PARAMS_DOC,
            },
            ("POST", "/api/v1/jobs/evaluate"): {
                "result_key": "training_result/x",
                "datastream": EXPLICIT_XOR_DOC,
            },
            ("GET", "/api/v1/jobs/x/status"): None,
            ("GET", "/api/v1/results"): None,
            ("GET", "/api/v1/results/training_result/x"): None,
            ("GET", "/api/v1/ledger"): None,
            ("GET", "/api/v1/services"): None,
        }
        for (method, path), body in payloads.items():
            for headers in ({}, {"X-Session-Id": "forged-session-id"}):
                response = client.request(method, path, json=body, headers=headers)
                assert response.status_code == 401, (method, path, headers, response.text)
                assert response.json()["error"]["code"] == "invalid_session"
