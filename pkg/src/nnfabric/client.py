"""Thin HTTP client for the gateway API, shared by the CLI and tests."""
from __future__ import annotations

import httpx


class GatewayConnectionError(Exception):
    pass


class GatewayApiError(Exception):
    """A non-2xx response; carries the structured error body."""

    def __init__(self, status: int, body: dict):
        self.status = status
        self.body = body
        message = body.get("error", {}).get("message", str(body))
        super().__init__(f"HTTP {status}: {message}")


class GatewayClient:
    def __init__(self, endpoint: str, token: str | None = None, timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.token = token
        self.timeout = timeout

    def request(self, method: str, path: str, json_body: dict | None = None) -> dict:
        headers = {}
        if self.token:
            headers["X-Session-Id"] = self.token
        url = f"{self.endpoint}/api/v1{path}"
        try:
            response = httpx.request(
                method, url, json=json_body, headers=headers, timeout=self.timeout
            )
        except httpx.HTTPError as exc:
            raise GatewayConnectionError(f"cannot reach gateway at {self.endpoint}: {exc}") from exc
        if response.status_code >= 400:
            try:
                body = response.json()
            except ValueError:
                body = {"error": {"code": "http_error", "message": response.text}}
            raise GatewayApiError(response.status_code, body)
        return response.json()

    # -- endpoint wrappers ---------------------------------------------------

    def health(self) -> dict:
        return self.request("GET", "/health")

    def login(self, user: str, password: str) -> dict:
        return self.request("POST", "/login", {"user": user, "password": password})

    def publish(self, descriptor: dict, policy: dict) -> dict:
        return self.request(
            "POST", "/paradigms/publish", {"descriptor": descriptor, "policy": policy}
        )

    def query_paradigms(self, query: str) -> dict:
        return self.request("POST", "/paradigms/query", {"query": query})

    def get_paradigm(self, paradigm_id: str) -> dict:
        return self.request("GET", f"/paradigms/{paradigm_id}")

    def create_network(
        self, paradigm_id: str, layer_sizes: list[int], activation: str, seed: int
    ) -> dict:
        return self.request(
            "POST",
            "/networks/create",
            {
                "paradigm_id": paradigm_id,
                "layer_sizes": layer_sizes,
                "activation": activation,
                "seed": seed,
            },
        )

    def submit_train(
        self,
        network_id: str,
        datastream: dict,
        params: dict,
        kind: str = "train",
        result_key: str | None = None,
    ) -> dict:
        return self.request(
            "POST",
            "/jobs/train",
            {
                "network_id": network_id,
                "datastream": datastream,
                "params": params,
                "kind": kind,
                "result_key": result_key,
            },
        )

    def submit_evaluate(self, result_key: str, datastream: dict) -> dict:
        return self.request(
            "POST", "/jobs/evaluate", {"result_key": result_key, "datastream": datastream}
        )

    def job_status(self, job_id: str) -> dict:
        return self.request("GET", f"/jobs/{job_id}/status")

    def get_result(self, key: str) -> dict:
        return self.request("GET", f"/results/{key}")

    def list_results(self, kind: str = "training_result") -> dict:
        return self.request("GET", f"/results?kind={kind}")

    def ledger(self) -> dict:
        return self.request("GET", "/ledger")

    def services(self) -> dict:
        return self.request("GET", "/services")
