"""Operator and scripting client for the platform.

`serve` boots a whole deployment from one config file; every other
subcommand maps onto a single gateway endpoint. With --output json each
successful command prints exactly one JSON document.
"""
from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import click

from nnfabric.client import GatewayApiError, GatewayClient, GatewayConnectionError
from nnfabric.services.config import load_config


@dataclass
class CliContext:
    endpoint: str
    token: str | None
    output: str
    config_path: str | None

    def client(self) -> GatewayClient:
        return GatewayClient(self.endpoint, self.token)


def emit(ctx: CliContext, document: dict, text: str | None = None) -> None:
    if ctx.output == "json":
        click.echo(json.dumps(document, indent=2, sort_keys=True))
    else:
        click.echo(text if text is not None else json.dumps(document, indent=2, sort_keys=True))


def run(ctx: CliContext, call):
    try:
        return call()
    except GatewayConnectionError as exc:
        click.echo(
            json.dumps({"error": {"code": "connection_failed", "message": str(exc)}}), err=True
        )
        sys.exit(2)
    except GatewayApiError as exc:
        click.echo(json.dumps(exc.body), err=True)
        sys.exit(1)


def load_json_arg(value: str) -> dict:
    """Accept inline JSON or a path to a JSON file."""
    candidate = Path(value)
    if candidate.exists():
        return json.loads(candidate.read_text(encoding="utf-8"))
    stripped = value.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    raise click.BadParameter(f"{value!r} is neither a file nor inline JSON")


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Platform/client config file.")
@click.option("--endpoint", default=None, help="Gateway base URL.")
@click.option("--token", default=None, help="Session id from `login`.")
@click.option("--output", type=click.Choice(["json", "text"]), default=None)
@click.pass_context
def main(ctx, config_path, endpoint, token, output):
    """Neural-network training services: publish paradigms, run jobs, inspect results."""
    config = load_config(config_path)
    ctx.obj = CliContext(
        endpoint=endpoint or config.client.endpoint,
        token=token or config.client.token,
        output=output or config.client.output,
        config_path=config_path,
    )


@main.command()
@click.pass_obj
def serve(ctx: CliContext) -> None:
    """Start gateway, registry/archive, and workers from the config file."""
    import logging

    import uvicorn

    from nnfabric.services.gateway import create_app
    from nnfabric.services.platform import Platform

    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    config = load_config(ctx.config_path)
    platform = Platform(config)
    platform.start()
    app = create_app(platform)
    click.echo(f"gateway listening on http://{config.gateway.host}:{config.gateway.port}")
    try:
        uvicorn.run(app, host=config.gateway.host, port=config.gateway.port, log_level="warning")
    finally:
        platform.stop()


@main.command()
@click.argument("descriptor_file", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["public", "restricted", "metered"]), default="public")
@click.option("--fee", type=float, default=0.0, help="Fee per job for metered paradigms.")
@click.option("--allow", multiple=True, help="Allowed user for restricted paradigms (repeatable).")
@click.pass_obj
def publish(ctx: CliContext, descriptor_file, mode, fee, allow) -> None:
    """Publish a paradigm descriptor file to the registry."""
    descriptor = json.loads(Path(descriptor_file).read_text(encoding="utf-8"))
    policy = {"mode": mode, "allowed_users": list(allow), "fee_per_job": fee}
    doc = run(ctx, lambda: ctx.client().publish(descriptor, policy))
    emit(
        ctx,
        doc,
        f"published {doc['paradigm_id']} ({doc['mode']}), "
        f"replicated to {len(doc['replicated_to'])} worker(s)",
    )


@main.command()
@click.option("--user", required=True)
@click.option("--password", required=True)
@click.pass_obj
def login(ctx: CliContext, user, password) -> None:
    """Authenticate and print a session id for --token."""
    doc = run(ctx, lambda: ctx.client().login(user, password))
    emit(ctx, doc, f"session {doc['session_id']} for {doc['user']}")


@main.group()
def paradigms() -> None:
    """Browse published paradigms."""


@paradigms.command("query")
@click.argument("query_text")
@click.pass_obj
def paradigms_query(ctx: CliContext, query_text) -> None:
    """Run a SELECT query over the paradigms table."""
    doc = run(ctx, lambda: ctx.client().query_paradigms(query_text))
    lines = ["  ".join(doc["columns"])] + ["  ".join(str(v) for v in row) for row in doc["rows"]]
    emit(ctx, doc, "\n".join(lines) if doc["rows"] else "(no rows)")


@main.group()
def net() -> None:
    """Network objects."""


@net.command("create")
@click.option("--paradigm", "paradigm_id", required=True)
@click.option("--layers", required=True, help="Comma-separated layer sizes, e.g. 2,2,1.")
@click.option("--activation", type=click.Choice(["sigmoid", "tanh"]), default="sigmoid")
@click.option("--seed", type=int, default=0)
@click.pass_obj
def net_create(ctx: CliContext, paradigm_id, layers, activation, seed) -> None:
    """Instantiate a network object from a published paradigm."""
    try:
        layer_sizes = [int(part) for part in layers.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter("--layers must be comma-separated integers")
    doc = run(ctx, lambda: ctx.client().create_network(paradigm_id, layer_sizes, activation, seed))
    emit(ctx, doc, f"created network {doc['network_id']} ({doc['key']})")


@main.command()
@click.option("--network", "network_id", required=True)
@click.option("--data", "datastream", required=True, help="Datastream spec: JSON file or inline JSON.")
@click.option("--lr", "learning_rate", type=float, default=0.5)
@click.option("--momentum", type=float, default=0.9)
@click.option("--max-epochs", type=int, default=20000)
@click.option("--target-error", type=float, default=0.01)
@click.option("--seed", type=int, default=0)
@click.option("--kind", type=click.Choice(["train", "retrain"]), default="train")
@click.option("--from-result", "result_key", default=None, help="Training result key (retrain).")
@click.pass_obj
def train(ctx, network_id, datastream, learning_rate, momentum, max_epochs, target_error, seed, kind, result_key):
    """Submit a training (or retraining) job."""
    params = {
        "learning_rate": learning_rate,
        "momentum": momentum,
        "max_epochs": max_epochs,
        "target_error": target_error,
        "seed": seed,
    }
    spec = load_json_arg(datastream)
    doc = run(ctx, lambda: ctx.client().submit_train(network_id, spec, params, kind, result_key))
    emit(ctx, doc, f"submitted {kind} job {doc['job_id']}")


@main.command()
@click.argument("job_id")
@click.option("--wait", is_flag=True, help="Poll until the job reaches done or failed.")
@click.option("--interval", type=float, default=0.2, help="Poll interval with --wait.")
@click.option("--timeout", type=float, default=300.0)
@click.pass_obj
def status(ctx: CliContext, job_id, wait, interval, timeout) -> None:
    """Show a job's status (phase, live error series, result key)."""

    def fetch() -> dict:
        doc = ctx.client().job_status(job_id)
        if not wait:
            return doc
        deadline = time.monotonic() + timeout
        while doc["phase"] not in ("done", "failed"):
            if time.monotonic() > deadline:
                break
            time.sleep(interval)
            doc = ctx.client().job_status(job_id)
        return doc

    doc = run(ctx, fetch)
    series = doc["error_series_so_far"]
    tail = f", sse={series[-1]:.6g} after {len(series)} epochs" if series else ""
    detail = doc["result_key"] or doc["failure_reason"] or ""
    emit(ctx, doc, f"{doc['job_id']}: {doc['phase']}{tail} {detail}".rstrip())


@main.command()
@click.option("--from-result", "result_key", required=True, help="training_result/<id> key.")
@click.option("--data", "datastream", required=True, help="Datastream spec: JSON file or inline JSON.")
@click.pass_obj
def evaluate(ctx: CliContext, result_key, datastream) -> None:
    """Submit an evaluation job against a stored training result."""
    spec = load_json_arg(datastream)
    doc = run(ctx, lambda: ctx.client().submit_evaluate(result_key, spec))
    emit(ctx, doc, f"submitted evaluation job {doc['job_id']}")


@main.command()
@click.argument("key")
@click.pass_obj
def result(ctx: CliContext, key) -> None:
    """Fetch an archived payload by key (kind/id)."""
    doc = run(ctx, lambda: ctx.client().get_result(key))
    emit(ctx, doc)


@main.command()
@click.pass_obj
def ledger(ctx: CliContext) -> None:
    """Show usage records and the total charge."""
    doc = run(ctx, lambda: ctx.client().ledger())
    lines = [
        f"{r['recorded_at']:.0f}  {r['user_id']:<10} {r['job_kind']:<9} "
        f"{r['paradigm_id']:<20} charge {r['charge']}"
        for r in doc["records"]
    ]
    lines.append(f"total: {doc['total']}")
    emit(ctx, doc, "\n".join(lines))


@main.command()
@click.argument("key")
@click.option("--out", "out_dir", type=click.Path(), default="reports")
@click.pass_obj
def report(ctx: CliContext, key, out_dir) -> None:
    """Render a result to CSV + PNG files (training curve or evaluation table).

    KEY is an archive key (training_result/<id>, evaluation_result/<id>)
    or a job id, which resolves through the job's result key.
    """
    from nnfabric.report import write_evaluation_report, write_training_report

    def fetch() -> dict:
        if "/" in key:
            return ctx.client().get_result(key)
        job = ctx.client().job_status(key)
        if not job.get("result_key"):
            raise GatewayApiError(
                404, {"error": {"code": "not_found", "message": f"job {key} has no result yet"}}
            )
        return ctx.client().get_result(job["result_key"])

    fetched = run(ctx, fetch)
    kind = fetched["key"].split("/", 1)[0]
    stem = fetched["key"].replace("/", "-")
    if kind == "training_result":
        paths = write_training_report(fetched["payload"], out_dir, stem)
    elif kind == "evaluation_result":
        paths = write_evaluation_report(fetched["payload"], out_dir, stem)
    else:
        raise click.ClickException(f"no report renderer for {kind}")
    doc = {"key": fetched["key"], "files": [str(p) for p in paths]}
    emit(ctx, doc, "wrote " + ", ".join(doc["files"]))


if __name__ == "__main__":
    main()
