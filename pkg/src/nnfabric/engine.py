"""Neural-network execution engines: instantiate, train, retrain, evaluate.

Networks are plain data: per-layer weight matrices with a trailing bias
column, serializable to JSON with bit-exact weight recovery. Training is
batch gradient descent on the sum-of-squared-errors loss with a momentum
term; gradients are accumulated pattern by pattern so the update exactly
equals the sum of per-pattern gradients.
"""
from __future__ import annotations

import hashlib
import json
import time
import uuid
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from nnfabric.paradigm import VARIABLE_DIM, ParadigmDescriptor


class EngineError(ValueError):
    """Base class for engine failures."""


class UnknownEngineError(EngineError):
    pass


class TopologyError(EngineError):
    pass


class DimensionError(EngineError):
    pass


class NetworkStateError(EngineError):
    pass


@dataclass(frozen=True)
class EngineInfo:
    """An executable paradigm implementation and its topology limits."""

    id: str
    description: str
    min_layers: int
    max_layers: int | None  # None = unbounded depth


ENGINES: dict[str, EngineInfo] = {
    "backprop": EngineInfo(
        "backprop", "multilayer gradient descent with momentum", min_layers=2, max_layers=None
    ),
    "delta-rule": EngineInfo(
        "delta-rule", "single-layer delta learning", min_layers=2, max_layers=2
    ),
}


def list_engines() -> list[str]:
    return sorted(ENGINES)


def get_engine(engine_ref: str) -> EngineInfo:
    try:
        return ENGINES[engine_ref]
    except KeyError:
        raise UnknownEngineError(f"unknown engine {engine_ref!r}") from None


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _sigmoid_deriv(a: np.ndarray) -> np.ndarray:
    return a * (1.0 - a)


def _tanh_deriv(a: np.ndarray) -> np.ndarray:
    return 1.0 - a * a


# activation -> (f(z), f'(a) in terms of the activation output a)
ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "sigmoid": (_sigmoid, _sigmoid_deriv),
    "tanh": (np.tanh, _tanh_deriv),
}


@dataclass
class NetworkObject:
    """An instantiated network: topology, weights, lifecycle state.

    weights[l] has shape (layer_sizes[l+1], layer_sizes[l] + 1); the last
    column holds the bias applied to a constant 1 input.
    """

    id: str
    paradigm_id: str
    layer_sizes: list[int]
    weights: list[np.ndarray]
    activation: str
    state: str = "untrained"
    seed: int = 0

    def check_shapes(self) -> None:
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise DimensionError("weight count inconsistent with layer_sizes")
        for l, w in enumerate(self.weights):
            expected = (self.layer_sizes[l + 1], self.layer_sizes[l] + 1)
            if w.shape != expected:
                raise DimensionError(
                    f"weights[{l}] has shape {w.shape}, expected {expected}"
                )


@dataclass(frozen=True)
class TrainingParams:
    learning_rate: float
    momentum: float
    max_epochs: int
    target_error: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise EngineError("learning_rate must be > 0")
        if not (0.0 <= self.momentum < 1.0):
            raise EngineError("momentum must be in [0, 1)")
        if self.max_epochs < 0:
            raise EngineError("max_epochs must be >= 0")
        if self.target_error < 0:
            raise EngineError("target_error must be >= 0")


class PatternSet:
    """Training or evaluation patterns: inputs and optional targets."""

    def __init__(self, inputs, targets=None, provenance: Any = None):
        self.inputs = _as_pattern_matrix(inputs, "inputs")
        self.targets = None if targets is None else _as_pattern_matrix(targets, "targets")
        self.provenance = provenance
        if self.targets is not None and len(self.targets) != len(self.inputs):
            raise DimensionError(
                f"{len(self.inputs)} inputs but {len(self.targets)} targets"
            )

    def __len__(self) -> int:
        return len(self.inputs)

    def __eq__(self, other: object) -> bool:
        # Provenance is excluded: equality means "same patterns".
        if not isinstance(other, PatternSet):
            return NotImplemented
        if not np.array_equal(self.inputs, other.inputs):
            return False
        if (self.targets is None) != (other.targets is None):
            return False
        return self.targets is None or np.array_equal(self.targets, other.targets)

    def __repr__(self) -> str:
        t = "with targets" if self.targets is not None else "no targets"
        return f"PatternSet({len(self.inputs)} patterns, {t})"


def _as_pattern_matrix(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 0)
    if arr.ndim != 2:
        raise DimensionError(f"{what} must be a list of equally sized vectors")
    return arr


@dataclass
class TrainingResult:
    network_id: str
    final_weights: list[np.ndarray]
    error_series: list[float]
    epochs_run: int
    converged: bool
    wall_time: float


@dataclass
class EvaluationResult:
    network_id: str
    outputs: list[list[float]]
    per_pattern_error: list[float] | None
    created_from: str | None = None  # training-result id this evaluation used


def instantiate_network(
    d: ParadigmDescriptor,
    layer_sizes: list[int],
    activation: str,
    seed: int,
    network_id: str | None = None,
) -> NetworkObject:
    """Create an untrained network within the descriptor's topology bounds.

    Weights are drawn uniformly from [-0.5, 0.5]; the same seed always
    yields identical matrices.
    """
    engine = get_engine(d.engine_ref)
    n_layers = len(layer_sizes)
    topo = d.topology
    if not (topo.min_layers <= n_layers <= topo.max_layers):
        raise TopologyError(
            f"{n_layers} layers outside descriptor bounds "
            f"[{topo.min_layers}, {topo.max_layers}]"
        )
    if n_layers < engine.min_layers or (
        engine.max_layers is not None and n_layers > engine.max_layers
    ):
        limit = engine.max_layers if engine.max_layers is not None else "unbounded"
        raise TopologyError(
            f"engine {engine.id!r} supports {engine.min_layers}..{limit} layers"
        )
    for i, size in enumerate(layer_sizes):
        if not isinstance(size, int) or size < 1:
            raise TopologyError(f"layer_sizes[{i}] must be a positive integer")
        if topo.layer_size_bounds is not None:
            low, high = topo.layer_size_bounds[i]
            if not (low <= size <= high):
                raise TopologyError(
                    f"layer_sizes[{i}]={size} outside descriptor bounds [{low}, {high}]"
                )
    for dim, size, which in (
        (d.io_schema.input_dim, layer_sizes[0], "input"),
        (d.io_schema.output_dim, layer_sizes[-1], "output"),
    ):
        if dim != VARIABLE_DIM and size != dim:
            raise TopologyError(f"{which} layer size {size} != descriptor {which}_dim {dim}")
    if activation not in ACTIVATIONS:
        raise EngineError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    weights = [
        rng.uniform(-0.5, 0.5, size=(layer_sizes[l + 1], layer_sizes[l] + 1))
        for l in range(n_layers - 1)
    ]
    return NetworkObject(
        id=network_id or uuid.uuid4().hex,
        paradigm_id=d.id,
        layer_sizes=list(layer_sizes),
        weights=weights,
        activation=activation,
        state="untrained",
        seed=seed,
    )


def _forward_layers(n: NetworkObject, x: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer, input included."""
    act, _ = ACTIVATIONS[n.activation]
    activations = [x]
    for w in n.weights:
        augmented = np.append(activations[-1], 1.0)
        activations.append(act(w @ augmented))
    return activations


def forward_pass(n: NetworkObject, input_vector) -> np.ndarray:
    """Output of the network for a single input vector; pure."""
    x = np.asarray(input_vector, dtype=float)
    if x.shape != (n.layer_sizes[0],):
        raise DimensionError(
            f"input dimension {x.shape} != ({n.layer_sizes[0]},)"
        )
    return _forward_layers(n, x)[-1]


def _accumulate_gradients(
    n: NetworkObject, x: np.ndarray, t: np.ndarray, grads: list[np.ndarray]
) -> None:
    """Add this pattern's SSE gradient (loss 0.5*sum((out-t)^2)) into grads."""
    _, deriv = ACTIVATIONS[n.activation]
    activations = _forward_layers(n, x)
    delta = (activations[-1] - t) * deriv(activations[-1])
    for l in range(len(n.weights) - 1, -1, -1):
        grads[l] += np.outer(delta, np.append(activations[l], 1.0))
        if l > 0:
            delta = (n.weights[l][:, :-1].T @ delta) * deriv(activations[l])


def compute_gradients(n: NetworkObject, input_vector, target_vector) -> list[np.ndarray]:
    """Gradient of 0.5*sum((output-target)^2) w.r.t. every weight matrix."""
    x = np.asarray(input_vector, dtype=float)
    t = np.asarray(target_vector, dtype=float)
    if x.shape != (n.layer_sizes[0],):
        raise DimensionError(f"input dimension {x.shape} != ({n.layer_sizes[0]},)")
    if t.shape != (n.layer_sizes[-1],):
        raise DimensionError(f"target dimension {t.shape} != ({n.layer_sizes[-1]},)")
    grads = [np.zeros_like(w) for w in n.weights]
    _accumulate_gradients(n, x, t, grads)
    return grads


def _batch_outputs(n: NetworkObject, inputs: np.ndarray) -> np.ndarray:
    act, _ = ACTIVATIONS[n.activation]
    a = inputs
    for w in n.weights:
        augmented = np.hstack([a, np.ones((a.shape[0], 1))])
        a = act(augmented @ w.T)
    return a


def sum_squared_error(n: NetworkObject, data: PatternSet) -> float:
    """Total SSE over the pattern set: sum of 0.5*sum((out-t)^2) per pattern."""
    if data.targets is None:
        raise EngineError("pattern set has no targets")
    outputs = _batch_outputs(n, data.inputs)
    return float(0.5 * np.sum((outputs - data.targets) ** 2))


def _check_training_data(n: NetworkObject, data: PatternSet) -> None:
    if len(data) == 0:
        raise EngineError("empty pattern set")
    if data.targets is None:
        raise EngineError("training requires targets")
    if data.inputs.shape[1] != n.layer_sizes[0]:
        raise DimensionError(
            f"pattern input dimension {data.inputs.shape[1]} != network input {n.layer_sizes[0]}"
        )
    if data.targets.shape[1] != n.layer_sizes[-1]:
        raise DimensionError(
            f"pattern target dimension {data.targets.shape[1]} != network output {n.layer_sizes[-1]}"
        )


def train(
    n: NetworkObject,
    data: PatternSet,
    p: TrainingParams,
    progress_sink: Callable[[float], None] | None = None,
) -> TrainingResult:
    """Batch gradient descent with momentum, mutating the network in place.

    Each epoch sums per-pattern gradients over the full set, applies
    dw(t) = -lr * grad + momentum * dw(t-1), then records the new SSE in
    the error series (and emits it to progress_sink). Stops once SSE is
    at or below target_error or the epoch budget is spent.
    """
    n.check_shapes()
    _check_training_data(n, data)
    start = time.perf_counter()
    velocity = [np.zeros_like(w) for w in n.weights]
    grads = [np.zeros_like(w) for w in n.weights]
    error_series: list[float] = []
    current = sum_squared_error(n, data)
    while len(error_series) < p.max_epochs and current > p.target_error:
        for g in grads:
            g.fill(0.0)
        for x, t in zip(data.inputs, data.targets):
            _accumulate_gradients(n, x, t, grads)
        for l, w in enumerate(n.weights):
            velocity[l] = -p.learning_rate * grads[l] + p.momentum * velocity[l]
            w += velocity[l]
        current = sum_squared_error(n, data)
        error_series.append(current)
        if progress_sink is not None:
            progress_sink(current)
    n.state = "trained"
    return TrainingResult(
        network_id=n.id,
        final_weights=[w.copy() for w in n.weights],
        error_series=error_series,
        epochs_run=len(error_series),
        converged=current <= p.target_error,
        wall_time=time.perf_counter() - start,
    )


def retrain(
    n: NetworkObject,
    data: PatternSet,
    p: TrainingParams,
    progress_sink: Callable[[float], None] | None = None,
) -> TrainingResult:
    """Continue training a previously trained network from its stored weights.

    The momentum history starts fresh; only the weights carry over.
    """
    if n.state != "trained":
        raise NetworkStateError("cannot retrain an untrained network")
    return train(n, data, p, progress_sink)


def evaluate(
    n: NetworkObject, data: PatternSet, created_from: str | None = None
) -> EvaluationResult:
    """Forward-pass every pattern through a trained network; pure.

    Per-pattern errors are included iff the pattern set carries targets.
    """
    if n.state != "trained":
        raise NetworkStateError("cannot evaluate an untrained network")
    n.check_shapes()
    if len(data) and data.inputs.shape[1] != n.layer_sizes[0]:
        raise DimensionError(
            f"pattern input dimension {data.inputs.shape[1]} != network input {n.layer_sizes[0]}"
        )
    if len(data) == 0:
        outputs = np.zeros((0, n.layer_sizes[-1]))
    else:
        outputs = _batch_outputs(n, data.inputs)
    per_pattern = None
    if data.targets is not None and len(data):
        if data.targets.shape[1] != n.layer_sizes[-1]:
            raise DimensionError(
                f"pattern target dimension {data.targets.shape[1]} != network output {n.layer_sizes[-1]}"
            )
        per_pattern = (0.5 * np.sum((outputs - data.targets) ** 2, axis=1)).tolist()
    elif data.targets is not None:
        per_pattern = []
    return EvaluationResult(
        network_id=n.id,
        outputs=[row.tolist() for row in outputs],
        per_pattern_error=per_pattern,
        created_from=created_from,
    )


def weights_fingerprint(weights: list[np.ndarray]) -> str:
    """SHA-256 over the raw float64 bytes of every weight matrix."""
    digest = hashlib.sha256()
    for w in weights:
        digest.update(np.ascontiguousarray(w, dtype=float).tobytes())
    return digest.hexdigest()


# --- JSON documents (archive payloads and job wire format) ---------------


def network_to_document(n: NetworkObject) -> dict:
    return {
        "id": n.id,
        "paradigm_id": n.paradigm_id,
        "layer_sizes": list(n.layer_sizes),
        "weights": [w.tolist() for w in n.weights],
        "activation": n.activation,
        "state": n.state,
        "seed": n.seed,
    }


def network_from_document(doc: dict) -> NetworkObject:
    n = NetworkObject(
        id=doc["id"],
        paradigm_id=doc["paradigm_id"],
        layer_sizes=list(doc["layer_sizes"]),
        weights=[np.array(w, dtype=float) for w in doc["weights"]],
        activation=doc["activation"],
        state=doc["state"],
        seed=doc["seed"],
    )
    n.check_shapes()
    return n


def network_to_json(n: NetworkObject) -> str:
    return json.dumps(network_to_document(n), indent=2, sort_keys=True) + "\n"


def network_from_json(text: str) -> NetworkObject:
    return network_from_document(json.loads(text))


def training_result_to_document(r: TrainingResult) -> dict:
    return {
        "network_id": r.network_id,
        "final_weights": [w.tolist() for w in r.final_weights],
        "error_series": list(r.error_series),
        "epochs_run": r.epochs_run,
        "converged": r.converged,
        "wall_time": r.wall_time,
    }


def training_result_from_document(doc: dict) -> TrainingResult:
    return TrainingResult(
        network_id=doc["network_id"],
        final_weights=[np.array(w, dtype=float) for w in doc["final_weights"]],
        error_series=list(doc["error_series"]),
        epochs_run=doc["epochs_run"],
        converged=doc["converged"],
        wall_time=doc["wall_time"],
    )


def training_result_to_json(r: TrainingResult) -> str:
    return json.dumps(training_result_to_document(r), indent=2, sort_keys=True) + "\n"


def training_result_from_json(text: str) -> TrainingResult:
    return training_result_from_document(json.loads(text))


def evaluation_result_to_document(r: EvaluationResult) -> dict:
    return {
        "network_id": r.network_id,
        "outputs": [list(row) for row in r.outputs],
        "per_pattern_error": None if r.per_pattern_error is None else list(r.per_pattern_error),
        "created_from": r.created_from,
    }


def evaluation_result_from_document(doc: dict) -> EvaluationResult:
    return EvaluationResult(
        network_id=doc["network_id"],
        outputs=[list(row) for row in doc["outputs"]],
        per_pattern_error=doc["per_pattern_error"],
        created_from=doc.get("created_from"),
    )


def evaluation_result_to_json(r: EvaluationResult) -> str:
    return json.dumps(evaluation_result_to_document(r), indent=2, sort_keys=True) + "\n"


def evaluation_result_from_json(text: str) -> EvaluationResult:
    return evaluation_result_from_document(json.loads(text))


def pattern_set_to_document(data: PatternSet) -> dict:
    return {
        "inputs": data.inputs.tolist(),
        "targets": None if data.targets is None else data.targets.tolist(),
    }


def pattern_set_from_document(doc: dict) -> PatternSet:
    return PatternSet(doc["inputs"], doc.get("targets"))


def pattern_set_to_json(data: PatternSet) -> str:
    return json.dumps(pattern_set_to_document(data), indent=2, sort_keys=True) + "\n"
