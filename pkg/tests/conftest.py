from __future__ import annotations

import pytest

from nnfabric.engine import PatternSet, TrainingParams
from nnfabric.paradigm import (
    HyperparamDecl,
    IOSchema,
    ParadigmDescriptor,
    TopologySpec,
)

XOR_INPUTS = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
XOR_TARGETS = [[0.0], [1.0], [1.0], [0.0]]
XOR_SEED = 42

# Reference XOR run: backprop, layers [2,2,1], sigmoid, seed 42, lr 0.5,
# momentum 0.9, target SSE 0.01. Golden values recorded once from the
# first converged run; asserted bit-stable ever since.
GOLDEN_XOR_EPOCHS = 348
GOLDEN_XOR_FINAL_SSE = 0.00997513819551844
GOLDEN_XOR_FINGERPRINT = "4fbda804bacd94df328a755b81598f272a0db74d271981b23534b71d65c6ccf3"


def xor_params(**overrides) -> TrainingParams:
    base = dict(learning_rate=0.5, momentum=0.9, max_epochs=20000, target_error=0.01, seed=0)
    base.update(overrides)
    return TrainingParams(**base)


def xor_pattern_set() -> PatternSet:
    return PatternSet(XOR_INPUTS, XOR_TARGETS)


def make_backprop_descriptor(
    id: str = "backprop-3layer",
    name: str = "backprop",
    version: str = "1.0",
    hyperparams: tuple[HyperparamDecl, ...] | None = None,
    io_schema: IOSchema | None = None,
) -> ParadigmDescriptor:
    if hyperparams is None:
        hyperparams = (
            HyperparamDecl("learning_rate", "real", 0.5, range=(0.0, 1.0)),
            HyperparamDecl("momentum", "real", 0.9, range=(0.0, 0.99)),
            HyperparamDecl("max_epochs", "integer", 20000, range=(1, 100000)),
            HyperparamDecl("activation", "enumeration", "sigmoid", values=("sigmoid", "tanh")),
        )
    return ParadigmDescriptor(
        id=id,
        name=name,
        version=version,
        description="Three layer, fully connected feed-forward network trained by backprop.",
        topology=TopologySpec(min_layers=3, max_layers=3),
        hyperparams=hyperparams,
        io_schema=io_schema or IOSchema(),
        engine_ref="backprop",
    )


def make_delta_descriptor(id: str = "delta-single") -> ParadigmDescriptor:
    return ParadigmDescriptor(
        id=id,
        name="delta",
        version="1.0",
        description="Single-layer network trained by the delta rule.",
        topology=TopologySpec(min_layers=2, max_layers=2),
        hyperparams=(HyperparamDecl("learning_rate", "real", 0.2, range=(0.0, 1.0)),),
        io_schema=IOSchema(),
        engine_ref="delta-rule",
    )


@pytest.fixture
def backprop_descriptor() -> ParadigmDescriptor:
    return make_backprop_descriptor()
