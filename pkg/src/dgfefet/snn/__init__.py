"""Spiking network layer: LIF neurons, Poisson inputs, STDP training and read-out."""

from .backend import DEFAULT_BACKEND, available
from .network import (
    LifParams,
    LifState,
    NetworkTopology,
    TrainResult,
    accuracy,
    assign_labels,
    encode_batch,
    evaluate,
    init_topology,
    lif_step,
    poisson_encode,
    predict,
    respond,
    simulate,
    spike_entropy,
    train,
)

__all__ = [
    "DEFAULT_BACKEND",
    "available",
    "LifParams",
    "LifState",
    "NetworkTopology",
    "TrainResult",
    "accuracy",
    "assign_labels",
    "encode_batch",
    "evaluate",
    "init_topology",
    "lif_step",
    "poisson_encode",
    "predict",
    "respond",
    "simulate",
    "spike_entropy",
    "train",
]
