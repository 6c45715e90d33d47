"""Weight-dependent (multiplicative) STDP in trace form.

With ``dt = t_post - t_pre``::

    dt >= 0:  dw = +a_plus  * (1 - w)**mu_plus  * exp(-dt / tau_plus)
    dt <  0:  dw = -a_minus * w**mu_minus       * exp(+dt / tau_minus)

The exponential kernels live in decaying spike traces: ``x_pre`` decays with
``tau_plus`` and is read when the post-synaptic neuron fires, ``x_post`` decays
with ``tau_minus`` and is read when the pre-synaptic neuron fires.

``literal=True`` switches to the rule as typeset in the source material
(double exponential, negative potentiation exponent, positive depression).
It exists for auditing only; it is unbounded and is not used by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "StdpParams",
    "SpikeTraces",
    "decay_traces",
    "on_post_spike",
    "on_pre_spike",
    "clip_weight",
    "potentiation_bound",
    "depression_bound",
]


@dataclass(frozen=True)
class StdpParams:
    a_plus: float = 1e-2
    a_minus: float = 1e-4
    mu_plus: float = 1.0
    mu_minus: float = 1.0
    tau_plus: float = 20.0  # ms
    tau_minus: float = 20.0  # ms
    literal: bool = False

    def __post_init__(self):
        if self.a_plus < 0 or self.a_minus < 0:
            raise DomainError("learning rates must be non-negative")
        if self.mu_plus < 0 or self.mu_minus < 0:
            raise DomainError("weight-dependence exponents must be non-negative")
        if not (self.tau_plus > 0 and self.tau_minus > 0):
            raise DomainError("trace time constants must be positive")


@dataclass
class SpikeTraces:
    x_pre: np.ndarray
    x_post: np.ndarray

    @classmethod
    def zeros(cls, n_pre: int, n_post: int) -> "SpikeTraces":
        return cls(np.zeros(n_pre), np.zeros(n_post))

    def spike(self, pre=None, post=None) -> "SpikeTraces":
        """Traces jump to 1 for the given boolean spike vectors."""
        x_pre, x_post = self.x_pre.copy(), self.x_post.copy()
        if pre is not None:
            x_pre[np.asarray(pre, dtype=bool)] = 1.0
        if post is not None:
            x_post[np.asarray(post, dtype=bool)] = 1.0
        return SpikeTraces(x_pre, x_post)


def decay_traces(traces: SpikeTraces, dt: float, params: StdpParams) -> SpikeTraces:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return SpikeTraces(
        traces.x_pre * math.exp(-dt / params.tau_plus),
        traces.x_post * math.exp(-dt / params.tau_minus),
    )


def potentiation_bound(w, params: StdpParams):
    """Weight-dependent factor of the potentiating branch, including ``a_plus``."""
    w = np.asarray(w, dtype=float)
    if params.literal:
        with np.errstate(divide="ignore"):
            return params.a_plus * (1.0 - w) ** (-params.mu_plus)
    return params.a_plus * (1.0 - w) ** params.mu_plus


def depression_bound(w, params: StdpParams):
    """Weight-dependent factor of the depressing branch, including ``a_minus``."""
    return params.a_minus * np.asarray(w, dtype=float) ** params.mu_minus


def on_post_spike(w, x_pre, params: StdpParams):
    """Weight change when the post-synaptic neuron fires (non-negative)."""
    x_pre = np.asarray(x_pre, dtype=float)
    if params.literal:
        timing = np.where(x_pre > 0, np.exp(x_pre), 0.0)
    else:
        timing = x_pre
    return _scalar(potentiation_bound(w, params) * timing)


def on_pre_spike(w, x_post, params: StdpParams):
    """Weight change when the pre-synaptic neuron fires (non-positive)."""
    x_post = np.asarray(x_post, dtype=float)
    if params.literal:
        # printed branch: exp(exp(-dt/tau)) with dt < 0, i.e. exp(1/x_post), positive sign
        with np.errstate(divide="ignore", over="ignore"):
            timing = np.where(x_post > 0, np.exp(1.0 / np.where(x_post > 0, x_post, 1.0)), 0.0)
        return _scalar(depression_bound(w, params) * timing)
    return _scalar(-depression_bound(w, params) * x_post)


def clip_weight(w):
    return _scalar(np.clip(np.asarray(w, dtype=float), 0.0, 1.0))


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x
