"""Astrocyte-style regulation through the column back gates.

* stuck-at-zero fault injection;
* self-repair: each column's gain is the ratio of its weight sum before the
  faults to its current read-out sum, ``k_j = prior_j / post_j``, realised as a
  back-gate voltage and refreshed as retraining changes the weights;
* homeostasis: a firing neuron's column back gate is ramped down and relaxes
  back to baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .crossbar import CrossbarArray, GainMap, matvec
from .errors import DomainError, StateError

__all__ = [
    "HomeostasisParams",
    "RepairState",
    "inject_faults",
    "compute_repair_gain",
    "probe_post_fault_sums",
    "apply_repair",
    "retrain_with_repair",
    "homeostasis_step",
]


@dataclass(frozen=True)
class HomeostasisParams:
    vbg_dec: float = 0.08  # V per firing
    tau_homeo: float = 1000.0  # ms
    vbg_base: float = 0.0

    def __post_init__(self):
        if self.vbg_dec < 0 or not self.tau_homeo > 0:
            raise DomainError("need vbg_dec >= 0 and tau_homeo > 0")

    @classmethod
    def for_gain(cls, gain: GainMap, k_drop: float = 0.02, **kw) -> "HomeostasisParams":
        """Ramp size such that one firing lowers k by ``k_drop``."""
        return cls(vbg_dec=k_drop / gain.lambda_k, **kw)

    def relax_factor(self, dt: float) -> float:
        return math.exp(-dt / self.tau_homeo)


def homeostasis_step(k, fired, params: HomeostasisParams, gain: GainMap, dt: float = 1.0) -> np.ndarray:
    """One time step of back-gate homeostasis on per-column gains ``k``.

    ``fired`` is a boolean or count vector; each firing ramps the column's
    back gate down by ``vbg_dec`` after the relaxation towards baseline.
    """
    k = np.asarray(k, dtype=float)
    gain.check(k)
    vbg = (k - 1.0) / gain.lambda_k
    vbg = params.vbg_base + (vbg - params.vbg_base) * params.relax_factor(dt)
    vbg = vbg - params.vbg_dec * np.asarray(fired, dtype=float)
    return np.clip(gain.k(vbg), *gain.k_range)


def inject_faults(shape: tuple[int, int], fraction: float, seed) -> np.ndarray:
    """Stuck-at-zero mask with exactly ``round(fraction * n)`` faulted cells."""
    if not 0.0 <= fraction <= 1.0:
        raise DomainError("fault fraction must lie in [0, 1]")
    n = int(shape[0]) * int(shape[1])
    m = int(round(fraction * n))
    rng = np.random.default_rng(seed)
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=m, replace=False)] = True
    return mask.reshape(shape)


def dead_column_eps(prior_sums) -> float:
    return 1e-6 * float(np.mean(prior_sums))


def compute_repair_gain(prior_sums, post_sums, k_max: float, eps: float | None = None):
    """Per-column gain ``prior / post``; near-dead columns get ``k_max``.

    Returns ``(k, flagged)`` where ``flagged`` marks the clamped dead columns.
    """
    prior = np.asarray(prior_sums, dtype=float)
    post = np.asarray(post_sums, dtype=float)
    if np.any(prior < 0) or np.any(post < 0):
        raise DomainError("weight sums must be non-negative")
    if eps is None:
        eps = dead_column_eps(prior)
    dead = post <= eps
    k = np.divide(prior, post, out=np.full_like(prior, float(k_max)), where=~dead)
    return k, dead


def probe_post_fault_sums(array: CrossbarArray) -> np.ndarray:
    """Per-column sum of readable weights, measured with an all-ones row probe.

    The probe is read at V_BG = 0; the conductance offset of the healthy cells
    is removed and the result converted from siemens back to weight units.
    """
    probe = CrossbarArray(array.w, np.zeros(array.n_cols), array.faults, array.device, array.g_min, array.g_max)
    current = matvec(probe, np.ones(array.n_rows))
    n_healthy = array.healthy.sum(axis=0)
    return (current - n_healthy * array.g_min) / (array.g_max - array.g_min)


@dataclass
class RepairState:
    w_prior_col_sums: np.ndarray
    k_per_col: np.ndarray = None
    vbg_per_col: np.ndarray = None
    flagged: np.ndarray = None
    clamped: np.ndarray = None
    history: list[np.ndarray] = field(default_factory=list)

    @property
    def k_history(self) -> np.ndarray:
        return np.array(self.history)


def apply_repair(topology, state: RepairState) -> RepairState:
    """Measure the read-out sums, set every column's back gate to realise the repair gain.

    ``state.k_per_col`` records the requested ratio; the achieved gain after
    clamping to the back-gate range is ``topology.col_gain()``.
    """
    if state.w_prior_col_sums is None:
        raise StateError("prior column sums were not captured before fault injection")
    gain = topology.gain
    post = probe_post_fault_sums(topology.array)
    k, flagged = compute_repair_gain(state.w_prior_col_sums, np.maximum(post, 0.0), gain.k_range[1])
    vbg = gain.vbg(k)
    topology.array.set_col_vbg(vbg)
    achieved = gain.k(vbg)
    state.k_per_col = k
    state.vbg_per_col = vbg
    state.flagged = flagged
    state.clamped = ~np.isclose(achieved, k, rtol=0, atol=1e-12)
    state.history.append(achieved)
    return state


def retrain_with_repair(
    topology,
    images,
    stdp,
    lif,
    prior_sums,
    seed: int = 0,
    *,
    repair: bool = True,
    epochs: int = 1,
    batch_size: int = 16,
    mode: str = "adaptive_theta",
    preserve_sums: bool = True,
    backend: str | None = None,
):
    """Retrain a faulted network, refreshing the column repair gains before every batch.

    The forward pass sees ``k_j * w_ij``; STDP updates are computed from the
    stored weights alone (back gate at zero while programming). With
    ``repair=False`` every back gate stays at 0 V. With ``preserve_sums`` each
    column's readable weight sum is renormalised after every batch to its value
    at the start of retraining, so STDP redistributes weight without regrowing
    the lost drive. Returns ``(TrainResult, RepairState)``.
    """
    from .snn.network import train

    if prior_sums is None:
        raise StateError("prior column sums were not captured before fault injection")
    state = RepairState(np.asarray(prior_sums, dtype=float))

    def before_batch(topo):
        if repair:
            apply_repair(topo, state)
        else:
            topo.array.set_col_vbg(np.zeros(topo.n_out))
            state.history.append(topo.col_gain())

    norm = None
    if preserve_sums:
        norm = np.where(topology.array.healthy, topology.array.w, 0.0).sum(axis=0)
    result = train(
        topology,
        images,
        stdp,
        lif,
        mode,
        seed,
        epochs=epochs,
        batch_size=batch_size,
        weight_norm=norm,
        before_batch=before_batch,
        backend=backend,
    )
    before_batch(topology)  # gains for the final weights
    return result, state
