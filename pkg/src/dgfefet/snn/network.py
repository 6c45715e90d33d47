"""Unsupervised spiking network: 784 Poisson inputs -> N LIF outputs through a crossbar.

Output neurons inhibit each other with a fixed negative weight (outside the
crossbar). Training uses weight-dependent STDP on the stored weights; the
forward pass reads the algorithm-level effective weights ``k_j * w_ij``.
Competition is kept fair either by adaptive thresholds or by back-gate
homeostasis on the column gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable

import numpy as np

from ..crossbar import CrossbarArray, GainMap
from ..device import Device
from ..errors import DimensionError, DomainError
from ..plasticity import StdpParams, depression_bound, potentiation_bound
from .backend import get_kernel

if TYPE_CHECKING:
    from ..astro import HomeostasisParams

__all__ = [
    "LifParams",
    "LifState",
    "NetworkTopology",
    "TrainResult",
    "init_topology",
    "poisson_encode",
    "encode_batch",
    "lif_step",
    "simulate",
    "train",
    "assign_labels",
    "predict",
    "evaluate",
    "accuracy",
    "spike_entropy",
]

MODES = ("adaptive_theta", "bg_homeostasis")


@dataclass(frozen=True)
class LifParams:
    """Neuron, input-encoding and timing constants (mV, ms, Hz)."""

    v_rest: float = -65.0
    v_reset: float = -60.0
    v_thresh: float = -52.0
    tau_mem: float = 100.0
    t_refrac: float = 5.0
    theta_inc: float = 0.05
    theta_tau: float = 1e7
    dt: float = 1.0
    sim_time: float = 100.0
    max_rate: float = 128.0

    def __post_init__(self):
        if not (self.v_thresh > self.v_reset and self.v_thresh > self.v_rest):
            raise DomainError("threshold must exceed both rest and reset potentials")
        for name in ("tau_mem", "theta_tau", "dt", "sim_time"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.t_refrac < 0 or self.theta_inc < 0 or self.max_rate < 0:
            raise DomainError("t_refrac, theta_inc and max_rate must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.sim_time / self.dt))

    @property
    def refrac_steps(self) -> int:
        return int(round(self.t_refrac / self.dt))

    @property
    def mem_decay(self) -> float:
        return math.exp(-self.dt / self.tau_mem)

    @property
    def theta_decay(self) -> float:
        return math.exp(-self.dt / self.theta_tau)


@dataclass
class LifState:
    v: np.ndarray
    theta: np.ndarray
    refrac_left: np.ndarray

    @classmethod
    def rest(cls, n: int, params: LifParams) -> "LifState":
        return cls(np.full(n, params.v_rest), np.zeros(n), np.zeros(n, dtype=int))


def lif_step(state: LifState, input_current, params: LifParams) -> tuple[LifState, np.ndarray]:
    """Advance one step. Same update as the batch kernels, without inhibition."""
    drive = np.asarray(input_current, dtype=float)
    theta = state.theta * params.theta_decay
    active = state.refrac_left == 0
    refrac = np.where(active, 0, state.refrac_left - 1)
    v_new = params.v_rest + (state.v - params.v_rest) * params.mem_decay + drive
    spikes = active & (v_new >= params.v_thresh + theta)
    v = np.where(active, np.where(spikes, params.v_reset, v_new), state.v)
    refrac = np.where(spikes, params.refrac_steps, refrac)
    theta = theta + params.theta_inc * spikes
    return LifState(v, theta, refrac), spikes


@dataclass
class NetworkTopology:
    """Input-to-output crossbar plus output-neuron state that outlives one image."""

    array: CrossbarArray
    gain: GainMap = field(default_factory=GainMap)
    w_inhib: float = -120.0
    theta: np.ndarray = None

    def __post_init__(self):
        if not self.w_inhib < 0:
            raise DomainError("lateral inhibitory weight must be negative")
        if self.theta is None:
            self.theta = np.zeros(self.n_out)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.n_out,):
            raise DimensionError("theta must have one entry per output neuron")

    @property
    def n_in(self) -> int:
        return self.array.n_rows

    @property
    def n_out(self) -> int:
        return self.array.n_cols

    @property
    def weights(self) -> np.ndarray:
        return self.array.w

    def col_gain(self) -> np.ndarray:
        return self.gain.k(self.array.col_vbg)

    def copy(self) -> "NetworkTopology":
        return NetworkTopology(self.array.copy(), self.gain, self.w_inhib, self.theta.copy())


def init_topology(
    n_out: int,
    n_in: int = 784,
    seed: int = 0,
    w_init_max: float = 0.3,
    w_inhib: float = -120.0,
    device: Device | None = None,
    gain: GainMap | None = None,
) -> NetworkTopology:
    """Uniform random initial weights in [0, w_init_max)."""
    rng = np.random.default_rng([seed, 0x5EED])
    w = rng.random((n_in, n_out)) * w_init_max
    device = device or Device()
    gain = gain or GainMap.for_device(0.25, device.vbg_range)
    return NetworkTopology(CrossbarArray(w, device=device), gain, w_inhib)


def _spike_prob(images: np.ndarray, params: LifParams) -> np.ndarray:
    images = np.asarray(images, dtype=float)
    if np.any(images < 0) or np.any(images > 255):
        raise DomainError("pixel intensities must lie in [0, 255]")
    return images / 255.0 * params.max_rate * params.dt * 1e-3


def poisson_encode(image, params: LifParams, seed) -> np.ndarray:
    """Boolean raster (n_in x steps): pixel p fires with probability rate_p * dt per step."""
    p = _spike_prob(np.asarray(image).reshape(-1), params)
    rng = np.random.default_rng(seed)
    return rng.random((params.n_steps, p.size)).T < p[:, None]


def encode_batch(images, params: LifParams, rng: np.random.Generator) -> np.ndarray:
    """uint8 raster of shape (batch, steps, n_in) for the kernels."""
    images = np.asarray(images)
    p = _spike_prob(images.reshape(images.shape[0], -1), params)
    draws = rng.random((p.shape[0], params.n_steps, p.shape[1]))
    return (draws < p[:, None, :]).astype(np.uint8)


@dataclass
class BatchOutput:
    counts: np.ndarray  # (batch, n_out)
    spikes: np.ndarray  # (batch, steps, n_out) uint8
    dw: np.ndarray | None


def simulate(
    topology: NetworkTopology,
    raster: np.ndarray,
    lif: LifParams,
    stdp: StdpParams | None = None,
    *,
    adapt: bool = False,
    homeostasis: "HomeostasisParams | None" = None,
    w_inhib: float | None = None,
    backend: str | None = None,
) -> BatchOutput:
    """Run one lockstep batch.

    ``stdp`` enables learning: the accumulated weight change is returned, not
    applied. ``adapt`` updates ``topology.theta`` in place and ``homeostasis``
    updates ``topology.array.col_vbg`` in place.
    """
    raster = np.ascontiguousarray(raster, dtype=np.uint8)
    if raster.ndim != 3 or raster.shape[2] != topology.n_in:
        raise DimensionError(f"raster must be (batch, steps, {topology.n_in})")
    B, T, _ = raster.shape
    arr = topology.array
    w = arr.w
    healthy = arr.healthy
    w_read = np.ascontiguousarray(np.where(healthy, w, 0.0))
    learn = stdp is not None
    if learn:
        wpot = np.ascontiguousarray(np.where(healthy, potentiation_bound(w, stdp), 0.0))
        wdep = np.where(healthy, depression_bound(w, stdp), 0.0)
        # the printed rule depresses with a positive sign
        wdep = np.ascontiguousarray(-wdep if stdp.literal else wdep)
        dw = np.zeros_like(w)
        pre_decay = math.exp(-lif.dt / stdp.tau_plus)
        post_decay = math.exp(-lif.dt / stdp.tau_minus)
        literal = stdp.literal
    else:
        wpot = wdep = dw = np.zeros((1, 1))
        pre_decay = post_decay = 0.0
        literal = False
    if learn and w_read.shape != dw.shape:
        raise DimensionError("weight shape mismatch")

    gain = topology.gain
    vbg = np.ascontiguousarray(arr.col_vbg, dtype=float)
    gain.check(gain.k(vbg))
    theta = np.ascontiguousarray(topology.theta, dtype=float)
    if homeostasis is not None:
        lo, hi = _homeo_vbg_bounds(topology)
        homeo_args = (homeostasis.vbg_dec, homeostasis.relax_factor(lif.dt), homeostasis.vbg_base, lo, hi)
    else:
        homeo_args = (0.0, 1.0, 0.0, -np.inf, np.inf)

    counts = np.zeros((B, topology.n_out), dtype=np.longlong)
    spikes = np.zeros((B, T, topology.n_out), dtype=np.uint8)
    kernel = get_kernel(backend)
    kernel(
        raster,
        w_read,
        wpot,
        wdep,
        vbg,
        theta,
        dw,
        counts,
        spikes,
        lif.v_rest,
        lif.v_reset,
        lif.v_thresh,
        lif.mem_decay,
        lif.refrac_steps,
        lif.theta_inc,
        lif.theta_decay,
        topology.w_inhib if w_inhib is None else w_inhib,
        pre_decay,
        post_decay,
        gain.lambda_k,
        *homeo_args,
        learn,
        adapt,
        homeostasis is not None,
        literal,
    )
    if adapt:
        topology.theta = theta
    if homeostasis is not None:
        arr.col_vbg = vbg
    return BatchOutput(counts, spikes, dw if learn else None)


def _homeo_vbg_bounds(topology: NetworkTopology) -> tuple[float, float]:
    """Back-gate interval allowed by both the device and the gain map."""
    dev_lo, dev_hi = topology.array.device.vbg_range
    g_lo, g_hi = topology.gain.vbg(topology.gain.k_range[0]), topology.gain.vbg(topology.gain.k_range[1])
    return max(dev_lo, float(g_lo)), min(dev_hi, float(g_hi))


@dataclass
class TrainResult:
    topology: NetworkTopology
    spike_counts: np.ndarray  # (presentations, n_out) in presentation order
    order: np.ndarray  # dataset index of each presentation
    metrics: list[dict] = field(default_factory=list)

    @property
    def neuron_totals(self) -> np.ndarray:
        return self.spike_counts.sum(axis=0)


def batch_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *map(int, path)])


def train(
    topology: NetworkTopology,
    images,
    stdp: StdpParams,
    lif: LifParams,
    mode: str = "adaptive_theta",
    seed: int = 0,
    *,
    epochs: int = 1,
    batch_size: int = 16,
    homeostasis: "HomeostasisParams | None" = None,
    weight_norm: float | np.ndarray | None = None,
    before_batch: Callable[[NetworkTopology], None] | None = None,
    after_batch: Callable[[NetworkTopology, np.ndarray], None] | None = None,
    backend: str | None = None,
    shuffle: bool = True,
) -> TrainResult:
    """Unsupervised STDP training; mutates and returns ``topology``.

    Weight changes accumulate over a batch and are applied once, then clipped
    to [0, 1]. ``before_batch`` may reprogram column back gates (self-repair);
    ``after_batch`` receives the applied weight change.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    images = np.asarray(images)
    if images.shape[0] == 0:
        raise DimensionError("dataset is empty")
    if int(np.prod(images.shape[1:])) != topology.n_in:
        raise DimensionError(f"images have {np.prod(images.shape[1:])} pixels, network has {topology.n_in} inputs")
    if mode == "bg_homeostasis" and homeostasis is None:
        from ..astro import HomeostasisParams

        homeostasis = HomeostasisParams.for_gain(topology.gain)
    adapt = mode == "adaptive_theta"
    homeo = homeostasis if mode == "bg_homeostasis" else None

    n = images.shape[0]
    all_counts, all_order, metrics = [], [], []
    healthy = topology.array.healthy
    for epoch in range(epochs):
        order = batch_rng(seed, 1, epoch).permutation(n) if shuffle else np.arange(n)
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[start : start + batch_size]
            if before_batch is not None:
                before_batch(topology)
            raster = encode_batch(images[idx], lif, batch_rng(seed, 2, epoch, b))
            out = simulate(topology, raster, lif, stdp, adapt=adapt, homeostasis=homeo, backend=backend)
            w = topology.array.w
            new_w = np.clip(w + out.dw, 0.0, 1.0)
            if weight_norm is not None:
                new_w = _normalise_columns(new_w, healthy, weight_norm)
            applied = new_w - w
            topology.array.w = new_w
            if after_batch is not None:
                after_batch(topology, applied)
            all_counts.append(out.counts)
            all_order.append(idx)
            metrics.append(
                {
                    "epoch": epoch,
                    "batch": b,
                    "mean_weight": float(new_w.mean()),
                    "spikes": int(out.counts.sum()),
                    "accuracy": float("nan"),
                }
            )
    return TrainResult(topology, np.concatenate(all_counts), np.concatenate(all_order), metrics)


def _normalise_columns(w: np.ndarray, healthy: np.ndarray, target) -> np.ndarray:
    s = np.where(healthy, w, 0.0).sum(axis=0)
    scale = np.divide(target, s, out=np.ones_like(s), where=s > 0)
    return np.clip(w * scale[None, :], 0.0, 1.0)


def respond(
    topology: NetworkTopology,
    images,
    lif: LifParams,
    seed: int = 0,
    batch_size: int = 100,
    backend: str | None = None,
) -> np.ndarray:
    """Spike counts (n_images, n_out) with learning and all regulation frozen."""
    images = np.asarray(images)
    out = np.zeros((images.shape[0], topology.n_out), dtype=np.int64)
    for b, start in enumerate(range(0, images.shape[0], batch_size)):
        raster = encode_batch(images[start : start + batch_size], lif, batch_rng(seed, 3, b))
        out[start : start + batch_size] = simulate(topology, raster, lif, backend=backend).counts
    return out


def assign_labels(counts, labels, n_classes: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Label each neuron with the class of highest mean response.

    Returns ``(assignments, flagged)``; neurons that never fired get class 0
    and ``flagged=True``. Ties go to the lowest class index.
    """
    counts = np.asarray(counts, dtype=float)
    labels = np.asarray(labels).astype(int)
    present = np.unique(labels)
    if present.size < n_classes or present.min() < 0 or present.max() >= n_classes:
        raise DomainError(f"labeled subset must cover all {n_classes} classes")
    means = np.stack([counts[labels == c].mean(axis=0) for c in range(n_classes)], axis=1)
    assignments = np.argmax(means, axis=1)  # first maximum wins ties
    flagged = means.max(axis=1) <= 0
    assignments[flagged] = 0
    return assignments, flagged


def predict(counts, assignments, n_classes: int = 10) -> np.ndarray:
    """Class whose neuron group has the largest summed spike count, per image."""
    counts = np.asarray(counts, dtype=float)
    group = np.zeros((counts.shape[0], n_classes))
    for c in range(n_classes):
        sel = assignments == c
        if sel.any():
            group[:, c] = counts[:, sel].sum(axis=1)
    return np.argmax(group, axis=1)


def evaluate(
    topology: NetworkTopology,
    assignments,
    images,
    labels,
    lif: LifParams,
    seed: int = 0,
    backend: str | None = None,
) -> float:
    counts = respond(topology, images, lif, seed=seed, backend=backend)
    return accuracy(counts, assignments, labels)


def accuracy(counts, assignments, labels) -> float:
    labels = np.asarray(labels).astype(int)
    return float(np.mean(predict(counts, assignments) == labels))


def spike_entropy(totals: Iterable[float]) -> float:
    """Shannon entropy (nats) of the per-neuron share of all spikes."""
    t = np.asarray(list(totals), dtype=float)
    if t.sum() <= 0:
        return 0.0
    p = t[t > 0] / t.sum()
    return float(-(p * np.log(p)).sum())
