"""End-to-end experiments shared by the command line and the acceptance tests.

Every function takes a :class:`~dgfefet.config.RunConfig` and an integer seed
and is deterministic in them. Random streams are derived from the seed with a
fixed per-purpose tag so that changing one stage never shifts another.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .astro import HomeostasisParams, inject_faults, probe_post_fault_sums, retrain_with_repair
from .config import RunConfig
from .crossbar import apply_fault_mask
from .data_io import IdxDataset
from .dragonfly import SCENARIOS, Trajectory, run_engagement
from .snn.network import (
    NetworkTopology,
    TrainResult,
    assign_labels,
    accuracy,
    init_topology,
    respond,
    spike_entropy,
    train,
)

__all__ = [
    "device_sweep",
    "build_topology",
    "train_network",
    "score",
    "Score",
    "repair_experiment",
    "RepairRow",
    "homeostasis_experiment",
    "dragonfly_run",
    "TABLE_S2_COLUMNS",
]

# per-purpose stream tags
_LABEL, _TEST, _FAULTS, _RETRAIN = 11, 12, 13, 14


def _sub(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([int(seed), tag]).generate_state(1)[0])


# -- device ------------------------------------------------------------------


def device_sweep(cfg: RunConfig) -> tuple[list[tuple], list[tuple]]:
    """G_DS of ``n_states`` evenly spaced weights at every sweep voltage.

    Returns ``(points, fits)``: points are ``(w, v_bg, G(0), G(v_bg))``; fits
    are ``(v_bg, slope, intercept)`` of the least-squares line G(v_bg) vs G(0).
    """
    dev = cfg.device()
    d = cfg["device"]
    w = np.linspace(0.0, 1.0, d["n_states"])
    g0 = d["g_min"] + w * (d["g_max"] - d["g_min"])
    points, fits = [], []
    for v in cfg.sweep_vbg():
        g = dev.conductance(g0, v)
        points.extend(zip(w.tolist(), [v] * w.size, g0.tolist(), g.tolist()))
        A = np.column_stack([g0, np.ones_like(g0)])
        (slope, intercept), *_ = np.linalg.lstsq(A, g, rcond=None)
        fits.append((v, float(slope), float(intercept)))
    return points, fits


# -- spiking network -----------------------------------------------------------


def build_topology(cfg: RunConfig, seed: int) -> NetworkTopology:
    n = cfg["network"]
    return init_topology(
        n["n_out"],
        seed=seed,
        w_init_max=n["w_init_max"],
        w_inhib=n["w_inhib"],
        device=cfg.network_device(),
        gain=cfg.network_gain(),
    )


def _weight_norm(cfg: RunConfig):
    value = cfg["network"]["weight_norm"]
    return value if value > 0 else None


def train_network(
    cfg: RunConfig,
    data: IdxDataset,
    seed: int,
    mode: str = "adaptive_theta",
    homeostasis: HomeostasisParams | None = None,
    topology: NetworkTopology | None = None,
) -> TrainResult:
    n = cfg["network"]
    topo = topology if topology is not None else build_topology(cfg, seed)
    if mode == "bg_homeostasis" and homeostasis is None:
        homeostasis = cfg.homeostasis()
    return train(
        topo,
        data.images[: n["n_train"]],
        cfg.stdp(),
        cfg.lif(),
        mode,
        seed,
        epochs=n["epochs"],
        batch_size=n["batch_size"],
        homeostasis=homeostasis,
        weight_norm=_weight_norm(cfg),
    )


@dataclass
class Score:
    accuracy: float
    flagged: int  # neurons that never fired while labelling
    mean_spikes: float  # output spikes per test image


def score(cfg: RunConfig, topology: NetworkTopology, train_data: IdxDataset, test_data: IdxDataset, seed: int) -> Score:
    """Label neurons on the training images, then classify the test images.

    Both passes run with learning and regulation frozen.
    """
    n = cfg["network"]
    lif = cfg.lif()
    lab = train_data.subset(0, n["n_train"])
    test = test_data.subset(0, n["n_test"])
    assignments, flagged = assign_labels(respond(topology, lab.images, lif, seed=_sub(seed, _LABEL)), lab.labels)
    counts = respond(topology, test.images, lif, seed=_sub(seed, _TEST))
    return Score(accuracy(counts, assignments, test.labels), int(flagged.sum()), float(counts.sum(axis=1).mean()))


TABLE_S2_COLUMNS = (
    "fault_percent",
    "baseline_accuracy",
    "post_fault_accuracy",
    "repaired_accuracy",
    "improvement",
    "unrepaired_accuracy",
    "mean_k",
    "clamped_columns",
)


@dataclass
class RepairRow:
    fault_percent: float
    baseline: float
    post_fault: float
    repaired: float
    unrepaired: float
    mean_k: float
    clamped: int
    repaired_topology: NetworkTopology | None = None
    k_history: np.ndarray | None = None

    def row(self) -> tuple:
        return (
            self.fault_percent,
            self.baseline,
            self.post_fault,
            self.repaired,
            self.repaired - self.post_fault,
            self.unrepaired,
            self.mean_k,
            self.clamped,
        )


def repair_experiment(
    cfg: RunConfig,
    topology: NetworkTopology,
    train_data: IdxDataset,
    test_data: IdxDataset,
    seed: int,
    fraction: float | None = None,
    modes: tuple[str, ...] = ("repair", "no_repair"),
) -> RepairRow:
    """Fault injection followed by retraining with and without back-gate repair.

    ``topology`` is the trained, fault-free network; it is not modified. A mode
    left out of ``modes`` reports ``nan``.
    """
    r = cfg["repair"]
    n = cfg["network"]
    fraction = r["fraction"] if fraction is None else fraction
    base = score(cfg, topology, train_data, test_data, seed).accuracy
    prior = probe_post_fault_sums(topology.array)

    faulted = topology.copy()
    faulted.array = apply_fault_mask(faulted.array, inject_faults(faulted.array.shape, fraction, _sub(seed, _FAULTS)))
    post = score(cfg, faulted, train_data, test_data, seed).accuracy

    results = {}
    for mode in modes:
        t = faulted.copy()
        _, state = retrain_with_repair(
            t,
            train_data.images[: n["n_train"]],
            cfg.stdp(),
            cfg.lif(),
            prior,
            _sub(seed, _RETRAIN),
            repair=mode == "repair",
            epochs=r["retrain_epochs"],
            batch_size=n["batch_size"],
            preserve_sums=r["preserve_sums"],
        )
        results[mode] = (score(cfg, t, train_data, test_data, seed).accuracy, t, state)

    nan = float("nan")
    rep = results.get("repair")
    return RepairRow(
        100.0 * fraction,
        base,
        post,
        rep[0] if rep else nan,
        results["no_repair"][0] if "no_repair" in results else nan,
        float(rep[1].col_gain().mean()) if rep else nan,
        int(rep[2].clamped.sum()) if rep else 0,
        rep[1] if rep else None,
        rep[2].k_history if rep else None,
    )


@dataclass
class HomeostasisRow:
    mode: str
    accuracy: float
    entropy: float
    max_share: float
    mean_k: float
    topology: NetworkTopology


def homeostasis_experiment(
    cfg: RunConfig, train_data: IdxDataset, test_data: IdxDataset, seed: int, regulate: bool = True
) -> HomeostasisRow:
    """Train with back-gate homeostasis (or with no regulation at all) and score.

    Without regulation the thresholds stay frozen and the back gates never
    move. Evaluation keeps the column gains reached at the end of training.
    """
    hp = cfg.homeostasis()
    if not regulate:
        hp = HomeostasisParams(vbg_dec=0.0, tau_homeo=hp.tau_homeo, vbg_base=0.0)
    res = train_network(cfg, train_data, seed, "bg_homeostasis", hp)
    topo = res.topology
    totals = res.neuron_totals
    share = float(totals.max() / totals.sum()) if totals.sum() > 0 else 0.0
    acc = score(cfg, topo, train_data, test_data, seed).accuracy
    return HomeostasisRow(
        "bg_homeostasis" if regulate else "none",
        acc,
        spike_entropy(totals),
        share,
        float(topo.col_gain().mean()),
        topo,
    )


# -- dragonfly -----------------------------------------------------------------


def dragonfly_run(cfg: RunConfig, scenario: str, seed: int, pipeline: str = "abstract") -> Trajectory:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    kin = cfg.kinematics()
    k = cfg["kinematics"]
    if scenario == "crossing":
        state = SCENARIOS[scenario](kin, k["distance"], k["offset"])
    else:
        state = SCENARIOS[scenario](kin, k["distance"])
    tuning = cfg.tuning()
    return run_engagement(
        tuning,
        kin,
        state,
        k["max_steps"],
        seed,
        pipeline=pipeline,
        sensor=cfg.sensor(tuning),
        prey_turn_noise=k["prey_turn_noise"],
    )
