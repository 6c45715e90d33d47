"""Command-line entry point: one subcommand per experiment.

Exit codes: 0 success, 2 configuration error, 3 domain outcome (the prey was
not intercepted), 4 I/O or file-format error. Every artifact is written
atomically under ``--out`` and listed with its SHA-256 in ``manifest.json``,
next to a copy of the resolved configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .data_io import Checkpoint, atomic_write, csv_text, find_mnist, load_checkpoint, save_checkpoint
from .dragonfly import SCENARIOS, TRAJECTORY_COLUMNS
from .errors import ChecksumError, ConfigError, DgFeFETError, ParseError, VersionError
from .snn.network import NetworkTopology

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4


class _Out:
    """Artifact writer that keeps a manifest of everything it wrote."""

    def __init__(self, root, command: str, cfg: RunConfig, seed: int | None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "command": command,
            "config_hash": cfg.hash,
            "seed": seed,
            "version": __version__,
            "lambda_k": cfg["gain"]["lambda_k"],
            "artifacts": {},
        }
        self.write("config.ini", cfg.to_ini())

    def write(self, name: str, data: bytes | str) -> Path:
        raw = data.encode() if isinstance(data, str) else data
        path = self.root / name
        atomic_write(path, raw)
        self.manifest["artifacts"][name] = hashlib.sha256(raw).hexdigest()
        return path

    def csv(self, name: str, schema, rows) -> Path:
        return self.write(name, csv_text(schema, rows))

    def checkpoint(self, name: str, ckpt: Checkpoint) -> Path:
        path = self.root / name
        save_checkpoint(path, ckpt)
        self.manifest["artifacts"][name] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path

    def close(self, **summary) -> None:
        self.manifest["summary"] = summary
        atomic_write(self.root / "manifest.json", json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")


def _mnist(path):
    train, test = find_mnist(path)
    return train, test


def _topology_from(ckpt: Checkpoint, cfg: RunConfig) -> NetworkTopology:
    from .crossbar import CrossbarArray

    d = cfg["device"]
    array = CrossbarArray(
        ckpt.weights, ckpt.col_vbg, ckpt.faults, cfg.network_device(), d["g_min"], d["g_max"]
    )
    return NetworkTopology(array, cfg.network_gain(), cfg["network"]["w_inhib"], ckpt.theta)


def weight_grid_pgm(w: np.ndarray, side: int = 28) -> bytes:
    """Binary PGM tiling every column's receptive field, each scaled to its own max."""
    n_in, n_out = w.shape
    if n_in != side * side:
        raise ValueError(f"cannot tile {n_in} inputs as {side}x{side}")
    cols = int(np.ceil(np.sqrt(n_out)))
    rows = int(np.ceil(n_out / cols))
    img = np.zeros((rows * side, cols * side))
    for j in range(n_out):
        r, c = divmod(j, cols)
        field = w[:, j].reshape(side, side)
        peak = field.max()
        img[r * side : (r + 1) * side, c * side : (c + 1) * side] = field / peak if peak > 0 else 0.0
    pixels = np.round(img * 255).astype(np.uint8)
    return f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode() + pixels.tobytes()


# -- subcommands ---------------------------------------------------------------


def cmd_device_sweep(args, cfg: RunConfig) -> int:
    from .experiments import device_sweep

    out = _Out(args.out, "device-sweep", cfg, None)
    points, fits = device_sweep(cfg)
    schema = ("record", "w", "v_bg", "g_ds_0", "g_ds", "slope", "intercept")
    rows = [("point", w, v, g0, g, "", "") for w, v, g0, g in points]
    rows += [("fit", "", v, "", "", s, b) for v, s, b in fits]
    out.csv("device_sweep.csv", schema, rows)
    out.close(points=len(points), fits=len(fits), lambda_k=cfg["gain"]["lambda_k"])
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    from .experiments import score, train_network

    train_ds, test_ds = _mnist(args.data)
    out = _Out(args.out, "train", cfg, args.seed)
    res = train_network(cfg, train_ds, args.seed)
    out.checkpoint("model.ckpt", Checkpoint.from_topology(res.topology, args.seed, cfg.hash))
    out.csv(
        "train_metrics.csv",
        ("epoch", "batch", "mean_weight", "spikes", "accuracy"),
        [(m["epoch"], m["batch"], m["mean_weight"], m["spikes"], m["accuracy"]) for m in res.metrics],
    )
    s = score(cfg, res.topology, train_ds, test_ds, args.seed)
    out.csv("eval_metrics.csv", *_score_table(cfg, s))
    out.close(accuracy=s.accuracy, lambda_k=cfg["gain"]["lambda_k"])
    print(f"accuracy {s.accuracy:.4f}")
    return EXIT_OK


def _score_table(cfg, s):
    n = cfg["network"]
    return (
        ("n_out", "n_label", "n_test", "accuracy", "silent_neurons", "spikes_per_image"),
        [(n["n_out"], n["n_train"], n["n_test"], s.accuracy, s.flagged, s.mean_spikes)],
    )


def cmd_eval(args, cfg: RunConfig) -> int:
    from .experiments import score

    ckpt = load_checkpoint(args.checkpoint)
    train_ds, test_ds = _mnist(args.data)
    out = _Out(args.out, "eval", cfg, args.seed)
    s = score(cfg, _topology_from(ckpt, cfg), train_ds, test_ds, args.seed)
    out.csv("eval_metrics.csv", *_score_table(cfg, s))
    out.close(accuracy=s.accuracy, checkpoint_config_hash=ckpt.config_hash)
    print(f"accuracy {s.accuracy:.4f}")
    return EXIT_OK


def cmd_inject_repair(args, cfg: RunConfig) -> int:
    from .experiments import TABLE_S2_COLUMNS, repair_experiment

    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.faults.any():
        raise ConfigError("checkpoint already carries faults; start from a fault-free network")
    train_ds, test_ds = _mnist(args.data)
    fraction = cfg["repair"]["fraction"] if args.fraction is None else args.fraction
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"--fraction {fraction} must lie in [0, 1]")
    modes = ("repair", "no_repair") if args.mode == "both" else (args.mode,)
    out = _Out(args.out, "inject-repair", cfg, args.seed)
    row = repair_experiment(cfg, _topology_from(ckpt, cfg), train_ds, test_ds, args.seed, fraction, modes)
    out.csv("table_s2.csv", TABLE_S2_COLUMNS, [row.row()])
    if row.repaired_topology is not None:
        kh = row.k_history
        out.csv(
            "repair_k.csv",
            ("batch", "k_mean", "k_min", "k_max"),
            [(i, k.mean(), k.min(), k.max()) for i, k in enumerate(kh)],
        )
        out.checkpoint("repaired.ckpt", Checkpoint.from_topology(row.repaired_topology, args.seed, cfg.hash))
    out.close(**dict(zip(TABLE_S2_COLUMNS, map(float, row.row()))))
    print(", ".join(f"{k} {v:.4f}" for k, v in zip(TABLE_S2_COLUMNS, row.row())))
    return EXIT_OK


def cmd_homeostasis(args, cfg: RunConfig) -> int:
    from .experiments import homeostasis_experiment

    train_ds, test_ds = _mnist(args.data)
    out = _Out(args.out, "homeostasis", cfg, args.seed)
    runs = [homeostasis_experiment(cfg, train_ds, test_ds, args.seed, regulate=True)]
    if not args.no_baseline:
        runs.append(homeostasis_experiment(cfg, train_ds, test_ds, args.seed, regulate=False))
    out.csv(
        "homeostasis_metrics.csv",
        ("mode", "accuracy", "spike_entropy", "max_spike_share", "mean_k"),
        [(r.mode, r.accuracy, r.entropy, r.max_share, r.mean_k) for r in runs],
    )
    out.write("weight_grid.pgm", weight_grid_pgm(runs[0].topology.weights))
    out.close(**{f"{r.mode}_accuracy": r.accuracy for r in runs})
    for r in runs:
        print(f"{r.mode}: accuracy {r.accuracy:.4f}, entropy {r.entropy:.4f}, max share {r.max_share:.4f}")
    return EXIT_OK


def cmd_dragonfly(args, cfg: RunConfig) -> int:
    from .experiments import dragonfly_run

    out = _Out(args.out, "dragonfly", cfg, args.seed)
    pipeline = "crossbar" if args.crossbar else "abstract"
    traj = dragonfly_run(cfg, args.scenario, args.seed, pipeline)
    out.csv("trajectory.csv", TRAJECTORY_COLUMNS, traj.rows)
    d = cfg["dragonfly"]
    out.close(
        intercepted=traj.intercepted,
        steps=traj.steps,
        scenario=args.scenario,
        pipeline=pipeline,
        beta=d["beta"],
        n_motor=d["n_motor"],
    )
    print(f"{'intercepted' if traj.intercepted else 'not intercepted'} after {traj.steps} steps")
    return EXIT_OK if traj.intercepted else EXIT_DOMAIN


# -- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgfefet", description="Double-gate FeFET neuromorphic simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", type=Path, help="INI configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a value")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, required=True)

    sp = sub.add_parser("device-sweep", help="conductance vs weight per back-gate voltage, with fitted slopes")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_device_sweep)

    sp = sub.add_parser("train", help="train the spiking network with adaptive thresholds")
    common(sp)
    sp.add_argument("--data", type=Path, required=True, help="directory with the four MNIST IDX files")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="label and score a checkpoint")
    common(sp)
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--checkpoint", type=Path, required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("inject-repair", help="fault injection and retraining with/without back-gate repair")
    common(sp)
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--checkpoint", type=Path, required=True)
    sp.add_argument("--fraction", type=float, default=None, help="fault fraction (default from config)")
    sp.add_argument("--mode", choices=("repair", "no_repair", "both"), default="both")
    sp.set_defaults(func=cmd_inject_repair)

    sp = sub.add_parser("homeostasis", help="train with back-gate homeostasis and compare to no regulation")
    common(sp)
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--no-baseline", action="store_true", help="skip the unregulated comparison run")
    sp.set_defaults(func=cmd_homeostasis)

    sp = sub.add_parser("dragonfly", help="prey-interception engagement; exit 3 if the prey escapes")
    common(sp)
    sp.add_argument("--scenario", choices=sorted(SCENARIOS), default="crossing")
    sp.add_argument("--crossbar", action="store_true", help="compute the sensorimotor layer on the device array")
    sp.set_defaults(func=cmd_dragonfly)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError, ChecksumError, VersionError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DgFeFETError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
