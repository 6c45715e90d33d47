"""Run configuration: an INI file with one section per module.

Every tunable has a typed default. Unknown sections or keys, unparsable values
and values that break a module invariant raise :class:`ConfigError` naming the
offending ``section.key``. ``--set section.key=value`` overrides use the same
validation. The configuration hash covers every resolved value, so two runs
with equal hashes used identical constants.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .errors import ConfigError, DgFeFETError

__all__ = ["RunConfig", "SCHEMA", "load_config", "parse_override"]

_DEG = math.pi / 180.0


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _frac(v):
    return 0.0 <= v <= 1.0


def _any(v):
    return True


@dataclass(frozen=True)
class Key:
    kind: type
    default: Any
    check: Callable[[Any], bool] = _any
    doc: str = ""


# section -> key -> Key. Order is the order written by ``RunConfig.to_ini``.
SCHEMA: dict[str, dict[str, Key]] = {
    "device": {
        "c_tgox": Key(float, 2.0e-2, _pos, "top-gate oxide capacitance (F/m^2)"),
        "c_ch": Key(float, 1.0e-2, _pos, "channel capacitance (F/m^2)"),
        "c_bgox": Key(float, 5.0e-3, _pos, "buried-oxide capacitance (F/m^2)"),
        "mu0": Key(float, 100.0, _pos, "mobility at zero back-gate bias (cm^2/Vs)"),
        "lambda_mu": Key(float, 0.05, _any, "linear mobility coefficient (1/V)"),
        "vbg_lo": Key(float, -1.0, _any, "lowest back-gate voltage (V)"),
        "vbg_hi": Key(float, 3.0, _any, "highest back-gate voltage (V)"),
        "s_geo": Key(float, 5.0e-8, _pos, "geometry factor turning the additive term into S"),
        "g_min": Key(float, 1.0e-6, _pos, "conductance at w = 0 (S)"),
        "g_max": Key(float, 1.0e-5, _pos, "conductance at w = 1 (S)"),
        "n_states": Key(int, 5, _pos, "programmed states in the device sweep"),
        "sweep_vbg": Key(str, "0.5,1.0,1.5,2.0", _any, "back-gate voltages of the device sweep, besides the 0 V reference (V)"),
    },
    "gain": {
        "lambda_k": Key(float, 0.25, _pos, "weight gain per back-gate volt (1/V)"),
    },
    "lif": {
        "v_rest": Key(float, -65.0),
        "v_reset": Key(float, -60.0),
        "v_thresh": Key(float, -52.0),
        "tau_mem": Key(float, 100.0, _pos, "ms"),
        "t_refrac": Key(float, 5.0, _nonneg, "ms"),
        "theta_inc": Key(float, 0.05, _nonneg, "mV per spike"),
        "theta_tau": Key(float, 1e7, _pos, "ms"),
        "dt": Key(float, 1.0, _pos, "ms"),
        "sim_time": Key(float, 100.0, _pos, "ms per image"),
        "max_rate": Key(float, 128.0, _nonneg, "Hz at pixel 255"),
    },
    "stdp": {
        "a_plus": Key(float, 1e-2, _nonneg, "post-synaptic learning rate"),
        "a_minus": Key(float, 1e-4, _nonneg, "pre-synaptic learning rate"),
        "mu_plus": Key(float, 1.0, _nonneg),
        "mu_minus": Key(float, 1.0, _nonneg),
        "tau_plus": Key(float, 20.0, _pos, "ms"),
        "tau_minus": Key(float, 20.0, _pos, "ms"),
        "literal": Key(bool, False, _any, "use the rule exactly as printed (audit only)"),
    },
    "network": {
        "n_out": Key(int, 100, _pos),
        "w_init_max": Key(float, 0.3, _frac),
        "w_inhib": Key(float, -120.0, lambda v: v < 0),
        "batch_size": Key(int, 16, _pos),
        "epochs": Key(int, 1, _pos),
        "weight_norm": Key(float, 78.4, _nonneg, "column weight sum after each batch; 0 disables"),
        "vbg_lo": Key(float, -4.0, _any, "back-gate range of the network array (V)"),
        "vbg_hi": Key(float, 20.0, _any, "back-gate range of the network array (V)"),
        "n_train": Key(int, 10000, _pos, "training images (first n of the train set)"),
        "n_test": Key(int, 2000, _pos, "test images (first n of the test set)"),
    },
    "homeostasis": {
        "vbg_dec": Key(float, 0.002, _nonneg, "back-gate ramp per firing (V)"),
        "tau_homeo": Key(float, 1e7, _pos, "relaxation time constant (ms)"),
        "vbg_base": Key(float, 0.0, _any, "relaxation target (V)"),
    },
    "repair": {
        "fraction": Key(float, 0.8, _frac, "stuck-at-zero fault fraction"),
        "retrain_epochs": Key(int, 1, _pos),
        "preserve_sums": Key(bool, True, _any, "renormalise readable column sums while retraining"),
    },
    "dragonfly": {
        "n_visual": Key(int, 15, _pos),
        "visual_half_deg": Key(float, 60.0, _pos),
        "n_proprio": Key(int, 9, _pos),
        "proprio_half_deg": Key(float, 30.0, _pos),
        "n_motor": Key(int, 15, _pos),
        "motor_half_deg": Key(float, 90.0, _pos),
        "sigma_r_deg": Key(float, 0.0, _nonneg, "0 means the visual grid spacing"),
        "sigma_g_deg": Key(float, 0.0, _nonneg, "0 means the proprioceptive grid spacing"),
        "sigma_m_deg": Key(float, 0.0, _nonneg, "0 means the motor grid spacing"),
        "kappa": Key(float, 1.0, _pos),
        "beta": Key(float, 1.0, _pos),
        "n_pixels": Key(int, 721, lambda v: v >= 2),
        "field_of_view_deg": Key(float, 90.0, _pos),
    },
    "kinematics": {
        "dragonfly_speed": Key(float, 3.0, _nonneg, "m/s"),
        "prey_speed": Key(float, 1.5, _nonneg, "m/s"),
        "dt": Key(float, 0.01, _pos, "s"),
        "max_turn_rate": Key(float, 10.0, _nonneg, "rad/s"),
        "capture_radius": Key(float, 0.05, _pos, "m"),
        "max_steps": Key(int, 2000, _nonneg),
        "distance": Key(float, 1.0, _pos, "initial prey distance (m)"),
        "offset": Key(float, 0.5, _any, "initial lateral prey offset for the crossing scenario (m)"),
        "prey_turn_noise": Key(float, 0.0, _nonneg, "rad/sqrt(s)"),
    },
}


def _parse(section: str, key: str, text: str):
    spec = SCHEMA[section][key]
    where = f"{section}.{key}"
    text = text.strip()
    try:
        if spec.kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                value = True
            elif low in ("0", "false", "no", "off"):
                value = False
            else:
                raise ValueError(text)
        elif spec.kind is int:
            value = int(text)
        elif spec.kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
        else:
            value = text
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {spec.kind.__name__}") from None
    if not spec.check(value):
        raise ConfigError(f"{where}: value {value!r} is out of range")
    return value


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_override(text: str) -> tuple[str, str, str]:
    """Split ``section.key=value``."""
    name, sep, value = text.partition("=")
    section, dot, key = name.strip().partition(".")
    if not sep or not dot or not section or not key:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    return section, key, value


@dataclass
class RunConfig:
    values: dict[str, dict[str, Any]] = field(
        default_factory=lambda: {s: {k: spec.default for k, spec in keys.items()} for s, keys in SCHEMA.items()}
    )

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def set(self, section: str, key: str, text: str) -> None:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {section}.{key}")
        self.values[section][key] = _parse(section, key, text)

    def apply_overrides(self, overrides: Iterable[str]) -> "RunConfig":
        for text in overrides:
            self.set(*parse_override(text))
        self.validate()
        return self

    # -- serialisation ----------------------------------------------------

    def to_ini(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                lines.append(f"{key} = {_fmt(self.values[section][key])}")
            lines.append("")
        return "\n".join(lines)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()

    # -- module objects ---------------------------------------------------

    def device(self, vbg_range: tuple[float, float] | None = None):
        from .device import Device, MobilityModel, StackCapacitances

        d = self.values["device"]
        return Device(
            StackCapacitances(d["c_tgox"], d["c_ch"], d["c_bgox"]),
            MobilityModel(d["mu0"], d["lambda_mu"], vbg_range or (d["vbg_lo"], d["vbg_hi"])),
            d["s_geo"],
        )

    def sweep_vbg(self) -> list[float]:
        text = self.values["device"]["sweep_vbg"]
        try:
            vals = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"device.sweep_vbg: cannot parse {text!r} as a list of floats") from None
        if not vals:
            raise ConfigError("device.sweep_vbg: empty list")
        return vals

    def network_device(self):
        n = self.values["network"]
        return self.device((n["vbg_lo"], n["vbg_hi"]))

    def network_gain(self):
        from .crossbar import GainMap

        return GainMap.for_device(self.values["gain"]["lambda_k"], self.network_device().vbg_range)

    def lif(self):
        from .snn.network import LifParams

        return LifParams(**self.values["lif"])

    def stdp(self):
        from .plasticity import StdpParams

        return StdpParams(**self.values["stdp"])

    def homeostasis(self):
        from .astro import HomeostasisParams

        return HomeostasisParams(**self.values["homeostasis"])

    def tuning(self):
        from .dragonfly import TuningConfig

        d = self.values["dragonfly"]
        grids = {}
        for name, n_key, half_key, sig_key in (
            ("a", "n_visual", "visual_half_deg", "sigma_r_deg"),
            ("b", "n_proprio", "proprio_half_deg", "sigma_g_deg"),
            ("c", "n_motor", "motor_half_deg", "sigma_m_deg"),
        ):
            n, half = d[n_key], d[half_key] * _DEG
            grids[name] = tuple(np.linspace(-half, half, n).tolist())
            spacing = 2 * half / (n - 1) if n > 1 else half
            grids["sigma_" + {"a": "r", "b": "g", "c": "m"}[name]] = d[sig_key] * _DEG or spacing
        return TuningConfig(kappa=d["kappa"], beta=d["beta"], **grids)

    def sensor(self, tuning=None):
        from .dragonfly import SensorArray

        d = self.values["dragonfly"]
        return SensorArray.build(
            tuning or self.tuning(),
            n_pixels=d["n_pixels"],
            field_of_view=d["field_of_view_deg"] * _DEG,
            device=self.device(),
            lambda_k=self.values["gain"]["lambda_k"],
        )

    def kinematics(self):
        from .dragonfly import Kinematics

        k = self.values["kinematics"]
        return Kinematics(k["dragonfly_speed"], k["prey_speed"], k["dt"], k["max_turn_rate"], k["capture_radius"])

    def validate(self) -> "RunConfig":
        """Build every module object so that cross-field invariants are checked now."""
        checks = [
            ("device", lambda: self.device()),
            ("device", self.sweep_vbg),
            ("network", lambda: self.network_gain()),
            ("lif", self.lif),
            ("stdp", self.stdp),
            ("homeostasis", self.homeostasis),
            ("dragonfly", self.tuning),
            ("kinematics", self.kinematics),
        ]
        d = self.values["device"]
        if not d["g_min"] < d["g_max"]:
            raise ConfigError("device.g_min: must be below device.g_max")
        n = self.values["network"]
        if not n["vbg_lo"] <= 0.0 <= n["vbg_hi"]:
            raise ConfigError("network.vbg_lo: the network back-gate range must contain 0 V")
        if 1.0 + self.values["gain"]["lambda_k"] * n["vbg_lo"] < 0:
            raise ConfigError("network.vbg_lo: gain would turn negative at the bottom of the range")
        if not d["vbg_hi"] > 0:
            raise ConfigError("device.vbg_hi: must be positive to map proprioceptive input")
        for section, build in checks:
            try:
                build()
            except ConfigError:
                raise
            except DgFeFETError as exc:
                raise ConfigError(f"{self._culprit(section, build)}: {exc}") from None
        return self

    def _culprit(self, section: str, build) -> str:
        """Name the first non-default key whose reset alone makes ``build`` succeed."""
        vals = self.values[section]
        for key, spec in SCHEMA[section].items():
            if vals[key] == spec.default:
                continue
            saved = vals[key]
            vals[key] = spec.default
            try:
                build()
                return f"{section}.{key}"
            except DgFeFETError:
                pass
            finally:
                vals[key] = saved
        return section


def load_config(path=None, overrides: Iterable[str] = ()) -> RunConfig:
    """Defaults, then the INI file at ``path`` (if any), then ``overrides``."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, strict=True)
        parser.optionxform = str  # keys are case sensitive
        text = Path(path).read_text()
        try:
            parser.read_file(io.StringIO(text), source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            for key, value in parser.items(section):
                cfg.set(section, key, value)
    return cfg.apply_overrides(overrides)
