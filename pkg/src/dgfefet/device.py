"""Single double-gate FeFET: coupling, back-gate mobility, conductance and programming.

The top (ferroelectric) gate holds a normalised weight ``w`` in [0, 1]. The
back gate shifts the threshold through the capacitive divider and raises the
channel mobility linearly, so the drain conductance at back-gate voltage
``v`` is::

    G(v) = mu(v)/mu(0) * G0 + gamma_tg * mu(v) * c_tgox * v * s_geo
    G0   = g_min + w * (g_max - g_min)

``s_geo`` is a geometry factor (W/L times area) that turns the areal
capacitance term into siemens.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, VbgRangeError

__all__ = [
    "StackCapacitances",
    "MobilityModel",
    "Device",
    "FeFETCell",
    "PulseKind",
    "PulseScheme",
    "coupling_coefficient",
    "mobility",
    "conductance",
    "apply_pulses",
    "program_weight",
    "default_scheme",
]

DEFAULT_VBG_RANGE = (-1.0, 3.0)


def _positive_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class StackCapacitances:
    """Areal capacitances (F/m^2) of the top-gate oxide, channel and buried oxide."""

    c_tgox: float = 2.0e-2
    c_ch: float = 1.0e-2
    c_bgox: float = 5.0e-3

    def __post_init__(self):
        for name in ("c_tgox", "c_ch", "c_bgox"):
            object.__setattr__(self, name, _positive_finite(name, getattr(self, name)))


@dataclass(frozen=True)
class MobilityModel:
    """Electron mobility ``mu0 * (1 + lambda_mu * v_bg)`` over a closed voltage range."""

    mu0: float = 100.0
    lambda_mu: float = 0.05
    vbg_range: tuple[float, float] = DEFAULT_VBG_RANGE

    def __post_init__(self):
        _positive_finite("mu0", self.mu0)
        lo, hi = (float(v) for v in self.vbg_range)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise DomainError(f"vbg_range must be a finite interval, got {self.vbg_range!r}")
        object.__setattr__(self, "vbg_range", (lo, hi))
        # linear in v, so checking both ends covers the interval
        if min(1.0 + self.lambda_mu * lo, 1.0 + self.lambda_mu * hi) <= 0.0:
            raise DomainError("mobility would be non-positive inside vbg_range")

    def check(self, v_bg) -> None:
        lo, hi = self.vbg_range
        v = np.asarray(v_bg, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(v < lo) or np.any(v > hi):
            raise VbgRangeError(f"back-gate voltage {v_bg!r} outside [{lo}, {hi}] V")


@dataclass(frozen=True)
class Device:
    """Device context shared by every cell of an array."""

    caps: StackCapacitances = field(default_factory=StackCapacitances)
    mobility: MobilityModel = field(default_factory=MobilityModel)
    s_geo: float = 5.0e-8

    def __post_init__(self):
        _positive_finite("s_geo", self.s_geo)

    @property
    def vbg_range(self) -> tuple[float, float]:
        return self.mobility.vbg_range

    def mobility_ratio(self, v_bg):
        """mu(v)/mu(0); broadcasts over arrays."""
        self.mobility.check(v_bg)
        return 1.0 + self.mobility.lambda_mu * np.asarray(v_bg, dtype=float)

    def additive_term(self, v_bg):
        """Back-gate threshold-shift contribution to G_DS, in siemens."""
        self.mobility.check(v_bg)
        v = np.asarray(v_bg, dtype=float)
        mu = self.mobility.mu0 * (1.0 + self.mobility.lambda_mu * v)
        return coupling_coefficient(self.caps) * mu * self.caps.c_tgox * v * self.s_geo

    def conductance(self, g0, v_bg):
        """Vectorised G_DS from base conductance(s) ``g0`` at V_BG=0."""
        return self.mobility_ratio(v_bg) * np.asarray(g0, dtype=float) + self.additive_term(v_bg)


@dataclass(frozen=True)
class FeFETCell:
    """One device: nonvolatile weight plus its conductance window at V_BG = 0.

    ``n_states`` optionally quantises pulse updates to that many evenly spaced
    levels; ``None`` keeps the weight analog.
    """

    w: float = 0.0
    g_min: float = 1.0e-6
    g_max: float = 1.0e-5
    n_states: int | None = None

    def __post_init__(self):
        w = float(self.w)
        if not (0.0 <= w <= 1.0):
            raise DomainError(f"weight must lie in [0, 1], got {w}")
        object.__setattr__(self, "w", w)
        _positive_finite("g_min", self.g_min)
        _positive_finite("g_max", self.g_max)
        if not self.g_min < self.g_max:
            raise DomainError("g_min must be below g_max")
        if self.n_states is not None and self.n_states < 2:
            raise DomainError("n_states must be at least 2")

    @property
    def g0(self) -> float:
        return self.g_min + self.w * (self.g_max - self.g_min)


def coupling_coefficient(caps: StackCapacitances) -> float:
    """Threshold-shift coefficient: series(C_ch, C_bgox) / C_tgox."""
    series = caps.c_ch * caps.c_bgox / (caps.c_ch + caps.c_bgox)
    return series / caps.c_tgox


def mobility(model: MobilityModel, v_bg: float) -> float:
    model.check(v_bg)
    return model.mu0 * (1.0 + model.lambda_mu * float(v_bg))


def conductance(
    cell: FeFETCell,
    v_bg: float,
    caps: StackCapacitances,
    mob: MobilityModel,
    s_geo: float = Device.s_geo,
) -> float:
    """Drain conductance (S) of ``cell`` read with back-gate voltage ``v_bg``."""
    return float(Device(caps, mob, s_geo).conductance(cell.g0, v_bg))


class PulseKind(enum.Enum):
    IDENTICAL = "identical"
    WIDTH_MODULATED = "width"
    AMPLITUDE_MODULATED = "amplitude"


Pulse = tuple[float, float]  # (amplitude V, width s)


@dataclass(frozen=True)
class PulseScheme:
    """Programming pulse trains and the response-curve parameters of one scheme.

    Identical and width-modulated pulses use a nucleation-limited switching
    fraction ``s = 1 - exp(-(width/t_ref) * exp((|amp| - v_c)/v_0))`` applied
    to the remaining headroom (``1 - w`` up, ``w`` down); ``v_c_depress`` lets
    the two directions differ. Amplitude-modulated pulses follow a uniform
    coercive-voltage distribution on ``[v_lo, v_hi]``: each pulse switches the
    band between the previous and the current amplitude.
    """

    kind: PulseKind
    potentiation: tuple[Pulse, ...]
    depression: tuple[Pulse, ...]
    v_c: float = 3.0
    v_c_depress: float | None = None
    v_0: float = 0.25
    t_ref: float = 100e-9
    v_lo: float = 2.0
    v_hi: float = 4.0

    def __post_init__(self):
        for name in ("potentiation", "depression"):
            pulses = tuple((float(a), float(t)) for a, t in getattr(self, name))
            if not pulses:
                raise DomainError(f"{name} pulse list is empty")
            if any(a == 0.0 or t <= 0.0 for a, t in pulses):
                raise DomainError(f"{name} pulses need nonzero amplitude and positive width")
            object.__setattr__(self, name, pulses)
        if self.v_0 <= 0 or self.t_ref <= 0 or self.v_hi <= self.v_lo:
            raise DomainError("invalid response-curve parameters")

    def switching_fraction(self, pulse: Pulse, depress: bool) -> float:
        amp, width = pulse
        v_c = self.v_c_depress if (depress and self.v_c_depress is not None) else self.v_c
        return -math.expm1(-(width / self.t_ref) * math.exp((abs(amp) - v_c) / self.v_0))


def default_scheme(kind: PulseKind | str, n_pulses: int = 20) -> PulseScheme:
    """Default trains that reproduce the qualitative programming curves."""
    kind = PulseKind(kind)
    if kind is PulseKind.IDENTICAL:
        return PulseScheme(kind, ((3.0, 100e-9),), ((-3.0, 100e-9),))
    if kind is PulseKind.WIDTH_MODULATED:
        widths = np.geomspace(10e-9, 1e-6, n_pulses)
        return PulseScheme(
            kind,
            tuple((2.6, float(t)) for t in widths),
            tuple((-2.6, float(t)) for t in widths),
            v_c=3.0,
            v_c_depress=3.2,
        )
    lo, hi = 2.0, 4.0
    amps = lo + (hi - lo) * np.arange(1, n_pulses + 1) / n_pulses
    return PulseScheme(
        kind,
        tuple((float(a), 100e-9) for a in amps),
        tuple((-float(a), 100e-9) for a in amps),
        v_lo=lo,
        v_hi=hi,
    )


def _quantise(w: float, n_states: int | None) -> float:
    if n_states is None:
        return w
    return round(w * (n_states - 1)) / (n_states - 1)


def apply_pulses(cell: FeFETCell, scheme: PulseScheme, direction: str, count: int) -> FeFETCell:
    """Apply the first ``count`` pulses of the scheme's train in ``direction``.

    Trains shorter than ``count`` repeat their last pulse. Saturation at the
    bounds is silent.
    """
    if direction not in ("potentiate", "depress"):
        raise ValueError(f"direction must be 'potentiate' or 'depress', got {direction!r}")
    if count < 0:
        raise ValueError("count must be non-negative")
    depress = direction == "depress"
    train = scheme.depression if depress else scheme.potentiation
    w = cell.w
    prev_amp = scheme.v_lo
    for n in range(count):
        pulse = train[min(n, len(train) - 1)]
        if scheme.kind is PulseKind.AMPLITUDE_MODULATED:
            amp = min(max(abs(pulse[0]), scheme.v_lo), scheme.v_hi)
            step = max(amp - prev_amp, 0.0) / (scheme.v_hi - scheme.v_lo)
            prev_amp = max(prev_amp, amp)
            w = w - step if depress else w + step
        else:
            s = scheme.switching_fraction(pulse, depress)
            w = w - s * w if depress else w + s * (1.0 - w)
        w = min(max(w, 0.0), 1.0)
    return replace(cell, w=_quantise(w, cell.n_states))


def program_weight(cell: FeFETCell, target_w: float) -> FeFETCell:
    """Direct write of the nonvolatile weight (no quantisation)."""
    target_w = float(target_w)
    if not (0.0 <= target_w <= 1.0) or math.isnan(target_w):
        raise DomainError(f"target weight must lie in [0, 1], got {target_w}")
    return replace(cell, w=target_w)


def staircase(cell: FeFETCell, scheme: PulseScheme, direction: str, count: int) -> list[float]:
    """Weight after each of ``count`` successive pulses (a programming curve)."""
    return [apply_pulses(cell, scheme, direction, n).w for n in range(1, count + 1)]

