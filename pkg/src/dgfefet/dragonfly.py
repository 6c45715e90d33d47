"""Dragonfly prey-interception circuit on gain-modulated synapses.

Pipeline per time step::

    prey image x, desired position y
      -> visual tuning f_i(x), proprioceptive tuning g_j(y)
      -> sensorimotor basis S_ij = f_i * g_j
      -> motor responses R_k = beta * sum_ij W_ijk S_ij
      -> turn d = sum_k c_k R_k / sum_k R_k

Motion is planar, so eye coordinates are bearings in radians relative to the
dragonfly heading (positive = counter-clockwise). The motor layer is tuned to
the turn ``z = x - y`` that brings the prey image onto the desired position.

The crossbar-mapped variant programs the visual tuning weights into the top
gates of an array whose rows are ommatidia, and drives each column's back gate
with a proprioceptive activity. The back-gate gain ``k = 1 + lambda_k v_bg``
is never zero at ``g = 0``, so every column carries an offset that is removed
by subtracting a baseline read with all back gates at 0 V.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .crossbar import CrossbarArray, GainMap, effective_matvec
from .device import Device
from .errors import DecodeError, DimensionError, DomainError, VbgRangeError

__all__ = [
    "TuningConfig",
    "Kinematics",
    "EngagementState",
    "SensorArray",
    "Trajectory",
    "visual_response",
    "proprio_response",
    "tuning_weight",
    "sensorimotor",
    "sensorimotor_fefet",
    "motor_weights",
    "motor_response",
    "decode_turn",
    "decode_turn_offset_corrected",
    "step_engagement",
    "run_engagement",
    "crossing_scenario",
    "stationary_scenario",
    "receding_scenario",
    "SCENARIOS",
    "TRAJECTORY_COLUMNS",
]

_DEG = math.pi / 180.0


def _grid(n: int, half_width: float) -> tuple[float, ...]:
    return tuple(np.linspace(-half_width, half_width, n).tolist())


def _gauss(d, sigma):
    return np.exp(-0.5 * (np.asarray(d, dtype=float) / sigma) ** 2)


@dataclass(frozen=True)
class TuningConfig:
    """Tuning-curve centres (radians) and widths of the three populations.

    The default widths equal the grid spacing of each population.
    """

    a: tuple[float, ...] = _grid(15, 60 * _DEG)
    b: tuple[float, ...] = _grid(9, 30 * _DEG)
    c: tuple[float, ...] = _grid(15, 90 * _DEG)
    sigma_r: float = 120 * _DEG / 14
    sigma_g: float = 60 * _DEG / 8
    sigma_m: float = 180 * _DEG / 14
    kappa: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "c"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise DomainError(f"tuning centres {name!r} must be non-empty")
            object.__setattr__(self, name, vals)
        if not all(-math.pi < c <= math.pi for c in self.c):
            raise DomainError("motor centres must lie in (-pi, pi]")
        if min(self.sigma_r, self.sigma_g, self.sigma_m) <= 0:
            raise DomainError("tuning widths must be positive")
        if self.kappa <= 0 or self.beta <= 0:
            raise DomainError("kappa and beta must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.a), len(self.b), len(self.c)


@dataclass(frozen=True)
class Kinematics:
    dragonfly_speed: float = 3.0  # m/s
    prey_speed: float = 1.5  # m/s, half the dragonfly speed
    dt: float = 0.01  # s
    max_turn_rate: float = 10.0  # rad/s
    capture_radius: float = 0.05  # m

    def __post_init__(self):
        if self.dragonfly_speed < 0 or self.prey_speed < 0:
            raise DomainError("speeds must be non-negative")
        if not self.dt > 0 or self.max_turn_rate < 0 or not self.capture_radius > 0:
            raise DomainError("need dt > 0, max_turn_rate >= 0 and capture_radius > 0")


def _wrap(angle: float) -> float:
    """Angle folded into (-pi, pi]."""
    a = math.remainder(angle, 2 * math.pi)
    return math.pi if a == -math.pi else a


@dataclass
class EngagementState:
    position: np.ndarray  # dragonfly (m)
    heading: float  # rad
    speed: float  # m/s
    prey_position: np.ndarray
    prey_velocity: np.ndarray  # m/s
    x: float = 0.0  # prey image on the eye (rad)
    y: float = 0.0  # desired prey image position (rad)
    t: float = 0.0  # s

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2).copy()
        self.prey_position = np.asarray(self.prey_position, dtype=float).reshape(2).copy()
        self.prey_velocity = np.asarray(self.prey_velocity, dtype=float).reshape(2).copy()
        if self.speed < 0:
            raise DomainError("speed must be non-negative")
        self.x = self.eye_position()

    def eye_position(self) -> float:
        dx, dy = self.prey_position - self.position
        return _wrap(math.atan2(dy, dx) - self.heading)

    @property
    def distance(self) -> float:
        return float(np.hypot(*(self.prey_position - self.position)))

    def copy(self) -> "EngagementState":
        return replace(self)


# -- tuning ----------------------------------------------------------------


def visual_response(x: float, config: TuningConfig) -> np.ndarray:
    return _gauss(x - np.asarray(config.a), config.sigma_r)


def proprio_response(y: float, config: TuningConfig) -> np.ndarray:
    return _gauss(y - np.asarray(config.b), config.sigma_g)


def tuning_weight(x_p, a_i, sigma_r: float, kappa: float):
    """Top-gate tuning weight ``kappa * exp(-(x_p - a_i)^2 / 2 sigma_r^2)``; broadcasts."""
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    return kappa * _gauss(np.subtract(x_p, a_i), sigma_r)


def sensorimotor(f, g) -> np.ndarray:
    return np.multiply.outer(np.asarray(f, dtype=float), np.asarray(g, dtype=float))


# -- crossbar-mapped sensor ------------------------------------------------


@dataclass
class SensorArray:
    """Ommatidia feeding a DG-FeFET array that computes the sensorimotor layer.

    Row ``p`` is ommatidium ``x_p``; column ``i * n_b + j`` stores
    ``alpha_{p,i} / kappa`` in its top gates and receives ``g_j`` on its back
    gate through ``v_bg = g_j * vbg_full_scale``.
    """

    pixels: np.ndarray
    alpha: np.ndarray
    crossbar: CrossbarArray
    gain: GainMap
    n_b: int
    kappa: float
    vbg_full_scale: float

    @classmethod
    def build(
        cls,
        config: TuningConfig,
        n_pixels: int = 721,
        field_of_view: float = 90 * _DEG,
        device: Device | None = None,
        lambda_k: float = 0.25,
    ) -> "SensorArray":
        device = device or Device()
        pixels = np.linspace(-field_of_view, field_of_view, n_pixels)
        alpha = tuning_weight(pixels[:, None], np.asarray(config.a)[None, :], config.sigma_r, config.kappa)
        n_a, n_b, _ = config.shape
        w = np.repeat(alpha / config.kappa, n_b, axis=1)  # column i*n_b + j
        gain = GainMap.for_device(lambda_k, device.vbg_range)
        full_scale = device.vbg_range[1]
        if not full_scale > 0:
            raise DomainError("device back-gate range has no positive headroom for g")
        return cls(pixels, alpha, CrossbarArray(w, device=device), gain, n_b, config.kappa, full_scale)

    @property
    def offset_gain(self) -> float:
        """Gain per unit g above the g = 0 offset."""
        return self.gain.lambda_k * self.vbg_full_scale

    def sense(self, x: float) -> np.ndarray:
        """Ommatidium intensities: the prey image lights the nearest ommatidium."""
        I = np.zeros(self.pixels.size)
        if self.pixels[0] <= x <= self.pixels[-1]:
            I[int(np.argmin(np.abs(self.pixels - x)))] = 1.0
        return I

    def sampled(self, x: float) -> float:
        """Image position as resolved by the ommatidia (nan outside the field of view)."""
        if not self.pixels[0] <= x <= self.pixels[-1]:
            return math.nan
        return float(self.pixels[int(np.argmin(np.abs(self.pixels - x)))])

    def map_g(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n_b,):
            raise DimensionError(f"expected {self.n_b} proprioceptive inputs, got shape {g.shape}")
        if np.any(g < 0) or np.any(g > 1) or not np.all(np.isfinite(g)):
            raise VbgRangeError("proprioceptive input must lie in [0, 1] to be mapped to a back gate")
        return g * self.vbg_full_scale

    def read(self, pixels, g) -> np.ndarray:
        """Raw column read-out, reshaped to (n_a, n_b); includes the gain offset."""
        self.crossbar.set_col_vbg(np.tile(self.map_g(g), self.alpha.shape[1]))
        out = effective_matvec(self.crossbar, self.gain, pixels)
        return self.kappa * out.reshape(self.alpha.shape[1], self.n_b)


def sensorimotor_fefet(pixels, sensor: SensorArray, g) -> np.ndarray:
    """``S_ij`` from the crossbar: ``(raw - baseline) / offset_gain``.

    ``raw`` is read with ``g`` on the back gates and ``baseline`` with every
    back gate at 0 V (``g = 0``); their difference is ``lambda_k v_full g_j``
    times ``sum_p I_p alpha_{p,i}``.
    """
    pixels = np.asarray(pixels, dtype=float)
    if pixels.shape != sensor.pixels.shape:
        raise DimensionError(f"expected {sensor.pixels.size} pixel inputs, got shape {pixels.shape}")
    raw = sensor.read(pixels, g)
    baseline = sensor.read(pixels, np.zeros(sensor.n_b))
    return (raw - baseline) / sensor.offset_gain


# -- motor layer -----------------------------------------------------------


def motor_weights(config: TuningConfig) -> np.ndarray:
    """Closed form of ``W_ijk = iint f(y + z; a_i) g(y; b_j) m(z; c_k) dy dz``.

    Integrating out ``y`` and then ``z`` (two Gaussian convolutions) gives
    ``2 pi s_r s_g s_m / sqrt(S) * exp(-(a_i - b_j - c_k)^2 / 2S)`` with
    ``S = s_r^2 + s_g^2 + s_m^2``.
    """
    a = np.asarray(config.a)[:, None, None]
    b = np.asarray(config.b)[None, :, None]
    c = np.asarray(config.c)[None, None, :]
    var = config.sigma_r**2 + config.sigma_g**2 + config.sigma_m**2
    scale = 2 * math.pi * config.sigma_r * config.sigma_g * config.sigma_m / math.sqrt(var)
    return scale * np.exp(-((a - b - c) ** 2) / (2 * var))


def motor_response(W: np.ndarray, S: np.ndarray, beta: float) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    S = np.asarray(S, dtype=float)
    if W.shape[:2] != S.shape:
        raise DimensionError(f"W is {W.shape}, S is {S.shape}")
    return beta * np.einsum("ijk,ij->k", W, S)


def decode_turn(R, c, eps: float = 1e-300) -> float:
    """Activity-weighted mean of the motor preferred turns."""
    R = np.asarray(R, dtype=float)
    c = np.asarray(c, dtype=float)
    if R.shape != c.shape:
        raise DimensionError(f"R has {R.shape}, c has {c.shape}")
    total = R.sum()
    if not total > eps:
        raise DecodeError("motor layer has no drive")
    return float(np.dot(c, R) / total)


def decode_turn_offset_corrected(R_raw, R_baseline, c) -> float:
    diff = np.maximum(np.asarray(R_raw, dtype=float) - np.asarray(R_baseline, dtype=float), 0.0)
    return decode_turn(diff, c)


# -- engagement ------------------------------------------------------------


def step_engagement(state: EngagementState, d: float, kin: Kinematics) -> EngagementState:
    """Turn by ``d`` (rate limited), advance both agents, re-sense the prey.

    The desired image position ``y`` shifts by minus the executed turn so that
    the dragonfly's own rotation is not mistaken for prey motion.
    """
    if not kin.dt > 0:
        raise DomainError("dt must be positive")
    limit = kin.max_turn_rate * kin.dt
    turn = min(max(float(d), -limit), limit)
    s = state.copy()
    s.heading = _wrap(state.heading + turn)
    s.position = state.position + state.speed * kin.dt * np.array([math.cos(s.heading), math.sin(s.heading)])
    s.prey_position = state.prey_position + kin.dt * state.prey_velocity
    s.x = s.eye_position()
    s.y = state.y - turn
    s.t = state.t + kin.dt
    return s


TRAJECTORY_COLUMNS = (
    "t",
    "dragonfly_x",
    "dragonfly_y",
    "heading",
    "prey_x",
    "prey_y",
    "x_eye",
    "y_desired",
    "d",
    "sum_R",
)


@dataclass
class Trajectory:
    rows: list[tuple] = field(default_factory=list)
    intercepted: bool = False
    steps: int = 0
    final: EngagementState | None = None

    @property
    def array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))

    @property
    def turns(self) -> np.ndarray:
        return self.array[:, TRAJECTORY_COLUMNS.index("d")]


class _Pipeline:
    """Sense -> basis -> motor -> decode, either abstract or through the crossbar."""

    def __init__(self, config: TuningConfig, mode: str, sensor: SensorArray | None):
        if mode not in ("abstract", "crossbar"):
            raise ValueError(f"unknown pipeline {mode!r}")
        self.config = config
        self.mode = mode
        self.sensor = sensor or SensorArray.build(config)
        self.W = motor_weights(config)
        self.c = np.asarray(config.c)

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        """Turn and total motor drive; no drive means ``(0.0, 0.0)``."""
        g = proprio_response(y, self.config)
        if self.mode == "abstract":
            xs = self.sensor.sampled(x)
            f = np.zeros(len(self.config.a)) if math.isnan(xs) else visual_response(xs, self.config)
            R = motor_response(self.W, sensorimotor(f, g), self.config.beta)
            R_base = np.zeros_like(R)
        else:
            pixels = self.sensor.sense(x)
            raw = self.sensor.read(pixels, g)
            base = self.sensor.read(pixels, np.zeros(self.sensor.n_b))
            scale = self.config.beta / (self.sensor.offset_gain * self.config.kappa)
            R = motor_response(self.W, raw, scale)
            R_base = motor_response(self.W, base, scale)
        drive = float(np.maximum(R - R_base, 0.0).sum())
        try:
            return decode_turn_offset_corrected(R, R_base, self.c), drive
        except DecodeError:
            return 0.0, 0.0


def run_engagement(
    config: TuningConfig,
    kin: Kinematics,
    initial: EngagementState,
    max_steps: int = 2000,
    seed: int = 0,
    *,
    pipeline: str = "abstract",
    sensor: SensorArray | None = None,
    prey_turn_noise: float = 0.0,
) -> Trajectory:
    """Step the circuit until capture or ``max_steps``.

    ``prey_turn_noise`` (rad per sqrt(s)) rotates the prey velocity by seeded
    Gaussian increments; at 0 the run is fully deterministic. A step without
    motor drive (prey outside the field of view) holds the current heading.
    """
    if max_steps < 0:
        raise DomainError("max_steps must be non-negative")
    rng = np.random.default_rng(seed)
    run = _Pipeline(config, pipeline, sensor)
    traj = Trajectory()
    state = initial.copy()
    for step in range(max_steps):
        d, drive = run(state.x, state.y)
        traj.rows.append(
            (
                state.t,
                *state.position,
                state.heading,
                *state.prey_position,
                state.x,
                state.y,
                d,
                drive,
            )
        )
        state = step_engagement(state, d, kin)
        traj.steps = step + 1
        if prey_turn_noise > 0:
            phi = prey_turn_noise * math.sqrt(kin.dt) * rng.standard_normal()
            cs, sn = math.cos(phi), math.sin(phi)
            vx, vy = state.prey_velocity
            state.prey_velocity = np.array([cs * vx - sn * vy, sn * vx + cs * vy])
        if state.distance < kin.capture_radius:
            traj.intercepted = True
            break
    traj.final = state
    return traj


def crossing_scenario(kin: Kinematics, distance: float = 1.0, offset: float = 0.5) -> EngagementState:
    """Prey ``distance`` ahead and ``offset`` to the right, crossing leftwards.

    The prey moves at ``kin.prey_speed`` orthogonally to the dragonfly's
    initial heading. The desired image position starts at the initial image
    position, so the circuit works to hold the bearing.
    """
    return _scenario(kin, (distance, -offset), (0.0, kin.prey_speed))


def stationary_scenario(kin: Kinematics, distance: float = 1.0) -> EngagementState:
    """Motionless prey dead ahead."""
    return _scenario(kin, (distance, 0.0), (0.0, 0.0))


def receding_scenario(kin: Kinematics, distance: float = 1.0) -> EngagementState:
    """Prey dead ahead flying straight away at twice the dragonfly speed."""
    return _scenario(kin, (distance, 0.0), (2.0 * kin.dragonfly_speed, 0.0))


SCENARIOS = {"crossing": crossing_scenario, "stationary": stationary_scenario, "receding": receding_scenario}


def _scenario(kin: Kinematics, prey_position, prey_velocity) -> EngagementState:
    state = EngagementState(
        position=(0.0, 0.0),
        heading=0.0,
        speed=kin.dragonfly_speed,
        prey_position=prey_position,
        prey_velocity=prey_velocity,
    )
    state.y = state.x
    return state
