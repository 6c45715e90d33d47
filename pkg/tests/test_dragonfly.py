import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgfefet.dragonfly import (
    EngagementState,
    Kinematics,
    SensorArray,
    TuningConfig,
    crossing_scenario,
    decode_turn,
    decode_turn_offset_corrected,
    motor_response,
    motor_weights,
    proprio_response,
    receding_scenario,
    run_engagement,
    sensorimotor,
    sensorimotor_fefet,
    stationary_scenario,
    step_engagement,
    tuning_weight,
    visual_response,
)
from dgfefet.errors import DecodeError, DimensionError, DomainError, VbgRangeError

from oracles import triple_loop_response, w_quadrature

DEG = math.pi / 180

SMALL = TuningConfig(
    a=(-0.4, 0.0, 0.4),
    b=(-0.2, 0.0, 0.2),
    c=(-0.6, 0.0, 0.6),
    sigma_r=0.3,
    sigma_g=0.2,
    sigma_m=0.35,
)


@pytest.fixture(scope="module")
def sensor():
    return SensorArray.build(TuningConfig())


def test_closed_form_matches_quadrature():
    W = motor_weights(SMALL)
    Q = w_quadrature(SMALL.a, SMALL.b, SMALL.c, SMALL.sigma_r, SMALL.sigma_g, SMALL.sigma_m)
    np.testing.assert_allclose(W, Q, rtol=1e-6)


def test_reflection_symmetry():
    W = motor_weights(SMALL)
    np.testing.assert_allclose(W, W[::-1, ::-1, ::-1], rtol=1e-12)


def test_motor_response_matches_triple_loop(rng):
    cfg = TuningConfig()
    W = motor_weights(cfg)
    S = rng.random(W.shape[:2])
    np.testing.assert_allclose(motor_response(W, S, 0.7), triple_loop_response(W, S, 0.7), rtol=1e-12)


def test_tuning_curves():
    cfg = TuningConfig()
    f = visual_response(cfg.a[3], cfg)
    assert f[3] == 1.0 and f.argmax() == 3
    g = proprio_response(0.0, cfg)
    assert g[4] == 1.0
    assert tuning_weight(0.1, 0.1, 0.2, kappa=2.0) == 2.0
    with pytest.raises(DomainError):
        tuning_weight(0.1, 0.1, 0.2, kappa=0.0)


@given(st.floats(-20 * DEG, 20 * DEG), st.floats(-15 * DEG, 15 * DEG))
@settings(max_examples=40, deadline=None)
def test_decoded_turn_tracks_difference(x, y):
    cfg = TuningConfig()
    R = motor_response(motor_weights(cfg), sensorimotor(visual_response(x, cfg), proprio_response(y, cfg)), 1.0)
    assert decode_turn(R, cfg.c) == pytest.approx(x - y, abs=3 * DEG)


@pytest.mark.parametrize("gamma", [0.25, 0.5, 1.0])
def test_gain_scaling_is_multiplicative(gamma):
    cfg = TuningConfig()
    W = motor_weights(cfg)
    f, g = visual_response(0.2, cfg), proprio_response(-0.1, cfg)
    R1 = motor_response(W, sensorimotor(f, g), 1.0)
    Rg = motor_response(W, sensorimotor(f, gamma * g), 1.0)
    np.testing.assert_allclose(Rg, gamma * R1, rtol=1e-10)
    assert abs(decode_turn(Rg, cfg.c) - decode_turn(R1, cfg.c)) < 1e-10


def test_decode_errors():
    with pytest.raises(DecodeError):
        decode_turn(np.zeros(3), [0, 1, 2])
    with pytest.raises(DimensionError):
        decode_turn(np.ones(3), [0, 1])
    assert decode_turn_offset_corrected([2.0, 3.0], [1.0, 1.0], [0.0, 1.0]) == pytest.approx(2 / 3)


def test_fefet_sensorimotor_matches_product(sensor):
    cfg = TuningConfig()
    x = sensor.pixels[400]
    g = proprio_response(0.1, cfg)
    S_hw = sensorimotor_fefet(sensor.sense(x), sensor, g)
    S = sensorimotor(visual_response(x, cfg), g)
    np.testing.assert_allclose(S_hw, S, rtol=1e-9, atol=1e-12)


def test_raw_read_carries_offset(sensor):
    pixels = sensor.sense(0.0)
    base = sensor.read(pixels, np.zeros(sensor.n_b))
    assert base.min() > 0  # k(0) = 1, not 0


def test_backgate_mapping_domain(sensor):
    with pytest.raises(VbgRangeError):
        sensor.map_g(np.full(sensor.n_b, 1.5))
    with pytest.raises(DimensionError):
        sensor.map_g(np.ones(3))


def test_eye_quantisation(sensor):
    assert sensor.sense(2.0).sum() == 0  # outside the field of view
    assert math.isnan(sensor.sampled(2.0))
    x = 0.1234
    assert abs(sensor.sampled(x) - x) <= 0.5 * (sensor.pixels[1] - sensor.pixels[0]) + 1e-15


def test_step_clamps_turn_and_updates_desired():
    kin = Kinematics()
    s0 = stationary_scenario(kin)
    s1 = step_engagement(s0, 5.0, kin)
    assert s1.heading == pytest.approx(0.1)
    assert s1.y == pytest.approx(s0.y - 0.1)
    assert s1.t == pytest.approx(0.01)
    np.testing.assert_allclose(s1.position, 0.03 * np.array([math.cos(0.1), math.sin(0.1)]))


def test_eye_position_relative_to_heading():
    s = EngagementState((0, 0), math.pi / 2, 1.0, (0, 1), (0, 0))
    assert s.x == pytest.approx(0.0)
    s = EngagementState((0, 0), 0.0, 1.0, (1, 1), (0, 0))
    assert s.x == pytest.approx(math.pi / 4)


def test_kinematics_domain():
    with pytest.raises(DomainError):
        Kinematics(dt=0.0)
    with pytest.raises(DomainError):
        Kinematics(prey_speed=-1.0)


@pytest.mark.parametrize("pipeline", ["abstract", "crossbar"])
@pytest.mark.parametrize("scenario", [crossing_scenario, stationary_scenario])
def test_interception(pipeline, scenario, sensor):
    kin = Kinematics()
    traj = run_engagement(TuningConfig(), kin, scenario(kin), 2000, pipeline=pipeline, sensor=sensor)
    assert traj.intercepted and traj.steps < 2000
    assert traj.final.distance < kin.capture_radius


def test_pipelines_agree_step_by_step(sensor):
    kin = Kinematics()
    runs = [
        run_engagement(TuningConfig(), kin, crossing_scenario(kin), 2000, pipeline=p, sensor=sensor)
        for p in ("abstract", "crossbar")
    ]
    a, b = (r.turns for r in runs)
    assert a.shape == b.shape
    assert np.max(np.abs(a - b)) < 1e-6


def test_receding_prey_escapes(sensor):
    kin = Kinematics()
    traj = run_engagement(TuningConfig(), kin, receding_scenario(kin), 300, sensor=sensor)
    assert not traj.intercepted and traj.steps == 300


def test_prey_noise_is_seeded(sensor):
    kin = Kinematics()
    run = lambda seed: run_engagement(  # noqa: E731
        TuningConfig(), kin, crossing_scenario(kin), 50, seed, sensor=sensor, prey_turn_noise=2.0
    ).array
    assert np.array_equal(run(1), run(1))
    assert not np.array_equal(run(1), run(2))


def test_tuning_config_domain():
    with pytest.raises(DomainError):
        TuningConfig(a=())
    with pytest.raises(DomainError):
        TuningConfig(sigma_r=-1.0)
    with pytest.raises(DomainError):
        TuningConfig(c=(4.0,))
