import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgfefet.errors import DomainError
from dgfefet.plasticity import (
    SpikeTraces,
    StdpParams,
    clip_weight,
    decay_traces,
    on_post_spike,
    on_pre_spike,
)

from oracles import pair_stdp


def trace_pair(dt, w, p, step=None):
    """Drive one pre/post pair through the trace rule and return the weight change."""
    traces = SpikeTraces.zeros(1, 1)
    if dt >= 0:
        traces = traces.spike(pre=[True])
        if dt > 0:
            traces = decay_traces(traces, dt, p)
        return on_post_spike(w, traces.x_pre[0], p)
    traces = traces.spike(post=[True])
    traces = decay_traces(traces, -dt, p)
    return on_pre_spike(w, traces.x_post[0], p)


@given(
    dt=st.floats(-100, 100, allow_nan=False),
    w=st.floats(0, 1),
)
@settings(max_examples=300, deadline=None)
def test_pair_matches_closed_form(dt, w):
    p = StdpParams()
    assert trace_pair(dt, w, p) == pytest.approx(pair_stdp(dt, w), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("mu", [0.0, 0.5, 2.0])
def test_exponents(mu):
    p = StdpParams(mu_plus=mu, mu_minus=mu, tau_plus=10.0, tau_minus=30.0)
    for dt in (-7.0, 3.0):
        got = trace_pair(dt, 0.3, p)
        want = pair_stdp(dt, 0.3, mu_plus=mu, mu_minus=mu, tau_plus=10.0, tau_minus=30.0)
        assert got == pytest.approx(want, rel=1e-12)


def test_signs_and_soft_bounds():
    p = StdpParams()
    assert on_post_spike(1.0, 1.0, p) == 0.0
    assert on_pre_spike(0.0, 1.0, p) == 0.0
    assert on_post_spike(0.2, 0.5, p) > 0
    assert on_pre_spike(0.2, 0.5, p) < 0


def test_decay_composes():
    p = StdpParams()
    t = SpikeTraces.zeros(3, 2).spike(pre=[True, False, True], post=[False, True])
    a = decay_traces(decay_traces(t, 2.0, p), 3.0, p)
    b = decay_traces(t, 5.0, p)
    np.testing.assert_allclose(a.x_pre, b.x_pre, rtol=1e-15)
    np.testing.assert_allclose(a.x_post, b.x_post, rtol=1e-15)
    assert b.x_pre[0] == pytest.approx(math.exp(-5 / 20))


def test_decay_needs_positive_dt():
    with pytest.raises(ValueError):
        decay_traces(SpikeTraces.zeros(1, 1), 0.0, StdpParams())


@pytest.mark.parametrize(
    "kw", [dict(a_plus=-1), dict(mu_minus=-0.5), dict(tau_plus=0.0)]
)
def test_param_domain(kw):
    with pytest.raises(DomainError):
        StdpParams(**kw)


def test_bounds_hold_under_random_updates():
    rng = np.random.default_rng(3)
    p = StdpParams(a_plus=0.5, a_minus=0.5)
    w = rng.random(10_000)
    for _ in range(20):
        x = rng.random(w.size)
        post = rng.random(w.size) < 0.5
        dw = np.where(post, on_post_spike(w, x, p), on_pre_spike(w, x, p))
        w = clip_weight(w + dw)
        assert w.min() >= 0.0 and w.max() <= 1.0


def test_literal_mode_differs_and_is_flagged():
    lit = StdpParams(literal=True)
    std = StdpParams()
    assert on_post_spike(0.5, 0.5, lit) != on_post_spike(0.5, 0.5, std)
    # printed depression branch has positive sign
    assert on_pre_spike(0.5, 0.5, lit) > 0


def test_hand_value_potentiation():
    # pre spike one time constant before the post spike
    assert on_post_spike(0.5, math.exp(-1), StdpParams()) == pytest.approx(1e-2 * 0.5 * math.exp(-1), rel=1e-15)
    assert on_post_spike(0.5, math.exp(-1), StdpParams()) == pytest.approx(1.839e-3, rel=1e-3)


def test_hand_value_depression():
    assert on_pre_spike(0.5, 1.0, StdpParams()) == pytest.approx(-5e-5, rel=1e-15)
