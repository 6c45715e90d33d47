import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgfefet.crossbar import (
    CrossbarArray,
    GainMap,
    apply_fault_mask,
    effective_matvec,
    effective_weight_matrix,
    matvec,
    read_column_sum,
)
from dgfefet.errors import DimensionError, DomainError, VbgRangeError

from oracles import brute_effective_matvec, brute_matvec


def _random_array(rng, n_rows, n_cols):
    w = rng.random((n_rows, n_cols))
    faults = rng.random((n_rows, n_cols)) < 0.3
    vbg = rng.uniform(-1, 3, n_cols)
    return CrossbarArray(w, vbg, faults)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_matvec_matches_double_loop(n_rows, n_cols, seed):
    rng = np.random.default_rng(seed)
    arr = _random_array(rng, n_rows, n_cols)
    x = rng.uniform(0, 2, n_rows)
    got = matvec(arr, x)
    want = brute_matvec(arr.w, arr.faults, arr.col_vbg, x)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-30)


def test_effective_matvec_matches_double_loop(rng):
    arr = _random_array(rng, 9, 6)
    gain = GainMap(0.25, (0.75, 1.75))
    x = rng.random(9)
    np.testing.assert_allclose(
        effective_matvec(arr, gain, x), brute_effective_matvec(arr.w, arr.faults, arr.col_vbg, x, 0.25), rtol=1e-12
    )


def test_faults_mask_readout_only(rng):
    arr = CrossbarArray(rng.random((4, 3)))
    mask = np.zeros((4, 3), bool)
    mask[:, 1] = True
    faulted = apply_fault_mask(arr, mask)
    assert np.array_equal(faulted.w, arr.w)
    assert np.all(faulted.conductance_matrix()[:, 1] == 0)
    assert np.all(effective_weight_matrix(faulted, GainMap())[:, 1] == 0)
    assert not arr.faults.any()  # original untouched


def test_column_sum_counts_rows():
    arr = CrossbarArray.uniform(7, 8, w=1.0)
    per_row = read_column_sum(arr, [0], 2.0)
    for n in range(1, 8):
        np.testing.assert_allclose(read_column_sum(arr, range(n), 2.0), n * per_row, rtol=1e-14)


def test_read_column_sum_bad_row():
    with pytest.raises(IndexError):
        read_column_sum(CrossbarArray.uniform(3, 2), [3], 1.0)


def test_shape_checks():
    arr = CrossbarArray.uniform(3, 2)
    with pytest.raises(DimensionError):
        matvec(arr, np.ones(4))
    with pytest.raises(DimensionError):
        apply_fault_mask(arr, np.zeros((2, 3), bool))
    with pytest.raises(DimensionError):
        arr.set_col_vbg(np.zeros(3))
    with pytest.raises(DimensionError):
        CrossbarArray(np.zeros(3))


def test_weight_domain():
    with pytest.raises(DomainError):
        CrossbarArray(np.full((2, 2), 1.5))


def test_backgate_range_enforced():
    arr = CrossbarArray.uniform(2, 2)
    with pytest.raises(VbgRangeError):
        arr.set_col_vbg([0.0, 4.0])
    with pytest.raises(VbgRangeError):
        CrossbarArray(np.zeros((2, 2)), col_vbg=[-2.0, 0.0])


def test_gain_map_roundtrip_and_clamp():
    gain = GainMap.for_device(0.25, (-1.0, 3.0))
    assert gain.k_range == (0.75, 1.75)
    np.testing.assert_allclose(gain.k(gain.vbg([0.8, 1.0, 1.5])), [0.8, 1.0, 1.5], rtol=1e-14)
    assert gain.vbg(5.0) == pytest.approx(3.0)
    with pytest.raises(VbgRangeError):
        gain.check(2.0)


def test_gain_map_must_contain_unity():
    with pytest.raises(DomainError):
        GainMap(0.25, (1.1, 2.0))


def test_cell_view():
    arr = CrossbarArray(np.array([[0.25]]))
    assert arr.cell(0, 0).g0 == pytest.approx(1e-6 + 0.25 * 9e-6)


def test_copy_is_independent():
    arr = CrossbarArray.uniform(2, 2, 0.5)
    c = arr.copy()
    c.w[0, 0] = 0.0
    assert arr.w[0, 0] == 0.5


def test_gain_hand_value():
    arr = CrossbarArray(np.full((2, 2), 0.4), col_vbg=[0.0, 2.0])
    eff = effective_weight_matrix(arr, GainMap(0.25, (0.75, 1.75)))
    np.testing.assert_allclose(eff[:, 1], 1.5 * 0.4, rtol=1e-15)
    np.testing.assert_allclose(eff[:, 0], 0.4, rtol=1e-15)
