"""The two kernel lanes must agree bitwise on shared inputs."""

import numpy as np
import pytest

from bondint import _kernels as K


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_running_sign_weights_reference(rng):
    d = rng.normal(size=(50, 30))
    h = K.running_sign_weights_numpy(d)
    assert np.all(np.abs(h) == 1.0)
    assert np.all(h[:, 0] == 1.0)
    # h_k must equal the sign of the accumulated integral before step k
    running = np.zeros(50)
    for k in range(30):
        expect = np.where(running >= 0.0, 1.0, -1.0)
        assert np.array_equal(h[:, k], expect)
        running += h[:, k] * d[:, k]


def test_capped_sup_stat_reference():
    contrib = np.array([[0.5, -0.2, 0.4], [2.0, -3.0, 0.0]])
    got = K.capped_sup_stat_numpy(contrib)
    np.testing.assert_array_equal(got, [0.7, 1.0])


def test_jump_node_values_reference():
    times = np.array([0.0, 0.5, 1.0])
    jump_times = np.array([[0.75]])
    inv_sq = np.array([1.0])
    got = K.jump_node_values_numpy(times, jump_times, inv_sq)
    np.testing.assert_array_equal(got[0, :, 0], [0.0, 0.5, 0.75 - 1.0])


@pytest.mark.skipif(not K.USE_NUMBA, reason="numba lane inactive")
def test_lanes_agree_bitwise(rng):
    d = 0.01 * rng.normal(size=(300, 64))
    assert np.array_equal(K.running_sign_weights(d), K.running_sign_weights_numpy(d))

    contrib = 0.05 * rng.normal(size=(300, 64))
    assert np.array_equal(K.capped_sup_stat(contrib), K.capped_sup_stat_numpy(contrib))

    times = np.linspace(0.0, 1.0, 33)
    idx = np.arange(1.0, 21.0)
    jt = rng.exponential(idx**2, size=(300, 20))
    inv = idx**-2.0
    assert np.array_equal(
        K.jump_node_values(times, jt, inv), K.jump_node_values_numpy(times, jt, inv)
    )
