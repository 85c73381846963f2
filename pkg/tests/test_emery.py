import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bondint.emery import (
    ConstantControl,
    PreviousIncrementSign,
    RandomSigns,
    RunningIntegralSign,
    check_negligible,
    continuity_profile,
    default_dictionary,
    emery_distance_proxy,
    emery_proxy,
    sup_seminorm,
)
from bondint.grids import MaturityGrid, TimeGrid
from bondint.paths import FamilyPaths, PredictableSet, ProcessPaths


def proc(values):
    values = np.asarray(values, dtype=np.float64)
    return ProcessPaths(values, TimeGrid.uniform(1.0, values.shape[1] - 1))


def test_control_admissibility():
    with pytest.raises(ValueError, match="admissible"):
        ConstantControl(1.5)
    ConstantControl(-1.0)  # boundary is fine


def test_sup_seminorm_known_value():
    p = proc([[0.0, 3.0, -4.0], [0.0, 1.0, 1.0]])
    # per-scenario sup of Y^2: 16 and 1; mean 8.5
    assert sup_seminorm(p) == pytest.approx(np.sqrt(8.5))
    assert sup_seminorm(p, stop_index=1) == pytest.approx(np.sqrt(5.0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stopped_seminorm_never_exceeds_full(seed):
    rng = np.random.default_rng(seed)
    p = proc(rng.normal(size=(5, 9)))
    stop = int(rng.integers(0, 9))
    assert sup_seminorm(p, stop_index=stop) <= sup_seminorm(p) + 1e-15


def test_proxy_zero_for_constant_paths():
    p = proc(np.ones((4, 6)))
    assert emery_proxy(p) == 0.0


def test_proxy_is_capped_at_one():
    p = proc([[0.0, 50.0, 100.0]])
    assert emery_proxy(p) == 1.0


def test_proxy_monotone_increments_match_terminal():
    # all increments share one sign, so every unit control attains the
    # same capped statistic and the proxy equals E[1 ^ |Y_T|]
    vals = np.cumsum(np.full((3, 5), 0.1), axis=1)
    vals = np.concatenate([np.zeros((3, 1)), vals], axis=1)
    p = proc(vals)
    assert emery_proxy(p) == pytest.approx(0.5)


def test_sign_control_beats_constant_on_alternating_paths():
    inc = np.tile([0.4, -0.4], 8)
    vals = np.concatenate([[0.0], np.cumsum(inc)])[None, :]
    p = proc(vals)
    const_only = emery_proxy(p, [ConstantControl(1.0)])
    with_signs = emery_proxy(p, [ConstantControl(1.0), PreviousIncrementSign()])
    assert const_only == pytest.approx(0.4)
    assert with_signs == 1.0


def test_running_sign_pushes_integral_from_zero():
    # increments 0.3, -0.6, 0.15: the running integral flips negative
    # after step 1, so the control flips too and the last increment
    # deepens the excursion instead of cancelling it
    p = proc([[0.0, 0.3, -0.3, -0.15]])
    h = RunningIntegralSign().weights(p.values)
    assert np.array_equal(h, [[1.0, 1.0, -1.0]])
    assert emery_proxy(p, [RunningIntegralSign()]) == pytest.approx(0.45)
    assert emery_proxy(p, [ConstantControl(1.0)]) == pytest.approx(0.3)


def test_random_signs_are_reproducible():
    vals = np.random.default_rng(5).normal(size=(10, 8))
    a = RandomSigns(3, seed=101).weights(vals)
    b = RandomSigns(3, seed=101).weights(vals)
    c = RandomSigns(4, seed=101).weights(vals)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all(np.abs(a) == 1.0)


def test_default_dictionary_composition():
    controls = default_dictionary(n_random=3)
    assert len(controls) == 7
    assert isinstance(controls[0], ConstantControl)


def test_distance_proxy_is_symmetric_and_reflexive():
    rng = np.random.default_rng(77)
    a = proc(rng.normal(size=(6, 7)))
    b = proc(rng.normal(size=(6, 7)))
    assert emery_distance_proxy(a, a) == 0.0
    assert emery_distance_proxy(a, b) == pytest.approx(emery_distance_proxy(b, a))


def test_distance_proxy_grid_mismatch():
    a = proc(np.zeros((2, 4)))
    b = ProcessPaths(np.zeros((2, 5)), TimeGrid.uniform(1.0, 4))
    with pytest.raises(ValueError, match="grids"):
        emery_distance_proxy(a, b)


def test_negligible_set_detection():
    tg = TimeGrid.uniform(1.0, 4)
    mg = MaturityGrid(np.array([0.5, 1.0]))
    vals = np.zeros((3, 5, 2))
    vals[:, 3:, 0] = 1.0  # a move on step 2 -> 3
    fam = FamilyPaths(vals, tg, mg)

    quiet = PredictableSet((np.arange(4)[None, :] < 2).astype(float).repeat(3, axis=0), tg)
    assert check_negligible(quiet, fam)

    noisy = PredictableSet(np.ones((3, 4)), tg)
    report = check_negligible(noisy, fam)
    assert not report.ok
    assert report.worst == 1.0
    assert report.examples[0][1] == 2  # the flagged step
    assert report.n_violations == 3


def test_continuity_profile_shrinks_with_offset():
    tg = TimeGrid.uniform(1.0, 16)
    mg = MaturityGrid(np.array([0.5, 0.6, 0.7, 0.9]))
    rng = np.random.default_rng(12)
    base = np.cumsum(rng.normal(scale=0.05, size=(200, 17, 1)), axis=1)
    wiggle = np.cumsum(rng.normal(scale=0.02, size=(200, 17, 4)), axis=1)
    fam = FamilyPaths(base + mg.points[None, None, :] * wiggle, tg, mg)
    profile = continuity_profile(fam, 0.5, [0.4, 0.2, 0.1])
    dxs = [dx for dx, _ in profile]
    ds = [d for _, d in profile]
    assert dxs == [0.4, 0.2, 0.1]
    assert ds[0] >= ds[1] >= ds[2]


def test_continuity_profile_snapping_and_range():
    tg = TimeGrid.uniform(1.0, 4)
    mg = MaturityGrid(np.array([0.5, 0.75, 1.0]))
    fam = FamilyPaths(np.zeros((2, 5, 3)), tg, mg)
    with pytest.warns(UserWarning, match="snapped"):
        continuity_profile(fam, 0.5, [0.2])
    with pytest.raises(ValueError, match="outside"):
        continuity_profile(fam, 0.5, [2.0])
