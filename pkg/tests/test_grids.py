import numpy as np
import pytest

from bondint.grids import (
    GRID_TOL,
    SCENARIO_BLOCK,
    STREAM_TEST,
    MaturityGrid,
    ScenarioSet,
    TimeGrid,
    snap_index,
)


def test_uniform_time_grid():
    tg = TimeGrid.uniform(1.0, 4)
    np.testing.assert_allclose(tg.points, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert tg.n_steps == 4
    assert tg.n_points == 5
    assert tg.horizon == 1.0
    np.testing.assert_allclose(tg.dt, 0.25)


def test_time_grid_rejects_bad_points():
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 0.5, 0.25]))
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.1, 0.5, 1.0]))


def test_snap_index_tolerance():
    pts = np.array([0.0, 0.5, 1.0])
    assert snap_index(pts, 0.5) == 1
    assert snap_index(pts, 0.5 + 0.5 * GRID_TOL) == 1
    with pytest.raises(ValueError, match="not on the grid"):
        snap_index(pts, 0.4)


def test_maturity_grid_t_star_defaults_to_last_point():
    mg = MaturityGrid(np.array([0.5, 1.0, 2.0]))
    assert mg.t_star == 2.0
    assert mg.index_of(1.0) == 1
    assert mg.nearest_index(0.9) == 1


def test_maturity_grid_range_checks():
    with pytest.raises(ValueError, match="t_star"):
        MaturityGrid(np.array([0.5, 2.0]), t_star=1.0)
    with pytest.raises(ValueError):
        MaturityGrid(np.array([-0.5, 1.0]))


def test_scenario_seed_range():
    with pytest.raises(ValueError):
        ScenarioSet(count=10, seed=-1)
    with pytest.raises(ValueError):
        ScenarioSet(count=10, seed=2**63)
    with pytest.raises(ValueError):
        ScenarioSet(count=0, seed=1)


def test_block_slices_cover_count_once():
    scen = ScenarioSet(count=SCENARIO_BLOCK + 17, seed=3)
    slices = list(scen.block_slices())
    assert [b for b, _ in slices] == [0, 1]
    assert slices[0][1] == slice(0, SCENARIO_BLOCK)
    assert slices[1][1] == slice(SCENARIO_BLOCK, SCENARIO_BLOCK + 17)


def test_blockwise_draws_match_whole_run():
    # regenerating any block in isolation must reproduce the same bits
    scen = ScenarioSet(count=SCENARIO_BLOCK + 100, seed=99)
    whole = scen.normals(STREAM_TEST, 3)
    for b, sl in scen.block_slices():
        block = scen.block_normals(STREAM_TEST, b, 3)
        assert np.array_equal(whole[sl], block)


def test_subset_draws_are_prefixes():
    big = ScenarioSet(count=2000, seed=5)
    small = big.subset(slice(0, 700))
    u_big = big.uniforms(STREAM_TEST, 2)
    u_small = small.uniforms(STREAM_TEST, 2)
    assert np.array_equal(u_big[:700], u_small)


def test_uniforms_strictly_inside_unit_interval():
    u = ScenarioSet(count=5000, seed=11).uniforms(STREAM_TEST, 4)
    assert np.all(u > 0.0)
    assert np.all(u < 1.0)


def test_streams_are_independent():
    scen = ScenarioSet(count=100, seed=7)
    a = scen.uniforms(1, 1)
    b = scen.uniforms(2, 1)
    assert not np.array_equal(a, b)


def test_exponential_mean_matches_scale():
    scen = ScenarioSet(count=200_000, seed=21)
    means = np.array([1.0, 4.0])
    draws = scen.exponentials(STREAM_TEST, means)
    assert np.all(draws > 0.0)
    got = draws.mean(axis=0)
    se = draws.std(axis=0) / np.sqrt(scen.count)
    assert np.all(np.abs(got - means) < 3.0 * se)
