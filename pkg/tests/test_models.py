import math

import numpy as np
import pytest

from bondint.grids import MaturityGrid, ScenarioSet, TimeGrid
from bondint.models import (
    example21_columns,
    example21_maturity_grid,
    example21_second_moment,
    example22_bound,
    gen_example21,
    gen_example22_perturbed,
    iter_example21_blocks,
    iter_example22_blocks,
    node_maturities,
)
from bondint.stats import mc_mean_se, within_se


@pytest.fixture(scope="module")
def small_family():
    tg = TimeGrid.uniform(1.0, 64)
    scen = ScenarioSet(count=4096, seed=505)
    grid = example21_maturity_grid(20)
    return gen_example21(20, tg, grid, scen), tg, scen


def test_node_maturities_values():
    np.testing.assert_allclose(node_maturities(4), [0.0, 0.5, 2.0 / 3.0, 0.75])


def test_grid_appends_right_endpoint():
    grid = example21_maturity_grid(5)
    assert grid.points[0] == 0.0
    assert grid.points[-1] == 1.0
    assert grid.n_points == 6


def test_family_vanishes_at_right_endpoint(small_family):
    fam, _, _ = small_family
    assert np.all(fam.values[:, :, -1] == 0.0)


def test_node_path_closed_form(small_family):
    # before its jump a node path is t / i^2 exactly; at the first grid
    # time past the jump it is t_jump_cell / i^2 ... frozen at T_i / i^2
    # minus 1, evaluated on grid times
    fam, tg, scen = small_family
    i = 3
    col = fam.column(1.0 - 1.0 / i).values
    jumps = scen.exponentials(1, np.arange(1.0, 21.0) ** 2)[:, i - 1]
    t = tg.points
    inv = 1.0 / i**2
    expect = np.minimum(t[None, :], jumps[:, None]) * inv - (t[None, :] >= jumps[:, None])
    assert np.array_equal(col, expect)


def test_first_node_is_pure_drift_when_jump_is_late(small_family):
    fam, tg, scen = small_family
    jumps = scen.exponentials(1, np.arange(1.0, 21.0) ** 2)
    quiet = jumps[:, 0] > 1.0
    assert 0.2 < quiet.mean() < 0.5  # P = e^{-1} = 0.368
    col = fam.column(0.0).values  # x_1 = 0, weight 1/1^2
    assert np.array_equal(col[quiet], np.broadcast_to(tg.points, (quiet.sum(), tg.n_points)))


def test_second_moment_closed_form(small_family):
    fam, tg, _ = small_family
    for i in (1, 2, 4):
        target = example21_second_moment(i, tg.horizon)
        assert target == pytest.approx(1.0 - math.exp(-1.0 / i**2))
        samples = fam.column(1.0 - 1.0 / i).terminal ** 2
        assert within_se(samples, target)


def test_blocked_iteration_matches_materialized(small_family):
    fam, tg, scen = small_family
    grid = example21_maturity_grid(20)
    seen = 0
    for sl, block in iter_example21_blocks(20, tg, grid, scen):
        assert np.array_equal(block.values, fam.values[sl])
        seen += block.values.shape[0]
    assert seen == scen.count


def test_columns_interpolate_between_nodes(small_family):
    fam, tg, scen = small_family
    # x = 0.4 sits between x_1 = 0 and x_2 = 0.5 with weight 0.8
    cols = example21_columns(20, tg, scen, [0.4, 0.5])
    expect = 0.2 * fam.column(0.0).values + 0.8 * fam.column(0.5).values
    np.testing.assert_allclose(cols.values[:, :, 0], expect, rtol=0.0, atol=1e-15)
    assert np.array_equal(cols.values[:, :, 1], fam.column(0.5).values)


def test_perturbed_family_zeroes_tail_nodes(small_family):
    fam, _, _ = small_family
    k = 3
    pert = gen_example22_perturbed(fam, k)
    grid = fam.maturity_grid
    live = grid.points <= node_maturities(k)[-1] + 1e-12
    assert np.array_equal(pert.values[:, :, live], fam.values[:, :, live])
    # past x_{k+1} the truncated family is identically zero
    dead = grid.points >= node_maturities(k + 2)[-1] - 1e-12
    assert np.all(pert.values[:, :, dead] == 0.0)


def test_perturbed_streaming_matches_gen(small_family):
    fam, tg, scen = small_family
    k = 3
    pert = gen_example22_perturbed(fam, k)
    grid_k = MaturityGrid(np.concatenate([node_maturities(k + 1), [1.0]]), t_star=1.0)
    for sl, block in iter_example22_blocks(20, k, tg, grid_k, scen):
        for j, x in enumerate(grid_k.points):
            full = pert.values[sl, :, fam.maturity_grid.index_of(x)]
            assert np.array_equal(block.values[:, :, j], full)


def test_example22_bound_value():
    assert example22_bound(2, 1.0) == pytest.approx(1.0 - math.exp(-0.25))


def test_jump_block_rejects_uncovered_nodes():
    tg = TimeGrid.uniform(1.0, 8)
    grid = MaturityGrid(np.array([0.0, 0.5, 1.0]))  # missing x_3 .. x_5
    scen = ScenarioSet(count=8, seed=1)
    with pytest.raises(ValueError, match="node"):
        next(iter(iter_example21_blocks(5, tg, grid, scen)))
