import numpy as np
import pytest

from bondint.grids import MaturityGrid, TimeGrid
from bondint.paths import FamilyPaths, PredictableSet, ProcessPaths
from bondint.serialize import load_paths, save_paths, write_csv


@pytest.fixture
def tg():
    return TimeGrid.uniform(1.0, 4)


def test_process_paths_shape_and_terminal(tg):
    vals = np.arange(10.0).reshape(2, 5)
    p = ProcessPaths(vals, tg)
    assert p.n_scenarios == 2
    np.testing.assert_array_equal(p.terminal, [4.0, 9.0])
    np.testing.assert_array_equal(p.increments(), np.ones((2, 4)))


def test_process_paths_are_frozen(tg):
    p = ProcessPaths(np.zeros((2, 5)), tg)
    with pytest.raises(ValueError):
        p.values[0, 0] = 1.0


def test_process_paths_reject_nan_and_bad_shape(tg):
    with pytest.raises(ValueError):
        ProcessPaths(np.full((2, 5), np.nan), tg)
    with pytest.raises(ValueError):
        ProcessPaths(np.zeros((2, 4)), tg)


def test_stopped_freezes_values_after_index(tg):
    vals = np.cumsum(np.ones((3, 5)), axis=1)
    p = ProcessPaths(vals, tg)
    stop = np.array([1, 3, 0])
    s = p.stopped(stop)
    np.testing.assert_array_equal(s.values[0], [1.0, 2.0, 2.0, 2.0, 2.0])
    np.testing.assert_array_equal(s.values[1], [1.0, 2.0, 3.0, 4.0, 4.0])
    np.testing.assert_array_equal(s.values[2], [1.0, 1.0, 1.0, 1.0, 1.0])


def test_process_arithmetic(tg):
    a = ProcessPaths(np.ones((2, 5)), tg)
    b = ProcessPaths(2.0 * np.ones((2, 5)), tg)
    np.testing.assert_array_equal((a + b).values, 3.0)
    np.testing.assert_array_equal((b - a).values, 1.0)
    np.testing.assert_array_equal((a * 5.0).values, 5.0)


def test_family_column_lookup(tg):
    mg = MaturityGrid(np.array([0.5, 1.0]))
    vals = np.random.default_rng(0).normal(size=(3, 5, 2))
    fam = FamilyPaths(vals, tg, mg)
    np.testing.assert_array_equal(fam.column(1.0).values, vals[:, :, 1])
    assert fam.column_index(0.5) == 0
    with pytest.raises(ValueError, match="maturity"):
        fam.column(0.7)
    np.testing.assert_array_equal(fam.terminal_slice(), vals[:, -1, :])


def test_price_family_invariants(tg):
    mg = MaturityGrid(np.array([0.5, 1.0]))
    vals = np.ones((2, 5, 2))
    fam = FamilyPaths(vals, tg, mg, is_price_family=True)
    assert fam.is_price_family

    bad = vals.copy()
    bad[0, 2, 0] = -0.1  # prices must stay positive
    with pytest.raises(ValueError):
        FamilyPaths(bad, tg, mg, is_price_family=True)

    bad = vals.copy()
    bad[:, 2, 0] = 0.9  # t == x entry must equal 1
    with pytest.raises(ValueError):
        FamilyPaths(bad, tg, mg, is_price_family=True)


def test_predictable_set_algebra(tg):
    a = PredictableSet(np.zeros((2, 4)), tg)
    b = PredictableSet(np.ones((2, 4)), tg)
    assert np.all((a | b).indicator == 1.0)
    assert np.all((a & b).indicator == 0.0)
    full = PredictableSet.full(tg, 2)
    assert np.all(full.indicator == 1.0)


def test_save_load_roundtrip_is_bit_exact(tmp_path, tg):
    mg = MaturityGrid(np.array([0.5, 1.0]))
    rng = np.random.default_rng(42)
    fam = FamilyPaths(rng.normal(size=(6, 5, 2)), tg, mg)
    path = tmp_path / "fam.paths"
    save_paths(path, fam, seed=42, model="test")
    loaded, header = load_paths(path)
    assert isinstance(loaded, FamilyPaths)
    assert np.array_equal(loaded.values, fam.values)
    np.testing.assert_array_equal(loaded.time_grid.points, tg.points)
    np.testing.assert_array_equal(loaded.maturity_grid.points, mg.points)
    assert header["seed"] == 42
    assert header["model"] == "test"

    proc = ProcessPaths(rng.normal(size=(6, 5)), tg)
    path2 = tmp_path / "proc.paths"
    save_paths(path2, proc)
    loaded2, _ = load_paths(path2)
    assert isinstance(loaded2, ProcessPaths)
    assert np.array_equal(loaded2.values, proc.values)


def test_load_rejects_foreign_bytes(tmp_path):
    path = tmp_path / "junk.paths"
    path.write_bytes(b"not a path file at all")
    with pytest.raises(ValueError, match="magic"):
        load_paths(path)


def test_write_csv_long_form(tmp_path, tg):
    mg = MaturityGrid(np.array([0.5, 1.0]))
    fam = FamilyPaths(np.zeros((2, 5, 2)), tg, mg)
    out = tmp_path / "fam.csv"
    write_csv(out, fam)
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("scenario,t,")
    assert len(lines) == 1 + 2 * 5
