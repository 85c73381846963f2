import numpy as np
import pytest

from bondint.grids import MaturityGrid, ScenarioSet, TimeGrid
from bondint.integration import (
    ConstWeight,
    DivergenceSuspected,
    GeneralizedStrategy,
    Leg,
    NOT_IN_DOMAIN,
    SimpleStrategy,
    TableWeight,
    admissibility_check,
    available_strategies,
    bank_position,
    combine_strategies,
    evaluate_functional,
    integrate_generalized,
    integrate_simple,
    leg,
    make_strategy,
    portfolio_value,
    register_strategy,
    scale_strategy,
)
from bondint.models import GaussianMarketParams, gen_gaussian_market
from bondint.paths import FamilyPaths, ProcessPaths


def lattice_price_family(rng, n_scen=4, n_steps=8, mats=(0.5, 1.0, 2.0)):
    """Random family whose values are multiples of 2^-13 in [0.8, 1.0).

    On this lattice every increment, weighted contribution with dyadic
    weights, and partial sum is an exact double, so integral identities
    can be asserted bitwise.
    """
    tg = TimeGrid.uniform(1.0, n_steps)
    mg = MaturityGrid(np.array(mats))
    ticks = rng.integers(6554, 8150, size=(n_scen, n_steps + 1, len(mats)))
    return FamilyPaths(ticks * 2.0**-13, tg, mg)


def dyadic_weights(rng, shape):
    return rng.integers(-32, 33, size=shape) * 2.0**-4


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def test_delta_integral_equals_price_increment(rng):
    fam = lattice_price_family(rng)
    H = SimpleStrategy((leg(1.0, 1.0),))
    y = integrate_simple(H, fam)
    increment = fam.values[:, :, 1] - fam.values[:, 0:1, 1]
    assert np.array_equal(y.values, increment)


def test_delta_integral_exact_on_market_prices():
    # real simulated discounted prices stay inside [0.8, 1.1], where
    # pairwise differences and their partial sums are exact
    params = GaussianMarketParams(
        sigma0=(0.012, 0.018), mean_reversion=(0.1, 1.4), risk_premium=(0.24, -0.18)
    )
    tg = TimeGrid.uniform(1.0, 32)
    mg = MaturityGrid(np.array([1.5, 2.0]))
    mkt = gen_gaussian_market(params, tg, mg, ScenarioSet(count=2000, seed=55))
    assert np.all(mkt.Pbar.values > 0.8)
    assert np.all(mkt.Pbar.values < 1.1)
    y = integrate_simple(SimpleStrategy((leg(2.0, 1.0),)), mkt.Pbar)
    increment = mkt.Pbar.values[:, :, 1] - mkt.Pbar.values[:, 0:1, 1]
    assert np.array_equal(y.values, increment)


def test_integral_starts_at_zero(rng):
    fam = lattice_price_family(rng)
    y = integrate_simple(SimpleStrategy((leg(0.5, 2.0), leg(1.0, -1.0))), fam)
    assert np.all(y.values[:, 0] == 0.0)


def test_linearity_bitwise_on_lattice(rng):
    for _ in range(100):
        fam = lattice_price_family(rng)
        w1 = dyadic_weights(rng, (4, 8))
        w2 = dyadic_weights(rng, (4, 8))
        h1 = SimpleStrategy((leg(0.5, TableWeight(w1)), leg(2.0, 0.5)))
        h2 = SimpleStrategy((leg(0.5, TableWeight(w2)),))
        a = 1.25  # dyadic scale keeps products exact
        lhs = integrate_simple(combine_strategies(scale_strategy(a, h1), h2), fam)
        rhs = a * np.asarray(integrate_simple(h1, fam).values) + integrate_simple(h2, fam).values
        assert np.array_equal(lhs.values, rhs)


def test_linearity_on_generic_draws(rng):
    tg = TimeGrid.uniform(1.0, 8)
    mg = MaturityGrid(np.array([0.5, 1.0]))
    for _ in range(100):
        fam = FamilyPaths(rng.normal(size=(4, 9, 2)), tg, mg)
        h1 = SimpleStrategy((leg(0.5, TableWeight(rng.normal(size=(4, 8)))),))
        h2 = SimpleStrategy((leg(1.0, TableWeight(rng.normal(size=(4, 8)))),))
        a = rng.normal()
        lhs = integrate_simple(combine_strategies(scale_strategy(a, h1), h2), fam)
        rhs = a * np.asarray(integrate_simple(h1, fam).values) + integrate_simple(h2, fam).values
        np.testing.assert_allclose(lhs.values, rhs, rtol=1e-12, atol=1e-12)


def test_zero_leg_is_a_no_op(rng):
    for _ in range(100):
        fam = lattice_price_family(rng)
        base = SimpleStrategy((leg(0.5, TableWeight(dyadic_weights(rng, (4, 8)))),))
        padded = combine_strategies(base, SimpleStrategy((leg(2.0, 0.0),)))
        assert np.array_equal(
            integrate_simple(base, fam).values, integrate_simple(padded, fam).values
        )


def test_stopping_commutes_with_integration(rng):
    tg = TimeGrid.uniform(1.0, 8)
    for _ in range(100):
        fam = lattice_price_family(rng)
        w = dyadic_weights(rng, (4, 8))
        stop = rng.integers(0, 9, size=4)
        gate = (np.arange(8)[None, :] < stop[:, None]).astype(float)
        stopped_weights = SimpleStrategy((leg(1.0, TableWeight(w * gate)),))
        plain = SimpleStrategy((leg(1.0, TableWeight(w)),))
        lhs = integrate_simple(stopped_weights, fam)
        rhs = integrate_simple(plain, fam).stopped(stop)
        assert np.array_equal(lhs.values, rhs.values)


def test_weight_validation(rng):
    fam = lattice_price_family(rng)
    with pytest.raises(ValueError):
        integrate_simple(SimpleStrategy((leg(0.5, TableWeight(np.full((4, 8), np.nan))),)), fam)
    with pytest.raises(ValueError, match="bound"):
        integrate_simple(
            SimpleStrategy((leg(0.5, 3.0),), bound=2.0), fam
        )
    with pytest.raises(ValueError, match="maturity"):
        integrate_simple(SimpleStrategy((leg(0.77, 1.0),)), fam)


def test_registry_round_trip():
    names = available_strategies()
    assert "example21" in names
    assert "table" in names
    with pytest.raises(ValueError, match="unknown strategy"):
        make_strategy("no-such-strategy")
    with pytest.raises(ValueError, match="already registered"):
        register_strategy("table", lambda: None)


def test_table_strategy_is_constant_in_n(rng):
    fam = lattice_price_family(rng)
    G = make_strategy("table", legs=((0.5, 1.0), (2.0, -0.25)))
    y, diag = integrate_generalized(G, fam, n_schedule=(2, 4, 8))
    assert diag.converged
    assert diag.distances == (0.0, 0.0)
    fixed = SimpleStrategy((leg(0.5, 1.0), leg(2.0, -0.25)))
    assert np.array_equal(y.values, integrate_simple(fixed, fam).values)


def test_divergence_raises(rng):
    fam = lattice_price_family(rng)

    def approximants(n):
        w = 0.0 if n <= 4 else 200.0 * n
        return SimpleStrategy((leg(0.5, ConstWeight(w)),))

    G = GeneralizedStrategy(name="blowup", approximants=approximants)
    with pytest.raises(DivergenceSuspected) as err:
        integrate_generalized(G, fam, n_schedule=(2, 4, 8, 16), cauchy_tol=0.05)
    assert err.value.trace  # diagnostics travel with the error


def test_interleaved_cauchy_sequences_share_the_limit(rng):
    # two approximant ladders of the same generalized strategy whose
    # mutual distances vanish produce nearby final integrals
    fam = lattice_price_family(rng)
    base_legs = (leg(0.5, 0.5), leg(1.0, 0.25))

    def fast(n):
        return SimpleStrategy(base_legs + (leg(2.0, ConstWeight(1.0 / n**2)),))

    def slow(n):
        return SimpleStrategy(base_legs + (leg(2.0, ConstWeight(1.0 / n)),))

    tol = 0.05
    y_fast, d_fast = integrate_generalized(
        GeneralizedStrategy("fast", fast), fam, n_schedule=(8, 16, 32), cauchy_tol=tol
    )
    y_slow, d_slow = integrate_generalized(
        GeneralizedStrategy("slow", slow), fam, n_schedule=(8, 16, 32), cauchy_tol=tol
    )
    assert d_fast.converged and d_slow.converged
    from bondint.emery import emery_distance_proxy

    assert emery_distance_proxy(y_fast, y_slow) < 2.0 * tol


def test_functional_pairing_in_domain():
    tg = TimeGrid.uniform(1.0, 2)
    mg = MaturityGrid(np.array([0.0, 1.0]))
    prefix = FamilyPaths(np.zeros((2, 3, 2)), tg, mg)
    G = make_strategy("example21")
    v = evaluate_functional(G, prefix, lambda x: (1.0 - x) ** 2, n_schedule=(50, 100, 200))
    assert isinstance(v, float)
    assert v == pytest.approx(1.0, abs=1e-9)

    out = evaluate_functional(G, prefix, lambda x: 1.0, n_schedule=(50, 100, 200))
    assert out is NOT_IN_DOMAIN


def test_functional_pairing_with_curve_array(rng):
    fam = lattice_price_family(rng)
    G = make_strategy("table", legs=((0.5, 2.0), (1.0, -1.0)))
    curve = np.array([0.3, 0.7, 0.1])
    v = evaluate_functional(G, fam, curve, n_schedule=(2, 4))
    assert v == pytest.approx(2.0 * 0.3 - 1.0 * 0.7)


def test_buy_and_hold_portfolio_bookkeeping():
    params = GaussianMarketParams(
        sigma0=(0.012, 0.018), mean_reversion=(0.1, 1.4), risk_premium=(0.24, -0.18)
    )
    tg = TimeGrid.uniform(1.0, 8)
    mg = MaturityGrid(np.array([1.5, 2.0]))
    mkt = gen_gaussian_market(params, tg, mg, ScenarioSet(count=50, seed=3))
    H = SimpleStrategy((leg(2.0, 1.0),))

    port = portfolio_value(1.0, H, mkt)
    expect = 1.0 + mkt.Pbar.values[:, :, 1] - mkt.Pbar.values[:, 0:1, 1]
    assert np.allclose(port.path.values, expect, rtol=1e-15)

    phi0 = bank_position(H, mkt)
    # self-financing split: integral = bank weight + bond value held
    recon = phi0.values + 1.0 * mkt.Pbar.values[:, :, 1]
    integral = integrate_simple(H, mkt.Pbar).values
    assert np.allclose(recon, integral, rtol=1e-15, atol=1e-15)
    assert np.allclose(phi0.values[:, 0], -mkt.Pbar.values[0, 0, 1], rtol=1e-15)


def test_admissibility_check_levels():
    params = GaussianMarketParams(
        sigma0=(0.012, 0.018), mean_reversion=(0.1, 1.4), risk_premium=(0.24, -0.18)
    )
    tg = TimeGrid.uniform(1.0, 8)
    mg = MaturityGrid(np.array([1.5, 2.0]))
    mkt = gen_gaussian_market(params, tg, mg, ScenarioSet(count=200, seed=8))
    H = SimpleStrategy((leg(2.0, 40.0),))  # large enough to breach a thin floor

    loose = admissibility_check(H, mkt, x=10.0)
    assert loose.ok
    tight = admissibility_check(H, mkt, x=1e-4)
    assert not tight.ok
    assert tight.worst_margin < 0.0
    y = integrate_simple(H, mkt.Pbar).values
    assert y[tight.scenario, tight.time_index] == pytest.approx(tight.worst_margin - 1e-4)
    with pytest.raises(ValueError):
        admissibility_check(H, mkt, x=0.0)
