import math

import numpy as np
import pytest

from bondint.grids import MaturityGrid, ScenarioSet, TimeGrid
from bondint.models import (
    GaussianMarketParams,
    bond_vol,
    extend_after_maturity,
    forward_rates,
    gen_gaussian_market,
    integrated_bond_vol,
    logpbar_increment_variance,
    merton_projection_value,
    zcb_call_closed_form,
)
from bondint.stats import within_se

DEFAULT = GaussianMarketParams(
    sigma0=(0.012, 0.018),
    mean_reversion=(0.1, 1.4),
    risk_premium=(0.24, -0.18),
    f0_flat=0.03,
)


@pytest.fixture(scope="module")
def market():
    tg = TimeGrid.uniform(1.0, 16)
    mg = MaturityGrid(np.array([0.25, 0.5, 1.5, 2.0]), t_star=2.0)
    return gen_gaussian_market(DEFAULT, tg, mg, ScenarioSet(count=20_000, seed=31))


def test_params_validation():
    with pytest.raises(ValueError):
        GaussianMarketParams(sigma0=(0.01,), mean_reversion=(0.1, 0.2), risk_premium=(0.0,))
    with pytest.raises(ValueError):
        GaussianMarketParams(sigma0=(-0.01,), mean_reversion=(0.1,), risk_premium=(0.0,))


def test_initial_curve_is_exact(market):
    p0 = np.exp(-DEFAULT.f0_integral(market.maturity_grid.points))
    assert np.array_equal(market.P.values[:, 0, :], np.broadcast_to(p0, (market.n_scenarios, 4)))
    assert np.all(market.bank.values[:, 0] == 1.0)
    assert np.allclose(market.short_rate.values[:, 0], 0.03, atol=1e-14)
    assert market.P.is_price_family


def test_density_is_one_without_risk_premium():
    params = GaussianMarketParams(sigma0=(0.02,), mean_reversion=(0.3,), risk_premium=(0.0,))
    tg = TimeGrid.uniform(1.0, 4)
    mg = MaturityGrid(np.array([1.0, 2.0]))
    mkt = gen_gaussian_market(params, tg, mg, ScenarioSet(count=100, seed=2))
    assert np.all(mkt.density.values == 1.0)


def test_zero_vol_market_is_deterministic():
    params = GaussianMarketParams(
        sigma0=(0.0, 0.0), mean_reversion=(0.1, 1.4), risk_premium=(0.0, 0.0),
        f0_flat=0.03, f0_slope=0.01,
    )
    tg = TimeGrid.uniform(0.5, 4)
    mg = MaturityGrid(np.array([0.75, 1.0]))
    mkt = gen_gaussian_market(params, tg, mg, ScenarioSet(count=16, seed=9))
    t = tg.points
    for j, x in enumerate(mg.points):
        expect = np.exp(-(params.f0_integral(x) - params.f0_integral(t)))
        assert np.allclose(mkt.P.values[:, :, j], expect[None, :], rtol=1e-14)
    assert np.allclose(mkt.bank.values, np.exp(params.f0_integral(t))[None, :], rtol=1e-14)


def test_deflated_discounted_prices_are_martingales(market):
    z = market.density.values
    pbar = market.Pbar.values
    for j in range(market.maturity_grid.n_points):
        start = pbar[0, 0, j]
        for n in (4, 8, 16):
            assert within_se(z[:, n] * pbar[:, n, j] - start, 0.0, n_se=4.0)


def test_martingale_density_has_unit_mean(market):
    assert within_se(market.density.terminal, 1.0, n_se=4.0)
    assert np.all(market.density.values > 0.0)


def test_after_maturity_bonds_roll_at_the_bank(market):
    t = market.time_grid.points
    bank = market.bank.values
    for x in (0.25, 0.5):
        j = market.maturity_grid.index_of(x)
        idx = market.time_grid.index_of(x)
        expect = bank[:, idx + 1 :] / bank[:, idx][:, None]
        assert np.array_equal(market.P.values[:, idx + 1 :, j], expect)
        # discounted, the rolled bond is constant: increments at rounding level
        dpbar = np.diff(market.Pbar.values[:, idx:, j], axis=1)
        assert np.max(np.abs(dpbar)) < 1e-14
    assert np.all(t[market.time_grid.index_of(0.5) :][None, :] >= 0.5)


def test_extend_after_maturity_is_idempotent(market):
    ext = extend_after_maturity(market)
    assert np.array_equal(ext.P.values, market.P.values)
    assert np.array_equal(ext.Pbar.values, market.Pbar.values)


def test_forward_rates_recover_flat_curve(market):
    f, short = forward_rates(market)
    # at t = 0 the curve is deterministic and flat
    assert np.allclose(f.values[:, 0, :], 0.03, atol=1e-12)
    assert np.allclose(short.values[:, 0], 0.03, atol=1e-12)


def test_forward_rates_recover_sloped_curve_exactly():
    # sigma = 0 keeps log P quadratic in maturity: interior central
    # differences are exact, the one-sided edges carry a slope * h / 2 bias
    params = GaussianMarketParams(
        sigma0=(0.0,), mean_reversion=(0.0,), risk_premium=(0.0,),
        f0_flat=0.02, f0_slope=0.015,
    )
    tg = TimeGrid.uniform(0.5, 4)
    mg = MaturityGrid(np.array([0.6, 0.8, 1.0]))
    mkt = gen_gaussian_market(params, tg, mg, ScenarioSet(count=8, seed=4))
    f, _ = forward_rates(mkt)
    expect = 0.02 + 0.015 * mg.points
    assert np.allclose(f.values[:, :, 1], expect[1], atol=1e-12)
    half_cell = 0.015 * 0.2 / 2.0
    assert np.allclose(f.values[:, :, 0], expect[0] + half_cell, atol=1e-12)
    assert np.allclose(f.values[:, :, 2], expect[2] - half_cell, atol=1e-12)


def test_logpbar_variance_oracle_without_mean_reversion():
    # a = 0: Var[log Pbar(t, T)] = sigma^2 (T^2 t - T t^2 + t^3 / 3)
    sigma = 0.02
    params = GaussianMarketParams(sigma0=(sigma,), mean_reversion=(0.0,), risk_premium=(0.0,))
    tg = TimeGrid.uniform(1.0, 8)
    mg = MaturityGrid(np.array([1.5, 2.0]))
    scen = ScenarioSet(count=40_000, seed=77)
    mkt = gen_gaussian_market(params, tg, mg, scen)
    lp = np.log(mkt.Pbar.values[:, :, 1])
    big_t = 2.0
    for t in (0.5, 1.0):
        n = tg.index_of(t)
        oracle = sigma**2 * (big_t**2 * t - big_t * t**2 + t**3 / 3.0)
        sample = np.var(lp[:, n])
        assert abs(sample / oracle - 1.0) < 4.0 * math.sqrt(2.0 / scen.count)
        # the closed-form increment variance integrates the same quantity
        assert logpbar_increment_variance(params, 0.0, t, big_t) == pytest.approx(oracle)


def test_integrated_vol_matches_riemann_sum():
    ts = np.linspace(0.2, 0.7, 20_001)
    mid = 0.5 * (ts[:-1] + ts[1:])
    dt = np.diff(ts)
    for maturity in (1.0, 2.0):
        riemann = sum(bond_vol(DEFAULT, float(t), maturity) * d for t, d in zip(mid, dt))
        closed = integrated_bond_vol(DEFAULT, 0.2, 0.7, maturity)
        np.testing.assert_allclose(closed, riemann, rtol=1e-7)


def test_merton_projection_bounds():
    lam = np.asarray(DEFAULT.risk_premium)
    complete = 0.5 * float(lam @ lam) * 1.0
    one_bond = merton_projection_value(DEFAULT, 1.0, 2.0)
    assert 0.0 < one_bond < complete


def test_zcb_call_price_matches_monte_carlo():
    tg = TimeGrid.uniform(1.0, 16)
    mg = MaturityGrid(np.array([1.5, 2.0]))
    scen = ScenarioSet(count=50_000, seed=13)
    mkt = gen_gaussian_market(DEFAULT, tg, mg, scen)
    strike = 0.95
    payoff = np.maximum(mkt.Pbar.values[:, -1, 1] - strike / mkt.bank.terminal, 0.0)
    samples = mkt.density.terminal * payoff
    oracle = zcb_call_closed_form(DEFAULT, 1.0, 2.0, strike)
    assert within_se(samples, oracle, n_se=4.0)


def test_zcb_call_degenerate_cases():
    with pytest.raises(ValueError):
        zcb_call_closed_form(DEFAULT, 2.0, 1.0, 0.9)
    flat = GaussianMarketParams(sigma0=(0.0,), mean_reversion=(0.0,), risk_premium=(0.0,))
    intrinsic = zcb_call_closed_form(flat, 1.0, 2.0, 0.9)
    assert intrinsic == pytest.approx(
        max(math.exp(-0.06) - 0.9 * math.exp(-0.03), 0.0)
    )
