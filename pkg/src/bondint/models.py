"""Model generators: a jump-martingale maturity family and a Gaussian bond market.

Two families drive the whole test bed.

* ``gen_example21`` builds the family indexed over [0, 1] whose node
  processes are the compensated single-jump martingales
  M^i_t = (t ^ T_i) / i^2 - 1{t >= T_i}, with T_i exponential of mean
  i^2 and node maturities x_i = 1 - 1/i; the family is extended by
  linear interpolation in maturity and vanishes at maturity 1.
  ``gen_example22_perturbed`` truncates it past a cutoff node, sharing
  the same scenario draws through the counter-based streams.

* ``gen_gaussian_market`` simulates a d-factor Gaussian forward-rate
  market with exponentially damped volatilities.  The joint law of the
  factor states, their time integrals and the driving Brownian motions
  is sampled exactly per step, so discounted bond prices deflated by
  the density process are discrete martingales up to Monte Carlo error
  only, with no time-discretisation bias.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import _kernels
from .grids import (
    GRID_TOL,
    STREAM_FACTORS,
    STREAM_JUMP_TIMES,
    MaturityGrid,
    ScenarioSet,
    TimeGrid,
    snap_index,
)
from .paths import FamilyPaths, ProcessPaths

__all__ = [
    "node_maturities",
    "example21_maturity_grid",
    "example21_second_moment",
    "example22_bound",
    "gen_example21",
    "gen_example22_perturbed",
    "iter_example21_blocks",
    "iter_example22_blocks",
    "example21_columns",
    "GaussianMarketParams",
    "BondMarket",
    "gen_gaussian_market",
    "extend_after_maturity",
    "forward_rates",
    "bond_vol",
    "integrated_bond_vol",
    "logpbar_increment_variance",
    "merton_projection_value",
    "zcb_call_closed_form",
]

_MAX_MATERIALIZED_CELLS = 2.5e8


# ---------------------------------------------------------------------------
# jump-martingale family


def node_maturities(n_max: int) -> np.ndarray:
    """Node maturities x_i = 1 - 1/i for i = 1..n_max."""
    i = np.arange(1, n_max + 1, dtype=np.float64)
    return 1.0 - 1.0 / i


def example21_maturity_grid(n_max: int, extra=()) -> MaturityGrid:
    """Maturity grid holding every node, the right endpoint 1, and extras."""
    pts = np.concatenate([node_maturities(n_max), [1.0], np.asarray(extra, dtype=np.float64)])
    return MaturityGrid(np.unique(pts), t_star=1.0)


def example21_second_moment(i: int, horizon: float) -> float:
    """E[(M^i_T)^2] = 1 - exp(-T / i^2)."""
    return 1.0 - math.exp(-horizon / float(i) ** 2)


def example22_bound(k: int, horizon: float) -> float:
    """Squared-norm bound 1 - exp(-T / k^2) for the truncated family."""
    return 1.0 - math.exp(-horizon / float(k) ** 2)


def _draw_jump_times(scen: ScenarioSet, block: int, n_max: int) -> np.ndarray:
    means = np.arange(1, n_max + 1, dtype=np.float64) ** 2
    return scen.block_exponentials(STREAM_JUMP_TIMES, block, means)


def _node_values(time_grid: TimeGrid, jump_times: np.ndarray) -> np.ndarray:
    n_max = jump_times.shape[1]
    inv_sq = 1.0 / np.arange(1, n_max + 1, dtype=np.float64) ** 2
    return _kernels.jump_node_values(time_grid.points, jump_times, inv_sq)


def _render(node_x: np.ndarray, node_vals: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Linear interpolation in maturity; exact copies on node hits."""
    n_scen, n_t = node_vals.shape[:2]
    out = np.empty((n_scen, n_t, targets.size))
    for m, x in enumerate(targets):
        j = int(np.searchsorted(node_x, x, side="right")) - 1
        j = min(max(j, 0), node_x.size - 2)
        if abs(node_x[j] - x) <= GRID_TOL:
            out[:, :, m] = node_vals[:, :, j]
        elif abs(node_x[j + 1] - x) <= GRID_TOL:
            out[:, :, m] = node_vals[:, :, j + 1]
        else:
            w = (x - node_x[j]) / (node_x[j + 1] - node_x[j])
            out[:, :, m] = (1.0 - w) * node_vals[:, :, j] + w * node_vals[:, :, j + 1]
    return out


def _check_node_coverage(maturity_grid: MaturityGrid, n_max: int):
    missing = []
    for i, x in enumerate(node_maturities(n_max), start=1):
        try:
            snap_index(maturity_grid.points, x, GRID_TOL, "node")
        except ValueError:
            missing.append(i)
    if missing:
        raise ValueError(
            f"maturity grid is missing family nodes for indices {missing[:8]}"
            f"{'...' if len(missing) > 8 else ''} (n_max={n_max})"
        )


def _jump_block(
    n_max: int,
    cutoff: int | None,
    time_grid: TimeGrid,
    maturity_grid: MaturityGrid,
    scen: ScenarioSet,
    block: int,
) -> FamilyPaths:
    jumps = _draw_jump_times(scen, block, n_max)
    if cutoff is None:
        vals = _node_values(time_grid, jumps)
        node_x = np.concatenate([node_maturities(n_max), [1.0]])
        node_vals = np.concatenate([vals, np.zeros(vals.shape[:2] + (1,))], axis=2)
    else:
        # Truncated family: equal to the base up to node k, zero from node
        # k+1 on, linear in between.  Draw the same jump columns so the
        # shared nodes carry bit-identical paths.
        vals = _node_values(time_grid, jumps[:, :cutoff])
        xs = node_maturities(n_max)
        node_x = np.concatenate([xs[:cutoff], [xs[cutoff], 1.0]])
        node_vals = np.concatenate([vals, np.zeros(vals.shape[:2] + (2,))], axis=2)
    rendered = _render(node_x, node_vals, maturity_grid.points)
    return FamilyPaths(rendered, time_grid, maturity_grid)


def iter_example21_blocks(n_max: int, time_grid: TimeGrid, maturity_grid: MaturityGrid, scen: ScenarioSet):
    """Yield (scenario slice, FamilyPaths block) pairs at fixed block width."""
    _check_node_coverage(maturity_grid, n_max)
    if maturity_grid.points[-1] > 1.0 + GRID_TOL:
        raise ValueError("family maturities live in [0, 1]")
    for b, sl in scen.block_slices():
        yield sl, _jump_block(n_max, None, time_grid, maturity_grid, scen, b)


def iter_example22_blocks(
    n_max: int, k: int, time_grid: TimeGrid, maturity_grid: MaturityGrid, scen: ScenarioSet
):
    if not 1 <= k < n_max:
        raise ValueError(f"cutoff k must satisfy 1 <= k < n_max, got k={k}, n_max={n_max}")
    # the truncated family is identically zero past node k+1, so only the
    # live nodes need to sit on the grid
    _check_node_coverage(maturity_grid, k + 1)
    if maturity_grid.points[-1] > 1.0 + GRID_TOL:
        raise ValueError("family maturities live in [0, 1]")
    for b, sl in scen.block_slices():
        yield sl, _jump_block(n_max, k, time_grid, maturity_grid, scen, b)


def _materialize(block_iter, time_grid, maturity_grid, scen) -> FamilyPaths:
    cells = scen.count * time_grid.n_points * maturity_grid.n_points
    if cells > _MAX_MATERIALIZED_CELLS:
        raise ValueError(
            f"family would hold {cells:.2e} cells; stream it with the block iterator instead"
        )
    out = np.empty((scen.count, time_grid.n_points, maturity_grid.n_points))
    for sl, fam in block_iter:
        out[sl] = fam.values
    return FamilyPaths(out, time_grid, maturity_grid)


def gen_example21(
    n_max: int, time_grid: TimeGrid, maturity_grid: MaturityGrid, scen: ScenarioSet
) -> FamilyPaths:
    """Materialise the jump-martingale family on the given grids.

    The maturity grid must contain every node x_i, i <= n_max (within
    grid tolerance); values at non-node maturities interpolate linearly
    between the bracketing nodes, with the process at maturity 1 being
    identically zero.
    """
    it = iter_example21_blocks(n_max, time_grid, maturity_grid, scen)
    return _materialize(it, time_grid, maturity_grid, scen)


def gen_example22_perturbed(base: FamilyPaths, k: int) -> FamilyPaths:
    """Truncation of the base family past node k.

    Maturities up to x_k copy the base columns bit-exactly, maturities
    from x_{k+1} on are zero, and maturities in between interpolate
    linearly between the column at x_k and zero.  Both x_k and x_{k+1}
    must be on the base grid (k < n_max of the base family).
    """
    if k < 1:
        raise ValueError("cutoff k must be >= 1")
    xs = base.maturity_grid.points
    x_k = 1.0 - 1.0 / k
    x_k1 = 1.0 - 1.0 / (k + 1)
    try:
        snap_index(xs, x_k, GRID_TOL, "node")
        snap_index(xs, x_k1, GRID_TOL, "node")
    except ValueError:
        raise ValueError(f"cutoff k={k} out of range for the base family grid") from None
    vals = np.zeros_like(base.values)
    keep = xs <= x_k + GRID_TOL
    vals[:, :, keep] = base.values[:, :, keep]
    between = (xs > x_k + GRID_TOL) & (xs < x_k1 - GRID_TOL)
    if between.any():
        col = base.column(x_k).values
        for m in np.flatnonzero(between):
            w = (xs[m] - x_k) / (x_k1 - x_k)
            vals[:, :, m] = (1.0 - w) * col
    return FamilyPaths(vals, base.time_grid, base.maturity_grid)


def example21_columns(
    n_max: int, time_grid: TimeGrid, scen: ScenarioSet, maturities
) -> FamilyPaths:
    """Assemble only the requested maturities of the family, streaming blocks.

    Intended for wide-scenario studies where the full node set would not
    fit in memory; the result is a FamilyPaths over just ``maturities``.
    """
    targets = MaturityGrid(np.unique(np.asarray(maturities, dtype=np.float64)), t_star=1.0)
    node_x = np.concatenate([node_maturities(n_max), [1.0]])
    out = np.empty((scen.count, time_grid.n_points, targets.n_points))
    for b, sl in scen.block_slices():
        jumps = _draw_jump_times(scen, b, n_max)
        vals = _node_values(time_grid, jumps)
        node_vals = np.concatenate([vals, np.zeros(vals.shape[:2] + (1,))], axis=2)
        out[sl] = _render(node_x, node_vals, targets.points)
    return FamilyPaths(out, time_grid, targets)


# ---------------------------------------------------------------------------
# Gaussian forward-rate market

_A_EPS = 1e-8


def _bfac(a: float, tau):
    """(1 - exp(-a tau)) / a with the a -> 0 limit tau."""
    tau = np.asarray(tau, dtype=np.float64)
    if a < _A_EPS:
        return tau.copy() if tau.ndim else float(tau)
    out = (1.0 - np.exp(-a * tau)) / a
    return out if tau.ndim else float(out)


def _int_b(a: float, tau: float) -> float:
    """Integral of _bfac(a, .) from 0 to tau."""
    if a < _A_EPS:
        return 0.5 * tau * tau
    return (tau - _bfac(a, tau)) / a


def _int_b_squared(a: float, tau: float) -> float:
    """Integral of _bfac(a, .)^2 from 0 to tau."""
    if a < _A_EPS:
        return tau**3 / 3.0
    return (tau - 2.0 * _bfac(a, tau) + _bfac(2.0 * a, tau)) / (a * a)


@dataclass(frozen=True)
class GaussianMarketParams:
    """Parameters of the d-factor Gaussian market.

    Forward-rate volatilities are sigma0[k] * exp(-a[k] (T - t)); the
    physical drift adds the market price of risk ``risk_premium`` on top
    of the no-arbitrage drift, and the initial forward curve is
    f(0, T) = f0_flat + f0_slope * T.
    """

    sigma0: tuple
    mean_reversion: tuple
    risk_premium: tuple
    f0_flat: float = 0.03
    f0_slope: float = 0.0

    def __post_init__(self):
        s = tuple(float(v) for v in np.atleast_1d(self.sigma0))
        a = tuple(float(v) for v in np.atleast_1d(self.mean_reversion))
        lam = tuple(float(v) for v in np.atleast_1d(self.risk_premium))
        if not (len(s) == len(a) == len(lam)) or len(s) == 0:
            raise ValueError("sigma0, mean_reversion and risk_premium need equal length >= 1")
        if any(v < 0.0 for v in s) or any(v < 0.0 for v in a):
            raise ValueError("volatilities and mean reversions must be non-negative")
        vals = s + a + lam + (self.f0_flat, self.f0_slope)
        if not all(np.isfinite(vals)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "sigma0", s)
        object.__setattr__(self, "mean_reversion", a)
        object.__setattr__(self, "risk_premium", lam)

    @property
    def n_factors(self) -> int:
        return len(self.sigma0)

    def f0(self, t):
        return self.f0_flat + self.f0_slope * np.asarray(t, dtype=np.float64)

    def f0_integral(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.f0_flat * t + 0.5 * self.f0_slope * t * t


@dataclass(frozen=True)
class BondMarket:
    """Simulated market: prices, discounted prices, bank account, short
    rate, martingale-measure density and the driving Brownian paths."""

    params: GaussianMarketParams
    time_grid: TimeGrid
    maturity_grid: MaturityGrid
    scenarios: ScenarioSet
    P: FamilyPaths
    Pbar: FamilyPaths
    bank: ProcessPaths
    short_rate: ProcessPaths
    density: ProcessPaths
    brownian: np.ndarray

    @property
    def n_scenarios(self) -> int:
        return self.scenarios.count


def _step_cholesky(a: float, sigma: float, dt: float) -> np.ndarray:
    """Lower Cholesky factor of the zero-mean step covariance of
    (OU state, its time integral, driving Brownian)."""
    if a < _A_EPS:
        v_xx = sigma * sigma * dt
        c_xy = 0.5 * sigma * sigma * dt * dt
        v_yy = sigma * sigma * dt**3 / 3.0
        c_xw = sigma * dt
        c_yw = 0.5 * sigma * dt * dt
    else:
        b1 = _bfac(a, dt)
        b2 = _bfac(2.0 * a, dt)
        v_xx = sigma * sigma * b2
        c_xy = sigma * sigma * (b1 - b2) / a
        v_yy = sigma * sigma * (dt - 2.0 * b1 + b2) / (a * a)
        c_xw = sigma * b1
        c_yw = sigma * (dt - b1) / a
    v_ww = dt
    ell = np.zeros((3, 3))
    ell[0, 0] = math.sqrt(v_xx)
    if ell[0, 0] > 0.0:
        ell[1, 0] = c_xy / ell[0, 0]
        ell[2, 0] = c_xw / ell[0, 0]
    r = v_yy - ell[1, 0] ** 2
    ell[1, 1] = math.sqrt(r) if r > 0.0 else 0.0
    if ell[1, 1] > 0.0:
        ell[2, 1] = (c_yw - ell[2, 0] * ell[1, 0]) / ell[1, 1]
    r = v_ww - ell[2, 0] ** 2 - ell[2, 1] ** 2
    ell[2, 2] = math.sqrt(r) if r > 0.0 else 0.0
    return ell


def _after_maturity_pairs(time_grid: TimeGrid, maturity_grid: MaturityGrid):
    """Yield (m, time index of x_m, first time index beyond x_m) for
    maturities that expire inside the horizon."""
    t = time_grid.points
    for m, x in enumerate(maturity_grid.points):
        beyond = int(np.searchsorted(t, x + GRID_TOL))
        if beyond >= t.size:
            continue
        try:
            idx = snap_index(t, x, GRID_TOL, "maturity")
        except ValueError:
            idx = int(np.argmin(np.abs(t - x)))
            warnings.warn(
                f"maturity {x!r} snapped to time node {t[idx]!r} for the after-maturity fill",
                stacklevel=3,
            )
        yield m, idx, beyond


def gen_gaussian_market(
    params: GaussianMarketParams,
    time_grid: TimeGrid,
    maturity_grid: MaturityGrid,
    scen: ScenarioSet,
) -> BondMarket:
    """Simulate the market exactly at grid times.

    Per factor k the state x_k (an OU process), its running integral and
    the Brownian driver are advanced with exact joint Gaussian steps.
    Prices follow the reconstitution formula

        P(t, T) = P(0,T)/P(0,t) * exp(-sum_k [B_k(T-t) x_k(t)
                                              + 0.5 B_k(T-t)^2 y_k(t)])

    with B_k(tau) = (1 - exp(-a_k tau))/a_k and deterministic
    y_k(t) = sigma_k^2 (1 - exp(-2 a_k t)) / (2 a_k).  The density
    Z_t = exp(-lambda . W_t - 0.5 |lambda|^2 t) makes deflated
    discounted prices exact discrete martingales.  Past its maturity a
    bond is rolled at the bank account: P(t, T) = B_t / B_T.
    """
    t = time_grid.points
    xs = maturity_grid.points
    n_pts, n_mat, n_fac = t.size, xs.size, params.n_factors
    scount = scen.count
    lam = np.asarray(params.risk_premium)
    sig = np.asarray(params.sigma0)
    mrev = np.asarray(params.mean_reversion)
    dt = np.diff(t)

    # deterministic ingredients
    chol = np.empty((n_pts - 1, n_fac, 3, 3))
    decay = np.empty((n_pts - 1, n_fac))
    bstep = np.empty((n_pts - 1, n_fac))
    for n in range(n_pts - 1):
        for k in range(n_fac):
            chol[n, k] = _step_cholesky(mrev[k], sig[k], dt[n])
            decay[n, k] = math.exp(-mrev[k] * dt[n]) if mrev[k] >= _A_EPS else 1.0
            bstep[n, k] = _bfac(mrev[k], dt[n])

    x_mean = np.empty((n_pts, n_fac))    # E[x_k(t_n)] under the physical measure
    ix_mean = np.empty((n_pts, n_fac))   # E[int_0^t x_k]
    yk = np.empty((n_pts, n_fac))        # y_k(t_n) = sigma^2 (1 - e^{-2 a t}) / (2 a)
    for k in range(n_fac):
        a, s, lmb = mrev[k], sig[k], lam[k]
        for n, tn in enumerate(t):
            b = _bfac(a, tn)
            x_mean[n, k] = 0.5 * s * s * b * b + s * lmb * b
            ix_mean[n, k] = 0.5 * s * s * _int_b_squared(a, tn) + s * lmb * _int_b(a, tn)
            yk[n, k] = s * s * _bfac(2.0 * a, tn)

    # B_k(x_m - t_n) on the valid wedge t_n <= x_m
    tau = xs[None, :] - t[:, None]
    valid = tau >= -GRID_TOL
    btau = np.zeros((n_fac, n_pts, n_mat))
    for k in range(n_fac):
        btau[k][valid] = _bfac(mrev[k], np.maximum(tau[valid], 0.0))

    log_p0_t = -params.f0_integral(t)
    log_p0_x = -params.f0_integral(xs)

    p_vals = np.empty((scount, n_pts, n_mat))
    bank_vals = np.empty((scount, n_pts))
    rate_vals = np.empty((scount, n_pts))
    dens_vals = np.empty((scount, n_pts))
    w_vals = np.empty((scount, n_pts, n_fac))

    lam_sq = float(lam @ lam)
    after = list(_after_maturity_pairs(time_grid, maturity_grid))

    for b, sl in scen.block_slices():
        width = sl.stop - sl.start
        z = scen.block_normals(STREAM_FACTORS, b, (n_pts - 1) * n_fac * 3)
        z = z.reshape(width, n_pts - 1, n_fac, 3)

        x0 = np.zeros((width, n_fac))
        i0 = np.zeros((width, n_fac))
        wpath = np.zeros((width, n_pts, n_fac))
        xpath = np.empty((width, n_pts, n_fac))
        ipath = np.empty((width, n_pts, n_fac))
        xpath[:, 0] = 0.0
        ipath[:, 0] = 0.0
        for n in range(n_pts - 1):
            for k in range(n_fac):
                eta = z[:, n, k] @ chol[n, k].T
                i0[:, k] += bstep[n, k] * x0[:, k] + eta[:, 1]
                x0[:, k] = decay[n, k] * x0[:, k] + eta[:, 0]
                wpath[:, n + 1, k] = wpath[:, n, k] + eta[:, 2]
            xpath[:, n + 1] = x0
            ipath[:, n + 1] = i0

        x_full = xpath + x_mean[None, :, :]
        ix_full = ipath + ix_mean[None, :, :]
        rate_vals[sl] = params.f0(t)[None, :] + x_full.sum(axis=2)
        log_bank = params.f0_integral(t)[None, :] + ix_full.sum(axis=2)
        bank_vals[sl] = np.exp(log_bank)
        dens_vals[sl] = np.exp(-(wpath @ lam) - 0.5 * lam_sq * t[None, :])
        w_vals[sl] = wpath

        log_p = np.empty((width, n_pts, n_mat))
        log_p[:] = log_p0_x[None, None, :] - log_p0_t[None, :, None]
        for k in range(n_fac):
            log_p -= btau[k][None, :, :] * x_full[:, :, k][:, :, None]
            log_p -= 0.5 * (btau[k] ** 2)[None, :, :] * yk[:, k][None, :, None]
        block_p = np.exp(log_p)
        for m, idx, beyond in after:
            block_p[:, beyond:, m] = bank_vals[sl][:, beyond:] / bank_vals[sl][:, idx][:, None]
        p_vals[sl] = block_p

    pbar_vals = p_vals / bank_vals[:, :, None]
    w_vals.setflags(write=False)
    return BondMarket(
        params=params,
        time_grid=time_grid,
        maturity_grid=maturity_grid,
        scenarios=scen,
        P=FamilyPaths(p_vals, time_grid, maturity_grid, is_price_family=True),
        Pbar=FamilyPaths(pbar_vals, time_grid, maturity_grid),
        bank=ProcessPaths(bank_vals, time_grid),
        short_rate=ProcessPaths(rate_vals, time_grid),
        density=ProcessPaths(dens_vals, time_grid),
        brownian=w_vals,
    )


def extend_after_maturity(market: BondMarket) -> BondMarket:
    """Re-impose the bank-roll convention P(t, T) = B_t / B_T for t > T.

    Idempotent: cells already following the convention are rewritten
    with identical values.  Discounted prices are refreshed from P.
    """
    p_vals = market.P.values.copy()
    bank = market.bank.values
    for m, idx, beyond in _after_maturity_pairs(market.time_grid, market.maturity_grid):
        p_vals[:, beyond:, m] = bank[:, beyond:] / bank[:, idx][:, None]
    pbar_vals = p_vals / bank[:, :, None]
    return BondMarket(
        params=market.params,
        time_grid=market.time_grid,
        maturity_grid=market.maturity_grid,
        scenarios=market.scenarios,
        P=FamilyPaths(p_vals, market.time_grid, market.maturity_grid, is_price_family=True),
        Pbar=FamilyPaths(pbar_vals, market.time_grid, market.maturity_grid),
        bank=market.bank,
        short_rate=market.short_rate,
        density=market.density,
        brownian=market.brownian,
    )


def forward_rates(market: BondMarket):
    """Forward rates -d log P / d maturity by central differences.

    Returns ``(f, short)`` where f[s][n][m] differentiates the log-price
    curve in maturity (one-sided at the edges) and the short-rate path
    interpolates f along the diagonal T = t_n, clamped to the maturity
    range.  Values where t_n > x_m differentiate the bank-roll extension
    and carry no forward-rate meaning.
    """
    xs = market.maturity_grid.points
    if xs.size < 2:
        raise ValueError("need at least two maturities to differentiate")
    if np.min(market.P.values) <= 0.0:
        raise ValueError("nonpositive price encountered")
    lp = np.log(market.P.values)
    f = np.empty_like(lp)
    f[:, :, 0] = -(lp[:, :, 1] - lp[:, :, 0]) / (xs[1] - xs[0])
    f[:, :, -1] = -(lp[:, :, -1] - lp[:, :, -2]) / (xs[-1] - xs[-2])
    if xs.size > 2:
        f[:, :, 1:-1] = -(lp[:, :, 2:] - lp[:, :, :-2]) / (xs[2:] - xs[:-2])[None, None, :]

    t = market.time_grid.points
    short = np.empty(lp.shape[:2])
    for n, tn in enumerate(t):
        y = min(max(tn, xs[0]), xs[-1])
        j = min(int(np.searchsorted(xs, y, side="right")) - 1, xs.size - 2)
        j = max(j, 0)
        w = (y - xs[j]) / (xs[j + 1] - xs[j])
        short[:, n] = (1.0 - w) * f[:, n, j] + w * f[:, n, j + 1]
    fam = FamilyPaths(f, market.time_grid, market.maturity_grid)
    return fam, ProcessPaths(short, market.time_grid)


# ---------------------------------------------------------------------------
# closed forms used as oracles and by the pricing module


def bond_vol(params: GaussianMarketParams, t: float, maturity: float) -> np.ndarray:
    """Log-price volatility vector of the bond with the given maturity."""
    tau = maturity - t
    if tau < 0.0:
        raise ValueError("bond already matured")
    return np.array(
        [-params.sigma0[k] * _bfac(params.mean_reversion[k], tau) for k in range(params.n_factors)]
    )


def integrated_bond_vol(params: GaussianMarketParams, t0: float, t1: float, maturity: float) -> np.ndarray:
    """Componentwise integral of the bond volatility over [t0, t1]."""
    if not t0 <= t1 <= maturity + GRID_TOL:
        raise ValueError("need t0 <= t1 <= maturity")
    out = np.empty(params.n_factors)
    for k in range(params.n_factors):
        a = params.mean_reversion[k]
        hi = _int_b(a, maturity - t0)
        lo = _int_b(a, max(maturity - t1, 0.0))
        out[k] = -params.sigma0[k] * (hi - lo)
    return out


def logpbar_increment_variance(params: GaussianMarketParams, t0: float, t1: float, maturity: float) -> float:
    """Variance of log Pbar(t1, T) - log Pbar(t0, T) under the pricing measure."""
    if not t0 <= t1 <= maturity + GRID_TOL:
        raise ValueError("need t0 <= t1 <= maturity")
    var = 0.0
    for k in range(params.n_factors):
        a = params.mean_reversion[k]
        hi = _int_b_squared(a, maturity - t0)
        lo = _int_b_squared(a, max(maturity - t1, 0.0))
        var += params.sigma0[k] ** 2 * (hi - lo)
    return var


def merton_projection_value(params: GaussianMarketParams, horizon: float, maturity: float) -> float:
    """Growth-optimal log-utility value restricted to one tradable bond:
    integral of (v(t).lambda)^2 / (2 |v(t)|^2) over [0, horizon]."""
    nodes, weights = np.polynomial.legendre.leggauss(64)
    ts = 0.5 * horizon * (nodes + 1.0)
    lam = np.asarray(params.risk_premium)
    total = 0.0
    for tt, ww in zip(ts, weights):
        v = bond_vol(params, float(tt), maturity)
        vv = float(v @ v)
        if vv <= 0.0:
            continue
        total += ww * (float(v @ lam)) ** 2 / (2.0 * vv)
    return 0.5 * horizon * total


def zcb_call_closed_form(
    params: GaussianMarketParams, option_expiry: float, bond_maturity: float, strike: float
) -> float:
    """Time-0 price of a call on P(T_o, T_b), strike K, paid at T_o."""
    if not 0.0 < option_expiry < bond_maturity:
        raise ValueError("need 0 < option expiry < bond maturity")
    var = 0.0
    for k in range(params.n_factors):
        a = params.mean_reversion[k]
        bspread = _bfac(a, bond_maturity - option_expiry)
        var += (params.sigma0[k] * bspread) ** 2 * _bfac(2.0 * a, option_expiry)
    p_b = math.exp(-params.f0_integral(bond_maturity))
    p_o = math.exp(-params.f0_integral(option_expiry))
    if var <= 0.0:
        return max(p_b - strike * p_o, 0.0)
    s = math.sqrt(var)
    d1 = math.log(p_b / (strike * p_o)) / s + 0.5 * s
    d2 = d1 - s
    return p_b * float(ndtr(d1)) - strike * p_o * float(ndtr(d2))
