"""Utility maximization, duality checks, super-replication and hedging.

The primal side maximizes sample-average expected utility over
proportional positions in finitely many bonds, parameterized linearly in
a small state basis; positivity of wealth is built into the
parameterization and nested maturity sets reuse embedded solutions so
the value net is monotone by construction.  The dual side is explicit
through the pricing-density path.  Super-replication prices claims under
the pricing measure (or over a configured family of equivalent measures
when the tradable set does not span the factors), and a regression
scheme extracts an approximate hedge from backward projections.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.random import Generator, Philox
from scipy import optimize

from .grids import STREAM_OPTIMIZER, _stream_key
from .integration import Leg, SimpleStrategy, TableWeight, integrate_simple
from .models import BondMarket, integrated_bond_vol
from .stats import mc_mean_se

__all__ = [
    "UtilitySpec",
    "log_utility",
    "power_utility",
    "custom_utility",
    "conjugate_value",
    "dual_samples",
    "dual_value",
    "budget_root",
    "WealthResult",
    "optimal_terminal_wealth",
    "GapReport",
    "conjugacy_gap",
    "OptimizerConfig",
    "PrimalResult",
    "primal_finite_bonds",
    "primal_nested",
    "ClaimSpec",
    "make_forward_claim",
    "make_zcb_call",
    "superrep_price",
    "superrep_report",
    "SuperrepReport",
    "orthogonal_drift_densities",
    "SuperhedgeResult",
    "superhedge_strategy",
]

_INADA_LO_X = 1e-8
_INADA_HI_X = 1e8
_INADA_LO_THRESHOLD = 10.0
_INADA_HI_THRESHOLD = 0.1


# ---------------------------------------------------------------------------
# utilities and conjugates


@dataclass(frozen=True)
class UtilitySpec:
    """Utility on the positive half-line with Inada marginals.

    ``u``, ``marginal`` and ``inverse_marginal`` act elementwise on
    arrays; wealth below 0 values to -inf.  ``power_p`` carries the
    exponent for the power family, None otherwise.
    """

    kind: str
    u: Callable
    marginal: Callable
    inverse_marginal: Callable
    power_p: float | None = None

    def __post_init__(self):
        if self.kind not in ("log", "power", "custom"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        xs = np.geomspace(1e-6, 1e6, 121)
        vals = np.asarray(self.u(xs), dtype=np.float64)
        if not np.all(np.diff(vals) > 0.0):
            raise ValueError("utility must be strictly increasing")
        slopes = np.diff(vals) / np.diff(xs)
        if not np.all(np.diff(slopes) < 0.0):
            raise ValueError("utility must be strictly concave")
        m_lo = float(self.marginal(_INADA_LO_X))
        m_hi = float(self.marginal(_INADA_HI_X))
        if not m_lo > _INADA_LO_THRESHOLD:
            raise ValueError(f"marginal at {_INADA_LO_X} must exceed {_INADA_LO_THRESHOLD}")
        if not m_hi < _INADA_HI_THRESHOLD:
            raise ValueError(f"marginal at {_INADA_HI_X} must fall below {_INADA_HI_THRESHOLD}")

    def evaluate(self, wealth):
        """Utility with the negative-wealth convention U(x < 0) = -inf."""
        w = np.asarray(wealth, dtype=np.float64)
        out = np.full(w.shape, -np.inf)
        ok = w > 0.0
        out[ok] = self.u(w[ok])
        zero = w == 0.0
        if np.any(zero):
            with np.errstate(divide="ignore"):
                out[zero] = self.u(np.full(int(zero.sum()), 0.0))
        return out


def log_utility() -> UtilitySpec:
    return UtilitySpec("log", np.log, lambda x: 1.0 / np.asarray(x, dtype=np.float64),
                       lambda y: 1.0 / np.asarray(y, dtype=np.float64))


def power_utility(p: float = 0.5) -> UtilitySpec:
    if p >= 1.0 or p == 0.0:
        raise ValueError("power exponent must lie in (-inf, 1) excluding 0")

    def u(x):
        return np.power(np.asarray(x, dtype=np.float64), p) / p

    def marginal(x):
        return np.power(np.asarray(x, dtype=np.float64), p - 1.0)

    def inverse(y):
        return np.power(np.asarray(y, dtype=np.float64), 1.0 / (p - 1.0))

    return UtilitySpec("power", u, marginal, inverse, power_p=p)


def custom_utility(u: Callable, marginal: Callable, inverse_marginal: Callable | None = None) -> UtilitySpec:
    if inverse_marginal is None:
        def inverse_marginal(y):
            arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
            out = np.empty_like(arr)
            for i, yi in enumerate(arr):
                out[i] = optimize.brentq(
                    lambda x: float(marginal(x)) - yi, 1e-12, 1e12, xtol=1e-14, rtol=1e-12
                )
            return out if np.ndim(y) else float(out[0])

    return UtilitySpec("custom", u, marginal, inverse_marginal)


def conjugate_value(utility: UtilitySpec, y: float) -> float:
    """Convex conjugate V(y) = sup_x [U(x) - x y]."""
    if y <= 0.0:
        raise ValueError("conjugate argument must be > 0")
    if utility.kind == "log":
        return -math.log(y) - 1.0
    if utility.kind == "power":
        p = utility.power_p
        return (1.0 - p) / p * y ** (p / (p - 1.0))
    # custom: golden-section on log wealth after a coarse bracket scan
    def neg(s):
        x = math.exp(s)
        return -(float(utility.u(x)) - x * y)

    ss = np.linspace(-25.0, 25.0, 201)
    vals = [neg(s) for s in ss]
    j = int(np.argmin(vals))
    j = min(max(j, 1), len(ss) - 2)
    res = optimize.minimize_scalar(
        neg, bracket=(ss[j - 1], ss[j], ss[j + 1]), method="golden",
        options={"xtol": 1e-10},
    )
    return -float(res.fun)


def dual_samples(y: float, market: BondMarket, utility: UtilitySpec) -> np.ndarray:
    """Per-scenario V(y Z_T)."""
    if y <= 0.0:
        raise ValueError("dual argument must be > 0")
    z = market.density.terminal
    if utility.kind == "log":
        return -np.log(y * z) - 1.0
    if utility.kind == "power":
        p = utility.power_p
        return (1.0 - p) / p * (y * z) ** (p / (p - 1.0))
    return np.array([conjugate_value(utility, float(v)) for v in y * z])


def dual_value(y: float, market: BondMarket, utility: UtilitySpec) -> float:
    """Monte Carlo dual objective E[V(y Z_T)]."""
    return float(np.mean(dual_samples(y, market, utility)))


def budget_root(x: float, market: BondMarket, utility: UtilitySpec) -> float:
    """Root y of E[Z_T I(y Z_T)] = x.

    Log utility collapses to y = 1/x; otherwise bisection on
    [1e-10, 1e10] at relative tolerance 1e-10.
    """
    if x <= 0.0:
        raise ValueError("initial capital must be > 0")
    if utility.kind == "log":
        return 1.0 / x
    z = market.density.terminal

    def g(y):
        return float(np.mean(z * utility.inverse_marginal(y * z))) - x

    lo, hi = 1e-10, 1e10
    if not (g(lo) > 0.0 > g(hi)):
        raise ValueError("budget equation not bracketed on [1e-10, 1e10]")
    return float(optimize.bisect(g, lo, hi, rtol=1e-10, maxiter=500))


@dataclass(frozen=True)
class WealthResult:
    x: float
    y_hat: float
    terminal_wealth: np.ndarray
    u_estimate: float
    u_se: float
    budget_mean: float
    budget_se: float


def optimal_terminal_wealth(x: float, market: BondMarket, utility: UtilitySpec) -> WealthResult:
    """Candidate optimal terminal wealth I(y_hat Z_T) with its utility
    value and the budget check E[Z_T X_hat] ~ x."""
    y_hat = budget_root(x, market, utility)
    z = market.density.terminal
    x_hat = np.asarray(utility.inverse_marginal(y_hat * z), dtype=np.float64)
    u_mean, u_se = mc_mean_se(utility.evaluate(x_hat))
    b_mean, b_se = mc_mean_se(z * x_hat)
    return WealthResult(x, y_hat, x_hat, u_mean, u_se, b_mean, b_se)


@dataclass(frozen=True)
class GapReport:
    gap: float
    dual_inf: float
    y_at_inf: float
    tolerance: float
    mc_se: float
    grid_bound: float

    @property
    def ok(self) -> bool:
        return self.gap <= self.tolerance


def conjugacy_gap(
    x: float, y_grid, market: BondMarket, utility: UtilitySpec, u_estimate: float,
    extra_se: float = 0.0,
) -> GapReport:
    """|u_estimate - inf_y [v(y) + x y]| with an MC + grid-resolution
    tolerance.  ``extra_se`` folds in the standard error of u_estimate."""
    ys = np.asarray(y_grid, dtype=np.float64)
    if ys.ndim != 1 or ys.size < 3 or np.any(ys <= 0.0):
        raise ValueError("y grid must be 1-D, positive, with at least 3 points")
    ys = np.sort(ys)
    objective = np.empty(ys.size)
    best_se = 0.0
    for j, y in enumerate(ys):
        samples = dual_samples(float(y), market, utility) + x * y
        objective[j] = float(np.mean(samples))
        if j == 0 or objective[j] < objective[:j].min():
            best_se = float(np.std(samples, ddof=1) / math.sqrt(samples.size))
    j = int(np.argmin(objective))
    lo = objective[j - 1] - objective[j] if j > 0 else objective[j + 1] - objective[j]
    hi = objective[j + 1] - objective[j] if j < ys.size - 1 else lo
    grid_bound = float(max(lo, hi, 0.0))
    gap = abs(u_estimate - objective[j])
    tol = 3.0 * math.hypot(best_se, extra_se) + grid_bound
    return GapReport(gap, float(objective[j]), float(ys[j]), tol, best_se, grid_bound)


# ---------------------------------------------------------------------------
# finite-bond primal


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 2
    max_iter: int = 200
    opt_scenarios: int = 16384
    gtol: float = 1e-7
    restart_scale: float = 0.5
    features: tuple = ("const", "t", "t2", "rate", "logp")
    seed_salt: int = 0


@dataclass(frozen=True)
class PrimalResult:
    maturities: tuple
    value: float
    value_se: float
    strategy: SimpleStrategy
    theta: np.ndarray
    feature_names: tuple
    saa_value: float
    wealth: np.ndarray
    trace: tuple = field(default=(), repr=False)


def _resolve_features(names, maturities) -> tuple:
    """Expand the 'logp' shorthand into one feature per traded bond."""
    resolved = []
    for name in names:
        if name == "logp":
            resolved.extend(f"logp:{m:g}" for m in maturities)
        else:
            resolved.append(name)
    return tuple(resolved)


def _basis_features(market: BondMarket, resolved_names) -> list:
    """Per-step state features, each of shape (n_scen, n_steps).

    Time-only features are broadcast views; only the rate and log-price
    features occupy scenario-shaped memory.
    """
    t = market.time_grid.points[:-1]
    shape = (market.n_scenarios, t.size)
    feats = []
    for name in resolved_names:
        if name == "const":
            feats.append(np.broadcast_to(np.float64(1.0), shape))
        elif name == "t":
            feats.append(np.broadcast_to(t, shape))
        elif name == "t2":
            feats.append(np.broadcast_to(t * t, shape))
        elif name == "rate":
            feats.append(market.short_rate.values[:, :-1])
        elif name.startswith("logp:"):
            col = market.Pbar.column(float(name[5:])).values
            feats.append(np.log(col[:, :-1]))
        else:
            raise ValueError(f"unknown feature {name!r}")
    return feats


def _relative_returns(market: BondMarket, maturities) -> np.ndarray:
    """Per-bond discounted relative returns, shape (n_bonds, n_scen, n_steps)."""
    cols = []
    for mat in maturities:
        c = market.Pbar.column(mat).values
        cols.append(c[:, 1:] / c[:, :-1] - 1.0)
    return np.stack(cols)


def _position_fractions(theta_row, feats) -> np.ndarray:
    """pi = theta_row . features, shape (n_scen, n_steps).

    Zero coefficients are skipped, so embedding a solution with extra
    zero-weighted features reproduces its positions bit for bit.
    """
    pi = np.zeros(feats[0].shape)
    for b, f in enumerate(feats):
        if theta_row[b] != 0.0:
            pi += theta_row[b] * f
    return pi


def _wealth_factors(theta, feats, rets) -> np.ndarray:
    """Per-step growth factors 1 + sum_j pi_j R_j, shape (n_scen, n_steps)."""
    g = np.ones(rets.shape[1:])
    for j in range(rets.shape[0]):
        g += _position_fractions(theta[j], feats) * rets[j]
    return g


def _primal_objective(theta_flat, feats, rets, x, utility, shape):
    """Negative sample-average utility and its gradient in theta."""
    theta = theta_flat.reshape(shape)
    g = _wealth_factors(theta, feats, rets)
    gmin = float(g.min())
    if gmin <= 1e-9:
        return 1e6 * (1.0 - min(gmin, 0.0)), np.zeros_like(theta_flat)
    wealth = x * np.exp(np.log(g).sum(axis=1))
    # d mean(U(W)) / d theta_jb = mean(U'(W) W sum_n f_b R_j / g)
    weight = np.asarray(utility.marginal(wealth)) * wealth / wealth.size
    wg = weight[:, None] / g
    grad = np.empty(shape)
    for j in range(shape[0]):
        wr = wg * rets[j]
        for b, f in enumerate(feats):
            grad[j, b] = np.sum(wr * f)
    return -float(np.mean(utility.u(wealth))), -grad.ravel()


def _evaluate_theta(theta, x, utility, feats, rets):
    """Full-sample value of a candidate; -inf when wealth hits zero."""
    g = _wealth_factors(theta, feats, rets)
    if g.min() <= 0.0:
        return -np.inf, None
    wealth = x * np.exp(np.log(g).sum(axis=1))
    return float(np.mean(utility.u(wealth))), wealth


def primal_finite_bonds(
    maturities,
    x: float,
    market: BondMarket,
    utility: UtilitySpec,
    cfg: OptimizerConfig | None = None,
    warm_theta: np.ndarray | None = None,
) -> PrimalResult:
    """Sample-average utility maximization over proportional positions in
    the given bonds.

    Positions are pi_j(t, state) = theta_j . basis with basis features of
    time, the short rate and log discounted bond prices.  Wealth
    multiplies per-step growth factors, so it stays positive wherever the
    objective is finite and the strategy is x-admissible by construction.
    The optimizer is quasi-Newton with analytic gradients on a scenario
    subset, started from zero, from random points and from an optional
    warm start; every start and every converged iterate is scored on the
    full sample and the best candidate wins.
    """
    if x <= 0.0:
        raise ValueError("initial capital must be > 0")
    mats = tuple(float(m) for m in maturities)
    if not mats:
        raise ValueError("need at least one bond maturity")
    cfg = cfg or OptimizerConfig()
    resolved = _resolve_features(cfg.features, mats)
    feats_full = _basis_features(market, resolved)
    rets_full = _relative_returns(market, mats)
    n_opt = min(cfg.opt_scenarios, market.n_scenarios)
    feats = [f[:n_opt] for f in feats_full]
    rets = rets_full[:, :n_opt, :]
    shape = (len(mats), len(resolved))

    starts = [np.zeros(shape)]
    if warm_theta is not None:
        warm = np.asarray(warm_theta, dtype=np.float64)
        if warm.shape != shape:
            raise ValueError(f"warm start must have shape {shape}")
        starts.append(warm)
    key = _stream_key(market.scenarios.seed, STREAM_OPTIMIZER, cfg.seed_salt)
    rng = Generator(Philox(key=key))
    for _ in range(cfg.restarts):
        starts.append(cfg.restart_scale * rng.standard_normal(shape))

    candidates = list(starts)
    trace = []
    converged = 0
    for theta0 in starts:
        res = optimize.minimize(
            _primal_objective,
            theta0.ravel(),
            args=(feats, rets, x, utility, shape),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": cfg.max_iter, "gtol": cfg.gtol},
        )
        grad_norm = float(np.max(np.abs(res.jac)))
        trace.append((bool(res.success), int(res.nit), float(res.fun), grad_norm,
                      str(res.message)))
        if res.success or grad_norm < 1e-3:
            converged += 1
            candidates.append(res.x.reshape(shape))
    if converged == 0:
        raise RuntimeError(f"primal optimizer failed to converge; trace: {trace}")

    best = None
    for theta in candidates:
        full_val, wealth = _evaluate_theta(theta, x, utility, feats_full, rets_full)
        if wealth is not None and (best is None or full_val > best[1]):
            best = (theta, full_val, wealth)
    theta, full_val, wealth = best
    _, se = mc_mean_se(utility.u(wealth))
    saa_val = -_primal_objective(theta.ravel(), feats, rets, x, utility, shape)[0]

    g = _wealth_factors(theta, feats_full, rets_full)
    wealth_path = np.empty((g.shape[0], g.shape[1] + 1))
    wealth_path[:, 0] = x
    np.cumprod(g, axis=1, out=g)
    wealth_path[:, 1:] = x * g
    del g
    # realized bond positions: h_j = pi_j W_n / Pbar_j(t_n)
    legs = []
    for j, mat in enumerate(mats):
        pbar = market.Pbar.column(mat).values[:, :-1]
        table = _position_fractions(theta[j], feats_full)
        table *= wealth_path[:, :-1]
        table /= pbar
        legs.append(Leg(mat, TableWeight(table)))
    strategy = SimpleStrategy(tuple(legs))
    return PrimalResult(mats, full_val, se, strategy, theta, resolved,
                        saa_val, wealth, tuple(trace))


def primal_nested(
    maturity_sets,
    x: float,
    market: BondMarket,
    utility: UtilitySpec,
    cfg: OptimizerConfig | None = None,
) -> list:
    """Primal values for nested maturity sets.

    Each run is warm-started with the previous solution embedded under
    zero weights on the new bonds and features.  The embedding reproduces
    the previous wealth path exactly and is itself scored as a candidate,
    so the reported value sequence never decreases.
    """
    cfg = cfg or OptimizerConfig()
    sets = [tuple(float(m) for m in ms) for ms in maturity_sets]
    if not sets:
        raise ValueError("need at least one maturity set")
    for a, b in zip(sets, sets[1:]):
        if not set(a).issubset(b):
            raise ValueError("maturity sets must be nested")
    results = []
    prev: PrimalResult | None = None
    for k, ms in enumerate(sets):
        warm = None
        if prev is not None:
            resolved = _resolve_features(cfg.features, ms)
            warm = np.zeros((len(ms), len(resolved)))
            mat_index = {m: i for i, m in enumerate(ms)}
            feat_index = {name: b for b, name in enumerate(resolved)}
            for j, m in enumerate(prev.maturities):
                for b, name in enumerate(prev.feature_names):
                    warm[mat_index[m], feat_index[name]] = prev.theta[j, b]
        sub_cfg = OptimizerConfig(
            restarts=cfg.restarts, max_iter=cfg.max_iter,
            opt_scenarios=cfg.opt_scenarios, gtol=cfg.gtol,
            restart_scale=cfg.restart_scale, features=cfg.features,
            seed_salt=cfg.seed_salt + k,
        )
        prev = primal_finite_bonds(ms, x, market, utility, sub_cfg, warm_theta=warm)
        results.append(prev)
    return results


# ---------------------------------------------------------------------------
# claims and super-replication


@dataclass(frozen=True)
class ClaimSpec:
    """Nonnegative claim, stated in discounted units.

    ``payoff(terminal_slice, bank_terminal)`` receives the terminal
    discounted price slice (n_scen, n_maturities) and the terminal bank
    account (n_scen,), and returns discounted payoff samples >= 0.
    """

    name: str
    payoff: Callable

    def evaluate(self, market: BondMarket) -> np.ndarray:
        slice_ = market.Pbar.terminal_slice()
        bank_t = market.bank.values[:, -1]
        vals = np.asarray(self.payoff(slice_, bank_t), dtype=np.float64)
        if vals.shape != (market.n_scenarios,):
            raise ValueError("payoff must return one value per scenario")
        if not np.all(np.isfinite(vals)):
            raise ValueError("payoff must be finite")
        if vals.min() < 0.0:
            raise ValueError(f"negative payoff sample: {vals.min()}")
        return vals

    def node_features(self, market: BondMarket, n: int) -> tuple:
        """Adapted per-scenario regression features at time index n.

        Hedging regressions add these to the smooth price basis; claims
        with kinked payoffs supply moneyness-shaped columns here so the
        value fit can follow the kink as it sharpens near expiry."""
        return ()


@dataclass(frozen=True)
class _ForwardClaim(ClaimSpec):
    maturity: float = 0.0

    def __init__(self, maturity: float):
        object.__setattr__(self, "name", f"forward[{maturity}]")
        object.__setattr__(self, "payoff", None)
        object.__setattr__(self, "maturity", float(maturity))

    def evaluate(self, market: BondMarket) -> np.ndarray:
        m = market.Pbar.column_index(self.maturity)
        return market.Pbar.terminal_slice()[:, m].copy()


def make_forward_claim(maturity: float) -> ClaimSpec:
    """Claim delivering the discounted bond price at the horizon."""
    return _ForwardClaim(float(maturity))


@dataclass(frozen=True)
class _ZcbCall(ClaimSpec):
    bond_maturity: float = 0.0
    strike: float = 0.0

    def __init__(self, bond_maturity: float, strike: float):
        object.__setattr__(self, "name", f"zcbcall[{bond_maturity}]@{strike}")
        object.__setattr__(self, "payoff", None)
        object.__setattr__(self, "bond_maturity", float(bond_maturity))
        object.__setattr__(self, "strike", float(strike))

    def evaluate(self, market: BondMarket) -> np.ndarray:
        m = market.Pbar.column_index(self.bond_maturity)
        slice_ = market.Pbar.terminal_slice()
        bank_t = market.bank.values[:, -1]
        return np.maximum(slice_[:, m] - self.strike / bank_t, 0.0)

    def node_features(self, market: BondMarket, n: int) -> tuple:
        # the hinge location before the horizon is P_bar(t, bond) minus
        # strike times P_bar(t, horizon); without the horizon bond on the
        # maturity grid the hinge cannot be placed, so supply nothing
        horizon = float(market.time_grid.points[-1])
        try:
            pbar_o = market.Pbar.column(horizon).values[:, n]
        except ValueError:
            return ()
        pbar_b = market.Pbar.column(self.bond_maturity).values[:, n]
        money = pbar_b - self.strike * pbar_o
        sd = float(money.std())
        if sd <= 1e-12:
            return ()
        # linear spline in moneyness: a knot at the payoff kink plus knots
        # at scenario quantiles, so the value fit can bend one-sidedly as
        # the surface sharpens near expiry; all columns are continuous
        knots = [0.0] + list(np.quantile(money, (0.15, 0.35, 0.65, 0.85)))
        return tuple(np.maximum(money - k, 0.0) / sd for k in knots)


def make_zcb_call(bond_maturity: float, strike: float) -> ClaimSpec:
    """Call on the bond price at the market horizon, strike paid then;
    payoff discounted by the bank account."""
    return _ZcbCall(bond_maturity, strike)


def orthogonal_drift_densities(market: BondMarket, tradables, loadings) -> dict:
    """Terminal densities of equivalent measures leaving every tradable
    discounted bond a per-step martingale.

    Per step the base market price of risk is shifted by c times the unit
    vector orthogonal to the span of the step-integrated tradable
    volatilities (two factors, one tradable).  Loadings c index the
    family; c = 0 reproduces Z_T.
    """
    params = market.params
    d = params.n_factors
    mats = tuple(float(m) for m in tradables)
    if len(mats) != d - 1:
        raise ValueError("orthogonal-drift family needs exactly n_factors - 1 tradables")
    if d != 2:
        raise ValueError("orthogonal-drift family implemented for 2 factors")
    t = market.time_grid.points
    dt = np.diff(t)
    lam = np.asarray(params.risk_premium)
    n_steps = dt.size
    theta_perp = np.empty((n_steps, d))
    for n in range(n_steps):
        v = integrated_bond_vol(params, float(t[n]), float(t[n + 1]), mats[0])
        norm = float(np.hypot(v[0], v[1]))
        if norm <= 0.0:
            raise ValueError("degenerate tradable volatility over a step")
        theta_perp[n] = np.array([-v[1], v[0]]) / norm
    dw = np.diff(market.brownian, axis=1)
    out = {}
    for c in loadings:
        theta = lam[None, :] + float(c) * theta_perp
        log_z = -np.einsum("snk,nk->s", dw, theta) - 0.5 * float(
            np.sum((theta * theta).sum(axis=1) * dt)
        )
        out[float(c)] = np.exp(log_z)
    return out


def superrep_price(
    claim: ClaimSpec, market: BondMarket, tradables=None, drift_loadings=None
) -> float:
    """Super-replication price of a nonnegative claim.

    Complete default: E[Z_T X] under the pricing density.  With
    ``tradables`` and ``drift_loadings`` set, the max over the configured
    orthogonal-drift measure family (a certified lower bound on the sup
    over all equivalent measures)."""
    return superrep_report(claim, market, tradables, drift_loadings).price


@dataclass(frozen=True)
class SuperrepReport:
    price: float
    se: float
    by_loading: tuple = ()


def superrep_report(
    claim: ClaimSpec, market: BondMarket, tradables=None, drift_loadings=None
) -> SuperrepReport:
    x_bar = claim.evaluate(market)
    if tradables is None or drift_loadings is None:
        mean, se = mc_mean_se(market.density.terminal * x_bar)
        return SuperrepReport(mean, se)
    densities = orthogonal_drift_densities(market, tradables, drift_loadings)
    rows = []
    for c, z in sorted(densities.items()):
        mean, se = mc_mean_se(z * x_bar)
        rows.append((c, mean, se))
    best = max(rows, key=lambda r: r[1])
    return SuperrepReport(best[1], best[2], tuple(rows))


# ---------------------------------------------------------------------------
# regression superhedge


@dataclass(frozen=True)
class SuperhedgeResult:
    x0: float
    strategy: SimpleStrategy
    mean_abs_error: float
    mean_shortfall: float
    max_shortfall: float
    terminal_error: np.ndarray


def _value_basis(cols, n: int, extras=()) -> np.ndarray:
    """Quadratic basis in the standardized node state at time index n:
    intercept, linears, squares and cross terms.

    The state is the log of each price column in ``cols`` plus any
    ``extras`` columns (claim features, scaled by the supplier and only
    centered here: re-standardizing a sparsely populated kink column
    would blow its tail up into spikes).  Degenerate directions
    (deterministic values, as at n = 0) are dropped so every returned
    column carries variance except the intercept.
    """
    zs = []
    for c in cols:
        z = np.log(c[:, n])
        sd = float(z.std())
        if sd > 1e-10:
            zs.append((z - z.mean()) / sd)
    for e in extras:
        e = np.asarray(e, dtype=np.float64)
        if float(e.std()) > 1e-10:
            zs.append(e - e.mean())
    n_scen = cols[0].shape[0]
    out = [np.ones(n_scen)]
    out.extend(zs)
    for i, zi in enumerate(zs):
        for zj in zs[i:]:
            out.append(zi * zj)
    return np.column_stack(out)


def _weighted_lstsq(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Solve min ||sqrt(w)(a beta - b)||; ridge fallback on rank loss."""
    sw = np.sqrt(w)
    aw = a * sw[:, None]
    bw = b * sw
    beta, _, rank, _ = np.linalg.lstsq(aw, bw, rcond=None)
    if rank < a.shape[1]:
        warnings.warn("singular hedge regression, ridge fallback", stacklevel=2)
        gram = aw.T @ aw
        lam = 1e-8 * max(1.0, float(np.trace(gram)) / gram.shape[0])
        beta = np.linalg.solve(gram + lam * np.eye(a.shape[1]), aw.T @ bw)
    return beta


def superhedge_strategy(
    claim: ClaimSpec, market: BondMarket, tradables=(1.25, 2.0)
) -> SuperhedgeResult:
    """Backward least-squares hedge of a claim with the given tradable
    bonds.

    The claim-value process is projected onto a quadratic basis of the
    node state (log discounted tradable prices, the bank account, and any
    claim-supplied features) under the pricing measure (density-weighted
    regressions, one-step backward induction); per-step hedge ratios
    regress value increments onto tradable increments interacted with the
    basis.  Returns the pricing capital E[Z_T X], the hedge as a table
    strategy, and terminal replication-error statistics.
    """
    mats = tuple(float(m) for m in tradables)
    x_bar = claim.evaluate(market)
    z_t = market.density.terminal
    x0 = float(np.mean(z_t * x_bar))
    n_pts = market.time_grid.n_points
    n_scen = market.n_scenarios

    cols = [market.Pbar.column(m).values for m in mats]
    # the regression state needs the bank account too: discounted claim
    # values are functions of (prices, bank), and the two discounted
    # tradables alone leave that third coordinate unobserved
    state = cols + [market.bank.values]
    # fitted discounted claim value per node; terminal is the payoff,
    # time zero is the pricing capital.  One-step backward induction
    # keeps the regressand noise at one-step scale instead of carrying
    # the full terminal variance into every node's fit.
    values = np.empty((n_scen, n_pts))
    values[:, -1] = x_bar
    values[:, 0] = x0
    for n in range(n_pts - 2, 0, -1):
        basis = _value_basis(state, n, claim.node_features(market, n))
        values[:, n] = basis @ _weighted_lstsq(basis, values[:, n + 1], z_t)

    tables = [np.empty((n_scen, n_pts - 1)) for _ in mats]
    for n in range(n_pts - 1):
        basis = _value_basis(state, n, claim.node_features(market, n))
        dv = values[:, n + 1] - values[:, n]
        feats = np.concatenate(
            [basis * (c[:, n + 1] - c[:, n])[:, None] for c in cols], axis=1
        )
        gamma = _weighted_lstsq(feats, dv, z_t)
        width = basis.shape[1]
        for j in range(len(cols)):
            tables[j][:, n] = basis @ gamma[j * width : (j + 1) * width]

    legs = tuple(Leg(m, TableWeight(tbl)) for m, tbl in zip(mats, tables))
    strategy = SimpleStrategy(legs)
    integral = integrate_simple(strategy, market.Pbar)
    err = x_bar - (x0 + integral.values[:, -1])
    shortfall = np.maximum(err, 0.0)
    return SuperhedgeResult(
        x0,
        strategy,
        float(np.mean(np.abs(err))),
        float(np.mean(shortfall)),
        float(shortfall.max()),
        err,
    )
