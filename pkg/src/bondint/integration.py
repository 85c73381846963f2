"""Simple and generalized stochastic integration against maturity families.

A simple strategy holds finitely many bonds: legs (maturity, weight rule)
where each rule sees only the history prefix, making predictability a
construction-time property.  Its integral accumulates per-step leg sums
and then a single cumulative sum along time; every caller, including the
measure-process bridge, goes through that one code path so structural
identities (zero legs, stopping, atomic-measure equivalence) hold at the
bit level.

A generalized strategy is a sequence of simple approximants plus an
optional functional evaluator.  Its integral is diagnosed along an index
schedule with Cauchy distances in the Emery proxy; divergence raises,
domain questions resolve to a value or the NOT_IN_DOMAIN sentinel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .emery import default_dictionary, emery_distance_proxy
from .grids import TimeGrid
from .paths import FamilyPaths, ProcessPaths

__all__ = [
    "DEFAULT_SCHEDULE",
    "WeightRule",
    "ConstWeight",
    "TableWeight",
    "StateWeight",
    "Leg",
    "leg",
    "SimpleStrategy",
    "scale_strategy",
    "combine_strategies",
    "integrate_simple",
    "GeneralizedStrategy",
    "IntegrationDiagnostics",
    "DivergenceSuspected",
    "integrate_generalized",
    "integrate_generalized_blocked",
    "NotInDomain",
    "NOT_IN_DOMAIN",
    "evaluate_functional",
    "PortfolioValue",
    "portfolio_value",
    "bank_position",
    "AdmissibilityReport",
    "admissibility_check",
    "register_strategy",
    "make_strategy",
    "available_strategies",
]

DEFAULT_SCHEDULE = (10, 20, 50, 100, 200)

_BOUND_TOL = 1e-12


class WeightRule:
    """Predictable weight process builder.

    ``at(n, prefix)`` returns the weight chosen at time index n given the
    family history prefix (values up to and including t_n); subclasses
    may override ``values`` with an equivalent vectorized form.
    """

    def at(self, n: int, prefix: np.ndarray):
        raise NotImplementedError

    def values(self, family: FamilyPaths) -> np.ndarray:
        n_scen, n_pts = family.values.shape[:2]
        out = np.empty((n_scen, n_pts - 1))
        for n in range(n_pts - 1):
            out[:, n] = self.at(n, family.values[:, : n + 1, :])
        return out


@dataclass(frozen=True)
class ConstWeight(WeightRule):
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("non-finite weight")

    def at(self, n, prefix):
        return self.value

    def values(self, family):
        n_scen, n_pts = family.values.shape[:2]
        return np.full((n_scen, n_pts - 1), self.value)


@dataclass(frozen=True)
class TableWeight(WeightRule):
    """Weights given directly per step, shape (n_steps,) or (n_scen, n_steps)."""

    table: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.table, dtype=np.float64)
        if t.ndim not in (1, 2):
            raise ValueError("table must be 1-D or 2-D")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def at(self, n, prefix):
        return self.table[..., n]

    def values(self, family):
        n_scen, n_pts = family.values.shape[:2]
        if self.table.shape[-1] != n_pts - 1:
            raise ValueError(
                f"table covers {self.table.shape[-1]} steps, grid has {n_pts - 1}"
            )
        if self.table.ndim == 2 and self.table.shape[0] != n_scen:
            raise ValueError("table scenario count mismatch")
        return np.broadcast_to(self.table, (n_scen, n_pts - 1))


@dataclass(frozen=True)
class StateWeight(WeightRule):
    """Weight computed from the history prefix by a callable (n, prefix) -> weight."""

    fn: Callable[[int, np.ndarray], np.ndarray]

    def at(self, n, prefix):
        return self.fn(n, prefix)


@dataclass(frozen=True)
class Leg:
    maturity: float
    weight: WeightRule


def leg(maturity: float, weight) -> Leg:
    """Leg constructor accepting a bare number as a constant weight."""
    if isinstance(weight, WeightRule):
        return Leg(float(maturity), weight)
    return Leg(float(maturity), ConstWeight(float(weight)))


@dataclass(frozen=True)
class SimpleStrategy:
    """Finite bond portfolio: tuple of legs, optional uniform weight bound."""

    legs: tuple
    bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))
        for lg_ in self.legs:
            if not isinstance(lg_, Leg):
                raise TypeError("legs must be Leg instances")
        if self.bound is not None and self.bound < 0.0:
            raise ValueError("bound must be non-negative")


def scale_strategy(a: float, H: SimpleStrategy) -> SimpleStrategy:
    def scaled(rule):
        if isinstance(rule, ConstWeight):
            return ConstWeight(a * rule.value)
        if isinstance(rule, TableWeight):
            return TableWeight(a * rule.table)
        return StateWeight(lambda n, prefix, _r=rule: a * np.asarray(_r.at(n, prefix)))

    bound = None if H.bound is None else abs(a) * H.bound
    return SimpleStrategy(tuple(Leg(lg_.maturity, scaled(lg_.weight)) for lg_ in H.legs), bound)


def combine_strategies(*strategies: SimpleStrategy) -> SimpleStrategy:
    legs = tuple(lg_ for H in strategies for lg_ in H.legs)
    return SimpleStrategy(legs)


def _leg_weights(lg_: Leg, H: SimpleStrategy, family: FamilyPaths) -> np.ndarray:
    w = np.asarray(lg_.weight.values(family), dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError(f"non-finite weight on leg at maturity {lg_.maturity}")
    if H.bound is not None and np.abs(w).max(initial=0.0) > H.bound + _BOUND_TOL:
        raise ValueError(
            f"weight exceeds declared bound {H.bound} on leg at maturity {lg_.maturity}"
        )
    return w


def integrate_simple(H: SimpleStrategy, family: FamilyPaths) -> ProcessPaths:
    """Integral of a simple strategy: starts at 0, accumulates per step
    the sum over legs of weight times column increment.

    Every leg maturity must sit on the family's maturity grid.
    """
    n_scen, n_pts = family.values.shape[:2]
    contrib = np.zeros((n_scen, n_pts - 1))
    for lg_ in H.legs:
        m = family.column_index(lg_.maturity)
        w = _leg_weights(lg_, H, family)
        col = family.values[:, :, m]
        contrib += w * (col[:, 1:] - col[:, :-1])
    out = np.zeros((n_scen, n_pts))
    np.cumsum(contrib, axis=1, out=out[:, 1:])
    return ProcessPaths(out, family.time_grid)


# ---------------------------------------------------------------------------
# generalized strategies


class NotInDomain:
    """Sentinel: the functional has no limit on the offered curve."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NOT_IN_DOMAIN"


NOT_IN_DOMAIN = NotInDomain()


@dataclass(frozen=True)
class GeneralizedStrategy:
    """Approximant generator n -> SimpleStrategy plus an optional
    functional evaluator (prefix family, curve) -> value or NOT_IN_DOMAIN.

    Consistency between the evaluator and the approximant pairings is a
    test obligation, not an assumption of this container.
    """

    name: str
    approximants: Callable[[int], SimpleStrategy]
    evaluator: Callable | None = None


@dataclass(frozen=True)
class IntegrationDiagnostics:
    schedule: tuple
    distances: tuple
    converged: bool
    cauchy_tol: float


class DivergenceSuspected(RuntimeError):
    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = tuple(trace)


def _check_schedule(n_schedule):
    sched = tuple(int(n) for n in n_schedule)
    if len(sched) < 2:
        raise ValueError("schedule needs at least 2 entries")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be increasing")
    return sched


def _cauchy_diagnostics(ys, sched, dictionary, cauchy_tol):
    if dictionary is None:
        dictionary = default_dictionary()
    distances = []
    trace = []
    for j in range(len(ys) - 1):
        d = emery_distance_proxy(ys[j], ys[j + 1], dictionary)
        distances.append(d)
        trace.append((sched[j], sched[j + 1], d))
        if j > 0 and d > 2.0 * distances[j - 1] and d > cauchy_tol:
            raise DivergenceSuspected(
                f"divergence suspected: distance grew from {distances[j - 1]:.6g} "
                f"to {d:.6g} between n={sched[j]} and n={sched[j + 1]}",
                trace,
            )
    converged = distances[-1] < cauchy_tol
    return IntegrationDiagnostics(sched, tuple(distances), converged, cauchy_tol)


def integrate_generalized(
    G: GeneralizedStrategy,
    family: FamilyPaths,
    n_schedule=DEFAULT_SCHEDULE,
    dictionary=None,
    cauchy_tol: float = 0.05,
):
    """Integrate along the schedule; return the last approximant integral
    with Cauchy diagnostics in the Emery proxy."""
    sched = _check_schedule(n_schedule)
    ys = [integrate_simple(G.approximants(n), family) for n in sched]
    diag = _cauchy_diagnostics(ys, sched, dictionary, cauchy_tol)
    return ys[-1], diag


def integrate_generalized_blocked(
    G: GeneralizedStrategy,
    make_block_iter: Callable[[], "iter"],
    time_grid: TimeGrid,
    n_scenarios: int,
    n_schedule=DEFAULT_SCHEDULE,
    dictionary=None,
    cauchy_tol: float = 0.05,
):
    """Blocked variant for families too large to materialize.

    ``make_block_iter()`` must yield (scenario slice, FamilyPaths block)
    pairs covering all scenarios.  Row-local arithmetic makes the result
    bit-identical to the unblocked computation.  Returns
    (final integral, diagnostics, {n: integral}).
    """
    sched = _check_schedule(n_schedule)
    vals = {n: np.zeros((n_scenarios, time_grid.n_points)) for n in sched}
    strategies = {n: G.approximants(n) for n in sched}
    for sl, fam_block in make_block_iter():
        for n in sched:
            vals[n][sl] = integrate_simple(strategies[n], fam_block).values
    ys = {n: ProcessPaths(vals[n], time_grid) for n in sched}
    diag = _cauchy_diagnostics([ys[n] for n in sched], sched, dictionary, cauchy_tol)
    return ys[sched[-1]], diag, ys


def evaluate_functional(
    G: GeneralizedStrategy,
    prefix: FamilyPaths,
    f,
    n_schedule=DEFAULT_SCHEDULE,
    tol: float = 1e-9,
):
    """Pair the approximants with a maturity curve at the prefix end.

    ``f`` is a callable on maturity or an array over the prefix's
    maturity grid.  Returns the final pairing when the last consecutive
    pairings agree within tol, NOT_IN_DOMAIN otherwise.  Scalar when the
    pairing is scenario-independent, else one value per scenario.
    """
    sched = _check_schedule(n_schedule)
    n_idx = prefix.time_grid.n_points - 1
    vals = []
    for n in sched:
        H = G.approximants(n)
        total = np.zeros(())
        for lg_ in H.legs:
            if callable(f):
                fx = float(f(lg_.maturity))
            else:
                fx = float(np.asarray(f)[prefix.maturity_grid.index_of(lg_.maturity)])
            w = np.asarray(lg_.weight.at(n_idx - 1 if n_idx > 0 else 0, prefix.values))
            total = total + w * fx
        vals.append(total)
    gap = float(np.max(np.abs(vals[-1] - vals[-2])))
    if not np.isfinite(gap) or gap >= tol:
        return NOT_IN_DOMAIN
    last = vals[-1]
    if last.ndim == 0:
        return float(last)
    if last.size and np.all(last == last.flat[0]):
        return float(last.flat[0])
    return last


# ---------------------------------------------------------------------------
# portfolio bookkeeping


@dataclass(frozen=True)
class PortfolioValue:
    """Self-financing discounted value: V0 plus the strategy integral."""

    v0: float
    path: ProcessPaths

    def __post_init__(self):
        if not np.all(self.path.values[:, 0] == self.v0):
            raise ValueError("portfolio path must start at V0")


def portfolio_value(v0: float, H: SimpleStrategy, market) -> PortfolioValue:
    integral = integrate_simple(H, market.Pbar)
    return PortfolioValue(float(v0), ProcessPaths(v0 + integral.values, integral.time_grid))


def _held_positions(H: SimpleStrategy, family: FamilyPaths):
    """Per-leg position held at each grid node: the step weight for
    interior nodes, the final step's weight at the terminal node."""
    n_scen, n_pts = family.values.shape[:2]
    for lg_ in H.legs:
        m = family.column_index(lg_.maturity)
        w = _leg_weights(lg_, H, family)
        w = np.broadcast_to(w, (n_scen, n_pts - 1))
        held = np.empty((n_scen, n_pts))
        held[:, :-1] = w
        held[:, -1] = w[:, -1]
        yield m, held


def bank_position(H: SimpleStrategy, market) -> ProcessPaths:
    """Bank-account weight making the strategy self-financing:
    integral minus current bond-position value, in discounted units."""
    pbar = market.Pbar
    phi = integrate_simple(H, pbar).values.copy()
    for m, held in _held_positions(H, pbar):
        phi -= held * pbar.values[:, :, m]
    return ProcessPaths(phi, pbar.time_grid)


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    worst_margin: float
    scenario: int
    time_index: int
    approximant_n: int | None = None

    def __bool__(self):
        return self.ok


def admissibility_check(strategy, market, x: float, n_schedule=None) -> AdmissibilityReport:
    """True iff the integral stays above -x everywhere, over every
    approximant when the strategy is generalized."""
    if x <= 0.0:
        raise ValueError("admissibility level x must be > 0")
    if isinstance(strategy, SimpleStrategy):
        candidates = [(None, strategy)]
    else:
        sched = _check_schedule(n_schedule if n_schedule is not None else DEFAULT_SCHEDULE)
        candidates = [(n, strategy.approximants(n)) for n in sched]
    worst = np.inf
    where = (0, 0, None)
    for n, H in candidates:
        y = integrate_simple(H, market.Pbar).values
        margin = y + x
        flat = int(np.argmin(margin))
        s, t_idx = np.unravel_index(flat, margin.shape)
        if margin[s, t_idx] < worst:
            worst = float(margin[s, t_idx])
            where = (int(s), int(t_idx), n)
    return AdmissibilityReport(worst >= 0.0, worst, where[0], where[1], where[2])


# ---------------------------------------------------------------------------
# named constructions

_REGISTRY: dict = {}


def register_strategy(name: str, factory: Callable):
    if name in _REGISTRY:
        raise ValueError(f"strategy {name!r} already registered")
    _REGISTRY[name] = factory


def make_strategy(name: str, **kwargs) -> GeneralizedStrategy:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown strategy {name!r}; available: {', '.join(available_strategies())}"
        ) from None
    return factory(**kwargs)


def available_strategies():
    return sorted(_REGISTRY)


def _example21_approximant(n: int) -> SimpleStrategy:
    if n < 1:
        raise ValueError("approximant index must be >= 1")
    return SimpleStrategy(
        tuple(Leg(1.0 - 1.0 / i, ConstWeight(i * i / n)) for i in range(1, n + 1))
    )


def _example21_evaluator(prefix, f):
    # Pairings are Cesaro means of g_i = i^2 f(1 - 1/i); the limit exists
    # iff g_i settles, and then equals the tail value.
    if not callable(f):
        raise TypeError("the analytic evaluator needs a callable curve")
    probes = (64, 128, 256, 512)
    gs = [i * i * float(f(1.0 - 1.0 / i)) for i in probes]
    spread = max(abs(b - a) for a, b in zip(gs, gs[1:]))
    if not np.isfinite(spread) or spread > 1e-6 * (1.0 + abs(gs[-1])):
        return NOT_IN_DOMAIN
    return gs[-1]


def _make_example21() -> GeneralizedStrategy:
    return GeneralizedStrategy("example21", _example21_approximant, _example21_evaluator)


def _make_table(legs, bound=None) -> GeneralizedStrategy:
    fixed = SimpleStrategy(tuple(leg(x, w) for x, w in legs), bound)

    def evaluator(prefix, f):
        n_idx = prefix.time_grid.n_points - 1
        total = np.zeros(())
        for lg_ in fixed.legs:
            fx = float(f(lg_.maturity)) if callable(f) else float(
                np.asarray(f)[prefix.maturity_grid.index_of(lg_.maturity)]
            )
            total = total + np.asarray(lg_.weight.at(max(n_idx - 1, 0), prefix.values)) * fx
        return float(total) if total.ndim == 0 else total

    return GeneralizedStrategy("table", lambda n: fixed, evaluator)


register_strategy("example21", _make_example21)
register_strategy("table", _make_table)
