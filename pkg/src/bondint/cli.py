"""Batch experiment runner.

Each subcommand maps one study to a reproducible run: resolve the
configuration (INI file, CLI overrides, schema defaults), compute,
write CSV data and a JSON verdict file plus the resolved-config echo and
a manifest into a per-run directory.  Exit code 0 means every boolean
verdict passed, 2 means some verdict failed, 1 means the configuration
or the run itself was invalid.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_sha256, load_config, resolved_text
from .duality import (
    OptimizerConfig,
    budget_root,
    conjugacy_gap,
    dual_value,
    log_utility,
    make_forward_claim,
    make_zcb_call,
    power_utility,
    primal_nested,
    superhedge_strategy,
    superrep_report,
)
from .emery import continuity_profile, default_dictionary, emery_proxy
from .grids import MaturityGrid, ScenarioSet, TimeGrid
from .integration import (
    ConstWeight,
    Leg,
    SimpleStrategy,
    integrate_generalized_blocked,
    integrate_simple,
    make_strategy,
)
from .measures import (
    MeasurePiece,
    MeasureSimpleProcess,
    SignedMeasureGrid,
    dirac_approximate,
    dirac_pairing_bound,
    equivalent_simple_strategy,
    exponential_tilt_measure,
    integrate_measure_process,
    pair_measure_curve,
    total_variation,
    uniform_density_measure,
)
from .models import (
    GaussianMarketParams,
    example21_columns,
    example21_maturity_grid,
    example22_bound,
    gen_example21,
    gen_example22_perturbed,
    gen_gaussian_market,
    iter_example21_blocks,
    iter_example22_blocks,
    node_maturities,
    zcb_call_closed_form,
)
from .paths import FamilyPaths, ProcessPaths
from .serialize import save_paths
from .stats import mc_mean_se

__all__ = ["main"]


def _fmt(v) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonify(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    raise TypeError(f"not JSON-serializable: {type(v)}")


class RunWriter:
    """Collects the output files of one run under its directory."""

    def __init__(self, directory: Path, json_only: bool):
        self.directory = Path(directory)
        self.json_only = json_only
        self.outputs: list[str] = []
        self.directory.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header, rows):
        if self.json_only:
            return
        with open(self.directory / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.outputs.append(name)

    def json(self, name: str, obj):
        text = json.dumps(obj, sort_keys=True, indent=2, default=_jsonify) + "\n"
        (self.directory / name).write_text(text, encoding="utf-8")
        self.outputs.append(name)

    def text(self, name: str, content: str):
        (self.directory / name).write_text(content, encoding="utf-8")
        self.outputs.append(name)

    def binary(self, name: str, write_fn):
        if self.json_only:
            return
        write_fn(self.directory / name)
        self.outputs.append(name)


# ---------------------------------------------------------------------------
# shared resolution helpers


def _time_grid(cfg: RunConfig) -> TimeGrid:
    horizon = cfg.get("grid", "T")
    steps = cfg.get("grid", "steps")
    if horizon <= 0.0:
        raise ConfigError("[grid] T must be > 0")
    if steps < 1:
        raise ConfigError("[grid] steps must be >= 1")
    return TimeGrid.uniform(horizon, steps)


def _scenarios(cfg: RunConfig) -> ScenarioSet:
    count = cfg.get("scenarios", "count")
    seed = cfg.get("scenarios", "seed")
    if count < 2:
        raise ConfigError("[scenarios] count must be >= 2")
    try:
        return ScenarioSet(count=count, seed=seed)
    except ValueError as exc:
        raise ConfigError(f"[scenarios] {exc}") from None


def _market_params(cfg: RunConfig) -> GaussianMarketParams:
    try:
        return GaussianMarketParams(
            sigma0=cfg.get("model", "sigma0"),
            mean_reversion=cfg.get("model", "mean_reversion"),
            risk_premium=cfg.get("model", "risk_premium"),
            f0_flat=cfg.get("model", "f0_flat"),
            f0_slope=cfg.get("model", "f0_slope"),
        )
    except ValueError as exc:
        raise ConfigError(f"[model] {exc}") from None


def _maturity_grid(cfg: RunConfig, extra=()) -> MaturityGrid:
    pts = sorted(set(cfg.get("grid", "maturities")) | set(float(x) for x in extra))
    try:
        return MaturityGrid(np.asarray(pts), t_star=cfg.get("grid", "T_star"))
    except ValueError as exc:
        raise ConfigError(f"[grid] maturities: {exc}") from None


def _gaussian_market(cfg: RunConfig, time_grid=None, extra_maturities=()):
    tag = cfg.get("model", "tag")
    if tag != "gaussian2f":
        raise ConfigError(f"[model] tag: this command needs 'gaussian2f', got {tag!r}")
    return gen_gaussian_market(
        _market_params(cfg),
        time_grid if time_grid is not None else _time_grid(cfg),
        _maturity_grid(cfg, extra_maturities),
        _scenarios(cfg),
    )


def _jump_schedule(cfg: RunConfig):
    n_max = cfg.get("model", "n_max")
    if n_max < 2:
        raise ConfigError("[model] n_max: need n_max >= 2 for the approximation ladder")
    sched = cfg.get("strategy", "n_schedule")
    if len(sched) < 2:
        raise ConfigError("[strategy] n_schedule needs at least 2 entries")
    if any(n < 2 or n > n_max for n in sched):
        raise ConfigError("[strategy] n_schedule entries must lie in [2, n_max]")
    return n_max, sched


def _monotone_slack(n_scenarios: int) -> float:
    # the compared statistics are capped into [0, 1], so 3 standard errors
    # are at most 1.5 / sqrt(S) per term; 0.01 floors tiny-sample noise
    return max(0.01, 3.0 / math.sqrt(n_scenarios))


# ---------------------------------------------------------------------------
# subcommands


def cmd_example21(cfg: RunConfig, writer: RunWriter) -> dict:
    if cfg.get("strategy", "name") != "example21":
        raise ConfigError("[strategy] name: the example21 command runs strategy 'example21'")
    n_max, sched = _jump_schedule(cfg)
    tg = _time_grid(cfg)
    scen = _scenarios(cfg)
    grid = example21_maturity_grid(n_max)
    G = make_strategy("example21")
    _, diag, ys = integrate_generalized_blocked(
        G,
        lambda: iter_example21_blocks(n_max, tg, grid, scen),
        tg,
        scen.count,
        n_schedule=sched,
        cauchy_tol=cfg.get("strategy", "cauchy_tol"),
    )
    t = tg.points
    dictionary = default_dictionary()
    rows = []
    distances = []
    for n in sched:
        dev = ys[n].values - t[None, :]
        dist = emery_proxy(ProcessPaths(dev, tg), dictionary)
        rows.append(
            (n, dist, float(np.mean(np.max(np.abs(dev), axis=1))), float(np.mean(ys[n].values[:, -1])))
        )
        distances.append(dist)
    writer.csv(
        "example21_convergence.csv",
        ("n", "emery_distance_to_limit", "mean_sup_abs_deviation", "terminal_mean"),
        rows,
    )
    slack = _monotone_slack(scen.count)
    converges = (
        all(b <= a + slack for a, b in zip(distances, distances[1:]))
        and distances[-1] < distances[0]
    )
    terminal_median = float(np.median(ys[sched[-1]].values[:, -1]))
    return {
        "converges_to_A": bool(converges),
        "limit_mean_positive": bool(terminal_median > 0.0),
        "final_distance": distances[-1],
        "final_cauchy_distance": diag.distances[-1],
        "terminal_median": terminal_median,
    }


def _truncated_ladder(k: int, sched) -> dict:
    out = {}
    for n in sched:
        live = range(1, min(k, n) + 1)
        out[n] = SimpleStrategy(
            tuple(Leg(1.0 - 1.0 / i, ConstWeight(i * i / n)) for i in live)
        )
    return out


def cmd_example22(cfg: RunConfig, writer: RunWriter) -> dict:
    n_max, sched = _jump_schedule(cfg)
    ks = cfg.get("model", "cutoff_k")
    if not ks:
        raise ConfigError("[model] cutoff_k: need at least one cutoff")
    for k in ks:
        if not 1 <= k < n_max:
            raise ConfigError(
                f"[model] cutoff_k: k >= n_max is degenerate (k={k}); need 1 <= k < n_max"
            )
    tg = _time_grid(cfg)
    scen = _scenarios(cfg)
    sup_rows = []
    bound_rows = []
    vanishes = True
    bound_ok = True
    for k in ks:
        grid_k = MaturityGrid(
            np.concatenate([node_maturities(k + 1), [1.0]]), t_star=1.0
        )
        ladder = _truncated_ladder(k, sched)
        sups = {n: np.zeros(scen.count) for n in sched}
        for sl, fam in iter_example22_blocks(n_max, k, tg, grid_k, scen):
            for n in sched:
                y = integrate_simple(ladder[n], fam)
                sups[n][sl] = np.max(np.abs(y.values), axis=1)
        for n in sched:
            sup_rows.append((k, n, float(np.mean(sups[n]))))
        vanishes &= sup_rows[-1][2] < 0.05
        # the largest perturbed column sits at the first zeroed node;
        # the horizon column only pads the grid to two points
        col = example21_columns(n_max, tg, scen, [1.0 - 1.0 / (k + 1), 1.0])
        m2, se = mc_mean_se(col.values[:, -1, 0] ** 2)
        bnd = example22_bound(k, tg.horizon)
        ok = m2 <= bnd + 3.0 * se
        bound_rows.append((k, m2, se, bnd, ok))
        bound_ok &= ok
    writer.csv("example22_supnorms.csv", ("k", "n", "mean_sup_abs"), sup_rows)
    writer.csv(
        "example22_bounds.csv",
        ("k", "second_moment", "se", "bound", "within_bound"),
        bound_rows,
    )
    return {"vanishes_at_n_max": bool(vanishes), "respects_bound": bool(bound_ok)}


def _utility(cfg: RunConfig):
    kind = cfg.get("utility", "kind")
    if kind == "log":
        return log_utility()
    if kind == "power":
        try:
            return power_utility(cfg.get("utility", "power_p"))
        except ValueError as exc:
            raise ConfigError(f"[utility] power_p: {exc}") from None
    raise ConfigError(f"[utility] kind: unknown {kind!r} (known: log, power)")


def cmd_utility(cfg: RunConfig, writer: RunWriter) -> dict:
    utility = _utility(cfg)
    x0 = cfg.get("utility", "x0")
    if x0 <= 0.0:
        raise ConfigError("[utility] x0 must be > 0")
    sets = cfg.get("utility", "maturity_sets")
    if not sets:
        raise ConfigError("[utility] maturity_sets must not be empty")
    market = _gaussian_market(cfg)
    for ms in sets:
        for m in ms:
            try:
                market.maturity_grid.index_of(m)
            except ValueError:
                raise ConfigError(
                    f"[utility] maturity_sets: maturity {m} is not on [grid] maturities"
                ) from None
    ocfg = OptimizerConfig(
        restarts=cfg.get("utility", "restarts"),
        opt_scenarios=cfg.get("utility", "opt_scenarios"),
    )
    try:
        results = primal_nested(sets, x0, market, utility, ocfg)
    except ValueError as exc:
        raise ConfigError(f"[utility] maturity_sets: {exc}") from None
    writer.csv(
        "utility_primal.csv",
        ("j", "n_bonds", "maturities", "u_j", "se"),
        [
            (j, len(r.maturities), " ".join(f"{m:g}" for m in r.maturities), r.value, r.value_se)
            for j, r in enumerate(results, start=1)
        ],
    )
    y_grid = np.geomspace(
        cfg.get("utility", "y_grid_lo"),
        cfg.get("utility", "y_grid_hi"),
        cfg.get("utility", "y_grid_n"),
    )
    writer.csv(
        "utility_dual.csv",
        ("y", "v"),
        [(float(y), dual_value(float(y), market, utility)) for y in y_grid],
    )
    y_hat = budget_root(x0, market, utility)
    u_dual = dual_value(y_hat, market, utility) + x0 * y_hat
    best = results[-1]
    report = conjugacy_gap(x0, y_grid, market, utility, best.value, extra_se=best.value_se)
    monotone = all(b.value >= a.value for a, b in zip(results, results[1:]))
    return {
        "u_dual": float(u_dual),
        "gap": float(report.gap),
        "y_star": float(report.y_at_inf),
        "u_primal_best": float(best.value),
        "monotone": bool(monotone),
        "gap_ok": bool(report.ok),
    }


def cmd_superrep(cfg: RunConfig, writer: RunWriter) -> dict:
    tradables = cfg.get("claim", "tradables")
    claim_mat = cfg.get("claim", "maturity")
    strike = cfg.get("claim", "strike")
    t_star = cfg.get("grid", "T_star")
    # the horizon bond joins the grid so kinked claims can place their
    # moneyness hinge when building hedge-regression features
    extra = tuple(tradables) + (claim_mat, t_star, cfg.get("grid", "T"))
    market = _gaussian_market(cfg, extra_maturities=extra)
    params = market.params
    horizon = market.time_grid.horizon

    rows = []
    forward = make_forward_claim(t_star)
    rep_f = superrep_report(forward, market)
    oracle_f = math.exp(-params.f0_integral(t_star))
    forward_ok = abs(rep_f.price - oracle_f) <= 3.0 * rep_f.se
    rows.append((forward.name, rep_f.price, rep_f.se, oracle_f, forward_ok))

    if not horizon < claim_mat:
        raise ConfigError("[claim] maturity must exceed the horizon T for the call study")
    call = make_zcb_call(claim_mat, strike)
    rep_c = superrep_report(call, market)
    oracle_c = zcb_call_closed_form(params, horizon, claim_mat, strike)
    # 1% of the oracle, floored by MC noise so small scenario budgets
    # are not judged beyond their resolution
    call_ok = abs(rep_c.price - oracle_c) <= max(0.01 * oracle_c, 3.0 * rep_c.se)
    rows.append((call.name, rep_c.price, rep_c.se, oracle_c, call_ok))
    writer.csv(
        "superrep_prices.csv",
        ("claim", "price", "se", "oracle", "within_tolerance"),
        rows,
    )
    verdicts = {
        "forward_ok": bool(forward_ok),
        "call_ok": bool(call_ok),
        "forward_price": float(rep_f.price),
        "call_price": float(rep_c.price),
    }

    loadings = cfg.get("claim", "drift_loadings")
    if loadings:
        selected = call if cfg.get("claim", "kind") == "zcb_call" else forward
        rep = superrep_report(selected, market, tradables=tradables[:1], drift_loadings=loadings)
        writer.csv(
            "superrep_incomplete.csv",
            ("drift_loading", "price", "se"),
            list(rep.by_loading),
        )
        verdicts["incomplete_price"] = float(rep.price)
        verdicts["incomplete_dominates"] = bool(
            rep.price >= (rep_c.price if selected is call else rep_f.price) - 3.0 * rep.se
        )

    refine = cfg.get("claim", "refine_steps")
    if refine:
        if any(s < 2 for s in refine):
            raise ConfigError("[claim] refine_steps entries must be >= 2")
        claim = make_zcb_call(claim_mat, strike) if cfg.get("claim", "kind") == "zcb_call" else forward
        hedge_rows = []
        maes = []
        for steps in refine:
            market_s = _gaussian_market(
                cfg,
                time_grid=TimeGrid.uniform(horizon, steps),
                extra_maturities=extra,
            )
            res = superhedge_strategy(claim, market_s, tradables)
            hedge_rows.append((steps, res.mean_abs_error, res.mean_shortfall, res.max_shortfall))
            maes.append(res.mean_abs_error)
            del market_s
        writer.csv(
            "superhedge_error.csv",
            ("steps", "mean_abs_error", "mean_shortfall", "max_shortfall"),
            hedge_rows,
        )
        verdicts["hedge_error_shrinks"] = bool(
            all(b < a for a, b in zip(maes, maes[1:]))
        )
    return verdicts


def _synthetic_family(grid: MaturityGrid, horizon: float) -> FamilyPaths:
    """Small deterministic family for structural equalities."""
    tg = TimeGrid.uniform(horizon, 16)
    t = tg.points[None, :, None]
    x = grid.points[None, None, :]
    s = np.arange(4.0)[:, None, None]
    vals = np.sin(1.3 * t + 2.1 * x) * (1.0 + 0.1 * s) + 0.05 * np.cos(3.0 * x)
    return FamilyPaths(vals, tg, grid)


def cmd_measure(cfg: RunConfig, writer: RunWriter) -> dict:
    lo = cfg.get("measure", "lo")
    hi = cfg.get("measure", "hi")
    cells = cfg.get("measure", "cells")
    if not lo < hi:
        raise ConfigError("[measure] need lo < hi")
    if cells < 4:
        raise ConfigError("[measure] cells must be >= 4")
    t_star = cfg.get("grid", "T_star")
    if hi > t_star:
        raise ConfigError("[measure] hi must not exceed [grid] T_star")
    grid = MaturityGrid(np.linspace(lo, hi, cells + 1), t_star=t_star)
    kind = cfg.get("measure", "kind")
    mass = cfg.get("measure", "total_mass")
    if kind == "uniform":
        m = uniform_density_measure(grid, mass)
    elif kind == "exp":
        m = exponential_tilt_measure(grid, cfg.get("measure", "rate"), mass)
    else:
        raise ConfigError(f"[measure] kind: unknown {kind!r} (known: uniform, exp)")
    curve = cfg.get("measure", "curve")
    if curve == "exp":
        f, lipschitz = math.exp, math.exp(hi)
    elif curve == "abs":
        center = 0.5 * (lo + hi)
        f, lipschitz = (lambda x: abs(x - center)), 1.0
    else:
        raise ConfigError(f"[measure] curve: unknown {curve!r} (known: exp, abs)")
    budgets = cfg.get("measure", "budgets")
    if not budgets or any(n < 1 for n in budgets):
        raise ConfigError("[measure] budgets must be positive")

    exact = pair_measure_curve(m, f)
    tv_in = total_variation(m)
    rows = []
    bounds = []
    errors = []
    tv_ok = True
    for n in budgets:
        mn = dirac_approximate(m, n)
        bound = dirac_pairing_bound(m, n, lipschitz)
        err = abs(pair_measure_curve(mn, f) - exact)
        tvn = total_variation(mn)
        tv_ok &= tvn <= tv_in
        rows.append((n, bound, err, tvn))
        bounds.append(bound)
        errors.append(err)
    writer.csv(
        "measure_convergence.csv",
        ("n_atoms", "certified_bound", "abs_error", "total_variation"),
        rows,
    )

    fam = _synthetic_family(grid, cfg.get("grid", "T"))
    pts = grid.points
    atomic = SignedMeasureGrid(
        grid,
        ((float(pts[cells // 5]), 0.7), (float(pts[cells // 2]), -0.4), (float(pts[(4 * cells) // 5]), 0.25)),
    )
    phi = MeasureSimpleProcess((MeasurePiece(atomic, 0.0, fam.time_grid.horizon),))
    lhs = integrate_measure_process(phi, fam)
    rhs = integrate_simple(equivalent_simple_strategy(phi, fam), fam)
    return {
        "bound_halves": bool(all(b <= 0.625 * a for a, b in zip(bounds, bounds[1:]))),
        "bound_dominates": bool(all(e <= b + 1e-12 for e, b in zip(errors, bounds))),
        "tv_never_grows": bool(tv_ok),
        "atomic_bit_exact": bool(np.array_equal(lhs.values, rhs.values)),
    }


def cmd_continuity(cfg: RunConfig, writer: RunWriter) -> dict:
    x = cfg.get("continuity", "x")
    offsets = cfg.get("continuity", "offsets")
    if not offsets or any(dx <= 0.0 for dx in offsets):
        raise ConfigError("[continuity] offsets must be positive")
    offsets = tuple(sorted(set(offsets), reverse=True))
    family_kind = cfg.get("continuity", "family")
    tg = _time_grid(cfg)
    scen = _scenarios(cfg)
    targets = [x] + [x + dx for dx in offsets]
    if family_kind == "example21":
        if not (0.0 <= x and max(targets) <= 1.0):
            raise ConfigError("[continuity] maturities must stay inside [0, 1]")
        fam = example21_columns(cfg.get("model", "n_max"), tg, scen, targets)
    elif family_kind == "gaussian":
        t_star = cfg.get("grid", "T_star")
        if max(targets) > t_star:
            raise ConfigError("[continuity] maturities must not exceed [grid] T_star")
        grid = MaturityGrid(np.asarray(sorted(set(targets))), t_star=t_star)
        fam = gen_gaussian_market(_market_params(cfg), tg, grid, scen).Pbar
    else:
        raise ConfigError(
            f"[continuity] family: unknown {family_kind!r} (known: example21, gaussian)"
        )
    profile = continuity_profile(fam, x, offsets, default_dictionary())
    writer.csv("continuity_profile.csv", ("dx", "emery_proxy"), profile)
    slack = _monotone_slack(scen.count)
    monotone = all(p2 <= p1 + slack for (_, p1), (_, p2) in zip(profile, profile[1:]))
    return {"monotone": bool(monotone), "smallest_offset_proxy": float(profile[-1][1])}


def cmd_simulate(cfg: RunConfig, writer: RunWriter) -> dict:
    tag = cfg.get("model", "tag")
    seed = cfg.get("scenarios", "seed")
    summary = {"model": tag}
    if tag == "gaussian2f":
        market = _gaussian_market(cfg)
        writer.binary("pbar.paths", lambda p: save_paths(p, market.Pbar, seed=seed, model=tag))
        writer.binary("bank.paths", lambda p: save_paths(p, market.bank, seed=seed, model=tag))
        writer.binary("density.paths", lambda p: save_paths(p, market.density, seed=seed, model=tag))
        summary["terminal_bank_mean"] = float(np.mean(market.bank.terminal))
        summary["terminal_density_mean"] = float(np.mean(market.density.terminal))
    elif tag in ("example21", "example22"):
        n_max = cfg.get("model", "n_max")
        if n_max < 2:
            raise ConfigError("[model] n_max: need n_max >= 2 for the approximation ladder")
        grid = example21_maturity_grid(n_max)
        fam = gen_example21(n_max, _time_grid(cfg), grid, _scenarios(cfg))
        if tag == "example22":
            ks = cfg.get("model", "cutoff_k")
            if not ks:
                raise ConfigError("[model] cutoff_k: need a cutoff for example22")
            fam = gen_example22_perturbed(fam, ks[0])
            summary["cutoff_k"] = int(ks[0])
        writer.binary("family.paths", lambda p: save_paths(p, fam, seed=seed, model=tag))
        summary["terminal_abs_mean"] = float(np.mean(np.abs(fam.values[:, -1, :])))
    else:
        raise ConfigError(
            f"[model] tag: unknown {tag!r} (known: gaussian2f, example21, example22)"
        )
    writer.json("simulate_summary.json", summary)
    return {"generated": True}


_COMMANDS = {
    "example21": cmd_example21,
    "example22": cmd_example22,
    "utility": cmd_utility,
    "superrep": cmd_superrep,
    "measure": cmd_measure,
    "continuity": cmd_continuity,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------------------
# driver


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file")
    common.add_argument("--seed", type=int, help="override [scenarios] seed")
    common.add_argument("--scenarios", type=int, help="override [scenarios] count")
    common.add_argument("--out", metavar="DIR", help="override [output] directory")
    common.add_argument(
        "--json-only", action="store_true", help="write JSON outputs only, skip CSV and path files"
    )
    parser = argparse.ArgumentParser(
        prog="bondint",
        description="simulation studies for stochastic integration against bond families",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "example21": "convergence of the jump-family integral ladder",
        "example22": "instability of the ladder under family truncation",
        "utility": "primal/dual utility maximization on the Gaussian market",
        "superrep": "super-replication prices and regression hedging",
        "measure": "Dirac approximation of measure-valued strategies",
        "continuity": "maturity-continuity profiles",
        "simulate": "generate and save path families",
    }
    for name, fn in _COMMANDS.items():
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _resolve(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides[("scenarios", "seed")] = args.seed
    if args.scenarios is not None:
        overrides[("scenarios", "count")] = args.scenarios
    if args.out is not None:
        overrides[("output", "directory")] = args.out
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        json_only = args.json_only or "csv" not in cfg.get("output", "formats")
        run_id = (
            f"{args.command}-s{cfg.get('scenarios', 'seed')}-c{cfg.get('scenarios', 'count')}"
        )
        writer = RunWriter(Path(cfg.get("output", "directory")) / run_id, json_only)
        writer.text("resolved_config.ini", resolved_text(cfg))
        t0 = time.perf_counter()
        verdicts = _COMMANDS[args.command](cfg, writer)
        wall = time.perf_counter() - t0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure contract: exit 1 with the reason
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    passed = all(v for v in verdicts.values() if isinstance(v, bool))
    writer.json("verdicts.json", verdicts)
    manifest = {
        "command": args.command,
        "config_sha256": config_sha256(cfg),
        "seed": cfg.get("scenarios", "seed"),
        "scenarios": cfg.get("scenarios", "count"),
        "wall_time_s": round(wall, 3),
        "outputs": sorted(writer.outputs),
        "verdicts": verdicts,
        "pass": passed,
    }
    writer.json("manifest.json", manifest)
    for key, value in sorted(verdicts.items()):
        if isinstance(value, bool):
            print(f"[{'PASS' if value else 'FAIL'}] {key}")
        else:
            print(f"{key} = {_fmt(value)}")
    print(f"wrote {len(writer.outputs)} files to {writer.directory}")
    return 0 if passed else 2


if __name__ == "__main__":
    sys.exit(main())
