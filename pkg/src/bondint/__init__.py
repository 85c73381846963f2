"""Simulation and verification toolkit for stochastic integration
against maturity-indexed families of semimartingales.

The package builds discrete path families (a jump ladder with
square-summable node masses and a two-factor Gaussian bond market),
integrates simple and generalized strategies against them, proxies the
Emery topology with a dictionary of predictable controls, approximates
measure-valued strategies by Dirac combinations with certified pairing
bounds, and runs utility-duality and super-replication studies on top.
"""

from .grids import (
    GRID_TOL,
    MaturityGrid,
    ScenarioSet,
    TimeGrid,
    snap_index,
)
from .paths import FamilyPaths, PredictableSet, ProcessPaths
from .stats import RunningMoments, mc_mean_se, within_se
from .models import (
    BondMarket,
    GaussianMarketParams,
    bond_vol,
    example21_columns,
    example21_maturity_grid,
    example21_second_moment,
    example22_bound,
    extend_after_maturity,
    forward_rates,
    gen_example21,
    gen_example22_perturbed,
    gen_gaussian_market,
    integrated_bond_vol,
    iter_example21_blocks,
    iter_example22_blocks,
    merton_projection_value,
    node_maturities,
    zcb_call_closed_form,
)
from .integration import (
    AdmissibilityReport,
    ConstWeight,
    DivergenceSuspected,
    GeneralizedStrategy,
    IntegrationDiagnostics,
    Leg,
    NOT_IN_DOMAIN,
    SimpleStrategy,
    StateWeight,
    TableWeight,
    admissibility_check,
    available_strategies,
    bank_position,
    combine_strategies,
    evaluate_functional,
    integrate_generalized,
    integrate_generalized_blocked,
    integrate_simple,
    leg,
    make_strategy,
    portfolio_value,
    register_strategy,
    scale_strategy,
)
from .emery import (
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
from .duality import (
    ClaimSpec,
    GapReport,
    OptimizerConfig,
    PrimalResult,
    SuperhedgeResult,
    UtilitySpec,
    WealthResult,
    budget_root,
    conjugacy_gap,
    conjugate_value,
    custom_utility,
    dual_value,
    log_utility,
    make_forward_claim,
    make_zcb_call,
    optimal_terminal_wealth,
    orthogonal_drift_densities,
    power_utility,
    primal_finite_bonds,
    primal_nested,
    superhedge_strategy,
    superrep_price,
    superrep_report,
)
from .serialize import load_paths, save_paths, write_csv
from .config import ConfigError, RunConfig, config_sha256, load_config, resolved_text

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
