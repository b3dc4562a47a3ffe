"""Multi-period vehicle routing with driver workload balance.

Phase 1 routes each period at minimum distance (``cvrp``); phase 2 assigns
the routes to drivers to minimise the largest total workload (``balance``).
"""

from .balance import (
    BalanceResult,
    FeasibilityOutcome,
    brute_force_balance,
    construct_initial,
    feasible,
    gap_percent,
    optimize_balance,
    workload_lower_bound,
)
from .cvrp import solve_all_periods, solve_exact_small, solve_heuristic
from .harness import emit_reports, run_horizon_study, run_pipeline
from .instances import (
    derive_driver_count,
    generate_mvrpb,
    load_instance,
    load_plans,
    parse_cvrp,
    save_instance,
    save_plans,
    synthetic_base,
    truncate_horizon,
)
from .model import (
    Assignment,
    Budget,
    CvrpBase,
    MvrpbInstance,
    PeriodDemand,
    PeriodPlan,
    Route,
    build_distance_matrix,
    route_distance,
    validate_solution,
)

__version__ = "0.1.0"
