"""Carbon accounting engine for electric grids.

Solves cost-minimizing DC optimal power flow, derives marginal emissions
rates for buses, lines, and generators by perturbation, and allocates carbon
footprints under location-based, market-based, and carbon-matching regimes,
auditing every ledger against the system's direct emissions.
"""

from .accounting import (
    AUDIT_TOLERANCE,
    BalanceReport,
    FootprintEntry,
    FootprintLedger,
    StorageFootprintResult,
    aer,
    audit_balance,
    ghgp_location_ledger,
    ghgp_market_ledger,
    ledger_records,
    ledger_to_csv,
    ledger_to_dict,
    mer_ledger,
    residual_mix,
    storage_footprint,
)
from .errors import (
    ContractViolationError,
    GridLedgerError,
    InjectionBalanceError,
    InvalidNetworkError,
    MissingRateError,
    NetworkFormatError,
    NetworkStructureError,
    OPFInfeasibleError,
    OPFUnboundedError,
    RateUnavailableError,
    ScenarioError,
    ScenarioInfeasibleError,
    SimplexError,
    StorageScheduleError,
    UndefinedRateError,
)
from .lp import Basis, LinearProgram, LPSolution, SolveStatus, solve_lp
from .mer import (
    DEFAULT_EPSILON,
    Perturbation,
    RateSet,
    RateValue,
    average_bus_rates,
    bus_mer,
    gen_capacity_mer,
    line_mer,
    rate_profile,
)
from .network import (
    Bus,
    Contract,
    Generator,
    Load,
    Network,
    StorageUnit,
    TransmissionLine,
    ValidationReport,
    Violation,
    dump_network,
    flows_from_dispatch,
    load_contracts,
    load_network,
    network_from_dict,
    network_from_json,
    network_to_dict,
    ptdf,
    susceptance_matrix,
    validate,
    with_contracts,
)
from .opf import (
    Adjustments,
    DispatchSolution,
    build_lp,
    scope1,
    solve_dcopf,
)
from .scenario import (
    BeforeAfterReport,
    Change,
    ExpansionCandidate,
    RankedExpansion,
    ScenarioDelta,
    TonBudget,
    apply_delta,
    evaluate,
    load_scenario,
    rank_expansions,
    scenario_from_dict,
    ton_budget,
)

__version__ = "0.1.0"
