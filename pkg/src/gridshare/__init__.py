"""Energy-sharing markets on constrained networks.

A library and CLI for studying a peer-to-peer load-reduction market:
prosumers trade through supply-demand-function bids, a platform clears
prices subject to network limits and regulates them against free
riding, and the strategic equilibrium can be computed, verified, and
compared against the social optimum.
"""

from .clearing import (BidProfile, ClearingResult, Settlement, clear_market,
                       regulate_prices, settle)
from .equilibrium import (BrdResult, ContinuumReport, CountSweepRow,
                          EquilibriumDiagnostics, EquilibriumResult, FlowSweepRow,
                          Scenario, SocialOutcome, best_response_dynamics,
                          count_sweep, detect_continuum, equal_partition,
                          flow_sweep, random_scenario, solve_gne,
                          solve_social_optimum, verify_equilibrium)
from .errors import (GridshareError, InfeasibleError, ScenarioFormatError,
                     SolverFailureError)
from .network import FlowReport, Line, Network
from .prosumer import (BestResponse, Dispatch, Prosumer, best_response,
                       disutility, individual_cost, regulated_cost,
                       regulated_price, split_dispatch, unregulated_cost)
from .qp import QpProblem, QpSolution, enumerate_oracle, kkt_residuals, solve
from .scenarios import (LoadedScenario, SweepDefaults, benchmark_scenario,
                        load_scenario, parse_scenario, sevenbus_network,
                        sevenbus_scenario, triangle_scenario)

__version__ = "0.1.0"

__all__ = [
    "BidProfile", "ClearingResult", "Settlement", "clear_market",
    "regulate_prices", "settle",
    "BrdResult", "ContinuumReport", "CountSweepRow", "EquilibriumDiagnostics",
    "EquilibriumResult", "FlowSweepRow", "Scenario", "SocialOutcome",
    "best_response_dynamics", "count_sweep", "detect_continuum",
    "equal_partition", "flow_sweep", "random_scenario", "solve_gne",
    "solve_social_optimum", "verify_equilibrium",
    "GridshareError", "InfeasibleError", "ScenarioFormatError", "SolverFailureError",
    "FlowReport", "Line", "Network",
    "BestResponse", "Dispatch", "Prosumer", "best_response", "disutility",
    "individual_cost", "regulated_cost", "regulated_price", "split_dispatch",
    "unregulated_cost",
    "QpProblem", "QpSolution", "enumerate_oracle", "kkt_residuals", "solve",
    "LoadedScenario", "SweepDefaults", "benchmark_scenario", "load_scenario",
    "parse_scenario", "sevenbus_network", "sevenbus_scenario", "triangle_scenario",
    "__version__",
]
