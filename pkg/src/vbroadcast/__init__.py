"""Virtual quantum broadcasting: Choi operators, simulation-cost SDPs, and sampling."""
from .costs import (
    CostReport,
    bounds_n,
    certificate_2broadcast,
    certificate_nbroadcast_bounds,
    gamma2_analytic,
    optimal_cost_sdp,
    sweep,
)
from .linalg import SystemLayout, max_entangled, partial_trace, partial_transpose, swap_operator
from .protocols import (
    ChoiOperator,
    HptpDecomposition,
    apply_choi,
    choi_optimal_2broadcast,
    choi_universal_nbroadcast,
    choi_warmup_2broadcast,
    gamma_prime_channels,
    verify_cptp,
    verify_universal,
)
from .sampling import Observable, bias_check, exact_expectation, hoeffding_rounds, pauli_observable, run_estimation
from .sdp import SdpSolution, SolverOptions, build_dual, build_primal, solve

__version__ = "0.1.0"
