"""Semidefinite programs over Hermitian blocks and their interior-point solver."""
from .broadcast import (
    build_dual,
    build_primal,
    check_feasible_dual,
    check_feasible_primal,
    dual_candidate,
    dual_point_from_solution,
    primal_candidate_2broadcast,
)
from .problem import SdpProblem, check_feasible, from_json_dict, to_json_dict
from .solver import SdpSolution, SolverOptions, solve
