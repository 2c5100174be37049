"""Simulation costs of universal broadcasting: closed forms, SDP values, certificates.

Costs are carried in linear form (``gamma = p1 + p2``) and in bits
(``log2 gamma``).
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._config import SizeCapError, check_side
from .protocols import choi_universal_nbroadcast, gamma_prime_channels, verify_cptp
from .sdp.broadcast import (
    build_dual,
    build_primal,
    check_feasible_dual,
    check_feasible_primal,
    dual_candidate,
    primal_candidate_2broadcast,
)
from .sdp.problem import FeasibilityReport
from .sdp.solver import SdpSolution, SolverOptions, solve

BOUND_SLACK = 1e-5


class SdpNotConverged(RuntimeError):
    def __init__(self, message: str, solution: SdpSolution):
        super().__init__(message)
        self.solution = solution


class BoundViolation(RuntimeError):
    pass


@dataclass
class CostReport:
    d: int
    n: int
    gamma_linear: float
    source: str
    lower_bound_linear: float
    upper_bound_linear: float
    solver: dict = field(default_factory=dict)

    @property
    def gamma_log(self) -> float:
        return math.log2(self.gamma_linear)

    def within_bounds(self, slack: float = BOUND_SLACK) -> bool:
        return self.lower_bound_linear - slack <= self.gamma_linear <= self.upper_bound_linear + slack

    def to_dict(self) -> dict:
        out = asdict(self)
        out["gamma_log"] = self.gamma_log
        return out


def _require_d(d: int) -> None:
    if d < 2:
        raise ValueError("broadcasting costs are defined here for d >= 2")


def gamma2_analytic(d: int) -> CostReport:
    """Optimal 2-broadcasting cost ``3 - 4/(d+1) = (3d-1)/(d+1)``."""
    _require_d(d)
    g = (3 * d - 1) / (d + 1)
    lower, upper = bounds_n(d, 2)
    return CostReport(d, 2, g, "analytic", lower, upper)


def bounds_n(d: int, n: int) -> tuple[float, float]:
    """``(2nd/(n+d-1) - 1, 2n - 1)``, lower and upper bounds on the linear cost."""
    _require_d(d)
    if n < 2:
        raise ValueError("n must be at least 2")
    return 2 * n * d / (n + d - 1) - 1, float(2 * n - 1)


def optimal_cost_sdp(d: int, n: int, opts: SolverOptions | None = None, cap: int | None = None) -> CostReport:
    problem = build_primal(d, n, cap)
    sol = solve(problem, opts)
    if not sol.optimal:
        raise SdpNotConverged(f"SDP for d={d}, n={n} ended with status {sol.status}", sol)
    lower, upper = bounds_n(d, n)
    report = CostReport(
        d,
        n,
        sol.primal_objective,
        "sdp",
        lower,
        upper,
        solver={
            "status": sol.status,
            "iterations": sol.iterations,
            "dual_objective": sol.dual_objective,
            "gap": sol.gap,
            "primal_infeasibility": sol.primal_infeasibility,
            "dual_infeasibility": sol.dual_infeasibility,
        },
    )
    if not report.within_bounds():
        raise BoundViolation(f"SDP value {report.gamma_linear} outside [{lower}, {upper}]")
    return report


@dataclass
class Certificate2Report:
    d: int
    primal: FeasibilityReport
    dual: FeasibilityReport

    @property
    def primal_pass(self) -> bool:
        return self.primal.passed

    @property
    def dual_pass(self) -> bool:
        return self.dual.passed

    @property
    def primal_obj(self) -> float:
        return self.primal.objective

    @property
    def dual_obj(self) -> float:
        return self.dual.objective

    @property
    def gap(self) -> float:
        return self.primal_obj - self.dual_obj

    @property
    def passed(self) -> bool:
        return self.primal_pass and self.dual_pass

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": 2,
            "primal_pass": self.primal_pass,
            "dual_pass": self.dual_pass,
            "primal_obj": self.primal_obj,
            "dual_obj": self.dual_obj,
            "gap": self.gap,
            "primal_max_residual": self.primal.max_equality_residual,
            "primal_min_eigenvalue": self.primal.min_block_eigenvalue,
            "dual_max_residual": self.dual.max_equality_residual,
            "dual_min_eigenvalue": self.dual.min_block_eigenvalue,
        }


def certificate_2broadcast(d: int, tol: float = 1e-9, primal_candidate: dict | None = None) -> Certificate2Report:
    """Check the closed-form primal and dual points of the 2-broadcasting SDP."""
    _require_d(d)
    candidate = primal_candidate_2broadcast(d) if primal_candidate is None else primal_candidate
    primal = check_feasible_primal(build_primal(d, 2), candidate, tol)
    dual = check_feasible_dual(build_dual(d, 2), dual_candidate(d, 2), tol)
    return Certificate2Report(d, primal, dual)


@dataclass
class BoundsCertificateReport:
    d: int
    n: int
    upper_from_gamma_prime: float
    m1_cptp: bool
    m2_cptp: bool
    decomposition_error: float
    dual: FeasibilityReport
    tol: float

    @property
    def dual_lower_pass(self) -> bool:
        return self.dual.passed

    @property
    def lower_obj(self) -> float:
        return self.dual.objective

    @property
    def upper_pass(self) -> bool:
        return self.m1_cptp and self.m2_cptp and self.decomposition_error <= self.tol

    @property
    def passed(self) -> bool:
        return self.upper_pass and self.dual_lower_pass

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "upper_from_gamma_prime": self.upper_from_gamma_prime,
            "m1_cptp": self.m1_cptp,
            "m2_cptp": self.m2_cptp,
            "decomposition_error": self.decomposition_error,
            "dual_lower_pass": self.dual_lower_pass,
            "lower_obj": self.lower_obj,
            "dual_max_residual": self.dual.max_equality_residual,
            "dual_min_eigenvalue": self.dual.min_block_eigenvalue,
        }


def certificate_nbroadcast_bounds(d: int, n: int, tol: float = 1e-9, cap: int | None = None) -> BoundsCertificateReport:
    """Upper bound from ``Γ' = n M1 - (n-1) M2``, lower bound from the symmetric dual point."""
    _require_d(d)
    dec = gamma_prime_channels(d, n, cap)
    gp = choi_universal_nbroadcast(d, n, cap)
    err = float(np.max(np.abs(dec.combined().matrix - gp.matrix)))
    dual = check_feasible_dual(build_dual(d, n, cap), dual_candidate(d, n), tol)
    return BoundsCertificateReport(
        d,
        n,
        dec.gamma,
        verify_cptp(dec.choi1, 1.0, tol).passed,
        verify_cptp(dec.choi2, 1.0, tol).passed,
        err,
        dual,
        tol,
    )


@dataclass
class SweepRow:
    n: int
    lower_linear: float
    sdp_linear: float | None
    upper_linear: float

    def as_record(self) -> dict:
        def lg(x):
            return None if x is None else math.log2(x)

        return {
            "n": self.n,
            "lower_linear": self.lower_linear,
            "sdp_linear": self.sdp_linear,
            "upper_linear": self.upper_linear,
            "lower_log2": lg(self.lower_linear),
            "sdp_log2": lg(self.sdp_linear),
            "upper_log2": lg(self.upper_linear),
        }


SWEEP_FIELDS = ("n", "lower_linear", "sdp_linear", "upper_linear", "lower_log2", "sdp_log2", "upper_log2")


def sweep(
    d: int,
    n_min: int,
    n_max: int,
    sdp_up_to: int | None = None,
    opts: SolverOptions | None = None,
    workers: int = 1,
    cap: int | None = None,
) -> list[SweepRow]:
    """Bounds for every ``n`` in ``[n_min, n_max]``, plus SDP values where allowed.

    Rows with ``n > sdp_up_to`` or beyond the size cap carry bounds only.
    """
    if n_min < 2 or n_max < n_min:
        raise ValueError("need 2 <= n_min <= n_max")

    def row(n: int) -> SweepRow:
        lower, upper = bounds_n(d, n)
        value = None
        if sdp_up_to is not None and n <= sdp_up_to:
            try:
                check_side(d ** (n + 1), cap)
            except SizeCapError:
                pass
            else:
                value = optimal_cost_sdp(d, n, opts, cap).gamma_linear
        return SweepRow(n, lower, value, upper)

    ns = range(n_min, n_max + 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(row, ns))
    return [row(n) for n in ns]


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in r.as_record().items()})
    return buf.getvalue()


def rows_to_json(rows: list[SweepRow]) -> str:
    return json.dumps([r.as_record() for r in rows])
