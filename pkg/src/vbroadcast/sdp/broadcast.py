"""Optimal-simulation-cost SDPs for universal broadcasting, and certificate points.

Primal::

    min p1 + p2
    s.t. tr_{\\B Bj}[J1 - J2] = Φ   (j = 1..n)
         tr_{B1..Bn}[Ji] = pi I_B  (i = 1, 2)
         J1, J2 >= 0

Dual::

    max sum_j tr[Xj Φ]
    s.t. tr Z <= 1,  tr K <= 1
         Z ⊗ I - sum_j Xj ⊗ I >= 0
         K ⊗ I + sum_j Xj ⊗ I >= 0

with ``Xj`` on ``(B, Bj)`` and ``Z``, ``K`` on ``B``.
"""
from __future__ import annotations

import numpy as np

from .._config import check_side
from ..linalg import SystemLayout, embed, max_entangled
from ..protocols import broadcast_layout, choi_optimal_2broadcast, output_labels
from . import basis
from .problem import (
    ConstraintGroup,
    FeasibilityReport,
    MatrixVar,
    Objective,
    ScalarVar,
    SdpProblem,
    Term,
    check_feasible,
)


def _validate(d: int, n: int, cap: int | None) -> None:
    if d < 1:
        raise ValueError("d must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    check_side(d ** (n + 1), cap)


def build_primal(d: int, n: int, cap: int | None = None) -> SdpProblem:
    _validate(d, n, cap)
    layout = broadcast_layout(d, n)
    b_only = SystemLayout([("B", d)])
    phi_coords = basis.coords(max_entangled(d))
    trace_coords = basis.coords(np.eye(d))
    groups = []
    for out in output_labels(n):
        groups.append(
            ConstraintGroup(
                f"marginal_{out}",
                SystemLayout([("B", d), (out, d)]),
                (Term("J1", 1.0), Term("J2", -1.0)),
                phi_coords.copy(),
            )
        )
    for i in (1, 2):
        groups.append(
            ConstraintGroup(
                f"trace_J{i}",
                b_only,
                (Term(f"J{i}", 1.0),),
                np.zeros(d * d),
                {f"p{i}": -trace_coords},
            )
        )
    return SdpProblem(
        variables=(MatrixVar("J1", layout), MatrixVar("J2", layout)),
        scalars=(ScalarVar("p1"), ScalarVar("p2")),
        objective=Objective({}, {"p1": 1.0, "p2": 1.0}, "min"),
        groups=tuple(groups),
        metadata={"d": d, "n": n, "kind": "primal"},
    )


def build_dual(d: int, n: int, cap: int | None = None) -> SdpProblem:
    _validate(d, n, cap)
    layout = broadcast_layout(d, n)
    outs = output_labels(n)
    side = layout.total_dim
    xs = tuple(MatrixVar(f"X{j}", SystemLayout([("B", d), (out, d)]), psd=False) for j, out in enumerate(outs, 1))
    b_only = SystemLayout([("B", d)])
    trivial = SystemLayout([])
    phi = max_entangled(d)
    groups = (
        ConstraintGroup(
            "slack_upper",
            layout,
            (Term("S1", 1.0), Term("Z", -1.0)) + tuple(Term(x.name, 1.0) for x in xs),
            np.zeros(side * side),
        ),
        ConstraintGroup(
            "slack_lower",
            layout,
            (Term("S2", 1.0), Term("K", -1.0)) + tuple(Term(x.name, -1.0) for x in xs),
            np.zeros(side * side),
        ),
        ConstraintGroup("trace_Z", trivial, (Term("Z", 1.0),), np.ones(1), {"t1": np.ones(1)}),
        ConstraintGroup("trace_K", trivial, (Term("K", 1.0),), np.ones(1), {"t2": np.ones(1)}),
    )
    return SdpProblem(
        variables=xs
        + (
            MatrixVar("Z", b_only, psd=False),
            MatrixVar("K", b_only, psd=False),
            MatrixVar("S1", layout),
            MatrixVar("S2", layout),
        ),
        scalars=(ScalarVar("t1"), ScalarVar("t2")),
        objective=Objective({x.name: phi for x in xs}, {}, "max"),
        groups=groups,
        metadata={"d": d, "n": n, "kind": "dual"},
    )


def dual_slacks(d: int, n: int, xs: list[np.ndarray], z: np.ndarray, k: np.ndarray) -> dict:
    """Complete ``(X1..Xn, Z, K)`` to every variable of :func:`build_dual`."""
    layout = broadcast_layout(d, n)
    total = sum(embed(x, ("B", out), layout) for x, out in zip(xs, output_labels(n)))
    values = {f"X{j}": np.asarray(x) for j, x in enumerate(xs, 1)}
    values.update(
        Z=np.asarray(z),
        K=np.asarray(k),
        S1=embed(z, ("B",), layout) - total,
        S2=embed(k, ("B",), layout) + total,
        t1=1.0 - float(np.trace(z).real),
        t2=1.0 - float(np.trace(k).real),
    )
    return values


def check_feasible_primal(problem: SdpProblem, candidate: dict, tol: float = 1e-9) -> FeasibilityReport:
    if problem.metadata.get("kind") != "primal":
        raise ValueError("expected a problem from build_primal")
    return check_feasible(problem, candidate, tol)


def check_feasible_dual(problem: SdpProblem, candidate: dict, tol: float = 1e-9) -> FeasibilityReport:
    """Check a dual point given as ``X1..Xn, Z, K``; slack blocks are derived.

    ``block_min_eigenvalues['S1']`` and ``['S2']`` are the margins of the two
    operator inequalities.
    """
    if problem.metadata.get("kind") != "dual":
        raise ValueError("expected a problem from build_dual")
    d, n = int(problem.metadata["d"]), int(problem.metadata["n"])
    names = {f"X{j}" for j in range(1, n + 1)} | {"Z", "K"}
    if set(candidate) != names:
        raise KeyError(f"dual candidate needs exactly {sorted(names)}")
    values = dual_slacks(d, n, [candidate[f"X{j}"] for j in range(1, n + 1)], candidate["Z"], candidate["K"])
    return check_feasible(problem, values, tol)


def primal_candidate_2broadcast(d: int) -> dict:
    """``{p1 J^N1, p2 J^N2, p1, p2}`` from the optimal 2-broadcasting decomposition."""
    dec = choi_optimal_2broadcast(d)
    return {"J1": dec.p1 * dec.choi1.matrix, "J2": dec.p2 * dec.choi2.matrix, "p1": dec.p1, "p2": dec.p2}


def dual_candidate(d: int, n: int) -> dict:
    """``Z = K = I/d`` and ``Xj = 2/(d(n+d-1)) Φ - I/(nd)`` for every ``j``.

    Its objective is ``2nd/(n+d-1) - 1``; for ``n = 2`` it is the optimal
    2-broadcasting dual point.
    """
    x = 2.0 / (d * (n + d - 1)) * max_entangled(d) - np.eye(d * d) / (n * d)
    values = {f"X{j}": x.copy() for j in range(1, n + 1)}
    values["Z"] = np.eye(d) / d
    values["K"] = np.eye(d) / d
    return values


def dual_point_from_solution(problem: SdpProblem, solution) -> dict:
    """Read ``X1..Xn, Z, K`` off the multipliers of a solved primal problem."""
    if problem.metadata.get("kind") != "primal":
        raise ValueError("expected a problem from build_primal")
    d, n = int(problem.metadata["d"]), int(problem.metadata["n"])
    point = {}
    for j, out in enumerate(output_labels(n), 1):
        point[f"X{j}"] = basis.decode(solution.duals[f"marginal_{out}"], d * d)
    point["Z"] = -basis.decode(solution.duals["trace_J1"], d)
    point["K"] = -basis.decode(solution.duals["trace_J2"], d)
    return point
