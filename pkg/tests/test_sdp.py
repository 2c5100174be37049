import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbroadcast.linalg import SystemLayout, max_entangled, random_hermitian
from vbroadcast.sdp import basis
from vbroadcast.sdp.broadcast import (
    build_dual,
    build_primal,
    check_feasible_dual,
    check_feasible_primal,
    dual_candidate,
    dual_point_from_solution,
    primal_candidate_2broadcast,
)
from vbroadcast.sdp.problem import (
    ConstraintGroup,
    MatrixVar,
    Objective,
    ScalarVar,
    SdpProblem,
    Term,
    check_feasible,
    from_json_dict,
    to_json_dict,
)
from vbroadcast.sdp.solver import INFEASIBLE, SolverOptions, solve


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_basis_round_trip(seed, dim):
    y = random_hermitian(dim, np.random.default_rng(seed))
    assert np.allclose(basis.decode(basis.coords(y), dim), y)


@pytest.mark.parametrize("dim", [1, 2, 3, 5])
def test_basis_orthonormal(dim):
    h = basis.basis_matrices(dim)
    gram = np.einsum("kab,lba->kl", h, h)
    assert np.allclose(gram, np.eye(dim * dim))
    assert all(np.allclose(x, x.conj().T) for x in h)


@pytest.mark.parametrize("dim", [1, 2, 3, 5])
def test_contract_units_against_einsum(dim):
    rng = np.random.default_rng(dim)
    t = rng.normal(size=(3, dim, dim, 2)) + 1j * rng.normal(size=(3, dim, dim, 2))
    h = basis.basis_matrices(dim)
    expect = np.einsum("kab,xaby->xky", h, t)
    assert np.allclose(basis.contract_units(t, dim, axis=1), expect)


def _trace_one_problem(c):
    dim = c.shape[0]
    return SdpProblem(
        variables=(MatrixVar("X", SystemLayout.of(S=dim)),),
        scalars=(),
        objective=Objective({"X": c}, {}, "min"),
        groups=(ConstraintGroup("trace", SystemLayout([]), (Term("X", 1.0),), np.ones(1)),),
    )


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_solver_min_eigenvalue(seed):
    c = random_hermitian(5, np.random.default_rng(seed))
    sol = solve(_trace_one_problem(c))
    assert sol.optimal
    assert abs(sol.primal_objective - np.linalg.eigvalsh(c)[0]) < 1e-6
    assert sol.primal_objective >= sol.dual_objective - 1e-7


def test_solver_maximisation_and_free_scalar():
    # max t subject to X + t = 2 and X = 1 on a 1x1 block, so t = 1
    p = SdpProblem(
        variables=(MatrixVar("X", SystemLayout.of(S=1)),),
        scalars=(ScalarVar("t", nonneg=False),),
        objective=Objective({}, {"t": 1.0}, "max"),
        groups=(
            ConstraintGroup("sum", SystemLayout([]), (Term("X", 1.0),), np.array([2.0]), {"t": np.ones(1)}),
            ConstraintGroup("floor", SystemLayout([]), (Term("X", 1.0),), np.array([1.0])),
        ),
    )
    sol = solve(p)
    assert sol.optimal
    assert abs(sol.scalar_values["t"] - 1.0) < 1e-6


def test_solver_detects_inconsistent_equalities():
    p = SdpProblem(
        variables=(MatrixVar("X", SystemLayout.of(S=2)),),
        scalars=(),
        objective=Objective({"X": np.eye(2)}, {}, "min"),
        groups=(
            ConstraintGroup("a", SystemLayout([]), (Term("X", 1.0),), np.ones(1)),
            ConstraintGroup("b", SystemLayout([]), (Term("X", 2.0),), np.ones(1)),
        ),
    )
    assert solve(p).status == INFEASIBLE


def test_primal_structure():
    p = build_primal(2, 3)
    assert [v.name for v in p.variables] == ["J1", "J2"]
    assert [g.name for g in p.groups] == ["marginal_B1", "marginal_B2", "marginal_B3", "trace_J1", "trace_J2"]
    assert p.var("J1").side == 16
    assert p.num_equalities == 3 * 16 + 2 * 4


def test_json_round_trip():
    for p in (build_primal(2, 2), build_dual(2, 2)):
        doc = json.loads(json.dumps(to_json_dict(p)))
        assert doc["schema"] == "vbroadcast-sdp/1"
        q = from_json_dict(doc)
        assert to_json_dict(q) == to_json_dict(p)


def test_zero_candidate_is_infeasible():
    p = build_primal(2, 2)
    zero = {"J1": np.zeros((8, 8)), "J2": np.zeros((8, 8)), "p1": 0.0, "p2": 0.0}
    rep = check_feasible_primal(p, zero)
    assert not rep.passed
    assert np.isclose(rep.max_equality_residual, 1.0)


def test_candidate_name_mismatch():
    with pytest.raises(KeyError):
        check_feasible(build_primal(2, 2), {"J1": np.zeros((8, 8))})
    with pytest.raises(KeyError):
        check_feasible_dual(build_dual(2, 2), {"X1": np.zeros((4, 4))})


@pytest.mark.parametrize("d", [2, 3])
def test_certificate_points(d):
    pr = check_feasible_primal(build_primal(d, 2), primal_candidate_2broadcast(d))
    du = check_feasible_dual(build_dual(d, 2), dual_candidate(d, 2))
    assert pr.passed and du.passed
    assert abs(pr.objective - (3 * d - 1) / (d + 1)) < 1e-12
    assert abs(pr.objective - du.objective) < 1e-12


def test_perturbed_dual_point_fails():
    cand = dual_candidate(2, 2)
    cand["X1"] = cand["X1"] + 0.1 * max_entangled(2)
    assert not check_feasible_dual(build_dual(2, 2), cand).passed


@pytest.mark.parametrize("d,n,value", [(2, 2, 5 / 3), (3, 2, 2.0), (2, 3, 2.0)])
def test_solve_primal(d, n, value):
    sol = solve(build_primal(d, n))
    assert sol.optimal
    assert abs(sol.primal_objective - value) < 1e-6
    assert sol.primal_objective >= sol.dual_objective - 1e-7


def test_solver_is_deterministic():
    a = solve(build_primal(2, 2))
    b = solve(build_primal(2, 2))
    assert a.primal_objective == b.primal_objective
    assert a.iterations == b.iterations


def test_dual_extraction_is_feasible():
    p = build_primal(2, 2)
    sol = solve(p)
    point = dual_point_from_solution(p, sol)
    rep = check_feasible_dual(build_dual(2, 2), point, tol=1e-6)
    assert rep.passed
    assert abs(rep.objective - 5 / 3) < 1e-6


def test_dual_problem_solves_to_same_value():
    sol = solve(build_dual(2, 2))
    assert sol.optimal
    assert abs(sol.primal_objective - 5 / 3) < 1e-6


def test_solver_options_override():
    sol = solve(build_primal(2, 2), SolverOptions(), max_iter=2)
    assert sol.status == "max_iter"
    assert sol.iterations == 2


def _cvx_keep(cp, expr, dims, keep):
    # trace out every axis not in keep, last axis first so indices stay valid
    dims = list(dims)
    for axis in reversed(range(len(dims))):
        if axis not in keep:
            expr = cp.partial_trace(expr, dims, axis)
            del dims[axis]
    return expr


def test_cross_check_with_cvxpy():
    cp = pytest.importorskip("cvxpy")
    d, n = 2, 3
    dims = [d] * (n + 1)
    side = d ** (n + 1)
    j1 = cp.Variable((side, side), hermitian=True)
    j2 = cp.Variable((side, side), hermitian=True)
    p1, p2 = cp.Variable(nonneg=True), cp.Variable(nonneg=True)
    cons = [j1 >> 0, j2 >> 0]
    for j in range(1, n + 1):
        cons.append(_cvx_keep(cp, j1 - j2, dims, {0, j}) == max_entangled(d))
    cons.append(_cvx_keep(cp, j1, dims, {0}) == p1 * np.eye(d))
    cons.append(_cvx_keep(cp, j2, dims, {0}) == p2 * np.eye(d))
    prob = cp.Problem(cp.Minimize(p1 + p2), cons)
    prob.solve(solver=cp.SCS, eps=1e-8, max_iters=200000)
    ours = solve(build_primal(d, n)).primal_objective
    assert abs(prob.value - ours) < 1e-4
