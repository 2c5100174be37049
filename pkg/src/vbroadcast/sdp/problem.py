"""Standard-form SDPs over Hermitian matrix variables.

A problem has Hermitian matrix variables (PSD or sign-free), real scalar
variables (nonnegative or free), a linear objective and groups of linear
equalities. A :class:`ConstraintGroup` on a space ``g`` stands for the
``D**2`` real equations (``D`` = side of ``g``)::

    sum_terms coef * <H_k, lift(V)> + sum_s scalar_coefs[s][k] * s = rhs[k]

where ``H_k`` runs over :mod:`.basis` on ``g`` and
``lift(V) = tr_{V \\ g}(V) ⊗ I_{g \\ V}`` matches subsystems by label.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..linalg import SystemLayout, embed, min_eigenvalue, partial_trace
from . import basis

SCHEMA_ID = "vbroadcast-sdp/1"


@dataclass(frozen=True)
class MatrixVar:
    name: str
    layout: SystemLayout
    psd: bool = True

    @property
    def side(self) -> int:
        return self.layout.total_dim


@dataclass(frozen=True)
class ScalarVar:
    name: str
    nonneg: bool = True


@dataclass(frozen=True)
class Term:
    var: str
    coef: float = 1.0


@dataclass(frozen=True)
class ConstraintGroup:
    name: str
    space: SystemLayout
    terms: tuple[Term, ...]
    rhs: np.ndarray
    scalar_coefs: Mapping[str, np.ndarray] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.space.total_dim

    @property
    def size(self) -> int:
        return self.dim**2


@dataclass(frozen=True)
class Objective:
    matrices: Mapping[str, np.ndarray] = field(default_factory=dict)
    scalars: Mapping[str, float] = field(default_factory=dict)
    sense: str = "min"


@dataclass(frozen=True)
class SdpProblem:
    variables: tuple[MatrixVar, ...]
    scalars: tuple[ScalarVar, ...]
    objective: Objective
    groups: tuple[ConstraintGroup, ...]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        names = [v.name for v in self.variables] + [s.name for s in self.scalars]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        if self.objective.sense not in ("min", "max"):
            raise ValueError("objective sense must be 'min' or 'max'")
        for name, c in self.objective.matrices.items():
            var = self.var(name)
            c = np.asarray(c)
            if c.shape != (var.side, var.side) or not np.allclose(c, c.conj().T, atol=1e-12):
                raise ValueError(f"objective coefficient for {name} must be Hermitian of side {var.side}")
        for g in self.groups:
            if np.asarray(g.rhs).shape != (g.size,):
                raise ValueError(f"group {g.name}: rhs must have length {g.size}")
            for t in g.terms:
                self.var(t.var)
            for s, vec in g.scalar_coefs.items():
                self.scalar(s)
                if np.asarray(vec).shape != (g.size,):
                    raise ValueError(f"group {g.name}: coefficients of {s} must have length {g.size}")

    def var(self, name: str) -> MatrixVar:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(f"no matrix variable named {name!r}")

    def scalar(self, name: str) -> ScalarVar:
        for s in self.scalars:
            if s.name == name:
                return s
        raise KeyError(f"no scalar variable named {name!r}")

    @property
    def num_equalities(self) -> int:
        return sum(g.size for g in self.groups)

    def group(self, name: str) -> ConstraintGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(f"no constraint group named {name!r}")


# ---- linear maps -----------------------------------------------------------


def lift(value: np.ndarray, var_layout: SystemLayout, space: SystemLayout) -> np.ndarray:
    """``tr_{V\\g}(V) ⊗ I_{g\\V}`` in the subsystem order of ``space``."""
    shared = [label for label in space.labels if label in var_layout]
    for label in shared:
        if var_layout.dim(label) != space.dim(label):
            raise ValueError(f"subsystem {label} has different dimensions in variable and group")
    reduced = partial_trace(value, var_layout, shared)
    shared_in_var_order = [label for label in var_layout.labels if label in shared]
    return embed(reduced, shared_in_var_order, space)


def lift_adjoint(y: np.ndarray, space: SystemLayout, var_layout: SystemLayout) -> np.ndarray:
    """Adjoint of :func:`lift` with respect to ``<A, B> = Re tr(A B)``."""
    shared = [label for label in var_layout.labels if label in space]
    reduced = partial_trace(y, space, shared)
    shared_in_space_order = [label for label in space.labels if label in shared]
    return embed(reduced, shared_in_space_order, var_layout)


def group_values(problem: SdpProblem, group: ConstraintGroup, values: Mapping[str, object]) -> np.ndarray:
    """Left-hand side of every equation in ``group``."""
    out = np.zeros(group.size)
    for t in group.terms:
        var = problem.var(t.var)
        out += t.coef * basis.coords(lift(np.asarray(values[t.var]), var.layout, group.space))
    for s, vec in group.scalar_coefs.items():
        out += np.asarray(vec) * float(values[s])
    return out


def objective_value(problem: SdpProblem, values: Mapping[str, object]) -> float:
    total = 0.0
    for name, c in problem.objective.matrices.items():
        total += float(np.real(np.sum(np.asarray(c).T * np.asarray(values[name]))))
    for name, w in problem.objective.scalars.items():
        total += w * float(values[name])
    return total


@dataclass
class FeasibilityReport:
    max_equality_residual: float
    min_block_eigenvalue: float
    min_scalar: float
    objective: float
    tol: float
    block_min_eigenvalues: dict[str, float] = field(default_factory=dict)
    group_residuals: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.max_equality_residual <= self.tol
            and self.min_block_eigenvalue >= -self.tol
            and self.min_scalar >= -self.tol
        )


def check_feasible(problem: SdpProblem, candidate: Mapping[str, object], tol: float = 1e-9) -> FeasibilityReport:
    """Evaluate equality residuals, PSD margins and the objective at ``candidate``."""
    names = {v.name for v in problem.variables} | {s.name for s in problem.scalars}
    missing = names - set(candidate)
    extra = set(candidate) - names
    if missing or extra:
        raise KeyError(f"candidate mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
    for v in problem.variables:
        shape = np.shape(candidate[v.name])
        if shape != (v.side, v.side):
            raise ValueError(f"{v.name}: expected shape {(v.side, v.side)}, got {shape}")
    group_res = {}
    for g in problem.groups:
        # residual reported entrywise on the operator, not on basis coordinates
        res = basis.decode(group_values(problem, g, candidate) - np.asarray(g.rhs), g.dim)
        group_res[g.name] = float(np.max(np.abs(res), initial=0.0))
    eigs = {v.name: min_eigenvalue(np.asarray(candidate[v.name])) for v in problem.variables if v.psd}
    nonneg = [float(candidate[s.name]) for s in problem.scalars if s.nonneg]
    return FeasibilityReport(
        max_equality_residual=max(group_res.values(), default=0.0),
        min_block_eigenvalue=min(eigs.values(), default=np.inf),
        min_scalar=min(nonneg, default=np.inf),
        objective=objective_value(problem, candidate),
        tol=tol,
        block_min_eigenvalues=eigs,
        group_residuals=group_res,
    )


# ---- JSON dump -------------------------------------------------------------


def _pairs(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return np.stack([m.real, m.imag], axis=-1).tolist()


def _unpairs(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _layout_json(layout: SystemLayout) -> list:
    return [[label, dim] for label, dim in layout.subsystems]


def to_json_dict(problem: SdpProblem) -> dict:
    """Problem as a ``vbroadcast-sdp/1`` document; complex entries are ``[re, im]``."""
    return {
        "schema": SCHEMA_ID,
        "metadata": dict(problem.metadata),
        "basis": "matrix-unit hermitian: diagonal units, symmetric pairs a<b, antisymmetric pairs a<b",
        "blocks": [
            {"name": v.name, "layout": _layout_json(v.layout), "side": v.side, "psd": v.psd}
            for v in problem.variables
        ],
        "scalars": [{"name": s.name, "nonneg": s.nonneg} for s in problem.scalars],
        "objective": {
            "sense": problem.objective.sense,
            "blocks": {k: _pairs(c) for k, c in problem.objective.matrices.items()},
            "scalars": dict(problem.objective.scalars),
        },
        "equalities": [
            {
                "name": g.name,
                "space": _layout_json(g.space),
                "terms": [{"var": t.var, "coef": t.coef} for t in g.terms],
                "scalar_coefs": {k: np.asarray(v).tolist() for k, v in g.scalar_coefs.items()},
                "rhs": np.asarray(g.rhs).tolist(),
            }
            for g in problem.groups
        ],
    }


def from_json_dict(doc: Mapping) -> SdpProblem:
    if doc.get("schema") != SCHEMA_ID:
        raise ValueError(f"unsupported schema {doc.get('schema')!r}")
    variables = tuple(
        MatrixVar(b["name"], SystemLayout(map(tuple, b["layout"])), bool(b["psd"])) for b in doc["blocks"]
    )
    scalars = tuple(ScalarVar(s["name"], bool(s["nonneg"])) for s in doc["scalars"])
    obj = doc["objective"]
    objective = Objective(
        {k: _unpairs(v) for k, v in obj["blocks"].items()},
        {k: float(v) for k, v in obj["scalars"].items()},
        obj["sense"],
    )
    groups = tuple(
        ConstraintGroup(
            g["name"],
            SystemLayout(map(tuple, g["space"])),
            tuple(Term(t["var"], float(t["coef"])) for t in g["terms"]),
            np.asarray(g["rhs"], dtype=float),
            {k: np.asarray(v, dtype=float) for k, v in g["scalar_coefs"].items()},
        )
        for g in doc["equalities"]
    )
    return SdpProblem(variables, scalars, objective, groups, dict(doc.get("metadata", {})))


def dumps(problem: SdpProblem, **kwargs) -> str:
    return json.dumps(to_json_dict(problem), **kwargs)
