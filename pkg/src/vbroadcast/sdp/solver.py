"""Dense primal-dual interior-point method for :class:`SdpProblem`.

Infeasible-start path following with the HKM search direction and a
Mehrotra predictor-corrector step. The standard pair being solved is::

    (P)  min <C, X> + c_l x_l + c_f x_f   s.t.  A(X) + A_l x_l + A_f x_f = b,  X >= 0, x_l >= 0
    (D)  max b.y   s.t.  C - A*(y) = Z >= 0,  c_l - A_l' y = z_l >= 0,  A_f' y = c_f

Hermitian blocks stay complex throughout; equality groups are expanded in
the basis of :mod:`.basis`. Linearly dependent equations and free columns
are removed before iterating.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import basis
from .problem import SdpProblem, lift, lift_adjoint

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible_detected"
BREAKDOWN = "breakdown"


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-7
    max_iter: int = 200
    rank_tol: float = 1e-9


@dataclass
class SdpSolution:
    primal_objective: float
    dual_objective: float
    gap: float
    block_values: dict[str, np.ndarray]
    scalar_values: dict[str, float]
    iterations: int
    status: str
    primal_infeasibility: float = np.nan
    dual_infeasibility: float = np.nan
    duals: dict[str, np.ndarray] = field(default_factory=dict)
    dual_slacks: dict[str, np.ndarray] = field(default_factory=dict)
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Compiled:
    """Index bookkeeping and the linear maps of one problem in minimisation form."""

    def __init__(self, p: SdpProblem):
        self.p = p
        sign = 1.0 if p.objective.sense == "min" else -1.0
        self.sign = sign
        self.offsets = {}
        m = 0
        for g in p.groups:
            self.offsets[g.name] = m
            m += g.size
        self.m = m
        self.b = np.concatenate([np.asarray(g.rhs, dtype=float) for g in p.groups]) if p.groups else np.zeros(0)

        self.blocks = [v for v in p.variables if v.psd]
        self.block_terms = {v.name: [] for v in self.blocks}
        for gi, g in enumerate(p.groups):
            for t in g.terms:
                var = p.var(t.var)
                if not var.psd:
                    continue
                if not set(g.space.labels) <= set(var.layout.labels):
                    raise NotImplementedError(
                        f"group {g.name} embeds PSD variable {var.name}; only partial-trace terms are supported"
                    )
                self.block_terms[var.name].append((gi, t.coef))
        self.C = {}
        for v in self.blocks:
            c = p.objective.matrices.get(v.name)
            self.C[v.name] = sign * (np.zeros((v.side, v.side), complex) if c is None else np.asarray(c, complex))

        self.lp = [s.name for s in p.scalars if s.nonneg]
        self.A_l = self._scalar_columns(self.lp)
        self.c_l = np.array([sign * p.objective.scalars.get(s, 0.0) for s in self.lp])

        # free columns: free scalars then coordinates of free matrix variables
        free_scalars = [s.name for s in p.scalars if not s.nonneg]
        cols = [self._scalar_columns(free_scalars)]
        c_f = [sign * p.objective.scalars.get(s, 0.0) for s in free_scalars]
        self.free_matrix = []
        off = len(free_scalars)
        for v in p.variables:
            if v.psd:
                continue
            size = v.side**2
            self.free_matrix.append((v, off, size))
            off += size
            cols.append(self._matrix_columns(v))
            c = p.objective.matrices.get(v.name)
            c_f.extend(sign * basis.coords(np.asarray(c)) if c is not None else np.zeros(size))
        self.free_scalars = free_scalars
        self.A_f = np.hstack(cols) if cols else np.zeros((m, 0))
        self.c_f = np.asarray(c_f, dtype=float)
        self._pair_axes = {}

    def _scalar_columns(self, names):
        a = np.zeros((self.m, len(names)))
        for j, s in enumerate(names):
            for g in self.p.groups:
                vec = g.scalar_coefs.get(s)
                if vec is not None:
                    off = self.offsets[g.name]
                    a[off : off + g.size, j] += vec
        return a

    def _matrix_columns(self, v):
        size = v.side**2
        a = np.zeros((self.m, size))
        hs = basis.basis_matrices(v.side)
        for g in self.p.groups:
            off = self.offsets[g.name]
            for t in g.terms:
                if t.var != v.name:
                    continue
                for k in range(size):
                    a[off : off + g.size, k] += t.coef * basis.coords(lift(hs[k], v.layout, g.space))
        return a

    def apply_block(self, name: str, x: np.ndarray) -> np.ndarray:
        """Contribution of PSD block ``name`` to ``A(X)``."""
        out = np.zeros(self.m)
        var = self.p.var(name)
        for gi, coef in self.block_terms[name]:
            g = self.p.groups[gi]
            off = self.offsets[g.name]
            out[off : off + g.size] += coef * basis.coords(lift(x, var.layout, g.space))
        return out

    def adjoint_block(self, name: str, y: np.ndarray) -> np.ndarray:
        var = self.p.var(name)
        out = np.zeros((var.side, var.side), complex)
        for gi, coef in self.block_terms[name]:
            g = self.p.groups[gi]
            off = self.offsets[g.name]
            yg = basis.decode(y[off : off + g.size], g.dim)
            out += coef * lift_adjoint(yg, g.space, var.layout)
        return out

    def _axes(self, name, g1, g2):
        key = (name, g1, g2)
        if key not in self._pair_axes:
            layout = self.p.var(name).layout
            k = len(layout)
            lab1 = self.p.groups[g1].space.labels
            lab2 = self.p.groups[g2].space.labels
            k1 = [layout.index(x) for x in lab1]
            k2 = [layout.index(x) for x in lab2]
            r1 = [i for i in range(k) if i not in k1]
            r2 = [i for i in range(k) if i not in k2]
            dims = layout.dims
            d1 = int(np.prod([dims[i] for i in k1], dtype=np.int64))
            d2 = int(np.prod([dims[i] for i in k2], dtype=np.int64))
            s1 = layout.total_dim // d1
            s2 = layout.total_dim // d2
            xperm = k1 + r1 + [k + i for i in k2 + r2]
            zperm = k2 + r2 + [k + i for i in k1 + r1]
            self._pair_axes[key] = (dims, xperm, zperm, d1, d2, s1, s2)
        return self._pair_axes[key]

    def schur_block(self, name: str, x: np.ndarray, zinv: np.ndarray) -> np.ndarray:
        """``M_ij = Re tr(A_i X A_j Z^-1)`` restricted to the groups touching ``name``."""
        out = np.zeros((self.m, self.m))
        terms = self.block_terms[name]
        for ia, (g1, c1) in enumerate(terms):
            for g2, c2 in terms[ia:]:
                dims, xperm, zperm, d1, d2, s1, s2 = self._axes(name, g1, g2)
                xp = x.reshape(dims * 2).transpose(xperm).reshape(d1, s1, d2, s2)
                zq = zinv.reshape(dims * 2).transpose(zperm).reshape(d2, s2, d1, s1)
                xm = xp.transpose(0, 2, 1, 3).reshape(d1 * d2, s1 * s2)
                zm = zq.transpose(2, 0, 3, 1).reshape(d1 * d2, s1 * s2)
                # t[a, b, c, e] = sum_{r1 r2} X[(b r1), (c r2)] Zinv[(e r2), (a r1)]
                t = (xm @ zm.T).reshape(d1, d2, d1, d2).transpose(2, 0, 1, 3)
                part = basis.contract_units(basis.contract_units(t, d1, 0), d2, 1).real * (c1 * c2)
                o1 = self.offsets[self.p.groups[g1].name]
                o2 = self.offsets[self.p.groups[g2].name]
                n1, n2 = d1 * d1, d2 * d2
                out[o1 : o1 + n1, o2 : o2 + n2] += part
                if g1 != g2:
                    out[o2 : o2 + n2, o1 : o1 + n1] += part.T
        return out


def _independent(gram: np.ndarray, tol: float) -> np.ndarray:
    """Indices of a maximal linearly independent subset of the Gram matrix's columns."""
    if gram.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, r, piv = sla.qr(gram, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return np.zeros(0, dtype=int)
    rank = int(np.sum(diag > tol * diag[0]))
    return np.sort(piv[:rank])


def _herm(a):
    return (a + a.conj().T) / 2


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest ``a`` with ``X + a dX`` positive semidefinite (``X`` positive definite)."""
    lchol = np.linalg.cholesky(x)
    linv = sla.solve_triangular(lchol, np.eye(x.shape[0]), lower=True)
    w = np.linalg.eigvalsh(_herm(linv @ dx @ linv.conj().T))
    return np.inf if w[0] >= 0 else -1.0 / w[0]


def _max_step_lp(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    return np.inf if not np.any(neg) else float(np.min(-x[neg] / dx[neg]))


def solve(problem: SdpProblem, opts: SolverOptions | None = None, **kwargs) -> SdpSolution:
    """Solve ``problem``; keyword arguments override fields of :class:`SolverOptions`."""
    opts = opts or SolverOptions()
    if kwargs:
        opts = SolverOptions(**{**opts.__dict__, **kwargs})
    cp = _Compiled(problem)
    return _Ipm(cp, opts).run()


class _Ipm:
    def __init__(self, cp: _Compiled, opts: SolverOptions):
        self.cp = cp
        self.opts = opts

    def _presolve(self):
        cp = self.cp
        identity_gram = sum(
            (cp.schur_block(v.name, np.eye(v.side), np.eye(v.side)) for v in cp.blocks), np.zeros((cp.m, cp.m))
        )
        self.block_norms = {
            v.name: np.sqrt(np.diag(cp.schur_block(v.name, np.eye(v.side), np.eye(v.side))).clip(0))
            for v in cp.blocks
        }
        gram = identity_gram + cp.A_l @ cp.A_l.T + cp.A_f @ cp.A_f.T
        rows = _independent(gram, self.opts.rank_tol)
        dropped = np.setdiff1d(np.arange(cp.m), rows)
        if dropped.size:
            coef = np.linalg.solve(gram[np.ix_(rows, rows)], gram[np.ix_(rows, dropped)])
            mismatch = np.abs(cp.b[dropped] - coef.T @ cp.b[rows])
            if np.max(mismatch) > 1e-8 * (1 + np.max(np.abs(cp.b))):
                return "equality constraints are inconsistent"
        self.rows = rows
        af = cp.A_f[rows]
        fcols = _independent(af.T @ af, self.opts.rank_tol) if af.shape[1] else np.zeros(0, int)
        dropped_cols = np.setdiff1d(np.arange(af.shape[1]), fcols)
        if dropped_cols.size:
            null = sla.null_space(af)
            if null.size and np.max(np.abs(cp.c_f @ null)) > 1e-8 * (1 + np.max(np.abs(cp.c_f))):
                return "objective is unbounded along a free direction"
        self.fcols = fcols
        log.debug("presolve kept %d of %d rows and %d of %d free columns", rows.size, cp.m, fcols.size, af.shape[1])
        return None

    def _initial(self):
        cp = self.cp
        b = cp.b[self.rows]
        bmax = float(np.max(np.abs(b), initial=0.0))
        self.X, self.Z = {}, {}
        for v in cp.blocks:
            n = v.side
            norm_a = float(np.max(self.block_norms[v.name][self.rows], initial=0.0))
            norm_c = float(np.linalg.norm(cp.C[v.name]))
            xi = max(10.0, np.sqrt(n), n * (1 + bmax) / (1 + norm_a))
            eta = max(10.0, np.sqrt(n), norm_a, norm_c)
            self.X[v.name] = xi * np.eye(n, dtype=complex)
            self.Z[v.name] = eta * np.eye(n, dtype=complex)
        nl = len(cp.lp)
        self.xl = np.full(nl, max(10.0, 1 + bmax))
        self.zl = np.full(nl, max(10.0, 1 + float(np.max(np.abs(cp.c_l), initial=0.0))))
        self.xf = np.zeros(self.fcols.size)
        self.y = np.zeros(self.rows.size)

    # -- helpers over reduced rows/columns
    def _full_y(self, y):
        out = np.zeros(self.cp.m)
        out[self.rows] = y
        return out

    def _A(self, X, xl, xf):
        cp = self.cp
        total = sum((cp.apply_block(name, x) for name, x in X.items()), np.zeros(cp.m))
        total = total + cp.A_l @ xl + cp.A_f[:, self.fcols] @ xf
        return total[self.rows]

    def _residuals(self):
        cp = self.cp
        yf = self._full_y(self.y)
        rp = cp.b[self.rows] - self._A(self.X, self.xl, self.xf)
        Rd = {v.name: cp.C[v.name] - self.Z[v.name] - cp.adjoint_block(v.name, yf) for v in cp.blocks}
        rdl = cp.c_l - self.zl - cp.A_l.T @ yf
        rdf = cp.c_f[self.fcols] - cp.A_f[:, self.fcols].T @ yf
        return rp, Rd, rdl, rdf

    def _objectives(self):
        cp = self.cp
        pobj = sum(float(np.real(np.vdot(cp.C[k], x))) for k, x in self.X.items())
        pobj += float(cp.c_l @ self.xl) + float(cp.c_f[self.fcols] @ self.xf)
        dobj = float(cp.b[self.rows] @ self.y)
        return pobj, dobj

    def run(self) -> SdpSolution:
        cp, opts = self.cp, self.opts
        problem_msg = self._presolve()
        if problem_msg:
            return self._result(INFEASIBLE, 0, message=problem_msg, empty=True)
        self._initial()
        nu = sum(v.side for v in cp.blocks) + len(cp.lp)
        bnorm = 1 + np.linalg.norm(cp.b)
        cnorm = 1 + np.sqrt(
            sum(np.linalg.norm(c) ** 2 for c in cp.C.values()) + np.sum(cp.c_l**2) + np.sum(cp.c_f**2)
        )
        af = cp.A_f[:, self.fcols]
        best = None
        status = MAX_ITER
        it = 0
        for it in range(1, opts.max_iter + 1):
            rp, Rd, rdl, rdf = self._residuals()
            pinf = np.linalg.norm(rp) / bnorm
            dinf = (
                np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd.values()) + np.sum(rdl**2) + np.sum(rdf**2)) / cnorm
            )
            pobj, dobj = self._objectives()
            gap = pobj - dobj
            log.debug("it %3d pobj %.10g dobj %.10g pinf %.2e dinf %.2e", it, pobj, dobj, pinf, dinf)
            score = max(pinf, dinf, abs(gap))
            if best is None or score < best[0]:
                best = (score, self._snapshot())
            if pinf <= opts.feas_tol and dinf <= opts.feas_tol and abs(gap) <= opts.gap_tol:
                status = OPTIMAL
                break
            mu = (sum(float(np.real(np.vdot(self.X[k], self.Z[k]))) for k in self.X) + self.xl @ self.zl) / nu
            try:
                self._step(rp, Rd, rdl, rdf, mu, af)
            except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
                self._restore(best[1])
                return self._result(BREAKDOWN, it, message=f"singular Newton system: {exc}")
        else:
            self._restore(best[1])
        return self._result(status, it)

    def _step(self, rp, Rd, rdl, rdf, mu, af):
        cp = self.cp
        zinv = {k: np.linalg.inv(z) for k, z in self.Z.items()}
        zinv = {k: _herm(z) for k, z in zinv.items()}
        dl = self.xl / self.zl
        M = sum((cp.schur_block(k, self.X[k], zinv[k]) for k in self.X), np.zeros((cp.m, cp.m)))
        M = M + (cp.A_l * dl) @ cp.A_l.T
        M = M[np.ix_(self.rows, self.rows)]
        nf = af.shape[1]
        if nf:
            af_r = af[self.rows]
            kkt = np.block([[M, af_r], [af_r.T, np.zeros((nf, nf))]])
            lu = sla.lu_factor(kkt, check_finite=True)
            solve_kkt = lambda r1, r2: sla.lu_solve(lu, np.concatenate([r1, r2]))  # noqa: E731
        else:
            chol = sla.cho_factor(M)
            solve_kkt = lambda r1, r2: sla.cho_solve(chol, r1)  # noqa: E731

        def hkm(k, v):
            t = self.X[k] @ v @ zinv[k]
            return (t + t.conj().T) / 2

        def direction(Rc, rcl):
            rhs = rp.copy()
            for k in self.X:
                rhs -= cp.apply_block(k, Rc[k] - hkm(k, Rd[k]))[self.rows]
            rhs -= (cp.A_l @ (rcl - dl * rdl))[self.rows]
            sol = solve_kkt(rhs, rdf)
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError("non-finite Newton step")
            dy = sol[: self.rows.size]
            dxf = sol[self.rows.size :]
            dyf = self._full_y(dy)
            dZ = {k: Rd[k] - cp.adjoint_block(k, dyf) for k in self.X}
            dX = {k: Rc[k] - hkm(k, dZ[k]) for k in self.X}
            dzl = rdl - cp.A_l.T @ dyf
            dxl = rcl - dl * dzl
            return dX, dxl, dxf, dy, dZ, dzl

        def steps(dX, dxl, dZ, dzl):
            ap = min([_max_step(self.X[k], dX[k]) for k in self.X] + [_max_step_lp(self.xl, dxl)])
            ad = min([_max_step(self.Z[k], dZ[k]) for k in self.Z] + [_max_step_lp(self.zl, dzl)])
            return ap, ad

        # predictor
        Rc = {k: -self.X[k] for k in self.X}
        dX, dxl, dxf, dy, dZ, dzl = direction(Rc, -self.xl)
        ap, ad = steps(dX, dxl, dZ, dzl)
        ap, ad = min(1.0, ap), min(1.0, ad)
        nu = sum(x.shape[0] for x in self.X.values()) + self.xl.size
        mu_aff = (
            sum(float(np.real(np.vdot(self.X[k] + ap * dX[k], self.Z[k] + ad * dZ[k]))) for k in self.X)
            + (self.xl + ap * dxl) @ (self.zl + ad * dzl)
        ) / nu
        expon = max(1.0, 3 * min(ap, ad) ** 2) if mu > 1e-6 else 3.0
        sigma = min(1.0, max(0.0, mu_aff / mu) ** expon)

        # corrector
        Rc = {}
        for k in self.X:
            t = dX[k] @ dZ[k] @ zinv[k]
            Rc[k] = sigma * mu * zinv[k] - self.X[k] - (t + t.conj().T) / 2
        rcl = sigma * mu / self.zl - self.xl - dxl * dzl / self.zl
        dX, dxl, dxf, dy, dZ, dzl = direction(Rc, rcl)
        ap, ad = steps(dX, dxl, dZ, dzl)
        tau = 0.9 + 0.09 * min(1.0, ap, ad)
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)

        for k in self.X:
            self.X[k] = _herm(self.X[k] + ap * dX[k])
            self.Z[k] = _herm(self.Z[k] + ad * dZ[k])
        self.xl = self.xl + ap * dxl
        self.xf = self.xf + ap * dxf
        self.zl = self.zl + ad * dzl
        self.y = self.y + ad * dy

    def _snapshot(self):
        return (
            {k: v.copy() for k, v in self.X.items()},
            {k: v.copy() for k, v in self.Z.items()},
            self.xl.copy(),
            self.zl.copy(),
            self.xf.copy(),
            self.y.copy(),
        )

    def _restore(self, snap):
        X, Z, xl, zl, xf, y = snap
        self.X, self.Z, self.xl, self.zl, self.xf, self.y = X, Z, xl, zl, xf, y

    def _result(self, status, iterations, message="", empty=False):
        cp = self.cp
        p = cp.p
        if empty:
            nan = float("nan")
            return SdpSolution(nan, nan, nan, {}, {}, iterations, status, message=message)
        rp, Rd, rdl, rdf = self._residuals()
        bnorm = 1 + np.linalg.norm(cp.b)
        cnorm = 1 + np.sqrt(
            sum(np.linalg.norm(c) ** 2 for c in cp.C.values()) + np.sum(cp.c_l**2) + np.sum(cp.c_f**2)
        )
        pinf = float(np.linalg.norm(rp) / bnorm)
        dinf = float(np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd.values()) + np.sum(rdl**2) + np.sum(rdf**2)) / cnorm)
        pobj, dobj = self._objectives()
        blocks = {k: x.copy() for k, x in self.X.items()}
        xf_full = np.zeros(cp.A_f.shape[1])
        xf_full[self.fcols] = self.xf
        for v, off, size in cp.free_matrix:
            blocks[v.name] = basis.decode(xf_full[off : off + size], v.side)
        scalars = {name: float(x) for name, x in zip(cp.lp, self.xl)}
        scalars.update({name: float(xf_full[i]) for i, name in enumerate(cp.free_scalars)})
        yf = self._full_y(self.y)
        duals = {g.name: cp.sign * yf[cp.offsets[g.name] : cp.offsets[g.name] + g.size] for g in p.groups}
        slacks = {k: cp.sign * z.copy() for k, z in self.Z.items()}
        sign = cp.sign
        return SdpSolution(
            primal_objective=sign * pobj,
            dual_objective=sign * dobj,
            gap=sign * (pobj - dobj),
            block_values=blocks,
            scalar_values=scalars,
            iterations=iterations,
            status=status,
            primal_infeasibility=pinf,
            dual_infeasibility=dinf,
            duals=duals,
            dual_slacks=slacks,
            message=message,
        )
