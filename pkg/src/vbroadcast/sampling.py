"""Monte Carlo implementation of a signed two-channel decomposition.

Each round draws channel ``N1`` with probability ``p1/gamma`` (sign ``+1``)
or ``N2`` with probability ``p2/gamma`` (sign ``-1``), applies it to the
input state, and measures the observable on ``(A, Bj)`` by the Born rule.
The estimate of ``tr[O rho]`` is ``gamma/M * sum(sign * outcome)``.

Random numbers: rounds are grouped in blocks of :data:`ROUNDS_PER_BLOCK`.
Block ``b`` reads from ``Philox(key=seed, counter=(0, 0, b, 0))`` and every
round in it consumes two doubles, first the channel draw then the outcome
draw. Blocks are independent, so the result does not depend on how blocks
are distributed over workers.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .linalg import NotHermitianError, SystemLayout, herm_eig, is_hermitian, partial_trace
from .protocols import ChoiOperator, HptpDecomposition, apply_choi

ROUNDS_PER_BLOCK = 1024

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ObservableError(ValueError):
    pass


@dataclass(frozen=True)
class Observable:
    """Hermitian observable with its eigendecomposition cached."""

    matrix: np.ndarray
    layout: SystemLayout
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.total_dim,) * 2:
            raise ObservableError(f"observable shape {m.shape} does not match layout {self.layout.dims}")
        if not is_hermitian(m, 1e-12):
            raise NotHermitianError("observable must be Hermitian")
        w, v = herm_eig(m)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def require_bounded(self) -> None:
        if self.norm > 1 + 1e-12:
            raise ObservableError(
                f"observable eigenvalues must satisfy λ_k ∈ [-1, 1]; spectral norm is {self.norm:.6g}"
            )

    def relabel(self, labels: list[str]) -> "Observable":
        return Observable(self.matrix, SystemLayout(zip(labels, self.layout.dims)))


def pauli_observable(word: str, labels: list[str]) -> Observable:
    """Tensor product of Pauli matrices, one letter per qubit label."""
    word = word.upper()
    if len(word) != len(labels) or any(ch not in PAULI for ch in word):
        raise ObservableError(f"Pauli word {word!r} must use I/X/Y/Z, one letter per subsystem {labels}")
    m = reduce(np.kron, (PAULI[ch] for ch in word))
    return Observable(m, SystemLayout((label, 2) for label in labels))


def hoeffding_rounds(gamma: float, delta: float, epsilon: float) -> int:
    """Rounds ``M = ceil(2 gamma^2 ln(2/epsilon) / delta^2)``.

    With summands in ``[-gamma, gamma]`` this makes
    ``P(|estimate - mean| > delta) <= epsilon``.
    """
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.ceil(2 * gamma**2 * math.log(2 / epsilon) / delta**2)


@dataclass
class SamplingResult:
    estimate: float
    rounds: int
    gamma: float
    empirical_std: float
    target_subsystem: str
    seed: int
    channel_index: np.ndarray | None = field(default=None, repr=False)
    outcomes: np.ndarray | None = field(default=None, repr=False)
    signs: tuple[int, int] = (1, -1)

    @property
    def standard_error(self) -> float:
        return self.empirical_std / math.sqrt(self.rounds)

    def hoeffding_halfwidth(self, epsilon: float = 0.05) -> float:
        """Half-width ``delta`` holding with probability ``1 - epsilon`` for this ``M``."""
        return self.gamma * math.sqrt(2 * math.log(2 / epsilon) / self.rounds)

    def to_dict(self, epsilon: float = 0.05) -> dict:
        return {
            "estimate": self.estimate,
            "rounds": self.rounds,
            "gamma": self.gamma,
            "empirical_std": self.empirical_std,
            "standard_error": self.standard_error,
            "confidence_interval": [
                self.estimate - self.hoeffding_halfwidth(epsilon),
                self.estimate + self.hoeffding_halfwidth(epsilon),
            ],
            "confidence_level": 1 - epsilon,
            "target_subsystem": self.target_subsystem,
            "seed": self.seed,
        }

    def trace_csv(self) -> str:
        """Per-round log ``round,channel_index,sign,outcome_lambda``; needs ``record=True``."""
        if self.channel_index is None:
            raise ValueError("run_estimation was called without record=True")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "channel_index", "sign", "outcome_lambda"])
        for m, (ch, lam) in enumerate(zip(self.channel_index, self.outcomes)):
            w.writerow([m, int(ch) + 1, self.signs[int(ch)], repr(float(lam))])
        return buf.getvalue()


def _output_marginal(choi: ChoiOperator, rho, rho_layout: SystemLayout, keep: list[str]) -> np.ndarray:
    out, out_layout = apply_choi(choi, rho, rho_layout)
    return partial_trace(out, out_layout, keep), out_layout.restrict(keep)


def _target(decomp: HptpDecomposition, rho_layout: SystemLayout, obs: Observable, j: int) -> tuple[list[str], str]:
    n = decomp.choi1.n
    if not 1 <= j <= n:
        raise ValueError(f"output index j must be in 1..{n}")
    target = f"B{j}"
    refs = [label for label in rho_layout.labels if label != "B"]
    keep = refs + [target]
    expected = [rho_layout.dim(label) for label in refs] + [decomp.choi1.d]
    if list(obs.layout.dims) != expected:
        raise ObservableError(f"observable subsystem dimensions {obs.layout.dims} must be {tuple(expected)}")
    return keep, target


def _born_tables(decomp, rho, rho_layout, obs, keep):
    """Cumulative Born distributions over the observable's eigenvalues, one row per channel."""
    tables = []
    for choi in (decomp.choi1, decomp.choi2):
        sigma, _ = _output_marginal(choi, rho, rho_layout, keep)
        v = obs.eigenvectors
        probs = np.real(np.einsum("ik,ij,jk->k", v.conj(), sigma, v)).clip(min=0)
        total = probs.sum()
        if total <= 0:
            raise ValueError("channel output has zero trace")
        tables.append(np.cumsum(probs / total))
    return np.array(tables)


def _philox_block(seed: int, block: int) -> np.random.Generator:
    key = [seed & 0xFFFFFFFFFFFFFFFF, seed >> 64]
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, block, 0]))


def _run_block(seed, block, count, p_first, cdfs):
    u = _philox_block(seed, block).random((count, 2))
    ch = (u[:, 0] >= p_first).astype(np.int64)
    k = np.empty(count, dtype=np.int64)
    for i in (0, 1):
        sel = ch == i
        k[sel] = np.searchsorted(cdfs[i], u[sel, 1], side="right")
    np.minimum(k, cdfs.shape[1] - 1, out=k)
    return ch, k


def run_estimation(
    rho: np.ndarray,
    rho_layout: SystemLayout,
    decomp: HptpDecomposition,
    obs: Observable,
    j: int,
    rounds: int,
    seed: int,
    *,
    record: bool = False,
    workers: int = 1,
    signs: tuple[int, int] = (1, -1),
) -> SamplingResult:
    """Estimate ``tr[O rho]`` from the ``(A, Bj)`` output of ``decomp``.

    ``signs`` are the weights attached to ``N1`` and ``N2`` outcomes; anything
    other than the default ``(1, -1)`` gives a biased estimator.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if seed < 0 or seed >= 2**128:
        raise ValueError("seed must be a nonnegative integer below 2**128")
    keep, target = _target(decomp, rho_layout, obs, j)
    gamma = decomp.gamma
    cdfs = _born_tables(decomp, rho, rho_layout, obs, keep)
    p_first = decomp.p1 / gamma
    nblocks = -(-rounds // ROUNDS_PER_BLOCK)
    sizes = [min(ROUNDS_PER_BLOCK, rounds - b * ROUNDS_PER_BLOCK) for b in range(nblocks)]
    jobs = [(seed, b, sizes[b], p_first, cdfs) for b in range(nblocks)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _run_block(*a), jobs))
    else:
        parts = [_run_block(*a) for a in jobs]
    ch = np.concatenate([c for c, _ in parts])
    k = np.concatenate([x for _, x in parts])
    lam = obs.eigenvalues[k]
    terms = gamma * np.asarray(signs, dtype=float)[ch] * lam
    std = float(np.std(terms, ddof=1)) if rounds > 1 else 0.0
    return SamplingResult(
        estimate=float(np.mean(terms)),
        rounds=rounds,
        gamma=gamma,
        empirical_std=std,
        target_subsystem=target,
        seed=seed,
        channel_index=ch if record else None,
        outcomes=lam if record else None,
        signs=tuple(signs),
    )


def exact_expectation(
    rho: np.ndarray, rho_layout: SystemLayout, decomp: HptpDecomposition, obs: Observable, j: int
) -> float:
    """``tr[O tr_{\\A Bj}[Γ(rho)]]`` for the signed combination ``Γ``.

    The observable's last subsystem is matched to ``Bj`` by position.
    """
    keep, _ = _target(decomp, rho_layout, obs, j)
    sigma, _ = _output_marginal(decomp.combined(), rho, rho_layout, keep)
    return float(np.real(np.trace(obs.matrix @ sigma)))


@dataclass
class BiasReport:
    mean_estimate: float
    oracle: float
    std: float
    z_score: float
    trials: int
    degenerate: bool

    @property
    def passed(self) -> bool:
        return abs(self.z_score) <= 4.0


def trial_seeds(seed: int, trials: int) -> list[int]:
    states = [s.generate_state(2, np.uint64) for s in np.random.SeedSequence(seed).spawn(trials)]
    return [int(a) | (int(b) << 64) for a, b in states]


def bias_check(
    rho: np.ndarray,
    rho_layout: SystemLayout,
    decomp: HptpDecomposition,
    obs: Observable,
    j: int,
    trials: int,
    rounds_per_trial: int,
    seed: int,
    *,
    signs: tuple[int, int] = (1, -1),
) -> BiasReport:
    """z-score of the mean of independent estimates against :func:`exact_expectation`.

    If every trial returns the same value the standard deviation is zero; the
    report is then flagged ``degenerate`` and ``z`` is 0 when the value equals
    the oracle (to 1e-12) and infinite otherwise.
    """
    if trials < 30:
        raise ValueError("bias_check needs at least 30 trials")
    oracle = exact_expectation(rho, rho_layout, decomp, obs, j)
    est = np.array(
        [
            run_estimation(rho, rho_layout, decomp, obs, j, rounds_per_trial, s, signs=signs).estimate
            for s in trial_seeds(seed, trials)
        ]
    )
    mean = float(est.mean())
    std = float(est.std(ddof=1))
    if std == 0.0:
        z = 0.0 if abs(mean - oracle) <= 1e-12 else math.inf
        return BiasReport(mean, oracle, std, z, trials, True)
    return BiasReport(mean, oracle, std, (mean - oracle) * math.sqrt(trials) / std, trials, False)
