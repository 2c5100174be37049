"""Broadcasting protocols as Choi operators.

A protocol ``B -> B1...Bn`` is stored through its Choi operator on the layout
``(B, B1, ..., Bn)``. The reference system ``A`` of an input state never
appears in a Choi layout; :func:`apply_choi` tensors it in.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._config import check_side
from .linalg import (
    SystemLayout,
    embed,
    is_hermitian,
    max_entangled,
    min_eigenvalue,
    partial_trace,
    permute_systems,
    swap_operator,
)


def output_labels(n: int) -> tuple[str, ...]:
    return tuple(f"B{j}" for j in range(1, n + 1))


def broadcast_layout(d: int, n: int) -> SystemLayout:
    return SystemLayout([("B", d)] + [(label, d) for label in output_labels(n)])


@dataclass(frozen=True)
class ChoiOperator:
    matrix: np.ndarray
    layout: SystemLayout

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.total_dim,) * 2:
            raise ValueError(f"Choi matrix shape {m.shape} does not match layout {self.layout.dims}")
        if self.layout.labels[0] != "B":
            raise ValueError("first subsystem of a Choi layout must be the input B")
        scale = max(1.0, float(np.abs(m).max()))
        if not is_hermitian(m, 1e-12 * scale):
            raise ValueError("Choi operator must be Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return self.layout.dims[0]

    @property
    def outputs(self) -> tuple[str, ...]:
        return self.layout.labels[1:]

    @property
    def n(self) -> int:
        return len(self.layout) - 1

    def __add__(self, other: "ChoiOperator") -> "ChoiOperator":
        _same_layout(self, other)
        return ChoiOperator(self.matrix + other.matrix, self.layout)

    def __sub__(self, other: "ChoiOperator") -> "ChoiOperator":
        _same_layout(self, other)
        return ChoiOperator(self.matrix - other.matrix, self.layout)

    def scaled(self, c: float) -> "ChoiOperator":
        return ChoiOperator(c * self.matrix, self.layout)


def _same_layout(a: ChoiOperator, b: ChoiOperator) -> None:
    if a.layout != b.layout:
        raise ValueError(f"layout mismatch: {a.layout.subsystems} vs {b.layout.subsystems}")


@dataclass(frozen=True)
class HptpDecomposition:
    """Signed two-channel decomposition ``p1 N1 - p2 N2``."""

    p1: float
    choi1: ChoiOperator
    p2: float
    choi2: ChoiOperator
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.p1 < 0 or self.p2 < 0:
            raise ValueError("decomposition weights must be nonnegative")
        _same_layout(self.choi1, self.choi2)

    @property
    def gamma(self) -> float:
        return self.p1 + self.p2

    def combined(self) -> ChoiOperator:
        return ChoiOperator(self.p1 * self.choi1.matrix - self.p2 * self.choi2.matrix, self.choi1.layout)


def _phi_on(d: int, pair: tuple[str, str], layout: SystemLayout) -> np.ndarray:
    return embed(max_entangled(d), pair, layout)


def choi_warmup_2broadcast(d: int) -> ChoiOperator:
    """``(Φ_BB1 ⊗ I + Φ_BB2 ⊗ I - Φ_B1B2 ⊗ I) / d``."""
    if d < 1:
        raise ValueError("d must be positive")
    layout = broadcast_layout(d, 2)
    j = (
        _phi_on(d, ("B", "B1"), layout)
        + _phi_on(d, ("B", "B2"), layout)
        - _phi_on(d, ("B1", "B2"), layout)
    ) / d
    return ChoiOperator(j, layout)


def _sum_phi_b_bj(d: int, n: int, layout: SystemLayout) -> np.ndarray:
    # sum_j S_{B1 Bj}(Φ_BB1 ⊗ I) = sum_j Φ_BBj ⊗ I
    return sum(_phi_on(d, ("B", out), layout) for out in output_labels(n))


def choi_universal_nbroadcast(d: int, n: int, cap: int | None = None) -> ChoiOperator:
    """Universal ``n``-broadcasting map: every ``B Bj`` marginal of its Choi is ``Φ_d``.

    For ``n = 2`` this coincides with :func:`choi_warmup_2broadcast`.
    """
    if d < 1:
        raise ValueError("d must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    check_side(d ** (n + 1), cap)
    layout = broadcast_layout(d, n)
    scale = float(d) ** (n - 1)
    j = _sum_phi_b_bj(d, n, layout) / scale - (n - 1) / scale * _phi_on(d, ("B1", "B2"), layout)
    return ChoiOperator(j, layout)


def gamma_prime_channels(d: int, n: int, cap: int | None = None) -> HptpDecomposition:
    """``Γ' = n M1 - (n-1) M2`` with both ``M1`` and ``M2`` CPTP."""
    if d < 1 or n < 2:
        raise ValueError("need d >= 1 and n >= 2")
    check_side(d ** (n + 1), cap)
    layout = broadcast_layout(d, n)
    scale = float(d) ** (n - 1)
    m1 = _sum_phi_b_bj(d, n, layout) / (n * scale)
    m2 = _phi_on(d, ("B1", "B2"), layout) / scale
    return HptpDecomposition(
        float(n), ChoiOperator(m1, layout), float(n - 1), ChoiOperator(m2, layout), name="gamma_prime"
    )


def optimal_2broadcast_parts(d: int) -> tuple[np.ndarray, np.ndarray]:
    """``M = Φ_BB1 ⊗ I_B2`` and ``N = I_B ⊗ F_B1B2`` on ``(B, B1, B2)``."""
    layout = broadcast_layout(d, 2)
    m = _phi_on(d, ("B", "B1"), layout)
    nn = embed(swap_operator(d), ("B1", "B2"), layout)
    return m, nn


def choi_optimal_2broadcast(d: int) -> HptpDecomposition:
    """Minimum-cost universal 2-broadcasting decomposition.

    ``p1 = 2d/(d+1)``, ``p2 = (d-1)/(d+1)``; ``choi1`` is a projector and
    ``choi2 @ choi2 == choi2 / (d^2 - 2)``.
    """
    if d < 2:
        raise ValueError("the optimal 2-broadcasting decomposition needs d >= 2")
    layout = broadcast_layout(d, 2)
    m, nn = optimal_2broadcast_parts(d)
    sym = m + nn @ m @ nn
    cross = m @ nn + nn @ m
    j1 = (sym + cross) / (2 * (d + 1))
    eye = np.eye(d**3)
    j2 = (eye - (d * sym - cross) / (d * d - 1)) / (d * d - 2)
    return HptpDecomposition(
        2 * d / (d + 1),
        ChoiOperator(j1, layout),
        (d - 1) / (d + 1),
        ChoiOperator(j2, layout),
        name="optimal2",
    )


def identity_channel_choi(d: int, output: str = "B1") -> ChoiOperator:
    return ChoiOperator(max_entangled(d), SystemLayout([("B", d), (output, d)]))


def apply_choi(
    choi: ChoiOperator, rho: np.ndarray, rho_layout: SystemLayout
) -> tuple[np.ndarray, SystemLayout]:
    """Apply the map with Choi ``choi`` to the ``B`` factor of ``rho``.

    Computes ``tr_B[(rho^{T_B} ⊗ I)(I ⊗ J)]``. The output acts on the
    non-``B`` factors of ``rho`` (in their order) followed by the outputs.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (rho_layout.total_dim,) * 2:
        raise ValueError("rho does not match its layout")
    if "B" not in rho_layout:
        raise ValueError("input state has no subsystem labelled 'B'")
    if rho_layout.dim("B") != choi.d:
        raise ValueError(f"B has dim {rho_layout.dim('B')} but the map expects {choi.d}")
    clash = set(rho_layout.labels) & set(choi.outputs)
    if clash:
        raise ValueError(f"state labels {sorted(clash)} clash with map outputs")
    ref = rho_layout.without(["B"])
    da, d = ref.total_dim, choi.d
    dout = choi.layout.total_dim // d
    r = _to_ref_first(rho, rho_layout).reshape(da, d, da, d)
    jt = choi.matrix.reshape(d, dout, d, dout)
    out = np.einsum("aibj,icjd->acbd", r, jt).reshape(da * dout, da * dout)
    return out, ref.concat(choi.layout.without(["B"]))


def _to_ref_first(rho: np.ndarray, layout: SystemLayout) -> np.ndarray:
    order = [label for label in layout.labels if label != "B"] + ["B"]
    return permute_systems(rho, layout, order)


@dataclass
class UniversalityReport:
    deviations: list[float]
    tol: float

    @property
    def passed(self) -> bool:
        return all(dev <= self.tol for dev in self.deviations)


def verify_universal(choi: ChoiOperator, tol: float = 1e-10) -> UniversalityReport:
    """Max-entry deviation of every ``B Bj`` Choi marginal from ``Φ_d``."""
    phi = max_entangled(choi.d)
    devs = []
    for out in choi.outputs:
        marg = partial_trace(choi.matrix, choi.layout, ["B", out])
        devs.append(float(np.max(np.abs(marg - phi))))
    return UniversalityReport(devs, tol)


@dataclass
class CptpReport:
    min_eigenvalue: float
    tp_deviation: float
    tol: float

    @property
    def psd(self) -> bool:
        return self.min_eigenvalue >= -self.tol

    @property
    def trace_preserving(self) -> bool:
        return self.tp_deviation <= self.tol

    @property
    def passed(self) -> bool:
        return self.psd and self.trace_preserving


def verify_cptp(choi: ChoiOperator, scale: float = 1.0, tol: float = 1e-9) -> CptpReport:
    """Check ``J >= 0`` and ``tr_outputs J = scale * I_B``."""
    reduced = partial_trace(choi.matrix, choi.layout, ["B"])
    tp = float(np.max(np.abs(reduced - scale * np.eye(choi.d))))
    return CptpReport(min_eigenvalue(choi.matrix), tp, tol)
