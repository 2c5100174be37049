"""Dense linear algebra on multipartite tensor-product spaces.

Matrices are plain ``numpy`` complex arrays. A :class:`SystemLayout` records
which tensor factors a matrix acts on, left to right, so that partial traces,
partial transposes and embeddings can address subsystems by label.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
EIG_HERMITIAN_TOL = 1e-10

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class SystemLayout:
    """Ordered list of ``(label, dim)`` tensor factors."""

    subsystems: tuple[tuple[str, int], ...]

    def __init__(self, subsystems: Iterable[tuple[str, int]]):
        subs = tuple((str(label), int(dim)) for label, dim in subsystems)
        labels = [label for label, _ in subs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")
        if any(dim < 1 for _, dim in subs):
            raise ValueError(f"subsystem dimensions must be positive: {subs}")
        object.__setattr__(self, "subsystems", subs)

    @classmethod
    def of(cls, **dims: int) -> "SystemLayout":
        return cls(dims.items())

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.subsystems else 1

    def __len__(self) -> int:
        return len(self.subsystems)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem label {label!r}; layout has {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def restrict(self, labels: Iterable[str]) -> "SystemLayout":
        """Sub-layout on ``labels``, kept in this layout's order."""
        wanted = set(labels)
        for label in wanted:
            self.index(label)
        return SystemLayout(s for s in self.subsystems if s[0] in wanted)

    def without(self, labels: Iterable[str]) -> "SystemLayout":
        dropped = set(labels)
        for label in dropped:
            self.index(label)
        return SystemLayout(s for s in self.subsystems if s[0] not in dropped)

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self.subsystems + other.subsystems)


def _square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def _check_layout(m: np.ndarray, layout: SystemLayout) -> None:
    if m.shape[0] != layout.total_dim:
        raise ValueError(
            f"matrix side {m.shape[0]} does not match layout dimension {layout.total_dim} {layout.dims}"
        )


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(_square(a), _square(b))


def kron_all(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, _square(op))
    return out


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = _square(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def partial_trace(m: np.ndarray, layout: SystemLayout, keep: Iterable[str]) -> np.ndarray:
    """Trace out every subsystem not in ``keep``.

    The result acts on the kept subsystems in the order they appear in
    ``layout`` (see ``layout.restrict(keep)``).
    """
    m = _square(m)
    _check_layout(m, layout)
    keep = set(keep)
    for label in keep:
        layout.index(label)
    k = len(layout)
    if k > len(_LETTERS) // 2:
        raise ValueError("too many subsystems")
    row = list(_LETTERS[:k])
    col = list(_LETTERS[k : 2 * k])
    for i, label in enumerate(layout.labels):
        if label not in keep:
            col[i] = row[i]
    out_row = "".join(row[i] for i, label in enumerate(layout.labels) if label in keep)
    out_col = "".join(col[i] for i, label in enumerate(layout.labels) if label in keep)
    t = m.reshape(layout.dims * 2)
    res = np.einsum(f"{''.join(row)}{''.join(col)}->{out_row}{out_col}", t)
    side = layout.restrict(keep).total_dim
    return np.ascontiguousarray(res).reshape(side, side)


def partial_transpose(m: np.ndarray, layout: SystemLayout, target: str) -> np.ndarray:
    m = _square(m)
    _check_layout(m, layout)
    i = layout.index(target)
    k = len(layout)
    t = m.reshape(layout.dims * 2)
    axes = list(range(2 * k))
    axes[i], axes[k + i] = axes[k + i], axes[i]
    return t.transpose(axes).reshape(m.shape)


def permute_systems(m: np.ndarray, layout: SystemLayout, order: Sequence[str]) -> np.ndarray:
    """Reorder tensor factors of ``m`` so they appear as ``order``."""
    m = _square(m)
    _check_layout(m, layout)
    if sorted(order) != sorted(layout.labels):
        raise ValueError(f"order {order} is not a permutation of {layout.labels}")
    k = len(layout)
    perm = [layout.index(label) for label in order]
    t = m.reshape(layout.dims * 2).transpose(perm + [k + p for p in perm])
    return t.reshape(m.shape)


def embed(op: np.ndarray, op_labels: Sequence[str], layout: SystemLayout) -> np.ndarray:
    """``op ⊗ I`` on ``layout``, where ``op`` acts on ``op_labels`` in the given order."""
    op = _square(op)
    sub = SystemLayout((label, layout.dim(label)) for label in op_labels)
    _check_layout(op, sub)
    rest = layout.without(op_labels)
    full = np.kron(op, np.eye(rest.total_dim))
    full_layout = sub.concat(rest)
    return permute_systems(full, full_layout, layout.labels)


def swap_operator(d: int) -> np.ndarray:
    """Permutation ``sum_ij |ij><ji|`` on two ``d``-dimensional systems."""
    if d < 1:
        raise ValueError("d must be positive")
    f = np.zeros((d * d, d * d), dtype=complex)
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    f[(i * d + j).ravel(), (j * d + i).ravel()] = 1.0
    return f


def max_entangled(d: int) -> np.ndarray:
    """Unnormalized maximally entangled operator ``sum_ij |ii><jj|`` (trace ``d``)."""
    if d < 1:
        raise ValueError("d must be positive")
    v = np.zeros(d * d, dtype=complex)
    v[np.arange(d) * (d + 1)] = 1.0
    return np.outer(v, v)


def herm_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching unitary of eigenvectors."""
    m = _square(m)
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if not is_hermitian(m, EIG_HERMITIAN_TOL * scale):
        raise NotHermitianError("herm_eig needs a Hermitian matrix")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return w[::-1].copy(), v[:, ::-1].copy()


def min_eigenvalue(m: np.ndarray) -> float:
    m = _square(m)
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if not is_hermitian(m, EIG_HERMITIAN_TOL * scale):
        raise NotHermitianError("min_eigenvalue needs a Hermitian matrix")
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def is_psd(m: np.ndarray, tol: float = 1e-9) -> bool:
    return min_eigenvalue(m) >= -tol


def real_embedding(m: np.ndarray) -> np.ndarray:
    """Real symmetric ``[[Re, -Im], [Im, Re]]`` form of a Hermitian matrix.

    Its spectrum is the complex spectrum with every multiplicity doubled.
    """
    m = _square(m)
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Full-rank state ``G G^† / tr(G G^†)`` from a complex Ginibre matrix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
