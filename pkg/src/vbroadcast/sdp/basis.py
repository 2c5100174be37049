"""Orthonormal Hermitian operator basis built from matrix units.

For ``dim = D`` the ``D**2`` basis elements are ordered as

* ``|a><a|`` for ``a = 0..D-1``,
* ``(|a><b| + |b><a|)/sqrt2`` for ``a < b`` in row-major upper-triangle order,
* ``(-i|a><b| + i|b><a|)/sqrt2`` for ``a < b`` in the same order.

They are orthonormal under ``<H, K> = tr(H K)`` so a Hermitian matrix ``Y``
has real coordinates ``tr(H_k Y)`` and ``Y = sum_k coords_k H_k``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import sparse

_R2 = np.sqrt(2.0)


@lru_cache(maxsize=64)
def _upper(dim: int) -> tuple[np.ndarray, np.ndarray]:
    a, b = np.triu_indices(dim, 1)
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


@lru_cache(maxsize=64)
def _unit_map(dim: int) -> sparse.csr_matrix:
    """Sparse ``(dim**2, dim**2)`` matrix with rows ``H_k`` flattened row-major."""
    a, b = _upper(dim)
    npair = a.size
    diag = np.arange(dim)
    k_sym = dim + np.arange(npair)
    k_anti = dim + npair + np.arange(npair)
    rows = np.concatenate([diag, k_sym, k_sym, k_anti, k_anti])
    cols = np.concatenate([diag * (dim + 1), a * dim + b, b * dim + a, a * dim + b, b * dim + a])
    vals = np.concatenate(
        [np.ones(dim), np.full(2 * npair, 1 / _R2), np.full(npair, -1j / _R2), np.full(npair, 1j / _R2)]
    )
    return sparse.csr_matrix((vals, (rows, cols)), shape=(dim * dim, dim * dim))


def contract_units(t: np.ndarray, dim: int, axis: int = 0) -> np.ndarray:
    """``sum_ab H_k[a, b] t[..., a, b, ...]`` for every basis element ``k``.

    ``t`` carries the matrix-unit pair ``(a, b)`` on axes ``axis`` and
    ``axis + 1``; they are replaced by one axis of length ``dim**2``. The
    result is complex in general.
    """
    t = np.asarray(t)
    shape = t.shape
    lead, rest = shape[:axis], shape[axis + 2 :]
    nlead = int(np.prod(lead, dtype=np.int64))
    nrest = int(np.prod(rest, dtype=np.int64))
    u = _unit_map(dim)
    if nlead == 1:
        out = u @ t.reshape(dim * dim, nrest)
    else:
        flat = t.reshape(nlead, dim * dim, nrest).transpose(1, 0, 2).reshape(dim * dim, nlead * nrest)
        out = (u @ flat).reshape(dim * dim, nlead, nrest).transpose(1, 0, 2)
    return np.asarray(out).reshape(lead + (dim * dim,) + rest)


def coords(y: np.ndarray) -> np.ndarray:
    """Real coordinates ``tr(H_k Y)`` of a Hermitian matrix."""
    y = np.asarray(y)
    dim = y.shape[0]
    a, b = _upper(dim)
    return np.concatenate([np.diagonal(y).real, _R2 * y[a, b].real, -_R2 * y[a, b].imag])


def decode(v: np.ndarray, dim: int) -> np.ndarray:
    """Hermitian matrix ``sum_k v_k H_k``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (dim * dim,):
        raise ValueError(f"expected {dim * dim} coordinates, got shape {v.shape}")
    a, b = _upper(dim)
    npair = a.size
    y = np.zeros((dim, dim), dtype=complex)
    y[np.arange(dim), np.arange(dim)] = v[:dim]
    upper = (v[dim : dim + npair] - 1j * v[dim + npair :]) / _R2
    y[a, b] = upper
    y[b, a] = upper.conj()
    return y


def basis_matrices(dim: int) -> np.ndarray:
    """All basis elements stacked as an array of shape ``(dim**2, dim, dim)``."""
    eye = np.eye(dim * dim)
    return np.stack([decode(e, dim) for e in eye])
