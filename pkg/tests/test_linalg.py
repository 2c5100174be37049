import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbroadcast.linalg import (
    NotHermitianError,
    SystemLayout,
    embed,
    herm_eig,
    is_psd,
    kron_all,
    max_entangled,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    permute_systems,
    random_density_matrix,
    random_hermitian,
    real_embedding,
    swap_operator,
)


def _ptrace_oracle(m, dims, keep_idx):
    # loop over basis states of the traced systems
    n = len(dims)
    t = m.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep_idx]
    for ax in sorted(traced, reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    kd = int(np.prod([dims[i] for i in keep_idx]))
    return t.reshape(kd, kd)


def test_layout_basics():
    lay = SystemLayout.of(A=2, B=3)
    assert lay.labels == ("A", "B")
    assert lay.total_dim == 6
    assert lay.dim("B") == 3
    assert "A" in lay and "C" not in lay
    assert lay.restrict(["B"]).dims == (3,)
    with pytest.raises(ValueError):
        SystemLayout([("A", 2), ("A", 2)])


def test_partial_trace_product():
    rng = np.random.default_rng(0)
    a = random_density_matrix(2, rng)
    b = random_density_matrix(3, rng)
    c = random_density_matrix(2, rng)
    lay = SystemLayout.of(A=2, B=3, C=2)
    m = kron_all(a, b, c)
    assert np.allclose(partial_trace(m, lay, ["B"]), b)
    # kept systems come out in layout order, not in the order requested
    assert np.allclose(partial_trace(m, lay, ["C", "A"]), np.kron(a, c))
    assert np.isclose(partial_trace(m, lay, []).item(), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 3), min_size=1, max_size=3))
def test_partial_trace_matches_loop_oracle(seed, dims):
    rng = np.random.default_rng(seed)
    labels = [f"S{i}" for i in range(len(dims))]
    lay = SystemLayout(zip(labels, dims))
    m = random_hermitian(lay.total_dim, rng)
    keep = [i for i in range(len(dims)) if rng.random() < 0.5]
    got = partial_trace(m, lay, [labels[i] for i in keep])
    assert np.allclose(got, _ptrace_oracle(m, list(dims), keep))


def test_partial_transpose_of_phi_is_swap():
    d = 3
    lay = SystemLayout.of(A=d, B=d)
    assert np.allclose(partial_transpose(max_entangled(d), lay, "B"), swap_operator(d))


def test_swap_squares_to_identity():
    f = swap_operator(4)
    assert np.allclose(f @ f, np.eye(16))


def test_permute_and_embed():
    rng = np.random.default_rng(3)
    a, b = random_hermitian(2, rng), random_hermitian(3, rng)
    lay = SystemLayout.of(A=2, B=3)
    assert np.allclose(permute_systems(np.kron(a, b), lay, ["B", "A"]), np.kron(b, a))
    big = SystemLayout.of(A=2, C=2, B=3)
    assert np.allclose(embed(np.kron(a, b), ["A", "B"], big), kron_all(a, np.eye(2), b))
    x = random_hermitian(4, rng)
    e = embed(x, ["C", "A"], big)
    back = partial_trace(e, big, ["C", "A"])
    assert np.allclose(back, 3 * permute_systems(x, SystemLayout.of(C=2, A=2), ["A", "C"]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_eig_reconstruction(seed, dim):
    m = random_hermitian(dim, np.random.default_rng(seed))
    w, v = herm_eig(m)
    assert np.all(np.diff(w) <= 1e-12)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, m, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(dim), atol=1e-10)


def test_eig_known_spectra():
    assert np.allclose(herm_eig(np.eye(4))[0], [1, 1, 1, 1])
    assert np.allclose(herm_eig(swap_operator(2))[0], [1, 1, 1, -1])
    assert np.allclose(herm_eig(max_entangled(2))[0], [2, 0, 0, 0])
    assert np.allclose(herm_eig(max_entangled(3))[0], [3] + [0] * 8)


def test_swap_on_basis_state():
    ket01 = np.zeros(4)
    ket01[1] = 1
    assert np.allclose(swap_operator(2) @ ket01, np.eye(4)[2])


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        herm_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_real_embedding_doubles_spectrum():
    m = random_hermitian(6, np.random.default_rng(9))
    w = np.linalg.eigvalsh(m)
    wr = np.linalg.eigvalsh(real_embedding(m))
    assert np.allclose(np.sort(np.repeat(w, 2)), wr)


def test_psd_helpers():
    rho = random_density_matrix(4, np.random.default_rng(1))
    assert is_psd(rho)
    assert min_eigenvalue(rho) >= -1e-12
    assert not is_psd(-rho)
    assert np.isclose(np.trace(rho).real, 1.0)
