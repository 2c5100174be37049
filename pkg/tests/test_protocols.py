import numpy as np
import pytest

from vbroadcast.linalg import (
    SystemLayout,
    kron,
    max_entangled,
    partial_trace,
    random_density_matrix,
    random_hermitian,
    swap_operator,
)
from vbroadcast.protocols import (
    ChoiOperator,
    apply_choi,
    broadcast_layout,
    choi_optimal_2broadcast,
    choi_universal_nbroadcast,
    choi_warmup_2broadcast,
    gamma_prime_channels,
    identity_channel_choi,
    optimal_2broadcast_parts,
    verify_cptp,
    verify_universal,
)


def _choi_from_action(action, d, dout):
    """``sum_ij |i><j| ⊗ action(|i><j|)``."""
    j = np.zeros((d * dout, d * dout), dtype=complex)
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d))
            e[a, b] = 1
            j += kron(e, action(e))
    return j


def test_identity_channel_round_trip():
    rho = random_density_matrix(4, np.random.default_rng(0))
    out, lay = apply_choi(identity_channel_choi(2), rho, SystemLayout.of(A=2, B=2))
    assert lay.labels == ("A", "B1")
    assert np.allclose(out, rho)


def test_apply_choi_matches_direct_action():
    # map X -> (X ⊗ I + I ⊗ X^T)/(2d) built two ways
    d = 2
    action = lambda x: (np.kron(x, np.eye(d)) + np.kron(np.eye(d), x.T)) / (2 * d)  # noqa: E731
    choi = ChoiOperator(_choi_from_action(action, d, d * d), broadcast_layout(d, 2))
    rho = random_density_matrix(d, np.random.default_rng(5))
    out, _ = apply_choi(choi, rho, SystemLayout.of(B=d))
    assert np.allclose(out, action(rho))


def test_warmup_formula():
    d = 3
    lay = broadcast_layout(d, 2)
    phi = max_entangled(d)
    f12 = np.kron(np.eye(d), swap_operator(d))  # swaps B1 and B2
    j_direct = np.kron(phi, np.eye(d)) + f12 @ np.kron(phi, np.eye(d)) @ f12
    j_direct = j_direct / d - np.kron(np.eye(d), phi) / d
    assert np.allclose(choi_warmup_2broadcast(d).matrix, j_direct)
    assert choi_warmup_2broadcast(d).layout == lay


@pytest.mark.parametrize("d,n", [(2, 2), (2, 3), (3, 2), (3, 3), (2, 5)])
def test_universal_marginals(d, n):
    report = verify_universal(choi_universal_nbroadcast(d, n), 1e-10)
    assert report.passed
    assert len(report.deviations) == n


def test_universal_n2_is_warmup():
    for d in (2, 3, 4):
        assert np.allclose(choi_universal_nbroadcast(d, 2).matrix, choi_warmup_2broadcast(d).matrix)


def test_gamma_prime_decomposition():
    for d, n in [(2, 2), (2, 4), (3, 3)]:
        dec = gamma_prime_channels(d, n)
        assert dec.p1 == n and dec.p2 == n - 1
        assert dec.gamma == 2 * n - 1
        assert verify_cptp(dec.choi1).passed and verify_cptp(dec.choi2).passed
        assert np.allclose(dec.combined().matrix, choi_universal_nbroadcast(d, n).matrix)


def test_warmup_is_not_cptp():
    rep = verify_cptp(choi_warmup_2broadcast(2))
    assert rep.trace_preserving
    assert not rep.psd


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_optimal_decomposition(d):
    dec = choi_optimal_2broadcast(d)
    assert np.isclose(dec.p1, 2 * d / (d + 1))
    assert np.isclose(dec.p2, (d - 1) / (d + 1))
    assert np.isclose(dec.p1 - dec.p2, 1.0)
    assert np.isclose(dec.gamma, (3 * d - 1) / (d + 1))
    assert verify_cptp(dec.choi1).passed
    assert verify_cptp(dec.choi2).passed
    assert verify_universal(dec.combined()).passed


@pytest.mark.parametrize("d", [2, 3, 4])
def test_optimal_idempotency(d):
    j1 = choi_optimal_2broadcast(d).choi1.matrix
    j2 = choi_optimal_2broadcast(d).choi2.matrix
    assert np.max(np.abs(j1 @ j1 - j1)) < 1e-11
    assert np.max(np.abs(j2 @ j2 - j2 / (d * d - 2))) < 1e-11


def test_optimal_components_from_channel_actions():
    # rebuild both components from their action on operators
    d = 3
    m, nop = optimal_2broadcast_parts(d)
    eye = np.eye(d)
    f = swap_operator(d)

    def p_map(x):  # average of copying to either output with the other maximally mixed
        return (np.kron(x, eye) + np.kron(eye, x)) / (2 * d)

    def q_map(x):  # symmetrised "x then swap"
        return (np.kron(x, eye) @ f + f @ np.kron(x, eye)) / 2

    def rep(x):
        return np.trace(x) * np.eye(d * d) / (d * d)

    jp = _choi_from_action(p_map, d, d * d)
    jq = _choi_from_action(q_map, d, d * d)
    jr = _choi_from_action(rep, d, d * d)
    assert np.allclose(jp, (m + nop @ m @ nop) / (2 * d))
    assert np.allclose(jq, (m @ nop + nop @ m) / 2)
    assert np.allclose(jr, np.eye(d**3) / d**2)
    j1 = choi_optimal_2broadcast(d).choi1.matrix
    assert np.allclose(j1, (2 * d * jp + 2 * jq) / (2 * (d + 1)))


@pytest.mark.parametrize("d,n", [(2, 2), (2, 3), (3, 2)])
def test_random_state_marginals(d, n):
    rng = np.random.default_rng(d * 10 + n)
    choi = choi_universal_nbroadcast(d, n)
    lay = SystemLayout.of(A=d, B=d)
    for _ in range(5):
        rho = random_density_matrix(d * d, rng)
        out, olay = apply_choi(choi, rho, lay)
        for j in range(1, n + 1):
            assert np.allclose(partial_trace(out, olay, ["A", f"B{j}"]), rho, atol=1e-12)


def test_hermitian_input_linearity():
    # apply_choi is linear, so it also maps Hermitian (non-state) inputs correctly
    rng = np.random.default_rng(2)
    choi = choi_optimal_2broadcast(2).combined()
    lay = SystemLayout.of(A=2, B=2)
    x, y = random_hermitian(4, rng), random_hermitian(4, rng)
    ox, _ = apply_choi(choi, x, lay)
    oy, _ = apply_choi(choi, y, lay)
    oxy, _ = apply_choi(choi, 2 * x - y, lay)
    assert np.allclose(oxy, 2 * ox - oy)


def test_errors():
    with pytest.raises(ValueError):
        choi_optimal_2broadcast(1)
    with pytest.raises(ValueError):
        ChoiOperator(np.array([[0, 1], [0, 0]]), SystemLayout.of(B=1, B1=2))
    with pytest.raises(ValueError):
        apply_choi(identity_channel_choi(2), np.eye(3) / 3, SystemLayout.of(B=3))
    with pytest.raises(ValueError):
        choi_universal_nbroadcast(2, 13, cap=4096)
