"""The seven acceptance criteria, each reported as one PASS/FAIL line.

Run with pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
import math
import time

import numpy as np

from vbroadcast.costs import certificate_2broadcast, gamma2_analytic
from vbroadcast.linalg import SystemLayout, max_entangled, partial_trace, random_density_matrix
from vbroadcast.protocols import (
    apply_choi,
    choi_optimal_2broadcast,
    choi_universal_nbroadcast,
    choi_warmup_2broadcast,
    verify_universal,
)
from vbroadcast.sampling import bias_check, exact_expectation, hoeffding_rounds, pauli_observable, run_estimation
from vbroadcast.sdp import build_primal, solve

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []


def _report(number, ok, detail, started):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f} s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_two_broadcast_sdp_matches_closed_form():
    t0 = time.perf_counter()
    errors = {}
    for d in (2, 3, 4, 5):
        sol = solve(build_primal(d, 2))
        errors[d] = abs(sol.primal_objective - (3 * d - 1) / (d + 1)) if sol.optimal else math.inf
    worst = max(errors.values())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed <= 10
    assert _report(1, ok, f"max |sdp - (3d-1)/(d+1)| = {worst:.2e} over d=2..5", t0)


def test_criterion_2_certificates():
    t0 = time.perf_counter()
    reports = [certificate_2broadcast(d, tol=1e-9) for d in range(2, 9)]
    all_pass = all(r.primal_pass and r.dual_pass for r in reports)
    worst_gap = max(abs(r.gap) for r in reports)
    ok = all_pass and worst_gap <= 1e-10 and time.perf_counter() - t0 <= 5
    assert _report(2, ok, f"feasible at 1e-9 for d=2..8: {all_pass}, max gap {worst_gap:.1e}", t0)


def test_criterion_3_n_broadcast_bounds():
    t0 = time.perf_counter()
    d = 2
    ok = True
    parts = []
    for n in (2, 3, 4, 5):
        sol = solve(build_primal(d, n))
        lower, upper = 2 * n * d / (n + d - 1) - 1, 2 * n - 1
        v = sol.primal_objective
        inside = sol.optimal and lower - 1e-5 <= v <= upper + 1e-5
        tight = abs(v - lower) <= 1e-4
        ok = ok and inside and tight
        parts.append(f"n={n}: {v:.6f} vs lower {lower:.6f}")
    ok = ok and time.perf_counter() - t0 <= 300
    assert _report(3, ok, "; ".join(parts), t0)


def test_criterion_4_universality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    cases = [(d, n) for d in (2, 3) for n in (2, 3, 4) if d ** (n + 1) <= 256]
    worst_choi, worst_state = 0.0, 0.0
    checked = 0
    for d, n in cases:
        protocols = [choi_universal_nbroadcast(d, n)]
        if n == 2:
            protocols += [choi_warmup_2broadcast(d), choi_optimal_2broadcast(d).combined()]
        lay = SystemLayout.of(A=d, B=d)
        for choi in protocols:
            rep = verify_universal(choi, 1e-10)
            worst_choi = max(worst_choi, max(rep.deviations))
            for _ in range(50):
                rho = random_density_matrix(d * d, rng)
                out, olay = apply_choi(choi, rho, lay)
                for j in range(1, n + 1):
                    dev = np.max(np.abs(partial_trace(out, olay, ["A", f"B{j}"]) - rho))
                    worst_state = max(worst_state, dev)
            checked += 1
    ok = worst_choi <= 1e-10 and worst_state <= 1e-9 and time.perf_counter() - t0 <= 120
    detail = f"{checked} protocols over {cases}: Choi dev {worst_choi:.1e}, state dev {worst_state:.1e}"
    assert _report(4, ok, detail, t0)


def test_criterion_5_idempotency():
    t0 = time.perf_counter()
    worst = 0.0
    for d in range(2, 7):
        dec = choi_optimal_2broadcast(d)
        j1, j2 = dec.choi1.matrix, dec.choi2.matrix
        worst = max(worst, np.max(np.abs(j1 @ j1 - j1)), np.max(np.abs(j2 @ j2 - j2 / (d * d - 2))))
    ok = worst <= 1e-11
    assert _report(5, ok, f"max entry error {worst:.1e} for d=2..6", t0)


def test_criterion_6_estimator_statistics():
    t0 = time.perf_counter()
    dec = choi_optimal_2broadcast(2)
    lay = SystemLayout.of(A=2, B=2)
    rho = max_entangled(2) / 2
    obs = pauli_observable("ZZ", ["A", "B"])
    rounds = hoeffding_rounds(dec.gamma, 0.05, 0.05)
    ok = rounds == 8198 and abs(dec.gamma - 5 / 3) < 1e-12
    parts = [f"M={rounds}"]
    seeds = np.random.SeedSequence(6).generate_state(200, np.uint64)
    for j in (1, 2):
        hits = sum(abs(run_estimation(rho, lay, dec, obs, j, rounds, int(s)).estimate - 1) <= 0.05 for s in seeds)
        oracle = exact_expectation(rho, lay, dec, obs, j)
        bias = bias_check(rho, lay, dec, obs, j, 100, 2000, 1000 + j)
        ok = ok and hits >= 190 and bias.passed and abs(oracle - 1) < 1e-12
        parts.append(f"j={j}: {hits}/200 within 0.05, z={bias.z_score:+.2f}")
    ok = ok and time.perf_counter() - t0 <= 180
    assert _report(6, ok, "; ".join(parts), t0)


def test_criterion_7_large_d_limit():
    t0 = time.perf_counter()
    vals = [gamma2_analytic(d).gamma_linear for d in range(2, 51)]
    increasing = all(b > a for a, b in zip(vals, vals[1:]))
    gap = 3 - vals[-1]
    ok = increasing and gap <= 4 / 51 + 1e-12
    assert _report(7, ok, f"strictly increasing: {increasing}, 3 - gamma(50) = {gap:.6f}", t0)


if __name__ == "__main__":
    import sys

    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
