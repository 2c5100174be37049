"""Cost of splitting one half of an entangled pair into two virtual copies.

Builds the cheapest signed two-channel decomposition, checks it, and
compares three routes to its cost: the closed form, the SDP solver, and a
matching pair of primal/dual points.
"""
import numpy as np

from vbroadcast import (
    certificate_2broadcast,
    choi_optimal_2broadcast,
    gamma2_analytic,
    optimal_cost_sdp,
    verify_cptp,
    verify_universal,
)

d = 3
dec = choi_optimal_2broadcast(d)
print(f"d={d}: p1={dec.p1:.4f}, p2={dec.p2:.4f}, gamma={dec.gamma:.4f}")

# both pieces are real channels, and their signed difference keeps every marginal
print("N1 CPTP:", verify_cptp(dec.choi1).passed, " N2 CPTP:", verify_cptp(dec.choi2).passed)
print("marginals exact:", verify_universal(dec.combined()).passed)

# J1 is a projector, J2 is a scaled one
j1, j2 = dec.choi1.matrix, dec.choi2.matrix
print("J1^2 - J1:", np.abs(j1 @ j1 - j1).max())
print("J2^2 - J2/(d^2-2):", np.abs(j2 @ j2 - j2 / (d * d - 2)).max())

# three routes to the same number
print("closed form:", gamma2_analytic(d).gamma_linear)
print("SDP:        ", optimal_cost_sdp(d, 2).gamma_linear)
cert = certificate_2broadcast(d)
print("certificate:", cert.primal_obj, cert.dual_obj, "gap", cert.gap)

# the cost creeps toward 3 (log2 3 bits) as d grows
for dd in (2, 4, 8, 16, 32, 64):
    r = gamma2_analytic(dd)
    print(f"  d={dd:3d}  gamma={r.gamma_linear:.5f}  log2={r.gamma_log:.5f}")
