"""Bounds on the cost of n virtual copies, and where the SDP lands between them.

The upper bound comes from a simple symmetric protocol, the lower one from
a symmetric dual point. For qubits the SDP sits exactly on the lower bound.
Writes a plot-ready CSV next to this script.
"""
from pathlib import Path

from vbroadcast import certificate_nbroadcast_bounds, gamma_prime_channels
from vbroadcast.costs import rows_to_csv, sweep

dec = gamma_prime_channels(2, 4)
print(f"symmetric protocol for n=4: p1={dec.p1}, p2={dec.p2}, gamma={dec.gamma}")

rep = certificate_nbroadcast_bounds(2, 4)
print("upper from protocol:", rep.upper_from_gamma_prime, " lower from dual point:", rep.lower_obj)

rows = sweep(2, 2, 8, sdp_up_to=5)
print(f"{'n':>2} {'lower':>9} {'sdp':>9} {'upper':>6}")
for r in rows:
    sdp = f"{r.sdp_linear:9.5f}" if r.sdp_linear is not None else "        -"
    print(f"{r.n:>2} {r.lower_linear:9.5f} {sdp} {r.upper_linear:6.1f}")

out = Path(__file__).with_name("sweep_d2.csv")
out.write_text(rows_to_csv(rows))
print("wrote", out)
