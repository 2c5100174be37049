"""Running the signed decomposition as a sampling procedure.

Each round picks a channel with probability p_i/gamma, measures Z⊗Z on A
and one output, and records the outcome with a sign. The weighted average
recovers the Bell correlator <ZZ> = 1 on either output.
"""
import numpy as np

from vbroadcast import (
    SystemLayout,
    bias_check,
    choi_optimal_2broadcast,
    exact_expectation,
    hoeffding_rounds,
    max_entangled,
    pauli_observable,
    run_estimation,
)

dec = choi_optimal_2broadcast(2)
rho = max_entangled(2) / 2
lay = SystemLayout.of(A=2, B=2)
zz = pauli_observable("ZZ", ["A", "B"])

m = hoeffding_rounds(dec.gamma, delta=0.05, epsilon=0.05)
print("rounds for +-0.05 at 95%:", m)

for j in (1, 2):
    res = run_estimation(rho, lay, dec, zz, j, m, seed=7)
    print(f"output B{j}: estimate {res.estimate:.4f}  exact {exact_expectation(rho, lay, dec, zz, j):.4f}")

# the price of the negative weight: spread grows like gamma
res = run_estimation(rho, lay, dec, zz, 1, m, seed=7)
print("per-round std:", res.empirical_std, " vs gamma:", dec.gamma)

# flip the sign convention and the estimator is biased
good = bias_check(rho, lay, dec, zz, 1, trials=50, rounds_per_trial=1000, seed=1)
bad = bias_check(rho, lay, dec, zz, 1, trials=50, rounds_per_trial=1000, seed=1, signs=(1, 1))
print(f"z-score, correct signs: {good.z_score:+.2f}   both positive: {bad.z_score:+.2f}")

# histogram of estimates over many seeds
est = np.array([run_estimation(rho, lay, dec, zz, 1, m, seed=s).estimate for s in range(200)])
print("fraction within 0.05:", np.mean(np.abs(est - 1) <= 0.05))
