"""Lag-1 autocorrelation of the scalar model as a function of beta.

Run: python demos/scalar_lag1.py
"""

import numpy as np

from fsmcmc.analytic1d import POSTERIOR, PRIOR, optimal_beta, sweep_lag1, verify_against_simulation

gamma = 0.1
betas = np.linspace(0.02, 1.0, 25)
rows = sweep_lag1(betas, [gamma], [PRIOR, POSTERIOR], n_cells=800)
for r in rows:
    if r.kind == PRIOR:
        print(f"beta {r.beta:.3f}  E[alpha] {r.mean_alpha:.3f}  lag1 {r.lag1:.4f}")

best = optimal_beta([r for r in rows if r.kind == PRIOR])
print(f"\nsmallest lag-1 {best.lag1:.4f} at beta {best.beta:.3f} (E[alpha] {best.mean_alpha:.2f})")

rep = verify_against_simulation(best.beta, gamma, np.random.default_rng(0), n_steps=100_000, n_cells=800)
print(f"simulated lag-1 at that beta: {rep.sim_lag1:.4f} +- {rep.sim_lag1_se:.4f}")
