"""Sample the heat-equation posterior with the O, C and H proposals and compare ESS.

Run: python demos/heat_three_proposals.py
"""

import numpy as np

from fsmcmc import HeatModel, Recorder, acf, build_B_hessian, build_B_scalar, build_B_truncated, iact, run_chain
from fsmcmc.diagnostics import ess
from fsmcmc.mcmc import Potential, substream
from fsmcmc.spectral import sample_gaussian

SEED = 5
N_STEPS = 40_000
MODES = [1, 2, 5]

model = HeatModel(K=64)
prior = model.prior
truth = sample_gaussian(prior, substream(SEED, "truth"))
y = model.synthesize_data(truth, substream(SEED, "noise"))
mean, var = model.exact_posterior(y)

lam = model.whitened_curvature()
order = np.argsort(lam)[::-1][:10]
proposals = {
    "O": build_B_scalar(0.05, model.K),
    "C": build_B_truncated(0.1, 2, model.basis),
    "H": build_B_hessian(0.2, 1.0, model.gamma, lam[order], np.eye(model.K)[order]),
}

for name, B in proposals.items():
    pot = Potential(model, y, model.gamma, prior)
    rec = run_chain(np.zeros(model.K), B, pot, N_STEPS, substream(SEED, f"chain-{name}"),
                    Recorder(prior, MODES), burn_in=2000)
    vals = rec.production_values()
    row = []
    for j, k in enumerate(MODES):
        e = ess(len(vals), iact(acf(vals[:, j])))
        z = (vals[:, j].mean() - mean[k - 1]) / np.sqrt(var[k - 1])
        row.append(f"k={k}: ESS {e:8.0f}, mean offset {z:+.2f} sd")
    print(f"{name}  accept {rec.acceptance_rate:.2f}  " + " | ".join(row))
