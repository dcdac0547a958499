"""Solve the forward Navier-Stokes problem from a prior draw and check the adjoint.

Run: python demos/ns_forward.py
"""

import numpy as np

from fsmcmc import NavierStokesModel, NSConfig
from fsmcmc.navier_stokes import inner
from fsmcmc.spectral import sample_gaussian

model = NavierStokesModel(NSConfig(grid=32, obs_shape=(8, 16)))
rng = np.random.default_rng(1)
u0 = sample_gaussian(model.prior, rng).coefficients

traj = model.solve(u0)
y = model.observe(traj)
print(f"{model.config.K} modes per axis, {model.observation_dim} observations, |y| = {np.linalg.norm(y):.3f}")

du = sample_gaussian(model.prior, rng).coefficients
dy = rng.standard_normal(model.observation_dim)
lhs = model.tangent(traj, du) @ dy
rhs = inner(du, model.adjoint(traj, dy))
print(f"<J du, dy> = {lhs:.8e}, <du, J* dy> = {rhs:.8e}")
