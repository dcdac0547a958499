"""2D incompressible Navier-Stokes on the torus ``[-1, 1)^2``.

The unknown is the initial velocity ``u = sum_k u_k psi_k`` in the
divergence-free basis. Time stepping uses an exact integrating factor for the
viscous term and a forward-Euler step for the Leray-projected, 2/3-dealiased
advection term::

    u^{n+1} = E * (u^n + dt * (f - N(u^n))),   E_k = exp(-nu pi^2 |k|^2 dt)

The projected advection ``N(u)_k = <v . grad v, psi_k>`` is evaluated through
the vorticity: for divergence-free ``v``, ``curl(v . grad v) = v . grad w`` and
``<g, psi_k> = i curl(g)^_k / (pi |k|)``.

Observations are both velocity components at a sub-lattice of the solver grid
at times ``t_m = m h``, ``m = 1..N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .spectral import TORUS, Basis, GaussianMeasure, SpectralField, TorusTransform, grid_points, torus_prior


class NumericalBlowupError(FloatingPointError):
    """The solver produced non-finite values."""


class TrajectoryMismatchError(ValueError):
    """A linearization was used with a trajectory from another configuration."""


@dataclass(frozen=True)
class NSConfig:
    viscosity: float = 0.1
    dt: float = 0.05
    obs_interval: float = 0.05
    n_obs: int = 10
    grid: int = 64
    obs_shape: tuple[int, int] = (16, 32)
    gamma: float = 3.2
    k_cos: tuple[int, int] = (5, 5)
    k_sin: tuple[int, int] = (-5, 5)
    forcing: bool = True
    nonlinear: bool = True

    def __post_init__(self):
        if self.viscosity <= 0 or self.dt <= 0 or self.gamma <= 0:
            raise ValueError("viscosity, dt and gamma must be positive")
        ratio = self.obs_interval / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("obs_interval must be a positive integer multiple of dt")
        if self.n_obs < 1:
            raise ValueError("n_obs must be >= 1")
        if self.grid % 2:
            raise ValueError("grid size must be even")
        a, b = self.obs_shape
        if self.grid % a or self.grid % b:
            raise ValueError(f"observation lattice {self.obs_shape} must divide the grid {self.grid}")
        if self.forcing and max(map(abs, (*self.k_cos, *self.k_sin))) > self.K:
            raise ValueError(f"grid {self.grid} (K = {self.K}) does not resolve the forcing modes")

    @property
    def K(self) -> int:
        """Largest retained ``|k|_inf`` under the 2/3 dealiasing rule."""
        return (self.grid - 1) // 3

    @property
    def steps_per_obs(self) -> int:
        return int(round(self.obs_interval / self.dt))

    @property
    def n_steps(self) -> int:
        return self.steps_per_obs * self.n_obs

    @property
    def n_points(self) -> int:
        return self.obs_shape[0] * self.obs_shape[1]

    @property
    def observation_dim(self) -> int:
        return 2 * self.n_points * self.n_obs


@dataclass
class TrajectoryCache:
    """States ``u^0..u^S`` of one nonlinear solve plus the grids used at each step."""

    config: NSConfig
    states: np.ndarray
    grids: list = field(default_factory=list, repr=False)
    cfl: float = 0.0

    def __len__(self):
        return len(self.states)


class NavierStokesModel:
    """Forward map ``u -> (G_1(u), .., G_N(u))`` with tangent and adjoint."""

    def __init__(self, config: NSConfig | None = None):
        self.config = config = config or NSConfig()
        self.basis = Basis(TORUS, config.K)
        self.tr = TorusTransform(self.basis, config.grid)
        kk = self.basis.magnitudes
        self.decay = np.exp(-config.viscosity * np.pi ** 2 * kk ** 2 * config.dt)
        # grid multipliers: velocity and vorticity gradients as functions of u
        self.m_vx = self.tr.vx
        self.m_vy = self.tr.vy
        self.m_wx = np.pi ** 2 * self.tr.kx * kk
        self.m_wy = np.pi ** 2 * self.tr.ky * kk
        self.m_proj = 1j / (np.pi * kk)
        n = config.grid
        a, b = config.obs_shape
        self._obs_rows = np.arange(a) * (n // a)
        self._obs_cols = np.arange(b) * (n // b)
        self._obs_idx = np.ix_(self._obs_rows, self._obs_cols)
        self.forcing_coefficients = self._forcing() if config.forcing else np.zeros(self.basis.n_modes, complex)

    # -- basic pieces -------------------------------------------------------
    @property
    def prior(self) -> GaussianMeasure:
        """``N(0, pi^4 A^{-2})``, i.e. ``c_k = |k|^{-4}``."""
        return torus_prior(self.config.K)

    @property
    def observation_dim(self) -> int:
        return self.config.observation_dim

    def observation_points(self) -> tuple[np.ndarray, np.ndarray]:
        x = grid_points(self.config.grid)
        return x[self._obs_rows], x[self._obs_cols]

    def stream_function(self, x1, x2):
        c = self.config
        return (2 / np.pi) * (np.cos(np.pi * (c.k_cos[0] * x1 + c.k_cos[1] * x2))
                              + np.sin(np.pi * (c.k_sin[0] * x1 + c.k_sin[1] * x2)))

    def _forcing(self) -> np.ndarray:
        x = grid_points(self.config.grid)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        psi_hat = self.tr.analyze(self.stream_function(X1, X2))
        # f = J grad Psi = (d2 Psi, -d1 Psi) = pi i Psi_k k_perp  ->  <f, psi_k> = pi i |k| Psi_k
        return np.pi * 1j * self.basis.magnitudes * psi_hat

    def forcing_field(self) -> SpectralField:
        return SpectralField(self.basis, self.forcing_coefficients)

    def _grids(self, u):
        syn = self.tr.synthesize
        return syn(self.m_vx * u), syn(self.m_vy * u), syn(self.m_wx * u), syn(self.m_wy * u)

    def _advection(self, grids) -> np.ndarray:
        vx, vy, wx, wy = grids
        return self.m_proj * self.tr.analyze(vx * wx + vy * wy)

    def _observe_grids(self, vx, vy) -> np.ndarray:
        return np.concatenate([vx[self._obs_idx].ravel(), vy[self._obs_idx].ravel()])

    # -- nonlinear solve ----------------------------------------------------
    def solve(self, u0: np.ndarray, n_steps: int | None = None, keep_grids: bool = True) -> TrajectoryCache:
        """Integrate from coefficients ``u0`` and cache every state."""
        cfg = self.config
        S = cfg.n_steps if n_steps is None else n_steps
        u = np.asarray(u0, dtype=complex)
        states = np.empty((S + 1, self.basis.n_modes), dtype=complex)
        states[0] = u
        grids = []
        dx = 2.0 / cfg.grid
        cfl = 0.0
        f = self.forcing_coefficients
        for n in range(S):
            g = self._grids(u)
            if keep_grids:
                grids.append(g)
            cfl = max(cfl, float(np.max(np.abs(g[0]) + np.abs(g[1]))) * cfg.dt / dx)
            rhs = f - self._advection(g) if cfg.nonlinear else f
            u = self.decay * (u + cfg.dt * rhs)
            if not np.all(np.isfinite(u)):
                raise NumericalBlowupError(f"non-finite state at step {n + 1}")
            states[n + 1] = u
        return TrajectoryCache(cfg, states, grids, cfl)

    def observe(self, traj: TrajectoryCache) -> np.ndarray:
        cfg = self.config
        out = []
        for m in range(1, cfg.n_obs + 1):
            s = m * cfg.steps_per_obs
            if s < len(traj.grids):
                vx, vy = traj.grids[s][:2]
            else:
                vx, vy = self.tr.velocity(traj.states[s])
            out.append(self._observe_grids(vx, vy))
        return np.concatenate(out)

    def evaluate(self, u0: np.ndarray) -> np.ndarray:
        """``G(u0)`` without keeping the trajectory around."""
        cfg = self.config
        u = np.asarray(u0, dtype=complex)
        f = self.forcing_coefficients
        spo = cfg.steps_per_obs
        out = []
        for n in range(cfg.n_steps):
            g = self._grids(u)
            if n and n % spo == 0:
                out.append(self._observe_grids(g[0], g[1]))
            rhs = f - self._advection(g) if cfg.nonlinear else f
            u = self.decay * (u + cfg.dt * rhs)
        if not np.all(np.isfinite(u)):
            raise NumericalBlowupError("non-finite state in forward solve")
        out.append(self._observe_grids(*self.tr.velocity(u)))
        return np.concatenate(out)

    def forward(self, u: SpectralField) -> np.ndarray:
        return self.evaluate(u.coefficients)

    def linearize(self, u0: np.ndarray) -> NSLinearization:
        return NSLinearization(self, self.solve(u0))

    def synthesize_data(self, truth: SpectralField, rng: np.random.Generator,
                        gamma: float | None = None) -> np.ndarray:
        gamma = self.config.gamma if gamma is None else gamma
        return self.forward(truth) + gamma * rng.standard_normal(self.observation_dim)

    # -- linearised pieces --------------------------------------------------
    def _advection_tangent(self, grids, d) -> np.ndarray:
        vx, vy, wx, wy = grids
        dvx, dvy, dwx, dwy = self._grids(d)
        return self.m_proj * self.tr.analyze(dvx * wx + dvy * wy + vx * dwx + vy * dwy)

    def _advection_adjoint(self, grids, b) -> np.ndarray:
        vx, vy, wx, wy = grids
        q = self.tr.synthesize(np.conj(self.m_proj) * b)
        an = self.tr.analyze
        return (self.m_vx * an(wx * q) + self.m_vy * an(wy * q)
                + self.m_wx * an(vx * q) + self.m_wy * an(vy * q))

    def _observe_tangent(self, d) -> np.ndarray:
        return self._observe_grids(*self.tr.velocity(d))

    def _observe_adjoint(self, y) -> np.ndarray:
        n = self.config.grid
        p = self.config.n_points
        gx = np.zeros((n, n))
        gy = np.zeros((n, n))
        gx[self._obs_idx] = y[:p].reshape(self.config.obs_shape)
        gy[self._obs_idx] = y[p:].reshape(self.config.obs_shape)
        an = self.tr.analyze
        return (n * n) * (self.m_vx * an(gx) + self.m_vy * an(gy))

    def tangent(self, traj: TrajectoryCache, du: np.ndarray) -> np.ndarray:
        """``DG(u0) du`` by linearised forward stepping over ``traj``."""
        self._check(traj)
        cfg = self.config
        d = np.asarray(du, dtype=complex)
        out = []
        for n in range(cfg.n_steps):
            if n and n % cfg.steps_per_obs == 0:
                out.append(self._observe_tangent(d))
            rhs = -self._advection_tangent(traj.grids[n], d) if cfg.nonlinear else 0.0
            d = self.decay * (d + cfg.dt * rhs)
        out.append(self._observe_tangent(d))
        return np.concatenate(out)

    def adjoint(self, traj: TrajectoryCache, dy: np.ndarray) -> np.ndarray:
        """``DG(u0)* dy`` by backward stepping; adjoint w.r.t. the L2 inner product."""
        self._check(traj)
        cfg = self.config
        dy = np.asarray(dy, dtype=float)
        block = 2 * cfg.n_points
        lam = np.zeros(self.basis.n_modes, dtype=complex)
        for n in range(cfg.n_steps, 0, -1):
            if n % cfg.steps_per_obs == 0:
                m = n // cfg.steps_per_obs - 1
                lam = lam + self._observe_adjoint(dy[m * block:(m + 1) * block])
            lam = self.decay * lam
            if cfg.nonlinear:
                lam = lam - cfg.dt * self._advection_adjoint(traj.grids[n - 1], lam)
        return lam

    def _check(self, traj: TrajectoryCache):
        if traj.config != self.config or len(traj.grids) != self.config.n_steps:
            raise TrajectoryMismatchError("trajectory was not produced by this model's full solve")


class NSLinearization:
    def __init__(self, model: NavierStokesModel, traj: TrajectoryCache):
        self.model = model
        self.traj = traj

    def tangent(self, du):
        return self.model.tangent(self.traj, du)

    def adjoint(self, dy):
        return self.model.adjoint(self.traj, dy)


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """L2 inner product of two half-spectrum torus coefficient arrays."""
    return float(2.0 * np.sum((a * np.conj(b)).real))


def energy(u: np.ndarray) -> float:
    return float(np.sqrt(inner(u, u)))
