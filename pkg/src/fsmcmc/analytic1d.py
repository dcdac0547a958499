"""Scalar Gaussian model: acceptance and lag-1 autocorrelation of pCN-type chains.

Prior ``N(0, 1)``, one observation ``y = 1`` with noise ``gamma``, so the
posterior is ``N(a, c)`` with ``a = 1/(gamma^2 + 1)`` and
``c = gamma^2/(1 + gamma^2)``. Two proposals are compared: the prior-reversible
``z* = sqrt(1-beta^2) z + beta w`` and the posterior-reversible
``z* = sqrt(1-beta^2)(z - a) + a + sqrt(c) beta w``. Assuming a stationary
chain ``Z_n ~ N(a, c)``, the expected acceptance and the normalised lag-1
autocovariance ``E[(Z_{n+1}-a)(Z_n-a)]/c`` are two-dimensional Gaussian
integrals, evaluated here with a midpoint Riemann sum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

PRIOR = "prior"
POSTERIOR = "posterior"
KINDS = (PRIOR, POSTERIOR)


class QuadratureResolutionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Scalar1DProblem:
    gamma: float
    y: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def a(self) -> float:
        return self.y / (self.gamma ** 2 + 1.0)

    @property
    def c(self) -> float:
        return self.gamma ** 2 / (1.0 + self.gamma ** 2)

    def phi(self, z):
        """Negative log-likelihood ``(z - y)^2 / (2 gamma^2)``."""
        return 0.5 * (z - self.y) ** 2 / self.gamma ** 2

    def potential(self, z, kind: str):
        """Potential relative to the measure the proposal keeps invariant.

        For the prior kind this is ``phi``. For the posterior kind it is
        ``-log(d posterior / d N(a, c))``, which is constant; it is still
        evaluated pointwise so the acceptance is computed, not assumed.
        """
        if kind == PRIOR:
            return self.phi(z)
        if kind == POSTERIOR:
            return self.phi(z) + 0.5 * z ** 2 - 0.5 * (z - self.a) ** 2 / self.c
        raise ValueError(f"kind must be one of {KINDS}")

    def propose(self, z, w, beta: float, kind: str):
        s = np.sqrt(1.0 - beta ** 2)
        if kind == PRIOR:
            return s * z + beta * w
        if kind == POSTERIOR:
            return s * (z - self.a) + self.a + np.sqrt(self.c) * beta * w
        raise ValueError(f"kind must be one of {KINDS}")

    def acceptance(self, z, zstar, kind: str):
        d = self.potential(z, kind) - self.potential(zstar, kind)
        return np.exp(np.minimum(d, 0.0))


def _check_beta(beta):
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")


def riemann_lag1(beta: float, gamma: float, kind: str = PRIOR, n_cells: int = 2000,
                 width: float = 8.0, block: int = 250) -> tuple[float, float]:
    """``(E alpha, lag-1 autocorrelation)`` by a midpoint rule on ``n_cells^2`` cells.

    The domain is ``z in a +- width sqrt(c)``, ``w in +- width``.
    """
    _check_beta(beta)
    p = Scalar1DProblem(gamma)
    a, c = p.a, p.c
    hz = 2.0 * width * np.sqrt(c) / n_cells
    hw = 2.0 * width / n_cells
    z = a - width * np.sqrt(c) + hz * (np.arange(n_cells) + 0.5)
    w = -width + hw * (np.arange(n_cells) + 0.5)
    pw = np.exp(-0.5 * w ** 2) / np.sqrt(2.0 * np.pi) * hw
    ea = 0.0
    lag = 0.0
    for i in range(0, n_cells, block):
        zb = z[i:i + block, None]
        pz = np.exp(-0.5 * (zb - a) ** 2 / c) / np.sqrt(2.0 * np.pi * c) * hz
        zs = p.propose(zb, w[None, :], beta, kind)
        alpha = p.acceptance(zb, zs, kind)
        wt = pz * pw[None, :]
        ea += float(np.sum(alpha * wt))
        lag += float(np.sum(((zs - a) * (zb - a) * alpha + (zb - a) ** 2 * (1.0 - alpha)) * wt))
    return float(ea), float(lag / c)


def checked_lag1(beta: float, gamma: float, kind: str = PRIOR, n_cells: int = 2000,
                 tol: float = 1e-3) -> tuple[float, float, float]:
    """Like :func:`riemann_lag1` plus a refinement check at half the cell size.

    Returns ``(E alpha, lag1, change)`` from the refined grid, where ``change``
    is the larger of the two differences. Raises
    :class:`QuadratureResolutionError` if it exceeds ``tol``.
    """
    e1, l1 = riemann_lag1(beta, gamma, kind, n_cells)
    e2, l2 = riemann_lag1(beta, gamma, kind, 2 * n_cells)
    change = max(abs(e2 - e1), abs(l2 - l1))
    if change > tol:
        raise QuadratureResolutionError(
            f"refinement changed the result by {change:.2e} at beta={beta}, gamma={gamma}")
    return e2, l2, change


@dataclass
class SweepRow:
    beta: float
    gamma: float
    kind: str
    mean_alpha: float
    lag1: float


def sweep_lag1(betas, gammas, kinds=KINDS, n_cells: int = 2000) -> list[SweepRow]:
    """Evaluate every ``(beta, gamma, kind)`` combination."""
    rows = []
    for kind in kinds:
        for g in np.atleast_1d(gammas):
            for b in np.atleast_1d(betas):
                ea, l1 = riemann_lag1(float(b), float(g), kind, n_cells)
                rows.append(SweepRow(float(b), float(g), kind, ea, l1))
    return rows


def write_sweep_csv(path, rows: list[SweepRow], header: dict | None = None):
    with open(path, "w", newline="") as f:
        for k, v in sorted((header or {}).items()):
            f.write(f"# {k}: {v}\n")
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["beta", "gamma", "kind", "mean_alpha", "lag1"])
        for r in rows:
            wr.writerow([repr(float(r.beta)), repr(float(r.gamma)), r.kind, repr(float(r.mean_alpha)),
                         repr(float(r.lag1))])


def optimal_beta(rows: list[SweepRow]) -> SweepRow:
    """Row with the smallest lag-1 autocorrelation."""
    return min(rows, key=lambda r: r.lag1)


@dataclass
class Simulation1D:
    x: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    accepted: np.ndarray


def simulate_1d(beta: float, gamma: float, n_steps: int, rng: np.random.Generator,
                kind: str = PRIOR, x0: float | None = None, flat: bool = False) -> Simulation1D:
    """Run the proposal chain ``X`` and the MH chain ``Z`` on shared noise.

    Both chains start from the same point (a prior draw unless ``x0`` is
    given). ``X`` always moves; ``Z`` proposes from its own state with the
    same ``W_n`` and accepts with the MH rule. ``flat=True`` sets the
    potential to zero, in which case ``Z`` reproduces ``X`` exactly.
    """
    _check_beta(beta)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    p = Scalar1DProblem(gamma)
    s = np.sqrt(1.0 - beta ** 2)
    w = rng.standard_normal(n_steps)
    logu = np.log(rng.random(n_steps))
    x = np.empty(n_steps + 1)
    z = np.empty(n_steps + 1)
    alpha = np.empty(n_steps)
    acc = np.zeros(n_steps, dtype=bool)
    x[0] = z[0] = rng.standard_normal() if x0 is None else x0
    for n in range(n_steps):
        x[n + 1] = s * x[n] + beta * w[n]
    pot = (lambda t: 0.0) if flat else (lambda t: p.potential(t, kind))
    zc = z[0]
    phic = pot(zc)
    for n in range(n_steps):
        zs = p.propose(zc, w[n], beta, kind)
        phis = pot(zs)
        d = phic - phis
        alpha[n] = 1.0 if d >= 0 else np.exp(d)
        if logu[n] < d:
            zc, phic = zs, phis
            acc[n] = True
        z[n + 1] = zc
    return Simulation1D(x, z, alpha, acc)


def _batch_mean(v: np.ndarray, n_batches: int) -> tuple[float, float]:
    m = len(v) // n_batches
    b = v[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return float(b.mean()), float(b.std(ddof=1) / np.sqrt(n_batches))


@dataclass
class VerificationReport:
    beta: float
    gamma: float
    kind: str
    quad_alpha: float
    quad_lag1: float
    sim_alpha: float
    sim_alpha_se: float
    sim_lag1: float
    sim_lag1_se: float

    @staticmethod
    def _z(diff, se):
        # a constant simulated quantity has zero spread; only an exact match passes
        if se == 0:
            return 0.0 if abs(diff) <= 1e-12 else float("inf")
        return diff / se

    @property
    def alpha_z(self) -> float:
        return self._z(self.sim_alpha - self.quad_alpha, self.sim_alpha_se)

    @property
    def lag1_z(self) -> float:
        return self._z(self.sim_lag1 - self.quad_lag1, self.sim_lag1_se)

    def passed(self, n_sigma: float = 3.0) -> bool:
        return abs(self.alpha_z) <= n_sigma and abs(self.lag1_z) <= n_sigma


def verify_against_simulation(beta: float, gamma: float, rng: np.random.Generator, kind: str = PRIOR,
                              n_steps: int = 200_000, burn_in: int = 2000, n_batches: int = 50,
                              n_cells: int = 2000) -> VerificationReport:
    """Compare the quadrature with a simulated chain using batch-means errors.

    The chain starts at the posterior mean, and the first ``burn_in`` steps
    are dropped.
    """
    qa, ql = riemann_lag1(beta, gamma, kind, n_cells)
    p = Scalar1DProblem(gamma)
    sim = simulate_1d(beta, gamma, n_steps + burn_in, rng, kind, x0=p.a)
    z = sim.z[burn_in:]
    prod = (z[1:] - p.a) * (z[:-1] - p.a) / p.c
    sa, sa_se = _batch_mean(sim.alpha[burn_in:], n_batches)
    sl, sl_se = _batch_mean(prod, n_batches)
    return VerificationReport(beta, gamma, kind, qa, ql, sa, sa_se, sl, sl_se)
