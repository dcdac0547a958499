"""Low-rank Gauss-Newton curvature in whitened coordinates.

The operator is ``H = C^{1/2} DG(w)* DG(w) C^{1/2}`` acting on the real
whitened coordinate vector. Its dominant eigenpairs feed
:func:`fsmcmc.proposals.build_B_hessian`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .spectral import GaussianMeasure, coefficients_to_real, real_to_coefficients


@dataclass
class LowRankCurvature:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # rows
    residual_estimate: float = 0.0
    converged: bool = True
    n_applies: int = 0
    linearization_point: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)

    def truncate(self, r: int) -> LowRankCurvature:
        resid = float(self.eigenvalues[r]) if r < self.rank else self.residual_estimate
        return LowRankCurvature(self.eigenvalues[:r].copy(), self.eigenvectors[:r].copy(), resid,
                                self.converged, self.n_applies, self.linearization_point, dict(self.meta))


def gauss_newton_operator(model, prior: GaussianMeasure, w: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``x -> C^{1/2} DG(w)* DG(w) C^{1/2} x`` on whitened real vectors.

    ``w`` is the linearization point in whitened real coordinates.
    """
    basis = prior.basis
    lin = model.linearize(prior.unwhiten_real(w))
    sqrt_c = prior.sqrt_eigenvalues

    def apply(x):
        du = sqrt_c * real_to_coefficients(basis, x)
        g = lin.adjoint(lin.tangent(du))
        return coefficients_to_real(basis, sqrt_c * g)

    return apply


def gauss_newton_apply(model, prior: GaussianMeasure, w: np.ndarray, dx: np.ndarray) -> np.ndarray:
    return gauss_newton_operator(model, prior, w)(dx)


def lowrank_eigs(apply: Callable[[np.ndarray], np.ndarray], dim: int, rank: int,
                 n_probe: int | None = None, rng: np.random.Generator | None = None,
                 rtol: float = 1e-10, atol: float = 0.0, max_iter: int = 100) -> LowRankCurvature:
    """Top eigenpairs of a symmetric positive semi-definite operator.

    Block subspace iteration with Rayleigh-Ritz and locking. Ritz pairs are
    locked from the top down once their residual satisfies
    ``||A v - theta v|| <= rtol * theta + atol``; locked vectors are deflated
    from the block, so later Rayleigh-Ritz problems only see the remaining
    part of the spectrum and small eigenvalues keep their relative accuracy.

    Parameters
    ----------
    apply : callable
        Matrix-free action on length-``dim`` vectors.
    rank : int
        Number of eigenpairs wanted.
    n_probe : int, optional
        Block size; defaults to ``3 * rank`` (capped at ``dim``).
    max_iter : int
        Iteration budget. If exhausted, the pairs found so far (plus the
        current best Ritz pairs) are returned with ``converged=False``.
    """
    if rank < 1:
        raise ValueError("rank must be >= 1")
    rank = min(rank, dim)
    rng = np.random.default_rng(0) if rng is None else rng
    p = min(dim, n_probe if n_probe is not None else 3 * rank)
    p = max(p, rank)
    n_applies = 0

    def apply_block(Q):
        nonlocal n_applies
        n_applies += Q.shape[1]
        return np.column_stack([apply(q) for q in Q.T])

    locked_vals: list[float] = []
    locked_vecs = np.zeros((dim, 0))

    def deflate(X):
        if locked_vecs.shape[1]:
            X = X - locked_vecs @ (locked_vecs.T @ X)
            X = X - locked_vecs @ (locked_vecs.T @ X)
        return X

    Q = np.linalg.qr(deflate(rng.standard_normal((dim, p))))[0]
    theta = np.zeros(0)
    S = Q
    converged = False
    for _ in range(max_iter):
        AQ = deflate(apply_block(Q))
        T = Q.T @ AQ
        theta, V = scipy.linalg.eigh(0.5 * (T + T.T))
        order = np.argsort(theta)[::-1]
        theta, V = theta[order], V[:, order]
        S = Q @ V
        AS = AQ @ V
        res = np.linalg.norm(AS - S * theta, axis=0)
        n_lock = 0
        for j in range(len(theta)):
            if len(locked_vals) + n_lock >= rank or res[j] > rtol * max(theta[j], 0.0) + atol:
                break
            n_lock += 1
        if n_lock:
            locked_vals.extend(theta[:n_lock].tolist())
            locked_vecs = np.column_stack([locked_vecs, S[:, :n_lock]])
        if len(locked_vals) >= rank:
            converged = True
            break
        remaining = min(max(p - len(locked_vals), rank - len(locked_vals)), dim - len(locked_vals))
        X = deflate(AS[:, n_lock:])
        X = X[:, :remaining]
        if X.shape[1] < remaining:
            X = np.column_stack([X, deflate(rng.standard_normal((dim, remaining - X.shape[1])))])
        # keep the block well conditioned when some columns collapse to zero
        scale = np.linalg.norm(X, axis=0)
        tiny = scale <= 1e-300
        if np.any(tiny):
            X[:, tiny] = deflate(rng.standard_normal((dim, int(tiny.sum()))))
        Q = np.linalg.qr(deflate(X))[0]
        Q = np.linalg.qr(deflate(Q))[0]

    vals = np.array(locked_vals)
    vecs = locked_vecs
    if len(vals) < rank:
        # budget exhausted: pad with the current best Ritz pairs
        missing = rank - len(vals)
        vals = np.concatenate([vals, theta[:missing]])
        vecs = np.column_stack([vecs, S[:, :missing]])
    order = np.argsort(vals)[::-1]
    vals = np.maximum(vals[order], 0.0)
    vecs = vecs[:, order]
    # largest Ritz value not kept: estimate of the first neglected eigenvalue
    tail = theta[n_lock:] if converged else theta[rank - len(locked_vals):]
    resid = float(max(tail[0], 0.0)) if len(tail) else 0.0
    return LowRankCurvature(vals, vecs.T.copy(), resid, converged, n_applies)


def choose_rank(eigenvalues: np.ndarray, zeta: float, gamma: float, threshold: float = 0.01) -> int:
    """Smallest ``r`` with ``lambda_{r+1} < threshold * zeta * gamma^2``.

    Directions beyond ``r`` would get weights below roughly ``threshold`` and
    are left to the independently sampled complement.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    cut = threshold * zeta * gamma ** 2
    below = np.flatnonzero(lam < cut)
    return int(below[0]) if len(below) else len(lam)


def dense_gauss_newton(model, prior: GaussianMeasure, w: np.ndarray) -> np.ndarray:
    """Assemble ``C^{1/2} DG* DG C^{1/2}`` column by column from tangent solves."""
    basis = prior.basis
    lin = model.linearize(prior.unwhiten_real(w))
    sqrt_c = prior.sqrt_eigenvalues
    cols = []
    for j in range(basis.dim):
        e = np.zeros(basis.dim)
        e[j] = 1.0
        cols.append(lin.tangent(sqrt_c * real_to_coefficients(basis, e)))
    J = np.column_stack(cols)
    return J.T @ J
