"""Operator-weighted proposals ``u' = sqrt(B) u + sqrt(I - B) W`` in whitened coordinates.

A :class:`WeightOperator` is a low-rank self-adjoint operator: weights ``b_i``
on orthonormal directions ``v_i`` plus a single weight ``b_c`` on their
orthogonal complement. Every builder here produces weights of the form
``b = (1 - beta^2) * profile`` so the step size ``beta`` can be retuned
without recomputing the directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import Basis

WEIGHT_CEILING = 1.0 - 1e-12

SCALAR = "O"
TRUNCATED = "C"
HESSIAN = "H"


class NumericalCurvatureError(ArithmeticError):
    """Curvature eigenvalues outside their admissible range."""


def _check_beta(beta: float):
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")


@dataclass(frozen=True, eq=False)
class WeightOperator:
    """Self-adjoint weight operator with spectrum in ``[0, 1)``.

    Parameters
    ----------
    dim : int
        Dimension of the whitened real coordinate space.
    beta : float
        Scalar step size; weights are ``(1 - beta^2) * profile``.
    profile : array, shape (r,)
        Relative weight of each direction, in ``[0, 1]``.
    complement_profile : float
        Relative weight on the orthogonal complement of the directions.
    vectors : array, shape (r, dim), optional
        Orthonormal directions as rows. Omit when the directions are
        coordinate axes and give ``axes`` instead.
    axes : int array, shape (r,), optional
        Coordinate indices of axis-aligned directions.
    variant : str
        ``"O"``, ``"C"`` or ``"H"``; informational.
    """

    dim: int
    beta: float
    profile: np.ndarray
    complement_profile: float
    vectors: np.ndarray | None = None
    axes: np.ndarray | None = None
    variant: str = SCALAR
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_beta(self.beta)
        profile = np.asarray(self.profile, dtype=float).reshape(-1)
        if np.any(profile < 0) or np.any(profile > 1):
            raise ValueError("profile weights must lie in [0, 1]")
        if not 0.0 <= self.complement_profile <= 1.0:
            raise ValueError("complement weight must lie in [0, 1]")
        object.__setattr__(self, "profile", profile)
        if self.vectors is not None and self.axes is not None:
            raise ValueError("give either vectors or axes, not both")
        if self.axes is not None:
            axes = np.asarray(self.axes, dtype=np.int64).reshape(-1)
            if len(axes) != len(profile) or len(np.unique(axes)) != len(axes):
                raise ValueError("axes must be distinct, one per profile weight")
            object.__setattr__(self, "axes", axes)
        else:
            vec = np.zeros((0, self.dim)) if self.vectors is None else np.asarray(self.vectors, float)
            if vec.shape != (len(profile), self.dim):
                raise ValueError(f"vectors must have shape {(len(profile), self.dim)}, got {vec.shape}")
            if len(vec) and not np.allclose(vec @ vec.T, np.eye(len(vec)), atol=1e-8):
                raise ValueError("direction vectors must be orthonormal")
            object.__setattr__(self, "vectors", vec)
        scale = 1.0 - self.beta ** 2
        b = np.clip(scale * profile, 0.0, WEIGHT_CEILING)
        bc = float(np.clip(scale * self.complement_profile, 0.0, WEIGHT_CEILING))
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "_bc", bc)
        object.__setattr__(self, "_sb", np.sqrt(b))
        object.__setattr__(self, "_sn", np.sqrt(1.0 - b))
        object.__setattr__(self, "_sbc", np.sqrt(bc))
        object.__setattr__(self, "_snc", np.sqrt(1.0 - bc))

    @property
    def rank(self) -> int:
        return len(self.profile)

    @property
    def weights(self) -> np.ndarray:
        """Eigenvalues ``b_i`` (after clamping)."""
        return self._b

    @property
    def complement_weight(self) -> float:
        return self._bc

    def with_beta(self, beta: float) -> WeightOperator:
        return WeightOperator(self.dim, beta, self.profile, self.complement_profile,
                              vectors=None if self.axes is not None else self.vectors,
                              axes=self.axes, variant=self.variant, meta=dict(self.meta))

    def direction_matrix(self) -> np.ndarray:
        """Directions as dense rows (materialises axis-aligned ones)."""
        if self.axes is None:
            return self.vectors
        out = np.zeros((self.rank, self.dim))
        out[np.arange(self.rank), self.axes] = 1.0
        return out

    def _split(self, x):
        if self.axes is not None:
            coef = x[self.axes]
            rest = x.copy()
            rest[self.axes] = 0.0
            return coef, rest
        coef = self.vectors @ x
        return coef, x - self.vectors.T @ coef

    def _join(self, coef, rest):
        if self.axes is not None:
            out = rest.copy()
            out[self.axes] += coef
            return out
        return rest + self.vectors.T @ coef

    def _spectral(self, x, on_dirs, on_comp):
        coef, rest = self._split(np.asarray(x, float))
        return self._join(on_dirs * coef, on_comp * rest)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self._spectral(x, self._b, self._bc)

    def apply_sqrt(self, x: np.ndarray) -> np.ndarray:
        return self._spectral(x, self._sb, self._sbc)

    def apply_sqrt_complement(self, x: np.ndarray) -> np.ndarray:
        """``sqrt(I - B) x``."""
        return self._spectral(x, self._sn, self._snc)

    def describe(self) -> dict:
        return {"variant": self.variant, "beta": float(self.beta), "rank": self.rank,
                "complement_weight": self._bc, **self.meta}


def build_B_scalar(beta: float, dim: int) -> WeightOperator:
    """``B = (1 - beta^2) I``: the standard pCN proposal."""
    return WeightOperator(dim, beta, np.zeros(0), 1.0, variant=SCALAR)


def build_B_truncated(beta: float, k_c: float, basis: Basis) -> WeightOperator:
    """pCN on modes with ``|k| < k_c``, independent prior draws above.

    On the torus the cutoff is radial, ``|k|_2 < k_c``; both real coordinates
    of a complex mode share its weight.
    """
    _check_beta(beta)
    if k_c < 1:
        raise ValueError(f"k_c must be >= 1, got {k_c}")
    kmax = basis.K if basis.kind == "sine" else np.sqrt(2) * basis.K
    if k_c > kmax + 1:
        raise ValueError(f"k_c = {k_c} exceeds the resolved range (max |k| = {kmax:g})")
    axes = np.flatnonzero(basis.real_magnitudes() < k_c)
    return WeightOperator(basis.dim, beta, np.ones(len(axes)), 0.0, axes=axes,
                          variant=TRUNCATED, meta={"k_c": float(k_c)})


def hessian_profile(eigenvalues: np.ndarray, zeta: float, gamma: float) -> np.ndarray:
    """``lambda / (lambda + zeta gamma^2)`` per curvature eigenvalue."""
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam < 0):
        raise NumericalCurvatureError(f"negative curvature eigenvalue {lam.min():g}")
    return lam / (lam + zeta * gamma ** 2)


def build_B_hessian(beta: float, zeta: float, gamma: float, eigenvalues: np.ndarray,
                    eigenvectors: np.ndarray) -> WeightOperator:
    """Curvature-rescaled weights ``(1-beta^2) lambda_i / (lambda_i + zeta gamma^2)``.

    ``eigenvalues``/``eigenvectors`` (rows) are a low-rank eigendecomposition of
    the prior-whitened Gauss-Newton operator ``DG(w)* DG(w)``. The complement
    of their span is sampled independently from the prior.
    """
    _check_beta(beta)
    if not 0.0 < zeta <= 1.0:
        raise ValueError(f"zeta must lie in (0, 1], got {zeta}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    vec = np.atleast_2d(np.asarray(eigenvectors, dtype=float))
    return WeightOperator(vec.shape[1], beta, hessian_profile(eigenvalues, zeta, gamma), 0.0,
                          vectors=vec, variant=HESSIAN,
                          meta={"zeta": float(zeta), "gamma": float(gamma)})


def propose(x: np.ndarray, B: WeightOperator, rng: np.random.Generator) -> np.ndarray:
    """Draw ``sqrt(B) x + sqrt(I - B) W`` with ``W ~ N(0, I)``."""
    w = rng.standard_normal(B.dim)
    cx, rx = B._split(x)
    cw, rw = B._split(w)
    return B._join(B._sb * cx + B._sn * cw, B._sbc * rx + B._snc * rw)


def search_direction_covariance(B: WeightOperator) -> tuple[np.ndarray, float]:
    """Eigenvalues of ``I - B``: one per direction, and the complement value."""
    return 1.0 - B.weights, 1.0 - B.complement_weight
