"""Inverse heat equation on ``(0, pi)`` with Dirichlet boundaries.

The initial condition ``u`` is observed through ``G = exp(-t A)``,
``A = -d^2/dx^2``, which is diagonal in the sine basis with entries
``exp(-t k^2)``. Observations are the sine coefficients of ``v(t, .)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SINE, Basis, GaussianMeasure, SpectralField, BasisMismatchError, sine_prior


@dataclass(frozen=True)
class HeatModel:
    K: int = 128
    prior_scale: float = 1e4
    gamma: float = 1.0
    time: float = 1.0

    def __post_init__(self):
        if self.K < 1 or self.gamma <= 0 or self.prior_scale <= 0 or self.time <= 0:
            raise ValueError("HeatModel needs K >= 1 and positive scale, gamma, time")

    @property
    def basis(self) -> Basis:
        return Basis(SINE, self.K)

    @property
    def prior(self) -> GaussianMeasure:
        """``N(0, prior_scale * A^{-1})``, i.e. ``c_k = prior_scale / k^2``."""
        return sine_prior(self.K, self.prior_scale)

    @property
    def forward_eigenvalues(self) -> np.ndarray:
        k = np.arange(1, self.K + 1, dtype=float)
        return np.exp(-self.time * k ** 2)

    @property
    def observation_dim(self) -> int:
        return self.K

    # ForwardModel contract -------------------------------------------------
    def evaluate(self, coefficients: np.ndarray) -> np.ndarray:
        return self.forward_eigenvalues * coefficients

    def linearize(self, coefficients=None) -> HeatLinearization:
        return HeatLinearization(self.forward_eigenvalues)

    # -----------------------------------------------------------------------
    def forward(self, u: SpectralField) -> np.ndarray:
        if u.basis != self.basis:
            raise BasisMismatchError(f"heat model expects {self.basis}, got {u.basis}")
        return self.evaluate(u.coefficients)

    def exact_posterior(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-mode posterior mean and variance for data ``y``.

        Both are diagonal because prior and forward map share the sine basis:
        ``V_k = (g_k^2 / gamma^2 + 1 / c_k)^{-1}``, ``m_k = V_k g_k y_k / gamma^2``.
        """
        y = np.asarray(y, dtype=float)
        g = self.forward_eigenvalues[: len(y)]
        c = self.prior.eigenvalues[: len(y)]
        var = 1.0 / (g ** 2 / self.gamma ** 2 + 1.0 / c)
        return var * g * y / self.gamma ** 2, var

    def whitened_curvature(self) -> np.ndarray:
        """Eigenvalues ``c_k g_k^2`` of the whitened ``DG* DG``."""
        return self.prior.eigenvalues * self.forward_eigenvalues ** 2

    def synthesize_data(self, truth: SpectralField, rng: np.random.Generator,
                        gamma: float | None = None) -> np.ndarray:
        gamma = self.gamma if gamma is None else gamma
        return self.forward(truth) + gamma * rng.standard_normal(self.K)


class HeatLinearization:
    """The heat map is linear and symmetric, so tangent and adjoint coincide."""

    def __init__(self, g: np.ndarray):
        self.g = g

    def tangent(self, du: np.ndarray) -> np.ndarray:
        return self.g * du

    def adjoint(self, dy: np.ndarray) -> np.ndarray:
        return self.g * dy
