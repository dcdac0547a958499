"""Spectral fields, diagonal Gaussian measures and whitening.

Two bases are supported:

``sine``
    Orthonormal sine basis ``sqrt(2/pi) sin(k x)`` on ``(0, pi)`` for
    ``k = 1..K``. Coefficients are real.

``torus``
    Divergence-free Fourier basis on ``[-1, 1)^2``,
    ``psi_k(x) = (k_perp / |k|) exp(pi i k.x)`` with ``k_perp = (k2, -k1)``,
    for ``k`` in ``{k != 0 : |k|_inf <= K}``. Only the half-spectrum
    ``{k1 > 0} U {k1 == 0, k2 > 0}`` is stored; the other half follows from
    the reality constraint ``u_{-k} = -conj(u_k)``.

Every field also has a *real coordinate* vector: the coefficients expressed in
a real orthonormal basis, so that the Euclidean inner product of two real
coordinate vectors equals the L2 inner product of the fields. For the torus
this is ``sqrt(2) * [Re u_k, Im u_k]`` over the stored half-spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

SINE = "sine"
TORUS = "torus"


class BasisMismatchError(ValueError):
    """Raised when two objects living on different bases are combined."""


@dataclass(frozen=True)
class Basis:
    """Index set of a truncated spectral basis.

    Parameters
    ----------
    kind : {"sine", "torus"}
    K : int
        Truncation: largest sine index, or largest ``|k|_inf`` on the torus.
    """

    kind: str
    K: int

    def __post_init__(self):
        if self.kind not in (SINE, TORUS):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"truncation K must be an integer >= 1, got {self.K}")

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Stored indices in the fixed (lexicographic) order.

        ``(K,)`` integers for the sine basis, ``(n, 2)`` for the torus.
        """
        if self.kind == SINE:
            return np.arange(1, self.K + 1)
        K = self.K
        k1, k2 = np.meshgrid(np.arange(-K, K + 1), np.arange(-K, K + 1), indexing="ij")
        k1, k2 = k1.ravel(), k2.ravel()
        keep = (k1 > 0) | ((k1 == 0) & (k2 > 0))
        return np.stack([k1[keep], k2[keep]], axis=1)

    @cached_property
    def magnitudes(self) -> np.ndarray:
        """``|k|`` for every stored index."""
        if self.kind == SINE:
            return self.wavevectors.astype(float)
        return np.hypot(self.wavevectors[:, 0], self.wavevectors[:, 1])

    @property
    def n_modes(self) -> int:
        return len(self.wavevectors)

    @property
    def dim(self) -> int:
        """Length of the real coordinate vector."""
        return self.n_modes if self.kind == SINE else 2 * self.n_modes

    @property
    def dtype(self):
        return np.float64 if self.kind == SINE else np.complex128

    def index_of(self, k) -> int:
        """Position of wavenumber ``k`` among the stored modes.

        For the torus, ``k`` may be in either half of the spectrum; the
        position of the stored representative ``k`` or ``-k`` is returned.
        """
        if self.kind == SINE:
            k = int(k)
            if not 1 <= k <= self.K:
                raise KeyError(k)
            return k - 1
        k1, k2 = (int(c) for c in k)
        if not (k1 > 0 or (k1 == 0 and k2 > 0)):
            k1, k2 = -k1, -k2
        if max(abs(k1), abs(k2)) > self.K or (k1, k2) == (0, 0):
            raise KeyError(k)
        hits = np.flatnonzero((self.wavevectors[:, 0] == k1) & (self.wavevectors[:, 1] == k2))
        return int(hits[0])

    def real_labels(self) -> list[str]:
        """Human-readable label of each real coordinate."""
        if self.kind == SINE:
            return [f"k={k}" for k in self.wavevectors]
        names = [f"({k1},{k2})" for k1, k2 in self.wavevectors]
        return [f"{n}.re" for n in names] + [f"{n}.im" for n in names]

    def real_magnitudes(self) -> np.ndarray:
        """``|k|`` for every real coordinate."""
        if self.kind == SINE:
            return self.magnitudes
        return np.concatenate([self.magnitudes, self.magnitudes])


def _check_same(a: Basis, b: Basis):
    if a != b:
        raise BasisMismatchError(f"basis mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of a real field in a :class:`Basis`."""

    basis: Basis
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=self.basis.dtype)
        if c.shape != (self.basis.n_modes,):
            raise ValueError(
                f"expected {self.basis.n_modes} coefficients, got shape {c.shape}"
            )
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zeros(cls, basis: Basis) -> SpectralField:
        return cls(basis, np.zeros(basis.n_modes, dtype=basis.dtype))

    @classmethod
    def from_real(cls, basis: Basis, x: np.ndarray) -> SpectralField:
        return cls(basis, real_to_coefficients(basis, x))

    def to_real(self) -> np.ndarray:
        return coefficients_to_real(self.basis, self.coefficients)

    def __getitem__(self, k):
        return self.coefficients[self.basis.index_of(k)]

    def full_spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """All wavevectors and coefficients, with the conjugate half restored."""
        if self.basis.kind == SINE:
            return self.basis.wavevectors, self.coefficients.copy()
        k = self.basis.wavevectors
        return (np.concatenate([k, -k]),
                np.concatenate([self.coefficients, -np.conj(self.coefficients)]))


def coefficients_to_real(basis: Basis, coefficients: np.ndarray) -> np.ndarray:
    if basis.kind == SINE:
        return np.asarray(coefficients, dtype=float).copy()
    c = np.asarray(coefficients)
    return np.sqrt(2.0) * np.concatenate([c.real, c.imag], axis=-1)


def real_to_coefficients(basis: Basis, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != basis.dim:
        raise ValueError(f"expected real vector of length {basis.dim}, got {x.shape}")
    if basis.kind == SINE:
        return x.copy()
    n = basis.n_modes
    return (x[..., :n] + 1j * x[..., n:]) / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    """Gaussian measure ``N(m, C)`` with ``C`` diagonal in the basis.

    Parameters
    ----------
    basis : Basis
    eigenvalues : array
        Variances ``c_k > 0`` of the (complex) coefficients, so that
        ``E|u_k - m_k|^2 = c_k``.
    mean : SpectralField, optional
        Defaults to the zero field.
    """

    basis: Basis
    eigenvalues: np.ndarray
    mean: SpectralField | None = None
    _sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.eigenvalues, dtype=float).copy()
        if c.shape != (self.basis.n_modes,):
            raise ValueError("one eigenvalue per stored mode is required")
        if not np.all(c > 0):
            raise ValueError("covariance eigenvalues must be strictly positive")
        c.flags.writeable = False
        object.__setattr__(self, "eigenvalues", c)
        if self.mean is None:
            object.__setattr__(self, "mean", SpectralField.zeros(self.basis))
        _check_same(self.mean.basis, self.basis)
        object.__setattr__(self, "_sqrt", np.sqrt(c))

    @property
    def sqrt_eigenvalues(self) -> np.ndarray:
        return self._sqrt

    def real_sqrt_eigenvalues(self) -> np.ndarray:
        """``sqrt(c_k)`` repeated over the real coordinates of each mode."""
        if self.basis.kind == SINE:
            return self._sqrt
        return np.concatenate([self._sqrt, self._sqrt])

    def partial_traces(self, truncations) -> np.ndarray:
        """``sum_{|k| <= K'} c_k`` over the full spectrum for each ``K'``."""
        mult = 1.0 if self.basis.kind == SINE else 2.0
        kk = self.basis.magnitudes
        return np.array([mult * self.eigenvalues[kk <= t].sum() for t in truncations])

    # fast paths on raw arrays, used inside samplers
    def whiten_coefficients(self, coefficients: np.ndarray) -> np.ndarray:
        return coefficients_to_real(
            self.basis, (coefficients - self.mean.coefficients) / self._sqrt)

    def unwhiten_real(self, x: np.ndarray) -> np.ndarray:
        return self._sqrt * real_to_coefficients(self.basis, x) + self.mean.coefficients


def whiten(u: SpectralField, prior: GaussianMeasure) -> SpectralField:
    """Map ``u`` to ``C^{-1/2} (u - m)``."""
    _check_same(u.basis, prior.basis)
    return SpectralField(u.basis, (u.coefficients - prior.mean.coefficients) / prior.sqrt_eigenvalues)


def unwhiten(v: SpectralField, prior: GaussianMeasure) -> SpectralField:
    """Map ``v`` to ``C^{1/2} v + m``."""
    _check_same(v.basis, prior.basis)
    return SpectralField(v.basis, prior.sqrt_eigenvalues * v.coefficients + prior.mean.coefficients)


def sample_gaussian(measure: GaussianMeasure, rng: np.random.Generator) -> SpectralField:
    """Draw from ``measure``.

    Complex torus modes get independent real and imaginary parts with variance
    ``c_k / 2`` each; the conjugate half follows by the reality constraint.
    """
    x = rng.standard_normal(measure.basis.dim)
    return SpectralField(measure.basis, measure.unwhiten_real(x))


def operator_eigenvalues(basis: Basis) -> np.ndarray:
    """Eigenvalues of ``A`` per stored mode: ``k^2`` (sine) or ``pi^2 |k|^2`` (torus)."""
    if basis.kind == SINE:
        return basis.magnitudes ** 2
    return np.pi ** 2 * basis.magnitudes ** 2


def sobolev_norm(u: SpectralField, s: float) -> float:
    """``||A^{s/2} u||``, summed over the full spectrum.

    On the torus this is ``(sum_k (pi^2 |k|^2)^s |u_k|^2)^{1/2}`` over all
    ``k != 0``; the conjugate partner of each stored mode contributes equally.
    """
    w = operator_eigenvalues(u.basis) ** s
    mult = 1.0 if u.basis.kind == SINE else 2.0
    return float(np.sqrt(mult * np.sum(w * np.abs(u.coefficients) ** 2)))


def sine_prior(K: int, scale: float = 1e4, exponent: float = 1.0) -> GaussianMeasure:
    """``N(0, scale * A^{-exponent})`` on the sine basis, ``A = -d^2/dx^2``."""
    basis = Basis(SINE, K)
    return GaussianMeasure(basis, scale * operator_eigenvalues(basis) ** (-exponent))


def torus_prior(K: int, scale: float = np.pi ** 4, exponent: float = 2.0) -> GaussianMeasure:
    """``N(0, scale * A^{-exponent})`` with ``A`` the Stokes operator on the torus."""
    basis = Basis(TORUS, K)
    return GaussianMeasure(basis, scale * operator_eigenvalues(basis) ** (-exponent))


# ---------------------------------------------------------------------------
# grid evaluation


def grid_points(n: int) -> np.ndarray:
    """1D torus grid used by :func:`grid_evaluate`: ``2j/n`` wrapped into ``[-1, 1)``."""
    x = 2.0 * np.arange(n) / n
    return np.where(x >= 1.0, x - 2.0, x)


class TorusTransform:
    """FFT plumbing between half-spectrum torus coefficients and an ``n x n`` grid.

    The grid point ``(i, j)`` sits at ``(x[i], x[j])`` with ``x = grid_points(n)``,
    so values are ``sum_k g_k exp(2 pi i k.(i, j) / n)`` and the standard
    ``rfft2``/``irfft2`` pair applies without phase factors.
    """

    def __init__(self, basis: Basis, n: int):
        if basis.kind != TORUS:
            raise ValueError("TorusTransform needs a torus basis")
        if n < 2 * basis.K + 2:
            raise ValueError(f"grid size {n} aliases modes with |k|_inf = {basis.K}; need >= {2 * basis.K + 2}")
        self.basis = basis
        self.n = n
        k = basis.wavevectors
        # stored modes with k2 >= 0 land directly in the rfft layout, the
        # others are represented by their conjugate partner -k
        direct = k[:, 1] >= 0
        self._d_idx = np.flatnonzero(direct)
        self._d_pos = (k[direct, 0] % n, k[direct, 1])
        mirror = k[:, 1] <= 0
        self._m_idx = np.flatnonzero(mirror)
        self._m_pos = ((-k[mirror, 0]) % n, -k[mirror, 1])
        self.shape = (n, n // 2 + 1)
        kk = basis.magnitudes
        self.kx = k[:, 0].astype(float)
        self.ky = k[:, 1].astype(float)
        # velocity components of psi_k: k_perp / |k| = (k2, -k1) / |k|
        self.vx = self.ky / kk
        self.vy = -self.kx / kk

    def scatter(self, g: np.ndarray) -> np.ndarray:
        """rfft-layout array of the Hermitian field with stored coefficients ``g``."""
        out = np.zeros(self.shape, dtype=complex)
        out[self._d_pos] = g[self._d_idx]
        out[self._m_pos] = np.conj(g[self._m_idx])
        return out

    def gather(self, spec: np.ndarray) -> np.ndarray:
        """Stored-half coefficients from an rfft-layout array."""
        g = np.empty(self.basis.n_modes, dtype=complex)
        g[self._d_idx] = spec[self._d_pos]
        g[self._m_idx] = np.conj(spec[self._m_pos])
        return g

    def synthesize(self, g: np.ndarray) -> np.ndarray:
        """Grid values of the real scalar field ``sum_k g_k e_k`` (``g`` Hermitian)."""
        n = self.n
        return scipy.fft.irfft2(self.scatter(g) * (n * n), s=(n, n))

    def analyze(self, grid: np.ndarray) -> np.ndarray:
        """Fourier coefficients (stored half) of a real grid field."""
        n = self.n
        return self.gather(scipy.fft.rfft2(grid)) / (n * n)

    def velocity(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.synthesize(self.vx * u), self.synthesize(self.vy * u)

    def project(self, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
        """Leray projection of a vector grid field onto the stored basis."""
        return self.vx * self.analyze(gx) + self.vy * self.analyze(gy)


def _sine_grid(n: int) -> np.ndarray:
    return np.pi * np.arange(1, n + 1) / (n + 1)


def grid_evaluate(u: SpectralField, n_grid: int, method: str = "fft"):
    """Evaluate a field on a uniform grid.

    Torus fields return ``(vx, vy)`` arrays of shape ``(n_grid, n_grid)`` at the
    points of :func:`grid_points`; sine fields return values at the interior
    points ``pi j / (n_grid + 1)``. ``method="direct"`` sums the basis functions
    explicitly and is meant for cross-checking at small ``K``.
    """
    basis = u.basis
    if basis.kind == SINE:
        if n_grid < basis.K:
            raise ValueError(f"grid size {n_grid} cannot resolve K = {basis.K}")
        if method == "direct":
            x = _sine_grid(n_grid)
            return np.sqrt(2 / np.pi) * np.sin(np.outer(x, basis.wavevectors)) @ u.coefficients
        padded = np.zeros(n_grid)
        padded[: basis.K] = u.coefficients
        # dst type I: y_j = 2 sum_k c_k sin(pi (j+1)(k+1) / (n+1))
        return scipy.fft.dst(padded, type=1) * np.sqrt(2 / np.pi) / 2
    if n_grid < 2 * basis.K + 2:
        raise ValueError(f"grid size {n_grid} aliases modes with |k|_inf = {basis.K}")
    if method == "direct":
        x = grid_points(n_grid)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        ks, cs = u.full_spectrum()
        vx = np.zeros_like(X1, dtype=complex)
        vy = np.zeros_like(X1, dtype=complex)
        for (k1, k2), c in zip(ks, cs):
            phase = c * np.exp(1j * np.pi * (k1 * X1 + k2 * X2)) / np.hypot(k1, k2)
            vx += k2 * phase
            vy += -k1 * phase
        return vx.real, vy.real
    return TorusTransform(basis, n_grid).velocity(u.coefficients)


def grid_to_field(basis: Basis, values, n_grid: int | None = None) -> SpectralField:
    """Inverse of :func:`grid_evaluate` for the resolved modes."""
    if basis.kind == SINE:
        values = np.asarray(values, dtype=float)
        n = len(values)
        coef = scipy.fft.dst(values, type=1) / (n + 1) * np.sqrt(np.pi / 2)
        return SpectralField(basis, coef[: basis.K])
    vx, vy = values
    tr = TorusTransform(basis, vx.shape[0])
    return SpectralField(basis, tr.project(vx, vy))


def divergence(vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
    """Spectral divergence of a periodic vector field sampled on the torus grid."""
    n = vx.shape[0]
    k = np.fft.fftfreq(n, 1.0 / n)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    if n % 2 == 0:
        # the Nyquist row/column has no well-defined derivative
        k1[n // 2, :] = 0.0
        k2[:, n // 2] = 0.0
    spec = 1j * np.pi * (k1 * np.fft.fft2(vx) + k2 * np.fft.fft2(vy))
    return np.fft.ifft2(spec).real
