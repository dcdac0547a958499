"""Autocorrelation, integrated autocorrelation, ESS and PSRF."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft


class DiagnosticsWarning(UserWarning):
    pass


def _check_trace(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("a trace needs at least two values")
    if not np.all(np.isfinite(x)):
        raise ValueError("trace contains non-finite values")
    return x


def acf(x, max_lag: int | None = None, method: str = "fft") -> np.ndarray:
    """Normalised autocorrelation ``rho_0..rho_max_lag`` of a trace.

    Uses the biased autocovariance ``(1/N) sum (x_m - xbar)(x_{m+n} - xbar)``.
    A constant trace has no defined autocorrelation; NaNs are returned with a
    warning.
    """
    x = _check_trace(x)
    n = len(x)
    max_lag = n - 1 if max_lag is None else int(max_lag)
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n - 1}]")
    d = x - x.mean()
    c0 = d @ d
    if c0 == 0:
        warnings.warn("constant trace: autocorrelation undefined", DiagnosticsWarning, stacklevel=2)
        return np.full(max_lag + 1, np.nan)
    if method == "direct":
        cov = np.array([d[: n - k] @ d[k:] for k in range(max_lag + 1)])
    else:
        size = scipy.fft.next_fast_len(2 * n - 1, real=True)
        f = scipy.fft.rfft(d, size)
        cov = scipy.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    return cov / c0


def iact(rho: np.ndarray) -> float:
    """Integrated autocorrelation ``theta = sum_{n>=1} rho_n``.

    The sum is cut with Geyer's initial positive sequence: pair sums
    ``rho_{2m} + rho_{2m+1}`` are accumulated until the first non-positive one.
    If the ACF is still appreciable at the last supplied lag the estimate is
    a lower bound and a warning is issued.
    """
    rho = np.asarray(rho, dtype=float)
    if len(rho) < 2 or np.isnan(rho[0]):
        return float("nan")
    npair = (len(rho)) // 2
    pairs = rho[: 2 * npair].reshape(npair, 2).sum(axis=1)
    nonpos = np.flatnonzero(pairs <= 0)
    if len(nonpos):
        m = nonpos[0]
    else:
        m = npair
    if not len(nonpos) and pairs[-1] > 1e-3 * pairs[0]:
        warnings.warn("autocorrelation did not decay within the available lags; chain unconverged",
                      DiagnosticsWarning, stacklevel=2)
    theta = pairs[:m].sum() - 1.0
    return float(max(theta, -0.5))


def ess(n: int, theta: float) -> float:
    """Effective sample size ``N / (1 + 2 theta)``."""
    if theta < 0:
        raise ValueError("theta must be non-negative for the ESS formula")
    return n / (1.0 + 2.0 * theta)


def psrf(chains, corrected: bool = True) -> float:
    """Potential scale reduction factor of ``m`` equal-length chains.

    ``V = (n - 1)/n W + (m + 1)/m B/n`` pools the mean within-chain variance
    ``W`` and ``B = n var(chain means)``. The uncorrected factor is
    ``sqrt(V / W)``. With ``corrected=True`` it is multiplied under the root
    by ``(d + 3)/(d + 1)``, where ``d = 2 V^2 / var(V)`` are the estimated
    degrees of freedom of ``V`` (Brooks and Gelman's sampling-variability
    correction).
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("PSRF needs at least two chains of equal length")
    m, n = x.shape
    if n < 2:
        raise ValueError("chains need at least two samples")
    means = x.mean(axis=1)
    s2 = x.var(axis=1, ddof=1)
    W = s2.mean()
    B = n * means.var(ddof=1)
    if W == 0:
        return float("nan")
    V = (n - 1) / n * W + (m + 1) / m * B / n
    R = V / W
    if corrected:
        cov = lambda a, b: np.cov(a, b, ddof=1)[0, 1]  # noqa: E731
        var_V = (((n - 1) / n) ** 2 / m * s2.var(ddof=1)
                 + ((m + 1) / (m * n)) ** 2 * 2.0 / (m - 1) * B ** 2
                 + 2.0 * (m + 1) * (n - 1) / (m * n ** 2) * n / m
                 * (cov(s2, means ** 2) - 2.0 * means.mean() * cov(s2, means)))
        if var_V > 0:
            d = 2.0 * V ** 2 / var_V
            R *= (d + 3.0) / (d + 1.0)
    return float(np.sqrt(R))


@dataclass
class TraceSummary:
    label: str
    n: int
    mean: float
    var: float
    theta: float
    ess: float
    stderr: float
    var_stderr: float


def summarize(x, label: str = "", max_lag: int | None = None) -> TraceSummary:
    """Mean, variance, IACT, ESS and standard errors of one trace.

    The standard error of the variance uses the Gaussian approximation
    ``var * sqrt(2 / ESS)``.
    """
    x = _check_trace(x)
    n = len(x)
    rho = acf(x, min(n - 1, max_lag if max_lag is not None else n - 1))
    theta = iact(rho)
    theta_eff = max(theta, 0.0) if np.isfinite(theta) else np.inf
    e = ess(n, theta_eff) if np.isfinite(theta_eff) else 0.0
    var = float(x.var(ddof=1))
    se = np.sqrt(var / e) if e > 0 else np.inf
    return TraceSummary(label, n, float(x.mean()), var, theta, e, float(se),
                        float(var * np.sqrt(2.0 / e)) if e > 0 else np.inf)


def relative_error_curve(samples: np.ndarray, reference: np.ndarray, statistic: str = "mean",
                         points: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Relative L2 error of running mean or variance against a reference.

    ``samples`` has shape ``(N, d)``; returns ``(counts, errors)``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    ref = np.asarray(reference, dtype=float)
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ValueError("reference has zero norm")
    n = len(x)
    counts = np.arange(1, n + 1) if points is None else np.asarray(points, dtype=np.int64)
    s1 = np.cumsum(x, axis=0)
    mean = s1 / np.arange(1, n + 1)[:, None]
    if statistic == "mean":
        est = mean[counts - 1]
    elif statistic == "var":
        s2 = np.cumsum(x ** 2, axis=0)
        k = np.arange(1, n + 1)[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            var = (s2 - k * mean ** 2) / np.maximum(k - 1, 1)
        est = var[counts - 1]
    else:
        raise ValueError("statistic must be 'mean' or 'var'")
    return counts, np.linalg.norm(est - ref, axis=1) / norm


def ar1_reference_acf(beta: float, n_lags: int, mean_alpha: float = 1.0) -> np.ndarray:
    """``exp(-n beta^2 E[alpha] / 2)``: the acceptance-lagged proposal-chain ACF."""
    n = np.arange(n_lags + 1)
    return np.exp(-n * beta ** 2 * mean_alpha / 2.0)
