import numpy as np
import pytest

from fsmcmc.heat import HeatModel
from fsmcmc.spectral import Basis, SINE, SpectralField, BasisMismatchError, whiten


def test_forward_is_diagonal_decay():
    m = HeatModel(K=4)
    u = SpectralField(m.basis, [1.0, 1.0, 1.0, 1.0])
    np.testing.assert_allclose(m.forward(u), np.exp(-np.array([1, 4, 9, 16.0])), rtol=1e-15)


def test_forward_rejects_other_basis():
    with pytest.raises(BasisMismatchError):
        HeatModel(K=4).forward(SpectralField.zeros(Basis(SINE, 5)))


def test_prior_spectrum():
    np.testing.assert_allclose(HeatModel(K=3).prior.eigenvalues, 1e4 / np.array([1, 4, 9.0]))


def test_tangent_adjoint_identity():
    m = HeatModel(K=16)
    lin = m.linearize()
    rng = np.random.default_rng(0)
    du, dy = rng.standard_normal((2, 16))
    assert lin.tangent(du) @ dy == pytest.approx(du @ lin.adjoint(dy), rel=1e-14)


def test_exact_posterior_matches_dense_bayes():
    # independent oracle: Gaussian conditioning with dense matrices
    m = HeatModel(K=6, gamma=0.5)
    rng = np.random.default_rng(1)
    y = rng.standard_normal(6)
    G = np.diag(m.forward_eigenvalues)
    C = np.diag(m.prior.eigenvalues)
    S = G @ C @ G.T + 0.25 * np.eye(6)
    mean = C @ G.T @ np.linalg.solve(S, y)
    cov = C - C @ G.T @ np.linalg.solve(S, G @ C)
    pm, pv = m.exact_posterior(y)
    np.testing.assert_allclose(pm, mean, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(pv, np.diag(cov), rtol=1e-8)


def test_high_modes_keep_prior_variance():
    m = HeatModel(K=128)
    _, var = m.exact_posterior(np.zeros(128))
    np.testing.assert_allclose(var[10:], m.prior.eigenvalues[10:], rtol=1e-12)
    assert var[0] == pytest.approx(1 / (np.exp(-2.0) + 1e-4), rel=1e-12)


def test_whitened_curvature():
    m = HeatModel(K=5)
    np.testing.assert_allclose(m.whitened_curvature(), 1e4 / np.arange(1, 6) ** 2 * np.exp(-2 * np.arange(1, 6) ** 2))


def test_synthetic_noise_level():
    m = HeatModel(K=128, gamma=2.0)
    truth = SpectralField.zeros(m.basis)
    y = m.synthesize_data(truth, np.random.default_rng(3))
    assert y.std() == pytest.approx(2.0, rel=0.2)


@pytest.mark.parametrize("kw", [dict(K=0), dict(gamma=0.0), dict(prior_scale=-1.0), dict(time=0.0)])
def test_invalid(kw):
    with pytest.raises(ValueError):
        HeatModel(**kw)


def test_whitened_posterior_concentrates_on_low_modes():
    m = HeatModel(K=20)
    y = np.zeros(20)
    y[0] = 1.0
    mean, var = m.exact_posterior(y)
    z = whiten(SpectralField(m.basis, mean), m.prior).coefficients
    assert abs(z[0]) > 0 and np.all(z[8:] == 0)
