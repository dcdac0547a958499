import numpy as np
import pytest

from fsmcmc.analytic1d import (POSTERIOR, PRIOR, QuadratureResolutionError, Scalar1DProblem, checked_lag1,
                               optimal_beta, riemann_lag1, simulate_1d, sweep_lag1, verify_against_simulation,
                               write_sweep_csv)


def test_posterior_moments():
    p = Scalar1DProblem(0.5)
    assert p.a == pytest.approx(0.8) and p.c == pytest.approx(0.2)


def test_posterior_proposal_potential_is_constant():
    p = Scalar1DProblem(0.3)
    z = np.linspace(-3, 3, 11)
    v = p.potential(z, POSTERIOR)
    np.testing.assert_allclose(v, v[0], atol=1e-12)


@pytest.mark.parametrize("beta", [0.05, 0.3, 0.9])
def test_posterior_kind_is_exact_ar1(beta):
    # always accepted, so the lag-1 correlation is the AR coefficient
    ea, l1 = riemann_lag1(beta, 0.1, POSTERIOR, n_cells=600)
    assert ea == pytest.approx(1.0, abs=1e-12)
    assert l1 == pytest.approx(np.sqrt(1 - beta ** 2), abs=1e-6)


def test_flat_likelihood_limit():
    ea, l1 = riemann_lag1(0.2, 1e4, PRIOR, n_cells=600)
    assert ea == pytest.approx(1.0, abs=1e-6)
    assert l1 == pytest.approx(np.sqrt(0.96), abs=1e-6)


def test_independence_sampler_against_closed_form():
    # beta = 1 draws z* ~ N(0, 1) independently. For fixed z, alpha = 1 on |z* - 1| < |z - 1|;
    # outside, exp(-phi(z*)) N(z*; 0, 1) = k N(z*; a, c), so the inner integral is closed form.
    from scipy import integrate, stats
    g = 0.7
    p = Scalar1DProblem(g)
    post = stats.norm(p.a, np.sqrt(p.c))
    k = np.exp(p.a ** 2 / (2 * p.c) - 1 / (2 * g ** 2)) * np.sqrt(p.c)

    def inner(z):
        d = abs(z - 1.0)
        inside = stats.norm.cdf(1 + d) - stats.norm.cdf(1 - d)
        outside = 1.0 - (post.cdf(1 + d) - post.cdf(1 - d))
        return inside + np.exp(p.phi(z)) * k * outside

    ref = integrate.quad(lambda z: inner(z) * post.pdf(z), -10, 10, points=[1.0], epsabs=1e-12)[0]
    assert riemann_lag1(1.0, g, PRIOR, n_cells=1500)[0] == pytest.approx(ref, abs=1e-5)


def test_refinement_check():
    e, l1, change = checked_lag1(0.3, 0.5, PRIOR, n_cells=400)
    assert change < 1e-3
    with pytest.raises(QuadratureResolutionError):
        checked_lag1(0.05, 0.01, PRIOR, n_cells=10, tol=1e-6)


def test_bad_inputs():
    with pytest.raises(ValueError):
        riemann_lag1(0.0, 1.0)
    with pytest.raises(ValueError):
        Scalar1DProblem(0.0)
    with pytest.raises(ValueError):
        riemann_lag1(0.5, 1.0, "nope", n_cells=20)


def test_flat_simulation_reproduces_proposal_chain():
    sim = simulate_1d(0.3, 0.1, 500, np.random.default_rng(0), flat=True)
    np.testing.assert_allclose(sim.z, sim.x, atol=1e-12)
    assert sim.accepted.all()


def test_simulation_agrees_with_quadrature():
    rep = verify_against_simulation(0.4, 0.5, np.random.default_rng(1), PRIOR, n_steps=60_000, n_cells=800)
    assert rep.passed(4.0)


def test_sweep_and_csv(tmp_path):
    rows = sweep_lag1([0.1, 0.5], [0.5], [PRIOR], n_cells=300)
    assert len(rows) == 2
    best = optimal_beta(rows)
    assert best.lag1 == min(r.lag1 for r in rows)
    write_sweep_csv(tmp_path / "s.csv", rows, {"n_cells": 300})
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# n_cells: 300" and lines[1].startswith("beta,gamma")
    assert len(lines) == 4
