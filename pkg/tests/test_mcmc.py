import numpy as np
import pytest

from fsmcmc.diagnostics import iact, acf
from fsmcmc.heat import HeatModel
from fsmcmc.mcmc import (FLAG_FORWARD_FAILURE, FLAG_NAN, AdaptationSchedule, ChainTask, Potential,
                         QuadraticPotential, Recorder, ZeroPotential, accept_probability, initial_state,
                         mh_step, run_chain, run_ensemble, substream)
from fsmcmc.proposals import build_B_scalar
from fsmcmc.spectral import SpectralField, sine_prior, torus_prior, unwhiten


class Exploding:
    n_evals = 0

    def __call__(self, x):
        self.n_evals += 1
        if self.n_evals > 1:
            raise FloatingPointError("boom")
        return 0.0


class NaNPotential:
    def __init__(self):
        self.n_evals = 0

    def __call__(self, x):
        self.n_evals += 1
        return 0.0 if self.n_evals == 1 else float("nan")


def test_substreams_are_reproducible_and_distinct():
    a = substream(5, "chain-0").standard_normal(4)
    np.testing.assert_array_equal(a, substream(5, "chain-0").standard_normal(4))
    assert not np.allclose(a, substream(5, "chain-1").standard_normal(4))
    assert not np.allclose(a, substream(6, "chain-0").standard_normal(4))


@pytest.mark.parametrize("cur,new,expect", [(1.0, 0.5, 1.0), (0.0, 2.0, np.exp(-2.0)), (0.0, np.nan, 0.0),
                                            (0.0, np.inf, 0.0)])
def test_accept_probability(cur, new, expect):
    assert accept_probability(cur, new) == pytest.approx(expect)


def test_nan_potential_rejects_and_flags():
    p = NaNPotential()
    s = initial_state(np.zeros(3), p, np.random.default_rng(0))
    t = mh_step(s, build_B_scalar(0.5, 3), p)
    assert not t.accepted and t.flag == FLAG_NAN and t.alpha == 0.0
    np.testing.assert_array_equal(t.x, s.x)


def test_forward_failure_rejects_and_continues():
    rec = run_chain(np.zeros(2), build_B_scalar(0.5, 2), Exploding(), 5, np.random.default_rng(0))
    assert not rec.accepted.any()
    assert np.all(rec.flags == FLAG_FORWARD_FAILURE)


def test_zero_potential_accepts_everything():
    rec = run_chain(np.zeros(4), build_B_scalar(0.3, 4), ZeroPotential(), 200, np.random.default_rng(1))
    assert rec.accepted.all()
    assert rec.header["n_potential_evals"] == 201


def test_eval_count_is_per_chain():
    p = ZeroPotential()
    run_chain(np.zeros(2), build_B_scalar(0.3, 2), p, 10, np.random.default_rng(0))
    rec = run_chain(np.zeros(2), build_B_scalar(0.3, 2), p, 10, np.random.default_rng(0))
    assert rec.header["n_potential_evals"] == 11


def test_gaussian_posterior_moments():
    # prior N(0, 1), likelihood N(y, g^2) per coordinate: posterior N(y/(1+g^2), g^2/(1+g^2))
    y = np.array([1.0, -2.0, 0.5])
    g = 0.7
    rec = run_chain(np.zeros(3), build_B_scalar(0.5, 3), QuadraticPotential(y, g), 60_000,
                    np.random.default_rng(2), burn_in=1000)
    x = rec.production_values()
    mean = y / (1 + g ** 2)
    var = g ** 2 / (1 + g ** 2)
    for j in range(3):
        theta = iact(acf(x[:, j]))
        se = np.sqrt(var * theta / len(x))
        assert abs(x[:, j].mean() - mean[j]) < 4 * se
    np.testing.assert_allclose(x.var(axis=0), var, rtol=0.1)


def test_adaptation_reaches_target_then_freezes():
    sched = AdaptationSchedule(target=0.3, n_steps=3000)
    B = build_B_scalar(0.9, 20)
    rec = run_chain(np.zeros(20), B, QuadraticPotential(np.ones(20), 0.3), 8000, np.random.default_rng(3),
                    schedule=sched)
    assert np.all(rec.beta[3000:] == rec.beta[-1])
    assert rec.production_start == 3000
    assert rec.acceptance_rate == pytest.approx(0.3, abs=0.06)
    assert rec.header["beta_final"] == rec.beta[-1] < 0.9


def test_adaptation_respects_bounds():
    sched = AdaptationSchedule(n_steps=500, beta_min=0.2, beta_max=0.4)
    rec = run_chain(np.zeros(5), build_B_scalar(0.3, 5), QuadraticPotential(np.zeros(5), 1e-3), 600,
                    np.random.default_rng(0), schedule=sched)
    assert rec.beta.min() >= 0.2 and rec.beta.max() <= 0.4


@pytest.mark.parametrize("kw", [dict(target=1.0), dict(beta_min=0.5, beta_max=0.4), dict(n_steps=-1)])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        AdaptationSchedule(**kw)


class TestRecorder:
    def test_sine_unwhitens(self):
        prior = sine_prior(6)
        rec = Recorder(prior, [2, 5])
        x = np.random.default_rng(0).standard_normal(6)
        u = unwhiten(SpectralField(prior.basis, x), prior).coefficients
        np.testing.assert_allclose(rec(x), u[[1, 4]])
        assert rec.labels == ["k=2", "k=5"]

    def test_torus_unwhitens(self):
        prior = torus_prior(3)
        rec = Recorder(prior, [(1, 2)])
        x = np.random.default_rng(1).standard_normal(prior.basis.dim)
        u = prior.unwhiten_real(x)[prior.basis.index_of((1, 2))]
        np.testing.assert_allclose(rec(x), [u.real, u.imag])
        assert rec.labels == ["(1,2).re", "(1,2).im"]

    def test_all_whitened(self):
        prior = sine_prior(3)
        rec = Recorder(prior)
        assert rec.n_columns == 3 and rec(np.arange(3.0)).tolist() == [0, 1, 2]


def test_chain_is_deterministic():
    m = HeatModel(K=16)
    y = m.synthesize_data(SpectralField.zeros(m.basis), np.random.default_rng(0))
    pot = Potential(m, y, m.gamma, m.prior)
    a = run_chain(np.zeros(16), build_B_scalar(0.2, 16), pot, 300, np.random.default_rng(9))
    b = run_chain(np.zeros(16), build_B_scalar(0.2, 16), pot, 300, np.random.default_rng(9))
    np.testing.assert_array_equal(a.values, b.values)


def test_potential_shape_check():
    m = HeatModel(K=8)
    with pytest.raises(ValueError):
        Potential(m, np.zeros(7), 1.0, m.prior)


def test_ensemble_parallel_matches_serial():
    prior = sine_prior(4)
    tasks = [ChainTask(None, build_B_scalar(0.4, 4), QuadraticPotential(np.ones(4), 1.0), 200, 11, f"chain-{i}",
                       Recorder(prior)) for i in range(3)]
    serial = run_ensemble(tasks, 1)
    parallel = run_ensemble(tasks, 2)
    for s, p in zip(serial, parallel):
        np.testing.assert_array_equal(s.values, p.values)
    assert not np.array_equal(serial[0].values, serial[1].values)


def test_ensemble_isolates_failures():
    prior = sine_prior(2)
    good = ChainTask(None, build_B_scalar(0.4, 2), ZeroPotential(), 10, 0, "chain-0", Recorder(prior))
    bad = ChainTask(None, build_B_scalar(0.4, 2), ZeroPotential(), 0, 0, "chain-1", Recorder(prior))
    out = run_ensemble([good, bad])
    assert len(out[0]) == 10 and isinstance(out[1], ValueError)
