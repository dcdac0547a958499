import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsmcmc.proposals import (NumericalCurvatureError, WeightOperator, build_B_hessian, build_B_scalar,
                              build_B_truncated, propose, search_direction_covariance)
from fsmcmc.spectral import SINE, TORUS, Basis


def random_hessian_operator(rng, dim=12, r=4, beta=0.3):
    Q = np.linalg.qr(rng.standard_normal((dim, r)))[0]
    lam = np.sort(rng.exponential(5.0, r))[::-1]
    return build_B_hessian(beta, 0.7, 1.3, lam, Q.T)


def dense(B):
    return np.column_stack([B.apply(e) for e in np.eye(B.dim)])


class TestScalar:
    def test_independence_sampler(self):
        B = build_B_scalar(1.0, 5)
        assert B.complement_weight == 0.0
        np.testing.assert_array_equal(B.apply(np.ones(5)), 0.0)

    @pytest.mark.parametrize("beta,bc", [(0.024, 0.999424), (0.6, 0.64)])
    def test_complement_weight(self, beta, bc):
        assert build_B_scalar(beta, 3).complement_weight == pytest.approx(bc, abs=1e-15)

    @pytest.mark.parametrize("beta", [0.0, -0.1, 1.01, np.nan])
    def test_bad_beta(self, beta):
        with pytest.raises(ValueError):
            build_B_scalar(beta, 3)


class TestTruncated:
    def test_sine_cutoff(self):
        b = Basis(SINE, 10)
        B = build_B_truncated(0.2, 5, b)
        w = np.diag(dense(B))
        np.testing.assert_allclose(w[:4], 0.96)
        np.testing.assert_array_equal(w[4:], 0.0)

    def test_kc_one_keeps_nothing(self):
        B = build_B_truncated(0.2, 1, Basis(SINE, 6))
        assert B.rank == 0 and B.complement_weight == 0.0

    def test_torus_radial_cutoff(self):
        b = Basis(TORUS, 6)
        B = build_B_truncated(0.1, 3, b)
        inside = b.real_magnitudes() < 3
        w = np.diag(dense(B))
        np.testing.assert_allclose(w[inside], 0.99)
        np.testing.assert_array_equal(w[~inside], 0.0)
        # (2, 2) has |k| = 2.83 < 3 even though |k|_inf = 2
        assert inside[b.index_of((2, 2))]

    @pytest.mark.parametrize("k_c", [0, 0.5, 12])
    def test_out_of_range(self, k_c):
        with pytest.raises(ValueError):
            build_B_truncated(0.1, k_c, Basis(SINE, 10))


class TestHessian:
    def test_profile(self):
        B = build_B_hessian(0.1, 0.5, 2.0, [8.0, 2.0], np.eye(4)[:2])
        np.testing.assert_allclose(B.weights, 0.99 * np.array([8 / 10, 2 / 4]))
        assert B.complement_weight == 0.0

    def test_negative_eigenvalue(self):
        with pytest.raises(NumericalCurvatureError):
            build_B_hessian(0.1, 1.0, 1.0, [1.0, -1e-3], np.eye(3)[:2])

    def test_bad_zeta(self):
        with pytest.raises(ValueError):
            build_B_hessian(0.1, 0.0, 1.0, [1.0], np.eye(3)[:1])

    def test_non_orthonormal_vectors_rejected(self):
        with pytest.raises(ValueError):
            build_B_hessian(0.1, 1.0, 1.0, [1.0, 1.0], np.array([[1.0, 0, 0], [1.0, 1.0, 0]]))

    def test_huge_eigenvalues_clamped_below_one(self):
        B = build_B_hessian(1e-9, 1.0, 1.0, [1e30], np.eye(2)[:1])
        assert B.weights[0] < 1.0
        assert np.all(np.isfinite(B.apply_sqrt_complement(np.ones(2))))


class TestOperator:
    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_self_adjoint_with_spectrum_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        B = random_hessian_operator(rng)
        u, w = rng.standard_normal((2, B.dim))
        assert abs(B.apply(u) @ w - u @ B.apply(w)) <= 1e-10 * np.linalg.norm(u) * np.linalg.norm(w)
        ev = np.linalg.eigvalsh(0.5 * (dense(B) + dense(B).T))
        assert ev.min() >= -1e-12 and ev.max() <= 1 + 1e-12

    def test_orthonormal_directions(self):
        B = random_hessian_operator(np.random.default_rng(0))
        V = B.direction_matrix()
        np.testing.assert_allclose(V @ V.T, np.eye(B.rank), atol=1e-10)

    def test_square_roots(self):
        B = random_hessian_operator(np.random.default_rng(1))
        x = np.random.default_rng(2).standard_normal(B.dim)
        np.testing.assert_allclose(B.apply_sqrt(B.apply_sqrt(x)), B.apply(x), atol=1e-12)
        np.testing.assert_allclose(B.apply_sqrt_complement(B.apply_sqrt_complement(x)), x - B.apply(x),
                                   atol=1e-12)

    def test_with_beta_rescales(self):
        B = random_hessian_operator(np.random.default_rng(3), beta=0.5)
        B2 = B.with_beta(0.1)
        np.testing.assert_allclose(B2.weights / B.weights, 0.99 / 0.75)

    def test_search_direction_covariance(self):
        B = build_B_hessian(0.2, 1.0, 1.0, [3.0], np.eye(2)[:1])
        d, dc = search_direction_covariance(B)
        np.testing.assert_allclose(d, 1 - 0.96 * 0.75)
        assert dc == 1.0


class TestPropose:
    def test_beta_one_ignores_state(self):
        B = build_B_scalar(1.0, 4)
        a = propose(np.full(4, 100.0), B, np.random.default_rng(7))
        b = propose(np.zeros(4), B, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_deterministic_given_seed(self):
        B = random_hessian_operator(np.random.default_rng(0))
        x = np.ones(B.dim)
        np.testing.assert_array_equal(propose(x, B, np.random.default_rng(1)),
                                      propose(x, B, np.random.default_rng(1)))

    @pytest.mark.parametrize("make", [
        lambda: build_B_scalar(0.3, 6),
        lambda: build_B_truncated(0.3, 3, Basis(SINE, 6)),
        lambda: random_hessian_operator(np.random.default_rng(4), dim=6, r=2),
    ])
    def test_proposal_covariance(self, make):
        # x' = sqrt(B) x + sqrt(I-B) W has Cov(x', x) = sqrt(B) and Var(x') = I under x ~ N(0, I)
        B = make()
        rng = np.random.default_rng(11)
        N = 40_000
        X = rng.standard_normal((N, B.dim))
        P = np.array([propose(x, B, rng) for x in X])
        cov = P.T @ P / N
        cross = P.T @ X / N
        tol = 5 / np.sqrt(N)
        np.testing.assert_allclose(cov, np.eye(B.dim), atol=tol)
        S = np.column_stack([B.apply_sqrt(e) for e in np.eye(B.dim)])
        np.testing.assert_allclose(cross, S, atol=tol)

    def test_describe(self):
        d = build_B_truncated(0.3, 3, Basis(SINE, 6)).describe()
        assert d["variant"] == "C" and d["k_c"] == 3.0 and d["rank"] == 2


def test_weight_operator_validation():
    with pytest.raises(ValueError):
        WeightOperator(3, 0.5, np.array([1.5]), 0.0, axes=np.array([0]))
    with pytest.raises(ValueError):
        WeightOperator(3, 0.5, np.ones(2), 0.0, axes=np.array([1, 1]))
