import numpy as np
import pytest

from cardionmf.nmf import (
    AlphaNmfConfig,
    alpha_divergence,
    factorize,
    initial_cost,
    normalize_factors,
    update_step,
)
from cardionmf.rng import make_rng


def divergence_oracle(Y, AX, alpha, eps=1e-12):
    """Independent elementwise evaluation of the divergence formula."""
    total = 0.0
    for i in range(Y.shape[0]):
        for t in range(Y.shape[1]):
            y = Y[i, t]
            z = max(AX[i, t], eps)
            if alpha == 1.0:
                total += (np.log(y / z) * y if y > 0 else 0.0) - y + AX[i, t]
            else:
                total += (
                    y**alpha * z ** (1.0 - alpha)
                    - alpha * y
                    + (alpha - 1.0) * AX[i, t]
                ) / (alpha * (alpha - 1.0))
    return total


class TestAlphaDivergence:
    def test_identity_is_zero(self):
        rng = make_rng(1)
        for alpha in (0.5, 1.0, 1.5, 2.0):
            A = rng.random((5, 3)) + 0.1
            X = rng.random((3, 7)) + 0.1
            Y = A @ X
            assert alpha_divergence(Y, A, X, alpha) == pytest.approx(0.0, abs=1e-9)

    def test_alpha2_hand_value(self):
        assert alpha_divergence([[1.0]], [[1.0]], [[2.0]], 2.0) == pytest.approx(0.25)

    def test_kl_hand_value(self):
        expected = 1.0 * np.log(0.5) - 1.0 + 2.0
        assert alpha_divergence([[1.0]], [[1.0]], [[2.0]], 1.0) == pytest.approx(
            expected, rel=1e-12
        )

    def test_matches_elementwise_oracle(self):
        rng = make_rng(2)
        for alpha in (0.5, 1.3, 2.0, 1.0):
            Y = rng.random((4, 6)) * 3
            A = rng.random((4, 2)) + 0.05
            X = rng.random((2, 6)) + 0.05
            got = alpha_divergence(Y, A, X, alpha)
            want = divergence_oracle(Y, A @ X, alpha)
            assert got == pytest.approx(want, rel=1e-10)

    def test_kl_continuity(self):
        rng = make_rng(3)
        Y = rng.random((5, 5)) + 0.1
        A = rng.random((5, 2)) + 0.1
        X = rng.random((2, 5)) + 0.1
        kl = alpha_divergence(Y, A, X, 1.0)
        for alpha in (1.0 - 1e-6, 1.0 + 1e-6):
            assert abs(alpha_divergence(Y, A, X, alpha) - kl) < 1e-4

    def test_zero_entries_are_safe(self):
        Y = np.array([[0.0, 1.0], [2.0, 0.0]])
        A = np.array([[1.0], [1.0]])
        X = np.array([[0.5, 0.5]])
        for alpha in (0.5, 1.0, 2.0):
            assert np.isfinite(alpha_divergence(Y, A, X, alpha))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            alpha_divergence(np.ones((2, 2)), np.ones((2, 1)), np.ones((2, 2)), 1.0)

    def test_rejects_nonfinite_and_negative(self):
        with pytest.raises(ValueError):
            alpha_divergence([[np.nan]], [[1.0]], [[1.0]], 1.0)
        with pytest.raises(ValueError):
            alpha_divergence([[-1.0]], [[1.0]], [[1.0]], 1.0)

    def test_rejects_bad_alpha(self):
        for alpha in (0.0, -0.5, 2.5):
            with pytest.raises(ValueError, match="alpha"):
                alpha_divergence([[1.0]], [[1.0]], [[1.0]], alpha)


class TestUpdateStep:
    def test_exact_fit_is_fixed_point(self):
        rng = make_rng(4)
        for alpha in (0.5, 1.0, 2.0):
            A = rng.random((4, 2)) + 0.05
            X = rng.random((2, 6)) + 0.05
            Y = A @ X
            A2, X2 = update_step(Y, A, X, alpha)
            np.testing.assert_allclose(A2, A, atol=1e-12)
            np.testing.assert_allclose(X2, X, atol=1e-12)

    def test_one_step_hand_example(self):
        A2, X2 = update_step([[2.0]], [[1.0]], [[1.0]], 1.0)
        assert X2[0, 0] == pytest.approx(2.0, rel=1e-12)

    def test_descent_property(self):
        rng = make_rng(5)
        for alpha in (0.5, 1.0, 1.5, 2.0):
            Y = rng.random((4, 6)) + 0.01
            A = rng.random((4, 2)) + 0.05
            X = rng.random((2, 6)) + 0.05
            before = alpha_divergence(Y, A, X, alpha)
            A2, X2 = update_step(Y, A, X, alpha)
            after = alpha_divergence(Y, A2, X2, alpha)
            assert after <= before * (1 + 1e-9)

    def test_nonnegativity_closure(self):
        rng = make_rng(6)
        Y = rng.random((6, 8))
        A = rng.random((6, 3)) + 0.01
        X = rng.random((3, 8)) + 0.01
        for _ in range(20):
            A, X = update_step(Y, A, X, 0.7)
        assert np.isfinite(A).all() and np.isfinite(X).all()
        assert (A >= 0).all() and (X >= 0).all()


class TestNormalizeFactors:
    def test_column_sum_example(self):
        A_n, X_n = normalize_factors([[2.0], [2.0]], [[3.0]])
        np.testing.assert_allclose(A_n, [[0.5], [0.5]])
        np.testing.assert_allclose(X_n, [[12.0]])

    def test_already_normalized_unchanged(self):
        A = np.array([[0.25, 0.5], [0.75, 0.5]])
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        A_n, X_n = normalize_factors(A, X)
        np.testing.assert_allclose(A_n, A)
        np.testing.assert_allclose(X_n, X)

    def test_product_preserved(self):
        rng = make_rng(7)
        for _ in range(20):
            A = rng.random((3, 2)) + 0.01
            X = rng.random((2, 5))
            A_n, X_n = normalize_factors(A, X)
            np.testing.assert_allclose(A_n @ X_n, A @ X, rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(A_n.sum(axis=0), 1.0, rtol=1e-12)

    def test_zero_column_rejected(self):
        with pytest.raises(ValueError, match="zero column"):
            normalize_factors([[0.0, 1.0], [0.0, 1.0]], np.ones((2, 3)))


class TestFactorize:
    def test_deterministic(self):
        rng = make_rng(8)
        Y = rng.random((6, 10))
        cfg = AlphaNmfConfig(alpha=1.0, rank=2, max_iter=50, seed=42)
        r1 = factorize(Y, cfg)
        r2 = factorize(Y, cfg)
        assert np.array_equal(r1.A, r2.A)
        assert np.array_equal(r1.X, r2.X)
        assert r1.cost_trace == r2.cost_trace

    def test_monotone_trace(self):
        rng = make_rng(9)
        for alpha in (0.5, 1.0, 1.5, 2.0):
            Y = rng.random((5, 12))
            cfg = AlphaNmfConfig(alpha=alpha, rank=3, max_iter=80, seed=1)
            trace = np.array(factorize(Y, cfg).cost_trace)
            assert np.all(trace[1:] <= trace[:-1] * (1 + 1e-9))

    def test_trace_length_and_flags(self):
        rng = make_rng(10)
        Y = rng.random((4, 8))
        result = factorize(Y, AlphaNmfConfig(alpha=1.0, rank=2, max_iter=500, seed=0))
        assert len(result.cost_trace) == result.iterations + 1
        assert result.converged
        capped = factorize(Y, AlphaNmfConfig(alpha=1.0, rank=2, max_iter=3, seed=0))
        assert capped.iterations == 3 and not capped.converged

    def test_rank_too_large_rejected(self):
        with pytest.raises(ValueError, match="rank"):
            factorize(np.ones((3, 4)), AlphaNmfConfig(alpha=1.0, rank=4, seed=0))

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            factorize(np.zeros((3, 4)), AlphaNmfConfig(alpha=1.0, rank=2, seed=0))

    def test_shapes_follow_rank(self):
        rng = make_rng(11)
        Y = rng.random((6, 9))
        result = factorize(Y, AlphaNmfConfig(alpha=0.5, rank=3, max_iter=20, seed=2))
        assert result.A.shape == (6, 3)
        assert result.X.shape == (3, 9)

    def test_initial_cost_matches_trace_head(self):
        rng = make_rng(12)
        Y = rng.random((5, 7))
        cfg = AlphaNmfConfig(alpha=1.0, rank=2, max_iter=5, seed=3)
        assert initial_cost(Y, cfg) == factorize(Y, cfg).cost_trace[0]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AlphaNmfConfig(alpha=2.5, rank=2)
        with pytest.raises(ValueError):
            AlphaNmfConfig(alpha=1.0, rank=0)
        with pytest.raises(ValueError):
            AlphaNmfConfig(alpha=1.0, rank=2, rel_tol=0.0)
        with pytest.raises(ValueError):
            AlphaNmfConfig(alpha=1.0, rank=2, seed=-1)
