import numpy as np
import pytest
from hypothesis import given, strategies as st

from cardionmf.multilayer import (
    ChemInitConfig,
    boltzmann_escape_probability,
    chem_init,
    energy_barrier,
    escape_experiment,
    multilayer_factorize,
    survival_probability,
)
from cardionmf.nmf import AlphaNmfConfig, factorize
from cardionmf.rng import make_rng

from helpers import multibasin_matrix


class TestChemInit:
    def test_bf_zero_is_pure_random(self):
        prev = np.abs(make_rng(1).random((4, 3))) + 0.1
        out = chem_init(prev, 2, 0.0, seed=7)
        expected = 1.0 - make_rng(7).random((3, 2))
        assert np.array_equal(out, expected)

    def test_bf_one_is_constant_mean(self):
        prev = np.array([[1.0, 3.0], [2.0, 2.0]])
        out = chem_init(prev, 3, 1.0, seed=0)
        np.testing.assert_allclose(out, np.full((2, 3), 2.0))

    def test_convex_blend(self):
        prev = np.array([[4.0]])
        out = chem_init(prev, 2, 0.5, seed=5)
        rand = 1.0 - make_rng(5).random((1, 2))
        np.testing.assert_allclose(out, 0.5 * rand + 0.5 * 4.0)

    def test_nonnegative(self):
        prev = np.abs(make_rng(2).random((5, 4)))
        for bf in (0.0, 0.3, 1.0):
            assert (chem_init(prev, 3, bf, seed=1) >= 0).all()

    def test_rejects_bad_bf(self):
        with pytest.raises(ValueError):
            chem_init(np.ones((2, 2)), 2, 1.5, seed=0)


class TestMultilayerFactorize:
    def test_single_layer_degenerates_to_core(self):
        rng = make_rng(3)
        Y = rng.random((6, 12))
        cfg = AlphaNmfConfig(alpha=1.0, rank=3, max_iter=60, seed=9)
        stack = multilayer_factorize(Y, [3], cfg)
        core = factorize(Y, cfg)
        assert np.array_equal(stack.layer_A[0], core.A)
        assert np.array_equal(stack.final_X, core.X)
        assert stack.per_layer_traces[0] == core.cost_trace

    def test_deterministic(self):
        rng = make_rng(4)
        Y = rng.random((8, 16))
        cfg = AlphaNmfConfig(alpha=0.5, rank=4, max_iter=40, seed=11)
        chem = ChemInitConfig(bounding_factor=0.4)
        s1 = multilayer_factorize(Y, [4, 2], cfg, chem)
        s2 = multilayer_factorize(Y, [4, 2], cfg, chem)
        for a, b in zip(s1.layer_A, s2.layer_A):
            assert np.array_equal(a, b)
        assert np.array_equal(s1.final_X, s2.final_X)

    def test_bf_zero_matches_plain_path(self):
        rng = make_rng(5)
        Y = rng.random((8, 16))
        cfg = AlphaNmfConfig(alpha=1.0, rank=4, max_iter=40, seed=13)
        with_chem = multilayer_factorize(Y, [4, 2], cfg, ChemInitConfig(bounding_factor=0.0))
        plain = multilayer_factorize(Y, [4, 2], cfg, None)
        for a, b in zip(with_chem.layer_A, plain.layer_A):
            assert np.array_equal(a, b)
        assert np.array_equal(with_chem.final_X, plain.final_X)

    def test_layer_shapes(self):
        rng = make_rng(6)
        Y = rng.random((10, 20))
        cfg = AlphaNmfConfig(alpha=1.0, rank=6, max_iter=20, seed=1)
        stack = multilayer_factorize(Y, [6, 4, 2], cfg, ChemInitConfig())
        assert [a.shape for a in stack.layer_A] == [(10, 6), (6, 4), (4, 2)]
        assert stack.final_X.shape == (2, 20)
        assert stack.total_basis().shape == (10, 2)
        assert stack.reconstruction().shape == Y.shape

    def test_rank_inflation_rejected(self):
        with pytest.raises(ValueError, match="non-increasing"):
            multilayer_factorize(
                np.ones((6, 8)), [2, 4], AlphaNmfConfig(alpha=1.0, rank=2, seed=0)
            )

    def test_empty_ranks_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            multilayer_factorize(
                np.ones((6, 8)), [], AlphaNmfConfig(alpha=1.0, rank=2, seed=0)
            )

    def test_first_rank_bounded_by_input(self):
        with pytest.raises(ValueError, match="exceeds"):
            multilayer_factorize(
                np.ones((3, 8)), [5], AlphaNmfConfig(alpha=1.0, rank=5, seed=0)
            )


class TestEnergyBarrier:
    def test_examples(self):
        assert energy_barrier([5.0, 7.0, 3.0], 1.0) == pytest.approx(6.0)
        assert energy_barrier([5.0, 4.0, 3.0], 3.0) == pytest.approx(2.0)
        assert energy_barrier([2.0], 2.0) == pytest.approx(0.0)

    def test_errors(self):
        with pytest.raises(ValueError, match="non-empty"):
            energy_barrier([], 0.0)
        with pytest.raises(ValueError, match="exceeds"):
            energy_barrier([2.0, 3.0], 2.5)


class TestBoltzmannEscape:
    def test_examples(self):
        assert boltzmann_escape_probability(0.0, 1.0, 1.0) == pytest.approx(1.0)
        assert boltzmann_escape_probability(1.0, np.log(2.0), 1.0) == pytest.approx(0.5)

    def test_monotone_decay(self):
        values = [boltzmann_escape_probability(b, 1.0, 1.0) for b in (0.0, 1.0, 5.0, 50.0)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-20

    def test_preconditions(self):
        with pytest.raises(ValueError):
            boltzmann_escape_probability(-1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            boltzmann_escape_probability(1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            boltzmann_escape_probability(1.0, 1.0, 0.5)


class TestSurvivalProbability:
    def test_examples(self):
        assert survival_probability([0.5, 0.5]) == pytest.approx([0.5, 0.25])
        assert survival_probability([0.1, 0.2, 0.3]) == pytest.approx([0.9, 0.72, 0.504])

    def test_certain_escape_zeroes_tail(self):
        out = survival_probability([0.2, 1.0, 0.3])
        assert out[1] == 0.0 and out[2] == 0.0

    def test_empty(self):
        assert survival_probability([]) == []

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            survival_probability([0.5, 1.2])

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=12))
    def test_product_law_and_monotone(self, probs):
        curve = survival_probability(probs)
        acc = 1.0
        for p, s in zip(probs, curve):
            acc *= 1.0 - p
            assert s == pytest.approx(acc, abs=1e-12)
        assert all(a >= b for a, b in zip(curve, curve[1:]))


class TestEscapeExperiment:
    def test_easy_instance_always_escapes(self):
        rng = make_rng(21)
        Y = rng.random((3, 3)) + 0.5
        cfg = AlphaNmfConfig(alpha=1.0, rank=3, max_iter=300, rel_tol=1e-10, seed=5)
        report = escape_experiment(Y, [3], cfg, None, trials=8)
        assert report.per_layer_escape_estimates == [1.0]
        assert report.survival_curve == [0.0]

    def test_deterministic(self):
        Y = multibasin_matrix()
        cfg = AlphaNmfConfig(alpha=1.0, rank=2, max_iter=100, rel_tol=1e-8, seed=3)
        r1 = escape_experiment(Y, [2, 2], cfg, ChemInitConfig(), trials=5)
        r2 = escape_experiment(Y, [2, 2], cfg, ChemInitConfig(), trials=5)
        assert r1.to_dict() == r2.to_dict()

    def test_survival_matches_product_law(self):
        Y = multibasin_matrix()
        cfg = AlphaNmfConfig(alpha=1.0, rank=2, max_iter=100, rel_tol=1e-8, seed=4)
        report = escape_experiment(Y, [2, 2, 2], cfg, ChemInitConfig(), trials=6)
        acc = 1.0
        for p, s in zip(report.per_layer_escape_estimates, report.survival_curve):
            acc *= 1.0 - p
            assert s == pytest.approx(acc, abs=1e-12)

    def test_barriers_nonnegative(self):
        Y = multibasin_matrix()
        cfg = AlphaNmfConfig(alpha=1.0, rank=2, max_iter=80, rel_tol=1e-8, seed=6)
        report = escape_experiment(Y, [2, 2], cfg, None, trials=4)
        assert all(b >= 0 for b in report.barrier_estimates)

    def test_trials_validated(self):
        with pytest.raises(ValueError):
            escape_experiment(
                np.ones((2, 2)), [2], AlphaNmfConfig(alpha=1.0, rank=2, seed=0), None, 0
            )
