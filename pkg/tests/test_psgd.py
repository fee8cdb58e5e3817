import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selector_lab.core import (
    ConstantClassifier,
    Dataset,
    ErrorDistribution,
    ErrorSampler,
    GaussianSampler,
    Rng,
    basis,
    make_planted,
    random_unit,
)
from selector_lab.psgd import (
    PsgdConfig,
    best_iterate,
    mean_projected_gradient,
    projected_gradient,
    psgd,
    stationarity_threshold,
    surrogate_loss,
)

ALWAYS_WRONG = ErrorSampler(GaussianSampler(3, label=1), ConstantClassifier(0))


def test_surrogate_loss_frozen():
    x = np.array([[1.0, 0.0], [-2.0, 0.0], [3.0, 1.0]])
    e = np.array([1, 1, 0])
    assert surrogate_loss((x, e), basis(2)) == pytest.approx(1.0 / 3.0)


def test_projected_gradient_single_example():
    g = projected_gradient(np.array([2.0, 3.0]), 1, basis(2))
    np.testing.assert_allclose(g, [0.0, 3.0])
    np.testing.assert_allclose(projected_gradient(np.array([-2.0, 3.0]), 1, basis(2)), [0.0, 0.0])
    np.testing.assert_allclose(projected_gradient(np.array([2.0, 3.0]), 0, basis(2)), [0.0, 0.0])


@settings(max_examples=40)
@given(st.integers(2, 6), st.integers(0, 10**6))
def test_mean_gradient_matches_rowwise(d, seed):
    rng = Rng(seed)
    x = rng.child("x").generator().standard_normal((30, d))
    e = rng.child("e").generator().integers(0, 2, 30)
    w = random_unit(rng.child("w"), d)
    expect = projected_gradient(x, e, w).mean(axis=0)
    got = mean_projected_gradient(x, e, w)
    np.testing.assert_allclose(got, expect, atol=1e-12)
    assert abs(got @ w) < 1e-12


def test_stationarity_threshold_value():
    assert stationarity_threshold(0.01) == pytest.approx(0.4 * 0.01 * math.sqrt(math.log(100)))


class TestConfig:
    def test_default_step(self):
        cfg = PsgdConfig(100, 10, basis(4))
        assert cfg.beta == pytest.approx(math.sqrt(1 / 400))

    def test_custom_step_needs_override(self):
        with pytest.raises(ValueError):
            PsgdConfig(100, 10, basis(4), beta=0.5)
        assert PsgdConfig(100, 10, basis(4), beta=0.5, override_beta=True).beta == 0.5

    @pytest.mark.parametrize("T, N", [(0, 5), (5, 0)])
    def test_positive_sizes(self, T, N):
        with pytest.raises(ValueError):
            PsgdConfig(T, N, basis(2))


class TestRun:
    def test_iterates_are_unit_and_counted(self):
        trace = psgd(ALWAYS_WRONG, PsgdConfig(50, 20, basis(3)), Rng(1))
        assert trace.iterates.shape == (50, 3)
        np.testing.assert_allclose(np.linalg.norm(trace.iterates, axis=1), 1.0)
        assert trace.examples_used == 1000
        assert trace.replacement_from is None

    def test_deterministic(self):
        a = psgd(ALWAYS_WRONG, PsgdConfig(30, 10, basis(3)), Rng(5))
        b = psgd(ALWAYS_WRONG, PsgdConfig(30, 10, basis(3)), Rng(5))
        np.testing.assert_array_equal(a.iterates, b.iterates)

    def test_no_errors_means_no_motion(self):
        never_wrong = ErrorSampler(GaussianSampler(3, label=0), ConstantClassifier(0))
        trace = psgd(never_wrong, PsgdConfig(10, 10, basis(3)), Rng(0))
        np.testing.assert_array_equal(trace.iterates, np.tile(basis(3), (10, 1)))

    def test_finite_pool_falls_back_to_replacement(self):
        data = Dataset(Rng(0).generator().standard_normal((25, 2)), np.ones(25, dtype=int))
        pool = ErrorDistribution(data, ConstantClassifier(0))
        trace = psgd(pool, PsgdConfig(4, 10, basis(2)), Rng(0))
        assert trace.replacement_from == 3

    def test_early_stop_on_small_gradient(self):
        never_wrong = ErrorSampler(GaussianSampler(2, label=0), ConstantClassifier(0))
        trace = psgd(never_wrong, PsgdConfig(10, 10, basis(2), stop_epsilon=0.1), Rng(0))
        assert trace.stopped_at == 1 and len(trace) == 1

    def test_moves_towards_planted_direction(self):
        model = make_planted(2, 0.0, 1.0, 3, v=np.array([0.0, 1.0]))
        trace = psgd(ErrorSampler(model, model.c_star), PsgdConfig(2000, 50, basis(2)), Rng(3))
        assert trace.iterates[-1] @ model.v > 0.99

    def test_trace_csv(self, tmp_path):
        trace = psgd(ALWAYS_WRONG, PsgdConfig(3, 4, basis(3)), Rng(0))
        trace.to_csv(tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "iter,grad_norm,batch_loss,w_1,w_2,w_3"
        assert len(lines) == 4


def test_best_iterate_prefers_earliest_tie():
    holdout = Dataset(np.array([[1.0, 0.0]]), [1])
    # (0, 1) keeps the boundary point (error 1); the other two exclude it and tie at 0
    W = np.array([[0.0, 1.0], [-1.0, 0.0], [-0.6, 0.8]])
    np.testing.assert_allclose(best_iterate(W, holdout, ConstantClassifier(0)), [-1.0, 0.0])


def test_best_iterate_rejects_empty():
    with pytest.raises(ValueError):
        best_iterate(np.empty((0, 2)), Dataset(np.eye(2), [0, 1]), ConstantClassifier(0))
