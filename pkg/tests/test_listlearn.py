import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selector_lab.core import Dataset, Rng, classifier_from_dict
from selector_lab.experiments import make_sparse_planted
from selector_lab.listlearn import (
    SparseLinearClassifier,
    SparseListConfig,
    list_sample_size,
    list_size_bound,
    read_jsonl,
    signed_labels,
    sparse_list,
    sparse_list_arrays,
    write_jsonl,
)


class TestSampleSize:
    def test_frozen_value(self):
        # ceil((2 ln 10 + ln 10) / (0.5 * 0.1))
        assert list_sample_size(0.5, 0.1, 0.1, 2, 10) == 139

    @pytest.mark.parametrize("alpha", [0.0, 1.5])
    def test_range(self, alpha):
        with pytest.raises(ValueError):
            list_sample_size(alpha, 0.1, 0.1, 2, 10)

    def test_constant_scales(self):
        base = list_sample_size(0.5, 0.1, 0.1, 2, 10)
        assert list_sample_size(0.5, 0.1, 0.1, 2, 10, constant=2) == math.ceil(2 * (3 * math.log(10)) / 0.05)
        assert list_sample_size(0.5, 0.1, 0.1, 2, 10, constant=2) > base


class TestClassifier:
    def test_predicts_at_threshold(self):
        c = SparseLinearClassifier((1,), np.array([2.0]))
        assert c.predict(np.array([[9.0, 0.5], [9.0, 0.49]])).tolist() == [1, 0]

    def test_support_order(self):
        with pytest.raises(ValueError):
            SparseLinearClassifier((2, 1), np.ones(2))

    def test_dense_and_dict(self):
        c = SparseLinearClassifier((0, 3), np.array([1.0, -2.0]))
        np.testing.assert_array_equal(c.dense(4), [1.0, 0.0, 0.0, -2.0])
        back = classifier_from_dict(c.to_dict())
        assert back.support == c.support
        np.testing.assert_array_equal(back.weights, c.weights)


def test_signed_labels():
    assert signed_labels([0, 1, 1]).tolist() == [-1.0, 1.0, 1.0]


def test_one_dimensional_solution_is_exact():
    # single coordinate and single example: y x w = y - nu
    data = Dataset(np.array([[2.0], [-1.0]]), [1, 0])
    lst = sparse_list(data, SparseListConfig(s=1, m=2, nu=0.1))
    assert [float(c.weights[0]) for c in lst] == pytest.approx([0.45, -1.1])


def test_consistent_side_puts_defining_points_on_their_label():
    data = Dataset(np.array([[2.0], [-1.0]]), [1, 0])
    lst = sparse_list(data, SparseListConfig(s=1, m=2, nu=0.1, margin_side="consistent"))
    assert lst[0].predict(data.X[:1])[0] == 1
    assert lst[1].predict(data.X[1:])[0] == 0


def test_singular_systems_are_skipped():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 1.0]])
    arr = sparse_list_arrays(Dataset(X, [1, 1, 0]), SparseListConfig(s=2, m=3))
    assert arr.n_systems == 3
    assert len(arr) == 2  # rows (0, 1) are collinear


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(1, 2), st.integers(2, 12), st.integers(0, 10**6))
def test_list_size_bound(d, s, m, seed):
    s = min(s, d)
    X = Rng(seed).generator().standard_normal((m, d))
    y = Rng(seed).child("y").generator().integers(0, 2, m)
    arr = sparse_list_arrays(Dataset(X, y), SparseListConfig(s=s, m=m))
    assert len(arr) <= list_size_bound(d, m, s) <= (m * d) ** 2
    assert arr.n_systems == list_size_bound(d, m, s)


def test_dedup_removes_repeats():
    X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    data = Dataset(X, [1, 1, 0])
    full = sparse_list_arrays(data, SparseListConfig(s=1, m=3))
    dedup = sparse_list_arrays(data, SparseListConfig(s=1, m=3, dedup=True))
    assert len(dedup) < len(full)
    keys = {(tuple(s), tuple(np.round(w, 9))) for s, w in zip(dedup.supports, dedup.weights)}
    assert len(keys) == len(dedup)


@pytest.mark.parametrize("seed", range(5))
def test_realizable_sample_has_consistent_member(seed):
    planted = make_sparse_planted(6, 2, 1.0, seed)
    data = planted.draw(Rng(seed), 40)
    arr = sparse_list_arrays(data, SparseListConfig(s=2, m=40, margin_side="consistent"))
    assert arr.agreement_rates(data.X, data.y).max() == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_literal_margin_misses_only_defining_points(seed):
    # subtracting nu on both label sides leaves the s defining points just across the threshold
    planted = make_sparse_planted(6, 2, 1.0, seed)
    data = planted.draw(Rng(seed), 40)
    arr = sparse_list_arrays(data, SparseListConfig(s=2, m=40, margin_side="paper"))
    assert arr.agreement_rates(data.X, data.y).max() >= 1.0 - 2 / 40


def test_agreement_rates_match_predict():
    planted = make_sparse_planted(4, 2, 0.5, 1)
    data = planted.draw(Rng(1), 12)
    arr = sparse_list_arrays(data, SparseListConfig(s=2, m=12))
    rates = arr.agreement_rates(data.X, data.y)
    direct = [np.mean(c.predict(data.X) == data.y) for c in arr.classifiers()]
    np.testing.assert_allclose(rates, direct)


def test_jsonl_round_trip(tmp_path):
    planted = make_sparse_planted(4, 2, 1.0, 2)
    lst = sparse_list(planted.draw(Rng(2), 6), SparseListConfig(s=2, m=6))
    write_jsonl(lst, tmp_path / "l.jsonl")
    back = read_jsonl(tmp_path / "l.jsonl")
    assert len(back) == len(lst)
    np.testing.assert_array_equal(back[3].weights, lst[3].weights)


@pytest.mark.parametrize("kwargs", [{"s": 0, "m": 3}, {"s": 1, "m": 3, "nu": 0.0}, {"s": 1, "m": 3, "margin_side": "x"}])
def test_config_guards(kwargs):
    with pytest.raises(ValueError):
        SparseListConfig(**kwargs)


def test_too_few_examples():
    with pytest.raises(ValueError):
        sparse_list(Dataset(np.eye(2), [0, 1]), SparseListConfig(s=1, m=5))
