import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from selector_lab.core import (
    ConstantClassifier,
    Dataset,
    EmptySelection,
    ErrorDistribution,
    FlippedClassifier,
    Halfspace,
    LinearClassifier,
    PlantedModel,
    Rng,
    TableClassifier,
    ZeroVectorError,
    angle,
    basis,
    classifier_from_dict,
    conditional_error,
    joint_error,
    joint_errors_many,
    make_planted,
    project_orthogonal,
    random_unit,
    rotate_towards,
    sample_gaussian,
    selection_rate,
    unit,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
vectors = arrays(np.float64, st.integers(2, 6), elements=finite)


class TestRng:
    def test_same_path_same_stream(self):
        a = Rng(7).child("psgd", 3).generator().standard_normal(4)
        b = Rng(7).child("psgd", 3).generator().standard_normal(4)
        np.testing.assert_array_equal(a, b)

    def test_children_are_distinct(self):
        a = Rng(7).child("a").generator().standard_normal(4)
        b = Rng(7).child("b").generator().standard_normal(4)
        c = Rng(8).child("a").generator().standard_normal(4)
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_sample_gaussian_shape_and_guard(self):
        X = sample_gaussian(Rng(0), 3, 10)
        assert X.shape == (10, 3)
        with pytest.raises(ValueError):
            sample_gaussian(Rng(0), 0, 10)


class TestVectors:
    def test_unit_rejects_zero(self):
        with pytest.raises(ZeroVectorError):
            unit([0.0, 0.0])

    def test_unit_is_read_only(self):
        u = unit([3.0, 4.0])
        np.testing.assert_allclose(u, [0.6, 0.8])
        with pytest.raises(ValueError):
            u[0] = 1.0

    @given(vectors, st.integers(0, 10**6))
    def test_projection_is_orthogonal(self, x, seed):
        w = random_unit(Rng(seed), x.size)
        p = project_orthogonal(x, w)
        assert abs(p @ w) <= 1e-9 * max(1.0, np.abs(x).max())

    def test_projection_of_rows(self):
        X = np.array([[1.0, 2.0], [3.0, -1.0]])
        np.testing.assert_allclose(project_orthogonal(X, basis(2)), [[0.0, 2.0], [0.0, -1.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            angle(np.ones(2) / math.sqrt(2), basis(3))

    @pytest.mark.parametrize(
        "u, w, expected",
        [((1, 0), (1, 0), 0.0), ((1, 0), (0, 1), math.pi / 2), ((1, 0), (-1, 0), math.pi)],
    )
    def test_angle_known_values(self, u, w, expected):
        assert angle(np.array(u, float), np.array(w, float)) == pytest.approx(expected)

    @settings(max_examples=30)
    @given(st.integers(2, 8), st.floats(0.0, math.pi), st.integers(0, 1000))
    def test_rotate_towards_hits_angle(self, d, theta, seed):
        v = random_unit(Rng(seed), d)
        w = rotate_towards(v, theta, Rng(seed).child("rot"))
        assert angle(v, w) == pytest.approx(theta, abs=1e-6)


class TestHalfspace:
    def test_boundary_points_are_members(self):
        h = Halfspace(np.array([1.0, 0.0]))
        assert h.contains(np.array([[0.0, 5.0], [-1e-12, 0.0]])).tolist() == [True, False]

    def test_normal_is_normalized(self):
        h = Halfspace(np.array([0.0, 2.0]), 1.0)
        np.testing.assert_allclose(h.w, [0.0, 1.0])
        assert not h.homogeneous()


class TestClassifiers:
    @pytest.mark.parametrize(
        "clf",
        [
            LinearClassifier(np.array([1.0, -1.0]), 0.5),
            ConstantClassifier(1),
            TableClassifier(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([1, 0])),
            FlippedClassifier(ConstantClassifier(0)),
        ],
    )
    def test_dict_round_trip(self, clf):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, -1.0]])
        back = classifier_from_dict(clf.to_dict())
        np.testing.assert_array_equal(back.predict(X), clf.predict(X))

    def test_table_default(self):
        c = TableClassifier(np.array([[1.0]]), np.array([1]), default=0)
        assert c.predict(np.array([[1.0], [2.0]])).tolist() == [1, 0]

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            classifier_from_dict({"kind": "forest"})


class TestDataset:
    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 1)), [0, 2])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 1)), [0])

    def test_arrays_are_read_only_copies(self):
        X = np.zeros((2, 2))
        data = Dataset(X, [0, 1])
        X[0, 0] = 5.0
        assert data.X[0, 0] == 0.0
        with pytest.raises(ValueError):
            data.X[0, 0] = 1.0

    def test_iteration_yields_examples(self):
        data = Dataset(np.eye(2), [1, 0])
        ex = list(data)
        assert ex[0].y == 1 and ex[1].x.tolist() == [0.0, 1.0]

    def test_csv_round_trip(self, tmp_path):
        data = make_planted(3, 0.1, 0.4, 1).draw(Rng(1), 50)
        path = tmp_path / "d.csv"
        data.to_csv(path)
        assert path.read_text().splitlines()[0] == "x_1,x_2,x_3,y"
        back = Dataset.from_csv(path)
        np.testing.assert_array_equal(back.X, data.X)
        np.testing.assert_array_equal(back.y, data.y)

    def test_csv_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,0\n")
        with pytest.raises(ValueError):
            Dataset.from_csv(path)


class TestLosses:
    # Four points; c predicts 1 iff x_1 >= 0, errors on rows 1 and 3.
    X = np.array([[1.0, 1.0], [2.0, -1.0], [-1.0, 1.0], [-2.0, -1.0]])
    y = np.array([1, 0, 0, 1])
    c = LinearClassifier(np.array([1.0, 0.0]))

    def test_frozen_values(self):
        data = Dataset(self.X, self.y)
        h = Halfspace(np.array([0.0, -1.0]))  # lower half: rows 1 and 3
        assert joint_error(data, self.c, h) == 0.5
        assert selection_rate(data, h) == 0.5
        assert conditional_error(data, self.c, h) == 1.0
        h_up = Halfspace(np.array([0.0, 1.0]))
        assert joint_error(data, self.c, h_up) == 0.0
        assert conditional_error(data, self.c, h_up) == 0.0

    def test_empty_selection(self):
        data = Dataset(self.X, self.y)
        with pytest.raises(EmptySelection):
            conditional_error(data, self.c, Halfspace(np.array([1.0, 0.0]), 10.0))

    def test_error_distribution_matches_iteration(self):
        ed = ErrorDistribution(Dataset(self.X, self.y), self.c)
        assert ed.e.tolist() == [0, 1, 0, 1]
        assert [e for _, e in ed] == [0, 1, 0, 1]

    def test_joint_errors_many_matches_single(self):
        model = make_planted(3, 0.1, 0.6, 4)
        data = model.draw(Rng(2), 2000)
        W = np.array([random_unit(Rng(9).child(k), 3) for k in range(7)])
        e = model.c_star.predict(data.X) != data.y
        many = joint_errors_many(data.X, e, W, chunk=3)
        single = [joint_error(data, model.c_star, Halfspace(w)) for w in W]
        np.testing.assert_allclose(many, single)


class TestPlantedModel:
    def test_round_trip(self, tmp_path):
        model = make_planted(4, 0.02, 0.5, 11)
        model.save(tmp_path / "m.json")
        back = PlantedModel.load(tmp_path / "m.json")
        np.testing.assert_array_equal(back.v, model.v)
        assert back.to_dict() == model.to_dict()

    def test_rates_are_planted(self):
        model = make_planted(3, 0.1, 0.7, 5)
        data = model.draw(Rng(0), 200_000)
        e = model.c_star.predict(data.X) != data.y
        inside = data.X @ model.v >= 0
        assert e[inside].mean() == pytest.approx(0.1, abs=0.005)
        assert e[~inside].mean() == pytest.approx(0.7, abs=0.005)

    def test_optimum_is_half_inner_rate(self):
        assert make_planted(2, 0.04, 0.5, 0).optimum == 0.02

    def test_rate_order_enforced(self):
        with pytest.raises(ValueError):
            make_planted(2, 0.6, 0.5, 0)
