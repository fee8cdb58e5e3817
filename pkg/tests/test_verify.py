import json
import math

import numpy as np
import pytest

from selector_lab.core import Rng, make_planted, rotate_towards
from selector_lab.verify import (
    RELU_MEAN,
    CheckReport,
    certificate_bound,
    check_decomposition_suite,
    check_grad_bounds,
    check_loss_bound,
    check_psgd_convergence,
    check_smoothness,
    check_stationarity_certificate,
    failed,
    run_suite,
)


def test_relu_mean_constant():
    assert RELU_MEAN == pytest.approx(0.3989, abs=1e-4)


def test_certificate_bound_value():
    assert certificate_bound(0.05) == pytest.approx(2.5 * math.sqrt(0.05 * math.sqrt(math.log(20))))


def test_report_pass_logic():
    r = CheckReport("x", "ref", measured=1.1, bound=1.0, tolerance=0.05, n_samples=1, seed=0)
    assert not r.passed
    assert CheckReport("x", "ref", 1.1, 1.0, 0.05, 1, 0, vacuous=True).passed
    assert json.loads(json.dumps(r.to_dict()))["passed"] is False


class TestMonteCarloChecks:
    def test_sample_floor(self):
        with pytest.raises(ValueError):
            check_loss_bound(3, 10_000, 0)

    @pytest.mark.parametrize("d", [2, 7])
    def test_loss_bound(self, d):
        r = check_loss_bound(d, 200_000, 1)
        assert r.passed
        assert r.measured == pytest.approx(RELU_MEAN, abs=0.005)

    def test_loss_is_zero_without_errors(self):
        assert check_loss_bound(3, 100_000, 1, label=0).measured == 0.0

    def test_grad_bounds(self):
        mean, second = check_grad_bounds(4, 200_000, 2)
        assert mean.passed and second.passed
        # with e = 1 everywhere the orthogonal part averages out and E|g|^2 = (d - 1) / 2
        assert mean.measured < 0.01
        assert second.measured == pytest.approx(1.5, abs=0.03)

    def test_smoothness(self):
        r = check_smoothness(3, 10, 100_000, 3)
        assert r.passed
        assert r.details["pairs"] == 10

    def test_psgd_convergence(self):
        r = check_psgd_convergence(3, 100, 200, 4, every=50)
        assert r.passed and r.details["evaluated_iterates"] == 2

    def test_decomposition_suite(self):
        r = check_decomposition_suite(100, 5)
        assert r.passed and r.measured <= 1e-12


class TestCertificate:
    model = make_planted(2, 0.002, 0.5, 7)

    def test_at_optimum_is_non_vacuous_pass(self):
        r = check_stationarity_certificate(self.model, self.model.v, 1e-3, 2_000_000, 1)
        assert not r.vacuous and r.passed

    def test_far_direction_is_vacuous(self):
        w = rotate_towards(self.model.v, 1.0, Rng(1))
        r = check_stationarity_certificate(self.model, w, 1e-3, 200_000, 1)
        assert r.vacuous and r.details["grad_norm"] > r.details["grad_threshold"]

    def test_obtuse_direction_is_vacuous(self):
        r = check_stationarity_certificate(self.model, -self.model.v, 1e-3, 200_000, 1)
        assert r.vacuous

    def test_large_optimum_is_vacuous(self):
        model = make_planted(2, 0.2, 0.5, 7)
        r = check_stationarity_certificate(model, model.v, 1e-3, 200_000, 1)
        assert r.vacuous

    def test_level_depends_on_epsilon(self):
        assert check_stationarity_certificate(self.model, self.model.v, 0.01, 100_000, 1).level == "warn"

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            check_stationarity_certificate(self.model, self.model.v, 0.5, 100_000, 1)


class TestSuite:
    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            run_suite("huge")

    def test_quick_suite_passes_and_repeats(self):
        a = run_suite("quick", 1)
        b = run_suite("quick", 1)
        assert failed(a) == []
        assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
        assert any(not r.vacuous for r in a if r.name == "stationarity_certificate")
