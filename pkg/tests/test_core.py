"""Step functions, crossing search and the core dataset containers."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from convsurv.core import (
    EventStatus,
    StepFunction,
    SurvivalDataset,
    SurvivalRecord,
    TimeAxis,
    complement,
    evaluate_step,
    median_crossing,
    survival_to_incidence,
)
from convsurv.errors import InvalidCurveError, ShapeMismatchError

from conftest import make_dataset


def survival_f():
    return StepFunction(np.array([1.0, 2.0]), np.array([0.5, 0.25]), 1.0)


class TestStepFunction:
    def test_below_first_knot(self):
        assert evaluate_step(survival_f(), 0.5) == 1.0

    def test_right_continuous_at_knot(self):
        assert evaluate_step(survival_f(), 1) == 0.5

    def test_beyond_last_knot_holds_last_value(self):
        assert evaluate_step(survival_f(), 10) == 0.25

    def test_array_evaluation(self):
        out = survival_f()(np.array([0.0, 1.0, 1.5, 2.0, 3.0]))
        assert_allclose(out, [1.0, 0.5, 0.5, 0.25, 0.25])

    def test_knots_must_increase(self):
        with pytest.raises(InvalidCurveError, match="increasing"):
            StepFunction(np.array([2.0, 1.0]), np.array([0.5, 0.2]), 1.0)

    def test_length_mismatch(self):
        with pytest.raises(InvalidCurveError, match="equal length"):
            StepFunction(np.array([1.0]), np.array([0.5, 0.2]), 1.0)

    def test_refinement_never_changes_evaluations(self, rng):
        """Inserting knots that duplicate the current value is a no-op."""
        for _ in range(25):
            k = np.sort(rng.choice(np.arange(1, 50), size=5, replace=False)).astype(float)
            v = np.sort(rng.random(5))[::-1]
            f = StepFunction(k, v, 1.0)
            # refine: add a knot between each pair carrying the left value
            new_k = [0.5]
            new_v = [1.0]
            for i, knot in enumerate(k):
                new_k.append(knot)
                new_v.append(v[i])
                new_k.append(knot + 0.25)
                new_v.append(v[i])
            g = StepFunction(np.array(new_k), np.array(new_v), 1.0)
            ts = rng.random(40) * 60
            assert_allclose(g(ts), f(ts), rtol=0, atol=0)


class TestMedianCrossing:
    def test_survival_first_knot_at_or_below(self):
        f = StepFunction(np.array([3.0, 7.0]), np.array([0.6, 0.4]), 1.0)
        assert median_crossing(f, 0.5) == 7.0

    def test_survival_never_crosses(self):
        f = StepFunction(np.array([3.0, 7.0]), np.array([0.9, 0.8]), 1.0)
        assert median_crossing(f, 0.5) is None

    def test_incidence_upward_crossing(self):
        f = StepFunction(np.array([2.0, 5.0]), np.array([0.3, 0.55]), 0.0)
        assert median_crossing(f, 0.5) == 5.0

    def test_result_is_a_knot(self, rng):
        for _ in range(30):
            k = np.sort(rng.choice(np.arange(1, 100), size=8, replace=False)).astype(float)
            v = np.sort(rng.random(8))[::-1]
            f = StepFunction(k, v, 1.0)
            m = median_crossing(f, 0.5)
            if m is not None:
                assert m in k

    def test_non_monotone_rejected(self):
        f = StepFunction(np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.7, 0.4]), 1.0)
        with pytest.raises(InvalidCurveError, match="monotone"):
            median_crossing(f, 0.5)

    def test_threshold_domain(self):
        with pytest.raises(InvalidCurveError, match="threshold"):
            median_crossing(survival_f(), 1.5)

    def test_constant_survival_never_crosses(self):
        f = StepFunction(np.zeros(0), np.zeros(0), 1.0)
        assert median_crossing(f, 0.5) is None


class TestComplement:
    def test_pointwise_complement(self):
        s = StepFunction(np.array([1.0, 2.0]), np.array([0.75, 0.5]), 1.0)
        inc = survival_to_incidence(s)
        assert_allclose(inc.values, [0.25, 0.5])
        assert inc.left_value == 0.0

    def test_no_events(self):
        s = StepFunction(np.zeros(0), np.zeros(0), 1.0)
        inc = complement(s)
        assert inc.left_value == 0.0
        assert inc(123.0) == 0.0

    def test_certain_event(self):
        s = StepFunction(np.array([1.0]), np.array([0.0]), 1.0)
        inc = complement(s)
        assert inc(1.0) == 1.0
        assert inc(0.5) == 0.0

    def test_involution(self, rng):
        """complement(complement(f)) == f on valid survival curves."""
        for _ in range(20):
            k = np.sort(rng.choice(np.arange(1, 40), size=6, replace=False)).astype(float)
            v = np.sort(rng.random(6))[::-1]
            f = StepFunction(k, v, 1.0)
            g = complement(complement(f))
            assert_allclose(g.values, f.values, rtol=0, atol=0)
            assert g.left_value == f.left_value

    def test_rejects_values_outside_unit_interval(self):
        f = StepFunction(np.array([1.0]), np.array([1.5]), 0.0)
        with pytest.raises(InvalidCurveError, match=r"\[0, 1\]"):
            complement(f)

    def test_rejects_non_monotone(self):
        f = StepFunction(np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.7, 0.4]), 1.0)
        with pytest.raises(InvalidCurveError, match="monotone"):
            complement(f)


class TestRecordsAndDataset:
    def test_negative_time_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            SurvivalRecord("a", -1.0, EventStatus.CENSORED, (0.0,))

    def test_non_finite_covariates_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            SurvivalRecord("a", 1.0, EventStatus.CENSORED, (float("nan"),))

    def test_churned_requires_competing_flag(self):
        with pytest.raises(ValueError, match="CHURNED"):
            make_dataset([1.0], [EventStatus.CHURNED])

    def test_duplicate_subject_ids_rejected(self):
        r = SurvivalRecord("a", 1.0, EventStatus.CENSORED, (0.0,))
        with pytest.raises(ValueError, match="duplicate"):
            SurvivalDataset((r, r), ("f0",), TimeAxis.LIFETIME, False)

    def test_covariate_dimension_checked(self):
        r1 = SurvivalRecord("a", 1.0, EventStatus.CENSORED, (0.0,))
        r2 = SurvivalRecord("b", 1.0, EventStatus.CENSORED, (0.0, 1.0))
        with pytest.raises(ShapeMismatchError):
            SurvivalDataset((r1, r2), ("f0",), TimeAxis.LIFETIME, False)

    def test_recode_competing_as_censored(self):
        d = make_dataset([1, 2, 3],
                         [EventStatus.CONVERTED, EventStatus.CHURNED,
                          EventStatus.CENSORED], competing=True)
        single = d.recode_competing_as_censored()
        assert not single.competing_risks
        assert [r.status for r in single.records] == [
            EventStatus.CONVERTED, EventStatus.CENSORED, EventStatus.CENSORED]
        assert_allclose(single.times, d.times)

    def test_matrix_shape(self):
        d = make_dataset([1, 2], [1, 0], x=[(1.0, 2.0), (3.0, 4.0)])
        assert d.covariate_matrix.shape == (2, 2)
        assert d.n_features == 2
