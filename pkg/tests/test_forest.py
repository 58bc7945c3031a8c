import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irf.dataset import SampleSet
from irf.errors import ComputeError
from irf.forest import (
    HeightEstimate,
    ThresholdCriterion,
    flag_anomalies,
    irf_estimate,
    trials_from_confidence,
)

THREE = SampleSet([0.0, 1.0, 3.0])
THREE_EXACT = np.array([5 / 3, 2.0, 4 / 3])


def test_single_point_estimate():
    est = irf_estimate(SampleSet([[2.0, 3.0]]), 10, 0)
    assert est.mean_depth.tolist() == [0.0] and est.sample_variance.tolist() == [0.0]


def test_three_point_means():
    est = irf_estimate(THREE, 100_000, 17)
    assert est.mean_depth[1] == 2.0 and est.sample_variance[1] == 0.0
    tol = 4 * np.sqrt(est.sample_variance / est.trials)
    assert (np.abs(est.mean_depth - THREE_EXACT) <= tol).all()


def test_reproducible_and_order_independent():
    pts = SampleSet(np.random.default_rng(2).normal(size=(40, 3)))
    a = irf_estimate(pts, 500, 9)
    b = irf_estimate(pts, 500, 9)
    c = irf_estimate(pts, 500, 9, trial_order=np.random.default_rng(0).permutation(500))
    assert a.mean_depth.tobytes() == b.mean_depth.tobytes()
    assert a.mean_depth.tobytes() == c.mean_depth.tobytes()
    assert a.sample_variance.tobytes() == c.sample_variance.tobytes()
    assert not np.array_equal(a.mean_depth, irf_estimate(pts, 500, 10).mean_depth)


def test_estimate_invariants():
    est = irf_estimate(SampleSet(np.random.default_rng(3).normal(size=(30, 2))), 50, 1)
    assert (est.mean_depth > 0).all() and (est.sample_variance >= 0).all()
    with pytest.raises(ValueError):
        irf_estimate(THREE, 0, 0)
    assert irf_estimate(THREE, 1, 0).sample_variance.tolist() == [0.0] * 3


def test_from_sums_unbiased_variance():
    x = np.array([[1, 3], [2, 3], [4, 3]])
    est = HeightEstimate.from_sums(x.sum(0), (x**2).sum(0), 3, 0, "irf")
    np.testing.assert_allclose(est.mean_depth, [7 / 3, 3])
    np.testing.assert_allclose(est.sample_variance, [np.var(x[:, 0], ddof=1), 0.0])


def test_csv_output():
    est = HeightEstimate(np.array([1.5, 2.0]), np.array([0.25, 0.0]), 4, 0)
    assert est.to_csv(["a", "b"]) == "id,mean_depth,sample_variance\na,1.5,0.25\nb,2.0,0.0\n"


def test_threshold_count():
    assert ThresholdCriterion(4).count(376) == 16
    assert ThresholdCriterion(0.5).count(376) == 2
    assert ThresholdCriterion(3).count(376) == 12
    # 7% of 100 is 7 exactly, no float spill-over to 8
    assert ThresholdCriterion(7).count(100) == 7
    assert ThresholdCriterion(0.07).count(10_000) == 7
    for bad in (0, 100, -1, 150):
        with pytest.raises(ValueError):
            ThresholdCriterion(bad)


def test_flag_ties_go_to_lower_index():
    est = HeightEstimate(np.full(50, 3.0), np.zeros(50), 1, 0)
    assert flag_anomalies(est, ThresholdCriterion(4)).tolist() == [0, 1]


def test_flag_single_smallest():
    depth = np.full(40, 5.0)
    depth[17] = 1.0
    est = HeightEstimate(depth, np.zeros(40), 1, 0)
    assert flag_anomalies(est, ThresholdCriterion(2)).tolist() == [17]


@given(st.lists(st.floats(0, 20), min_size=1, max_size=60), st.floats(0.01, 99.9),
       st.floats(0.01, 99.9))
def test_flags_monotone_in_quantile(depth, q1, q2):
    est = HeightEstimate(np.array(depth), np.zeros(len(depth)), 1, 0)
    lo, hi = sorted((q1, q2))
    a = set(flag_anomalies(est, ThresholdCriterion(lo)).tolist())
    b = set(flag_anomalies(est, ThresholdCriterion(hi)).tolist())
    assert a <= b
    assert len(b) == min(ThresholdCriterion(hi).count(len(depth)), len(depth))


def test_flag_count_matches_rule_for_distinct_depths():
    est = HeightEstimate(np.random.default_rng(4).permutation(376).astype(float),
                         np.zeros(376), 1, 0)
    for q in (0.5, 1, 2, 3, 4, 5, 6, 7):
        assert flag_anomalies(est, ThresholdCriterion(q)).size == math.ceil(q * 376 / 100)


def test_trials_from_confidence():
    s = SampleSet(np.arange(148.0))
    assert trials_from_confidence(s, 90) == 1803
    assert trials_from_confidence(SampleSet(np.arange(376.0)), 90) == 2262
    assert trials_from_confidence(s, 95) == math.ceil(round(1536.64 * (1.99 / math.log(3) * math.log(147) - 2.38), 9))
    with pytest.raises(ComputeError, match="explicit"):
        trials_from_confidence(SampleSet([0.0, 1.0, 2.0]), 90)
    with pytest.raises(ComputeError):
        trials_from_confidence(SampleSet([0.0]), 90)
    with pytest.raises(ValueError):
        trials_from_confidence(s, 80)
