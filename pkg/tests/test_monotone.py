import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irf.dataset import SampleSet
from irf.errors import ComputeError
from irf.itree import build_itree, depths
from irf.monotone import (
    MonotonePartition,
    bound_b,
    build_mtree,
    confidence_multiplier,
    exact_expected_height,
    exact_variance,
    expected_indicator,
    max_variance_equidistant,
    oracle_variance,
    published_variance_formula,
    point_depth_relation,
    sample_interval_depths,
    sample_point_depths,
    sandwich_bounds,
    trials_for_confidence,
    variance_regression,
    weight,
)
from irf.streams import TrialStream

lengths = st.lists(st.floats(0.01, 10.0), min_size=1, max_size=7)


class Scripted:
    """Feeds fixed uniforms to a builder."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def test_partition_validation():
    with pytest.raises(ValueError):
        MonotonePartition([0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        MonotonePartition([0.0])
    p = MonotonePartition.from_lengths([1, 2, 3])
    assert p.N == 3 and p.total == 6 and p.length(2) == 2
    with pytest.raises(IndexError):
        p.length(0)


def test_weight_symmetry_and_bound():
    p = MonotonePartition.from_lengths([1, 2, 3, 4])
    for i in range(1, 5):
        for k in range(1, 5):
            assert weight(p, i, k) == weight(p, k, i)
            if i != k:
                assert weight(p, i, k) >= p.length(i) + p.length(k)


def test_single_interval_tree():
    t = build_mtree(MonotonePartition([0.0, 1.0]), TrialStream(0))
    assert t.root == 1 and t.depths == (0,)


def test_root_probability_two_intervals():
    p = MonotonePartition.from_lengths([1, 2])
    roots = [build_mtree(p, TrialStream(4, k)).root for k in range(100_000)]
    frac = np.mean(np.array(roots) == 2)
    assert abs(frac - 2 / 3) < 4 * math.sqrt(2 / 9 / 100_000)


def test_forced_choices_build_expected_shape():
    # five equal intervals; uniforms pick I3, then I1 on the left, then I2,
    # then I5 on the right, then I4
    p = MonotonePartition.equidistant(5)
    t = build_mtree(p, Scripted([0.5, 0.1, 0.5, 0.9, 0.1]))
    assert t.root == 3
    assert t.left == (0, 0, 1, 0, 4) and t.right == (2, 0, 5, 0, 0)
    assert t.depths == (1, 2, 0, 2, 1)
    assert t.inorder() == [1, 2, 3, 4, 5]


@given(lengths, st.integers(0, 1000))
def test_inorder_and_node_count(ls, seed):
    p = MonotonePartition.from_lengths(ls)
    t = build_mtree(p, TrialStream(seed))
    assert t.inorder() == list(range(1, p.N + 1))


def test_expected_indicator_examples():
    p = MonotonePartition.from_lengths([1, 2])
    assert expected_indicator(p, 1, 2) == pytest.approx(2 / 3)
    q = MonotonePartition.equidistant(6)
    for i in range(1, 7):
        for k in range(1, 7):
            if i != k:
                assert expected_indicator(q, i, k) == pytest.approx(1 / (abs(i - k) + 1))
    with pytest.raises(ValueError):
        expected_indicator(p, 1, 1)


def test_expected_height_examples():
    assert exact_expected_height(MonotonePartition([0, 1]), 1) == 0
    assert exact_expected_height(MonotonePartition.from_lengths([1, 1, 1]), 2) == pytest.approx(1)
    assert exact_expected_height(MonotonePartition.from_lengths([1, 2]), 1) == pytest.approx(2 / 3)


def test_variance_examples():
    p3 = MonotonePartition.from_lengths([1, 1, 1])
    assert published_variance_formula(p3, 1) == pytest.approx(17 / 36)
    assert published_variance_formula(p3, 2) == pytest.approx(0.5)
    assert oracle_variance(p3, 2) == pytest.approx(2 / 3)
    assert oracle_variance(p3, 1) == pytest.approx(17 / 36)
    assert exact_variance(p3, 2) == pytest.approx(2 / 3)
    one = MonotonePartition([0, 1])
    assert published_variance_formula(one, 1) == 0 and oracle_variance(one, 1) == 0
    a, b = 0.3, 1.7
    p2 = MonotonePartition.from_lengths([a, b])
    assert oracle_variance(p2, 1) == pytest.approx(a * b / (a + b) ** 2)
    e = exact_expected_height(p2, 2)
    assert published_variance_formula(p2, 2) == pytest.approx(e - e * e)


@given(lengths, st.data())
def test_exact_variance_matches_enumeration(ls, data):
    p = MonotonePartition.from_lengths(ls)
    i = data.draw(st.integers(1, p.N))
    assert exact_variance(p, i) == pytest.approx(oracle_variance(p, i), abs=1e-12)
    assert oracle_variance(p, i) <= exact_expected_height(p, i) + 1e-12


def test_oracle_variance_limit():
    with pytest.raises(ComputeError):
        oracle_variance(MonotonePartition.equidistant(9), 1)


def test_bound_b():
    assert bound_b(MonotonePartition([0, 1]), 1) == 0
    p = MonotonePartition([0, 0.1, 0.4, 1.0])
    assert bound_b(p, 1) == pytest.approx(2.302585, abs=1e-6)
    assert bound_b(p, 1) == pytest.approx(-math.log(0.1))


def test_sandwich_examples():
    with pytest.raises(ValueError):
        sandwich_bounds(MonotonePartition([0, 0.5, 2]))
    near = sandwich_bounds(MonotonePartition([0, 1 - 1e-9, 1 - 5e-10, 1]))
    assert max(near.lower, near.upper) < 1e-8
    tiny = MonotonePartition([0, 1e-6, 0.5, 1])
    b = sandwich_bounds(tiny)
    ratio_bound = b.upper_amgm / -math.log(1e-6)
    assert ratio_bound == pytest.approx(2 * (1 - 1e-3) / 13.8155, rel=1e-4)
    assert exact_expected_height(tiny, 1) / bound_b(tiny, 1) <= ratio_bound
    d = 0.999
    p = MonotonePartition([0, d, (1 + d) / 2, 1])
    r = exact_expected_height(p, 1) / bound_b(p, 1)
    assert (d - 1) / math.log(d) <= r <= (d - 1) / (d * math.log(d))
    assert 0.99950 <= r <= 1.00051


@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=10))
def test_sandwich_holds(ls):
    x = np.concatenate([[0.0], np.cumsum(ls)])
    x = x / x[-1]
    if np.any(np.diff(x) <= 0):
        return
    x[-1] = 1.0
    p = MonotonePartition(x)
    b = sandwich_bounds(p)
    e = exact_expected_height(p, 1)
    assert b.lower - 1e-12 <= e <= b.upper + 1e-12


def test_log_growth_of_expected_height():
    for n in (10, 100, 1000, 10_000):
        p = MonotonePartition.equidistant(n)
        e = max(exact_expected_height(p, i) for i in {1, n // 2, (n + 1) // 2, n})
        assert e / math.log(n) <= 2.1


def test_regression_examples():
    with pytest.raises(ComputeError):
        variance_regression(3)
    assert variance_regression(27) == pytest.approx(1.99 * 3 - 2.38)
    assert variance_regression(148) == pytest.approx(6.6718, abs=1e-4)


def test_trials_for_confidence_examples():
    assert trials_for_confidence(0.0, 90) == 0
    assert trials_for_confidence(6.67, 90) == 1805
    assert confidence_multiplier(95) == pytest.approx(1536.64)
    assert confidence_multiplier(90) == pytest.approx(270.6025)
    with pytest.raises(ValueError):
        trials_for_confidence(-1.0, 90)
    with pytest.raises(ValueError):
        trials_for_confidence(1.0, 99)


def test_point_depth_relation_examples():
    assert point_depth_relation(MonotonePartition([0, 1]), [0]).tolist() == [1, 1]
    p = MonotonePartition([0, 1, 2])
    assert point_depth_relation(p, [0, 1]).tolist() == [1, 2, 2]
    with pytest.raises(ValueError):
        point_depth_relation(p, [0])


@given(st.lists(st.floats(0.01, 10.0), min_size=1, max_size=30, unique=True), st.integers(0, 99))
def test_point_depth_relation_on_itrees(ls, seed):
    """A 1D isolation tree is a monotone tree over its gaps, one level shallower."""
    x = np.concatenate([[0.0], np.cumsum(ls)])
    p = MonotonePartition(x)
    t = build_itree(SampleSet(x), TrialStream(seed))
    gap_depth = np.empty(p.N, dtype=int)
    for nd in t.internal_nodes():
        k = int(np.searchsorted(x, nd.split))  # split lies in gap k = [x_{k-1}, x_k]
        gap_depth[k - 1] = nd.depth
    h = depths(t)
    assert h.tolist() == point_depth_relation(p, gap_depth).tolist()
    assert t.height() == gap_depth.max() + 1


def test_race_sampler_means_and_variances():
    p = MonotonePartition.from_lengths([0.5, 2.0, 1.0, 0.1, 3.0])
    K = 200_000
    h = sample_interval_depths(p, 3, K)
    for i in range(1, 6):
        e = exact_expected_height(p, i)
        sd = math.sqrt(exact_variance(p, i))
        assert abs(h[:, i - 1].mean() - e) <= 4 * sd / math.sqrt(K)
    assert (np.sort(h, axis=1)[:, 0] == 0).all()


def test_race_and_direct_builders_agree_in_distribution():
    p = MonotonePartition.from_lengths([1.0, 0.2, 2.5, 0.7])
    K = 50_000
    direct = np.array([build_mtree(p, TrialStream(8, k)).depths for k in range(K)])
    race = sample_interval_depths(p, 8, K)
    for i in range(4):
        se = math.sqrt((direct[:, i].var() + race[:, i].var()) / K)
        assert abs(direct[:, i].mean() - race[:, i].mean()) <= 4 * se


def test_point_sampler_matches_itree_depths():
    x = np.array([0.0, 1.0, 3.0])
    pts = sample_point_depths(MonotonePartition(x), 0, 100_000).mean(axis=0)
    np.testing.assert_allclose(pts, [5 / 3, 2, 4 / 3], atol=0.01)


def test_max_variance_small_cases():
    assert max_variance_equidistant(1).value == 0
    r = max_variance_equidistant(3)
    assert r.value == pytest.approx(2 / 3) and r.index == 2 and r.method == "enumeration"
    assert max_variance_equidistant(3, "formula").value == pytest.approx(0.5)
    assert max_variance_equidistant(3, "middle").index == 2
    pt = max_variance_equidistant(3, "point")
    assert pt.value == pytest.approx(0.25)
    assert max_variance_equidistant(9, "point").value == pytest.approx(1.3194444, abs=1e-6)
    exact = max_variance_equidistant(12)
    assert exact.method == "closed-form"
    mc = max_variance_equidistant(12, method="mc", trials=100_000, seed=1)
    assert abs(mc.value - exact.value) <= 2 * mc.ci_halfwidth
    with pytest.raises(ValueError):
        max_variance_equidistant(3, "other")


def test_point_variance_three_points_by_hand():
    # gaps (1, 1): each endpoint depth is 1 or 2 with probability 1/2, middle always 2
    v = Fraction(1, 4)
    assert max_variance_equidistant(3, "point").value == pytest.approx(float(v))


def test_equidistant_is_not_the_variance_maximiser():
    """Small perturbations of equal spacing can raise the maximum depth variance."""
    eq = max_variance_equidistant(4)
    p = MonotonePartition.from_lengths([2, 1, 1, 2])
    assert max(exact_variance(p, i) for i in range(1, 5)) > eq.value
    assert max(oracle_variance(p, i) for i in range(1, 5)) == pytest.approx(1.0)

    eq_pt = max_variance_equidistant(5, "point")
    q = MonotonePartition.from_lengths([1, 1, 0.5, 1])
    from irf.oracle import enumerate_mrf, mtree_depths

    m1 = np.zeros(5)
    m2 = np.zeros(5)
    for tree, prob in enumerate_mrf(q).entries:
        d = point_depth_relation(q, mtree_depths(tree, 4))
        m1 += prob * d
        m2 += prob * d * d
    assert (m2 - m1 * m1).max() > eq_pt.value


def test_mc_halfwidth_positive_for_two_point_depths():
    res = max_variance_equidistant(3, definition="point", method="mc", trials=20_000, seed=3)
    assert res.ci_halfwidth > 0
    assert abs(res.value - 0.25) <= 2 * res.ci_halfwidth
