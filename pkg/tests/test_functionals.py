import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from assocpp.errors import DomainError, ResourceError, UnsupportedOrderError
from assocpp.functionals import (
    LocalStatistic,
    brute_force_statistic,
    count_statistic,
    eval_statistic,
    eval_statistic_barycentre,
    pair_count,
    statistic_from_name,
    symmetrize,
    triangle_count,
    tuple_statistic,
    variance_linear_bound_check,
    variance_lowerbound_criterion,
    zero_statistic,
)
from assocpp.kernels import KernelSpec
from assocpp.sampler import PointPattern, sample_dpp, sample_poisson
from assocpp.streams import stream
from assocpp.window import Window

W10 = Window.cube(10.0)
GAUSS = KernelSpec.gaussian(0.3, 1.0)


def weighted(s):
    """A non-trivial set function: depends on sizes and coordinates."""
    return float(len(s)) + float(np.sum(s[:, 0] * 0.25)) - 0.5 * float(np.prod(s[:, 1]))


def test_count_statistic_is_n():
    pat = sample_poisson(1.0, W10, stream(0, "c"))
    assert eval_statistic(count_statistic(), pat) == pat.n


def test_pair_count_matches_double_loop():
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 10, (200, 2))
    tau = 0.8
    brute = sum(
        1 for i in range(200) for j in range(i + 1, 200) if np.linalg.norm(pts[i] - pts[j]) <= tau
    )
    assert eval_statistic(pair_count(tau), pts) == brute


def test_empty_pattern():
    empty = PointPattern(np.zeros((0, 2)), W10)
    assert eval_statistic(pair_count(1.0), empty) == 0.0
    assert eval_statistic_barycentre(pair_count(1.0), empty, W10) == 0.0


def test_local_statistic_wrapper_cutoffs():
    stat = LocalStatistic(lambda s: 1.0, tau=1.0, p_max=2)
    assert stat.value(np.array([[0, 0], [0.5, 0]])) == 1.0
    assert stat.value(np.array([[0, 0], [1.5, 0]])) == 0.0
    assert stat.value(np.array([[0, 0], [0.1, 0], [0.2, 0]])) == 0.0
    with pytest.raises(DomainError):
        LocalStatistic(lambda s: 1.0, tau=0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(0, 12), tau=st.floats(0.2, 2.0), p_max=st.integers(1, 4))
def test_enumeration_equals_brute_force(seed, n, tau, p_max):
    pts = np.random.default_rng(seed).uniform(0, 3, (n, 2))
    stat = LocalStatistic(weighted, tau, p_max=p_max)
    assert eval_statistic(stat, pts) == brute_force_statistic(stat, pts)


def test_barycentre_superset_window_equals_full():
    pat = sample_dpp(GAUSS, W10, stream(2, "bary"))
    stat = triangle_count(1.5)
    big = W10.dilate(1.5)
    assert eval_statistic_barycentre(stat, pat, big) == eval_statistic(stat, pat)


def test_barycentre_disjoint_window_is_zero():
    pat = sample_dpp(GAUSS, W10, stream(2, "bary"))
    assert eval_statistic_barycentre(pair_count(1.0), pat, Window((20, 20), (21, 21))) == 0.0


def test_cube_additivity():
    stat = LocalStatistic(weighted, 1.2, p_max=3)
    for i in range(5):
        pat = sample_dpp(GAUSS, W10, stream(3, "add", i))
        cells = W10.cube_partition(2.5)
        parts = [eval_statistic_barycentre(stat, pat, c) for c in cells]
        whole = eval_statistic_barycentre(stat, pat, W10)
        assert math.fsum(parts) == pytest.approx(whole, rel=1e-12, abs=1e-12)


def test_tuple_statistic_p1_and_p2():
    pat = sample_poisson(0.8, W10, stream(4, "t"))
    assert tuple_statistic(lambda s: 1.0, 1, pat, 1.0) == pat.n
    assert tuple_statistic(lambda s: 1.0, 2, pat, 0.7) == eval_statistic(pair_count(0.7), pat)


def test_tuple_statistic_equilateral_triangle():
    pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.25, 0.25 * math.sqrt(3)]])
    assert tuple_statistic(lambda s: 1.0, 3, pts, 0.6) == 1.0
    assert eval_statistic(triangle_count(0.6), pts) == 1.0


def test_symmetrization_identity():
    def asym(s):
        # order-dependent, vanishing beyond tau via the enumeration
        return float(s[0, 0] - 2 * s[-1, 1] + 0.1 * s[0, 1] * s[-1, 0])

    rng = np.random.default_rng(5)
    for p in (1, 2, 3):
        pts = rng.uniform(0, 4, (25, 2))
        lhs = tuple_statistic(asym, p, pts, 1.0)
        rhs = eval_statistic(symmetrize(asym, p, 1.0), pts)
        assert lhs == rhs


def test_resource_guard():
    pts = np.random.default_rng(6).uniform(0, 0.1, (70, 2))
    with pytest.raises(ResourceError):
        eval_statistic(pair_count(1.0), pts)


def test_statistic_names():
    assert statistic_from_name("count").name == "count"
    assert statistic_from_name("pair_count", 0.5).tau == 0.5
    with pytest.raises(DomainError):
        statistic_from_name("pair_count")
    with pytest.raises(DomainError):
        statistic_from_name("nope")


def test_variance_ratio_poisson_count():
    windows = [Window.cube(s) for s in (5.0, 10.0, 15.0)]
    rep = variance_linear_bound_check(
        count_statistic(), lambda w, i: sample_poisson(0.5, w, stream(7, w.volume, i)), windows, 800
    )
    for row in rep["windows"]:
        assert abs(row["ratio"] - 0.5) <= 3 * row["ratio_se"]
    assert rep["bounded"]


def test_variance_ratio_dpp_count_below_poisson():
    windows = [Window.cube(s) for s in (4.0, 6.0, 8.0)]
    rep = variance_linear_bound_check(
        count_statistic(), lambda w, i: sample_dpp(GAUSS, w, stream(8, w.volume, i)), windows, 400
    )
    assert all(row["ratio"] + 3 * row["ratio_se"] < 0.3 for row in rep["windows"])
    assert rep["bounded"]


def test_lowerbound_p1_is_mean_intensity():
    crit = variance_lowerbound_criterion(lambda x: np.ones(len(x)), 1, GAUSS, W10)
    assert crit["value"] == pytest.approx(0.3, rel=1e-12)
    assert crit["certifies"]
    assert crit["operator_norm_proxy"] < 1


def test_lowerbound_p2_matches_mean_pair_count():
    tau = 1.0
    W = Window.cube(6.0)
    crit = variance_lowerbound_criterion(pair_count(tau).pair_kernel, 2, GAUSS, W, tau=tau)
    assert crit["value"] > 0
    # E[pair count] = (1/2) ∫∫ 1{|x-y|<=tau} det K = value |W| / 2
    vals = np.array([
        eval_statistic(pair_count(tau), sample_dpp(GAUSS, W, stream(9, "pc", i), margin=3.0))
        for i in range(3000)
    ])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    expected = crit["value"] * W.volume / 2
    assert abs(vals.mean() - expected) <= 3 * se + 0.01 * expected


def test_lowerbound_zero_function_does_not_certify():
    crit = variance_lowerbound_criterion(lambda x, y: np.zeros(len(x)), 2, GAUSS, Window.cube(4.0), tau=1.0)
    assert crit["value"] == 0.0
    assert not crit["certifies"]
    assert zero_statistic().value(np.array([[0.0, 0.0]])) == 0.0


def test_lowerbound_unsupported_order():
    with pytest.raises(UnsupportedOrderError):
        variance_lowerbound_criterion(lambda *a: 1.0, 3, GAUSS, W10)
