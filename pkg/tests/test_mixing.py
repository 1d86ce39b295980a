import math

import numpy as np
import pytest
from scipy import integrate

from assocpp.errors import DomainError
from assocpp.kernels import KernelSpec, omega
from assocpp.mixing import (
    CappedCount,
    alpha_lower_void,
    alpha_upper_p_inf,
    alpha_upper_pq,
    analytic_count_covariance,
    covariance_inequality_check,
    empirical_void_alpha,
    mc_void_alpha,
    mixing_report,
    random_capped_count,
    separated_boxes,
    void_difference,
)
from assocpp.sampler import sample_dpp
from assocpp.streams import stream
from assocpp.window import Window

GAUSS = KernelSpec.gaussian(0.3, 1.0)
A = Window((0, 0), (1, 1))
B = Window((2, 0), (3, 1))


def test_upper_pq_closed_form():
    # omega(1)^2 = rho^2 e^{-2}
    assert alpha_upper_pq(GAUSS, 2, 3, 1.0) == pytest.approx(6 * 0.09 * math.exp(-2), rel=1e-14)
    with pytest.raises(DomainError):
        alpha_upper_pq(GAUSS, 0, 1, 1.0)


def test_upper_p_inf_against_direct_quadrature():
    r, p = 1.5, 2.0
    oracle, _ = integrate.quad(lambda t: 0.09 * math.exp(-2 * t * t) * t, r, np.inf)
    assert alpha_upper_p_inf(GAUSS, p, r) == pytest.approx(p * 2 * math.pi * oracle, rel=1e-8)
    # closed form: p 2 pi rho^2 e^{-2 r^2} / 4
    assert alpha_upper_p_inf(GAUSS, p, r) == pytest.approx(p * 2 * math.pi * 0.09 * math.exp(-2 * r * r) / 4,
                                                           rel=1e-8)


def test_upper_bounds_vanish_with_distance():
    rs = [0.5, 1, 2, 4, 8]
    vals = [alpha_upper_pq(GAUSS, 1, 1, r) for r in rs]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-40


def test_sandwich():
    low = alpha_lower_void(GAUSS, A, B, 1, 1, grid_n=24)
    emp = empirical_void_alpha(GAUSS, A, B, grid_n=24)
    up = alpha_upper_pq(GAUSS, 1, 1, A.distance(B))
    assert 0 < low <= emp * 1.05
    assert emp <= up * 1.05


def test_void_difference_nonnegative_and_decreasing():
    vals = [void_difference(GAUSS, *separated_boxes(r, 1, 1), grid_n=24) for r in (0.25, 0.5, 1.0, 2.0)]
    assert all(v >= 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_short_range_kernel_has_no_dependence():
    spec = KernelSpec.gaussian(0.3, 0.02)
    assert empirical_void_alpha(spec, A, B, grid_n=16) < 1e-15
    assert alpha_upper_pq(spec, 1, 1, 1.0) == 0.0


def test_lower_bound_preconditions():
    with pytest.raises(DomainError):
        alpha_lower_void(KernelSpec.bessel(0.5), A, B, 1, 1)  # signed kernel
    with pytest.raises(DomainError):
        alpha_lower_void(GAUSS, A, Window((0.5, 0), (1.5, 1)), 1, 1)
    with pytest.raises(DomainError):
        alpha_lower_void(GAUSS, A, B, 0.5, 1)


def test_lower_bound_prefactor_decreases_in_p_q():
    _, small = alpha_lower_void(GAUSS, A, B, 1, 1, grid_n=16, return_details=True)
    _, big = alpha_lower_void(GAUSS, A, B, 5, 5, grid_n=16, return_details=True)
    assert 0 < big["prefactor"] < small["prefactor"] <= 1
    assert small["operator_norm"] < 1


def test_mixing_report_columns():
    rep = mixing_report(GAUSS, [0.5, 1.0, 2.0], grid_n=16)
    keys, rows = rep.rows()
    assert len(rows) == 3 and "upper_pq" in keys
    for lo, emp, up in zip(rep.lower_vals, rep.empirical_vals, rep.upper_pq):
        assert lo <= emp * 1.05 and emp <= up * 1.05
    assert rep.diagnostics["operator_norm_proxy"] < 1
    rep_b = mixing_report(KernelSpec.bessel(0.5), [1.0], grid_n=16)
    assert math.isnan(rep_b.lower_vals[0]) and "lower_bound" in rep_b.diagnostics


def test_mc_void_alpha_matches_fredholm():
    A2, B2 = separated_boxes(0.25, 1, 1)
    est, se = mc_void_alpha(GAUSS, A2, B2, 6000, master_seed=3)
    assert abs(est - void_difference(GAUSS, A2, B2, grid_n=24)) <= 3 * se + 1e-4


def test_capped_count_seminorm():
    f = CappedCount(A, cap=2, scale=1.5, sign=-1)
    counts = np.array([0, 1, 2, 5])
    np.testing.assert_array_equal(f(counts), [-0.0, -1.5, -3.0, -3.0])
    assert np.max(np.abs(np.diff(f(np.arange(10))))) <= f.seminorm
    v = CappedCount(A, cap=0, void=True)
    np.testing.assert_array_equal(v(counts), [1, 0, 0, 0])
    assert v.seminorm == 1.0


def test_covariance_inequality_small_run():
    rng = np.random.default_rng(0)
    box = Window((0, 0), (3, 1))
    pats = [sample_dpp(GAUSS, box, stream(4, "cov", i), margin=3.0) for i in range(2000)]
    pairs = [(random_capped_count(rng, A), random_capped_count(rng, B)) for _ in range(5)]
    rows = covariance_inequality_check(pats, A, B, pairs, analytic_count_covariance(GAUSS, A, B))
    assert all(r["ok"] for r in rows)
    assert all(r["bound"] > 0 for r in rows)
