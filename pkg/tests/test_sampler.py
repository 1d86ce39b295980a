import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

from assocpp.dpp_core import count_covariance
from assocpp.errors import DomainError, OperatorValidityError, ParameterError
from assocpp.functionals import variance_se
from assocpp.kernels import AffineCovariates, CorrelationFamily, Homogeneous, KernelSpec, LogLinear
from assocpp.sampler import (
    PointPattern,
    box_spectrum,
    sample_dpp,
    sample_poisson,
    sample_stationary,
    spec_hash,
    thin_inhomogeneous,
)
from assocpp.streams import stream
from assocpp.window import Window

W10 = Window.cube(10.0)
GAUSS = KernelSpec.gaussian(0.3, 1.0)


def test_tiny_intensity_gives_empty_patterns():
    spec = KernelSpec.gaussian(1e-6, 1.0)
    ns = [sample_stationary(spec, W10, stream(0, "tiny", i)).n for i in range(100)]
    assert sum(ns) <= 1


def test_mean_count_matches_intensity():
    ns = np.array([sample_stationary(GAUSS, W10, stream(1, "mean", i)).n for i in range(500)])
    se = ns.std(ddof=1) / math.sqrt(len(ns))
    assert abs(ns.mean() - 0.3 * W10.volume) <= 3 * se


def test_count_variance_matches_quadrature():
    W = Window.cube(5.0)
    ns = np.array([sample_dpp(GAUSS, W, stream(2, "var", i), margin=3.0).n for i in range(2000)])
    var, se = variance_se(ns)
    oracle = count_covariance(GAUSS, W, W)
    assert abs(var - oracle) <= 3 * se
    assert var < ns.mean()  # underdispersion


def test_patterns_inside_window_and_distinct():
    for margin in (0.0, 2.0):
        pat = sample_dpp(GAUSS, W10, stream(3, "inside"), margin=margin)
        assert np.all(W10.contains(pat.points))
        assert len(np.unique(pat.points, axis=0)) == pat.n


def test_determinism():
    a = sample_dpp(GAUSS, W10, stream(4, "det", 7))
    b = sample_dpp(GAUSS, W10, stream(4, "det", 7))
    c = sample_dpp(GAUSS, W10, stream(4, "det", 8))
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_spectrum_capture_and_warning():
    spec = box_spectrum(GAUSS, W10)
    assert spec.captured >= 0.999
    assert np.all((spec.eigenvalues > 0) & (spec.eigenvalues <= 1))
    pat = sample_stationary(GAUSS, Window.cube(30.0), stream(5, "trunc"), truncation=1)
    assert pat.meta["truncation_warning"]
    assert pat.meta["truncation"] == 1


def test_bessel_spectrum_is_projection():
    spec = KernelSpec.bessel(0.5)
    sp = box_spectrum(spec, W10)
    assert np.all(sp.eigenvalues == 1.0)
    # N(W) on the torus equals the number of modes in the ball
    n = {sample_stationary(spec, W10, stream(6, "b", i)).n for i in range(5)}
    assert n == {len(sp.eigenvalues)}


def test_eigenvalue_above_one_is_rejected():
    fam = CorrelationFamily("gaussian", {"alpha": 1.0})
    stub = SimpleNamespace(homogeneous=True, intensity=Homogeneous(1.0), correlation=fam)
    with pytest.raises(OperatorValidityError):
        box_spectrum(stub, W10)


def test_truncation_must_be_positive():
    with pytest.raises(ParameterError):
        box_spectrum(GAUSS, W10, truncation=0)


def _loglinear(beta, L=10.0, rho_max=0.3):
    z = AffineCovariates.intercept_and_x1(L)
    return KernelSpec(CorrelationFamily("gaussian", {"alpha": 1.0}), LogLinear(beta, z), rho_max)


def test_identity_thinning():
    spec = _loglinear((math.log(0.3), 0.0))
    base = sample_stationary(GAUSS, W10, stream(7, "id"))
    thinned = thin_inhomogeneous(base, spec, stream(7, "thin"))
    assert np.array_equal(base.points, thinned.points)


def test_half_thinning_halves_mean():
    spec = _loglinear((math.log(0.15), 0.0))
    ns = np.array([sample_dpp(spec, W10, stream(8, "half", i)).n for i in range(400)])
    se = ns.std(ddof=1) / math.sqrt(len(ns))
    assert abs(ns.mean() - 0.15 * W10.volume) <= 3 * se


def test_left_right_intensity():
    beta = (math.log(0.3) - 1.0, 1.0)
    spec = _loglinear(beta)
    left, right = Window((0, 0), (5, 10)), Window((5, 0), (10, 10))
    counts = np.array([
        [p.count(left), p.count(right)]
        for p in (sample_dpp(spec, W10, stream(9, "lr", i)) for i in range(500))
    ])
    # ∫ exp(b0 + b1 x/10) dx dy over each half
    b0, b1 = beta

    def expect(a, b):
        return 10 * math.exp(b0) * 10 / b1 * (math.exp(b1 * b / 10) - math.exp(b1 * a / 10))

    for k, (a, b) in enumerate([(0, 5), (5, 10)]):
        se = counts[:, k].std(ddof=1) / math.sqrt(len(counts))
        assert abs(counts[:, k].mean() - expect(a, b)) <= 3 * se


def test_thinning_rejects_retention_above_one():
    spec = _loglinear((math.log(0.3), 0.0))
    pat = PointPattern(np.array([[1.0, 1.0]]), W10)
    bad = SimpleNamespace(intensity=lambda x: np.full(len(np.atleast_2d(x)), 0.5), rho_max=0.3)
    with pytest.raises(DomainError):
        thin_inhomogeneous(pat, bad, stream(0, "x"))
    assert thin_inhomogeneous(pat, spec, stream(0, "x")).n == 1


def test_sample_dpp_checks_intensity_bound():
    spec = _loglinear((math.log(0.3), 0.5))
    with pytest.raises(DomainError):
        sample_dpp(spec, W10, stream(0, "x"))


def test_poisson_baseline():
    assert sample_poisson(0.0, W10, stream(0, "p")).n == 0
    ns = np.array([sample_poisson(1.0, W10, stream(10, "p", i)).n for i in range(1000)])
    se = ns.std(ddof=1) / math.sqrt(len(ns))
    assert abs(ns.mean() - 100) <= 3 * se
    assert ns.var(ddof=1) == pytest.approx(100, rel=0.15)
    with pytest.raises(ParameterError):
        sample_poisson(lambda x: np.ones(len(x)), W10, stream(0, "p"))


def test_poisson_functional_intensity():
    rho = lambda x: 2.0 * x[:, 0] / 10  # noqa: E731
    ns = np.array([sample_poisson(rho, W10, stream(12, "pf", i), rho_bound=2.0).n for i in range(800)])
    se = ns.std(ddof=1) / math.sqrt(len(ns))
    assert abs(ns.mean() - 100) <= 3 * se


def test_csv_roundtrip(tmp_path):
    pat = sample_dpp(GAUSS, W10, stream(13, "csv"), seed_info="13:csv")
    path = tmp_path / "pattern.csv"
    pat.write(path, GAUSS)
    back = PointPattern.read(path)
    assert np.array_equal(back.points, pat.points)
    assert back.window == W10
    side = json.loads(path.with_suffix(".json").read_text())
    assert side["n"] == pat.n and side["seed"] == "13:csv"
    assert side["spec_hash"] == spec_hash(GAUSS)
    assert path.read_text().splitlines()[0] == "x1,x2"
    assert len(path.read_text().splitlines()) == pat.n + 1
