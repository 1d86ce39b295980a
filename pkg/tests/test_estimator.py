import math

import numpy as np
import pytest

from assocpp.errors import ConvergenceError, DesignError, DomainError, ParameterError
from assocpp.estimator import (
    FitConfig,
    contrast,
    fit_psi_curve,
    k_theoretical,
    ripley_k_hat,
    score_beta,
    solve_beta,
    two_step,
)
from assocpp.kernels import AffineCovariates, CorrelationFamily, KernelSpec, LogLinear
from assocpp.sampler import PointPattern, sample_dpp, sample_poisson
from assocpp.streams import stream
from assocpp.window import Window

W10 = Window.cube(10.0)
W20 = Window.cube(20.0)


def const(x):
    return np.ones((len(np.atleast_2d(x)), 1))


@pytest.mark.filterwarnings("ignore:contrast minimum")
def test_homogeneous_closed_form():
    for i in range(5):
        pat = sample_poisson(0.7, W10, stream(0, "hom", i))
        res = two_step(pat, const)
        assert abs(res.beta_hat[0] - math.log(pat.n / W10.volume)) <= 1e-10
        assert res.converged


def test_score_is_unbiased_at_truth():
    L = 10.0
    z = AffineCovariates.intercept_and_x1(L)
    beta = np.array([math.log(0.5), 0.8])
    rho = LogLinear(tuple(beta), z)
    scores = np.array([
        score_beta(sample_poisson(rho, W10, stream(1, "score", i), rho_bound=0.5 * math.exp(0.8)), z, beta)
        for i in range(500)
    ])
    se = scores.std(axis=0, ddof=1) / math.sqrt(len(scores))
    assert np.all(np.abs(scores.mean(axis=0)) <= 3 * se)


def test_solver_from_distant_start():
    z = AffineCovariates.intercept_and_x1(10.0)
    rho = LogLinear((math.log(0.5), 0.8), z)
    pat = sample_poisson(rho, W10, stream(2, "far"), rho_bound=0.5 * math.exp(0.8))
    near, snorm, _ = solve_beta(pat, z, [math.log(0.5), 0.8])
    far, snorm_far, _ = solve_beta(pat, z, [math.log(0.5) + 5, 0.8 - 5])
    assert snorm <= 1e-9 and snorm_far <= 1e-9
    np.testing.assert_allclose(far, near, rtol=1e-8)


def test_empty_pattern_raises():
    empty = PointPattern(np.zeros((0, 2)), W10)
    with pytest.raises(ConvergenceError):
        solve_beta(empty, const, [0.0])


def test_collinear_covariates_raise():
    pat = sample_poisson(0.5, W10, stream(3, "col"))
    z = lambda x: np.column_stack([np.ones(len(x)), 2 * np.ones(len(x))])  # noqa: E731
    with pytest.raises(DesignError):
        solve_beta(pat, z, [0.0, 0.0])


def test_k_hat_poisson_mean_at_one():
    vals = np.array([
        ripley_k_hat(sample_poisson(1.0, W20, stream(4, "k", i)), 1.0, [1.0])[0] for i in range(400)
    ])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - math.pi) <= 3 * se


def test_k_hat_degenerate_inputs():
    one = PointPattern(np.array([[5.0, 5.0]]), W10)
    assert np.all(ripley_k_hat(one, 1.0, [0.5, 1.0]) == 0)
    pat = sample_poisson(1.0, W10, stream(5, "k"))
    with pytest.raises(DomainError):
        ripley_k_hat(pat, 1.0, [10.0])
    k = ripley_k_hat(pat, 1.0, np.linspace(0, 3, 30))
    assert np.all(np.diff(k) >= 0)


def test_k_hat_dpp_below_poisson():
    spec = KernelSpec.gaussian(0.3, 1.0)
    vals = np.array([ripley_k_hat(sample_dpp(spec, W20, stream(6, "kd", i)), 0.3, [0.5])[0]
                     for i in range(100)])
    assert vals.mean() < math.pi * 0.25
    fam = spec.correlation
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - k_theoretical(fam, 0.5)) <= 3 * se


def test_k_theoretical_properties():
    fam = CorrelationFamily("gaussian", {"alpha": 1.0})
    assert k_theoretical(fam, 0.0) == 0.0
    t = np.linspace(0.1, 3, 20)
    k = k_theoretical(fam, t)
    assert np.all(k <= math.pi * t**2)
    assert np.all(np.diff(k) > 0)
    # closed form: pi t^2 - pi alpha^2 (1 - e^{-2 t^2}) / 2
    np.testing.assert_allclose(k, math.pi * t**2 - math.pi / 2 * (1 - np.exp(-2 * t**2)), rtol=1e-10)
    assert k_theoretical(fam, 8.0) - math.pi * 64 == pytest.approx(-math.pi / 2, rel=1e-10)


def test_self_consistency():
    cfg = FitConfig()
    fam = CorrelationFamily("gaussian", {"alpha": 0.7})
    k = k_theoretical(fam, cfg.t_values)
    psi, value, boundary = fit_psi_curve(k, cfg)
    assert psi[0] == pytest.approx(0.7, rel=1e-6)
    assert value < 1e-12 and not boundary


def test_contrast_nonnegative_and_minimal_at_truth():
    cfg = FitConfig()
    t = cfg.t_values
    k = k_theoretical(CorrelationFamily("gaussian", {"alpha": 1.0}), t)
    alphas = np.linspace(0.5, 1.5, 21)
    vals = [contrast(k, t, CorrelationFamily("gaussian", {"alpha": a}), cfg.c) for a in alphas]
    assert min(vals) >= 0
    assert alphas[int(np.argmin(vals))] == pytest.approx(1.0)


def test_boundary_flag():
    cfg = FitConfig(psi_bounds=((0.05, 0.3),))
    k = k_theoretical(CorrelationFamily("gaussian", {"alpha": 1.0}), cfg.t_values)
    with pytest.warns(RuntimeWarning):
        psi, _, boundary = fit_psi_curve(k, cfg)
    assert boundary and psi[0] == pytest.approx(0.3, rel=1e-5)


def test_fit_config_validation():
    with pytest.raises(ParameterError):
        FitConfig(r_l=0.0, c=0.5)
    with pytest.raises(ParameterError):
        FitConfig(r_l=2.0, r_u=1.0)
    with pytest.raises(ParameterError):
        FitConfig(psi_bounds=((1.0, 0.5),))
    FitConfig(r_l=0.0, c=1.0)


def test_two_step_inhomogeneous_run():
    L = 40.0
    z = AffineCovariates.intercept_and_x1(L)
    beta = (math.log(0.18), 0.5)
    spec = KernelSpec(CorrelationFamily("gaussian", {"alpha": 1.0}), LogLinear(beta, z),
                      rho_max=0.18 * math.exp(0.5))
    pat = sample_dpp(spec, Window.cube(L), stream(7, "fit"))
    res = two_step(pat, z)
    assert res.converged
    assert np.all(np.abs(res.beta_hat - beta) < 0.5)
    assert 0.4 < res.psi_hat[0] < 2.0
    d = res.to_dict()
    assert d["diagnostics"]["psi_names"] == ["alpha"] and len(d["diagnostics"]["k_hat"]) == 64
