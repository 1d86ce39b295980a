"""Two-step estimation for inhomogeneous DPPs with log-linear intensity.

Step one solves the Poisson-likelihood score ``Σ z(u) - ∫_W z e^{z.β} = 0``
for ``β``. Step two plugs ``ρ_β̂`` into Ripley's K estimator and fits the
correlation parameters ``ψ`` by minimum contrast against
``K_ψ(t) = ∫_{|u|<=t} (1 - C_ψ(u)^2) du``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.spatial import cKDTree

from .errors import ConvergenceError, DesignError, DomainError, NumericError, ParameterError
from .kernels import CorrelationFamily, LogLinear
from .sampler import PointPattern
from .window import Window, unit_ball_volume, unit_sphere_area


@dataclass(frozen=True)
class FitConfig:
    r_l: float = 0.05
    r_u: float = 2.5
    c: float = 0.5
    t_grid: int = 64
    newton_tol: float = 1e-9
    newton_max_iter: int = 100
    family: str = "gaussian"
    psi_bounds: tuple = ((0.05, 5.0),)
    fixed: dict = field(default_factory=dict)  # non-fitted family parameters
    quad_n: int = 48

    def __post_init__(self):
        if not (0 <= self.r_l < self.r_u):
            raise ParameterError("need 0 <= r_l < r_u", r_l=self.r_l, r_u=self.r_u)
        if not self.c > 0:
            raise ParameterError("c must be positive")
        if self.c < 1 and self.r_l <= 0:
            raise ParameterError("r_l must be positive when c < 1")
        if self.t_grid < 2:
            raise ParameterError("t_grid must be at least 2")
        if self.newton_tol <= 0 or self.newton_max_iter < 1:
            raise ParameterError("newton_tol must be positive and newton_max_iter >= 1")
        bounds = tuple(tuple(float(v) for v in b) for b in self.psi_bounds)
        if any(len(b) != 2 or not b[0] < b[1] for b in bounds):
            raise ParameterError("psi_bounds must be (low, high) pairs with low < high")
        object.__setattr__(self, "psi_bounds", bounds)

    @property
    def t_values(self) -> np.ndarray:
        return np.linspace(self.r_l, self.r_u, self.t_grid)

    def to_dict(self):
        return asdict(self)


@dataclass
class FitResult:
    beta_hat: np.ndarray
    psi_hat: np.ndarray
    score_norm_at_solution: float
    contrast_value: float
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["beta_hat"] = [float(v) for v in self.beta_hat]
        out["psi_hat"] = [float(v) for v in self.psi_hat]
        out["diagnostics"] = {
            k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.diagnostics.items()
        }
        return out


# -- step one: intensity score ----------------------------------------------------------


def _gauss_grid(window: Window, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    axes = [(l + u) / 2 + (u - l) / 2 * x for l, u in zip(window.lower, window.upper)]
    wts = [(u - l) / 2 * w for l, u in zip(window.lower, window.upper)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, window.dim)
    weights = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), -1).reshape(-1, window.dim), axis=1)
    return nodes, weights


def _points(pattern) -> np.ndarray:
    return pattern.points if isinstance(pattern, PointPattern) else np.asarray(pattern, float)


def _integrals(z, beta, window, n):
    nodes, w = _gauss_grid(window, n)
    Z = np.atleast_2d(z(nodes))
    rho = np.exp(Z @ beta)
    if not np.all(np.isfinite(rho)):
        raise NumericError("intensity overflow in quadrature", beta=list(map(float, beta)))
    first = Z.T @ (w * rho)
    second = (Z * (w * rho)[:, None]).T @ Z
    return first, second, float(w @ rho)


def score_beta(pattern, z, beta, window: Window | None = None, quad_n: int = 48) -> np.ndarray:
    """``Σ_{u in X} z(u) - ∫_W z(u) exp(z(u).β) du``."""
    window = window or pattern.window
    beta = np.atleast_1d(np.asarray(beta, float))
    pts = _points(pattern)
    obs = np.atleast_2d(z(pts)).sum(axis=0) if len(pts) else np.zeros(beta.size)
    first, _, _ = _integrals(z, beta, window, quad_n)
    coarse, _, _ = _integrals(z, beta, window, max(8, quad_n // 2))
    if not np.allclose(first, coarse, rtol=1e-8, atol=1e-10 * max(1.0, np.abs(first).max())):
        raise NumericError("score quadrature not converged", fine=first.tolist(), coarse=coarse.tolist())
    return obs - first


def solve_beta(pattern, z, beta0, cfg: FitConfig = FitConfig(), window: Window | None = None):
    """Damped Newton on the score with Jacobian ``-∫ z z^T ρ_β``.

    Returns ``(beta_hat, score_norm, iterations)``.
    """
    window = window or pattern.window
    pts = _points(pattern)
    beta = np.atleast_1d(np.asarray(beta0, float)).copy()
    if len(pts) == 0:
        raise ConvergenceError("empty pattern: the score has no finite root", n=0)
    Zobs = np.atleast_2d(z(pts))
    obs = Zobs.sum(axis=0)

    def loglik(b):
        _, _, mass = _integrals(z, b, window, cfg.quad_n)
        return float(obs @ b - mass)

    for it in range(1, cfg.newton_max_iter + 1):
        first, J, mass = _integrals(z, beta, window, cfg.quad_n)
        score = obs - first
        snorm = float(np.linalg.norm(score))
        if snorm <= cfg.newton_tol:
            return beta, snorm, it - 1
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > 1e12:
            raise DesignError("singular design: ∫ z z^T ρ_β is not invertible", condition=float(cond))
        step = np.linalg.solve(J, score)
        ll0 = float(obs @ beta - mass)
        t = 1.0
        # the log-likelihood is concave; halve until it increases
        while t > 1e-10:
            cand = beta + t * step
            try:
                if loglik(cand) >= ll0 - 1e-12 * abs(ll0):
                    break
            except NumericError:
                pass
            t /= 2
        beta = beta + t * step
    first, _, _ = _integrals(z, beta, window, cfg.quad_n)
    snorm = float(np.linalg.norm(obs - first))
    if snorm <= cfg.newton_tol:
        return beta, snorm, cfg.newton_max_iter
    raise ConvergenceError("Newton iteration did not converge", score_norm=snorm,
                           beta=beta.tolist(), iterations=cfg.newton_max_iter)


# -- step two: K function and minimum contrast ----------------------------------------------


def ripley_k_hat(pattern: PointPattern, intensity, t_grid) -> np.ndarray:
    """Translation-corrected ``Σ_{u != v} 1{|u-v| <= t} / (ρ(u) ρ(v) |W ∩ W_{u-v}|)``."""
    window = pattern.window
    t = np.asarray(t_grid, float)
    if t.size == 0:
        return t.copy()
    if np.any(t < 0):
        raise DomainError("t must be non-negative")
    t_max = float(t.max())
    if t_max >= window.sides.min():
        raise DomainError("t_grid must stay below the smallest window side", t_max=t_max)
    pts = pattern.points
    if len(pts) < 2:
        return np.zeros_like(t)
    rho = intensity(pts) if callable(intensity) else np.full(len(pts), float(intensity))
    if np.any(rho <= 0):
        raise DomainError("intensity must be positive at every point")
    pairs = cKDTree(pts).query_pairs(t_max, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros_like(t)
    i, j = pairs.T
    h = pts[i] - pts[j]
    dist = np.linalg.norm(h, axis=1)
    overlap = window.translation_overlap(h)
    if np.any(overlap <= 0):
        raise DomainError("pair with zero translation-correction volume")
    # each unordered pair counts for (u, v) and (v, u)
    w = 2.0 / (rho[i] * rho[j] * overlap)
    order = np.argsort(dist)
    cum = np.concatenate([[0.0], np.cumsum(w[order])])
    return cum[np.searchsorted(dist[order], t, side="right")]


def k_theoretical(fam: CorrelationFamily, t) -> np.ndarray | float:
    """``v_d t^d - s_d ∫_0^t s^(d-1) C(s)^2 ds``."""
    t_arr = np.atleast_1d(np.asarray(t, float))
    if np.any(t_arr < 0):
        raise DomainError("t must be non-negative")
    d = fam.dim

    def integrand(u):
        return t_arr**d * u ** (d - 1) * fam.correlation(t_arr * u) ** 2

    sq, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11)
    out = unit_ball_volume(d) * t_arr**d - unit_sphere_area(d) * sq
    return float(out[0]) if np.ndim(t) == 0 else out


def _family(cfg: FitConfig, psi, dim: int) -> CorrelationFamily:
    names = _fitted_names(cfg)
    params = dict(cfg.fixed)
    params.update({n: float(v) for n, v in zip(names, np.atleast_1d(psi))})
    return CorrelationFamily(cfg.family, params, dim)


def _fitted_names(cfg: FitConfig) -> tuple:
    all_names = {"gaussian": ("alpha",), "cauchy": ("alpha", "nu"), "bessel": ("rho",)}[cfg.family]
    names = tuple(n for n in all_names if n not in cfg.fixed)
    if len(names) != len(cfg.psi_bounds):
        raise ParameterError("psi_bounds must have one entry per fitted parameter", fitted=names)
    return names


def contrast(k_hat, t, fam: CorrelationFamily, c: float) -> float:
    """Trapezoid rule for ``∫ (K̂(t)^c - K_ψ(t)^c)^2 dt`` on the grid ``t``."""
    kt = np.maximum(k_theoretical(fam, t), 0.0)
    diff = np.maximum(np.asarray(k_hat, float), 0.0) ** c - kt**c
    return float(integrate.trapezoid(diff**2, t))


def fit_psi_curve(k_hat, cfg: FitConfig, dim: int = 2, grid_points: int = 25):
    """Minimize the contrast for a given ``K̂`` curve on ``cfg.t_values``.

    One parameter: coarse log-grid scan, then bounded Brent around the best
    grid cell. Several parameters: bounded Nelder-Mead from the best point of
    a coarse grid. Returns ``(psi_hat, contrast_value, on_boundary)``.
    """
    t = cfg.t_values
    names = _fitted_names(cfg)
    bounds = cfg.psi_bounds

    def obj(psi):
        try:
            return contrast(k_hat, t, _family(cfg, psi, dim), cfg.c)
        except ParameterError:
            return np.inf

    if len(names) == 1:
        lo, hi = bounds[0]
        grid = np.geomspace(lo, hi, grid_points) if lo > 0 else np.linspace(lo, hi, grid_points)
        vals = np.array([obj(g) for g in grid])
        k = int(np.argmin(vals))
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(obj, bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-10 * max(1.0, b)})
        psi = np.array([res.x])
        value = float(res.fun)
        if vals[k] < value:
            psi, value = np.array([grid[k]]), float(vals[k])
    else:
        axes = [np.linspace(lo, hi, 7)[1:-1] for lo, hi in bounds]
        starts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(bounds))
        best = min(starts, key=obj)
        res = optimize.minimize(obj, best, method="Nelder-Mead", bounds=bounds,
                                options={"xatol": 1e-8, "fatol": 1e-14, "maxiter": 4000})
        psi = np.asarray(res.x, float)
        value = float(res.fun)
    on_boundary = any(
        min(abs(p - lo), abs(p - hi)) <= 1e-6 * (hi - lo) for p, (lo, hi) in zip(psi, bounds)
    )
    if on_boundary:
        warnings.warn("contrast minimum on the boundary of psi_bounds", RuntimeWarning, stacklevel=2)
    return psi, value, on_boundary


def fit_psi(pattern: PointPattern, beta_hat, z, cfg: FitConfig = FitConfig()):
    """Second step: ``K̂`` with ``ρ_β̂`` plugged in, then minimum contrast."""
    rho = LogLinear(tuple(np.atleast_1d(beta_hat)), z)
    k_hat = ripley_k_hat(pattern, rho, cfg.t_values)
    psi, value, boundary = fit_psi_curve(k_hat, cfg, pattern.window.dim)
    return psi, value, boundary, k_hat


def two_step(pattern: PointPattern, z, cfg: FitConfig = FitConfig(), beta0=None) -> FitResult:
    p = np.atleast_2d(z(pattern.window.centre[None, :])).shape[1]
    if beta0 is None:
        # intercept-only start at the log of the overall density
        beta0 = np.zeros(p)
        if pattern.n:
            beta0[0] = math.log(pattern.n / pattern.window.volume)
    beta_hat, snorm, iters = solve_beta(pattern, z, beta0, cfg)
    psi_hat, value, boundary, k_hat = fit_psi(pattern, beta_hat, z, cfg)
    _, J, _ = _integrals(z, beta_hat, pattern.window, cfg.quad_n)
    return FitResult(
        beta_hat=beta_hat,
        psi_hat=psi_hat,
        score_norm_at_solution=snorm,
        contrast_value=value,
        iterations=iters,
        converged=snorm <= cfg.newton_tol,
        diagnostics={
            "jacobian_condition": float(np.linalg.cond(J)),
            "psi_names": list(_fitted_names(cfg)),
            "psi_on_boundary": boundary,
            "t": cfg.t_values,
            "k_hat": k_hat,
            "n": pattern.n,
        },
    )
