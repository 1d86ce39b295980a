"""Parametric DPP kernels.

Every shipped family is isotropic, so correlations are evaluated on
distances. Parameterizations (``d`` is the dimension):

* ``gaussian``:  ``C(u) = exp(-|u/alpha|^2)``,
  ``Ĉ(ξ) = (sqrt(pi) alpha)^d exp(-pi^2 alpha^2 |ξ|^2)``.
* ``cauchy``:    ``C(u) = (1 + |u/alpha|^2)^(-nu)`` with ``nu > d/2``,
  ``Ĉ(ξ) = 2^(1-m) (sqrt(pi) alpha)^d z^m K_m(z) / Gamma(nu)`` where
  ``m = nu - d/2`` and ``z = 2 pi alpha |ξ|``.
* ``bessel``:    the most repulsive stationary DPP of intensity ``rho``,
  ``K(r) = sqrt(rho Gamma(d/2+1)) / pi^(d/4) * J_{d/2}(a r) / r^(d/2)`` with
  ``a = 2 sqrt(pi) Gamma(d/2+1)^(1/d) rho^(1/d)``. Its transform is the
  indicator of the ball of volume ``rho``; ``C = K / rho``.

Fourier transforms use the unitary convention ``∫ C(u) exp(-2 pi i ξ.u) du``,
so a spec exists when ``rho_max * Ĉ <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import DomainError, ExistenceError, ParameterError
from .window import Window, unit_sphere_area

FAMILIES = ("gaussian", "cauchy", "bessel")
EXISTENCE_TOL = 1e-12


@dataclass(frozen=True)
class CorrelationFamily:
    family: str
    params: dict = field(default_factory=dict)
    dim: int = 2

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        if fam not in FAMILIES:
            raise ParameterError(f"unknown correlation family {self.family!r}")
        if self.dim < 1:
            raise ParameterError("dimension must be a positive integer")
        required = {"gaussian": {"alpha"}, "cauchy": {"alpha", "nu"}, "bessel": {"rho"}}[fam]
        if set(self.params) != required:
            raise ParameterError(
                f"{fam} needs parameters {sorted(required)}, got {sorted(self.params)}"
            )
        for name, value in self.params.items():
            if not value > 0 or not math.isfinite(value):
                raise ParameterError(f"{fam} parameter {name} must be positive, got {value}")
        if fam == "cauchy" and self.params["nu"] <= self.dim / 2:
            raise ParameterError("cauchy needs nu > d/2 for an integrable correlation")

    @property
    def psi(self) -> np.ndarray:
        return np.array([self.params[k] for k in self.param_names])

    @property
    def param_names(self) -> tuple:
        return {"gaussian": ("alpha",), "cauchy": ("alpha", "nu"), "bessel": ("rho",)}[self.family]

    def with_psi(self, psi) -> CorrelationFamily:
        return CorrelationFamily(self.family, dict(zip(self.param_names, np.atleast_1d(psi))), self.dim)

    @property
    def nonnegative(self) -> bool:
        return self.family != "bessel"

    # -- bessel constants --------------------------------------------------
    def _bessel_consts(self):
        d = self.dim
        rho = self.params["rho"]
        g = math.gamma(d / 2 + 1)
        amp = math.sqrt(rho * g) / math.pi ** (d / 4)
        rate = 2 * math.sqrt(math.pi) * g ** (1 / d) * rho ** (1 / d)
        return rho, amp, rate

    def bessel_kernel(self, r) -> np.ndarray:
        """Unnormalized most-repulsive kernel ``K(r)``; ``K(0) = rho``."""
        rho, amp, rate = self._bessel_consts()
        r = np.asarray(r, float)
        nu = self.dim / 2
        out = np.empty_like(r)
        small = r * rate < 1e-4
        rs = r[~small]
        out[~small] = amp * special.jv(nu, rate * rs) / rs**nu
        # J_nu(z)/r^nu ~ (rate/2)^nu / Gamma(nu+1) * (1 - z^2 / (4 (nu+1)))
        z = rate * r[small]
        out[small] = amp * (rate / 2) ** nu / math.gamma(nu + 1) * (1 - z**2 / (4 * (nu + 1)))
        return out

    # -- correlation -------------------------------------------------------
    def correlation(self, r) -> np.ndarray:
        """``C(r)`` at distances ``r`` (array-valued)."""
        r = np.abs(np.asarray(r, float))
        if self.family == "gaussian":
            return np.exp(-((r / self.params["alpha"]) ** 2))
        if self.family == "cauchy":
            return (1 + (r / self.params["alpha"]) ** 2) ** (-self.params["nu"])
        return self.bessel_kernel(r) / self.params["rho"]

    def log_abs_envelope(self, r) -> np.ndarray:
        """Log of a nonincreasing envelope of ``|C|`` on ``[r, inf)``.

        Exact ``log|C|`` for the monotone families. For the Bessel family
        the envelope is the Hankel modulus ``sqrt(J^2 + Y^2)``, which is
        nonincreasing for order >= 1/2 and dominates ``|J|``; it is capped
        at 1 (= C(0)).
        """
        r = np.abs(np.asarray(r, float))
        if self.family == "gaussian":
            return -((r / self.params["alpha"]) ** 2)
        if self.family == "cauchy":
            return -self.params["nu"] * np.log1p((r / self.params["alpha"]) ** 2)
        rho, amp, rate = self._bessel_consts()
        nu = self.dim / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            z = rate * r
            modulus = np.hypot(special.jv(nu, z), special.yv(nu, z))
            log_env = np.log(amp / rho) + np.log(modulus) - nu * np.log(r)
        return np.minimum(0.0, np.where(r > 0, log_env, 0.0))

    # -- spectral ----------------------------------------------------------
    def spectral(self, xi_norm) -> np.ndarray:
        """Fourier transform ``Ĉ`` of the normalized correlation at ``|ξ|``."""
        k = np.abs(np.asarray(xi_norm, float))
        d = self.dim
        if self.family == "gaussian":
            a = self.params["alpha"]
            return (math.sqrt(math.pi) * a) ** d * np.exp(-((math.pi * a * k) ** 2))
        if self.family == "cauchy":
            a, nu = self.params["alpha"], self.params["nu"]
            m = nu - d / 2
            scale = (math.sqrt(math.pi) * a) ** d / math.gamma(nu)
            z = 2 * math.pi * a * k
            out = np.empty_like(z)
            pos = z > 0
            out[pos] = scale * 2 ** (1 - m) * z[pos] ** m * special.kv(m, z[pos])
            out[~pos] = scale * math.gamma(m)
            return out
        rho = self.params["rho"]
        return np.where(k <= self.bessel_radius, 1.0 / rho, 0.0)

    @property
    def bessel_radius(self) -> float:
        """Radius of the frequency ball supporting the Bessel spectrum."""
        d = self.dim
        return (self.params["rho"] * math.gamma(d / 2 + 1)) ** (1 / d) / math.sqrt(math.pi)

    @property
    def spectral_sup(self) -> float:
        return float(self.spectral(np.zeros(1))[0])

    @property
    def range_scale(self) -> float:
        """Characteristic length, used for default integration ranges."""
        if self.family == "bessel":
            return 1.0 / self._bessel_consts()[2] * 2 * math.pi
        return self.params["alpha"]

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params), "dim": self.dim}


def eval_correlation(fam: CorrelationFamily, u) -> np.ndarray | float:
    """``C(u)`` at a point ``u`` (or rows of points)."""
    u = np.asarray(u, float)
    if u.ndim == 0:
        return float(fam.correlation(np.abs(u)))
    r = np.linalg.norm(np.atleast_2d(u), axis=-1)
    out = fam.correlation(r)
    return float(out[0]) if u.ndim == 1 else out


# -- intensity models -------------------------------------------------------


@dataclass(frozen=True)
class Homogeneous:
    rho: float

    def __post_init__(self):
        if not self.rho >= 0:
            raise ParameterError("rho must be non-negative")

    def __call__(self, x) -> np.ndarray:
        return np.full(np.atleast_2d(x).shape[0], float(self.rho))

    def to_dict(self):
        return {"type": "homogeneous", "rho": self.rho}


@dataclass(frozen=True)
class AffineCovariates:
    """Covariates ``z(x) = offset + x @ linear.T`` (``p`` outputs)."""

    offset: tuple
    linear: tuple

    def __post_init__(self):
        off = np.atleast_1d(np.asarray(self.offset, float))
        lin = np.atleast_2d(np.asarray(self.linear, float))
        if lin.shape[0] != off.size:
            raise ParameterError("linear must have one row per covariate")
        object.__setattr__(self, "offset", tuple(off))
        object.__setattr__(self, "linear", tuple(map(tuple, lin)))

    @classmethod
    def intercept_and_x1(cls, L: float, d: int = 2):
        """``z(x) = (1, x_1 / L)``."""
        lin = np.zeros((2, d))
        lin[1, 0] = 1.0 / L
        return cls((1.0, 0.0), lin)

    @property
    def p(self) -> int:
        return len(self.offset)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        return np.asarray(self.offset) + x @ np.asarray(self.linear).T

    def to_dict(self):
        return {"offset": list(self.offset), "linear": [list(r) for r in self.linear]}


@dataclass(frozen=True)
class LogLinear:
    """``rho_beta(x) = exp(z(x) . beta)``."""

    beta: tuple
    covariate: Callable

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(np.atleast_1d(np.asarray(self.beta, float))))

    def __call__(self, x) -> np.ndarray:
        return np.exp(self.covariate(x) @ np.asarray(self.beta))

    def to_dict(self):
        cov = self.covariate.to_dict() if hasattr(self.covariate, "to_dict") else repr(self.covariate)
        return {"type": "loglinear", "beta": list(self.beta), "covariate": cov}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel ``K(x,y) = sqrt(rho(x)) C(y-x) sqrt(rho(y))``.

    Construction enforces existence: ``rho_max * sup Ĉ <= 1``.
    """

    correlation: CorrelationFamily
    intensity: Homogeneous | LogLinear
    rho_max: float | None = None

    def __post_init__(self):
        if self.rho_max is None:
            if not isinstance(self.intensity, Homogeneous):
                raise ParameterError("rho_max is required for inhomogeneous intensities")
            object.__setattr__(self, "rho_max", float(self.intensity.rho))
        if not self.rho_max >= 0:
            raise ParameterError("rho_max must be non-negative")
        if isinstance(self.intensity, Homogeneous) and self.intensity.rho > self.rho_max * (1 + 1e-12):
            raise ParameterError("homogeneous rho exceeds rho_max")
        sup = self.rho_max * self.correlation.spectral_sup
        if sup > 1 + EXISTENCE_TOL:
            raise ExistenceError(
                f"rho_max * sup spectral density = {sup:.6g} > 1; no DPP with this kernel",
                rho_max=self.rho_max,
                spectral_sup=self.correlation.spectral_sup,
            )

    @classmethod
    def gaussian(cls, rho, alpha, d=2):
        return cls(CorrelationFamily("gaussian", {"alpha": alpha}, d), Homogeneous(rho))

    @classmethod
    def cauchy(cls, rho, alpha, nu, d=2):
        return cls(CorrelationFamily("cauchy", {"alpha": alpha, "nu": nu}, d), Homogeneous(rho))

    @classmethod
    def bessel(cls, rho, d=2):
        return cls(CorrelationFamily("bessel", {"rho": rho}, d), Homogeneous(rho))

    @property
    def dim(self) -> int:
        return self.correlation.dim

    @property
    def homogeneous(self) -> bool:
        return isinstance(self.intensity, Homogeneous)

    @property
    def sup_kernel(self) -> float:
        """``||K||_inf``; bounded by ``rho_max`` since ``|C| <= 1``."""
        return float(self.rho_max)

    def intensity_at(self, x) -> np.ndarray:
        return self.intensity(x)

    def kernel(self, x, y) -> np.ndarray:
        """``K(x_i, y_i)`` for paired rows of ``x`` and ``y``."""
        x = np.atleast_2d(np.asarray(x, float))
        y = np.atleast_2d(np.asarray(y, float))
        r = np.linalg.norm(y - x, axis=-1)
        return np.sqrt(self.intensity(x) * self.intensity(y)) * self.correlation.correlation(r)

    def kernel_matrix(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        diff = x[:, None, :] - x[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        s = np.sqrt(self.intensity(x))
        # s_i s_j is one commutative product, so the matrix is exactly symmetric
        return np.outer(s, s) * self.correlation.correlation(r)

    def cross_kernel(self, x, y) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        y = np.atleast_2d(np.asarray(y, float))
        diff = x[:, None, :] - y[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        return np.sqrt(self.intensity(x))[:, None] * self.correlation.correlation(r) * np.sqrt(
            self.intensity(y)
        )[None, :]

    def check_intensity(self, window: Window, n: int = 64) -> float:
        """Max of ``rho(x)`` on a grid over ``window`` (plus corners); raises
        if it exceeds ``rho_max``."""
        axes = [np.linspace(l, u, n) for l, u in zip(window.lower, window.upper)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, window.dim)
        top = float(np.max(self.intensity(grid)))
        if top > self.rho_max * (1 + 1e-12):
            raise DomainError(
                f"intensity reaches {top:.6g} > rho_max={self.rho_max:.6g} on the window",
                max_intensity=top,
            )
        return top

    def to_dict(self):
        return {
            "correlation": self.correlation.to_dict(),
            "intensity": self.intensity.to_dict(),
            "rho_max": self.rho_max,
        }


def omega(spec: KernelSpec, r) -> np.ndarray | float:
    """``sup_{|x-y| >= r} |K(x,y)|``, via ``rho_max`` times the envelope of ``|C|``."""
    r_arr = np.asarray(r, float)
    if np.any(r_arr < 0):
        raise ParameterError("r must be non-negative")
    out = spec.rho_max * np.exp(spec.correlation.log_abs_envelope(r_arr))
    return float(out) if np.ndim(r) == 0 else out


def log_omega(spec: KernelSpec, r) -> np.ndarray:
    return math.log(spec.rho_max) + spec.correlation.log_abs_envelope(np.asarray(r, float))


def spectral_density(spec: KernelSpec, xi) -> np.ndarray | float:
    """``rho_max * Ĉ(ξ)`` for a frequency vector (or rows of vectors)."""
    xi = np.asarray(xi, float)
    if xi.ndim == 0:
        return float(spec.rho_max * spec.correlation.spectral(np.abs(xi)))
    k = np.linalg.norm(np.atleast_2d(xi), axis=-1)
    out = spec.rho_max * spec.correlation.spectral(k)
    return float(out[0]) if xi.ndim == 1 else out


def tail_integral(spec: KernelSpec, r: float, power: int = 2) -> tuple[float, float]:
    """``∫_r^inf t^(d-1) omega(t)^power dt`` and its quadrature error estimate."""
    d = spec.dim

    def f(t):
        return t ** (d - 1) * omega(spec, t) ** power

    # finite panels of growing width, then the far tail
    scale = spec.correlation.range_scale
    edges = [r] + [r + scale * k for k in (1, 4, 16, 64, 256)]
    val = err = 0.0
    for a, b in zip(edges, edges[1:]):
        v, e = integrate.quad(f, a, b, limit=500, epsabs=0.0, epsrel=1e-10)
        val, err = val + v, err + e
    v, e = integrate.quad(f, edges[-1], np.inf, limit=500)
    return float(val + v), float(err + e)


def radial_integral(fam: CorrelationFamily, func, upper=np.inf):
    """``s_d ∫_0^upper t^(d-1) func(C(t)) dt`` by adaptive quadrature."""
    d = fam.dim
    val, err = integrate.quad(
        lambda t: t ** (d - 1) * func(fam.correlation(np.array([t]))[0]), 0.0, upper, limit=500
    )
    return unit_sphere_area(d) * val, unit_sphere_area(d) * err
