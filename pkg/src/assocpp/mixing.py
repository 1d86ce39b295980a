"""Alpha-mixing bounds for DPPs and their void-probability lower bound."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dpp_core import (
    DEFAULT_GRID_N,
    count_covariance,
    discretize,
    kernel_sq_integral,
    void_probability,
)
from .errors import DomainError, NumericError
from .kernels import KernelSpec, omega, tail_integral
from .sampler import sample_dpp
from .streams import stream
from .window import Window, unit_sphere_area


def alpha_upper_pq(spec: KernelSpec, p: float, q: float, r: float) -> float:
    """``p q omega(r)^2``."""
    if p <= 0 or q <= 0 or r < 0:
        raise DomainError("need p, q > 0 and r >= 0")
    return p * q * omega(spec, r) ** 2


def alpha_upper_p_inf(spec: KernelSpec, p: float, r: float, rtol: float = 1e-6) -> float:
    """``p s_d ∫_r^inf omega(t)^2 t^(d-1) dt``."""
    if p <= 0 or r < 0:
        raise DomainError("need p > 0 and r >= 0")
    val, err = tail_integral(spec, r)
    if not math.isfinite(val) or err > max(rtol * abs(val), 1e-14):
        raise NumericError("tail integral of omega^2 did not converge", value=val, error=err)
    return p * unit_sphere_area(spec.dim) * val


def _check_pair(spec, A, B, p, q):
    if not A.is_disjoint(B):
        raise DomainError("A and B must be disjoint")
    # the alpha coefficient is a sup over |A| <= p, |B| <= q
    if A.volume > p * (1 + 1e-12) or B.volume > q * (1 + 1e-12):
        raise DomainError("need |A| <= p and |B| <= q", vol_a=A.volume, vol_b=B.volume)


def alpha_lower_void(spec: KernelSpec, A: Window, B: Window, p: float, q: float,
                     grid_n: int = DEFAULT_GRID_N, return_details: bool = False):
    """``(1 - ||K||)^((p+q) ||K||_inf / ||K||) * ∫_{A x B} |K|^2``.

    ``||K||`` is the largest Nyström eigenvalue on ``A ∪ B``; the kernel must
    be nonnegative and the norm below 1.
    """
    _check_pair(spec, A, B, p, q)
    if not spec.correlation.nonnegative:
        raise DomainError("the void lower bound needs a nonnegative kernel")
    norm = discretize(spec, (A, B), grid_n).operator_norm
    if norm >= 1:
        raise DomainError("operator norm proxy must be < 1", operator_norm=norm)
    sq, sq_err = kernel_sq_integral(spec, A, B)
    if norm <= 0:
        prefactor = 1.0
    else:
        prefactor = (1 - norm) ** ((p + q) * spec.sup_kernel / norm)
    value = prefactor * sq
    if return_details:
        return value, {"operator_norm": norm, "grid_n": grid_n, "prefactor": prefactor,
                       "kernel_sq_integral": sq, "kernel_sq_error": sq_err}
    return value


def void_difference(spec: KernelSpec, A: Window, B: Window, grid_n: int = DEFAULT_GRID_N) -> float:
    """Signed ``P(N(A)=0) P(N(B)=0) - P(N(A ∪ B)=0)``; nonnegative under NA."""
    pa = void_probability(spec, A, grid_n)
    pb = void_probability(spec, B, grid_n)
    pab = void_probability(spec, (A, B), grid_n)
    return pa * pb - pab


def empirical_void_alpha(spec: KernelSpec, A: Window, B: Window,
                         grid_n: int = DEFAULT_GRID_N) -> float:
    """``|P(N(A)=0) P(N(B)=0) - P(N(A ∪ B)=0)|`` from Fredholm determinants."""
    if not A.is_disjoint(B):
        raise DomainError("A and B must be disjoint")
    return abs(void_difference(spec, A, B, grid_n))


def mc_void_alpha(spec: KernelSpec, A: Window, B: Window, replicates: int, master_seed: int,
                  margin: float = 3.0) -> tuple[float, float]:
    """Monte-Carlo estimate of the void-event dependence and its standard error."""
    box = Window(tuple(np.minimum(A.lo, B.lo)), tuple(np.maximum(A.hi, B.hi)))
    va = np.empty(replicates)
    vb = np.empty(replicates)
    for i in range(replicates):
        pat = sample_dpp(spec, box, stream(master_seed, "mixing", i), margin=margin)
        va[i] = pat.count(A) == 0
        vb[i] = pat.count(B) == 0
    cov = np.mean(va * vb) - va.mean() * vb.mean()
    # delta-method SE of the covariance of two indicators
    terms = (va - va.mean()) * (vb - vb.mean())
    se = float(np.std(terms, ddof=1) / math.sqrt(replicates))
    return float(-cov), se


@dataclass
class MixingReport:
    r_grid: list
    omega_vals: list
    upper_pq: list
    upper_p_inf: list
    lower_vals: list
    empirical_vals: list
    empirical_se: list
    params: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def rows(self):
        keys = ["r_grid", "omega_vals", "upper_pq", "upper_p_inf", "lower_vals",
                "empirical_vals", "empirical_se"]
        return keys, list(zip(*(getattr(self, k) for k in keys)))


def separated_boxes(r: float, p: float, q: float, d: int = 2) -> tuple[Window, Window]:
    """Boxes of volumes ``p`` and ``q`` (unit cross-section) at distance ``r``
    along the first axis."""
    lo = (0.0,) * d
    A = Window(lo, (p,) + (1.0,) * (d - 1))
    B = Window((p + r,) + (0.0,) * (d - 1), (p + r + q,) + (1.0,) * (d - 1))
    return A, B


def mixing_report(spec: KernelSpec, r_grid, p: float = 1.0, q: float = 1.0,
                  grid_n: int = DEFAULT_GRID_N, mc_replicates: int = 0,
                  master_seed: int | None = None) -> MixingReport:
    """Upper bounds, void lower bound and void-event dependence along ``r_grid``.

    The lower bound is only defined for nonnegative kernels with operator
    norm below 1; otherwise those entries are NaN and the reason is recorded.
    """
    r_grid = [float(r) for r in r_grid]
    om, upq, upinf, low, emp, emp_se = [], [], [], [], [], []
    notes = {}
    norms = []
    for r in r_grid:
        A, B = separated_boxes(r, p, q, spec.dim)
        om.append(float(omega(spec, r)))
        upq.append(alpha_upper_pq(spec, p, q, r))
        upinf.append(alpha_upper_p_inf(spec, p, r) if r > 0 else float("nan"))
        try:
            lv, det = alpha_lower_void(spec, A, B, p, q, grid_n, return_details=True)
            norms.append(det["operator_norm"])
        except DomainError as exc:
            lv = float("nan")
            notes["lower_bound"] = str(exc)
        low.append(lv)
        if mc_replicates:
            if master_seed is None:
                raise DomainError("master_seed is required for Monte-Carlo estimates")
            e, se = mc_void_alpha(spec, A, B, mc_replicates, master_seed)
        else:
            e, se = empirical_void_alpha(spec, A, B, grid_n), float("nan")
        emp.append(e)
        emp_se.append(se)
    diagnostics = {
        "grid_n": grid_n,
        "operator_norm_proxy": max(norms) if norms else None,
        "empirical_method": "monte_carlo" if mc_replicates else "fredholm",
        **notes,
    }
    return MixingReport(r_grid, om, upq, upinf, low, emp, emp_se, {"p": p, "q": q}, diagnostics)


# -- covariance inequality check ----------------------------------------------------


@dataclass(frozen=True)
class CappedCount:
    """``sign * scale * min(N(sub), cap)`` or a void indicator of ``sub``.

    Adding one point changes either functional by at most ``scale``, so the
    seminorm ``||f||_A`` of the functional on any ``A ⊇ sub`` is ``scale``.
    """

    sub: Window
    cap: int
    scale: float = 1.0
    sign: int = 1
    void: bool = False

    def __call__(self, counts: np.ndarray) -> np.ndarray:
        if self.void:
            base = (counts == 0).astype(float)
        else:
            base = np.minimum(counts, self.cap).astype(float)
        return self.sign * self.scale * base

    @property
    def seminorm(self) -> float:
        return abs(self.scale) if (self.void or self.cap >= 1) else 0.0


def random_capped_count(rng, window: Window) -> CappedCount:
    lo = window.lo + rng.random(window.dim) * window.sides * 0.5
    hi = lo + (window.hi - lo) * (0.5 + 0.5 * rng.random(window.dim))
    return CappedCount(
        Window(tuple(lo), tuple(hi)),
        cap=int(rng.integers(1, 5)),
        scale=float(rng.uniform(0.5, 2.0)),
        sign=int(rng.choice([-1, 1])),
        void=bool(rng.random() < 0.25),
    )


def covariance_inequality_check(patterns, A: Window, B: Window, pairs, count_cov: float,
                                n_se: float = 3.0) -> list[dict]:
    """For each ``(f, g)``: MC ``|Cov(f, g)|`` against ``||f|| ||g|| |Cov(N(A), N(B))|``."""
    rows = []
    for f, g in pairs:
        fv = f(np.array([p.count(f.sub) for p in patterns]))
        gv = g(np.array([p.count(g.sub) for p in patterns]))
        m = len(fv)
        terms = (fv - fv.mean()) * (gv - gv.mean())
        cov = float(terms.sum() / (m - 1))
        se = float(np.std(terms, ddof=1) / math.sqrt(m))
        bound = f.seminorm * g.seminorm * abs(count_cov)
        rows.append({"cov": cov, "se": se, "bound": bound, "ok": abs(cov) <= bound + n_se * se})
    return rows


def analytic_count_covariance(spec: KernelSpec, A: Window, B: Window) -> float:
    return count_covariance(spec, A, B)
