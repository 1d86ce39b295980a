"""Local statistics ``f(X) = sum_{S ⊂ X} f0(S)`` with a diameter cutoff.

Subsets are enumerated exactly: ``diam(S) <= tau`` means every pair in
``S`` is within ``tau``, so the admissible subsets are the cliques of the
``tau``-neighbour graph. Sums use :func:`math.fsum`, so the result does not
depend on enumeration order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .dpp_core import midpoint_grid, operator_norm_proxy
from .errors import DomainError, ResourceError, UnsupportedOrderError
from .kernels import KernelSpec
from .sampler import PointPattern
from .window import Window, boundary_dilation_volume  # noqa: F401

MAX_BALL_POINTS = 64


@dataclass(frozen=True)
class LocalStatistic:
    """``f0`` maps a ``(k, d)`` array of points to a float.

    ``order`` is set when ``f0`` is supported on sets of exactly that size,
    and ``pair_kernel`` optionally gives a vectorized two-point version
    ``g(x, y)`` (rows) used by the variance lower-bound quadrature.
    """

    f0: Callable
    tau: float
    p_max: int = 3
    bound_f0: float = math.inf
    name: str = "custom"
    order: int | None = None
    nonnegative: bool = False
    pair_kernel: Callable | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise DomainError("tau must be positive")
        if self.p_max < 1:
            raise DomainError("p_max must be >= 1")

    def value(self, pts: np.ndarray) -> float:
        """``f0`` with the size and diameter cutoffs enforced."""
        k = len(pts)
        if k == 0 or k > self.p_max:
            return 0.0
        if k > 1 and diameter(pts) > self.tau:
            return 0.0
        return float(self.f0(pts))


def diameter(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


# -- named statistics --------------------------------------------------------


def count_statistic(tau: float = 1.0) -> LocalStatistic:
    return LocalStatistic(lambda s: 1.0, tau, p_max=1, bound_f0=1.0, name="count", order=1,
                          nonnegative=True)


def pair_count(tau: float) -> LocalStatistic:
    def pair_kernel(x, y):
        return (np.linalg.norm(x - y, axis=-1) <= tau).astype(float)

    return LocalStatistic(lambda s: 1.0 if len(s) == 2 else 0.0, tau, p_max=2, bound_f0=1.0,
                          name=f"pair_count({tau:g})", order=2, nonnegative=True,
                          pair_kernel=pair_kernel)


def triangle_count(tau: float) -> LocalStatistic:
    return LocalStatistic(lambda s: 1.0 if len(s) == 3 else 0.0, tau, p_max=3, bound_f0=1.0,
                          name=f"triangle_count({tau:g})", order=3, nonnegative=True)


def zero_statistic(tau: float = 1.0) -> LocalStatistic:
    return LocalStatistic(lambda s: 0.0, tau, p_max=1, bound_f0=0.0, name="zero", order=1,
                          nonnegative=True)


def statistic_from_name(name: str, tau: float | None = None) -> LocalStatistic:
    if name == "count":
        return count_statistic(tau or 1.0)
    if name in ("pair_count", "triangle_count"):
        if tau is None:
            raise DomainError(f"{name} needs tau")
        return pair_count(tau) if name == "pair_count" else triangle_count(tau)
    raise DomainError(f"unknown statistic {name!r}")


# -- enumeration -------------------------------------------------------------------


def close_subsets(points: np.ndarray, tau: float, p_max: int):
    """Yield index tuples ``i_1 < ... < i_k`` (``1 <= k <= p_max``) of
    subsets with diameter ``<= tau``."""
    n = len(points)
    if n == 0:
        return
    if p_max >= 2:
        pairs = cKDTree(points).query_pairs(tau, output_type="ndarray")
    else:
        pairs = np.zeros((0, 2), int)
    higher = [[] for _ in range(n)]
    for i, j in pairs:
        higher[i].append(j)
    deg = np.bincount(pairs.ravel(), minlength=n) if len(pairs) else np.zeros(n, int)
    if deg.max(initial=0) + 1 > MAX_BALL_POINTS:
        raise ResourceError(
            "too many points within tau of a single point",
            max_ball_points=int(deg.max() + 1),
            limit=MAX_BALL_POINTS,
        )
    higher = [sorted(h) for h in higher]
    nbr = [set(h) for h in higher]

    def extend(clique, candidates):
        yield clique
        if len(clique) == p_max:
            return
        for c in candidates:
            yield from extend(clique + (c,), [x for x in candidates if x > c and x in nbr[c]])

    for i in range(n):
        yield from extend((i,), higher[i])


def eval_statistic(stat: LocalStatistic, pattern: PointPattern | np.ndarray) -> float:
    pts = pattern.points if isinstance(pattern, PointPattern) else np.atleast_2d(pattern)
    if pts.size == 0:
        return 0.0
    return math.fsum(stat.value(pts[list(s)]) for s in close_subsets(pts, stat.tau, stat.p_max))


def eval_statistic_barycentre(stat: LocalStatistic, pattern, window: Window) -> float:
    """Sum restricted to subsets whose barycentre lies in ``window``."""
    pts = pattern.points if isinstance(pattern, PointPattern) else np.atleast_2d(pattern)
    if pts.size == 0:
        return 0.0
    terms = []
    for s in close_subsets(pts, stat.tau, stat.p_max):
        sub = pts[list(s)]
        if window.contains(sub.mean(axis=0))[0]:
            terms.append(stat.value(sub))
    return math.fsum(terms)


def brute_force_statistic(stat: LocalStatistic, pts: np.ndarray) -> float:
    """Full ``2^n`` subset enumeration (oracle for small patterns)."""
    pts = np.atleast_2d(pts)
    terms = []
    for k in range(1, len(pts) + 1):
        for s in itertools.combinations(range(len(pts)), k):
            terms.append(stat.value(pts[list(s)]))
    return math.fsum(terms)


def tuple_statistic(f0_p: Callable, p: int, pattern, tau: float) -> float:
    """``(1/p!) sum over ordered distinct p-tuples of f0_p``.

    ``f0_p`` takes a ``(p, d)`` array and must vanish when two of its points
    are further apart than ``tau``; only such tuples are visited.
    """
    pts = pattern.points if isinstance(pattern, PointPattern) else np.atleast_2d(pattern)
    if pts.size == 0 or len(pts) < p:
        return 0.0
    # grouped by underlying set so rounding matches the symmetrized set form
    scale = math.factorial(p)
    terms = []
    for s in close_subsets(pts, tau, p):
        if len(s) != p:
            continue
        terms.append(math.fsum(float(f0_p(pts[list(perm)])) for perm in itertools.permutations(s)) / scale)
    return math.fsum(terms)


def symmetrize(f0_p: Callable, p: int, tau: float) -> LocalStatistic:
    """Set function ``S -> (1/p!) sum_sigma f0_p(sigma(S))`` on ``|S| = p``."""

    def sym(s):
        if len(s) != p:
            return 0.0
        vals = [float(f0_p(s[list(perm)])) for perm in itertools.permutations(range(p))]
        return math.fsum(vals) / math.factorial(p)

    return LocalStatistic(sym, tau, p_max=p, name="symmetrized", order=p)


# -- variance machinery --------------------------------------------------------------


def variance_se(values: np.ndarray) -> tuple[float, float]:
    """Sample variance and its standard error ``s^2 sqrt(2/(m-1) + kappa/m)``."""
    values = np.asarray(values, float)
    m = len(values)
    var = float(np.var(values, ddof=1))
    kurt = float(stats.kurtosis(values)) if var > 0 else 0.0
    se = var * math.sqrt(max(2.0 / (m - 1) + kurt / m, 0.0))
    return var, se


def trend_test(x, y, se) -> dict:
    """Weighted least-squares slope of ``y`` on ``x`` and its z-score."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = 1.0 / np.maximum(np.asarray(se, float), 1e-300) ** 2
    xm = np.sum(w * x) / w.sum()
    ym = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    slope_se = float(1.0 / math.sqrt(sxx))
    return {"slope": slope, "slope_se": slope_se, "z": slope / slope_se}


def variance_linear_bound_check(stat: LocalStatistic, sample, windows, replicates: int,
                                z_crit: float = 1.645) -> dict:
    """Monte-Carlo ``Var f(X ∩ W) / |W|`` over windows.

    ``sample(window, replicate)`` returns a pattern on ``window``. The ratio
    sequence passes when its weighted regression slope on ``|W|`` is not
    significantly positive (one-sided, ``z <= z_crit``).
    """
    rows = []
    for w in windows:
        vals = np.array([eval_statistic(stat, sample(w, i)) for i in range(replicates)])
        var, se = variance_se(vals)
        rows.append({"volume": w.volume, "mean": float(vals.mean()), "variance": var,
                     "variance_se": se, "ratio": var / w.volume, "ratio_se": se / w.volume})
    vols = [r["volume"] for r in rows]
    ratios = [r["ratio"] for r in rows]
    trend = trend_test(vols, ratios, [r["ratio_se"] for r in rows])
    return {
        "windows": rows,
        "sup_ratio": max(ratios),
        "trend": trend,
        "bounded": trend["z"] <= z_crit,
    }


def variance_lowerbound_criterion(f0_p: Callable, p: int, spec: KernelSpec, window: Window,
                                  tau: float | None = None, grid_n: int | None = None,
                                  norm_grid_n: int = 24) -> dict:
    """``(1/|W|) ∫_{W^p} f0_p(x) det K[x] dx`` for ``p <= 2``.

    For ``p = 1``, ``f0_p(x)`` is evaluated on rows; for ``p = 2`` it is
    ``f0_p(x, y)`` on paired rows. When ``tau`` is given, ``f0_p`` is assumed
    to vanish for ``|x - y| > tau`` and only such pairs of grid cells are
    visited. Also returns the Nyström operator-norm proxy on ``W``; the
    criterion certifies a variance lower bound only when it is below 1.
    """
    if p not in (1, 2):
        raise UnsupportedOrderError(f"order p={p} not supported (p <= 2)")
    d = window.dim
    if p == 1:
        n = grid_n or 64
        x, w = midpoint_grid(window, n)
        integral = float(w @ (np.asarray(f0_p(x), float) * spec.intensity(x)))
    else:
        if grid_n is None:
            h = (tau / 8) if tau is not None else window.sides.min() / 40
            n = int(min(max(8, math.ceil(window.sides.max() / h)), 400))
        else:
            n = grid_n
        x, w = midpoint_grid(window, n)
        rho = spec.intensity(x)
        integral = 0.0
        if tau is None:
            for s in range(0, len(x), 256):
                xs = x[s : s + 256]
                k = spec.cross_kernel(xs, x)
                det = rho[s : s + 256, None] * rho[None, :] - k**2
                xi = np.repeat(xs, len(x), axis=0)
                yj = np.tile(x, (len(xs), 1))
                vals = np.asarray(f0_p(xi, yj), float).reshape(len(xs), len(x))
                integral += float(w[s : s + 256] @ (vals * det) @ w)
        else:
            tree = cKDTree(x)
            pairs = tree.query_pairs(tau * (1 + 1e-12), output_type="ndarray")
            for s in range(0, len(pairs), 1_000_000):
                i, j = pairs[s : s + 1_000_000].T
                det = rho[i] * rho[j] - spec.kernel(x[i], x[j]) ** 2
                vals = np.asarray(f0_p(x[i], x[j]), float) + np.asarray(f0_p(x[j], x[i]), float)
                integral += float(np.sum(w[i] * w[j] * vals * det))
            # diagonal cells: det K[x, x] = 0
    norm = operator_norm_proxy(spec, window, norm_grid_n)
    value = integral / window.volume
    return {
        "value": value,
        "operator_norm_proxy": norm,
        "spectral_bound": spec.rho_max * spec.correlation.spectral_sup,
        "certifies": bool(value > 0 and norm < 1),
        "grid_n": n,
        "dim": d,
    }

