"""Determinant-based DPP quantities and the matrix inequalities behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericError, OperatorValidityError
from .kernels import KernelSpec
from .window import Window

MATRIX_PSD_TOL = 1e-9
OPERATOR_TOL = 1e-6
DEFAULT_GRID_N = 24


# -- quadrature ---------------------------------------------------------------


def midpoint_grid(window: Window, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell centres and cell volumes of an ``n``-per-axis tensor grid."""
    axes = [l + (np.arange(n) + 0.5) * (u - l) / n for l, u in zip(window.lower, window.upper)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, window.dim)
    weights = np.full(nodes.shape[0], window.volume / n**window.dim)
    return nodes, weights


def _pair_sum(func, xa, wa, xb, wb, chunk=2_000_000):
    """``sum_ij wa_i wb_j func(xa_i, xb_j)`` evaluated in blocks."""
    total = 0.0
    rows = max(1, chunk // max(1, len(xb)))
    for s in range(0, len(xa), rows):
        block = func(xa[s : s + rows], xb)
        total += float(wa[s : s + rows] @ block @ wb)
    return total


def _richardson_done(history, rtol):
    """``(value, error)`` once successive extrapolations agree to ``rtol``.

    Midpoint errors are ``O(h^2)``, so ``(4 I_h - I_2h) / 3`` removes the
    leading term. The error estimate is the change between the last two
    extrapolated values, or the raw midpoint difference with only two levels.
    """
    if len(history) < 2:
        return None
    ext = [(4 * b - a) / 3 for a, b in zip(history, history[1:])]
    err = abs(ext[-1] - ext[-2]) if len(ext) > 1 else abs(history[-1] - history[-2]) / 3
    if err <= rtol * abs(ext[-1]) or err < 1e-15:
        return ext[-1], err
    return None


def richardson_pair_integral(func, A: Window, B: Window, rtol=1e-4, n0=8, n_max=64):
    """``∫_A ∫_B func(x, y) dy dx`` by midpoint grids with Richardson steps.

    ``func(xs, ys)`` must return the matrix of values over all pairs.
    Returns ``(value, error_estimate, n)``; raises NumericError when the
    estimated relative error stays above ``rtol``.
    """
    n = n0
    history = []
    while n <= n_max:
        xa, wa = midpoint_grid(A, n)
        xb, wb = midpoint_grid(B, n)
        history.append(_pair_sum(func, xa, wa, xb, wb))
        done = _richardson_done(history, rtol)
        if done is not None:
            return done[0], done[1], n
        n *= 2
    raise NumericError(
        "pair integral did not reach the requested tolerance",
        history=history,
        rtol=rtol,
    )


def richardson_integral(func, A: Window, rtol=1e-4, n0=8, n_max=512):
    """``∫_A func(x) dx`` by midpoint grids with Richardson steps."""
    n = n0
    history = []
    while n <= n_max:
        x, w = midpoint_grid(A, n)
        history.append(float(w @ func(x)))
        done = _richardson_done(history, rtol)
        if done is not None:
            return done[0], done[1], n
        n *= 2
    raise NumericError("integral did not reach the requested tolerance", history=history)


# -- n-th order intensities -----------------------------------------------------


@dataclass(frozen=True)
class KernelMatrix:
    points: np.ndarray
    entries: np.ndarray

    @classmethod
    def build(cls, spec: KernelSpec, points) -> KernelMatrix:
        pts = np.atleast_2d(np.asarray(points, float))
        return cls(pts, spec.kernel_matrix(pts))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def leading_minors(self) -> np.ndarray:
        return np.array([np.linalg.det(self.entries[:k, :k]) for k in range(1, len(self.points) + 1)])


def intensity_n(spec: KernelSpec, x) -> float:
    """``rho_n(x_1..x_n) = det K[x]`` (clamped at 0 for round-off)."""
    x = np.atleast_2d(np.asarray(x, float))
    if len(x) > 1:
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        iu = np.triu_indices(len(x), 1)
        if np.any(dist[iu] == 0):
            raise DomainError("intensity_n needs pairwise distinct points")
    det = float(np.linalg.det(spec.kernel_matrix(x)))
    if det < 0:
        if det < -MATRIX_PSD_TOL:
            raise NumericError("kernel matrix determinant is significantly negative", det=det)
        det = 0.0
    return det


def d_function(spec: KernelSpec, x, y) -> float:
    """``D(x,y) = rho_2(x,y) - rho(x) rho(y) = -|K(x,y)|^2``."""
    return -float(spec.kernel(x, y)[0]) ** 2


def kernel_sq_integral(spec: KernelSpec, A: Window, B: Window, rtol=1e-4) -> tuple[float, float]:
    """``∫_{A x B} |K(x,y)|^2 dx dy``."""
    value, err, _ = richardson_pair_integral(
        lambda xs, ys: spec.cross_kernel(xs, ys) ** 2, A, B, rtol=rtol
    )
    return value, err


def count_covariance(spec: KernelSpec, A: Window, B: Window, rtol=1e-4) -> float:
    """``Cov(N(A), N(B)) = ∫_{A x B} D + ∫_{A ∩ B} rho``.

    The diagonal term vanishes for disjoint sets; it is what turns ``A = B``
    into ``Var N(A) = ∫_A rho - ∬ |K|^2``.
    """
    sq, _ = kernel_sq_integral(spec, A, B, rtol=rtol)
    overlap = A.intersection(B)
    diag = 0.0
    if overlap is not None:
        if spec.homogeneous:
            diag = spec.intensity.rho * overlap.volume
        else:
            diag, _, _ = richardson_integral(spec.intensity, overlap, rtol=rtol * 1e-2)
    return diag - sq


# -- discretized operator / Fredholm determinants ---------------------------------


@dataclass
class DiscretizedOperator:
    """Nyström discretization ``W^(1/2) K W^(1/2)`` of the kernel on a union of boxes."""

    windows: tuple
    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    grid_n: int

    @property
    def operator_norm(self) -> float:
        return float(self.eigenvalues[-1]) if self.eigenvalues.size else 0.0

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def fredholm_det(self) -> float:
        """``det(Id - K_A)``, the void probability of the union."""
        lam = np.clip(self.eigenvalues, 0.0, 1.0)
        return float(np.clip(np.prod(1.0 - lam), 0.0, 1.0))


def discretize(spec: KernelSpec, windows, grid_n: int = DEFAULT_GRID_N, check=True):
    if isinstance(windows, Window):
        windows = (windows,)
    windows = tuple(windows)
    if grid_n < 8:
        raise DomainError("grid_n must be at least 8 per axis")
    for i, a in enumerate(windows):
        for b in windows[i + 1 :]:
            if not a.is_disjoint(b):
                raise DomainError("windows of a union must be disjoint")
    parts = [midpoint_grid(w, grid_n) for w in windows]
    nodes = np.concatenate([p[0] for p in parts])
    weights = np.concatenate([p[1] for p in parts])
    sw = np.sqrt(weights)
    matrix = sw[:, None] * spec.kernel_matrix(nodes) * sw[None, :]
    eig = np.linalg.eigvalsh(matrix)
    if check and (eig[-1] > 1 + OPERATOR_TOL or eig[0] < -OPERATOR_TOL):
        raise OperatorValidityError(
            "discretized operator has eigenvalues outside [0, 1]",
            max_eigenvalue=float(eig[-1]),
            min_eigenvalue=float(eig[0]),
            grid_n=grid_n,
        )
    return DiscretizedOperator(windows, nodes, weights, matrix, eig, grid_n)


def void_probability(spec: KernelSpec, A, grid_n: int = DEFAULT_GRID_N) -> float:
    """``P(N(A) = 0)`` for a box or a tuple of disjoint boxes."""
    return discretize(spec, A, grid_n).fredholm_det()


def operator_norm_proxy(spec: KernelSpec, windows, grid_n: int = DEFAULT_GRID_N) -> float:
    """Largest Nyström eigenvalue on the given boxes."""
    return discretize(spec, windows, grid_n).operator_norm


# -- matrix inequalities -----------------------------------------------------------


def _check_psd(M, name):
    M = np.asarray(M, float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"{name} must be a square matrix")
    if not np.allclose(M, M.T, atol=1e-12, rtol=0):
        raise DomainError(f"{name} must be symmetric")
    if M.size:
        scale = max(1.0, float(np.max(np.abs(M))))
        if np.linalg.eigvalsh(M)[0] < -MATRIX_PSD_TOL * scale:
            raise DomainError(f"{name} is not positive semidefinite")
    return M


def det_split_gap(M1, M2, N) -> tuple[float, float]:
    """Gap ``det(M1) det(M2) - det(M)`` and its bound ``k(n-k) Tr(N^T N) ||M||_inf^(n-2)``
    for ``M = [[M1, N], [N^T, M2]]``."""
    M1 = np.atleast_2d(np.asarray(M1, float))
    M2 = np.atleast_2d(np.asarray(M2, float))
    N = np.asarray(N, float).reshape(M1.shape[0], M2.shape[0])
    M = np.block([[M1, N], [N.T, M2]])
    _check_psd(M, "M")
    k = M1.shape[0]
    n = M.shape[0]
    gap = np.linalg.det(M1) * np.linalg.det(M2) - np.linalg.det(M)
    bound = k * (n - k) * np.trace(N.T @ N) * np.max(np.abs(M)) ** (n - 2)
    return float(gap), float(bound)


def det_trace_lower(M, N) -> tuple[float, float]:
    """``det(Id - MN)`` and ``1 - Tr(MN)`` for ``0 <= M <= N^-1``."""
    M = _check_psd(M, "M")
    N = _check_psd(N, "N")
    w, V = np.linalg.eigh(N)
    root = (V * np.sqrt(np.clip(w, 0, None))) @ V.T
    inner = np.linalg.eigvalsh(root @ M @ root)
    if inner.size and inner[-1] > 1 + 1e-10:
        raise DomainError("precondition M <= N^-1 violated", max_eigenvalue=float(inner[-1]))
    MN = M @ N
    lhs = np.linalg.det(np.eye(len(M)) - MN)
    rhs = 1.0 - np.trace(MN)
    return float(lhs), float(rhs)


def exp_moment_bound(spec: KernelSpec, A: Window, n: int) -> float:
    """Upper bound ``exp((2^n - 1) ||K||_inf |A|)`` on ``E[2^(n N(A))]``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return math.exp((2**n - 1) * spec.sup_kernel * A.volume)


def random_psd(rng, n: int, rank: int | None = None, scale: float = 1.0) -> np.ndarray:
    """Random PSD matrix ``G G^T`` with Gaussian ``G`` (test helper)."""
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank)) * scale
    return G @ G.T


def hadamard_bound(spec: KernelSpec, x: Sequence) -> float:
    """Product of the diagonal of ``K[x]``, an upper bound on ``det K[x]``."""
    return float(np.prod(spec.intensity(np.atleast_2d(x))))
