"""Randomized suites for the determinant inequalities and the exponential moment bound."""

from __future__ import annotations

import math

import numpy as np

from .dpp_core import det_split_gap, det_trace_lower, exp_moment_bound, random_psd
from .kernels import KernelSpec
from .sampler import sample_dpp
from .streams import stream
from .window import Window


def _rel(violation: float, *scale: float) -> float:
    return max(violation, 0.0) / max(1.0, *(abs(s) for s in scale))


def split_gap_suite(rng, instances: int = 1000, sizes=(2, 8), tol: float = 1e-10) -> dict:
    """``0 <= gap <= bound`` on random PSD block matrices."""
    worst = 0.0
    failures = 0
    for _ in range(instances):
        n = int(rng.integers(sizes[0], sizes[1] + 1))
        k = int(rng.integers(1, n))
        rank = int(rng.integers(1, n + 1))
        M = random_psd(rng, n, rank, scale=1.0 / math.sqrt(n))
        gap, bound = det_split_gap(M[:k, :k], M[k:, k:], M[:k, k:])
        v = max(_rel(-gap, gap, bound), _rel(gap - bound, gap, bound))
        worst = max(worst, v)
        failures += v > tol
    return {"instances": instances, "failures": int(failures), "max_relative_violation": worst,
            "pass": failures == 0}


def trace_lower_suite(rng, instances: int = 1000, sizes=(2, 8), tol: float = 1e-10) -> dict:
    """``det(Id - MN) >= 1 - Tr(MN)`` with ``M = N^-1/2 P N^-1/2`` and ``0 <= P <= Id``."""
    worst = 0.0
    failures = 0
    for _ in range(instances):
        n = int(rng.integers(sizes[0], sizes[1] + 1))
        N = random_psd(rng, n, scale=1.0 / math.sqrt(n)) + 0.05 * np.eye(n)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        P = (Q * rng.uniform(0, 1, n) ** 2) @ Q.T
        w, V = np.linalg.eigh(N)
        inv_root = (V / np.sqrt(w)) @ V.T
        M = inv_root @ P @ inv_root
        M = (M + M.T) / 2
        N = (N + N.T) / 2
        lhs, rhs = det_trace_lower(M, N)
        v = _rel(rhs - lhs, lhs, rhs)
        worst = max(worst, v)
        failures += v > tol
    return {"instances": instances, "failures": int(failures), "max_relative_violation": worst,
            "pass": failures == 0}


def moment_mc(spec: KernelSpec, A: Window, n: int, replicates: int, master_seed: int,
              margin: float = 3.0) -> dict:
    """MC mean of ``2^(n N(A))`` with its SE against ``exp((2^n - 1) ||K|| |A|)``."""
    vals = np.empty(replicates)
    for i in range(replicates):
        pat = sample_dpp(spec, A, stream(master_seed, "moment", n, i), margin=margin)
        vals[i] = 2.0 ** (n * pat.n)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(replicates))
    bound = exp_moment_bound(spec, A, n)
    return {"n": n, "mean": mean, "se": se, "bound": bound, "pass": mean <= bound + 3 * se}
