"""Monte-Carlo checks of the CLT for local statistics of DPPs.

Replicate ``i`` on window ``k`` draws from ``stream(seed, "clt", k, i)``, so
results do not depend on how replicates are spread over workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats as sps

from .errors import DegenerateStatisticError, DomainError, ParameterError
from .functionals import (
    LocalStatistic,
    eval_statistic,
    trend_test,
    variance_lowerbound_criterion,
    variance_se,
)
from .kernels import KernelSpec, log_omega
from .sampler import sample_dpp
from .streams import stream
from .window import Window, boundary_dilation_volume

KS_MAX = 0.05
SKEW_MAX = 0.15
KURT_MAX = 0.3
SLOPE_MARGIN = 0.05
ACCEPTANCE_REPLICATES = 500


@dataclass
class CltExperiment:
    spec: KernelSpec | None
    stat: LocalStatistic
    windows: list
    replicates: int
    seed: int
    margin: float = 0.0
    sampler: Callable | None = None  # (window, rng) -> pattern; defaults to sample_dpp
    conditions_report: dict | None = None
    normality: dict | None = None

    def __post_init__(self):
        if not self.windows:
            raise ParameterError("at least one window is required")
        vols = [w.volume for w in self.windows]
        if any(b <= a for a, b in zip(vols, vols[1:])):
            raise ParameterError("windows must have strictly increasing volume", volumes=vols)
        if self.replicates < 2:
            raise ParameterError("need at least 2 replicates")
        if self.spec is None and self.sampler is None:
            raise ParameterError("either spec or sampler is required")

    @property
    def acceptance_grade(self) -> bool:
        return self.replicates >= ACCEPTANCE_REPLICATES

    def draw(self, k: int, i: int):
        rng = stream(self.seed, "clt", k, i)
        w = self.windows[k]
        if self.sampler is not None:
            return self.sampler(w, rng)
        return sample_dpp(self.spec, w, rng, margin=self.margin, seed_info=f"{self.seed}:clt:{k}:{i}")


# -- conditions -----------------------------------------------------------------------


def omega_slope(spec: KernelSpec, r_min: float = 5.0, r_max: float = 100.0, n: int = 64) -> float:
    """Least-squares slope of ``log omega`` against ``log r`` on ``[r_min, r_max]``."""
    r = np.geomspace(r_min, r_max, n)
    y = log_omega(spec, r)
    return float(np.polyfit(np.log(r), y, 1)[0])


def _f0_order(stat: LocalStatistic):
    if stat.order == 1:
        return lambda x: np.array([stat.value(row[None, :]) for row in x])
    if stat.order == 2:
        if stat.pair_kernel is not None:
            return stat.pair_kernel
        return lambda x, y: np.array([stat.value(np.stack([a, b])) for a, b in zip(x, y)])
    return None


def check_conditions(exp: CltExperiment, nu: float = 0.0) -> dict:
    """(H1) boundary ratio decreasing, (H2) tail slope of omega, (H3) variance
    lower bound. Never raises; each entry is ``pass``, ``fail`` or ``unverified``."""
    report = {}
    r = exp.stat.tau + nu
    ratios = [boundary_dilation_volume(w, r) / w.volume for w in exp.windows]
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    report["H1"] = {
        "status": "pass" if decreasing and len(ratios) > 1 else ("unverified" if len(ratios) == 1 else "fail"),
        "ratios": ratios,
    }
    if exp.spec is None:
        report["H2"] = {"status": "unverified", "reason": "no kernel spec"}
        report["H3"] = {"status": "unverified", "reason": "no kernel spec"}
        exp.conditions_report = report
        return report
    d = exp.spec.dim
    try:
        slope = omega_slope(exp.spec)
        report["H2"] = {
            "status": "pass" if slope < -d / 2 - SLOPE_MARGIN else "fail",
            "slope": slope,
            "max_epsilon": -2 * slope - d,
        }
    except Exception as exc:  # report, never abort
        report["H2"] = {"status": "unverified", "reason": str(exc)}
    f0 = _f0_order(exp.stat)
    if f0 is None:
        report["H3"] = {"status": "unverified", "reason": "criterion implemented for orders 1 and 2"}
    else:
        try:
            crit = variance_lowerbound_criterion(f0, exp.stat.order, exp.spec, exp.windows[0],
                                                 tau=exp.stat.tau if exp.stat.order == 2 else None)
            if crit["certifies"]:
                status = "pass"
            elif crit["value"] <= 0:
                status = "fail"
            else:
                status = "unverified"
            report["H3"] = {"status": status, **crit}
        except Exception as exc:
            report["H3"] = {"status": "unverified", "reason": str(exc)}
    exp.conditions_report = report
    return report


# -- replicates and normality ---------------------------------------------------------------


def replicate_values(exp: CltExperiment, k: int, stats=None, workers: int = 1) -> np.ndarray:
    """``(replicates, len(stats))`` statistic values on window ``k``."""
    stats = stats or [exp.stat]

    def one(i):
        pat = exp.draw(k, i)
        return [eval_statistic(s, pat) for s in stats]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, range(exp.replicates)))
    else:
        rows = [one(i) for i in range(exp.replicates)]
    return np.asarray(rows, float)


def normality_report(values) -> dict:
    """Standardize by sample mean and SD; KS distance to N(0,1), skewness,
    excess kurtosis and QQ pairs."""
    x = np.asarray(values, float)
    sd = float(np.std(x, ddof=1)) if len(x) > 1 else 0.0
    if not sd > 0:
        raise DegenerateStatisticError("statistic has zero sample variance", mean=float(np.mean(x)))
    zs = (x - x.mean()) / sd
    m = len(zs)
    ks = float(sps.kstest(zs, "norm").statistic)
    skew = float(sps.skew(zs))
    kurt = float(sps.kurtosis(zs))
    theo = sps.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    return {
        "m": m,
        "mean": float(x.mean()),
        "sd": sd,
        "ks": ks,
        "skewness": skew,
        "excess_kurtosis": kurt,
        "pass": ks < KS_MAX and abs(skew) < SKEW_MAX and abs(kurt) < KURT_MAX,
        "qq": {"theoretical": theo.tolist(), "sample": np.sort(zs).tolist()},
    }


def run_clt(exp: CltExperiment, stats=None, workers: int = 1, override: bool = False) -> dict:
    """Normality report per window (and per statistic when ``stats`` is given)."""
    if exp.conditions_report is None and not override:
        raise DomainError("run check_conditions first or pass override=True")
    stats = stats or [exp.stat]
    out = {"windows": [], "values": []}
    for k, w in enumerate(exp.windows):
        vals = replicate_values(exp, k, stats, workers)
        entry = {"window": w.to_dict(), "volume": w.volume, "stats": {}}
        for j, s in enumerate(stats):
            entry["stats"][s.name] = normality_report(vals[:, j])
        out["windows"].append(entry)
        out["values"].append(vals)
    exp.normality = out
    return out


def write_replicates_csv(path, result: dict, stats) -> None:
    names = [s.name for s in stats]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "volume", "replicate", *names])
        for k, (entry, vals) in enumerate(zip(result["windows"], result["values"])):
            for i, row in enumerate(vals):
                w.writerow([k, repr(entry["volume"]), i, *(repr(float(v)) for v in row)])


def variance_growth(exp: CltExperiment, values=None, stat_index: int = 0, workers: int = 1,
                    z_crit: float = 1.645) -> dict:
    """Sample variance against ``|W_n|`` with 95% bands.

    Passes when the fitted slope of the variance on ``|W|`` is positive and
    ``σ²/|W|`` has no significant downward trend.
    """
    if len(exp.windows) < 3:
        raise ParameterError("variance_growth needs at least 3 windows")
    rows = []
    for k, w in enumerate(exp.windows):
        v = values[k][:, stat_index] if values is not None else replicate_values(exp, k, None, workers)[:, 0]
        var, se = variance_se(v)
        rows.append({"volume": w.volume, "variance": var, "variance_se": se,
                     "lower": var - 1.96 * se, "upper": var + 1.96 * se,
                     "ratio": var / w.volume, "ratio_se": se / w.volume})
    vols = np.array([r["volume"] for r in rows])
    var = np.array([r["variance"] for r in rows])
    degenerate = bool(np.all(var == 0))
    if degenerate:
        return {"rows": rows, "degenerate": True, "pass": False, "slope": 0.0, "ratio_trend": None}
    slope = float(np.polyfit(vols, var, 1)[0])
    ratio_trend = trend_test(vols, [r["ratio"] for r in rows],
                             [max(r["ratio_se"], 1e-300) for r in rows])
    return {
        "rows": rows,
        "degenerate": False,
        "slope": slope,
        "ratio_trend": ratio_trend,
        "pass": slope > 0 and ratio_trend["z"] >= -z_crit,
    }


def square_windows(sides, d: int = 2) -> list:
    return [Window.cube(float(s), d) for s in sides]


def ks_sanity_bound(m: int) -> float:
    """``1.36 / sqrt(m) + 0.02``, the classical-CLT benchmark used for Poisson counts."""
    return 1.36 / math.sqrt(m) + 0.02


__all__ = [
    "CltExperiment",
    "check_conditions",
    "run_clt",
    "variance_growth",
    "normality_report",
    "replicate_values",
    "omega_slope",
    "write_replicates_csv",
    "square_windows",
    "ks_sanity_bound",
]
