"""Simulation of DPPs on boxes and of Poisson baselines.

Stationary DPPs are simulated with the spectral method: on a box ``W`` with
sides ``L`` the kernel is replaced by its periodization, whose eigenfunctions
are the Fourier modes ``exp(2 pi i k.x / L)`` with eigenvalues
``rho * Ĉ(k / L)``. Modes are kept independently with these probabilities
and the resulting projection DPP is sampled point by point.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, OperatorValidityError, ParameterError, ResourceError
from .kernels import Homogeneous, KernelSpec
from .window import Window

MAX_REJECTIONS = 1_000_000
DEFAULT_CAPTURE = 0.999
WARN_CAPTURE = 0.99


@dataclass
class PointPattern:
    points: np.ndarray
    window: Window
    seed_info: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, float).reshape(-1, self.window.dim)

    @property
    def n(self) -> int:
        return len(self.points)

    def __len__(self):
        return self.n

    def restrict(self, window: Window) -> PointPattern:
        keep = window.contains(self.points) if self.n else np.zeros(0, bool)
        return PointPattern(self.points[keep], window, self.seed_info, dict(self.meta))

    def count(self, window: Window) -> int:
        return int(window.contains(self.points).sum()) if self.n else 0

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.window.dim)])
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])

    def write(self, csv_path, spec: KernelSpec | None = None):
        """CSV of coordinates plus a ``.json`` sidecar next to it."""
        csv_path = Path(csv_path)
        self.write_csv(csv_path)
        sidecar = {
            "window": self.window.to_dict(),
            "seed": self.seed_info,
            "n": self.n,
            "spec_hash": spec_hash(spec) if spec is not None else None,
            "meta": _jsonable(self.meta),
        }
        csv_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))

    @classmethod
    def read(cls, csv_path, window: Window | None = None) -> PointPattern:
        csv_path = Path(csv_path)
        side = csv_path.with_suffix(".json")
        seed = ""
        if side.exists():
            info = json.loads(side.read_text())
            window = window or Window.from_dict(info["window"])
            seed = info.get("seed", "")
        if window is None:
            raise ParameterError("pattern window unknown: pass it or provide the JSON sidecar")
        with csv_path.open() as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header != [f"x{i + 1}" for i in range(window.dim)]:
            raise ParameterError(f"unexpected CSV header {header}")
        pts = np.array([[float(v) for v in r] for r in body], float).reshape(-1, window.dim)
        return cls(pts, window, seed)


def spec_hash(spec: KernelSpec) -> str:
    blob = json.dumps(spec.to_dict(), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


# -- spectral decomposition on a box -------------------------------------------------


@dataclass
class Spectrum:
    modes: np.ndarray  # integer frequency indices, shape (m, d)
    eigenvalues: np.ndarray
    truncation: int
    captured: float  # fraction of rho |W| carried by the kept modes


def _mode_grid(T: int, d: int) -> np.ndarray:
    ax = np.arange(-T, T + 1)
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), -1).reshape(-1, d)


def box_spectrum(spec: KernelSpec, window: Window, truncation: int | None = None,
                 capture: float = DEFAULT_CAPTURE, t_max: int = 256) -> Spectrum:
    """Eigenvalues ``rho Ĉ(k/L)`` of the periodized kernel for ``|k|_inf <= T``.

    With ``truncation=None`` the smallest ``T`` whose modes carry at least
    ``capture`` of the total mass ``rho |W|`` is used (or the whole support
    for compactly supported spectra).
    """
    if not spec.homogeneous:
        raise ParameterError("spectral simulation needs a homogeneous intensity")
    rho = spec.intensity.rho
    d = window.dim
    sides = window.sides
    total = rho * window.volume

    def at(T):
        k = _mode_grid(T, d)
        lam = rho * spec.correlation.spectral(np.linalg.norm(k / sides, axis=1))
        return k, lam

    if truncation is not None:
        if truncation < 1:
            raise ParameterError("truncation must be >= 1")
        T = int(truncation)
        k, lam = at(T)
    else:
        T = 1
        prev_mass = -1.0
        while True:
            k, lam = at(T)
            mass = float(lam.sum())
            if total == 0 or mass >= capture * total:
                break
            # compact spectrum fully enclosed: no more mass to gain
            if spec.correlation.family == "bessel" and T > spec.correlation.bessel_radius * sides.max() + 1:
                break
            if T >= t_max:
                break
            if mass == prev_mass and mass > 0:
                break
            prev_mass = mass
            T = int(math.ceil(T * 1.25)) if T > 8 else T + 1
    if lam.size and lam.max() > 1 + 1e-9:
        raise OperatorValidityError("mode eigenvalue above 1", max_eigenvalue=float(lam.max()))
    keep = lam > 0
    captured = float(lam.sum() / total) if total > 0 else 1.0
    return Spectrum(k[keep], np.clip(lam[keep], 0.0, 1.0), T, captured)


def sample_projection(modes: np.ndarray, window: Window, rng, batch_cap: int = 4096) -> np.ndarray:
    """Sample the projection DPP spanned by the given Fourier modes on ``window``.

    Point ``m+1`` has density ``(||v(x)||^2 - sum_j |<e_j, v(x)>|^2) / (n - m)``
    where ``v(x)`` stacks the normalized modes at ``x`` and ``e_j`` is an
    orthonormal basis of ``span{v(x_1), ..., v(x_m)}``. Proposals are uniform
    on the window; since ``||v(x)||^2 = n / |W|``, the acceptance probability
    is the residual norm divided by ``n / |W|``.
    """
    n = len(modes)
    d = window.dim
    if n == 0:
        return np.zeros((0, d))
    freq = 2 * np.pi * modes / window.sides  # (n, d)
    vol = window.volume
    norm = 1.0 / math.sqrt(vol)
    full = n / vol
    basis = np.zeros((n, n), complex)
    pts = np.zeros((n, d))
    proposals = 0
    for m in range(n):
        size = min(batch_cap, int(math.ceil(2.0 * n / (n - m))) + 4)
        while True:
            cand = window.sample_uniform(rng, size)
            V = np.exp(1j * ((cand - window.lo) @ freq.T)) * norm  # (size, n)
            if m:
                proj = V @ basis[:m].conj().T
                resid = full - np.einsum("ij,ij->i", proj, proj.conj()).real
            else:
                resid = np.full(size, full)
            accept = rng.random(size) * full < resid
            proposals += size
            hit = np.flatnonzero(accept)
            if hit.size:
                i = hit[0]
                break
            if proposals > MAX_REJECTIONS:
                raise ResourceError("projection sampler exceeded the rejection budget", n=n, m=m)
        pts[m] = cand[i]
        v = V[i]
        if m:
            v = v - proj[i] @ basis[:m]
            # second Gram-Schmidt pass keeps the basis orthonormal to round-off
            v = v - (basis[:m].conj() @ v) @ basis[:m]
        basis[m] = v / np.linalg.norm(v)
    return pts


def sample_stationary(spec: KernelSpec, window: Window, rng, truncation: int | None = None,
                      margin: float = 0.0, seed_info: str = "") -> PointPattern:
    """Spectral simulation of a homogeneous DPP on ``window``.

    With ``margin > 0`` the process is simulated on the enlarged box and then
    restricted, which removes the wrap-around correlations of the periodic
    approximation near the edges of ``window``.
    """
    sim_window = window.dilate(margin) if margin > 0 else window
    spectrum = box_spectrum(spec, sim_window, truncation)
    keep = rng.random(len(spectrum.eigenvalues)) < spectrum.eigenvalues
    pts = sample_projection(spectrum.modes[keep], sim_window, rng)
    meta = {
        "truncation": spectrum.truncation,
        "spectral_capture": spectrum.captured,
        "truncation_warning": spectrum.captured < WARN_CAPTURE,
        "n_modes": int(keep.sum()),
        "margin": margin,
    }
    pattern = PointPattern(pts, sim_window, seed_info, meta)
    return pattern.restrict(window) if margin > 0 else pattern


def thin_inhomogeneous(pattern: PointPattern, spec: KernelSpec, rng) -> PointPattern:
    """Keep each point ``x`` with probability ``rho_beta(x) / rho_max``."""
    if pattern.n == 0:
        return PointPattern(pattern.points, pattern.window, pattern.seed_info, dict(pattern.meta))
    keep_p = spec.intensity(pattern.points) / spec.rho_max
    if np.any(keep_p > 1 + 1e-12):
        raise DomainError("retention probability exceeds 1", max_retention=float(keep_p.max()))
    keep = rng.random(pattern.n) < keep_p
    meta = dict(pattern.meta, thinned_from=pattern.n)
    return PointPattern(pattern.points[keep], pattern.window, pattern.seed_info, meta)


def sample_dpp(spec: KernelSpec, window: Window, rng, truncation=None, margin=0.0, seed_info=""):
    """Homogeneous specs are simulated directly, log-linear ones by thinning a
    stationary DPP at intensity ``rho_max`` with the same correlation."""
    if spec.homogeneous:
        return sample_stationary(spec, window, rng, truncation, margin, seed_info)
    spec.check_intensity(window)
    base = KernelSpec(spec.correlation, Homogeneous(spec.rho_max))
    pattern = sample_stationary(base, window, rng, truncation, margin, seed_info)
    return thin_inhomogeneous(pattern, spec, rng)


def sample_poisson(rho, window: Window, rng, rho_bound: float | None = None,
                   seed_info: str = "") -> PointPattern:
    """Poisson process with constant or functional intensity (by thinning)."""
    if callable(rho):
        if rho_bound is None:
            raise ParameterError("rho_bound is required for a functional intensity")
        n = rng.poisson(rho_bound * window.volume)
        pts = window.sample_uniform(rng, n)
        if n:
            p = rho(pts) / rho_bound
            if np.any(p > 1 + 1e-12):
                raise DomainError("intensity exceeds rho_bound")
            pts = pts[rng.random(n) < p]
        return PointPattern(pts, window, seed_info)
    if rho < 0:
        raise ParameterError("rho must be non-negative")
    n = rng.poisson(rho * window.volume)
    return PointPattern(window.sample_uniform(rng, n), window, seed_info)
