"""Axis-aligned box windows and their geometry."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def unit_sphere_area(d: int) -> float:
    """(d-1)-dimensional area of the unit sphere in R^d; 2*pi for d=2."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class Window:
    """Box ``[lower_1, upper_1] x ... x [lower_d, upper_d]``.

    Membership tests are half-open (``lower <= x < upper``) so that a
    partition of a box into sub-boxes assigns every point to exactly one cell.
    """

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ParameterError("lower and upper must have the same positive length")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ParameterError(f"window needs upper > lower componentwise, got {lo}, {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, side, d=2, origin=0.0):
        return cls((origin,) * d, (origin + side,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def centre(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.lo) & (x < self.hi), axis=1)

    def translate(self, h) -> Window:
        h = np.broadcast_to(np.asarray(h, float), (self.dim,))
        return Window(tuple(self.lo + h), tuple(self.hi + h))

    def dilate(self, r: float) -> Window:
        """Bounding box of the Minkowski dilation (exact only for r = 0)."""
        return Window(tuple(self.lo - r), tuple(self.hi + r))

    def distance(self, other: Window) -> float:
        gap = np.maximum(0.0, np.maximum(self.lo - other.hi, other.lo - self.hi))
        return float(np.linalg.norm(gap))

    def intersection_volume(self, other: Window) -> float:
        overlap = np.minimum(self.hi, other.hi) - np.maximum(self.lo, other.lo)
        return float(np.prod(np.clip(overlap, 0.0, None)))

    def intersection(self, other: Window) -> Window | None:
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(hi <= lo):
            return None
        return Window(tuple(lo), tuple(hi))

    def is_disjoint(self, other: Window) -> bool:
        return self.intersection_volume(other) == 0.0

    def translation_overlap(self, h) -> np.ndarray:
        """``|W ∩ (W + h)|`` for each row of ``h`` (edge-correction volume)."""
        h = np.atleast_2d(h)
        return np.prod(np.clip(self.sides - np.abs(h), 0.0, None), axis=1)

    def sample_uniform(self, rng, size) -> np.ndarray:
        return self.lo + self.sides * rng.random((size, self.dim))

    def cube_partition(self, side: float):
        """Cubes of the lattice ``side * Z^d`` lying inside the window."""
        counts = np.floor((self.sides + 1e-12) / side).astype(int)
        cells = []
        for idx in itertools.product(*(range(c) for c in counts)):
            lo = self.lo + side * np.array(idx)
            cells.append(Window(tuple(lo), tuple(lo + side)))
        return cells

    def to_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["lower"]), tuple(data["upper"]))


def boundary_dilation_volume(window: Window, r: float) -> float:
    """Volume of ``∂W ⊕ r`` for a box.

    Computed as ``|W ⊕ r| - |W ⊖ r|``: the outer parallel body comes from the
    Steiner formula with the box's intrinsic volumes (elementary symmetric
    polynomials of the side lengths), the inner one is the eroded box.
    """
    if r < 0:
        raise ParameterError("r must be non-negative")
    if r == 0:
        return 0.0
    sides = window.sides
    d = window.dim
    # elementary symmetric polynomials e_0..e_d of the side lengths
    esym = np.zeros(d + 1)
    esym[0] = 1.0
    for s in sides:
        esym[1:] = esym[1:] + s * esym[:-1]
    outer = sum(esym[j] * unit_ball_volume(d - j) * r ** (d - j) for j in range(d + 1))
    inner = float(np.prod(np.clip(sides - 2 * r, 0.0, None)))
    return float(outer - inner)


def lattice_cube_distance_bound(i, j, R: float, s: float) -> float:
    """Lower bound ``(|i-j|_1 R - s d) / sqrt(d)`` on the distance between the
    side-``s`` cubes centred at ``R i`` and ``R j``."""
    i = np.asarray(i)
    j = np.asarray(j)
    d = i.size
    return (np.abs(i - j).sum() * R - s * d) / math.sqrt(d)


def lattice_cube(i, R: float, s: float) -> Window:
    c = R * np.asarray(i, float)
    return Window(tuple(c - s / 2), tuple(c + s / 2))
