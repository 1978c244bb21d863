"""Carrier and value spaces: vectors, metrics, boxes and equiconnecting maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError

__all__ = [
    "as_vector",
    "Metric",
    "EUCLIDEAN",
    "CHEBYSHEV",
    "distance",
    "Box",
    "Equiconnector",
    "linear_equiconnector",
    "circle_equiconnector",
    "EQUICONNECTORS",
]


def as_vector(v, dim: Optional[int] = None) -> np.ndarray:
    """Coerce ``v`` to a finite 1-D float array (a scalar becomes length 1)."""
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"expected a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"vector has non-finite coordinates: {arr.tolist()}")
    if dim is not None and arr.size != dim:
        raise InputError(f"expected dimension {dim}, got {arr.size}")
    return arr


@dataclass(frozen=True)
class Metric:
    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind not in ("euclidean", "chebyshev"):
            raise InputError(f"unknown metric kind {self.kind!r}")

    def __call__(self, a, b) -> float:
        return distance(self, a, b)


EUCLIDEAN = Metric("euclidean")
CHEBYSHEV = Metric("chebyshev")


def distance(m: Metric, a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.size} vs {b.size}")
    diff = np.abs(a - b)
    if diff.size == 1:
        return float(diff[0])
    if m.kind == "chebyshev":
        return float(diff.max())
    return float(math.sqrt(float(diff @ diff)))


@dataclass(frozen=True)
class Box:
    """Axis-aligned carrier box ``[lower, upper]`` in R^d."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise InputError("box bounds must be non-empty and of equal length")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise InputError(f"box bound on axis {i} is not finite")
            if not a < b:
                raise InputError(f"box axis {i}: lower {a} must be < upper {b}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim: int = 1, lo: float = -1.0, hi: float = 1.0) -> "Box":
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.dim or not np.all(np.isfinite(x)):
            return False
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def grid(self, n: int) -> np.ndarray:
        """Tensor grid with ``n`` nodes per axis, shape (n**d, d)."""
        axes = [np.linspace(a, b, n) for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return lo + (hi - lo) * rng.random((n, self.dim))


@dataclass(frozen=True)
class Equiconnector:
    """A map ``lam(z1, z2, t)`` with ``lam(z1,z2,0)=z1``, ``lam(z1,z2,1)=z2``
    and ``lam(z,z,t)=z``.

    ``lipschitz_in_t`` is a constant L such that
    ``|lam(z1,z2,t) - lam(z1,z2,s)| <= L |z1 - z2| |t - s|``.
    ``diameter_bound``, when set, bounds the distance between any two values
    the map can produce (used by the gluing bound for non-convex maps).
    """

    name: str
    fn: Callable[[np.ndarray, np.ndarray, float], np.ndarray] = field(repr=False)
    lipschitz_in_t: Optional[float] = None
    smooth_in_t: bool = False
    convex: bool = False
    diameter_bound: Optional[float] = None
    valid_pair: Optional[Callable[[np.ndarray, np.ndarray], bool]] = field(
        default=None, repr=False
    )

    def __call__(self, z1, z2, t) -> np.ndarray:
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        t = float(t)
        # axioms (i)-(iii) are enforced bit-exactly, independent of fn
        if t == 0.0 or np.array_equal(z1, z2):
            return z1
        if t == 1.0:
            return z2
        return self.fn(z1, z2, t)


def _convex(z1: np.ndarray, z2: np.ndarray, t: float) -> np.ndarray:
    return (1.0 - t) * z1 + t * z2


def linear_equiconnector() -> Equiconnector:
    return Equiconnector(
        name="linear",
        fn=_convex,
        lipschitz_in_t=1.0,
        smooth_in_t=True,
        convex=True,
    )


def _circle_angle(z1: np.ndarray, z2: np.ndarray) -> float:
    cross = z1[0] * z2[1] - z1[1] * z2[0]
    dot = z1[0] * z2[0] + z1[1] * z2[1]
    # atan2(0, -1) = +pi: antipodes resolve toward positive orientation
    return math.atan2(cross, dot)


def _circle(z1: np.ndarray, z2: np.ndarray, t: float) -> np.ndarray:
    a = t * _circle_angle(z1, z2)
    c, s = math.cos(a), math.sin(a)
    return np.array([c * z1[0] - s * z1[1], s * z1[0] + c * z1[1]])


def _circle_valid(z1, z2) -> bool:
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return abs(_circle_angle(z1, z2)) < math.pi


def circle_equiconnector() -> Equiconnector:
    """Shortest-arc interpolation on the unit circle in R^2.

    Continuous only away from antipodal pairs (arc distance < pi); there
    the tie-break picks the counter-clockwise arc.  The arc length is at
    most pi/2 times the chord, which gives the Lipschitz constant in t.
    """
    return Equiconnector(
        name="circle",
        fn=_circle,
        lipschitz_in_t=math.pi / 2,
        smooth_in_t=True,
        convex=False,
        diameter_bound=2.0,
        valid_pair=_circle_valid,
    )


EQUICONNECTORS = {
    "linear": linear_equiconnector,
    "circle": circle_equiconnector,
}
