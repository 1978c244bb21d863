"""Nested set systems ``G_{n+1} ⊆ F_n ⊆ G_n`` with separators and gauges.

Three builders are provided:

* :func:`cc_system`: sets defined by witness oscillation, affine separator.
* :func:`cl_system`: diagonal strips ``|x - y| < gamma_n(x)``, Lipschitz
  separators in each variable.
* :func:`cd_system`: diagonal strips with a C^1 smoothstep separator.

Membership tests and separators are exact at the level-set boundaries:
``phi = 0`` off ``G_n`` and ``phi = 1`` on ``F_n`` hold bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr as ex
from .errors import BuildError, GaugeError, InputError
from .spaces import EUCLIDEAN, Metric, distance
from .witnesses import WitnessSequence

__all__ = [
    "GaugeSequence",
    "constant_gauge",
    "expression_gauge",
    "derive_constant_gauge",
    "CoverGauge",
    "lipschitz_gauge_from_open_cover",
    "SandwichSystem",
    "CCSystem",
    "CLSystem",
    "CDSystem",
    "cc_system",
    "cl_system",
    "cd_system",
    "smoothstep",
    "smoothstep_prime",
    "strip_distance",
    "CL_RATIO",
    "CD_MARGIN",
]

CL_RATIO = 1.0 / 16.0
CD_MARGIN = 0.99


def smoothstep(t: float) -> float:
    """Decreasing C^1 step: 1 for t <= 0, 0 for t >= 1."""
    if t <= 0.0:
        return 1.0
    if t >= 1.0:
        return 0.0
    return 1.0 - (3.0 * t * t - 2.0 * t * t * t)


def smoothstep_prime(t: float) -> float:
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return -6.0 * t * (1.0 - t)


def strip_distance(s: float, r: float) -> float:
    """Max-metric distance from a pair at separation ``s`` to the strip
    ``{(u, v): |u - v| <= r}``."""
    return max(0.0, (s - r) / 2.0)


# -- gauges -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaugeSequence:
    """Radii ``gamma(n, x) > 0`` of diagonal strips, one per level n >= 1."""

    gamma: Callable[[int, np.ndarray], float] = field(repr=False)
    mode_ratio: float = CL_RATIO
    constant_mode: bool = False
    name: str = "gauge"
    certificate: dict = field(default_factory=dict, repr=False)

    def __call__(self, n: int, x) -> float:
        return float(self.gamma(n, x))


def constant_gauge(values, mode_ratio: float = CL_RATIO, name: str = "constant") -> GaugeSequence:
    """Gauge with ``gamma(n, ·) = values(n)`` (callable or 1-based sequence)."""
    if callable(values):
        fn = values
    else:
        seq = [float(v) for v in values]

        def fn(n: int) -> float:
            if not 1 <= n <= len(seq):
                raise InputError(f"constant gauge has no value for level {n}")
            return seq[n - 1]

    return GaugeSequence(lambda n, x: fn(n), mode_ratio, True, name)


def expression_gauge(text: str, mode_ratio: float = CL_RATIO) -> GaugeSequence:
    """Gauge from an expression in ``n`` and ``x[i]``."""
    node = ex.parse(text)
    constant = ex.max_index(node) < 0
    cache: dict = {}

    def gamma(n: int, x) -> float:
        f = cache.get(n)
        if f is None:
            f = cache[n] = ex.compile_expr(node, {"n": float(n)})
        return f(x)

    return GaugeSequence(gamma, mode_ratio, constant, f"expr:{ex.to_text(node)}")


def derive_constant_gauge(
    w: WitnessSequence,
    mode_ratio: float,
    depth: int,
    safety: float = 0.9,
) -> GaugeSequence:
    """Constant gauge with ``c_n < min(1/(n max(L_n, L_{n+1})), ratio c_{n-1})``.

    Each level takes ``safety`` times the binding bound, so both
    inequalities are strict.  The certificate lists ``c_n max(L) < 1/n``
    for n <= depth; it is analytic given the declared constants.
    """
    if w.lipschitz_constants is None:
        raise BuildError("cannot derive a gauge: witness Lipschitz constants unknown")
    values: list = []

    def extend(n: int) -> None:
        while len(values) < n:
            k = len(values) + 1
            M = max(w.lipschitz(k), w.lipschitz(k + 1))
            cap = 1.0 / (k * M) if M > 0 else math.inf
            if values:
                cap = min(cap, mode_ratio * values[-1])
            values.append(safety * (1.0 if math.isinf(cap) else cap))

    def value(n: int) -> float:
        if n > len(values):
            extend(n)
        return values[n - 1]

    extend(depth)
    rows = []
    ok = True
    for n in range(1, depth + 1):
        M = max(w.lipschitz(n), w.lipschitz(n + 1))
        holds = values[n - 1] * M < 1.0 / n
        ratio_ok = n == 1 or values[n - 1] < mode_ratio * values[n - 2]
        ok = ok and holds and ratio_ok
        rows.append({"n": n, "c": values[n - 1], "lip": M, "contained": holds})
    cert = {"kind": "analytic", "ok": ok, "levels": rows}
    return GaugeSequence(lambda n, x: value(n), mode_ratio, True, "derived", cert)


@dataclass(frozen=True, eq=False)
class CoverGauge:
    """``gamma(x) = min(r(x), max(floor, sup_s (r(s)/2 - |x - s|)))``."""

    samples: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)
    r: Callable = field(repr=False)
    floor: float = 1e-9
    metric: Metric = EUCLIDEAN

    def __call__(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        diff = np.abs(self.samples - x)
        if self.metric.kind == "chebyshev" or diff.shape[1] == 1:
            d = diff.max(axis=1)
        else:
            d = np.sqrt((diff * diff).sum(axis=1))
        sup = float(np.max(self.radii / 2.0 - d))
        return min(float(self.r(x)), max(self.floor, sup))


def lipschitz_gauge_from_open_cover(
    r: Callable,
    samples,
    floor: float = 1e-9,
    metric: Metric = EUCLIDEAN,
) -> CoverGauge:
    """1-Lipschitz positive radius function under the cover radii ``r``.

    ``r(s)`` is the radius of a strip around the diagonal at ``s`` known to
    lie inside the target open set.  The result is a supremum of 1-Lipschitz
    cones, floored and capped by ``r`` itself (1-Lipschitz whenever ``r`` is).
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        raise InputError("empty sample grid")
    radii = np.array([float(r(s)) for s in pts])
    if np.any(~(radii > 0)):
        bad = int(np.argmin(radii > 0))
        raise InputError(f"cover radius non-positive at sample {pts[bad].tolist()}")
    return CoverGauge(pts, radii, r, floor, metric)


# -- systems ------------------------------------------------------------------


class SandwichSystem:
    """Base class: level 0 is the whole square, ``G_0 = F_0 = X^2``."""

    mode = "?"

    def __init__(self, max_depth: int):
        self.max_depth = int(max_depth)

    def in_G(self, n: int, x, y) -> bool:
        raise NotImplementedError

    def in_F(self, n: int, x, y) -> bool:
        raise NotImplementedError

    def phi(self, n: int, x, y) -> float:
        raise NotImplementedError

    def delta(self, n: int, x) -> float:
        raise NotImplementedError

    def resolve(self, x, y, n_max: int):
        """First n <= n_max with ``(x, y)`` outside ``F_n``, and ``phi_n``
        there; ``(None, None)`` if the point lies in ``F_{n_max}``."""
        for n in range(1, n_max + 1):
            if not self.in_F(n, x, y):
                return n, self.phi(n, x, y)
        return None, None


class CCSystem(SandwichSystem):
    """``G_n``: ``d_n < 1/n``; ``F_n``: ``d_n <= 1/(n+1)``, where
    ``d_n(x, y) = max_{k <= n+1} |g_k(x) - g_k(y)|``."""

    mode = "CC"

    def __init__(self, w: WitnessSequence, metric_Z: Metric = EUCLIDEAN, max_depth: int = 64):
        super().__init__(max_depth)
        self.witness = w
        self.metric_Z = metric_Z

    def _gap(self, k: int, x, y) -> float:
        return distance(self.metric_Z, self.witness.value(k, x), self.witness.value(k, y))

    def d(self, n: int, x, y) -> float:
        return max(self._gap(k, x, y) for k in range(1, n + 2))

    def in_G(self, n, x, y):
        return n == 0 or self.d(n, x, y) < 1.0 / n

    def in_F(self, n, x, y):
        return n == 0 or self.d(n, x, y) <= 1.0 / (n + 1)

    @staticmethod
    def _phi(n: int, d: float) -> float:
        a = 1.0 / n
        b = 1.0 / (n + 1)
        return min(max((a - d) / (a - b), 0.0), 1.0)

    def phi(self, n, x, y):
        return self._phi(n, self.d(n, x, y))

    def delta(self, n, x):
        return 1.0 / n

    def _fast_gap(self, k: int, xt: tuple, yt: tuple) -> float:
        fns = self.witness.fn(k)._compiled
        if len(fns) == 1:
            return abs(fns[0](xt) - fns[0](yt))
        diffs = [abs(f(xt) - f(yt)) for f in fns]
        if self.metric_Z.kind == "chebyshev":
            return max(diffs)
        return math.sqrt(sum(v * v for v in diffs))

    def resolve(self, x, y, n_max):
        xt = tuple(float(v) for v in np.atleast_1d(x))
        yt = tuple(float(v) for v in np.atleast_1d(y))
        d = self._fast_gap(1, xt, yt)
        for n in range(1, n_max + 1):
            d = max(d, self._fast_gap(n + 1, xt, yt))
            if not d <= 1.0 / (n + 1):
                return n, self._phi(n, d)
        return None, None


def _check_samples(samples, gamma: GaugeSequence):
    if samples is None:
        if not gamma.constant_mode:
            raise InputError("variable gauges need a carrier sample set for validation")
        return [np.zeros(1)]
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return list(pts)


class CLSystem(SandwichSystem):
    """Strips ``G_n = {|x-y| < gamma_n(x)}``, ``F_n = {|x-y| <= gamma_n(x)/8}``,
    ``delta_n = gamma_n / 16``."""

    mode = "CL"

    def __init__(self, gamma: GaugeSequence, metric_X: Metric = EUCLIDEAN, samples=None, max_depth: int = 64):
        super().__init__(max_depth)
        self.gamma = gamma
        self.metric_X = metric_X
        for n in range(1, max_depth + 3):
            for x in _check_samples(samples, gamma):
                g0, g1 = gamma(n, x), gamma(n + 1, x)
                if not (g0 > 0 and g1 > 0 and g1 < CL_RATIO * g0):
                    raise GaugeError(
                        f"gauge ratio invariant violated at n={n}, x={x.tolist()}: "
                        f"gamma_{n + 1}={g1!r} is not < gamma_{n}/16={CL_RATIO * g0!r}",
                        n, x,
                    )

    def _s(self, x, y) -> float:
        return distance(self.metric_X, x, y)

    def in_G(self, n, x, y):
        return n == 0 or self._s(x, y) < self.gamma(n, x)

    def in_F(self, n, x, y):
        return n == 0 or self._s(x, y) <= self.gamma(n, x) / 8.0

    def _phi(self, n: int, x, s: float) -> float:
        c = self.gamma(n, x)
        if self.gamma.constant_mode:
            alpha = strip_distance(s, c / 8.0)
            beta = max(0.0, (c - s) / 2.0)
            return beta / (alpha + beta)
        return min(max((c - s) / (c - c / 8.0), 0.0), 1.0)

    def phi(self, n, x, y):
        return self._phi(n, x, self._s(x, y))

    def phi_lipschitz_y(self, n: int, x) -> float:
        """Lipschitz constant of ``y -> phi_n(x, y)``."""
        return 8.0 / (7.0 * self.gamma(n, x))

    def delta(self, n, x):
        return self.gamma(n, x) / 16.0

    def resolve(self, x, y, n_max):
        s = self._s(x, y)
        for n in range(1, n_max + 1):
            if not s <= self.gamma(n, x) / 8.0:
                return n, self._phi(n, x, s)
        return None, None


class CDSystem(SandwichSystem):
    """Strips ``G_n = {‖x-y‖ < gamma_n(x)}``, ``F_n = closure(G_{n+1})`` and
    ``phi_n = psi((‖x-y‖ - gamma_{n+1}) / (gamma_n - gamma_{n+1}))``."""

    mode = "CD"

    def __init__(self, gamma: GaugeSequence, samples=None, max_depth: int = 64, margin: float = CD_MARGIN):
        super().__init__(max_depth)
        self.gamma = gamma
        for n in range(1, max_depth + 3):
            for x in _check_samples(samples, gamma):
                g0, g1 = gamma(n, x), gamma(n + 1, x)
                if not (g1 > 0 and g1 < g0 and g1 <= margin * g0):
                    raise GaugeError(
                        f"gauge not strictly decreasing with margin {margin} at n={n}, "
                        f"x={x.tolist()}: gamma_{n}={g0!r}, gamma_{n + 1}={g1!r}",
                        n, x,
                    )

    @staticmethod
    def _s(x, y) -> float:
        return distance(EUCLIDEAN, x, y)

    def in_G(self, n, x, y):
        return n == 0 or self._s(x, y) < self.gamma(n, x)

    def in_F(self, n, x, y):
        return n == 0 or self._s(x, y) <= self.gamma(n + 1, x)

    def _arg(self, n: int, x, s: float) -> float:
        g0, g1 = self.gamma(n, x), self.gamma(n + 1, x)
        return (s - g1) / (g0 - g1)

    def phi(self, n, x, y):
        return smoothstep(self._arg(n, x, self._s(x, y)))

    def phi_grad_y(self, n: int, x, y) -> np.ndarray:
        """Analytic gradient of ``y -> phi_n(x, y)`` (chain rule)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = self._s(x, y)
        if s == 0.0:
            return np.zeros_like(y)
        g0, g1 = self.gamma(n, x), self.gamma(n + 1, x)
        dpsi = smoothstep_prime((s - g1) / (g0 - g1))
        return dpsi / (g0 - g1) * (y - x) / s

    def phi_lipschitz_y(self, n: int, x) -> float:
        return 1.5 / (self.gamma(n, x) - self.gamma(n + 1, x))

    def delta(self, n, x):
        return (self.gamma(n + 1, x) - self.gamma(n + 2, x)) / 2.0

    def resolve(self, x, y, n_max):
        s = self._s(x, y)
        for n in range(1, n_max + 1):
            if not s <= self.gamma(n + 1, x):
                return n, smoothstep(self._arg(n, x, s))
        return None, None


def cc_system(w: WitnessSequence, metric_Z: Metric = EUCLIDEAN, max_depth: int = 64) -> CCSystem:
    return CCSystem(w, metric_Z, max_depth)


def cl_system(gamma: GaugeSequence, metric_X: Metric = EUCLIDEAN, samples=None, max_depth: int = 64) -> CLSystem:
    return CLSystem(gamma, metric_X, samples, max_depth)


def cd_system(gamma: GaugeSequence, psi_kind: str = "cubic_smoothstep", samples=None, max_depth: int = 64) -> CDSystem:
    if psi_kind != "cubic_smoothstep":
        raise InputError(f"unknown separator profile {psi_kind!r}")
    return CDSystem(gamma, samples, max_depth)
