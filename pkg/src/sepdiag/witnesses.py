"""Continuous functions, witness sequences and the builtin catalogue.

A Baire-one target is never represented directly; it is carried by a
sequence of continuous witnesses ``g_n`` plus optional metadata (limit hint,
stabilization index, Lipschitz constants).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr as ex
from .errors import InputError

__all__ = [
    "ContinuousFn",
    "WitnessSequence",
    "DiagonalTarget",
    "parse_expression",
    "template_witnesses",
    "ramp_witnesses",
    "CATALOGUE",
    "stabilization_probe",
    "probed_stabilization_index",
    "NOT_OBSERVED",
]

NOT_OBSERVED = None
STABLE_TOL = 1e-14
HALF_PI = 1.5707963267948966


@dataclass(frozen=True)
class ContinuousFn:
    """A map R^d -> R^m given by one expression per output component."""

    exprs: tuple
    params: tuple = ()
    declared_lipschitz: Optional[float] = None
    _compiled: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self.exprs:
            raise InputError("a continuous function needs at least one component")
        env = dict(self.params)
        compiled = tuple(ex.compile_expr(e, env) for e in self.exprs)
        object.__setattr__(self, "_compiled", compiled)

    @property
    def out_dim(self) -> int:
        return len(self.exprs)

    def text(self) -> str:
        parts = [ex.to_text(e) for e in self.exprs]
        return parts[0] if len(parts) == 1 else "; ".join(parts)

    def scalar(self, x) -> float:
        return self._compiled[0](x)

    def __call__(self, x) -> np.ndarray:
        return np.array([f(x) for f in self._compiled])


def parse_expression(text: str, declared_lipschitz: Optional[float] = None) -> ContinuousFn:
    """Parse ``text`` (components separated by ``;``) into a ContinuousFn."""
    exprs = tuple(ex.parse(part) for part in str(text).split(";"))
    return ContinuousFn(exprs, declared_lipschitz=declared_lipschitz)


@dataclass(frozen=True, eq=False)
class WitnessSequence:
    """``n -> g_n`` with metadata about its pointwise limit.

    ``stabilization_index(x)`` returns N with ``g_n(x) == g(x)`` for every
    n >= N; it is only meaningful when ``stable`` is true.
    """

    name: str
    generator: Callable[[int], ContinuousFn] = field(repr=False)
    out_dim: int = 1
    limit_hint: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    stable: bool = False
    stabilization_index: Optional[Callable[[np.ndarray], int]] = field(default=None, repr=False)
    lipschitz_constants: Optional[Callable[[int], float]] = field(default=None, repr=False)
    template: tuple = ()

    def __post_init__(self):
        cached = lru_cache(maxsize=512)(self.generator)
        object.__setattr__(self, "_cached", cached)

    def fn(self, n: int) -> ContinuousFn:
        if n < 1:
            raise InputError(f"witness index must be >= 1, got {n}")
        return self._cached(n)

    def value(self, n: int, x) -> np.ndarray:
        return self.fn(n)(x)

    def limit(self, x) -> np.ndarray:
        """Ground-truth ``g(x)``: the limit hint, else ``g_N(x)`` at the
        stabilization index.  Never used inside the construction path."""
        x = np.asarray(x, dtype=float)
        if self.limit_hint is not None:
            return np.atleast_1d(np.asarray(self.limit_hint(x), dtype=float))
        if self.stable and self.stabilization_index is not None:
            return self.value(self.stabilization_index(x), x)
        raise InputError(f"witness {self.name!r} has no ground-truth limit")

    @property
    def has_limit(self) -> bool:
        return self.limit_hint is not None or (
            self.stable and self.stabilization_index is not None
        )

    def lipschitz(self, n: int) -> Optional[float]:
        if self.lipschitz_constants is None:
            return None
        return float(self.lipschitz_constants(n))

    def template_text(self) -> str:
        return "; ".join(ex.to_text(e) for e in self.template)


@dataclass(frozen=True)
class DiagonalTarget:
    witness: WitnessSequence
    eval_tolerance: float = 1e-9
    n_max: int = 64

    def __post_init__(self):
        if self.n_max < 3:
            raise InputError(f"N_max must be >= 3, got {self.n_max}")
        if not self.eval_tolerance > 0:
            raise InputError("eval_tolerance must be positive")


def template_witnesses(
    name: str,
    text: str,
    *,
    lipschitz: Optional[Callable[[int], float]] = None,
    limit_hint=None,
    stable: bool = False,
    stabilization_index=None,
) -> WitnessSequence:
    """Witness sequence from an expression template in ``x[i]`` and ``n``."""
    exprs = tuple(ex.parse(part) for part in str(text).split(";"))
    bad = set().union(*(ex.free_params(e) for e in exprs)) - {"n"}
    if bad:
        raise InputError(f"unknown template parameter(s): {sorted(bad)}")

    def gen(n: int) -> ContinuousFn:
        lip = None if lipschitz is None else float(lipschitz(n))
        return ContinuousFn(exprs, params=(("n", float(n)),), declared_lipschitz=lip)

    return WitnessSequence(
        name=name,
        generator=gen,
        out_dim=len(exprs),
        limit_hint=limit_hint,
        stable=stable,
        stabilization_index=stabilization_index,
        lipschitz_constants=lipschitz,
        template=exprs,
    )


def _ceil_inverse(a: float) -> int:
    inv = 1.0 / a
    if not math.isfinite(inv) or inv > 2.0**62:
        return sys.maxsize
    return max(1, int(math.ceil(inv)))


def _sgn_index(x) -> int:
    t = float(x[0])
    if t == 0.0:
        return 1
    a = abs(t)
    N = _ceil_inverse(a)
    # guard against 1/|t| rounding below the true threshold
    while N < sys.maxsize and N * a < 1.0:
        N += 1
    return N


def _step_index(x) -> int:
    t = float(x[0])
    if t <= 0.0:
        return 1
    N = _ceil_inverse(t)
    while N < sys.maxsize and N * t < 1.0:
        N += 1
    return N


def _sgn_limit(x) -> np.ndarray:
    return np.array([float(np.sign(x[0]))])


def _step_limit(x) -> np.ndarray:
    return np.array([1.0 if x[0] > 0 else 0.0])


def _circle_limit(x) -> np.ndarray:
    s = float(np.sign(x[0]))
    return np.array([math.sin(HALF_PI * s + HALF_PI), math.sin(HALF_PI * s)])


def ramp_witnesses(kind: str, c: float = 1.0) -> WitnessSequence:
    """Catalogue of classic Baire-one targets on the first coordinate.

    ``sgn``      g_n = clamp(n x, -1, 1)        -> sign(x), stable
    ``step01``   g_n = clamp(n x, 0, 1)         -> 1{x > 0}, stable
    ``zero``     g_n = sin(n x) / n             -> 0, not stable
    ``const_c``  g_n = c                        -> c, stable
    ``circle_sgn`` angle (pi/2) clamp(n x,-1,1) on the unit circle, stable
    """
    if kind == "sgn":
        return template_witnesses(
            "sgn", "clamp(n * x[0], -1, 1)",
            lipschitz=float, limit_hint=_sgn_limit,
            stable=True, stabilization_index=_sgn_index,
        )
    if kind == "step01":
        return template_witnesses(
            "step01", "clamp(n * x[0], 0, 1)",
            lipschitz=float, limit_hint=_step_limit,
            stable=True, stabilization_index=_step_index,
        )
    if kind == "zero":
        return template_witnesses(
            "zero", "sin(n * x[0]) / n",
            lipschitz=lambda n: 1.0, limit_hint=lambda x: np.zeros(1),
            stable=False,
        )
    if kind == "const_c":
        cv = float(c)
        return template_witnesses(
            "const_c", ex.to_text(ex.Num(cv)) if cv >= 0 else f"-{abs(cv)!r}",
            lipschitz=lambda n: 0.0, limit_hint=lambda x: np.array([cv]),
            stable=True, stabilization_index=lambda x: 1,
        )
    if kind == "circle_sgn":
        a = f"{HALF_PI!r} * clamp(n * x[0], -1, 1)"
        return template_witnesses(
            "circle_sgn", f"sin({a} + {HALF_PI!r}); sin({a})",
            lipschitz=lambda n: HALF_PI * n, limit_hint=_circle_limit,
            stable=True, stabilization_index=_sgn_index,
        )
    raise InputError(f"unknown catalogue witness {kind!r}")


CATALOGUE = ("sgn", "step01", "zero", "const_c", "circle_sgn")


def stabilization_probe(w: WitnessSequence, x, n_max: int) -> Optional[int]:
    """Smallest N < n_max with g_n(x) constant (within 1e-14) for
    N <= n <= n_max, else ``NOT_OBSERVED``."""
    if n_max < 2:
        raise InputError("N_max must be >= 2")
    x = np.asarray(x, dtype=float)
    last = w.value(n_max, x)
    N = n_max
    for n in range(n_max - 1, 0, -1):
        if np.max(np.abs(w.value(n, x) - last)) > STABLE_TOL:
            break
        N = n
    return N if N < n_max else NOT_OBSERVED


def probed_stabilization_index(w: WitnessSequence, n_max: int) -> Callable[[np.ndarray], int]:
    """Empirical stabilization index from ``stabilization_probe``.

    This is a heuristic: constancy up to ``n_max`` is observed, not proved.
    """

    def index(x) -> int:
        N = stabilization_probe(w, x, n_max)
        if N is NOT_OBSERVED:
            raise InputError(f"no stabilization observed at x={np.asarray(x).tolist()}")
        return N

    return index
