"""Assembly of ``f : X^2 -> Z`` with prescribed diagonal from a witness
sequence, an equiconnector and a sandwich system.

On ``F_{n-1} \\ F_n`` the value is ``lam(g_n(x), g_{n+1}(x), phi_n(x, y))``;
on the residual set (inside every ``F_n`` up to the truncation depth) it is
the limit ``g(x)``, taken at the stabilization index when one is known.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import BuildError, InputError, NotApplicable, UnresolvablePointError
from .sandwich import (
    CL_RATIO,
    CDSystem,
    CLSystem,
    GaugeSequence,
    SandwichSystem,
    cc_system,
    derive_constant_gauge,
)
from .spaces import EUCLIDEAN, Box, Equiconnector, Metric, distance, linear_equiconnector
from .witnesses import WitnessSequence

__all__ = [
    "EvalOutcome",
    "ExtensionEvaluator",
    "RESIDUAL",
    "TRUNCATE",
    "REQUIRE_STABILIZATION",
    "build_cc",
    "build_cl",
    "build_cd",
    "overlap_identity_check",
    "cd_telescoping_eval",
]

RESIDUAL = "residual"
TRUNCATE = "truncate_to_g_Nmax"
REQUIRE_STABILIZATION = "require_stabilization"
POLICIES = (TRUNCATE, REQUIRE_STABILIZATION)


@dataclass(frozen=True)
class EvalOutcome:
    value: np.ndarray
    piece: Union[int, str]
    phi_used: float
    depth_cost: int

    @property
    def residual(self) -> bool:
        return self.piece == RESIDUAL


@dataclass(frozen=True, eq=False)
class ExtensionEvaluator:
    witness: WitnessSequence
    lam: Equiconnector
    system: SandwichSystem
    mode: str
    n_max: int = 64
    residual_policy: str = REQUIRE_STABILIZATION
    build_report: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.residual_policy not in POLICIES:
            raise InputError(f"unknown residual policy {self.residual_policy!r}")
        if self.n_max < 3:
            raise InputError(f"N_max must be >= 3, got {self.n_max}")
        if self.mode not in ("CC", "CL", "CD"):
            raise InputError(f"unknown mode {self.mode!r}")
        if self.system.mode != self.mode:
            raise BuildError(f"mode {self.mode} needs a {self.mode} system, got {self.system.mode}")
        if self.mode in ("CL", "CD"):
            _require_stable(self.witness)
            if self.residual_policy != REQUIRE_STABILIZATION:
                raise BuildError(f"mode {self.mode} requires residual policy {REQUIRE_STABILIZATION}")
        if self.mode == "CL" and self.lam.lipschitz_in_t is None:
            raise BuildError("mode CL requires an equiconnector Lipschitz in t")
        if self.mode == "CD" and not self.lam.smooth_in_t:
            raise BuildError("mode CD requires an equiconnector smooth in t")

    def g(self, n: int, x) -> np.ndarray:
        return self.witness.value(n, x)

    def residual_value(self, x) -> np.ndarray:
        if self.residual_policy == TRUNCATE:
            return self.g(self.n_max, x)
        if self.witness.stabilization_index is None:
            raise UnresolvablePointError(
                f"residual point at x={np.asarray(x).tolist()} but witness "
                f"{self.witness.name!r} has no stabilization index"
            )
        return self.g(self.witness.stabilization_index(x), x)

    def resolve(self, x, y):
        return self.system.resolve(x, y, self.n_max)

    def evaluate(self, x, y) -> EvalOutcome:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        n, phi = self.resolve(x, y)
        if n is None:
            return EvalOutcome(self.residual_value(x), RESIDUAL, 1.0, self.n_max)
        value = self.lam(self.g(n, x), self.g(n + 1, x), phi)
        return EvalOutcome(value, n, phi, n)

    def __call__(self, x, y) -> np.ndarray:
        return self.evaluate(x, y).value

    def section_gradient(self, x, y) -> np.ndarray:
        """Analytic Jacobian (m x d) of ``y -> f(x, y)`` in CD mode."""
        if not isinstance(self.system, CDSystem):
            raise NotApplicable("analytic section gradient needs a CD system")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        n, _ = self.resolve(x, y)
        if n is None:
            return np.zeros((self.witness.out_dim, y.size))
        dg = self.g(n + 1, x) - self.g(n, x)
        return np.outer(dg, self.system.phi_grad_y(n, x, y))


def _require_stable(w: WitnessSequence) -> None:
    if not w.stable or w.stabilization_index is None:
        raise BuildError(
            f"stable witness required: {w.name!r} lacks "
            + ("a stable-convergence claim" if not w.stable else "a stabilization_index")
        )


def _default_policy(w: WitnessSequence) -> str:
    if w.stable and w.stabilization_index is not None:
        return REQUIRE_STABILIZATION
    return TRUNCATE


def build_cc(
    w: WitnessSequence,
    lam: Optional[Equiconnector] = None,
    n_max: int = 64,
    residual_policy: Optional[str] = None,
    metric_Z: Metric = EUCLIDEAN,
) -> ExtensionEvaluator:
    lam = lam or linear_equiconnector()
    policy = residual_policy or _default_policy(w)
    report = {
        "mode": "CC",
        "witness": w.name,
        "lambda": lam.name,
        "n_max": n_max,
        "residual_policy": policy,
        "gates": {"pointwise_convergent": "assumed (certified by witness catalogue)"},
    }
    return ExtensionEvaluator(w, lam, cc_system(w, metric_Z, n_max), "CC", n_max, policy, report)


def _fan(dim: int):
    fracs = [j / 8.0 for j in range(1, 8)]
    for axis in range(dim):
        e = np.zeros(dim)
        e[axis] = 1.0
        for q in fracs:
            yield q * e
            yield -q * e


def _containment_certificate(
    w: WitnessSequence,
    gamma: GaugeSequence,
    samples: np.ndarray,
    depth: int,
    metric_X: Metric,
) -> dict:
    """Check ``G_n ⊆ H_n`` where ``H_n`` bounds the oscillation of
    ``g_n, g_{n+1}`` by ``1/n``: analytic with Lipschitz constants, sampled
    otherwise."""
    if w.lipschitz_constants is not None:
        for n in range(1, depth + 1):
            M = max(w.lipschitz(n), w.lipschitz(n + 1))
            for x in samples:
                if not gamma(n, x) * M < 1.0 / n:
                    return {"kind": "analytic", "ok": False, "n": n, "x": x.tolist()}
        return {"kind": "analytic", "ok": True, "levels": depth, "samples": len(samples)}
    dim = samples.shape[1]
    for n in range(1, depth + 1):
        for x in samples:
            r = gamma(n, x)
            for v in _fan(dim):
                y = x + r * v
                if not distance(metric_X, x, y) < r:
                    continue
                for k in (n, n + 1):
                    if not distance(EUCLIDEAN, w.value(k, x), w.value(k, y)) < 1.0 / n:
                        return {"kind": "sampled", "ok": False, "n": n, "x": x.tolist()}
    return {"kind": "sampled", "ok": True, "levels": depth, "samples": len(samples)}


def _gauge_summary(gamma: GaugeSequence, samples: np.ndarray, levels: int = 6) -> list:
    x = samples[len(samples) // 2]
    return [gamma(n, x) for n in range(1, levels + 1)]


def _strip_build(
    mode: str,
    w: WitnessSequence,
    lam: Equiconnector,
    gamma: Optional[GaugeSequence],
    ratio: float,
    box: Optional[Box],
    n_max: int,
    samples,
    metric_X: Metric,
) -> ExtensionEvaluator:
    _require_stable(w)
    if mode == "CL" and lam.lipschitz_in_t is None:
        raise BuildError("mode CL requires an equiconnector Lipschitz in t")
    box = box or Box.cube(1)
    if samples is None:
        samples = box.grid(65 if box.dim == 1 else 9)
    samples = np.asarray(samples, dtype=float).reshape(-1, box.dim)
    depth = n_max + 3
    if gamma is None:
        if w.lipschitz_constants is None:
            raise BuildError(
                f"missing Lipschitz constants for {w.name!r}: supply a gauge explicitly"
            )
        gamma = derive_constant_gauge(w, ratio, depth)
    # gauge ratio/margin gates run first: they explain most containment failures
    if mode == "CL":
        system = CLSystem(gamma, metric_X, samples, n_max)
    else:
        system = CDSystem(gamma, samples, n_max)
    cert = _containment_certificate(w, gamma, samples, n_max + 1, metric_X)
    if not cert["ok"]:
        raise BuildError(
            f"gauge strip G_{cert['n']} not contained in H_{cert['n']} at x={cert['x']} "
            f"({cert['kind']} check)"
        )
    report = {
        "mode": mode,
        "witness": w.name,
        "lambda": lam.name,
        "n_max": n_max,
        "residual_policy": REQUIRE_STABILIZATION,
        "gates": {
            "stable": True,
            "stabilization_index": True,
            "lambda_lipschitz_in_t": lam.lipschitz_in_t,
            "lambda_smooth_in_t": lam.smooth_in_t,
        },
        "gauge": {
            "name": gamma.name,
            "constant_mode": gamma.constant_mode,
            "ratio": gamma.mode_ratio,
            "first_levels": _gauge_summary(gamma, samples),
        },
        "containment_certificate": cert,
    }
    return ExtensionEvaluator(w, lam, system, mode, n_max, REQUIRE_STABILIZATION, report)


def build_cl(
    w: WitnessSequence,
    lam: Optional[Equiconnector] = None,
    gamma: Optional[GaugeSequence] = None,
    metric_X: Metric = EUCLIDEAN,
    box: Optional[Box] = None,
    n_max: int = 64,
    samples=None,
) -> ExtensionEvaluator:
    return _strip_build("CL", w, lam or linear_equiconnector(), gamma, CL_RATIO, box, n_max, samples, metric_X)


def build_cd(
    w: WitnessSequence,
    gamma: Optional[GaugeSequence] = None,
    ratio: float = 0.9,
    box: Optional[Box] = None,
    n_max: int = 64,
    samples=None,
) -> ExtensionEvaluator:
    if not 0 < ratio < 1:
        raise InputError(f"CD gauge ratio must lie in (0, 1), got {ratio}")
    return _strip_build("CD", w, linear_equiconnector(), gamma, ratio, box, n_max, samples, EUCLIDEAN)


def overlap_identity_check(e: ExtensionEvaluator, x, y) -> float:
    """Discrepancy between ``f(x, y)`` and the two-level nested form
    ``lam(lam(g_n, g_{n+1}, phi_n), g_{n+2}, phi_{n+1})``, maximised over the
    levels n whose window ``F_{n-1} \\ F_{n+1}`` contains the point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = e.evaluate(x, y)
    if out.residual:
        raise NotApplicable("overlap identity does not apply at residual points")
    p = out.piece
    if p > e.n_max - 2:
        raise NotApplicable(f"piece {p} too deep for the two-level identity")
    sys_, lam = e.system, e.lam
    worst = 0.0
    for n in (p - 1, p):
        if n < 1:
            continue
        inner = lam(e.g(n, x), e.g(n + 1, x), sys_.phi(n, x, y))
        rhs = lam(inner, e.g(n + 2, x), sys_.phi(n + 1, x, y))
        worst = max(worst, float(np.max(np.abs(out.value - rhs))))
    return worst


def cd_telescoping_eval(e: ExtensionEvaluator, x, y, n: Optional[int] = None) -> np.ndarray:
    """Value from the four-term affine form
    ``(1-phi_n) g_n + phi_n g_{n+1} - phi_{n+1} g_{n+1} + phi_{n+1} g_{n+2}``,
    valid on ``F_{n-1} \\ F_{n+1}``; by default n is one below the piece."""
    if e.mode != "CD" or not e.lam.convex:
        raise NotApplicable("telescoping form needs a CD evaluator with convex lam")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    p, _ = e.resolve(x, y)
    if p is None:
        return e.residual_value(x)
    if n is None:
        n = p - 1 if p >= 2 else p
    if n not in (p - 1, p) or n < 1:
        raise NotApplicable(f"level {n} window does not contain the point (piece {p})")
    a = e.system.phi(n, x, y)
    b = e.system.phi(n + 1, x, y)
    g0, g1, g2 = e.g(n, x), e.g(n + 1, x), e.g(n + 2, x)
    return (1.0 - a) * g0 + a * g1 - b * g1 + b * g2
