"""Config-driven probe suites: turns probe specs into :class:`ProbeReport` s.

Each probe draws from its own generator seeded by ``(seed, index)`` so the
result does not depend on scheduling or on the other probes in the list.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from . import expr as ex
from .config import ProblemConfig, build
from .errors import InputError, NotApplicable
from .extension import ExtensionEvaluator, cd_telescoping_eval, overlap_identity_check
from .sandwich import CDSystem, CLSystem
from .verify import (
    DEFAULT_RADII,
    MAX_WITNESSES,
    TWO_VARIABLE_CORPUS,
    ProbeReport,
    cl_section_bound,
    composition_continuity_probe,
    diagonal_check,
    frechet_fd_check,
    joint_oscillation,
    lipschitz_estimate,
    pointwise_lipschitz_at,
    section_oscillation,
    sigma_decompose,
)

__all__ = ["run_probe", "run_suite", "suite_report", "random_sections", "near_diagonal_pair"]

SHELL_MARGIN = 3e-4


class Context:
    def __init__(self, pc: ProblemConfig, evaluator: ExtensionEvaluator):
        self.pc = pc
        self.e = evaluator
        self.box = pc.box

    def target(self, spec: dict) -> Callable:
        name = spec.get("target", "built")
        if name == "built":
            return self.e
        if name not in TWO_VARIABLE_CORPUS:
            raise InputError(f"unknown probe target {name!r}")
        return TWO_VARIABLE_CORPUS[name]


def _points(spec: dict, key: str, dim: int) -> list:
    out = []
    for p in spec.get(key, []):
        v = np.atleast_1d(np.asarray(p, dtype=float))
        if v.size != dim:
            raise InputError(f"probe {key}: expected {dim} coordinates, got {v.size}")
        out.append(v)
    return out


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([1.0 if rng.random() < 0.5 else -1.0])
    u = rng.normal(size=dim)
    return u / np.linalg.norm(u)


def _clip(box, y: np.ndarray) -> np.ndarray:
    return np.clip(y, box.lower, box.upper)


def _gamma(e: ExtensionEvaluator):
    return getattr(e.system, "gamma", None)


def near_diagonal_pair(e: ExtensionEvaluator, box, rng: np.random.Generator, levels: int = 8):
    """Pair ``(x, y)`` at a separation matched to a random level's scale."""
    x = box.sample(rng, 1)[0]
    gamma = _gamma(e)
    if gamma is None:
        s = 10.0 ** (-6.0 * rng.random())
    else:
        n = int(rng.integers(1, levels + 1))
        s = gamma(n, x) * 1.2 * rng.random()
    return x, _clip(box, x + s * _unit(rng, box.dim))


def random_sections(box, rng: np.random.Generator, count: int) -> list:
    """Diagonal-centred sections with alternating fixed variable."""
    out = []
    for i in range(count):
        at = box.sample(rng, 1)[0]
        out.append({"fixed": "x" if i % 2 == 0 else "y", "at": at, "center": at})
    return out


def _merge(kind: str, reports: list, threshold: float, params: dict) -> ProbeReport:
    worst = max((r.worst_case for r in reports), default=0.0)
    samples = sum(r.samples for r in reports)
    bad = []
    for r in reports:
        if not r.passed:
            bad.append({"params": r.params, "worst_case": r.worst_case})
        if len(bad) >= MAX_WITNESSES:
            break
    return ProbeReport(kind, samples, worst, threshold, dict(params, count=len(reports)), bad)


def _radii(spec: dict) -> list:
    return [float(r) for r in spec.get("radii", DEFAULT_RADII)]


# -- probe runners --------------------------------------------------------------


def _diagonal(ctx: Context, spec, rng):
    n = int(spec.get("grid", 1000))
    if ctx.box.dim == 1:
        grid = np.linspace(ctx.box.lower[0], ctx.box.upper[0], n)[:, None]
    else:
        grid = ctx.box.grid(max(2, math.ceil(n ** (1.0 / ctx.box.dim))))
    tol = float(spec.get("tol", ctx.pc.data["eval"]["tolerance"]))
    return diagonal_check(ctx.e, grid, tol)


def _section(ctx: Context, spec, rng):
    f2 = ctx.target(spec)
    dim = ctx.box.dim
    sections = []
    for s in spec.get("sections", []):
        at = np.atleast_1d(np.asarray(s["at"], dtype=float))
        center = np.atleast_1d(np.asarray(s.get("center", s["at"]), dtype=float))
        if at.size != dim or center.size != dim:
            raise InputError(f"section: expected {dim} coordinates")
        sections.append({"fixed": s.get("fixed", "x"), "at": at, "center": center})
    sections += random_sections(ctx.box, rng, int(spec.get("random", 0)))
    if not sections:
        raise InputError("section probe needs 'sections' or 'random'")
    tol = float(spec.get("tol", 1e-6))
    radii = _radii(spec)
    reports = [section_oscillation(f2, s["fixed"], s["at"], s["center"], radii, tol) for s in sections]
    return _merge("section_oscillation", reports, tol, {"radii": radii})


def _joint(ctx: Context, spec, rng):
    f2 = ctx.target(spec)
    at = spec.get("at", [[0.0] * ctx.box.dim, [0.0] * ctx.box.dim])
    tol = float(spec.get("tol", 1e-6))
    return joint_oscillation(f2, at[0], at[1], _radii(spec), tol)


def _sandwich_axioms(ctx: Context, spec, rng):
    e = ctx.e
    sys_ = e.system
    count = int(spec.get("samples", 10000))
    top = min(e.n_max, int(spec.get("levels", 16)))
    violations = 0
    bad = []
    for _ in range(count):
        n = int(rng.integers(1, top + 1))
        x, y = near_diagonal_pair(e, ctx.box, rng, levels=top)
        gN, fN, gN1 = sys_.in_G(n, x, y), sys_.in_F(n, x, y), sys_.in_G(n + 1, x, y)
        phi = sys_.phi(n, x, y)
        checks = (
            not gN1 or fN,
            not fN or gN,
            gN or phi == 0.0,
            not fN or phi == 1.0,
            0.0 <= phi <= 1.0,
            sys_.in_G(n, x, x),
        )
        if not all(checks):
            violations += 1
            if len(bad) < MAX_WITNESSES:
                bad.append({"n": n, "x": x.tolist(), "y": y.tolist(), "checks": list(checks)})
    return ProbeReport("sandwich_axioms", count, violations, 0.0, {"levels": top}, bad)


def _gauge_ratio(ctx: Context, spec, rng):
    e = ctx.e
    gamma = _gamma(e)
    if gamma is None:
        raise NotApplicable("gauge ratio probe needs a strip system")
    strict = gamma.mode_ratio if isinstance(e.system, CLSystem) else 1.0
    pts = ctx.box.grid(int(spec.get("grid", 65)) if ctx.box.dim == 1 else 9)
    pts = np.concatenate([pts, ctx.box.sample(rng, int(spec.get("random", 200)))])
    violations = 0
    bad = []
    worst_ratio = 0.0
    for x in pts:
        for n in range(1, e.n_max + 2):
            g0, g1 = gamma(n, x), gamma(n + 1, x)
            worst_ratio = max(worst_ratio, g1 / g0)
            if not g1 < strict * g0:
                violations += 1
                if len(bad) < MAX_WITNESSES:
                    bad.append({"n": n, "x": x.tolist(), "gamma_n": g0, "gamma_n1": g1})
    params = {"required_ratio": strict, "max_observed_ratio": worst_ratio}
    return ProbeReport("gauge_ratio", len(pts) * (e.n_max + 1), violations, 0.0, params, bad)


def _separation(ctx: Context, spec, rng):
    e = ctx.e
    if not isinstance(e.system, CLSystem):
        raise NotApplicable("separation probe needs a CL system")
    sys_ = e.system
    count = int(spec.get("samples", 10000))
    violations = used = 0
    bad = []
    for _ in range(count):
        n = int(rng.integers(1, min(e.n_max, 12) + 1))
        x = ctx.box.sample(rng, 1)[0]
        g0, g1 = sys_.gamma(n, x), sys_.gamma(n + 1, x)
        u = x + g1 * rng.random() * _unit(rng, ctx.box.dim)
        v = x + g0 * (0.125 + 1.875 * rng.random()) * _unit(rng, ctx.box.dim)
        if not (sys_.in_G(n + 1, x, u) and not sys_.in_F(n, x, v)):
            continue
        used += 1
        gap = float(np.linalg.norm(u - v)) if sys_.metric_X.kind == "euclidean" else float(np.max(np.abs(u - v)))
        if not gap >= sys_.delta(n, x):
            violations += 1
            if len(bad) < MAX_WITNESSES:
                bad.append({"n": n, "x": x.tolist(), "u": u.tolist(), "v": v.tolist()})
    return ProbeReport("separation", used, violations, 0.0, {"drawn": count}, bad)


def _resolved_pairs(ctx: Context, rng, count: int, depth_cap: int):
    out = []
    attempts = 0
    while len(out) < count and attempts < 20 * count:
        attempts += 1
        x, y = near_diagonal_pair(ctx.e, ctx.box, rng)
        n, _ = ctx.e.resolve(x, y)
        if n is not None and n <= depth_cap:
            out.append((x, y))
    return out


def _overlap(ctx: Context, spec, rng):
    count = int(spec.get("samples", 1000))
    tol = float(spec.get("tol", 1e-12))
    pairs = _resolved_pairs(ctx, rng, count, ctx.e.n_max - 2)
    worst = 0.0
    bad = []
    for x, y in pairs:
        d = overlap_identity_check(ctx.e, x, y)
        if d > tol and len(bad) < MAX_WITNESSES:
            bad.append({"x": x.tolist(), "y": y.tolist(), "discrepancy": d})
        worst = max(worst, d)
    return ProbeReport("overlap_identity", len(pairs), worst, tol, {"requested": count}, bad)


def _telescoping(ctx: Context, spec, rng):
    count = int(spec.get("samples", 1000))
    tol = float(spec.get("tol", 1e-12))
    pairs = _resolved_pairs(ctx, rng, count, ctx.e.n_max - 1)
    worst = 0.0
    bad = []
    for x, y in pairs:
        ref = ctx.e(x, y)
        p, _ = ctx.e.resolve(x, y)
        for n in (p - 1, p):
            if n < 1:
                continue
            d = float(np.max(np.abs(cd_telescoping_eval(ctx.e, x, y, n) - ref)))
            if d > tol and len(bad) < MAX_WITNESSES:
                bad.append({"x": x.tolist(), "y": y.tolist(), "n": n, "discrepancy": d})
            worst = max(worst, d)
    return ProbeReport("telescoping", len(pairs), worst, tol, {"requested": count}, bad)


def _cl_lipschitz(ctx: Context, spec, rng):
    e = ctx.e
    count = int(spec.get("sections", 20))
    npairs = int(spec.get("pairs", 200))
    worst = 0.0
    bad = []
    for _ in range(count):
        x0 = ctx.box.sample(rng, 1)[0]
        bound = cl_section_bound(e, x0)
        pairs = []
        for _ in range(npairs):
            a = _clip(ctx.box, x0 + 10.0 ** (-4.0 * rng.random()) * _unit(rng, ctx.box.dim) * rng.random())
            b = _clip(ctx.box, a + 10.0 ** (-6.0 * rng.random()) * _unit(rng, ctx.box.dim))
            pairs.append((a, b))
        est = lipschitz_estimate(lambda y: e(x0, y), pairs)
        ratio = est.value / bound
        if ratio > 1.0 and len(bad) < MAX_WITNESSES:
            bad.append({"x0": x0.tolist(), "estimate": est.value, "bound": bound})
        worst = max(worst, ratio)
    return ProbeReport("cl_lipschitz", count * npairs, worst, 1.0, {"measure": "estimate / bound"}, bad)


def _pointwise_lipschitz(ctx: Context, spec, rng):
    e = ctx.e
    count = int(spec.get("points", 50))
    radii = [2.0 ** -k for k in range(1, 31)]
    worst = 0.0
    bad = []
    for x0 in ctx.box.sample(rng, count):
        value = pointwise_lipschitz_at(e, x0, radii)
        ratio = value / cl_section_bound(e, x0) if math.isfinite(value) else math.inf
        if not ratio <= 1.0 and len(bad) < MAX_WITNESSES:
            bad.append({"x0": x0.tolist(), "pointwise": value})
        worst = max(worst, ratio)
    return ProbeReport("pointwise_lipschitz", count, worst, 1.0, {"measure": "Lip_x / section bound"}, bad)


def cd_resolved_point(e: ExtensionEvaluator, box, rng, levels: int = 6, margin: float = SHELL_MARGIN):
    """Off-shell resolved point ``(x0, y0)``: every finite-difference stencil
    around y0 stays inside a single piece."""
    for _ in range(10000):
        x0 = box.sample(rng, 1)[0]
        n = int(rng.integers(1, levels + 1))
        g0, g1 = e.system.gamma(n, x0), e.system.gamma(n + 1, x0)
        s = g1 + (g0 - g1) * rng.random()
        if min(s - g1, g0 - s) < margin:
            continue
        y0 = x0 + s * _unit(rng, box.dim)
        if box.contains(y0 - margin) and box.contains(y0 + margin):
            return x0, y0
    raise InputError("no off-shell resolved point found")


def _frechet(ctx: Context, spec, rng):
    e = ctx.e
    if not isinstance(e.system, CDSystem):
        raise NotApplicable("Frechet probe needs a CD system")
    count = int(spec.get("points", 100))
    tol = float(spec.get("tol", 1e-6))
    reports = []
    for _ in range(count):
        x0, y0 = cd_resolved_point(e, ctx.box, rng)
        reports.append(
            frechet_fd_check(lambda y: e(x0, y), y0, tol=tol, reference=lambda y: e.section_gradient(x0, y))
        )
    return _merge("frechet_fd", reports, 1.0, {"tol": tol})


def _sigma(ctx: Context, spec, rng):
    f2 = ctx.target(spec)
    n = int(spec.get("samples", 201))
    if ctx.box.dim == 1:
        pts = np.linspace(ctx.box.lower[0], ctx.box.upper[0], n)[:, None]
    else:
        pts = ctx.box.grid(max(2, math.ceil(n ** (1.0 / ctx.box.dim))))
    dec = sigma_decompose(f2, lambda x: x, pts, int(spec.get("n_levels", 64)))
    uncovered = sum(1 for f in dec.first_level if f is None)
    worst = uncovered + (0 if dec.closure_ok else 1)
    params = dec.to_dict()
    params["max_first_level"] = max((f for f in dec.first_level if f is not None), default=None)
    return ProbeReport("sigma_decompose", dec.samples, worst, 0.0, params, [])


def _composition(ctx: Context, spec, rng):
    f2 = ctx.target(spec)
    node = ex.parse(spec.get("g", "x[0]"))
    gfun = ex.compile_expr(node, {}, ctx.box.dim)
    centers = _points(spec, "centers", ctx.box.dim) or [np.zeros(ctx.box.dim)]
    tol = float(spec.get("tol", 1e-6))
    return composition_continuity_probe(f2, lambda x: np.array([gfun(x)]), centers, tol, _radii(spec))


RUNNERS = {
    "diagonal": _diagonal,
    "section": _section,
    "joint": _joint,
    "sandwich_axioms": _sandwich_axioms,
    "gauge_ratio": _gauge_ratio,
    "separation": _separation,
    "overlap_identity": _overlap,
    "telescoping": _telescoping,
    "cl_lipschitz": _cl_lipschitz,
    "pointwise_lipschitz": _pointwise_lipschitz,
    "frechet": _frechet,
    "sigma": _sigma,
    "composition": _composition,
}


def run_probe(ctx: Context, spec: dict, index: int) -> dict:
    rng = np.random.default_rng([ctx.pc.seed, index])
    try:
        report = RUNNERS[spec["kind"]](ctx, spec, rng)
        body = report.to_dict()
        outcome = "pass" if report.passed else "fail"
    except NotApplicable as err:
        body = {"kind": spec["kind"], "error": f"not applicable: {err}"}
        outcome = "not_applicable"
    return {
        "name": spec["name"],
        "expect": spec["expect"],
        "outcome": outcome,
        "matches": outcome == spec["expect"],
        "report": body,
    }


def run_suite(pc: ProblemConfig, evaluator: Optional[ExtensionEvaluator] = None, jobs: int = 1) -> list:
    ctx = Context(pc, evaluator if evaluator is not None else build(pc))
    specs = list(enumerate(pc.probes))
    if jobs <= 1:
        return [run_probe(ctx, s, i) for i, s in specs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda a: run_probe(ctx, a[1], a[0]), specs))


def suite_report(pc: ProblemConfig, results: list) -> dict:
    return {
        "config": pc.data,
        "seed": pc.seed,
        "probes": results,
        "ok": all(r["matches"] for r in results),
    }
