"""Problem configuration: JSON schema, normalization and evaluator assembly.

A config is validated structurally with JSON Schema, then cross-checked
(box bounds, mode/witness compatibility).  ``normalize`` fills every
default so that ``load(dump(normalize(c)))`` is a fixed point.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Any, Optional

import jsonschema

from . import expr as ex
from .errors import InputError
from .extension import POLICIES, ExtensionEvaluator, build_cc, build_cd, build_cl
from .sandwich import CL_RATIO, GaugeSequence, expression_gauge
from .spaces import EQUICONNECTORS, EUCLIDEAN, Box, Metric
from .witnesses import (
    CATALOGUE,
    WitnessSequence,
    probed_stabilization_index,
    ramp_witnesses,
    template_witnesses,
)

__all__ = ["SCHEMA", "PROBE_KINDS", "ProblemConfig", "load", "loads", "normalize", "dump", "materialize", "build"]

PROBE_KINDS = (
    "diagonal",
    "section",
    "joint",
    "sandwich_axioms",
    "gauge_ratio",
    "separation",
    "overlap_identity",
    "telescoping",
    "cl_lipschitz",
    "pointwise_lipschitz",
    "frechet",
    "sigma",
    "composition",
)

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["witness", "mode"],
    "properties": {
        "carrier": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "lower": _vec,
                "upper": _vec,
                "metric": {"enum": ["euclidean", "chebyshev"]},
            },
        },
        "witness": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "catalogue": {"enum": list(CATALOGUE)},
                "c": _num,
                "expression": {"type": "string"},
                "lipschitz": {"type": ["string", "null"]},
                "stable": {"type": "boolean"},
                "stabilization_index": {"enum": ["probe", None]},
            },
        },
        "mode": {"enum": ["CC", "CL", "CD"]},
        "lambda": {"enum": sorted(EQUICONNECTORS)},
        "gauge": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["auto", "expression"]},
                "expression": {"type": ["string", "null"]},
                "ratio": {"type": ["number", "null"]},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": "integer", "minimum": 3},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "residual_policy": {"enum": list(POLICIES) + [None]},
            },
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "probes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": list(PROBE_KINDS)},
                    "expect": {"enum": ["pass", "fail"]},
                    "name": {"type": "string"},
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path(err: jsonschema.ValidationError) -> str:
    out = "config"
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _fail(path: str, message: str):
    raise InputError(f"{path}: {message}")


def normalize(raw: dict) -> dict:
    """Validated copy of ``raw`` with every default made explicit."""
    if not isinstance(raw, dict):
        _fail("config", "must be a JSON object")
    errors = sorted(_VALIDATOR.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        _fail(_path(errors[0]), errors[0].message)
    cfg = copy.deepcopy(raw)

    car = cfg.get("carrier", {})
    dim = int(car.get("dim", len(car.get("lower", [0.0]))))
    lower = [float(v) for v in car.get("lower", [-1.0] * dim)]
    upper = [float(v) for v in car.get("upper", [1.0] * dim)]
    for name, vals in (("lower", lower), ("upper", upper)):
        if len(vals) != dim:
            _fail(f"config.carrier.{name}", f"expected {dim} bounds, got {len(vals)}")
        for i, v in enumerate(vals):
            if not math.isfinite(v):
                _fail(f"config.carrier.{name}[{i}]", "bound must be finite")
    for i, (lo, hi) in enumerate(zip(lower, upper)):
        if not lo < hi:
            _fail(f"config.carrier", f"axis {i}: lower {lo!r} must be < upper {hi!r}")
    carrier = {"dim": dim, "lower": lower, "upper": upper, "metric": car.get("metric", "euclidean")}

    w = cfg["witness"]
    if ("catalogue" in w) == ("expression" in w):
        _fail("config.witness", "exactly one of 'catalogue' or 'expression' is required")
    if "catalogue" in w:
        for k in ("lipschitz", "stable", "stabilization_index"):
            if k in w:
                _fail(f"config.witness.{k}", "only allowed with an expression witness")
        if "c" in w and w["catalogue"] != "const_c":
            _fail("config.witness.c", "only allowed with catalogue 'const_c'")
        witness = {"catalogue": w["catalogue"]}
        if w["catalogue"] == "const_c":
            witness["c"] = float(w.get("c", 1.0))
    else:
        if "c" in w:
            _fail("config.witness.c", "only allowed with catalogue 'const_c'")
        try:
            parts = [ex.parse(p) for p in w["expression"].split(";")]
        except InputError as err:
            _fail("config.witness.expression", str(err))
        for p in parts:
            if ex.max_index(p) >= dim:
                _fail("config.witness.expression", f"coordinate x[{ex.max_index(p)}] out of range for dim {dim}")
        lip = w.get("lipschitz")
        if lip is not None:
            try:
                node = ex.parse(lip)
            except InputError as err:
                _fail("config.witness.lipschitz", str(err))
            if ex.max_index(node) >= 0:
                _fail("config.witness.lipschitz", "must depend on n only")
            lip = ex.to_text(node)
        witness = {
            "expression": "; ".join(ex.to_text(p) for p in parts),
            "lipschitz": lip,
            "stable": bool(w.get("stable", False)),
            "stabilization_index": w.get("stabilization_index"),
        }

    mode = cfg["mode"]
    g = cfg.get("gauge", {})
    kind = g.get("kind", "auto")
    gexpr = g.get("expression")
    if kind == "expression":
        if not gexpr:
            _fail("config.gauge.expression", "required when kind is 'expression'")
        try:
            gexpr = ex.to_text(ex.parse(gexpr))
        except InputError as err:
            _fail("config.gauge.expression", str(err))
    elif gexpr is not None:
        _fail("config.gauge.expression", "only allowed when kind is 'expression'")
    ratio = g.get("ratio")
    if mode == "CD":
        ratio = 0.9 if ratio is None else float(ratio)
        if not 0 < ratio < 1:
            _fail("config.gauge.ratio", "CD ratio must lie in (0, 1)")
    elif mode == "CL":
        if ratio is not None and float(ratio) != CL_RATIO:
            _fail("config.gauge.ratio", "CL ratio is fixed at 1/16")
        ratio = CL_RATIO
    else:
        ratio = None
    gauge = {"kind": kind, "expression": gexpr, "ratio": ratio}

    ev = cfg.get("eval", {})
    evaluation = {
        "n_max": int(ev.get("n_max", 64)),
        "tolerance": float(ev.get("tolerance", 1e-9)),
        "residual_policy": ev.get("residual_policy"),
    }
    probes = []
    for i, p in enumerate(cfg.get("probes", [])):
        q = dict(p)
        q.setdefault("expect", "pass")
        q.setdefault("name", f"{q['kind']}_{i}")
        probes.append(q)

    return {
        "carrier": carrier,
        "witness": witness,
        "mode": mode,
        "lambda": cfg.get("lambda", "linear"),
        "gauge": gauge,
        "eval": evaluation,
        "seed": int(cfg.get("seed", 0)),
        "probes": probes,
    }


def loads(text: str) -> dict:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise InputError(f"config: invalid JSON ({err})") from None
    return normalize(raw)


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass(frozen=True)
class ProblemConfig:
    """A normalized config with its materialized carrier and witness."""

    data: dict
    box: Box
    metric: Metric
    witness: WitnessSequence

    @property
    def mode(self) -> str:
        return self.data["mode"]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def probes(self) -> list:
        return self.data["probes"]


def _make_witness(w: dict, n_max: int) -> WitnessSequence:
    if "catalogue" in w:
        return ramp_witnesses(w["catalogue"], w.get("c", 1.0))
    lip = None
    if w["lipschitz"] is not None:
        node = ex.parse(w["lipschitz"])
        lip = lambda n: ex.compile_expr(node, {"n": float(n)})(())  # noqa: E731
    seq = template_witnesses("expression", w["expression"], lipschitz=lip, stable=w["stable"])
    if w["stabilization_index"] == "probe":
        seq = template_witnesses(
            "expression", w["expression"], lipschitz=lip, stable=w["stable"],
            stabilization_index=probed_stabilization_index(seq, n_max),
        )
    return seq


def materialize(cfg: dict) -> ProblemConfig:
    cfg = normalize(cfg)
    car = cfg["carrier"]
    box = Box(tuple(car["lower"]), tuple(car["upper"]))
    return ProblemConfig(cfg, box, Metric(car["metric"]), _make_witness(cfg["witness"], cfg["eval"]["n_max"]))


def _gauge(cfg: dict) -> Optional[GaugeSequence]:
    g = cfg["gauge"]
    if g["kind"] == "auto":
        return None
    return expression_gauge(g["expression"], g["ratio"])


def build(pc: ProblemConfig) -> ExtensionEvaluator:
    """Assemble the evaluator described by a materialized config."""
    cfg = pc.data
    lam = EQUICONNECTORS[cfg["lambda"]]()
    ev = cfg["eval"]
    if pc.mode == "CC":
        return build_cc(pc.witness, lam, ev["n_max"], ev["residual_policy"], EUCLIDEAN)
    if ev["residual_policy"] not in (None, "require_stabilization"):
        raise InputError(f"config.eval.residual_policy: mode {pc.mode} needs require_stabilization")
    if pc.mode == "CL":
        return build_cl(pc.witness, lam, _gauge(cfg), pc.metric, pc.box, ev["n_max"])
    if cfg["lambda"] != "linear":
        raise InputError("config.lambda: mode CD needs the linear equiconnector")
    return build_cd(pc.witness, _gauge(cfg), cfg["gauge"]["ratio"], pc.box, ev["n_max"])

