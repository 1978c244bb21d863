"""Command-line front end: ``build``, ``eval``, ``verify`` and ``corpus list``.

Exit codes: 0 success, 1 probe outcomes differ from expectations,
2 input / build errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

from . import config as cfgmod
from .errors import SepdiagError
from .extension import ExtensionEvaluator
from .suite import run_suite, suite_report
from .verify import TWO_VARIABLE_CORPUS, _jsonable
from .witnesses import CATALOGUE, ramp_witnesses

OUTSIDE = "outside"


def _fmt(v: float) -> str:
    # repr is the shortest string that round-trips a binary64
    return repr(float(v))


def parse_grid(spec: str, dim: int) -> np.ndarray:
    """``a:b:n[,a:b:n...]`` for the 2*dim coordinates of ``(x, y)``.

    With only ``dim`` axes given, the same axes are reused for ``y``.
    Rows are ordered with the last coordinate varying fastest.
    """
    axes = []
    for part in spec.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise SepdiagError(f"grid axis {part!r}: expected a:b:n")
        try:
            a, b, n = float(bits[0]), float(bits[1]), int(bits[2])
        except ValueError:
            raise SepdiagError(f"grid axis {part!r}: expected a:b:n") from None
        if n < 1:
            raise SepdiagError(f"grid axis {part!r}: n must be >= 1")
        axes.append(np.linspace(a, b, n))
    if len(axes) == dim:
        axes = axes + axes
    if len(axes) != 2 * dim:
        raise SepdiagError(f"grid needs {dim} or {2 * dim} axes, got {len(axes)}")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def read_points(path: str, dim: int) -> np.ndarray:
    """Rows of ``2*dim`` numbers; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if i == 0:
                    continue
                raise SepdiagError(f"{path}: row {i + 1} is not numeric") from None
            if len(vals) != 2 * dim:
                raise SepdiagError(f"{path}: row {i + 1} has {len(vals)} values, expected {2 * dim}")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, 2 * dim)


def eval_rows(e: ExtensionEvaluator, box, pts: np.ndarray, jobs: int = 1) -> List[list]:
    d = box.dim
    m = e.witness.out_dim

    def row(p):
        x, y = p[:d], p[d:]
        head = [_fmt(v) for v in p]
        if not (box.contains(x) and box.contains(y)):
            return head + [""] * m + [OUTSIDE, "", ""]
        out = e.evaluate(x, y)
        return head + [_fmt(v) for v in out.value] + [str(out.piece), _fmt(out.phi_used), str(out.depth_cost)]

    if jobs <= 1:
        return [row(p) for p in pts]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(row, pts))


def eval_csv(e: ExtensionEvaluator, box, pts: np.ndarray, jobs: int = 1) -> str:
    d, m = box.dim, e.witness.out_dim
    header = [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)] + [f"f{i}" for i in range(m)]
    header += ["piece", "phi", "depth_cost"]
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(eval_rows(e, box, pts, jobs))
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args) -> cfgmod.ProblemConfig:
    raw = json.loads(open(args.config, encoding="utf-8").read())
    if args.seed is not None:
        raw["seed"] = args.seed
    return cfgmod.materialize(raw)


def cmd_build(args) -> int:
    pc = _load(args)
    e = cfgmod.build(pc)
    report = {"config": pc.data, "build": e.build_report}
    _emit(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_eval(args) -> int:
    pc = _load(args)
    e = cfgmod.build(pc)
    if (args.grid is None) == (args.points is None):
        raise SepdiagError("eval needs exactly one of --grid or --points")
    d = pc.box.dim
    pts = parse_grid(args.grid, d) if args.grid else read_points(args.points, d)
    _emit(eval_csv(e, pc.box, pts, args.jobs), args.out)
    return 0


def cmd_verify(args) -> int:
    pc = _load(args)
    results = run_suite(pc, jobs=args.jobs)
    report = suite_report(pc, results)
    _emit(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n", args.out)
    return 0 if report["ok"] else 1


def cmd_corpus(args) -> int:
    lines = []
    for name in CATALOGUE:
        w = ramp_witnesses(name)
        lines.append(f"witness\t{name}\t{w.template_text()}\tstable={str(w.stable).lower()}")
    for name in TWO_VARIABLE_CORPUS:
        lines.append(f"function\t{name}\t2*x*y/(x^2+y^2), 0 at the origin")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sepdiag", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="problem config (JSON)")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads")

    common(sub.add_parser("build", help="build an evaluator and print its report"))
    ev = sub.add_parser("eval", help="evaluate f on a grid or point list (CSV)")
    common(ev)
    ev.add_argument("--grid", help="a:b:n[,a:b:n] per coordinate of (x, y)")
    ev.add_argument("--points", help="CSV file of x..., y... rows")
    common(sub.add_parser("verify", help="run the config's probe suite (JSON)"))
    corpus = sub.add_parser("corpus", help="builtin corpus")
    corpus_sub = corpus.add_subparsers(dest="action", required=True)
    common(corpus_sub.add_parser("list", help="list catalogue witnesses and test functions"), needs_config=False)
    return p


COMMANDS = {"build": cmd_build, "eval": cmd_eval, "verify": cmd_verify, "corpus": cmd_corpus}


def _bind_values(argv: Sequence[str]) -> List[str]:
    # grid specs such as -1:1:101 start with '-' and would read as flags
    out: List[str] = []
    it = iter(argv)
    for a in it:
        if a in ("--grid", "--points"):
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = make_parser().parse_args(_bind_values(argv))
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be a u64", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (SepdiagError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
