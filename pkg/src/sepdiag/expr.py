"""Arithmetic expression language for continuous witness functions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := number | 'x' '[' int ']' | 'n' | fn '(' args ')' | '(' expr ')' | '-' factor

``n`` is the template parameter of a witness sequence; it must be bound
when the expression is compiled.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

from .errors import ExprEvalError, ExprSyntaxError, InputError

__all__ = [
    "Num",
    "Var",
    "Param",
    "Neg",
    "Bin",
    "Call",
    "Expr",
    "FUNCTIONS",
    "parse",
    "to_text",
    "compile_expr",
    "free_params",
    "max_index",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Param, Neg, Bin, Call]


def _clamp(v: float, lo: float, hi: float) -> float:
    return min(max(v, lo), hi)


def _exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        raise ExprEvalError(f"exp overflow at argument {v!r}") from None


# name -> (min arity, max arity or None for variadic, implementation)
FUNCTIONS: dict = {
    "min": (2, None, min),
    "max": (2, None, max),
    "clamp": (3, 3, _clamp),
    "abs": (1, 1, abs),
    "sin": (1, 1, math.sin),
    "exp": (1, 1, _exp),
}

PARAMS = ("n",)

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/()\[\],])"
    r")"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok[2], self.text)

    def expect(self, value: str):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            desc = "end of input" if tok[0] == "end" else repr(tok[1])
            self.fail(f"expected {value!r}, found {desc}")
        return self.take()

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Bin(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.take()
            return Num(float(value))
        if kind == "op" and value == "-":
            self.take()
            return Neg(self.factor())
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            self.take()
            if value == "x":
                self.expect("[")
                idx = self.peek()
                if idx[0] != "num" or not idx[1].isdigit():
                    self.fail("expected a coordinate index")
                self.take()
                self.expect("]")
                return Var(int(idx[1]))
            if value in PARAMS:
                return Param(value)
            if value in FUNCTIONS:
                return self.call(value, tok)
            self.fail(f"unknown identifier {value!r}", tok)
        if kind == "end":
            self.fail("unexpected end of input")
        self.fail(f"unexpected token {value!r}")

    def call(self, name: str, tok) -> Expr:
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        lo, hi, _ = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = f"{lo}" if hi == lo else f"at least {lo}"
            raise ExprSyntaxError(
                f"arity mismatch: {name} takes {want} arguments, got {len(args)}",
                tok[2],
                self.text,
            )
        return Call(name, tuple(args))


def parse(text: str) -> Expr:
    return _Parser(text).parse()


def _prec(node: Expr) -> int:
    if isinstance(node, Bin):
        return 1 if node.op in "+-" else 2
    return 3


def _num_text(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(node: Expr) -> str:
    """Print ``node`` so that ``parse(to_text(node)) == node``."""
    if isinstance(node, Num):
        s = _num_text(node.value)
        return f"({s})" if node.value < 0 or s.startswith("-") else s
    if isinstance(node, Var):
        return f"x[{node.index}]"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        return f"-({inner})" if _prec(node.arg) < 3 else f"-{inner}"
    if isinstance(node, Bin):
        p = _prec(node)
        left = to_text(node.left)
        if _prec(node.left) < p:
            left = f"({left})"
        right = to_text(node.right)
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Call):
        return f"{node.name}(" + ", ".join(to_text(a) for a in node.args) + ")"
    raise TypeError(f"not an expression node: {node!r}")


def free_params(node: Expr) -> set:
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Neg):
        return free_params(node.arg)
    if isinstance(node, Bin):
        return free_params(node.left) | free_params(node.right)
    if isinstance(node, Call):
        out = set()
        for a in node.args:
            out |= free_params(a)
        return out
    return set()


def max_index(node: Expr) -> int:
    """Largest coordinate index referenced, or -1 if none."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_index(node.arg)
    if isinstance(node, Bin):
        return max(max_index(node.left), max_index(node.right))
    if isinstance(node, Call):
        return max(max_index(a) for a in node.args)
    return -1


def compile_expr(
    node: Expr,
    params: Optional[Mapping[str, float]] = None,
    dim: Optional[int] = None,
) -> Callable[[Sequence[float]], float]:
    """Compile to a closure ``x -> float``; parameters are bound as constants."""
    params = dict(params or {})
    missing = free_params(node) - set(params)
    if missing:
        raise InputError(f"unbound parameter(s): {', '.join(sorted(missing))}")
    if dim is not None and max_index(node) >= dim:
        raise InputError(
            f"coordinate x[{max_index(node)}] out of range for dimension {dim}"
        )
    return _compile(node, params)


def _compile(node: Expr, params):
    if isinstance(node, Num):
        v = node.value
        return lambda x: v
    if isinstance(node, Var):
        i = node.index
        return lambda x: float(x[i])
    if isinstance(node, Param):
        v = float(params[node.name])
        return lambda x: v
    if isinstance(node, Neg):
        a = _compile(node.arg, params)
        return lambda x: -a(x)
    if isinstance(node, Bin):
        a = _compile(node.left, params)
        b = _compile(node.right, params)
        if node.op == "+":
            return lambda x: a(x) + b(x)
        if node.op == "-":
            return lambda x: a(x) - b(x)
        if node.op == "*":
            return lambda x: a(x) * b(x)

        def div(x):
            den = b(x)
            if den == 0.0:
                raise ExprEvalError("division by zero")
            return a(x) / den

        return div
    if isinstance(node, Call):
        fn = FUNCTIONS[node.name][2]
        args = [_compile(a, params) for a in node.args]
        if len(args) == 1:
            (a0,) = args
            return lambda x: fn(a0(x))
        return lambda x: fn(*(a(x) for a in args))
    raise TypeError(f"not an expression node: {node!r}")
