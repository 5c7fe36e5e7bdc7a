"""A tiny scalar expression language for defining fields on grids.

Grammar (all binary operators left-associative)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Names are grid coordinates ``x1 .. xr``, the constant ``pi`` and any
parameters bound at evaluation time.  Unary minus binds tighter than ``*``,
so ``-x1*x2`` reads as ``(-x1)*x2``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np

from .exceptions import ExprEvalError, ExprSyntaxError

FUNCTIONS: dict[str, tuple[int, Callable]] = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "tan": (1, np.tan),
    "sinh": (1, np.sinh),
    "cosh": (1, np.cosh),
    "tanh": (1, np.tanh),
    "exp": (1, np.exp),
    "sqrt": (1, np.sqrt),
    "atan2": (2, np.arctan2),
}
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple[Expr, ...]
    pos: int = field(default=-1, compare=False, repr=False)


Expr = Union[Num, Var, Neg, BinOp, Call]


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    i = 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", _byte_offset(src, i), "operator or operand")
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), i))
        i = m.end()
    toks.append(_Tok("end", "", len(src)))
    return toks


def _byte_offset(src: str, i: int) -> int:
    return len(src[:i].encode("utf-8"))


class _Parser:
    def __init__(self, src: str) -> None:
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, message: str, expected: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ExprSyntaxError(message, _byte_offset(self.src, tok.pos), expected)

    def take(self, text: str, expected: str) -> _Tok:
        if self.tok.text != text or self.tok.kind != "op":
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            self.fail(f"unexpected {found}", expected)
        tok = self.tok
        self.i += 1
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected {self.tok.text!r}", "operator or end of input")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            tok = self.tok
            self.i += 1
            node = BinOp(tok.text, node, self.term(), _byte_offset(self.src, tok.pos))
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            tok = self.tok
            self.i += 1
            node = BinOp(tok.text, node, self.unary(), _byte_offset(self.src, tok.pos))
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            tok = self.tok
            self.i += 1
            return Neg(self.unary(), _byte_offset(self.src, tok.pos))
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        pos = _byte_offset(self.src, tok.pos)
        if tok.kind == "num":
            self.i += 1
            value = float(tok.text)
            if not math.isfinite(value):
                self.fail("number out of range", "finite number", tok)
            return Num(value, pos)
        if tok.kind == "name":
            self.i += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok, pos)
            return Var(tok.text, pos)
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            node = self.expr()
            self.take(")", "')'")
            return node
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        self.fail(f"unexpected {found}", "number, name, '-' or '('")

    def call(self, name: _Tok, pos: int) -> Call:
        if name.text not in FUNCTIONS:
            self.fail(f"unknown function {name.text!r}", "one of " + ", ".join(FUNCTIONS), name)
        self.take("(", "'('")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.i += 1
            args.append(self.expr())
        self.take(")", "',' or ')'")
        arity = FUNCTIONS[name.text][0]
        if len(args) != arity:
            self.fail(f"{name.text} takes {arity} argument(s), got {len(args)}", f"{arity} argument(s)", name)
        return Call(name.text, tuple(args), pos)


def parse_expr(src: str) -> Expr:
    """Parse ``src``; raises :class:`ExprSyntaxError` with a byte offset."""
    return _Parser(src).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 4


def to_source(node: Expr) -> str:
    """Inverse of :func:`parse_expr` up to whitespace and source positions."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return f"-({inner})" if _prec(node.operand) < 3 else f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
    p = _PREC[node.op]
    left = to_source(node.left)
    right = to_source(node.right)
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------------------
# evaluation


def variables(node: Expr) -> set[str]:
    """Free names other than built-in constants."""
    if isinstance(node, Var):
        return set() if node.name in CONSTANTS else {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set().union(*(variables(a) for a in node.args))


def _first_bad(mask: np.ndarray) -> list[int] | None:
    if np.ndim(mask) == 0:
        return [] if bool(mask) else None
    hits = np.argwhere(mask)
    return [int(i) for i in hits[0]] if len(hits) else None


def evaluate(node: Expr, env: Mapping[str, object] | None = None, src: str | None = None):
    """Evaluate elementwise over numpy arrays (or scalars) bound in ``env``.

    Division by zero, square roots of negatives and non-finite function
    results raise :class:`ExprEvalError` naming the source offset and the
    first offending grid node.
    """
    env = dict(env or {})

    def fail(message: str, at: Expr, bad) -> None:
        raise ExprEvalError(message, offset=at.pos, node=_first_bad(bad), source=src)

    def ev(n: Expr):
        if isinstance(n, Num):
            return n.value
        if isinstance(n, Var):
            if n.name in env:
                return env[n.name]
            if n.name in CONSTANTS:
                return CONSTANTS[n.name]
            raise ExprEvalError(f"unbound name {n.name!r}", offset=n.pos, node=None, source=src)
        if isinstance(n, Neg):
            return -ev(n.operand)
        if isinstance(n, BinOp):
            a, b = ev(n.left), ev(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            zero = np.asarray(b) == 0
            if np.any(zero):
                fail("division by zero", n, zero)
            return np.divide(a, b)
        args = [ev(a) for a in n.args]
        if n.func == "sqrt":
            neg = np.asarray(args[0]) < 0
            if np.any(neg):
                fail("square root of a negative number", n, neg)
        with np.errstate(all="ignore"):
            out = FUNCTIONS[n.func][1](*args)
        bad = ~np.isfinite(out)
        if np.any(bad):
            fail(f"{n.func} produced a non-finite value", n, bad)
        return out

    return ev(node)


# ---------------------------------------------------------------------------
# substitution and symbolic derivatives


def substitute(node: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Replace variables by expression trees."""
    if isinstance(node, Var):
        return bindings.get(node.name, node)
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, bindings), node.pos)
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, bindings), substitute(node.right, bindings), node.pos)
    return Call(node.func, tuple(substitute(a, bindings) for a in node.args), node.pos)


def _is(node: Expr, value: float) -> bool:
    return isinstance(node, Num) and node.value == value


def _add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0):
        return a
    if _is(a, 0):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 0) or _is(b, 0):
        return Num(0.0)
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return Num(0.0)
    if _is(b, 1):
        return a
    return BinOp("/", a, b)


def _neg(a: Expr) -> Expr:
    if _is(a, 0):
        return a
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _call(name: str, *args: Expr) -> Expr:
    return Call(name, tuple(args))


def diff(node: Expr, var: str) -> Expr:
    """Symbolic derivative with respect to ``var`` (lightly simplified)."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0) if node.name == var else Num(0.0)
    if isinstance(node, Neg):
        return _neg(diff(node.operand, var))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = diff(a, var), diff(b, var)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        # (a/b)' = a'/b - a b' / b^2
        return _sub(_div(da, b), _div(_mul(a, db), _mul(b, b)))
    u = node.args[0]
    du = diff(u, var)
    f = node.func
    if f == "atan2":
        y, x = node.args
        dy, dx = du, diff(x, var)
        den = _add(_mul(x, x), _mul(y, y))
        return _div(_sub(_mul(x, dy), _mul(y, dx)), den)
    if _is(du, 0):
        return Num(0.0)
    if f == "sin":
        outer = _call("cos", u)
    elif f == "cos":
        outer = _neg(_call("sin", u))
    elif f == "tan":
        outer = _div(Num(1.0), _mul(_call("cos", u), _call("cos", u)))
    elif f == "sinh":
        outer = _call("cosh", u)
    elif f == "cosh":
        outer = _call("sinh", u)
    elif f == "tanh":
        outer = _div(Num(1.0), _mul(_call("cosh", u), _call("cosh", u)))
    elif f == "exp":
        outer = node
    elif f == "sqrt":
        outer = _div(Num(0.5), node)
    else:  # pragma: no cover - FUNCTIONS and this table move together
        raise ValueError(f"no derivative rule for {f}")
    return _mul(outer, du)


@dataclass(frozen=True)
class ScalarExpr:
    """Parsed expression together with its source text."""

    source: str
    tree: Expr

    @classmethod
    def parse(cls, src: str) -> ScalarExpr:
        return cls(src, parse_expr(src))

    def __call__(self, **env):
        return evaluate(self.tree, env, self.source)

    def __str__(self) -> str:
        return to_source(self.tree)
