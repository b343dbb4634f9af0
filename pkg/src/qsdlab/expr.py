"""Arithmetic expression grammar for drift and killing coefficients.

Configs supply coefficients as strings over the variable ``x``, so problem
files stay data.  Grammar (version ``expr-v1``):

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := unary ("**" unary)*            (right associative)
    unary   := ("+" | "-") unary | atom
    atom    := NUMBER | "x" | "pi" | "e"
             | NAME "(" expr ("," expr)? ")"
             | "(" expr ")"

Functions: exp, ln (alias log), sqrt, sin, cos, tan, abs, pow(a, b).
``^`` is accepted as a synonym for ``**``.

Parsing produces a tuple AST; ``compile_numpy`` renders it as a vectorized
numpy callable, ``scalar_source`` as ``math``-based source that numba can
jit.  Both evaluate the same arithmetic; only libm rounding can differ.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidExpression

GRAMMAR_VERSION = "expr-v1"

_FUNCS_1 = {"exp", "ln", "log", "sqrt", "sin", "cos", "tan", "abs"}
_FUNCS_2 = {"pow"}
_CONSTS = {"pi": math.pi, "e": math.e}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|\^|[+\-*/(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise InvalidExpression(f"unexpected character at position {pos}: {text[pos:pos + 8]!r}")
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            op = m.group("op")
            tokens.append(("op", "**" if op == "^" else op))
        pos = m.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            raise InvalidExpression(f"expected {kind}, found {tok[1]!r} in {self.text!r}")
        if value is not None and tok[1] != value:
            raise InvalidExpression(f"expected {value!r}, found {tok[1]!r} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise InvalidExpression(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            op = self.take()[1]
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            op = self.take()[1]
            node = ("mul" if op == "*" else "div", node, self.unary())
        return node

    def unary(self):
        # power binds tighter than unary minus: -x^2 is -(x^2)
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "**"):
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        kind, value = self.peek()
        if kind == "num":
            self.take()
            return ("num", float(value))
        if kind == "name":
            self.take()
            if value == "x":
                return ("var",)
            if value in _CONSTS:
                return ("num", _CONSTS[value])
            if value in _FUNCS_1 or value in _FUNCS_2:
                self.take("op", "(")
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.take("op", ")")
                want = 2 if value in _FUNCS_2 else 1
                if len(args) != want:
                    raise InvalidExpression(f"{value} takes {want} argument(s)")
                return ("call", "ln" if value == "log" else value, tuple(args))
            raise InvalidExpression(f"unknown name {value!r} (variable is 'x')")
        if (kind, value) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        raise InvalidExpression(f"unexpected token {value!r} in {self.text!r}")


def parse(text: str):
    """Parse an expression into its tuple AST."""
    return _Parser(text).parse()


_NUMPY_FUNCS = {"exp": "np.exp", "ln": "np.log", "sqrt": "np.sqrt", "sin": "np.sin",
                "cos": "np.cos", "tan": "np.tan", "abs": "np.abs"}
_MATH_FUNCS = {"exp": "math.exp", "ln": "math.log", "sqrt": "math.sqrt", "sin": "math.sin",
               "cos": "math.cos", "tan": "math.tan", "abs": "abs"}


def _render(node, funcs) -> str:
    op = node[0]
    if op == "num":
        return repr(node[1])
    if op == "var":
        return "x"
    if op == "neg":
        return f"(-{_render(node[1], funcs)})"
    if op in ("add", "sub", "mul", "div"):
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
        return f"({_render(node[1], funcs)} {sym} {_render(node[2], funcs)})"
    if op == "pow":
        return f"({_render(node[1], funcs)} ** {_render(node[2], funcs)})"
    if op == "call":
        name, args = node[1], node[2]
        if name == "pow":
            return f"({_render(args[0], funcs)} ** {_render(args[1], funcs)})"
        return f"{funcs[name]}({_render(args[0], funcs)})"
    raise InvalidExpression(f"malformed AST node {node!r}")


@dataclass(frozen=True)
class ExprFunc:
    """A parsed coefficient: vectorized callable plus scalar source for jitting."""

    text: str
    ast: tuple = field(repr=False)
    numpy_fn: object = field(repr=False)
    scalar_source: str = field(repr=False)

    def __call__(self, x):
        return self.numpy_fn(x)


def compile_expression(text: str) -> ExprFunc:
    """Compile expression text into an :class:`ExprFunc`.

    The vectorized form maps float arrays to float arrays of the same shape
    (constant expressions are broadcast); the scalar source is a complete
    ``def`` using ``math`` only.
    """
    ast = parse(text)
    np_src = (
        "def _f(x):\n"
        "    x = np.asarray(x, dtype=np.float64)\n"
        f"    out = np.asarray({_render(ast, _NUMPY_FUNCS)}, dtype=np.float64)\n"
        "    if out.shape != x.shape:\n"
        "        out = np.broadcast_to(out, x.shape).copy()\n"
        "    return out\n"
    )
    ns: dict = {"np": np}
    exec(compile(np_src, f"<expr {text!r}>", "exec"), ns)
    vec = ns["_f"]

    scalar_src = f"def _f(x):\n    return float({_render(ast, _MATH_FUNCS)})\n"
    return ExprFunc(text=text, ast=ast, numpy_fn=vec, scalar_source=scalar_src)


def probe_finite(fn, points, what: str = "expression"):
    """Evaluate ``fn`` on probe points; raise InvalidExpression on non-finite output."""
    pts = np.asarray(points, dtype=np.float64)
    with np.errstate(all="ignore"):
        try:
            vals = np.asarray(fn(pts), dtype=np.float64)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise InvalidExpression(f"{what} failed to evaluate on probe points: {exc}") from exc
    vals = np.broadcast_to(vals, pts.shape)
    if not np.all(np.isfinite(vals)):
        bad = pts[~np.isfinite(vals)][:3]
        raise InvalidExpression(f"{what} is non-finite at probe points {bad.tolist()}")
    return vals
