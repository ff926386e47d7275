"""A small scalar expression language for model entries.

Grammar (whitespace is insignificant)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := number | "x" digits | func "(" expr ")" | "(" expr ")"
    func   := sin | cos | tan | exp | sqrt | abs

``^`` is right-associative and binds tighter than unary minus, so ``-x1^2``
is ``-(x1^2)``. Variables are 1-based: ``x1`` is the first state coordinate.

Evaluation is vectorized: a state may be an ``(n,)`` vector or an
``(..., n)`` stack, and the result has the leading shape.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
    VariableIndexError,
)

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


class Node:
    """Base class of expression tree nodes."""

    def compile(self):
        """Return a function of the state array evaluating this subtree.

        Callers are expected to silence floating-point warnings; domain
        violations are detected explicitly and raise :class:`DomainError`.
        """
        raise NotImplementedError

    def evaluate(self, x):
        with np.errstate(all="ignore"):
            return self.compile()(np.asarray(x, dtype=float))

    def variables(self) -> set[int]:
        return set()


@dataclass(frozen=True)
class Const(Node):
    value: float

    def compile(self):
        v = np.float64(self.value)
        return lambda x: v

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Node):
    index: int  # 1-based

    def compile(self):
        i = self.index - 1
        return lambda x: x[..., i]

    def variables(self):
        return {self.index}

    def __str__(self):
        return f"x{self.index}"


def _sqrt(a):
    if np.any(a < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(a)


def _div(a, b):
    if isinstance(b, np.ndarray) and b.ndim:
        if np.any(b == 0):
            raise DomainError("division by zero")
    elif b == 0:
        raise DomainError("division by zero")
    return a / b


def _pow(a, b):
    out = np.power(a, b)
    if isinstance(out, np.ndarray) and out.ndim:
        if np.all(np.isfinite(out)):
            return out
    elif math.isfinite(out):
        return out
    if np.any((a == 0) & (b < 0)):
        raise DomainError("zero raised to a negative power")
    if np.any(np.isnan(out) & ~np.isnan(a) & ~np.isnan(b)):
        raise DomainError("negative base raised to a non-integer power")
    return out


_BINARY = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": _div,
    "^": _pow,
}


@dataclass(frozen=True)
class Unary(Node):
    op: str  # "neg" or a key of FUNCTIONS
    arg: Node

    def compile(self):
        a = self.arg.compile()
        if self.op == "neg":
            return lambda x: -a(x)
        fn = _sqrt if self.op == "sqrt" else FUNCTIONS[self.op]
        return lambda x: fn(a(x))

    def variables(self):
        return self.arg.variables()

    def __str__(self):
        if self.op == "neg":
            return f"(-{self.arg})"
        return f"{self.op}({self.arg})"


@dataclass(frozen=True)
class Binary(Node):
    op: str  # one of + - * / ^
    left: Node
    right: Node

    def compile(self):
        a, b, fn = self.left.compile(), self.right.compile(), _BINARY[self.op]
        return lambda x: fn(a(x), b(x))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its source text."""

    source: str
    root: Node
    n: int
    fn: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.fn is None:
            object.__setattr__(self, "fn", self.root.compile())

    def __call__(self, x):
        return eval_expression(self, x)

    def __str__(self):
        return self.source


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _tokenize(self, text):
        tokens = []
        i = 0
        while i < len(text):
            m = _TOKEN.match(text, i)
            if m is None:
                raise ExpressionSyntaxError(f"unexpected character {text[i]!r}", text, i)
            kind = m.lastgroup
            if kind != "ws":
                tokens.append((kind, m.group(), i))
            i = m.end()
        tokens.append(("end", "", len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, at = self.advance()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", self.text, at)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, at = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {text!r}", self.text, at)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Unary("neg", self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return Binary("^", base, self.factor())
        return base

    def atom(self):
        kind, text, at = self.advance()
        if kind == "number":
            return Const(float(text))
        if kind == "name":
            if re.fullmatch(r"x\d+", text):
                index = int(text[1:])
                if not 1 <= index <= self.n:
                    raise VariableIndexError(
                        f"variable {text} out of range for n={self.n}", self.text, at
                    )
                return Var(index)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", self.text, at)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {found}", self.text, at)


def parse_expression(text: str, n: int) -> Expression:
    """Parse ``text`` into an expression over states of dimension ``n``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression")
    return Expression(text, _Parser(text, n).parse(), n)


def eval_expression(expr: Expression | Node, x):
    """Evaluate at a state (or a stack of states along the leading axes).

    Returns a float for a single state. Division by zero, square roots of
    negatives and non-real powers raise :class:`DomainError`; overflow
    follows IEEE semantics.
    """
    root = expr.root if isinstance(expr, Expression) else expr
    x = np.asarray(x, dtype=float)
    if isinstance(expr, Expression) and x.shape[-1:] != (expr.n,):
        raise DimensionError(f"expression expects states of length {expr.n}, got shape {x.shape}")
    fn = expr.fn if isinstance(expr, Expression) else root.compile()
    with np.errstate(all="ignore"):
        out = fn(x)
    out = np.broadcast_to(out, x.shape[:-1]) if x.ndim > 1 else out
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)
