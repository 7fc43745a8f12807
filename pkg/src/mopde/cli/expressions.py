"""Scalar expression language for configuration values.

Grammar (``^`` binds tighter than unary minus and is right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Names are ``t``, ``x1``, ``x2`` and the constant ``pi``; functions are
``sin cos exp abs`` (one argument), ``min max`` (two) and
``step(t, t_star, a, b)``, which is ``a`` for ``t <= t_star`` and ``b`` after.
The breakpoint of a ``step`` must be a constant expression.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

VARIABLES = ("t", "x1", "x2")
CONSTANTS = {"pi": np.pi}
FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "abs": 1, "min": 2, "max": 2, "step": 4}


class ExpressionError(ValueError):
    """Syntax or arity error; ``col`` is 1-based within the expression text."""

    def __init__(self, message, col):
        super().__init__(f"{message} (column {col})")
        self.message = message
        self.col = col


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple["Node", ...]


Node = Union[Num, Name, Unary, Binary, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExpressionError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        start = m.start(kind) + 1
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, col = self.take()
        if val != value:
            raise ExpressionError(f"expected {value!r}, found {val or 'end of input'!r}", col)

    def parse(self):
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r}", col)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            return Unary(op, self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, val, col = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {val!r}", col)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                close = self.peek()
                self.expect(")")
                if len(args) != FUNCTIONS[val]:
                    raise ExpressionError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", close[2]
                    )
                node = Call(val, tuple(args))
                if val == "step" and not is_constant(args[1]):
                    raise ExpressionError("step breakpoint must be a constant", col)
                return node
            if val in VARIABLES or val in CONSTANTS:
                return Name(val)
            raise ExpressionError(f"unknown name {val!r}", col)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected {val or 'end of input'!r}", col)


def parse(text: str) -> Node:
    return _Parser(text).parse()


def to_source(node: Node) -> str:
    """Canonical text; ``parse(to_source(n)) == n``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.func}({', '.join(to_source(a) for a in node.args)})"


def names(node: Node) -> set:
    if isinstance(node, Name):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Unary):
        return names(node.operand)
    if isinstance(node, Binary):
        return names(node.left) | names(node.right)
    return set().union(*(names(a) for a in node.args))


def is_constant(node: Node) -> bool:
    return not (names(node) & set(VARIABLES))


def breakpoints(node: Node) -> list:
    """Breakpoints ``t_star`` of every ``step`` whose first argument depends on ``t``."""
    out = []
    if isinstance(node, Call):
        if node.func == "step" and "t" in names(node.args[0]):
            out.append(float(evaluate(node.args[1], 0.0, np.zeros((1, 2)))))
        for a in node.args:
            out += breakpoints(a)
    elif isinstance(node, Unary):
        out += breakpoints(node.operand)
    elif isinstance(node, Binary):
        out += breakpoints(node.left) + breakpoints(node.right)
    return out


_UNARY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}


def evaluate(node: Node, t, x):
    """Evaluate at ``t`` (scalar or ``(n,)``) and ``x`` (``(n, d)``)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        if node.name == "t":
            return t
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        axis = int(node.name[1:]) - 1
        if x.shape[1] <= axis:
            raise ValueError(f"{node.name} used in a {x.shape[1]}-dimensional problem")
        return x[:, axis]
    if isinstance(node, Unary):
        v = evaluate(node.operand, t, x)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        a = evaluate(node.left, t, x)
        b = evaluate(node.right, t, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    args = [evaluate(a, t, x) for a in node.args]
    if node.func in _UNARY_FUNCS:
        return _UNARY_FUNCS[node.func](args[0])
    if node.func == "min":
        return np.minimum(args[0], args[1])
    if node.func == "max":
        return np.maximum(args[0], args[1])
    s, ts, a, b = args
    return np.where(np.asarray(s) <= ts, a, b)


def compile_expr(node: Node):
    """``f(t, x)`` returning an array of shape ``(n,)`` for ``x`` of shape ``(n, d)``."""

    def f(t, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        t = np.asarray(t, dtype=float)
        n = x.shape[0]
        with np.errstate(all="ignore"):
            v = evaluate(node, t, x)
        return np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()

    f.ast = node
    return f


def constant_value(node: Node) -> float:
    if not is_constant(node):
        raise ValueError("expression is not constant")
    return float(evaluate(node, 0.0, np.zeros((1, 2))))
