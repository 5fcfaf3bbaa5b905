"""Parser and evaluator for closed-form source expressions.

Grammar (binary operators left-associative except '^'):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names resolve to the functions sin, cos, exp, the constants pi and e,
the coordinates (x for dim 1, x1..xd otherwise), or declared parameter
names.  Anything else is rejected at compile time with a position.
Evaluation is vectorized over numpy arrays of points.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionError

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": np.pi, "e": np.e}

_TOKEN_RE = re.compile(
    r"(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExpressionError(f"unexpected character {text[pos]!r}", position=pos)
        tokens.append(_Token(match.lastgroup, match.group(), pos))
        pos = match.end()
    return tokens


class _Parser:
    """Recursive descent over the token list; builds a tuple AST."""

    def __init__(self, tokens: list[_Token], length: int):
        self.tokens = tokens
        self.pos = 0
        self.length = length

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ExpressionError("unexpected end of expression", position=self.length)
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if tok is None or tok.kind != "op" or tok.text != op:
            where = tok.pos if tok is not None else self.length
            raise ExpressionError(f"expected {op!r}", position=where)
        self.pos += 1

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "op" and tok.text in ops

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExpressionError(f"unexpected token {tok.text!r}", position=tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.at_op("+", "-"):
            op = self.next().text
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.next().text
            node = ("mul" if op == "*" else "div", node, self.unary())
        return node

    def unary(self):
        if self.at_op("+", "-"):
            op = self.next().text
            inner = self.unary()
            return inner if op == "+" else ("neg", inner)
        return self.power()

    def power(self):
        base = self.atom()
        if self.at_op("^"):
            self.next()
            # Right operand is a unary so 2^-3 parses and 2^3^2 = 2^(3^2).
            return ("pow", base, self.unary())
        return base

    def atom(self):
        tok = self.next()
        if tok.kind == "num":
            return ("num", float(tok.text))
        if tok.kind == "name":
            if self.at_op("("):
                self.next()
                arg = self.expr()
                self.expect_op(")")
                if tok.text not in _FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok.text!r}", position=tok.pos)
                return ("call", tok.text, arg)
            return ("name", tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected token {tok.text!r}", position=tok.pos)


def _resolve_names(node, dim: int, parameters: tuple[str, ...], used: set):
    """Rewrite name nodes into constants, coordinates, or parameters."""
    kind = node[0]
    if kind == "num":
        return node
    if kind == "name":
        _, name, pos = node
        if name in _CONSTANTS:
            return ("num", _CONSTANTS[name])
        if name in parameters:
            used.add(name)
            return ("param", name)
        if dim == 1 and name in ("x", "x1"):
            return ("coord", 0)
        if dim > 1 and re.fullmatch(r"x\d+", name):
            axis = int(name[1:])
            if 1 <= axis <= dim:
                return ("coord", axis - 1)
        raise ExpressionError(f"unknown name {name!r} in dimension {dim}", position=pos)
    if kind == "neg":
        return ("neg", _resolve_names(node[1], dim, parameters, used))
    if kind == "call":
        return ("call", node[1], _resolve_names(node[2], dim, parameters, used))
    return (kind,
            _resolve_names(node[1], dim, parameters, used),
            _resolve_names(node[2], dim, parameters, used))


def _eval(node, coords: np.ndarray, params: dict):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "coord":
        return coords[:, node[1]]
    if kind == "param":
        return params[node[1]]
    if kind == "neg":
        return -_eval(node[1], coords, params)
    if kind == "call":
        return _FUNCTIONS[node[1]](_eval(node[2], coords, params))
    left = _eval(node[1], coords, params)
    right = _eval(node[2], coords, params)
    if kind == "add":
        return left + right
    if kind == "sub":
        return left - right
    if kind == "mul":
        return left * right
    if kind == "div":
        return left / right
    return np.power(left, right)


@dataclass(frozen=True)
class CompiledExpression:
    """A parsed expression bound to a dimension and a parameter list."""

    expression: str
    dim: int
    parameters: tuple[str, ...]
    root: tuple
    used_parameters: tuple[str, ...]

    def __call__(self, x, params: dict | None = None) -> np.ndarray:
        params = dict(params or {})
        missing = [p for p in self.used_parameters if p not in params]
        if missing:
            raise ExpressionError(f"missing parameter values for {missing}")
        coords = np.asarray(x, dtype=float)
        if coords.ndim == 0:
            coords = coords.reshape(1, 1)
        elif coords.ndim == 1:
            if self.dim == 1:
                coords = coords.reshape(-1, 1)
            else:
                coords = coords.reshape(1, -1)
        if coords.shape[1] != self.dim:
            raise ExpressionError(
                f"points of shape {np.shape(x)} do not match dimension {self.dim}"
            )
        with np.errstate(all="ignore"):
            vals = _eval(self.root, coords, params)
        return np.broadcast_to(np.asarray(vals, dtype=float), (coords.shape[0],)).copy()


def compile_expression(text: str, dim: int, parameters=()) -> CompiledExpression:
    """Parse `text` and bind names for a `dim`-dimensional domain.

    Parameters named in `parameters` may appear in the expression; their
    values are supplied at call time.  Raises ExpressionError with a
    character position on any lexical, syntactic, or name error.
    """
    if dim not in (1, 2, 3):
        raise ExpressionError(f"dimension must be 1, 2, or 3, got {dim}")
    parameters = tuple(str(p) for p in parameters)
    clash = [p for p in parameters if p in _FUNCTIONS or p in _CONSTANTS]
    if clash:
        raise ExpressionError(f"parameter names {clash} shadow built-ins")
    tokens = _tokenize(text)
    if not tokens:
        raise ExpressionError("empty expression", position=0)
    used: set = set()
    root = _resolve_names(_Parser(tokens, len(text)).parse(), dim, parameters, used)
    return CompiledExpression(text, dim, parameters, root, tuple(sorted(used)))
