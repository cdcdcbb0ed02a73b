"""Tiny arithmetic expression grammar for config-defined f and g.

Grammar (EBNF, frozen):

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = "-" unary | atom ;
    atom   = NUMBER | "x" | "y" | FUNC "(" expr { "," expr } ")"
           | "(" expr ")" ;
    FUNC   = "min" | "max" | "abs" ;
    NUMBER = digits [ "." digits ] [ ("e" | "E") [sign] digits ] ;

``min``/``max`` take two or more arguments, ``abs`` exactly one.  Parsing
reports the column of the offending character; division is validated by
probing the expression over a sample grid of the domain's bounding box and
rejecting denominators below 1e-300 in magnitude.
"""

from __future__ import annotations

import re

import numpy as np

__all__ = ["ExpressionError", "parse_expression", "Expression"]

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/(),])
  | (?P<ws>\s+)
""", re.VERBOSE)

_FUNCS = {"min": (2, None), "max": (2, None), "abs": (1, 1)}

DIV_FLOOR = 1e-300


class ExpressionError(ValueError):
    def __init__(self, msg: str, column: int):
        super().__init__(f"column {column}: {msg}")
        self.column = column


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ExpressionError(f"unexpected character {text[pos]!r}",
                                  pos + 1)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op: str):
        kind, val, col = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}, found {val or 'end'!r}",
                                  col)

    def parse(self):
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected trailing {val!r}", col)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                node = (("add" if val == "+" else "sub"), node, rhs)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.unary()
                node = (("mul" if val == "*" else "div"), node, rhs)
            else:
                return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        kind, val, col = self.take()
        if kind == "num":
            return ("num", float(val))
        if kind == "name":
            if val in ("x", "y"):
                return ("var", val)
            if val in _FUNCS:
                self.expect_op("(")
                args = [self.expr()]
                while True:
                    k2, v2, c2 = self.take()
                    if k2 == "op" and v2 == ",":
                        args.append(self.expr())
                    elif k2 == "op" and v2 == ")":
                        break
                    else:
                        raise ExpressionError(
                            f"expected ',' or ')', found {v2 or 'end'!r}", c2)
                lo, hi = _FUNCS[val]
                if len(args) < lo or (hi is not None and len(args) > hi):
                    raise ExpressionError(
                        f"{val} takes {'exactly ' + str(hi) if hi else 'at least ' + str(lo)} argument(s)",
                        col)
                return ("call", val, args)
            raise ExpressionError(f"unknown name {val!r}", col)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected {val or 'end'!r}", col)


def _eval(node, x, y):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        if node[1] == "x":
            return x
        if y is None:
            raise ExpressionError("variable 'y' is not available on a 1D "
                                  "domain", 1)
        return y
    if op == "neg":
        return -_eval(node[1], x, y)
    if op in ("add", "sub", "mul", "div"):
        a = _eval(node[1], x, y)
        b = _eval(node[2], x, y)
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if np.min(np.abs(b)) < DIV_FLOOR:
            raise ExpressionError("division by a value below 1e-300", 1)
        return a / b
    if op == "call":
        args = [_eval(a, x, y) for a in node[2]]
        if node[1] == "abs":
            return np.abs(args[0])
        red = np.minimum if node[1] == "min" else np.maximum
        out = args[0]
        for a in args[1:]:
            out = red(out, a)
        return out
    raise AssertionError(f"bad node {node!r}")


class Expression:
    """Parsed arithmetic expression over coordinates x (and y in 2D)."""

    def __init__(self, text: str):
        self.text = text
        self.ast = _Parser(text).parse()
        self.uses_y = self._uses_y(self.ast)

    @staticmethod
    def _uses_y(node) -> bool:
        if node[0] == "var":
            return node[1] == "y"
        if node[0] in ("neg",):
            return Expression._uses_y(node[1])
        if node[0] in ("add", "sub", "mul", "div"):
            return Expression._uses_y(node[1]) or Expression._uses_y(node[2])
        if node[0] == "call":
            return any(Expression._uses_y(a) for a in node[2])
        return False

    def __call__(self, point) -> float:
        x = float(point[0])
        y = float(point[1]) if len(point) > 1 else None
        return float(_eval(self.ast, x, y))

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        x = points[:, 0]
        y = points[:, 1] if points.shape[1] > 1 else None
        out = _eval(self.ast, x, y)
        return np.broadcast_to(np.asarray(out, dtype=np.float64),
                               (points.shape[0],)).copy()

    def probe(self, bbox_lo, bbox_hi, dim: int, n: int = 33) -> None:
        """Evaluate over a bounding-box sample grid; raises on near-zero
        divisors or a 'y' reference on a 1D domain."""
        xs = np.linspace(bbox_lo[0], bbox_hi[0], n)
        if dim == 1:
            pts = xs[:, None]
        else:
            ys = np.linspace(bbox_lo[1], bbox_hi[1], n)
            gx, gy = np.meshgrid(xs, ys)
            pts = np.column_stack([gx.ravel(), gy.ravel()])
        if self.uses_y and dim == 1:
            raise ExpressionError("variable 'y' is not available on a 1D "
                                  "domain", 1)
        self.eval_many(pts)


def parse_expression(text: str) -> Expression:
    return Expression(text)
