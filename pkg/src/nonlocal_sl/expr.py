"""Scalar expressions for the nonlinearity f(x, v) and boundary functions g(v).

A small recursive-descent parser produces an immutable tree of `Const`, `Var`,
`Unary` and `Binary` nodes.  Trees can be evaluated on floats or numpy arrays,
differentiated symbolically and printed back to text that re-parses to an
equivalent tree.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative, '**' also accepted
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    DisallowedVariable,
    DomainError,
    ExprSyntaxError,
    UnknownIdentifier,
    UnsupportedDerivative,
)

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("+", "-", "*", "/", "^")
NAMED_CONSTANTS = {"pi": math.pi, "e": math.e}
KNOWN_VARIABLES = ("x", "v")


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return Binary("+", self, _lift(other))

    def __radd__(self, other):
        return Binary("+", _lift(other), self)

    def __sub__(self, other):
        return Binary("-", self, _lift(other))

    def __rsub__(self, other):
        return Binary("-", _lift(other), self)

    def __mul__(self, other):
        return Binary("*", self, _lift(other))

    def __rmul__(self, other):
        return Binary("*", _lift(other), self)

    def __truediv__(self, other):
        return Binary("/", self, _lift(other))

    def __neg__(self):
        return Unary("neg", self)

    def __pow__(self, other):
        return Binary("^", self, _lift(other))

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class Unary(Expr):
    op: str
    child: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


def _lift(value):
    if isinstance(value, Expr):
        return value
    return Const(float(value))


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        value = m.group(kind)
        if kind == "op" and value == "**":
            value = "^"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, allowed_vars):
        self.text = text
        self.allowed = frozenset(allowed_vars)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, tok, pos = self.advance()
        if tok != value or kind not in ("op",):
            raise ExprSyntaxError(f"expected {value!r}", pos)

    def parse(self):
        node = self.expr()
        kind, tok, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {tok!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        kind, tok, _ = self.peek()
        if kind == "op" and tok == "-":
            self.advance()
            return Unary("neg", self.unary())
        if kind == "op" and tok == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, tok, _ = self.peek()
        if kind == "op" and tok == "^":
            self.advance()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, tok, pos = self.advance()
        if kind == "num":
            return Const(float(tok))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if tok not in FUNCTIONS:
                    raise UnknownIdentifier(tok)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Unary(tok, arg)
            if tok in NAMED_CONSTANTS:
                return Const(NAMED_CONSTANTS[tok])
            if tok in KNOWN_VARIABLES:
                if tok not in self.allowed:
                    raise DisallowedVariable(tok, self.allowed)
                return Var(tok)
            if tok in self.allowed:
                return Var(tok)
            raise UnknownIdentifier(tok)
        if kind == "op" and tok == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected token {tok!r}", pos)


def parse(text, allowed_vars=("x", "v")):
    """Parse `text` into an expression tree.

    Names other than the functions, the constants ``pi``/``e`` and the
    variables in `allowed_vars` raise `UnknownIdentifier`; the known variables
    ``x``/``v`` used outside their context raise `DisallowedVariable`.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, allowed_vars).parse()


def parse_constant(text):
    """Parse and evaluate a variable-free expression such as ``pi/4``."""
    return float(evaluate(parse(text, ()), {}))


# ---------------------------------------------------------------------------
# evaluation

def variables(e):
    """Set of variable names occurring in `e`."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return variables(e.child)
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    return set()


def _check(values, what):
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        raise DomainError(what)
    return values


def _eval(e, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise DomainError(f"variable {e.name!r} is unbound") from None
    if isinstance(e, Unary):
        a = _eval(e.child, env)
        op = e.op
        if op == "neg":
            return -a
        if op == "sin":
            return np.sin(a)
        if op == "cos":
            return np.cos(a)
        if op == "exp":
            return _check(np.exp(a), "exp overflow")
        if op == "sqrt":
            if np.any(np.asarray(a) < 0):
                raise DomainError("sqrt of negative number")
            return np.sqrt(a)
        if op == "abs":
            return np.abs(a)
        raise ValueError(f"unknown unary op {op!r}")
    if isinstance(e, Binary):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if np.any(np.asarray(b) == 0):
                raise DomainError("division by zero")
            return a / b
        if op == "^":
            return _power(a, b)
        raise ValueError(f"unknown binary op {op!r}")
    raise TypeError(f"not an expression: {e!r}")


def _power(a, b):
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise DomainError("zero raised to a negative power")
    b_int = np.all(b_arr == np.round(b_arr))
    if not b_int and np.any(a_arr < 0):
        raise DomainError("negative base with non-integer exponent")
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.power(a_arr, b_arr)
    return _check(out, "power overflow")


def evaluate(e, env):
    """Evaluate `e` with variables bound by `env` (floats or numpy arrays).

    Returns a float when every binding is scalar.  Raises `DomainError` on
    division by zero, square roots of negatives, 0^negative and overflow.
    """
    with np.errstate(all="ignore"):
        out = _eval(e, env)
    out = _check(out, "non-finite result")
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


def evaluate_on(e, shape_like, env):
    """Evaluate and broadcast to the shape of `shape_like` (constants included)."""
    out = evaluate(e, env)
    return np.broadcast_to(np.asarray(out, dtype=float), np.shape(shape_like)).copy()


# ---------------------------------------------------------------------------
# differentiation

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def _fold(op, a, b=None):
    try:
        if b is None:
            return Const(float(_eval(Unary(op, a), {})))
        return Const(float(_eval(Binary(op, a, b), {})))
    except DomainError:
        return None


def simplify_unary(op, a):
    if _is_const(a):
        folded = _fold(op, a)
        if folded is not None:
            return folded
    if op == "neg" and isinstance(a, Unary) and a.op == "neg":
        return a.child
    return Unary(op, a)


def simplify_binary(op, a, b):
    if _is_const(a) and _is_const(b):
        folded = _fold(op, a, b)
        if folded is not None:
            return folded
    if op == "+":
        if _is_const(a, 0.0):
            return b
        if _is_const(b, 0.0):
            return a
    elif op == "-":
        if _is_const(b, 0.0):
            return a
        if _is_const(a, 0.0):
            return simplify_unary("neg", b)
    elif op == "*":
        if _is_const(a, 0.0) or _is_const(b, 0.0):
            return _ZERO
        if _is_const(a, 1.0):
            return b
        if _is_const(b, 1.0):
            return a
    elif op == "/":
        if _is_const(b, 1.0):
            return a
        if _is_const(a, 0.0):
            return _ZERO
    elif op == "^":
        if _is_const(b, 1.0):
            return a
        if _is_const(b, 0.0):
            return _ONE
    return Binary(op, a, b)


def diff(e, var):
    """Symbolic partial derivative of `e` with respect to `var`.

    Powers must have variable-free exponents; anything else raises
    `UnsupportedDerivative`.  The derivative of ``abs(a)`` is written as
    ``a/abs(a) * a'`` and is undefined where ``a = 0``.
    """
    if isinstance(e, Const):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.name == var else _ZERO
    if isinstance(e, Unary):
        a = e.child
        da = diff(a, var)
        if _is_const(da, 0.0):
            return _ZERO
        op = e.op
        if op == "neg":
            return simplify_unary("neg", da)
        if op == "sin":
            outer = simplify_unary("cos", a)
        elif op == "cos":
            outer = simplify_unary("neg", simplify_unary("sin", a))
        elif op == "exp":
            outer = e
        elif op == "sqrt":
            outer = simplify_binary("/", Const(0.5), e)
        elif op == "abs":
            outer = simplify_binary("/", a, e)
        else:
            raise ValueError(f"unknown unary op {op!r}")
        return simplify_binary("*", outer, da)
    if isinstance(e, Binary):
        a, b, op = e.left, e.right, e.op
        if op == "^":
            if variables(b):
                raise UnsupportedDerivative(f"exponent {to_text(b)!r} is not constant")
            da = diff(a, var)
            if _is_const(da, 0.0):
                return _ZERO
            c = Const(float(_eval(b, {})))
            reduced = simplify_binary("^", a, simplify_binary("-", c, _ONE))
            return simplify_binary("*", simplify_binary("*", c, reduced), da)
        da = diff(a, var)
        db = diff(b, var)
        if op in ("+", "-"):
            return simplify_binary(op, da, db)
        if op == "*":
            return simplify_binary("+", simplify_binary("*", da, b), simplify_binary("*", a, db))
        if op == "/":
            num = simplify_binary("-", simplify_binary("*", da, b), simplify_binary("*", a, db))
            return simplify_binary("/", num, simplify_binary("^", b, Const(2.0)))
        raise ValueError(f"unknown binary op {op!r}")
    raise TypeError(f"not an expression: {e!r}")


def substitute(e, var, replacement):
    """Replace every occurrence of variable `var` by the tree `replacement`."""
    if isinstance(e, Var):
        return replacement if e.name == var else e
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.child, var, replacement))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    return e


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _num(value):
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        raise DomainError(f"cannot print non-finite constant {text}")
    return text[:-2] if text.endswith(".0") else text


def to_text(e):
    """Render `e` as text that `parse` maps back to an equal tree."""
    return _render(e)[0]


def _render(e):
    # returns (text, precedence of the outermost construct)
    if isinstance(e, Const):
        if e.value < 0 or (e.value == 0 and math.copysign(1.0, e.value) < 0):
            return "(" + _num(e.value) + ")", 5
        return _num(e.value), 5
    if isinstance(e, Var):
        return e.name, 5
    if isinstance(e, Unary):
        inner, p = _render(e.child)
        if e.op == "neg":
            if p < _PREC["neg"]:
                inner = f"({inner})"
            return "-" + inner, _PREC["neg"]
        return f"{e.op}({inner})", 5
    if isinstance(e, Binary):
        op = e.op
        prec = _PREC[op]
        left, lp = _render(e.left)
        right, rp = _render(e.right)
        if op == "^":
            # right associative: base needs parens at or below ^ precedence
            if lp <= prec:
                left = f"({left})"
            if rp < _PREC["neg"]:
                right = f"({right})"
        else:
            if lp < prec:
                left = f"({left})"
            if rp <= prec:
                right = f"({right})"
        sep = " " if op in "+-" else ""
        return f"{left}{sep}{op}{sep}{right}", prec
    raise TypeError(f"not an expression: {e!r}")
