"""Scalar coordinate expressions with exact derivatives.

Expressions are parsed from a small closed grammar into an immutable tree.
Derivatives come from two routes that never touch finite differences:

* ``eval_jet`` propagates value, gradient and Hessian through the tree
  (forward mode, orders 0 to 2);
* ``derivative`` rewrites the tree symbolically, so higher orders are
  obtained by jetting a derivative tree.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := ('-'|'+') unary | factor
    factor := atom ('^' expo)?
    expo   := ('-'|'+') expo | atom
    atom   := number | 'pi' | ident | func '(' expr ')' | '(' expr ')'
    func   := exp | log | sin | cos | sinh | cosh | tanh | sqrt

Angles are radians.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprDomainError",
    "ScalarExpression",
    "JetValue",
    "parse",
    "eval_jet",
    "derivative",
    "substitute",
    "FUNCTIONS",
]

FUNCTIONS = ("exp", "log", "sin", "cos", "sinh", "cosh", "tanh", "sqrt")


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, source: str, offset: int):
        self.source = source
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset} in {source!r}")


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name: str, source: str, offset: int, valid: Sequence[str]):
        self.name = name
        self.valid = tuple(valid)
        listed = ", ".join(self.valid) if self.valid else "<none>"
        super().__init__(
            f"unknown identifier {name!r} (valid coordinates: {listed})", source, offset
        )


class ExprDomainError(ExprError, ArithmeticError):
    """Evaluation left the domain of an operation (log of non-positive, x/0, ...)."""

    def __init__(self, message: str, subexpression: "Node"):
        self.subexpression = to_text(subexpression)
        super().__init__(f"{message} in subexpression {self.subexpression!r}")


# --------------------------------------------------------------------------
# tree


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Num | Var | Neg | BinOp | Pow | Call


def variables_of(node: Node) -> frozenset[str]:
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, (Neg, Call)):
        return variables_of(node.arg)
    if isinstance(node, BinOp):
        return variables_of(node.left) | variables_of(node.right)
    return variables_of(node.base) | variables_of(node.exponent)


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(
                f"unexpected character {source[start]!r}", source, _byte_offset(source, start)
            )
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, coords: Sequence[str] | None):
        self.source = source
        self.coords = None if coords is None else tuple(coords)
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ExprSyntaxError(message, self.source, _byte_offset(self.source, tok[2]))

    def accept(self, *ops):
        kind, text, _ = self.tok
        if kind == "op" and text in ops:
            self.i += 1
            return text
        return None

    def expect(self, op):
        if not self.accept(op):
            kind, text, _ = self.tok
            found = "end of input" if kind == "end" else repr(text)
            raise self.error(f"expected {op!r}, found {found}")

    def parse(self) -> Node:
        node = self.expr()
        if self.tok[0] != "end":
            raise self.error(f"unexpected token {self.tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while (op := self.accept("+", "-")) is not None:
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while (op := self.accept("*", "/")) is not None:
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if (op := self.accept("-", "+")) is not None:
            arg = self.unary()
            return Neg(arg) if op == "-" else arg
        return self.factor()

    def factor(self):
        base = self.atom()
        if self.accept("^"):
            return Pow(base, self.expo())
        return base

    def expo(self):
        if (op := self.accept("-", "+")) is not None:
            arg = self.expo()
            return Neg(arg) if op == "-" else arg
        return self.atom()

    def atom(self):
        kind, text, _ = tok = self.tok
        if kind == "num":
            self.i += 1
            return Num(float(text))
        if kind == "ident":
            self.i += 1
            if text in FUNCTIONS:
                if not self.accept("("):
                    raise self.error(f"function {text!r} must be followed by '('", tok)
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text == "pi":
                return Num(math.pi)
            if self.coords is not None and text not in self.coords:
                raise UnknownIdentifierError(
                    text, self.source, _byte_offset(self.source, tok[2]), self.coords
                )
            return Var(text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise self.error(f"expected a number, identifier or '(', found {found}")


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    if isinstance(node, Num) and node.value < 0:
        return 3
    return 5


def _is_atom(node: Node) -> bool:
    return isinstance(node, (Var, Call)) or (isinstance(node, Num) and node.value >= 0)


def to_text(node: Node) -> str:
    """Print ``node`` so that re-parsing yields an evaluation-equivalent tree."""
    if isinstance(node, Num):
        text = repr(float(node.value))
        return text[:-2] if text.endswith(".0") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        return f"-{inner}" if _prec(node.arg) >= 3 else f"-({inner})"
    if isinstance(node, Pow):
        base = to_text(node.base)
        exp = to_text(node.exponent)
        if not _is_atom(node.base):
            base = f"({base})"
        if not _is_atom(node.exponent):
            exp = f"({exp})"
        return f"{base}^{exp}"
    p = _PREC[node.op]
    left = to_text(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = to_text(node.right)
    # a - (b + c) and a / (b * c) need the parentheses kept
    if _prec(node.right) < p or (_prec(node.right) == p and node.op in "-/"):
        right = f"({right})"
    return f"{left} {node.op} {right}"


# --------------------------------------------------------------------------
# public wrapper


@dataclass(frozen=True)
class ScalarExpression:
    """Immutable parsed expression.  ``variables`` lists the free coordinates."""

    root: Node
    source: str = ""

    @property
    def variables(self) -> frozenset[str]:
        return variables_of(self.root)

    def __str__(self) -> str:
        return to_text(self.root)

    def evaluate(self, point: Mapping[str, float]) -> float:
        return _eval(self.root, point)

    def jet(self, point: Mapping[str, float], order: int = 2) -> "JetValue":
        return eval_jet(self, point, order)

    def derivative(self, var: str) -> "ScalarExpression":
        return derivative(self, var)

    @property
    def is_constant(self) -> bool:
        return not self.variables


def parse(source: str, coords: Sequence[str] | None = None) -> ScalarExpression:
    """Parse ``source``; with ``coords`` given, other identifiers are rejected."""
    if not isinstance(source, str):
        raise TypeError(f"expression source must be a string, got {type(source).__name__}")
    return ScalarExpression(_Parser(source, coords).parse(), source)


def constant(value: float) -> ScalarExpression:
    return ScalarExpression(Num(float(value)), repr(float(value)))


# --------------------------------------------------------------------------
# plain evaluation


def _check(value: float, node: Node) -> float:
    if not math.isfinite(value):
        raise ExprDomainError("non-finite result", node)
    return value


def _eval(node: Node, env: Mapping[str, float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise ExprError(f"no value supplied for coordinate {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return _check(a + b, node)
        if node.op == "-":
            return _check(a - b, node)
        if node.op == "*":
            return _check(a * b, node)
        if b == 0.0:
            raise ExprDomainError("division by zero", node)
        return _check(a / b, node)
    if isinstance(node, Pow):
        a = _eval(node.base, env)
        b = _eval(node.exponent, env)
        return _check(_pow_value(a, b, node), node)
    return _check(_call_value(node.func, _eval(node.arg, env), node), node)


def _pow_value(a: float, b: float, node: Node) -> float:
    if a == 0.0 and b < 0:
        raise ExprDomainError("zero raised to a negative power", node)
    if a < 0 and not float(b).is_integer():
        raise ExprDomainError("negative base with non-integer exponent", node)
    try:
        return math.pow(a, b)
    except OverflowError:
        raise ExprDomainError("overflow", node) from None


def _call_value(func: str, u: float, node: Node) -> float:
    try:
        if func == "log":
            if u <= 0:
                raise ExprDomainError("log of non-positive value", node)
            return math.log(u)
        if func == "sqrt":
            if u < 0:
                raise ExprDomainError("sqrt of negative value", node)
            return math.sqrt(u)
        return getattr(math, func)(u)
    except OverflowError:
        raise ExprDomainError("overflow", node) from None


# --------------------------------------------------------------------------
# forward-mode jets


@dataclass(frozen=True)
class JetValue:
    """Value with first and second partials, ordered as ``coords``."""

    coords: tuple[str, ...]
    value: float
    gradient: np.ndarray
    hessian: np.ndarray | None = None

    @property
    def partials(self) -> dict[str, float]:
        return {c: float(self.gradient[i]) for i, c in enumerate(self.coords)}

    @property
    def second_partials(self) -> dict[tuple[str, str], float]:
        if self.hessian is None:
            return {}
        return {
            (a, b): float(self.hessian[i, j])
            for i, a in enumerate(self.coords)
            for j, b in enumerate(self.coords)
        }

    def partial(self, a: str) -> float:
        return float(self.gradient[self.coords.index(a)])

    def second_partial(self, a: str, b: str) -> float:
        if self.hessian is None:
            raise ValueError("jet was evaluated with order < 2")
        return float(self.hessian[self.coords.index(a), self.coords.index(b)])


class _Jet:
    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h):
        self.v = v
        self.g = g
        self.h = h


def _compose(u: _Jet, f0: float, f1: float, f2: float) -> _Jet:
    # chain rule for a univariate f applied to u
    g = f1 * u.g if u.g is not None else None
    h = None
    if u.h is not None:
        h = f2 * np.outer(u.g, u.g) + f1 * u.h
    return _Jet(f0, g, h)


def _const(v, n, order):
    return _Jet(
        v,
        np.zeros(n) if order >= 1 else None,
        np.zeros((n, n)) if order >= 2 else None,
    )


def _add(a: _Jet, b: _Jet, sign: float = 1.0) -> _Jet:
    return _Jet(
        a.v + sign * b.v,
        None if a.g is None else a.g + sign * b.g,
        None if a.h is None else a.h + sign * b.h,
    )


def _mul(a: _Jet, b: _Jet) -> _Jet:
    g = None if a.g is None else a.v * b.g + b.v * a.g
    h = None
    if a.h is not None:
        cross = np.outer(a.g, b.g)
        h = a.v * b.h + b.v * a.h + cross + cross.T
    return _Jet(a.v * b.v, g, h)


def _power_coeffs(u: float, c: float, order: int, node: Node):
    """Derivatives of x -> x**c at x=u up to ``order``."""
    out = []
    coef = 1.0
    for k in range(order + 1):
        e = c - k
        if coef == 0.0:
            out.append(0.0)
        elif e == 0:
            out.append(coef)
        else:
            out.append(coef * _pow_value(u, e, node))
        coef *= e
    return out + [0.0] * (3 - len(out))


def _jet(node: Node, idx: Mapping[str, int], vals: Sequence[float], order: int) -> _Jet:
    n = len(vals)
    if isinstance(node, Num):
        return _const(node.value, n, order)
    if isinstance(node, Var):
        try:
            i = idx[node.name]
        except KeyError:
            raise ExprError(f"no value supplied for coordinate {node.name!r}") from None
        j = _const(float(vals[i]), n, order)
        if j.g is not None:
            j.g[i] = 1.0
        return j
    if isinstance(node, Neg):
        a = _jet(node.arg, idx, vals, order)
        return _Jet(-a.v, None if a.g is None else -a.g, None if a.h is None else -a.h)
    if isinstance(node, BinOp):
        a = _jet(node.left, idx, vals, order)
        b = _jet(node.right, idx, vals, order)
        if node.op == "+":
            return _finite(_add(a, b), node)
        if node.op == "-":
            return _finite(_add(a, b, -1.0), node)
        if node.op == "*":
            return _finite(_mul(a, b), node)
        if b.v == 0.0:
            raise ExprDomainError("division by zero", node)
        inv = 1.0 / b.v
        return _finite(_mul(a, _compose(b, inv, -inv * inv, 2.0 * inv * inv * inv)), node)
    if isinstance(node, Pow):
        a = _jet(node.base, idx, vals, order)
        if not variables_of(node.exponent):
            c = _eval(node.exponent, {})
            f = _power_coeffs(a.v, c, order, node)
            return _finite(_compose(a, *f), node)
        b = _jet(node.exponent, idx, vals, order)
        if a.v <= 0:
            raise ExprDomainError("variable exponent needs a positive base", node)
        la = _compose(a, math.log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v))
        prod = _mul(b, la)
        ev = _call_value("exp", prod.v, node)
        return _finite(_compose(prod, ev, ev, ev), node)
    u = _jet(node.arg, idx, vals, order)
    return _finite(_apply(node.func, u, node), node)


def _apply(func: str, u: _Jet, node: Node) -> _Jet:
    x = u.v
    if func == "exp":
        v = _call_value("exp", x, node)
        return _compose(u, v, v, v)
    if func == "log":
        if x <= 0:
            raise ExprDomainError("log of non-positive value", node)
        return _compose(u, math.log(x), 1.0 / x, -1.0 / (x * x))
    if func == "sin":
        s, c = math.sin(x), math.cos(x)
        return _compose(u, s, c, -s)
    if func == "cos":
        s, c = math.sin(x), math.cos(x)
        return _compose(u, c, -s, -c)
    if func == "sinh":
        s, c = _call_value("sinh", x, node), _call_value("cosh", x, node)
        return _compose(u, s, c, s)
    if func == "cosh":
        s, c = _call_value("sinh", x, node), _call_value("cosh", x, node)
        return _compose(u, c, s, c)
    if func == "tanh":
        t = math.tanh(x)
        d = 1.0 - t * t
        return _compose(u, t, d, -2.0 * t * d)
    if func == "sqrt":
        if x < 0:
            raise ExprDomainError("sqrt of negative value", node)
        r = math.sqrt(x)
        if r == 0.0:
            if u.g is not None:
                raise ExprDomainError("sqrt is not differentiable at 0", node)
            return _Jet(0.0, None, None)
        return _compose(u, r, 0.5 / r, -0.25 / (r * x))
    raise ExprError(f"unknown function {func!r}")


def _finite(j: _Jet, node: Node) -> _Jet:
    if not math.isfinite(j.v):
        raise ExprDomainError("non-finite result", node)
    if j.g is not None and not np.all(np.isfinite(j.g)):
        raise ExprDomainError("non-finite derivative", node)
    if j.h is not None and not np.all(np.isfinite(j.h)):
        raise ExprDomainError("non-finite derivative", node)
    return j


def jet_arrays(
    e: ScalarExpression, coords: Sequence[str], values: Sequence[float], order: int = 2
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """Raw (value, gradient, Hessian) in the order of ``coords``.  Internal fast path."""
    idx = {c: i for i, c in enumerate(coords)}
    with np.errstate(over="ignore", invalid="ignore"):  # _finite reports these
        j = _jet(e.root, idx, values, order)
    return j.v, j.g, j.h


def eval_jet(e: ScalarExpression, point: Mapping[str, float], order: int = 2) -> JetValue:
    """Evaluate ``e`` and its exact partials up to ``order`` (0, 1 or 2) at ``point``."""
    if order not in (0, 1, 2):
        raise ValueError(f"jet order must be 0, 1 or 2, got {order}")
    coords = tuple(point)
    missing = e.variables - set(coords)
    if missing:
        raise ExprError(f"point does not supply coordinates {sorted(missing)}")
    vals = [float(point[c]) for c in coords]
    v, g, h = jet_arrays(e, coords, vals, order)
    if g is None:
        g = np.zeros(len(coords))
    return JetValue(coords, float(v), g, h)


# --------------------------------------------------------------------------
# symbolic rewriting

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _is_num(node, value=None):
    return isinstance(node, Num) and (value is None or node.value == value)


def _s_add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _s_sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return _s_neg(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def _s_neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _s_mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return _ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def _s_div(a, b):
    if _is_num(a, 0.0):
        return _ZERO
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _d(node: Node, var: str) -> Node:
    if isinstance(node, Num):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == var else _ZERO
    if var not in variables_of(node):
        return _ZERO
    if isinstance(node, Neg):
        return _s_neg(_d(node.arg, var))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _d(a, var), _d(b, var)
        if node.op == "+":
            return _s_add(da, db)
        if node.op == "-":
            return _s_sub(da, db)
        if node.op == "*":
            return _s_add(_s_mul(da, b), _s_mul(a, db))
        # (a/b)' = a'/b - a b'/b^2
        return _s_sub(_s_div(da, b), _s_div(_s_mul(a, db), Pow(b, Num(2.0))))
    if isinstance(node, Pow):
        a, b = node.base, node.exponent
        da = _d(a, var)
        if not variables_of(b):
            c = _eval(b, {})
            if c == 0:
                return _ZERO
            lowered = a if c == 2.0 else Pow(a, Num(c - 1.0))
            return _s_mul(_s_mul(Num(c), lowered), da)
        db = _d(b, var)
        # (a^b)' = a^b (b' log a + b a'/a)
        inner = _s_add(_s_mul(db, Call("log", a)), _s_div(_s_mul(b, da), a))
        return _s_mul(node, inner)
    u = node.arg
    du = _d(u, var)
    f = node.func
    if f == "exp":
        outer = node
    elif f == "log":
        return _s_div(du, u)
    elif f == "sin":
        outer = Call("cos", u)
    elif f == "cos":
        outer = _s_neg(Call("sin", u))
    elif f == "sinh":
        outer = Call("cosh", u)
    elif f == "cosh":
        outer = Call("sinh", u)
    elif f == "tanh":
        outer = _s_sub(_ONE, Pow(node, Num(2.0)))
    elif f == "sqrt":
        return _s_div(du, _s_mul(Num(2.0), node))
    else:
        raise ExprError(f"unknown function {f!r}")
    return _s_mul(outer, du)


def derivative(e: ScalarExpression, var: str) -> ScalarExpression:
    """Exact partial derivative of ``e`` with respect to ``var``, as a new tree."""
    return ScalarExpression(_d(e.root, var))


def _subst(node: Node, mapping: Mapping[str, Node]) -> Node:
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return Neg(_subst(node.arg, mapping))
    if isinstance(node, Call):
        return Call(node.func, _subst(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, _subst(node.left, mapping), _subst(node.right, mapping))
    return Pow(_subst(node.base, mapping), _subst(node.exponent, mapping))


def substitute(e: ScalarExpression, mapping: Mapping[str, ScalarExpression]) -> ScalarExpression:
    """Replace variables by expressions (composition)."""
    return ScalarExpression(_subst(e.root, {k: v.root for k, v in mapping.items()}))


def combine(op: str, a: ScalarExpression, b: ScalarExpression) -> ScalarExpression:
    return ScalarExpression(BinOp(op, a.root, b.root))


def parse_many(sources: Iterable[str], coords: Sequence[str] | None = None):
    return tuple(parse(s, coords) for s in sources)
