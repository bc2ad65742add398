"""Internal symbolic differentiation with light constant folding.

Used where a derived coefficient must itself be an expression (the ``hδ(U)``
term of a formal adjoint, forward-generated test fields).
"""

import math

from .nodes import BinOp, Bump, Call, Expr, Mask, Neg, Num, Pow, Var, walk
from .parser import CONSTANTS

ZERO = Num(0.0)
ONE = Num(1.0)


def _is(e, v):
    return isinstance(e, Num) and e.value == v


def add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def div(a, b):
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def power(a, p):
    if p == 0:
        return ONE
    if p == 1:
        return a
    if isinstance(a, Num) and (a.value > 0 or float(p).is_integer()):
        return Num(a.value**p)
    return Pow(a, float(p))


def diff(e, var):
    """Derivative of ``e`` with respect to the variable named ``var``."""
    if isinstance(e, Num) or isinstance(e, Mask):
        return ZERO
    if isinstance(e, Var):
        if e.name in CONSTANTS:
            return ZERO
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(diff(e.arg, var))
    if isinstance(e, BinOp):
        da, db = diff(e.left, var), diff(e.right, var)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        # (a/b)' = a'/b - a b' / b^2
        return sub(div(da, e.right), div(mul(e.left, db), power(e.right, 2)))
    if isinstance(e, Pow):
        du = diff(e.base, var)
        if _is(du, 0):
            return ZERO
        return mul(mul(Num(e.exponent), power(e.base, e.exponent - 1)), du)
    if isinstance(e, Call):
        du = diff(e.arg, var)
        if _is(du, 0):
            return ZERO
        u = e.arg
        outer = {
            "exp": lambda: e,
            "sin": lambda: Call("cos", u),
            "cos": lambda: neg(Call("sin", u)),
            "sqrt": lambda: div(Num(0.5), e),
            "log": lambda: div(ONE, u),
            "tanh": lambda: sub(ONE, power(e, 2)),
        }[e.func]()
        return mul(outer, du)
    if isinstance(e, Bump):
        du = diff(e.arg, var)
        if _is(du, 0):
            return ZERO
        return mul(Bump(e.arg, e.a, e.b, e.deriv + 1), du)
    raise TypeError(f"cannot differentiate {type(e).__name__}")


def gradient(e, n):
    return [diff(e, f"x{i + 1}") for i in range(n)]


def divergence(components):
    """``Σ_i ∂_i V_i`` of a vector of x-expressions."""
    out = ZERO
    for i, c in enumerate(components):
        out = add(out, diff(c, f"x{i + 1}"))
    return out


def substitute(e, mapping):
    """Replace variables by expressions (``mapping``: name -> Expr)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, (Num, Mask)):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    if isinstance(e, Bump):
        return Bump(substitute(e.arg, mapping), e.a, e.b, e.deriv)
    raise TypeError(f"cannot substitute into {type(e).__name__}")


def shift_variables(e, offset):
    """Rename ``x_i`` to ``x_{i+offset}`` (used for product spaces)."""
    nodes = list(walk(e))
    if any(isinstance(node, Mask) for node in nodes):
        raise ValueError("mask fields cannot be moved to a product space")
    names = {node.name for node in nodes if isinstance(node, Var) and node.index is not None}
    return substitute(e, {name: Var(f"x{int(name[1:]) + offset}") for name in names})


def as_expr(x):
    if isinstance(x, Expr):
        return x
    v = float(x)
    if not math.isfinite(v):
        raise ValueError(f"non-finite constant {v}")
    return Num(v)
