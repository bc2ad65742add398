"""Jet and Taylor-series interpretation of expression trees."""

import numpy as np

from ..jets import Jet, coordinate_jets
from ..taylor import DomainError, Series, bump, primitive_derivatives
from .nodes import BinOp, Bump, Call, Mask, Neg, Num, Pow, Var
from .parser import CONSTANTS


def _scalar_apply(name, v, *params):
    return primitive_derivatives(name, np.asarray(v, dtype=float), 0, params)[..., 0]


def _call(name, v):
    if isinstance(v, Jet):
        return v.apply(name)
    if isinstance(v, Series):
        return getattr(v, name)()
    return _scalar_apply(name, v)


def _pow(v, p):
    if isinstance(v, Jet):
        return v.apply("pow", p)
    if isinstance(v, Series):
        return v.pow(p)
    return _scalar_apply("pow", v, p)


def _bump(v, a, b, m):
    if isinstance(v, Jet):
        return v.apply("bump", a, b, m)
    if isinstance(v, Series):
        s = Series.variable(v.value, v.order + m)
        out = bump(s, a, b)
        for _ in range(m):
            out = out.derivative()
        # compose the univariate series with the inner series
        return _compose_series(out, v)
    return _scalar_apply("bump", v, a, b, m)


def _compose_series(f_at, inner):
    """Series of ``f(inner)`` given the series of ``f`` at ``inner.value``."""
    K = inner.order
    d = Series(inner.c.copy())
    d.c[..., 0] = 0.0
    out = Series.constant(0.0, inner.c.shape[:-1], K)
    power = Series.constant(1.0, inner.c.shape[:-1], K)
    for k in range(K + 1):
        out = out + power * f_at.c[..., k]
        power = power * d
    return out


def _binop(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if isinstance(b, (Jet, Series)):
        return a / b
    b = np.asarray(b, dtype=float)
    if np.any(b == 0):
        raise DomainError("division by zero")
    return a / b


class _Evaluator:
    def __init__(self, leaves, points=None):
        self.leaves = leaves
        self.points = points

    def __call__(self, e):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, Var):
            if e.name in CONSTANTS:
                return CONSTANTS[e.name]
            return self.leaves[e.name]
        if isinstance(e, Neg):
            return -self(e.arg)
        if isinstance(e, BinOp):
            return _binop(e.op, self(e.left), self(e.right))
        if isinstance(e, Pow):
            return _pow(self(e.base), e.exponent)
        if isinstance(e, Call):
            return _call(e.func, self(e.arg))
        if isinstance(e, Bump):
            return _bump(self(e.arg), e.a, e.b, e.deriv)
        if isinstance(e, Mask):
            if self.points is None:
                raise ValueError("mask fields need x-points")
            return np.asarray(e.fn(self.points), dtype=float)
        raise TypeError(f"cannot evaluate node {type(e).__name__}")


def eval_jet(e, X, h, order=2):
    """Jet of ``e`` at the points ``X`` (shape (N, n) or (n,)) with h substituted."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, n = X.shape
    leaves = {f"x{i + 1}": jet for i, jet in enumerate(coordinate_jets(X, order))}
    leaves["h"] = float(h)
    out = _Evaluator(leaves, X)(e)
    if not isinstance(out, Jet):
        out = Jet.constant(np.broadcast_to(np.asarray(out, dtype=float), (N,)).copy(), n, order)
    return out


def eval_value(e, X, h):
    return eval_jet(e, X, h, order=0).val


def eval_series(e, t, order):
    """Taylor series in ``t`` of a profile expression at the base points ``t``."""
    t = np.asarray(t, dtype=float)
    out = _Evaluator({"t": Series.variable(t, order)})(e)
    if not isinstance(out, Series):
        out = Series.constant(np.broadcast_to(np.asarray(out, dtype=float), t.shape), t.shape, order)
    return out


def profile_derivatives(e, t, order):
    """``α^(k)(t)`` for k = 0..order as an array of shape ``t.shape + (order+1,)``."""
    return eval_series(e, t, order).derivatives()
