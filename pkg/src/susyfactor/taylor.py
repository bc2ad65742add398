"""Truncated univariate Taylor series, vectorized over a batch of base points.

A :class:`Series` holds normalized coefficients ``c[..., k] = f^(k)(t0) / k!``
for ``k = 0..order``.  It is the derivative carrier for profile functions of
the variable ``t`` and the source of the univariate derivatives that the
multivariate jets compose with.
"""

from math import factorial

import numpy as np


class DomainError(ValueError):
    """A primitive was evaluated outside its domain (log/sqrt of x <= 0, 1/0)."""


class Series:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, t0, order):
        t0 = np.asarray(t0, dtype=float)
        c = np.zeros(t0.shape + (order + 1,))
        c[..., 0] = t0
        if order >= 1:
            c[..., 1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, shape, order):
        c = np.zeros(tuple(shape) + (order + 1,))
        c[..., 0] = value
        return cls(c)

    @property
    def order(self):
        return self.c.shape[-1] - 1

    @property
    def value(self):
        return self.c[..., 0]

    def derivatives(self):
        """Derivatives ``f^(k)(t0)`` for k = 0..order, stacked on the last axis."""
        fact = np.array([factorial(k) for k in range(self.order + 1)], dtype=float)
        return self.c * fact

    def derivative(self):
        """Series of ``f'`` (one order lower)."""
        k = np.arange(1, self.order + 1, dtype=float)
        return Series(self.c[..., 1:] * k)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Series):
            return other
        c = np.zeros(self.c.shape)
        c[..., 0] = other
        return Series(c)

    def __add__(self, other):
        other = self._coerce(other)
        return Series(self.c + other.c)

    __radd__ = __add__

    def __neg__(self):
        return Series(-self.c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series(self.c * np.asarray(other, dtype=float)[..., None])
        a, b = np.broadcast_arrays(self.c, other.c)
        K = a.shape[-1]
        out = np.zeros(a.shape)
        for k in range(K):
            out[..., k] = np.einsum("...i,...i->...", a[..., : k + 1], b[..., k::-1])
        return Series(out)

    __rmul__ = __mul__

    def reciprocal(self):
        b = self.c
        if np.any(b[..., 0] == 0):
            raise DomainError("division by a series with zero value")
        K = b.shape[-1]
        q = np.zeros(b.shape)
        q[..., 0] = 1.0 / b[..., 0]
        for k in range(1, K):
            acc = np.einsum("...i,...i->...", b[..., 1 : k + 1], q[..., k - 1 :: -1])
            q[..., k] = -acc / b[..., 0]
        return Series(q)

    def __truediv__(self, other):
        if not isinstance(other, Series):
            other = np.asarray(other, dtype=float)
            if np.any(other == 0):
                raise DomainError("division by zero")
            return Series(self.c / other[..., None])
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    # -- primitives -------------------------------------------------------
    def exp(self):
        a = self.c
        K = a.shape[-1]
        e = np.zeros(a.shape)
        e[..., 0] = np.exp(a[..., 0])
        j = np.arange(1, K, dtype=float)
        for k in range(1, K):
            e[..., k] = np.einsum("...i,...i->...", j[:k] * a[..., 1 : k + 1], e[..., k - 1 :: -1]) / k
        return Series(e)

    def log(self):
        a = self.c
        if np.any(a[..., 0] <= 0):
            raise DomainError("log of a non-positive value")
        K = a.shape[-1]
        out = np.zeros(a.shape)
        out[..., 0] = np.log(a[..., 0])
        j = np.arange(1, K, dtype=float)
        for k in range(1, K):
            acc = np.einsum("...i,...i->...", j[: k - 1] * out[..., 1:k], a[..., k - 1 : 0 : -1]) if k > 1 else 0.0
            out[..., k] = (a[..., k] - acc / k) / a[..., 0]
        return Series(out)

    def sincos(self):
        a = self.c
        K = a.shape[-1]
        s = np.zeros(a.shape)
        c = np.zeros(a.shape)
        s[..., 0] = np.sin(a[..., 0])
        c[..., 0] = np.cos(a[..., 0])
        j = np.arange(1, K, dtype=float)
        for k in range(1, K):
            ja = j[:k] * a[..., 1 : k + 1]
            s[..., k] = np.einsum("...i,...i->...", ja, c[..., k - 1 :: -1]) / k
            c[..., k] = -np.einsum("...i,...i->...", ja, s[..., k - 1 :: -1]) / k
        return Series(s), Series(c)

    def sin(self):
        return self.sincos()[0]

    def cos(self):
        return self.sincos()[1]

    def sqrt(self):
        if np.any(self.c[..., 0] <= 0):
            raise DomainError("sqrt of a non-positive value")
        return self.powr(0.5)

    def tanh(self):
        # y' = (1 - y^2) a'
        a = self.c
        K = a.shape[-1]
        y = np.zeros(a.shape)
        z = np.zeros(a.shape)
        y[..., 0] = np.tanh(a[..., 0])
        z[..., 0] = 1.0 - y[..., 0] ** 2
        j = np.arange(1, K, dtype=float)
        for k in range(1, K):
            y[..., k] = np.einsum("...i,...i->...", j[:k] * a[..., 1 : k + 1], z[..., k - 1 :: -1]) / k
            z[..., k] = -np.einsum("...i,...i->...", y[..., : k + 1], y[..., k::-1])
        return Series(y)

    def powi(self, p):
        """Integer power (any sign of base for p >= 0; nonzero base for p < 0)."""
        p = int(p)
        if p < 0:
            return self.reciprocal().powi(-p)
        result = Series.constant(1.0, self.c.shape[:-1], self.order)
        base = self
        while p:
            if p & 1:
                result = result * base
            p >>= 1
            if p:
                base = base * base
        return result

    def powr(self, p):
        """Real power ``a^p`` for a positive base (J.C.P. Miller recurrence)."""
        a = self.c
        if np.any(a[..., 0] <= 0):
            raise DomainError("non-integer power of a non-positive value")
        K = a.shape[-1]
        y = np.zeros(a.shape)
        y[..., 0] = a[..., 0] ** p
        for k in range(1, K):
            j = np.arange(1, k + 1, dtype=float)
            w = (p + 1.0) * j - k
            y[..., k] = np.einsum("...i,...i->...", w * a[..., 1 : k + 1], y[..., k - 1 :: -1]) / (k * a[..., 0])
        return Series(y)

    def pow(self, p):
        p = float(p)
        if p.is_integer():
            return self.powi(int(p))
        return self.powr(p)


def _flat_exp_neg_recip(s):
    """Series of ``g(s) = exp(-1/s)`` for ``s > 0`` and ``0`` otherwise."""
    pos = s.c[..., 0] > 0
    safe = np.where(pos[..., None], s.c, 0.0)
    safe[..., 0] = np.where(pos, s.c[..., 0], 1.0)
    g = (-Series(safe).reciprocal()).exp()
    return Series(np.where(pos[..., None], g.c, 0.0))


def bump(s, a, b):
    """Smooth step: 1 for t <= a, 0 for t >= b, monotone in between."""
    if not a < b:
        raise ValueError(f"bump needs a < b, got a = {a}, b = {b}")
    g_right = _flat_exp_neg_recip(b - s)
    g_left = _flat_exp_neg_recip(s - a)
    return g_right / (g_right + g_left)


UNARY = {
    "exp": Series.exp,
    "sin": Series.sin,
    "cos": Series.cos,
    "sqrt": Series.sqrt,
    "log": Series.log,
    "tanh": Series.tanh,
}


def primitive_derivatives(name, values, order, params=()):
    """Derivatives ``f^(k)(values)``, k = 0..order, of a named primitive.

    ``name`` is one of the :data:`UNARY` keys, ``"pow"`` (params = (p,)),
    ``"recip"`` or ``"bump"`` (params = (a, b, m)) where ``m`` selects the
    m-th derivative of the smooth step.
    """
    t = Series.variable(values, order)
    if name == "pow":
        out = t.pow(params[0])
    elif name == "recip":
        out = t.reciprocal()
    elif name == "bump":
        a, b, m = params
        t = Series.variable(values, order + m)
        out = bump(t, a, b)
        for _ in range(m):
            out = out.derivative()
    else:
        out = UNARY[name](t)
    return out.derivatives()
