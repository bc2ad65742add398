"""Forward-mode jets of order <= 3 in the base variables x in R^n.

A :class:`Jet` carries the value of a (possibly tensor-valued) field at a
batch of points together with its gradient, Hessian and third derivative.
The value has shape ``S``; derivative axes are appended at the end, so
``grad`` has shape ``S + (n,)``, ``hess`` ``S + (n, n)`` and ``third``
``S + (n, n, n)``.  Higher derivative tensors are kept exactly symmetric by
gathering from canonical (sorted) index positions.
"""

import numpy as np

from .taylor import DomainError, primitive_derivatives


def _sym2_index(n):
    i, j = np.indices((n, n))
    return np.minimum(i, j), np.maximum(i, j)


def _sym3_index(n):
    idx = np.sort(np.stack(np.indices((n, n, n))), axis=0)
    return idx[0], idx[1], idx[2]


def symmetrize2(H):
    I, J = _sym2_index(H.shape[-1])
    return H[..., I, J]


def symmetrize3(T):
    I, J, K = _sym3_index(T.shape[-1])
    return T[..., I, J, K]


def _sym3_outer(g, H):
    """``g_i H_jk + g_j H_ik + g_k H_ij`` (before canonical symmetrization)."""
    return (
        g[..., :, None, None] * H[..., None, :, :]
        + g[..., None, :, None] * H[..., :, None, :]
        + g[..., None, None, :] * H[..., :, :, None]
    )


class Jet:
    __slots__ = ("val", "grad", "hess", "third", "n")
    # make ndarray (op) Jet dispatch to the reflected Jet methods
    __array_ufunc__ = None

    def __init__(self, val, grad=None, hess=None, third=None, n=None):
        self.val = np.asarray(val, dtype=float)
        self.grad = grad
        self.hess = hess
        self.third = third
        if n is None:
            if grad is None:
                raise ValueError("dimension n required for an order-0 jet")
            n = grad.shape[-1]
        self.n = n

    # -- construction ------------------------------------------------------
    @classmethod
    def variable(cls, X, i, order):
        """Jet of the coordinate ``x_i`` at the points ``X`` (shape (N, n))."""
        X = np.asarray(X, dtype=float)
        N, n = X.shape
        return cls.from_derivs(X[:, i], _unit_grad(N, n, i), order, n)

    @classmethod
    def from_derivs(cls, val, grad, order, n):
        S = np.shape(val)
        g = h = t = None
        if order >= 1:
            g = grad if grad is not None else np.zeros(S + (n,))
        if order >= 2:
            h = np.zeros(S + (n, n))
        if order >= 3:
            t = np.zeros(S + (n, n, n))
        return cls(val, g, h, t, n=n)

    @classmethod
    def constant(cls, value, n, order, shape=None):
        value = np.asarray(value, dtype=float)
        if shape is not None:
            value = np.broadcast_to(value, shape).copy()
        return cls.from_derivs(value, None, order, n)

    @property
    def order(self):
        for k, arr in ((3, self.third), (2, self.hess), (1, self.grad)):
            if arr is not None:
                return k
        return 0

    @property
    def shape(self):
        return self.val.shape

    def parts(self):
        return [a for a in (self.val, self.grad, self.hess, self.third) if a is not None]

    def truncate(self, order):
        return Jet(
            self.val,
            self.grad if order >= 1 else None,
            self.hess if order >= 2 else None,
            self.third if order >= 3 else None,
            n=self.n,
        )

    def map_value_axes(self, fn):
        """Apply an operation that acts on leading (value) axes only."""
        parts = [fn(a) for a in self.parts()]
        return Jet(*parts + [None] * (4 - len(parts)), n=self.n)

    def __getitem__(self, key):
        return self.map_value_axes(lambda a: a[key])

    @property
    def T(self):
        nv = self.val.ndim
        return self.map_value_axes(lambda a: np.swapaxes(a, nv - 2, nv - 1))

    def derivative(self, i):
        """Jet of ``∂_i`` of this field, one order lower."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        val = self.grad[..., i]
        grad = self.hess[..., i, :] if self.order >= 2 else None
        hess = self.third[..., i, :, :] if self.order >= 3 else None
        return Jet(val, grad, hess, None, n=self.n)

    # -- arithmetic --------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.n, self.order)

    def __add__(self, other):
        other = self._lift(other)
        k = min(self.order, other.order)
        parts = [a + b for a, b in zip(self.truncate(k).parts(), other.truncate(k).parts())]
        return Jet(*parts + [None] * (4 - len(parts)), n=self.n)

    __radd__ = __add__

    def __neg__(self):
        parts = [-a for a in self.parts()]
        return Jet(*parts + [None] * (4 - len(parts)), n=self.n)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            parts = [a * _expand(c, a.ndim - self.val.ndim) for a in self.parts()]
            return Jet(*parts + [None] * (4 - len(parts)), n=self.n)
        return bilinear("", "", "", self, other)

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any(self.val == 0):
            raise DomainError("division by a jet with zero value")
        return self.compose(primitive_derivatives("recip", self.val, self.order))

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            if np.any(c == 0):
                raise DomainError("division by zero")
            return self * (1.0 / c)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def compose(self, derivs):
        """Jet of ``f(self)`` given ``derivs[..., k] = f^(k)(self.val)``."""
        k = self.order
        val = derivs[..., 0]
        grad = hess = third = None
        if k >= 1:
            f1 = derivs[..., 1]
            g = self.grad
            grad = f1[..., None] * g
        if k >= 2:
            f2 = derivs[..., 2]
            gg = g[..., :, None] * g[..., None, :]
            hess = symmetrize2(f2[..., None, None] * gg + f1[..., None, None] * self.hess)
        if k >= 3:
            f3 = derivs[..., 3]
            ggg = gg[..., :, :, None] * g[..., None, None, :]
            third = symmetrize3(
                f3[..., None, None, None] * ggg
                + f2[..., None, None, None] * _sym3_outer(g, self.hess)
                + f1[..., None, None, None] * self.third
            )
        return Jet(val, grad, hess, third, n=self.n)

    def apply(self, name, *params):
        return self.compose(primitive_derivatives(name, self.val, self.order, params))

    def exp(self):
        return self.apply("exp")

    def sin(self):
        return self.apply("sin")

    def cos(self):
        return self.apply("cos")

    def sqrt(self):
        return self.apply("sqrt")

    def log(self):
        return self.apply("log")

    def tanh(self):
        return self.apply("tanh")

    def __pow__(self, p):
        return self.apply("pow", float(p))

    def __repr__(self):
        return f"Jet(shape={self.val.shape}, n={self.n}, order={self.order})"


def _expand(c, extra):
    return c.reshape(c.shape + (1,) * extra) if c.ndim else c


def _unit_grad(N, n, i):
    g = np.zeros((N, n))
    g[:, i] = 1.0
    return g


def bilinear(sa, sb, sc, a, b):
    """Product rule for ``C[sc] = Σ A[sa] B[sb]`` applied pointwise.

    ``sa``, ``sb``, ``sc`` are einsum subscripts for the value axes *after*
    the shared batch axes (``"" , "", ""`` is an elementwise product).
    """
    k = min(a.order, b.order)
    a = a.truncate(k)
    b = b.truncate(k)

    def es(x, y, dx, dy, dout):
        return np.einsum(f"...{sa}{dx},...{sb}{dy}->...{sc}{dout}", x, y)

    val = es(a.val, b.val, "", "", "")
    grad = hess = third = None
    if k >= 1:
        grad = es(a.grad, b.val, "x", "", "x") + es(a.val, b.grad, "", "x", "x")
    if k >= 2:
        hess = (
            es(a.hess, b.val, "xy", "", "xy")
            + es(a.grad, b.grad, "x", "y", "xy")
            + es(a.grad, b.grad, "y", "x", "xy")
            + es(a.val, b.hess, "", "xy", "xy")
        )
        hess = symmetrize2(hess)
    if k >= 3:
        third = (
            es(a.third, b.val, "xyz", "", "xyz")
            + es(a.hess, b.grad, "xy", "z", "xyz")
            + es(a.hess, b.grad, "xz", "y", "xyz")
            + es(a.hess, b.grad, "yz", "x", "xyz")
            + es(a.grad, b.hess, "x", "yz", "xyz")
            + es(a.grad, b.hess, "y", "xz", "xyz")
            + es(a.grad, b.hess, "z", "xy", "xyz")
            + es(a.val, b.third, "", "xyz", "xyz")
        )
        third = symmetrize3(third)
    return Jet(val, grad, hess, third, n=a.n)


def stack(jets, axis=-1):
    """Stack jets with identical value shapes along a new value axis.

    ``axis`` counts within the value axes (``-1`` = new last value axis).
    """
    k = min(j.order for j in jets)
    jets = [j.truncate(k) for j in jets]
    nv = jets[0].val.ndim
    ax = axis if axis >= 0 else nv + 1 + axis
    parts = []
    for idx in range(k + 1):
        parts.append(np.stack([j.parts()[idx] for j in jets], axis=ax))
    return Jet(*parts + [None] * (4 - len(parts)), n=jets[0].n)


def concat(jets):
    """Concatenate jets along the batch (first) axis."""
    k = min(j.order for j in jets)
    jets = [j.truncate(k) for j in jets]
    parts = [np.concatenate([j.parts()[idx] for j in jets], axis=0) for idx in range(k + 1)]
    return Jet(*parts + [None] * (4 - len(parts)), n=jets[0].n)


def embed(J, n, offset):
    """Regard a jet in ``J.n`` variables as a jet in ``n`` variables.

    The original variables become ``x_{offset+1} .. x_{offset+J.n}``.
    """
    sl = slice(offset, offset + J.n)
    parts = [J.val]
    for k, a in enumerate(J.parts()[1:], start=1):
        out = np.zeros(J.val.shape + (n,) * k)
        out[(Ellipsis,) + (sl,) * k] = a
        parts.append(out)
    return Jet(*parts + [None] * (4 - len(parts)), n=n)


def matvec(M, v):
    return bilinear("ab", "b", "a", M, v)


def dot(u, v):
    return bilinear("a", "a", "", u, v)


def trace_grad(V):
    """``Σ_i ∂_i V_i`` for a vector-valued jet (order >= 1), one order lower."""
    val = np.einsum("...ii->...", V.grad)
    grad = np.einsum("...iij->...j", V.hess) if V.order >= 2 else None
    hess = np.einsum("...iijk->...jk", V.third) if V.order >= 3 else None
    return Jet(val, grad, hess, None, n=V.n)


def coordinate_jets(X, order):
    X = np.asarray(X, dtype=float)
    return [Jet.variable(X, i, order) for i in range(X.shape[1])]


Jet2 = Jet
Jet3Scalar = Jet

__all__ = [
    "DomainError",
    "Jet",
    "Jet2",
    "Jet3Scalar",
    "bilinear",
    "concat",
    "coordinate_jets",
    "dot",
    "embed",
    "matvec",
    "stack",
    "symmetrize2",
    "symmetrize3",
    "trace_grad",
]
