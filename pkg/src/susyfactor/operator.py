"""Second-order operators ``P = hδ∘A∘hd + U∘hd + v`` on R^n.

Sign convention: on vector fields ``δ V = -div V``.  This is forced by
matching the invariant form with the coordinate form
``-Σ h∂_i a_ij h∂_j + Σ u_k h∂_k + v``.  On bivectors the codifferential is
``(δW)_i = 2 Σ_j ∂_j W_ji``, the unique choice compatible with
``contract(ξ, W) = 2Wξ`` and the Leibniz rule ``δ(fθ) = fδθ - df⌟θ``.

All evaluations are vectorized over a batch of points ``X`` of shape (N, n).
"""

from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from .dsl import Expr, Num, Var, eval_jet, parse, x_context
from .dsl.symbolic import add, divergence, mul, neg, sub
from .jets import Jet, dot, matvec, stack, trace_grad


@dataclass(frozen=True)
class FieldBundle:
    n: int
    A: Tuple[Tuple[Expr, ...], ...]
    U: Tuple[Expr, ...]
    v: Expr
    phi: Expr
    psi: Expr

    def __post_init__(self):
        n = self.n
        if n < 1:
            raise ValueError("dimension must be >= 1")
        if len(self.A) != n or any(len(row) != n for row in self.A):
            raise ValueError(f"A must be {n}x{n}")
        if len(self.U) != n:
            raise ValueError(f"U must have {n} components")
        # symmetrize A on load; entries that already agree are kept as is
        A = [list(row) for row in self.A]
        for i in range(n):
            for j in range(i + 1, n):
                if A[i][j] != A[j][i]:
                    s = mul(Num(0.5), add(A[i][j], A[j][i]))
                    A[i][j] = A[j][i] = s
        object.__setattr__(self, "A", tuple(tuple(r) for r in A))

    @classmethod
    def from_strings(cls, n, A, U, v, phi, psi):
        ctx = x_context(n)
        p = lambda s: s if isinstance(s, Expr) else parse(str(s), ctx)
        return cls(
            n,
            tuple(tuple(p(a) for a in row) for row in A),
            tuple(p(u) for u in U),
            p(v),
            p(phi),
            p(psi),
        )


@dataclass(frozen=True)
class OperatorSpec:
    bundle: FieldBundle
    name: str = field(default="operator")

    @property
    def n(self):
        return self.bundle.n

    @property
    def phi(self):
        return self.bundle.phi

    @property
    def psi(self):
        return self.bundle.psi


@dataclass
class EikonalResiduals:
    r1: np.ndarray
    r2: np.ndarray
    points: np.ndarray
    h: float


def expr_vector_jet(exprs, X, h, order):
    return stack([eval_jet(e, X, h, order) for e in exprs], axis=-1)


def expr_matrix_jet(rows, X, h, order, symmetric=False):
    n = len(rows)
    cache = {}
    out_rows = []
    for i in range(n):
        row = []
        for j in range(len(rows[i])):
            key = (min(i, j), max(i, j)) if symmetric else (i, j)
            if key not in cache:
                cache[key] = eval_jet(rows[key[0]][key[1]], X, h, order)
            row.append(cache[key])
        out_rows.append(stack(row, axis=-1))
    return stack(out_rows, axis=-2)


def coefficient_jets(op, X, h, order=1):
    X = np.atleast_2d(X)
    b = op.bundle
    A = expr_matrix_jet(b.A, X, h, order, symmetric=True)
    U = expr_vector_jet(b.U, X, h, order)
    v = eval_jet(b.v, X, h, order)
    return A, U, v


def _as_jet(u, X, h, order):
    if isinstance(u, Jet):
        return u
    if isinstance(u, str):
        u = parse(u, x_context(np.atleast_2d(X).shape[1]))
    return eval_jet(u, X, h, order)


def codiff_vec(V):
    """``δV = -Σ_i ∂_i V_i`` for a vector-valued jet of order >= 1."""
    return -trace_grad(V)


def codiff_bivec(W):
    """``(δW)_i = 2 Σ_j ∂_j W_ji`` for a bivector-valued jet of order >= 1."""
    val = 2.0 * np.einsum("...jij->...i", W.grad)
    grad = 2.0 * np.einsum("...jijk->...ik", W.hess) if W.order >= 2 else None
    hess = 2.0 * np.einsum("...jijkl->...ikl", W.third) if W.order >= 3 else None
    return Jet(val, grad, hess, None, n=W.n)


def apply_P(op, u, X, h):
    """``P u`` at the points ``X`` from the expanded coordinate form."""
    X = np.atleast_2d(X)
    u = _as_jet(u, X, h, 2)
    A, U, v = coefficient_jets(op, X, h, order=1)
    divA = np.einsum("...iji->...j", A.grad)  # Σ_i ∂_i a_ij
    second = np.einsum("...ij,...ij->...", A.val, u.hess)
    first = np.einsum("...j,...j->...", divA, u.grad)
    return -h * h * first - h * h * second + h * np.einsum("...k,...k->...", U.val, u.grad) + v.val * u.val


def apply_P_divergence_form(op, u, X, h):
    """``hδ(A h du) + U·h du + v u``, computed through :func:`codiff_vec`."""
    X = np.atleast_2d(X)
    u = _as_jet(u, X, h, 2)
    A, U, v = coefficient_jets(op, X, h, order=1)
    du = stack([u.derivative(i) for i in range(u.n)], axis=-1)
    flux = matvec(A, du * h)
    return h * codiff_vec(flux).val + h * np.einsum("...k,...k->...", U.val, du.val) + v.val * u.val


def adjoint(op):
    """Formal adjoint ``P* = hδ∘A∘hd - U∘hd + hδ(U) + v``.

    The phases are swapped so that the adjoint's ``phi`` is the phase of its
    kernel element ``e^{-psi/h}``.
    """
    b = op.bundle
    h = Var("h")
    v_new = sub(b.v, mul(h, divergence(b.U)))  # v + h δ(U)
    bundle = FieldBundle(b.n, b.A, tuple(neg(u) for u in b.U), v_new, b.psi, b.phi)
    name = op.name[:-1] if op.name.endswith("*") else op.name + "*"
    return replace(op, bundle=bundle, name=name)


def eikonal_residuals(op, X, h, phi=None, psi=None):
    """Left-hand sides of the two eikonal equations at the points ``X``.

    ``r1 = dφ⌟(A dφ) + U dφ - v + hδ(A dφ)`` and
    ``r2 = dψ⌟(A dψ) - U dψ - v - hδ(U) + hδ(A dψ)``.
    """
    X = np.atleast_2d(X)
    phi = op.phi if phi is None else phi
    psi = op.psi if psi is None else psi
    A, U, v = coefficient_jets(op, X, h, order=1)
    out = []
    for ph, sign in ((phi, 1.0), (psi, -1.0)):
        p = _as_jet(ph, X, h, 2)
        dp = stack([p.derivative(i) for i in range(p.n)], axis=-1)
        Adp = matvec(A, dp)
        r = dot(dp, Adp).val + sign * dot(U, dp).val - v.val + h * codiff_vec(Adp).val
        if sign < 0:
            r = r - h * codiff_vec(U).val
        out.append(r)
    return EikonalResiduals(out[0], out[1], X, h)


def kernel_residual(op, X, h, phi=None):
    """``e^{φ/h} P(e^{-φ/h})``, computed without forming the exponential."""
    X = np.atleast_2d(X)
    phi = op.phi if phi is None else phi
    p = _as_jet(phi, X, h, 2)
    # jet of e^{-(φ-φ(x0))/h}: value 1 at each point, exact derivatives
    w = (-(p - p.val) / h).exp()
    return apply_P(op, w, X, h)


def symbol_split(op, X, xi, h):
    """Even part and imaginary coefficient of the odd part of the Weyl symbol.

    ``p_even = ξ^T A ξ + v + (h/2) δ(U) + (h^2/4) Σ ∂_i ∂_j a_ij`` and
    ``p_odd = -i U ξ`` (reported as ``-U·ξ``).
    """
    X = np.atleast_2d(X)
    xi = np.broadcast_to(np.asarray(xi, dtype=float), X.shape)
    A, U, v = coefficient_jets(op, X, h, order=2)
    quad = np.einsum("...i,...ij,...j->...", xi, A.val, xi)
    dd = np.einsum("...ijij->...", A.hess)
    p_even = quad + v.val + 0.5 * h * codiff_vec(U).val + 0.25 * h * h * dd
    p_odd_imag = -np.einsum("...k,...k->...", U.val, xi)
    return p_even, p_odd_imag


def symmetric_part(op):
    """``P_1 = (P + P*)/2 = hδ∘A∘hd + (h/2)δ(U) + v``."""
    b = op.bundle
    zero = tuple(Num(0.0) for _ in range(b.n))
    v_new = sub(b.v, mul(mul(Num(0.5), Var("h")), divergence(b.U)))
    return replace(op, bundle=FieldBundle(b.n, b.A, zero, v_new, b.phi, b.psi), name=op.name + "_sym")


def antisymmetric_part(op):
    """``P_2 = (P - P*)/2 = U∘hd - (h/2)δ(U)``."""
    b = op.bundle
    zeroA = tuple(tuple(Num(0.0) for _ in range(b.n)) for _ in range(b.n))
    v_new = mul(mul(Num(0.5), Var("h")), divergence(b.U))
    return replace(op, bundle=FieldBundle(b.n, zeroA, b.U, v_new, b.phi, b.psi), name=op.name + "_anti")
