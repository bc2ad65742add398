"""Supersymmetric structures ``P = d^{G,*}_{ψ,h} d_{φ,h}`` with ``G = A + B``.

The antisymmetric corrector is built from a decomposition

    U + d(φ-ψ)⌟A = δ(Σ_k (α_k∘φ̂) θ_k),    φ̂ = φ + ψ,  δθ_k = 0,

as ``B = Σ_k I_k θ_k`` with ``I_k(x) = ∫_0^{(m∞-φ̂)/h} α_k'(hs + φ̂(x)) e^{-s} ds``.
This ``B`` solves ``hδB + dφ̂⌟B = Σ_k (α_k'∘φ̂) dφ̂⌟θ_k``.

Bivector fields are handled as jets of antisymmetric matrices ``W``; the
antisymmetric part of ``G`` (a map ``T*X -> TX``) is ``bivector_to_map(W) = -2W``.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .dsl import Bump, Expr, Num, T_CONTEXT, eval_jet, eval_series, parse, profile_derivatives, shift_variables, x_context
from .dsl.nodes import walk
from .dsl.symbolic import add, neg
from .jets import Jet, bilinear, concat, embed, matvec, stack
from .multilinear import basis_bivectors, contract
from .operator import (
    FieldBundle,
    OperatorSpec,
    apply_P,
    codiff_bivec,
    codiff_vec,
    expr_matrix_jet,
    expr_vector_jet,
)
from .quadrature import QuadratureConfig, QuadratureError, panel_rule
from .taylor import DomainError


class AssumptionError(ValueError):
    pass


# -- decompositions -----------------------------------------------------------


def _bivector_exprs(theta, n):
    """Validate a matrix of expressions as a bivector; returns an n x n tuple."""
    ctx = x_context(n)
    rows = [[e if isinstance(e, Expr) else parse(str(e), ctx) for e in row] for row in theta]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"theta must be {n}x{n}")
    X = np.random.default_rng(0).uniform(-1.0, 1.0, size=(7, n))
    for i in range(n):
        if eval_jet(rows[i][i], X, 0.1, 0).val.any():
            raise ValueError("theta must have a zero diagonal")
        for j in range(i + 1, n):
            if rows[j][i] == neg(rows[i][j]):
                continue
            a = eval_jet(rows[i][j], X, 0.1, 0).val
            b = eval_jet(rows[j][i], X, 0.1, 0).val
            if not np.allclose(a, -b, rtol=1e-12, atol=1e-14):
                raise ValueError(f"theta is not antisymmetric at ({i + 1}, {j + 1})")
    return tuple(tuple(r) for r in rows)


def bivector_jet(theta, X, h, order):
    """Jet of an antisymmetric expression matrix, evaluating the upper triangle only."""
    n = len(theta)
    X = np.atleast_2d(X)
    zero = Jet.constant(np.zeros(X.shape[0]), X.shape[1], order)
    upper = {(i, j): eval_jet(theta[i][j], X, h, order) for i in range(n) for j in range(i + 1, n)}
    rows = []
    for i in range(n):
        row = [upper[i, j] if i < j else (-upper[j, i] if i > j else zero) for j in range(n)]
        rows.append(stack(row, axis=-1))
    return stack(rows, axis=-2)


@dataclass(frozen=True)
class ThetaTerm:
    alpha: Expr
    theta: Tuple[Tuple[Expr, ...], ...]


@dataclass(frozen=True)
class ThetaDecomposition:
    n: int
    terms: Tuple[ThetaTerm, ...]
    N: float = 2.0
    m_inf: float = math.inf

    @classmethod
    def from_strings(cls, n, terms, N=2.0, m_inf=math.inf):
        out = []
        for alpha, theta in terms:
            a = alpha if isinstance(alpha, Expr) else parse(str(alpha), T_CONTEXT)
            out.append(ThetaTerm(a, _bivector_exprs(theta, n)))
        return cls(n, tuple(out), float(N), float(m_inf))

    @classmethod
    def constant(cls, n, alpha, theta, **kw):
        """Single term with a constant numeric ``theta``."""
        theta = np.asarray(theta, dtype=float)
        rows = [[Num(float(theta[i, j])) for j in range(n)] for i in range(n)]
        return cls.from_strings(n, [(alpha, rows)], **kw)

    @property
    def is_trivial(self):
        return not self.terms


def profile_jet(alpha, p):
    """Jet of ``α∘p`` for a profile expression ``α`` and a scalar jet ``p``."""
    return p.compose(profile_derivatives(alpha, p.val, p.order))


def profile_kinks(alpha):
    """t-values where a profile stops being analytic (ends of affine bumps)."""
    out = []
    for node in walk(alpha):
        if not isinstance(node, Bump):
            continue
        c = eval_series(node.arg, np.array([0.0, 1.0]), 2).c
        if np.any(np.abs(c[:, 2]) > 0) or c[0, 1] == 0:
            continue
        out += [(node.a - c[0, 0]) / c[0, 1], (node.b - c[0, 0]) / c[0, 1]]
    return np.array(sorted(set(out)))


def profile_growth(alpha, N, m_inf=math.inf, order=3):
    """Fitted polynomial growth exponent of ``α, α', ..., α^(order)``.

    Returns ``(exponent, ok)`` with ``ok`` true when the exponent is finite and
    does not exceed ``N`` (plus a small fitting allowance).
    """
    tail = np.geomspace(10.0, 1000.0, 25)
    slopes = []
    for sign in (1.0, -1.0):
        t = sign * tail
        if np.isfinite(m_inf):
            t = t[t <= m_inf]
            if t.size < 3:
                continue
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                D = profile_derivatives(alpha, t, order)
        except DomainError:
            continue
        mag = np.max(np.abs(D), axis=-1)
        if not np.all(np.isfinite(mag)):
            return math.inf, False
        y = np.log(mag + 1e-300)
        x = np.log(np.sqrt(1.0 + t * t))
        slopes.append(np.polyfit(x, y, 1)[0])
    if not slopes:
        return 0.0, True
    m = max(max(slopes), 0.0)
    return m, m <= N + 0.1


# -- assumption check ---------------------------------------------------------


@dataclass
class AssumptionReport:
    max_residual: float
    residuals: np.ndarray
    max_delta_theta: float
    points: np.ndarray
    h: float

    def passes(self, tol):
        return self.max_residual <= tol and self.max_delta_theta <= max(tol, 1e-9)


def phihat_expr(phi, psi):
    return add(phi, psi)


def decomposition_field_jet(dec, phihat, X, h, order):
    """Jet of the bivector ``Σ_k (α_k∘φ̂) θ_k``."""
    X = np.atleast_2d(X)
    n = X.shape[1]
    total = Jet.constant(np.zeros((X.shape[0], n, n)), n, order)
    if dec.is_trivial:
        return total
    p = eval_jet(phihat, X, h, order)
    for term in dec.terms:
        a = profile_jet(term.alpha, p)
        total = total + bilinear("", "ab", "ab", a, bivector_jet(term.theta, X, h, order))
    return total


def check_assumption(op, dec, X, h, phi=None, psi=None):
    """Pointwise defect of ``U + d(φ-ψ)⌟A = δ(Σ (α_k∘φ̂) θ_k)``."""
    X = np.atleast_2d(X)
    phi = op.phi if phi is None else phi
    psi = op.psi if psi is None else psi
    b = op.bundle
    A = expr_matrix_jet(b.A, X, h, 0, symmetric=True).val
    U = expr_vector_jet(b.U, X, h, 0).val
    dphi = eval_jet(phi, X, h, 1).grad
    dpsi = eval_jet(psi, X, h, 1).grad
    lhs = U + np.einsum("...ij,...j->...i", A, dphi - dpsi)
    rhs = codiff_bivec(decomposition_field_jet(dec, phihat_expr(phi, psi), X, h, 1)).val
    res = np.linalg.norm(lhs - rhs, axis=-1)
    dtheta = 0.0
    for term in dec.terms:
        d = codiff_bivec(bivector_jet(term.theta, X, h, 1)).val
        dtheta = max(dtheta, float(np.max(np.linalg.norm(d, axis=-1))))
    return AssumptionReport(float(np.max(res, initial=0.0)), res, dtheta, X, h)


def solve_constant_theta(op, X, h, alpha="t", phi=None, psi=None):
    """Least-squares constant ``θ`` with ``U + d(φ-ψ)⌟A = δ((α∘φ̂)θ)`` on ``X``.

    Returns ``(theta, max_residual)``.  Used so that gallery decompositions do
    not depend on the wedge normalization.
    """
    X = np.atleast_2d(X)
    n = op.n
    phi = op.phi if phi is None else phi
    psi = op.psi if psi is None else psi
    a = alpha if isinstance(alpha, Expr) else parse(str(alpha), T_CONTEXT)
    b = op.bundle
    A = expr_matrix_jet(b.A, X, h, 0, symmetric=True).val
    U = expr_vector_jet(b.U, X, h, 0).val
    dphi = eval_jet(phi, X, h, 1).grad
    dpsi = eval_jet(psi, X, h, 1).grad
    lhs = U + np.einsum("...ij,...j->...i", A, dphi - dpsi)
    p = eval_jet(phihat_expr(phi, psi), X, h, 1)
    a1 = profile_derivatives(a, p.val, 1)[..., 1]
    basis = basis_bivectors(n)
    if len(basis) == 0:
        return np.zeros((n, n)), float(np.max(np.abs(lhs), initial=0.0))
    # δ((α∘φ̂)E) = -(α'∘φ̂) dφ̂⌟E for constant E
    cols = [(-a1[:, None] * contract(p.grad, E)).ravel() for E in basis]
    M = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(M, lhs.ravel(), rcond=None)
    theta = sum(c * E for c, E in zip(coef, basis))
    res = np.max(np.abs(M @ coef - lhs.ravel()), initial=0.0)
    return theta, float(res)


# -- the corrector B ----------------------------------------------------------


def _profile_integrals(alpha, t, h, m_inf, qc, order, allow_outside):
    """``F^{(j)}(t)`` for ``F(t) = ∫_0^{(m∞-t)/h} α'(hs + t) e^{-s} ds``, j = 0..order.

    Inside the integral the derivative falls on ``α'``; a finite upper limit
    ``L(t) = (m∞-t)/h`` adds the boundary terms
    ``-Σ_{i=1}^{j} α^{(i)}(m∞) e^{-L} / h^{j-i+1}``.
    """
    t = np.asarray(t, dtype=float)
    finite = np.isfinite(m_inf)
    if finite:
        L = (m_inf - t) / h
        if np.any(L < 0) and not allow_outside:
            bad = float(np.max(t))
            raise DomainError(f"phi_hat = {bad:.6g} exceeds m_inf = {m_inf:.6g}")
        L = np.maximum(L, 0.0)
    else:
        L = np.full(t.shape, qc.max_s)
    kinks = profile_kinks(alpha)
    extra = (kinks[None, :] - t[:, None]) / h if kinks.size else None
    s, w = panel_rule(L, qc, extra)
    D = profile_derivatives(alpha, h * s + t[:, None], order + 1)
    F = np.einsum("nm,nmk->nk", w, D[..., 1:])
    if finite:
        E = np.where(L < qc.max_s, np.exp(-L), 0.0)
        c = profile_derivatives(alpha, np.array([m_inf]), order)[0]
        for j in range(1, order + 1):
            for i in range(1, j + 1):
                F[:, j] -= c[i] * E / h ** (j - i + 1)
    return F


def construct_B(dec, phihat, h, qc=None, X=None, jet_order=1, allow_outside=False, check=False):
    """Bivector jet of ``B = Σ_k I_k θ_k`` at the points ``X``.

    With ``check`` the quadrature is repeated with a coarser rule and a
    :class:`QuadratureError` is raised when the two disagree beyond ``qc.tol``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    qc = qc or QuadratureConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Nx, n = X.shape
    if dec.is_trivial:
        return Jet.constant(np.zeros((Nx, n, n)), n, jet_order)
    chunks = []
    for start in range(0, Nx, qc.chunk):
        Xc = X[start : start + qc.chunk]
        p = eval_jet(phihat, Xc, h, jet_order)
        total = None
        for term in dec.terms:
            F = _profile_integrals(term.alpha, p.val, h, dec.m_inf, qc, jet_order, allow_outside)
            if check:
                F2 = _profile_integrals(term.alpha, p.val, h, dec.m_inf, qc.coarser(), 0, allow_outside)
                err = np.max(np.abs(F[:, 0] - F2[:, 0]) / (1.0 + np.abs(F[:, 0])))
                if err > qc.tol:
                    raise QuadratureError(f"quadrature estimate {err:.2e} exceeds tol {qc.tol:.1e}")
            contrib = bilinear("", "ab", "ab", p.compose(F), bivector_jet(term.theta, Xc, h, jet_order))
            total = contrib if total is None else total + contrib
        chunks.append(total)
    return concat(chunks)


def classical_expansion(dec, phihat, K, X, h=0.1):
    """Coefficients ``B_j = Σ_k α_k^{(j+1)}(φ̂) θ_k`` for j = 0..K.

    ``h`` only enters through coefficient expressions that mention it.
    For finite ``m_inf`` the same coefficients hold up to ``O(e^{-c/h})``.
    """
    if K > 6:
        raise ValueError("classical expansion is limited to K <= 6")
    if K < 0:
        raise ValueError("K must be >= 0")
    X = np.atleast_2d(X)
    Nx, n = X.shape
    out = [np.zeros((Nx, n, n)) for _ in range(K + 1)]
    if dec.is_trivial:
        return out
    p = eval_jet(phihat, X, h, 0).val
    for term in dec.terms:
        D = profile_derivatives(term.alpha, p, K + 1)
        th = bivector_jet(term.theta, X, h, 0).val
        for j in range(K + 1):
            out[j] += D[:, j + 1, None, None] * th
    return out


def pde_certificate(dec, phihat, h, X, qc=None, B=None):
    """Norm of ``hδB + dφ̂⌟B - Σ_k (α_k'∘φ̂) dφ̂⌟θ_k`` at each point."""
    X = np.atleast_2d(X)
    if B is None:
        B = construct_B(dec, phihat, h, qc, X, jet_order=1)
    p = eval_jet(phihat, X, h, 1)
    lhs = h * codiff_bivec(B).val + contract(p.grad, B.val)
    rhs = np.zeros_like(lhs)
    for term in dec.terms:
        a1 = profile_derivatives(term.alpha, p.val, 1)[..., 1]
        rhs += a1[:, None] * contract(p.grad, bivector_jet(term.theta, X, h, 0).val)
    return np.linalg.norm(lhs - rhs, axis=-1)


# -- B providers: callables (X, h, order) -> bivector jet -----------------------


@dataclass(frozen=True)
class ZeroB:
    n: int

    def __call__(self, X, h, order):
        X = np.atleast_2d(X)
        return Jet.constant(np.zeros((X.shape[0], self.n, self.n)), self.n, order)


@dataclass(frozen=True)
class QuadratureB:
    dec: ThetaDecomposition
    phihat: Expr
    qc: QuadratureConfig = field(default_factory=QuadratureConfig)
    allow_outside: bool = False

    def __call__(self, X, h, order):
        return construct_B(self.dec, self.phihat, h, self.qc, X, order, self.allow_outside)


@dataclass(frozen=True)
class ExprB:
    """Directly supplied bivector expressions."""

    theta: Tuple[Tuple[Expr, ...], ...]

    @classmethod
    def from_strings(cls, n, theta):
        return cls(_bivector_exprs(theta, n))

    def __call__(self, X, h, order):
        return bivector_jet(self.theta, X, h, order)


@dataclass(frozen=True)
class MaskedB:
    """``χ·B`` for a scalar cutoff expression ``χ``."""

    chi: Expr
    inner: Callable

    def __call__(self, X, h, order):
        c = eval_jet(self.chi, X, h, order)
        return bilinear("", "ab", "ab", c, self.inner(X, h, order))


@dataclass(frozen=True)
class BlockB:
    """Block-diagonal bivector on a product space."""

    first: Callable
    n1: int
    second: Callable
    n2: int

    def __call__(self, X, h, order):
        X = np.atleast_2d(X)
        n = self.n1 + self.n2
        J1 = embed(self.first(X[:, : self.n1], h, order), n, 0)
        J2 = embed(self.second(X[:, self.n1 :], h, order), n, self.n1)
        N = X.shape[0]

        def place(J, off, m):
            parts = []
            for a in J.parts():
                out = np.zeros((N, n, n) + a.shape[3:])
                out[:, off : off + m, off : off + m] = a
                parts.append(out)
            return Jet(*parts + [None] * (4 - len(parts)), n=n)

        return place(J1, 0, self.n1) + place(J2, self.n1, self.n2)


# -- structures ---------------------------------------------------------------


@dataclass(frozen=True)
class SusyStructure:
    n: int
    A: Tuple[Tuple[Expr, ...], ...]
    B: Callable
    phi: Expr
    psi: Expr
    dec: Optional[ThetaDecomposition] = None
    operator: Optional[OperatorSpec] = None
    h_range: Tuple[float, float] = (0.0, 1.0)
    label: str = "structure"

    @classmethod
    def trivial(cls):
        """The structure on a point, neutral for :func:`tensorize`."""
        return cls(0, (), ZeroB(0), Num(0.0), Num(0.0), label="trivial")

    @property
    def phihat(self):
        return phihat_expr(self.phi, self.psi)

    def A_jet(self, X, h, order=1):
        return expr_matrix_jet(self.A, np.atleast_2d(X), h, order, symmetric=True)

    def bivector_jet(self, X, h, order=1):
        return self.B(np.atleast_2d(X), h, order)

    def B_jet(self, X, h, order=1):
        """Antisymmetric part of ``G`` as a map ``T*X -> TX``."""
        return self.bivector_jet(X, h, order) * -2.0

    def G_jet(self, X, h, order=1):
        return self.A_jet(X, h, order) + self.B_jet(X, h, order)

    def G(self, X, h):
        return self.G_jet(X, h, 0).val

    def classical(self, K, X, h=0.1):
        if self.dec is None:
            raise ValueError("structure has no decomposition")
        return classical_expansion(self.dec, self.phihat, K, X, h)


def assemble_G(op, dec, qc=None, check_points=None, h=None, tol=1e-8, phi=None, psi=None, label=None):
    """Structure ``G = A + B`` for ``op`` from a decomposition.

    When ``check_points`` is given the assumption is verified there (at ``h``,
    default 0.1) and :class:`AssumptionError` is raised if its defect exceeds
    ``tol``.
    """
    phi = op.phi if phi is None else phi
    psi = op.psi if psi is None else psi
    if check_points is not None:
        rep = check_assumption(op, dec, check_points, 0.1 if h is None else h, phi, psi)
        if not rep.passes(tol):
            raise AssumptionError(
                f"assumption defect {rep.max_residual:.3e} (δθ defect {rep.max_delta_theta:.3e}) exceeds {tol:.1e}"
            )
    ph = phihat_expr(phi, psi)
    B = ZeroB(op.n) if dec.is_trivial else QuadratureB(dec, ph, qc or QuadratureConfig())
    return SusyStructure(op.n, op.bundle.A, B, phi, psi, dec, op, label=label or op.name)


def structure_from_B(op, B, phi=None, psi=None, label=None):
    """Structure with a directly supplied bivector provider."""
    phi = op.phi if phi is None else phi
    psi = op.psi if psi is None else psi
    return SusyStructure(op.n, op.bundle.A, B, phi, psi, None, op, label=label or op.name)


# -- the twisted complex ------------------------------------------------------


def twisted_d_jet(phi_jet, u_jet, h):
    """Covector jet ``h du + u dφ`` (one order below the inputs)."""
    du = stack([u_jet.derivative(i) for i in range(u_jet.n)], axis=-1)
    dphi = stack([phi_jet.derivative(i) for i in range(phi_jet.n)], axis=-1)
    k = min(du.order, dphi.order)
    return du.truncate(k) * h + bilinear("", "a", "a", u_jet.truncate(k), dphi.truncate(k))


def twisted_d(phi, h, u, X):
    X = np.atleast_2d(X)
    return twisted_d_jet(eval_jet(phi, X, h, 1), eval_jet(u, X, h, 1), h).val


def twisted_dstar_G(S, psi, h, omega, X):
    """``hδ(Gᵗω) + dψ⌟(Gᵗω)`` for a covector jet ``omega`` of order >= 1."""
    X = np.atleast_2d(X)
    G = S.G_jet(X, h, 1)
    Gw = matvec(G.T, omega)
    dpsi = eval_jet(psi, X, h, 1).grad
    return h * codiff_vec(Gw).val + np.einsum("...i,...i->...", dpsi, Gw.val)


def factorization_residual(op, S, h, u, X, phi=None, psi=None):
    """``P u - d^{G,*}_{ψ,h} d_{φ,h} u`` at the points ``X``."""
    X = np.atleast_2d(X)
    phi = S.phi if phi is None else phi
    psi = S.psi if psi is None else psi
    uj = u if isinstance(u, Jet) else eval_jet(u, X, h, 2)
    omega = twisted_d_jet(eval_jet(phi, X, h, 2), uj, h)
    return apply_P(op, uj, X, h) - twisted_dstar_G(S, psi, h, omega, X)


# -- tensorization ------------------------------------------------------------


def _shift_matrix(rows, off):
    return [[shift_variables(e, off) for e in row] for row in rows]


def tensor_operator(op1, op2):
    """``P1 + P2`` acting on the product of the two spaces."""
    b1, b2 = op1.bundle, op2.bundle
    n1, n2 = b1.n, b2.n
    z = Num(0.0)
    A2 = _shift_matrix(b2.A, n1)
    A = [list(r) + [z] * n2 for r in b1.A] + [[z] * n1 + list(r) for r in A2]
    U = list(b1.U) + [shift_variables(e, n1) for e in b2.U]
    bundle = FieldBundle(
        n1 + n2,
        tuple(tuple(r) for r in A),
        tuple(U),
        add(b1.v, shift_variables(b2.v, n1)),
        add(b1.phi, shift_variables(b2.phi, n1)),
        add(b1.psi, shift_variables(b2.psi, n1)),
    )
    return OperatorSpec(bundle, f"{op1.name}x{op2.name}")


def tensorize(S1, S2):
    """Block-diagonal structure ``diag(G1, G2)`` with summed phases."""
    if S2.n == 0:
        return S1
    if S1.n == 0:
        return S2
    n1, n2 = S1.n, S2.n
    z = Num(0.0)
    A = [list(r) + [z] * n2 for r in S1.A] + [[z] * n1 + list(r) for r in _shift_matrix(S2.A, n1)]
    op = None
    if S1.operator is not None and S2.operator is not None:
        op = tensor_operator(S1.operator, S2.operator)
    lo = max(S1.h_range[0], S2.h_range[0])
    hi = min(S1.h_range[1], S2.h_range[1])
    return SusyStructure(
        n1 + n2,
        tuple(tuple(r) for r in A),
        BlockB(S1.B, n1, S2.B, n2),
        add(S1.phi, shift_variables(S2.phi, n1)),
        add(S1.psi, shift_variables(S2.psi, n1)),
        None,
        op,
        (lo, hi),
        f"{S1.label}x{S2.label}",
    )


__all__ = [
    "AssumptionError",
    "AssumptionReport",
    "BlockB",
    "ExprB",
    "MaskedB",
    "QuadratureB",
    "QuadratureConfig",
    "QuadratureError",
    "SusyStructure",
    "ThetaDecomposition",
    "ThetaTerm",
    "ZeroB",
    "assemble_G",
    "bivector_jet",
    "check_assumption",
    "classical_expansion",
    "construct_B",
    "decomposition_field_jet",
    "factorization_residual",
    "pde_certificate",
    "profile_growth",
    "profile_jet",
    "solve_constant_theta",
    "structure_from_B",
    "tensor_operator",
    "tensorize",
    "twisted_d",
    "twisted_d_jet",
    "twisted_dstar_G",
]
