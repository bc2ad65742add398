"""Forward generation of operators that satisfy the decomposition hypothesis.

Given ``A``, phases ``φ, ψ`` and a decomposition, ``U`` and ``v`` are solved
symbolically so that the assumption and the first eikonal equation hold
exactly; used by the gallery and by tests as an oracle.
"""

from .dsl import Num, Var, parse, x_context
from .dsl.symbolic import ZERO, add, diff, mul, sub, substitute
from .operator import FieldBundle, OperatorSpec


def _p(e, n):
    return e if not isinstance(e, str) else parse(e, x_context(n))


def codiff_bivector_expr(W, n):
    """``(δW)_i = 2 Σ_j ∂_j W_ji`` for a matrix of expressions."""
    out = []
    for i in range(n):
        acc = ZERO
        for j in range(n):
            acc = add(acc, diff(W[j][i], f"x{j + 1}"))
        out.append(mul(Num(2.0), acc))
    return out


def decomposition_expr(dec, phihat):
    """Matrix of expressions ``Σ_k (α_k∘φ̂) θ_k``."""
    n = dec.n
    W = [[ZERO] * n for _ in range(n)]
    for term in dec.terms:
        a = substitute(term.alpha, {"t": phihat})
        for i in range(n):
            for j in range(n):
                W[i][j] = add(W[i][j], mul(a, term.theta[i][j]))
    return W


def synthesize_operator(n, A, phi, psi, dec, name="synthetic"):
    """Operator with ``U = δ(Σ(α_k∘φ̂)θ_k) - A d(φ-ψ)`` and ``v`` from the eikonal.

    ``v = dφ⌟(A dφ) + U dφ + hδ(A dφ)`` makes ``P(e^{-φ/h}) = 0``.
    """
    A = [[_p(a, n) for a in row] for row in A]
    phi, psi = _p(phi, n), _p(psi, n)
    bundle_A = FieldBundle(n, tuple(tuple(r) for r in A), tuple([ZERO] * n), ZERO, phi, psi).A
    dphi = [diff(phi, f"x{i + 1}") for i in range(n)]
    dchi = [diff(sub(phi, psi), f"x{i + 1}") for i in range(n)]
    W = decomposition_expr(dec, add(phi, psi))
    dW = codiff_bivector_expr(W, n)
    U = []
    for i in range(n):
        Ad = ZERO
        for j in range(n):
            Ad = add(Ad, mul(bundle_A[i][j], dchi[j]))
        U.append(sub(dW[i], Ad))
    Adphi = []
    for i in range(n):
        acc = ZERO
        for j in range(n):
            acc = add(acc, mul(bundle_A[i][j], dphi[j]))
        Adphi.append(acc)
    v = ZERO
    for i in range(n):
        v = add(v, mul(dphi[i], add(Adphi[i], U[i])))
    div = ZERO
    for i in range(n):
        div = add(div, diff(Adphi[i], f"x{i + 1}"))
    v = sub(v, mul(Var("h"), div))  # + hδ(A dφ)
    bundle = FieldBundle(n, bundle_A, tuple(U), v, phi, psi)
    return OperatorSpec(bundle, name)


__all__ = ["codiff_bivector_expr", "decomposition_expr", "synthesize_operator"]
