"""Localized perturbations ``U_ε = δ((χ_ε α∘φ) θ)`` of a sublevel component.

``χ_ε`` equals 1 on ``{φ < σ-ε}`` inside the chosen component of
``{φ < σ}`` and vanishes outside it.  The component is found by flood fill
on a grid and enters expressions as a locally constant mask.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dsl import Bump, Expr, Mask, Num, T_CONTEXT, Var, eval_jet, parse, profile_derivatives, x_context
from .dsl.symbolic import ZERO, add, diff, mul, neg, substitute
from .operator import FieldBundle, OperatorSpec
from .quadrature import QuadratureConfig
from .susy import MaskedB, QuadratureB, SusyStructure, ThetaDecomposition, _bivector_exprs


@dataclass(frozen=True)
class ComponentMask:
    """Nearest-cell lookup of a labelled grid."""

    lo: tuple
    step: tuple
    labels: np.ndarray
    label: int

    def __call__(self, X):
        X = np.atleast_2d(X)
        idx = np.rint((X - np.asarray(self.lo)) / np.asarray(self.step)).astype(int)
        shape = np.asarray(self.labels.shape)
        inside = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.zeros(X.shape[0])
        ii = tuple(np.clip(idx[inside], 0, shape - 1).T)
        out[inside] = self.labels[ii] == self.label
        return out


@dataclass
class PerturbationInfo:
    component: int
    n_components: int
    cells: int
    min_grad_band: float
    mask: ComponentMask


def _grid(box, grid):
    axes = [np.linspace(lo, hi, grid) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return axes, np.stack([m.ravel() for m in mesh], axis=1)


def build_perturbation_gallery(phi, sigma, eps, alpha, theta, component_seed, box, grid=401, qc=None, name="perturbation"):
    """Operator ``P_ε = U_ε∘hd`` and its structure with ``B = χ_ε B⁰``.

    ``B⁰`` is the corrector of the decomposition ``α(t/2)θ`` for ``φ̂ = 2φ``
    with upper limit ``2(σ-ε)``.
    """
    seed = np.asarray(component_seed, dtype=float)
    n = seed.shape[0]
    ctx = x_context(n)
    phi = phi if isinstance(phi, Expr) else parse(str(phi), ctx)
    alpha = alpha if isinstance(alpha, Expr) else parse(str(alpha), T_CONTEXT)
    theta = _bivector_exprs(theta, n)
    if not 0 < eps:
        raise ValueError("eps must be positive")
    cut = sigma - eps

    # α must vanish with its derivatives on [σ-ε, ∞[
    t = cut + np.concatenate([np.linspace(0.0, 1.0, 101), np.geomspace(1.0, 1e3, 30)])
    if np.max(np.abs(profile_derivatives(alpha, t, 3))) > 0.0:
        raise ValueError(f"support of alpha reaches beyond sigma - eps = {cut:g}")

    axes, P = _grid(box, grid)
    shape = (grid,) * n
    pj = eval_jet(phi, P, 0.1, 1)
    values = pj.val.reshape(shape)
    labels, count = ndimage.label(values < sigma)
    lo = tuple(a[0] for a in axes)
    step = tuple(a[1] - a[0] for a in axes)
    idx = tuple(np.rint((seed - np.asarray(lo)) / np.asarray(step)).astype(int))
    if any(i < 0 or i >= grid for i in idx) or labels[idx] == 0:
        raise ValueError("component_seed is not in {phi < sigma}")
    lab = int(labels[idx])
    member = (labels == lab).ravel()
    # the component must stay inside the box
    boundary = np.zeros(shape, dtype=bool)
    for d in range(n):
        sl = [slice(None)] * n
        sl[d] = [0, grid - 1]
        boundary[tuple(sl)] = True
    if np.any(boundary & (labels == lab)):
        raise ValueError("the component of {phi < sigma} touches the grid boundary")
    band = member & (pj.val > cut) & (pj.val < sigma)
    gnorm = np.linalg.norm(pj.grad, axis=1)
    min_grad = float(np.min(gnorm[band])) if band.any() else float("inf")
    if min_grad < 1e-3 * float(np.max(gnorm[member])):
        raise ValueError("]sigma - eps, sigma[ contains a critical value of phi on the component")

    mask = ComponentMask(lo, step, labels, lab)
    chi = mul(Mask(f"component{lab}", mask), Bump(phi, cut, sigma))

    # U_ε = -χ α'(φ) dφ⌟θ with (ξ⌟θ)_i = 2 Σ_j θ_ij ξ_j
    a1 = substitute(diff(alpha, "t"), {"t": phi})
    coef = neg(mul(chi, a1))
    U = []
    for i in range(n):
        acc = ZERO
        for j in range(n):
            acc = add(acc, mul(theta[i][j], diff(phi, f"x{j + 1}")))
        U.append(mul(coef, mul(Num(2.0), acc)))
    zero_A = tuple(tuple(ZERO for _ in range(n)) for _ in range(n))
    op = OperatorSpec(FieldBundle(n, zero_A, tuple(U), ZERO, phi, phi), name)

    alpha_half = substitute(alpha, {"t": mul(Num(0.5), Var("t"))})
    dec0 = ThetaDecomposition.from_strings(n, [(alpha_half, theta)], m_inf=2.0 * cut)
    B0 = QuadratureB(dec0, mul(Num(2.0), phi), qc or QuadratureConfig(), allow_outside=True)
    S = SusyStructure(n, zero_A, MaskedB(chi, B0), phi, phi, None, op, label=name)
    info = PerturbationInfo(lab, int(count), int(member.sum()), min_grad, mask)
    return op, S, info
