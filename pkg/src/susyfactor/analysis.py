"""Temperateness fits and invertibility of ``G = A + B``."""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles


class SplittingError(ValueError):
    pass


def rho(X, m):
    """Order function ``(1 + |x|^2)^{m/2}``."""
    X = np.atleast_2d(X)
    return (1.0 + np.sum(X * X, axis=1)) ** (0.5 * m)


def multi_indices(n, max_order=2):
    out = [()]
    for k in range(1, max_order + 1):
        out += list(itertools.combinations_with_replacement(range(n), k))
    return out


def _derivative_norms(G, nu):
    """Spectral norm of ``∂^ν G`` at each point from an order-2 jet."""
    if len(nu) == 0:
        M = G.val
    elif len(nu) == 1:
        M = G.grad[..., nu[0]]
    else:
        M = G.hess[..., nu[0], nu[1]]
    return np.linalg.norm(M, ord=2, axis=(-2, -1))


@dataclass
class TemperatenessFit:
    m: float
    C: dict
    C_per_h: dict
    variation: dict
    slopes: dict
    h_range: tuple
    x_range: tuple
    factor: float
    fit_residual: float
    passed: bool = field(default=False)

    @property
    def max_variation(self):
        return max(self.variation.values(), default=1.0)


def fit_temperateness(S, X, h_grid, nu_set=None, factor=2.0, floor=1e-12):
    """Fit ``‖∂^ν G(x,h)‖ ≤ C_ν ρ_m(x)`` over the sample points and h grid.

    ``m`` is the largest least-squares slope of ``log max_h ‖∂^ν G‖`` against
    ``log ρ_1``; ``C_ν`` is the largest ratio.  The fit passes when, for each
    ν, the per-h constants vary by at most ``factor``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    h_grid = [float(h) for h in h_grid]
    if X.size == 0 or not h_grid:
        raise ValueError("grids must be nonempty")
    nus = multi_indices(S.n) if nu_set is None else [tuple(sorted(nu)) for nu in nu_set]
    if any(len(nu) > 2 for nu in nus):
        raise ValueError("|nu| <= 2 only")
    norms = {nu: [] for nu in nus}
    for h in h_grid:
        G = S.G_jet(X, h, 2)
        for nu in nus:
            norms[nu].append(_derivative_norms(G, nu))
    logr = np.log(rho(X, 1))
    slopes = {}
    resid = 0.0
    for nu in nus:
        M = np.max(norms[nu], axis=0)
        ok = M > floor
        if ok.sum() >= 3 and np.ptp(logr[ok]) > 1e-8:
            coef, res, _, _, _ = np.polyfit(logr[ok], np.log(M[ok]), 1, full=True)
            slopes[nu] = float(coef[0])
            if len(res):
                resid = max(resid, float(np.sqrt(res[0] / ok.sum())))
        else:
            slopes[nu] = 0.0
    m = max(0.0, max(slopes.values()))
    weight = rho(X, m)
    C, C_per_h, variation = {}, {}, {}
    for nu in nus:
        per_h = [float(np.max(v / weight)) for v in norms[nu]]
        C_per_h[nu] = per_h
        C[nu] = max(per_h)
        lo, hi = min(per_h), max(per_h)
        variation[nu] = 1.0 if hi <= floor else (hi / lo if lo > floor else float("inf"))
    passed = all(v <= factor for v in variation.values())
    xr = (X.min(axis=0).tolist(), X.max(axis=0).tolist())
    return TemperatenessFit(m, C, C_per_h, variation, slopes, (min(h_grid), max(h_grid)), xr, factor, resid, passed)


@dataclass
class DefiniteReport:
    C: float
    max_inv_norm: float
    applicable: bool
    passed: bool


def invertibility_definite(A, G):
    """Coercivity check: ``λ_min(A) = C > 0`` implies ``‖G⁻¹‖ ≤ 1/C``.

    ``A`` and ``G`` are stacks of matrices (shape (N, n, n)).
    """
    A = np.asarray(A, dtype=float).reshape((-1,) + np.shape(A)[-2:])
    G = np.asarray(G, dtype=float).reshape(A.shape)
    As = 0.5 * (A + np.swapaxes(A, -1, -2))
    C = float(np.min(np.linalg.eigvalsh(As)[..., 0]))
    sig = np.linalg.svd(G, compute_uv=False)
    smin = sig[..., -1]
    if C <= 1e-12 * max(1.0, float(np.max(sig[..., 0]))):
        with np.errstate(divide="ignore"):
            worst = float(np.max(np.where(smin > 0, 1.0 / np.where(smin > 0, smin, 1.0), np.inf)))
        return DefiniteReport(C, worst, False, False)
    if np.any(smin == 0.0):
        raise ArithmeticError("singular G with coercive symmetric part: convention or implementation bug")
    inv = 1.0 / smin
    return DefiniteReport(C, float(np.max(inv)), True, bool(np.all(inv <= 1.0 / C + 1e-12)))


@dataclass
class SplittingData:
    E_basis: np.ndarray
    F_basis: np.ndarray
    C0: float


def splitting_data(A0, rel=1e-10):
    """``E = ker A0`` (eigenvalues below ``rel·λ_max``), ``F = E^⊥``, ``C0 = λ_min(A0|F)``."""
    A0 = np.asarray(A0, dtype=float)
    if not np.allclose(A0, A0.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A0).max())):
        raise ValueError("A0 is not symmetric")
    lam, V = np.linalg.eigh(A0)
    scale = max(float(np.max(np.abs(lam))), 1e-300)
    if lam[0] < -rel * scale:
        raise ValueError("A0 is not positive semidefinite")
    ker = lam <= rel * scale
    C0 = float(np.min(lam[~ker])) if (~ker).any() else float("inf")
    return SplittingData(V[:, ker], V[:, ~ker], C0)


def kernel_consistency(A_samples, rel=1e-10):
    """Largest principal angle between kernels of ``A`` across samples."""
    bases = [splitting_data(A, rel).E_basis for A in A_samples]
    dims = {b.shape[1] for b in bases}
    if len(dims) != 1:
        return float("inf")
    if dims.pop() == 0:
        return 0.0
    return max(float(np.max(subspace_angles(bases[0], b))) for b in bases[1:]) if len(bases) > 1 else 0.0


@dataclass
class SplitReport:
    injective: bool
    dim_check: bool
    sigma_B: float
    C0: float
    inv_norm_bound: float
    measured_inv_norm: float
    data: SplittingData


def invertibility_split(A0, B0, rel=1e-10):
    """Invertibility of ``G = A0 + B0`` when ``A0 ≥ 0`` has kernel ``E`` with ``B0(E) ⊂ F``.

    ``B0`` is the antisymmetric part of ``G`` as a matrix.  ``G`` is injective
    iff ``B0|_E : E -> F`` is.  The bound follows the chain
    ``C0‖Π̂ξ‖² ≤ ⟨η, ξ⟩`` and ``Π̂B0Πξ = Π̂η - Π̂A0Π̂ξ - Π̂B0Π̂ξ``, closed by a
    quadratic inequality in ``‖Π̂ξ‖/‖η‖``.
    """
    A0 = np.asarray(A0, dtype=float)
    B0 = np.asarray(B0, dtype=float)
    if not np.allclose(B0, -B0.T, rtol=0, atol=1e-12 * max(1.0, np.abs(B0).max())):
        raise ValueError("B0 is not antisymmetric")
    data = splitting_data(A0, rel)
    E, F = data.E_basis, data.F_basis
    dE, dF = E.shape[1], F.shape[1]
    # absolute floor so that rounding noise on a zero matrix is not a kernel defect
    scale = max(np.linalg.norm(A0, 2), np.linalg.norm(B0, 2), 1.0)
    if dE and np.linalg.norm(E.T @ B0 @ E, 2) > rel * scale:
        raise SplittingError("splitting hypothesis violated: B0(E) is not contained in F")
    dim_check = dF >= dE
    if dE == 0:
        sigma_B = float("inf")
    elif dF == 0:
        sigma_B = 0.0
    else:
        sigma_B = float(np.linalg.svd(F.T @ B0 @ E, compute_uv=False)[-1]) if dF >= dE else 0.0
    injective = bool(dim_check and sigma_B > rel * scale)
    G = A0 + B0
    smin = np.linalg.svd(G, compute_uv=False)[-1]
    measured = float(1.0 / smin) if smin > 0 else float("inf")
    bound = float("inf")
    if injective:
        C0 = data.C0
        if dE == 0:
            bound = 1.0 / C0
        else:
            K = np.linalg.norm(A0, 2) + np.linalg.norm(B0, 2)
            b = 1.0 + K / sigma_B
            y = (b + np.sqrt(b * b + 4.0 * C0 / sigma_B)) / (2.0 * C0)
            bound = float(y + (1.0 + K * y) / sigma_B)
    return SplitReport(injective, dim_check, sigma_B, data.C0, bound, measured, data)
