"""Pointwise exterior algebra on R^n with the Euclidean metric.

Bivectors are stored as full antisymmetric ``n x n`` matrices.  The
normalization is fixed by two choices made together::

    wedge(u, v)       = (u v^T - v u^T) / 2
    contract(xi, W)   = 2 W xi

so that ``contract(xi, wedge(u, v)) = (xi.v) u - (xi.u) v``.  Every other
module inherits its signs from this pair.

All functions accept a leading batch shape: a ``(..., n)`` vector array and a
``(..., n, n)`` bivector array broadcast pointwise.
"""

import numpy as np


class DimensionError(ValueError):
    pass


def _check_dim(*arrays):
    dims = {a.shape[-1] for a in arrays}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def as_bivector(W, atol=0.0):
    """Validate ``W`` as a bivector and return it as a float array.

    With ``atol == 0`` the antisymmetry must hold exactly; otherwise the
    matrix is projected onto its antisymmetric part after the check.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim < 2 or W.shape[-1] != W.shape[-2]:
        raise DimensionError(f"bivector must be square, got shape {W.shape}")
    defect = np.max(np.abs(W + np.swapaxes(W, -1, -2)), initial=0.0)
    if defect > atol:
        raise ValueError(f"bivector is not antisymmetric (defect {defect:.3e})")
    if atol > 0:
        W = 0.5 * (W - np.swapaxes(W, -1, -2))
    return W


def as_symmap(S, atol=0.0):
    S = np.asarray(S, dtype=float)
    if S.ndim < 2 or S.shape[-1] != S.shape[-2]:
        raise DimensionError(f"symmetric map must be square, got shape {S.shape}")
    defect = np.max(np.abs(S - np.swapaxes(S, -1, -2)), initial=0.0)
    if defect > atol:
        raise ValueError(f"matrix is not symmetric (defect {defect:.3e})")
    if atol > 0:
        S = 0.5 * (S + np.swapaxes(S, -1, -2))
    return S


def wedge(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_dim(u, v)
    uv = u[..., :, None] * v[..., None, :]
    # uv - uv^T is exactly antisymmetric in IEEE arithmetic
    return 0.5 * (uv - np.swapaxes(uv, -1, -2))


def contract(xi, W):
    """Interior product ``xi ⌟ W`` of a covector with a bivector."""
    xi = np.asarray(xi, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.shape[-1] != xi.shape[-1] or W.shape[-2] != xi.shape[-1]:
        raise DimensionError(f"dimension mismatch: covector {xi.shape}, bivector {W.shape}")
    return 2.0 * np.einsum("...ij,...j->...i", W, xi)


def bivector_to_map(W):
    """Matrix of the antisymmetric map ``T*X -> TX`` attached to ``W``.

    This is the antisymmetric part of a structure ``G = A + B`` when ``W`` is
    the corrector bivector: ``xi ⌟ W = B^T xi``.
    """
    return -2.0 * np.asarray(W, dtype=float)


def map_to_bivector(B):
    return -0.5 * np.asarray(B, dtype=float)


def pairing_det(u, v):
    """Determinant pairing of ``u_1 ∧ ... ∧ u_k`` with ``v_1 ∧ ... ∧ v_k``."""
    if len(u) != len(v):
        raise ValueError("pairing needs lists of equal length")
    k = len(u)
    if k not in (1, 2):
        raise ValueError(f"pairing supports k in {{1, 2}}, got k = {k}")
    U = np.asarray(u, dtype=float)
    V = np.asarray(v, dtype=float)
    _check_dim(U, V)
    M = V @ U.T  # M_ij = v*_i(u_j)
    if k == 1:
        return float(M[0, 0])
    return float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])


def hodge_star_2d(U):
    """Hodge star on 1-forms of R^2, orientation dx1 ∧ dx2."""
    U = np.asarray(U, dtype=float)
    if U.shape[-1] != 2:
        raise DimensionError(f"hodge_star_2d needs dimension 2, got {U.shape[-1]}")
    out = np.empty_like(U)
    out[..., 0] = -U[..., 1]
    out[..., 1] = U[..., 0]
    return out


def basis_bivectors(n):
    """Basis ``e_i ∧ e_j`` (i < j) of bivectors on R^n, shape (n(n-1)/2, n, n)."""
    eye = np.eye(n)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not pairs:
        return np.zeros((0, n, n))
    return np.stack([wedge(eye[i], eye[j]) for i, j in pairs])
