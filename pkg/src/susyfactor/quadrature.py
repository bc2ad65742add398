"""Composite Gauss-Legendre rules for integrals ``∫_0^L g(s) e^{-s} ds``.

The panel breakpoints are fixed in ``s`` and clipped at each point's own upper
limit, so a batch of points with different limits shares one node layout.
Extra per-point breakpoints can be inserted where the integrand is known to
be non-analytic (the ends of a ``bump`` transition).
"""

from dataclasses import dataclass, replace

import numpy as np


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    max_s: float = 50.0
    panels: int = 104
    nodes: int = 24
    tol: float = 1e-10
    chunk: int = 256

    def __post_init__(self):
        if self.max_s < 40:
            raise ValueError("max_s must be >= 40")
        if not 0 < self.tol <= 1e-10:
            raise ValueError("tol must lie in ]0, 1e-10]")
        if self.panels < 8 or self.nodes < 4:
            raise ValueError("need at least 8 panels of 4 nodes")

    def breakpoints(self):
        """Geometric refinement near 0, then uniform panels up to ``max_s``."""
        n_geo = 4
        step = self.max_s / (self.panels - n_geo)
        geo = step * 2.0 ** -np.arange(n_geo, 0, -1)
        uniform = np.linspace(step, self.max_s, self.panels - n_geo)
        return np.concatenate([[0.0], geo, uniform])

    def coarser(self):
        """Rule used for the error estimate: same panels, fewer nodes."""
        return replace(self, nodes=max(4, (2 * self.nodes) // 3))


def panel_rule(upper, qc, extra=None):
    """Nodes and weights (including ``e^{-s}``) on ``[0, upper]`` per point.

    ``upper`` has shape (N,); ``extra`` (shape (N, K)) adds breakpoints.  The
    result arrays have shape (N, M).  Panels beyond a point's limit get zero
    weight.
    """
    upper = np.minimum(np.asarray(upper, dtype=float), qc.max_s)
    upper = np.maximum(upper, 0.0)
    N = upper.shape[0]
    u, w = np.polynomial.legendre.leggauss(qc.nodes)
    bp = np.broadcast_to(qc.breakpoints(), (N, qc.panels + 1))
    if extra is not None and extra.shape[-1]:
        bp = np.sort(np.concatenate([bp, np.clip(extra, 0.0, qc.max_s)], axis=1), axis=1)
    a = np.minimum(bp[:, :-1], upper[:, None])
    b = np.minimum(bp[:, 1:], upper[:, None])
    half = 0.5 * (b - a)
    s = a[..., None] + half[..., None] * (u + 1.0)
    weights = half[..., None] * w * np.exp(-s)
    return s.reshape(N, -1), weights.reshape(N, -1)
