"""Stream potentials of divergence-free fields on the plane.

For ``U`` with ``δU = 0`` there is ``α`` with ``U = δ(α ω)``, ``ω = dx1∧dx2``.
With the codifferential used throughout the package this reads
``U = (-∂_2 α, ∂_1 α)``, so ``∂_1 α = U_2`` and ``∂_2 α = -U_1``; along a path
``α(y) - α(x) = -∫_γ ⋆U`` where ``⋆U = -U_2 dx1 + U_1 dx2``.

When ``U(dφ) = 0`` and ``φ`` is Morse, ``α = f_j∘φ`` on each component of the
complement of the saddle levels; the pipeline recovers ``α`` on a grid, splits
the grid into components, fits the profiles ``f_j`` and tests whether they
glue into a single smooth ``f``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from .dsl import Expr, eval_jet, parse, x_context

STAR_SIGN = -1.0  # α(y) - α(x) = STAR_SIGN * ∫_γ ⋆U


class NotMorseError(ValueError):
    pass


class IntegrabilityError(ValueError):
    pass


def _expr(e):
    return e if isinstance(e, Expr) else parse(str(e), x_context(2))


def _field(U):
    """``U`` as a pair of expressions (also accepts an operator)."""
    if hasattr(U, "bundle"):
        U = U.bundle.U
    U = tuple(_expr(u) for u in U)
    if len(U) != 2:
        raise ValueError("planar fields have two components")
    return U


def eval_field(U, X, order=0, h=0.1):
    X = np.atleast_2d(X)
    jets = [eval_jet(u, X, h, order) for u in U]
    if order == 0:
        return np.stack([j.val for j in jets], axis=-1)
    return jets


@dataclass(frozen=True)
class Grid2D:
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def from_box(cls, box, n):
        (a, b), (c, d) = box
        ny = n if np.ndim(n) == 0 else n[1]
        nx = n if np.ndim(n) == 0 else n[0]
        return cls(np.linspace(a, b, nx), np.linspace(c, d, ny))

    @property
    def shape(self):
        return (self.x.size, self.y.size)

    @property
    def step(self):
        return (self.x[1] - self.x[0], self.y[1] - self.y[0])

    @property
    def points(self):
        X1, X2 = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([X1.ravel(), X2.ravel()], axis=1)

    def index_of(self, p):
        i = int(np.rint((p[0] - self.x[0]) / self.step[0]))
        j = int(np.rint((p[1] - self.y[0]) / self.step[1]))
        if not (0 <= i < self.x.size and 0 <= j < self.y.size):
            raise ValueError(f"point {tuple(p)} is outside the grid")
        return i, j

    def values(self, e, h=0.1):
        return eval_jet(_expr(e), self.points, h, 0).val.reshape(self.shape)


# -- critical points ----------------------------------------------------------


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    index: int
    value: float


@dataclass
class CriticalSet:
    points: list
    warnings: list = field(default_factory=list)

    @property
    def saddle_values(self):
        return sorted({round(p.value, 12) for p in self.points if p.index == 1})

    def of_index(self, k):
        return [p for p in self.points if p.index == k]


def find_critical_points(phi, box, seeds=15, max_iter=60, gtol=1e-11, dedup=1e-6):
    """Newton iteration on ``∇φ`` from a lattice of seeds inside ``box``."""
    phi = _expr(phi)
    (a, b), (c, d) = box
    if np.ndim(seeds) == 0:
        g1, g2 = np.meshgrid(np.linspace(a, b, seeds), np.linspace(c, d, seeds), indexing="ij")
        Z = np.stack([g1.ravel(), g2.ravel()], axis=1)
    else:
        Z = np.atleast_2d(np.asarray(seeds, dtype=float))
    active = np.ones(len(Z), dtype=bool)
    for _ in range(max_iter):
        J = eval_jet(phi, Z, 0.1, 2)
        g, H = J.grad, J.hess
        det = np.linalg.det(H)
        ok = active & (np.abs(det) > 1e-14)
        step = np.zeros_like(Z)
        step[ok] = np.linalg.solve(H[ok], g[ok][..., None])[..., 0]
        # damp large steps so seeds do not jump across the box
        size = np.linalg.norm(step, axis=1)
        lim = 0.5 * max(b - a, d - c)
        step *= np.minimum(1.0, lim / np.maximum(size, 1e-300))[:, None]
        Z = Z - step
        active &= np.isfinite(Z).all(axis=1)
        Z[~active] = 0.0
    J = eval_jet(phi, Z, 0.1, 2)
    gnorm = np.linalg.norm(J.grad, axis=1)
    inside = (Z[:, 0] >= a) & (Z[:, 0] <= b) & (Z[:, 1] >= c) & (Z[:, 1] <= d)
    conv = active & inside & (gnorm <= gtol * max(1.0, float(np.max(np.abs(J.val[active]), initial=1.0))))
    found = []
    for z, H, v in zip(Z[conv], J.hess[conv], J.val[conv]):
        if any(np.linalg.norm(z - np.asarray(p.location)) <= dedup for p in found):
            continue
        detH = np.linalg.det(H)
        if abs(detH) < 1e-8:
            raise NotMorseError(f"degenerate critical point at {z.tolist()} (det Hess = {detH:.2e})")
        index = int(np.sum(np.linalg.eigvalsh(H) < 0))
        found.append(CriticalPoint(tuple(float(t) for t in z), index, float(v)))
    found.sort(key=lambda p: (p.value, p.location))
    warnings = []
    if not found and np.any(active & inside & (gnorm < 1e-3)):
        warnings.append("Newton did not converge near small-gradient seeds")
    return CriticalSet(found, warnings)


# -- stream potential ---------------------------------------------------------


_GL_U, _GL_W = np.polynomial.legendre.leggauss(8)


def _segment_integrals(U, starts, ends):
    """``∫ U·dx`` along straight segments (Gauss-Legendre, 8 nodes)."""
    starts = np.atleast_2d(starts)
    ends = np.atleast_2d(ends)
    mid = 0.5 * (starts + ends)
    half = 0.5 * (ends - starts)
    P = mid[:, None, :] + _GL_U[None, :, None] * half[:, None, :]
    V = eval_field(U, P.reshape(-1, 2)).reshape(P.shape)
    return np.einsum("q,sqk,sk->s", _GL_W, V, half)


def star_integral(U, path, max_len=0.01):
    """``∫_γ ⋆U`` along a polygonal path (``⋆U = -U_2 dx1 + U_1 dx2``)."""
    U = _field(U)
    star = (_neg_expr(U[1]), U[0])
    path = np.atleast_2d(np.asarray(path, dtype=float))
    pts = [path[:1]]
    for p, q in zip(path[:-1], path[1:]):
        k = max(1, int(np.ceil(np.linalg.norm(q - p) / max_len)))
        pts.append(p + np.outer(np.arange(1, k + 1) / k, q - p))
    pts = np.concatenate(pts)
    return float(np.sum(_segment_integrals(star, pts[:-1], pts[1:])))


def _neg_expr(e):
    from .dsl.symbolic import neg

    return neg(e)


@dataclass
class StreamResult:
    alpha: np.ndarray
    grid: Grid2D
    divergence: float
    loop_residual: float


def recover_stream(U, grid, tol=1e-8):
    """Stream potential with ``∂_1 α = U_2``, ``∂_2 α = -U_1``, ``α = 0`` at the grid origin.

    Integrates up the left edge and then along each row; the loop residual
    compares against integrating along the bottom edge and then each column.
    """
    U = _field(U)
    P = grid.points
    jets = eval_field(U, P, order=1)
    div = jets[0].grad[:, 0] + jets[1].grad[:, 1]
    scale = 1.0 + float(np.max(np.abs(np.stack([j.val for j in jets]))))
    max_div = float(np.max(np.abs(div)))
    if max_div > tol * scale:
        raise IntegrabilityError(f"U is not divergence free: max |div U| = {max_div:.3e}")
    nx, ny = grid.shape
    x, y = grid.x, grid.y
    # dα = U_2 dx1 - U_1 dx2, i.e. the 1-form (U_2, -U_1)
    form = (U[1], _neg_expr(U[0]))

    def along_x(j_rows):
        starts = np.stack(np.meshgrid(x[:-1], y[j_rows], indexing="ij"), axis=-1).reshape(-1, 2)
        ends = starts + np.array([x[1] - x[0], 0.0])
        return _segment_integrals(form, starts, ends).reshape(nx - 1, len(j_rows))

    def along_y(i_cols):
        starts = np.stack(np.meshgrid(x[i_cols], y[:-1], indexing="ij"), axis=-1).reshape(-1, 2)
        ends = starts + np.array([0.0, y[1] - y[0]])
        return _segment_integrals(form, starts, ends).reshape(len(i_cols), ny - 1)

    dx_all = along_x(np.arange(ny))  # (nx-1, ny)
    dy_all = along_y(np.arange(nx))  # (nx, ny-1)
    left = np.concatenate([[0.0], np.cumsum(dy_all[0])])
    alpha = left[None, :] + np.concatenate([np.zeros((1, ny)), np.cumsum(dx_all, axis=0)], axis=0)
    bottom = np.concatenate([[0.0], np.cumsum(dx_all[:, 0])])
    alt = bottom[:, None] + np.concatenate([np.zeros((nx, 1)), np.cumsum(dy_all, axis=1)], axis=1)
    loop = float(np.max(np.abs(alpha - alt)))
    return StreamResult(alpha, grid, max_div, loop)


# -- components ---------------------------------------------------------------


@dataclass
class ComponentChart:
    grid: Grid2D
    labels: np.ndarray
    n_components: int
    unbounded: list
    saddle_values: list
    margin: float
    adjacency: dict
    phi_values: np.ndarray


def default_margin(phi, crit, grid):
    """``5 δx max ‖∇φ‖`` with the maximum taken near the saddle levels."""
    sig = crit.saddle_values
    if not sig:
        return 0.0
    J = eval_jet(_expr(phi), grid.points, 0.1, 1)
    g = np.linalg.norm(J.grad, axis=1)
    dx = max(grid.step)
    near = np.zeros(g.shape, dtype=bool)
    for s in sig:
        near |= np.abs(J.val - s) <= dx * g + 1e-12
    gmax = float(np.max(g[near])) if near.any() else float(np.max(g))
    return 5.0 * dx * gmax


def component_partition(phi, crit, grid, saddle_margin=None):
    phi = _expr(phi)
    values = grid.values(phi)
    sig = crit.saddle_values
    margin = default_margin(phi, crit, grid) if saddle_margin is None else float(saddle_margin)
    if sig and margin <= 0:
        raise ValueError("saddle_margin must be positive")
    keep = np.ones(values.shape, dtype=bool)
    for s in sig:
        keep &= np.abs(values - s) > margin
    labels, count = ndimage.label(keep)
    if count == 0:
        raise ValueError("saddle_margin removes every cell; use a smaller margin")
    for p in crit.points:
        if p.index == 1:
            continue
        try:
            ij = grid.index_of(p.location)
        except ValueError:
            continue
        if labels[ij] == 0:
            raise ValueError(
                f"saddle_margin {margin:.3g} swallows the extremum at {p.location}; use a smaller margin"
            )
    edge = np.zeros(values.shape, dtype=bool)
    edge[[0, -1], :] = True
    edge[:, [0, -1]] = True
    unbounded = sorted(int(v) for v in np.unique(labels[edge & (labels > 0)]))
    adjacency = {}
    reach = int(np.ceil(margin / min(grid.step))) + 2
    for s in sig:
        band = np.abs(values - s) <= margin
        grown = ndimage.binary_dilation(band, iterations=reach)
        adjacency[s] = sorted(int(v) for v in np.unique(labels[grown & (labels > 0)]))
    return ComponentChart(grid, labels, int(count), unbounded, list(sig), margin, adjacency, values)


# -- profiles -----------------------------------------------------------------


@dataclass
class ProfileFit:
    component: int
    knots: np.ndarray
    f_values: np.ndarray
    deviation: float
    alpha_range: float
    passed: bool
    coeffs: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)

    def __call__(self, t):
        """Evaluate the fitted profile with the local polynomial of each bin."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.coeffs) - 1)
        c = self.coeffs[k]
        d = t - self.knots[k]
        out = np.zeros_like(d)
        for j in range(c.shape[-1] - 1, -1, -1):
            out = out * d + c[..., j]
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.coeffs) - 1)
        c = self.coeffs[k]
        d = t - self.knots[k]
        out = np.zeros_like(d)
        for j in range(c.shape[-1] - 1, 0, -1):
            out = out * d + j * c[..., j]
        return out

    def spline(self):
        return CubicSpline(self.knots, self.f_values)


def _bin_bounds(t, min_cells, max_bins, max_width):
    """Quantile bins, split further where a bin is wider than ``max_width`` in ``φ``."""
    nb = int(max(1, min(max_bins, t.size // min_cells)))
    bounds = list(np.linspace(0, t.size, nb + 1).astype(int))
    out = [bounds[0]]
    for b0, b1 in zip(bounds[:-1], bounds[1:]):
        width = t[b1 - 1] - t[b0]
        pieces = int(min(np.ceil(width / max_width), (b1 - b0) // PROFILE_MIN_POINTS)) if width > max_width else 1
        if pieces > 1:
            cuts = np.searchsorted(t[b0:b1], t[b0] + width * np.arange(1, pieces) / pieces) + b0
            for c in cuts:
                if c - out[-1] >= PROFILE_MIN_POINTS and b1 - c >= PROFILE_MIN_POINTS:
                    out.append(int(c))
        out.append(b1)
    return out


PROFILE_DEGREE = 3
PROFILE_MIN_POINTS = 8


def fit_profile(alpha, chart, component, fit_tol=1e-6, min_cells=20, max_bins=5000, max_width=None):
    """Fit ``α ≈ f∘φ`` on one component with local cubics on quantile bins.

    Bins hold ``min_cells`` cells each and are split where wider than
    ``max_width`` (default: 1/2000 of the ``φ`` range).
    """
    A = alpha.alpha if isinstance(alpha, StreamResult) else np.asarray(alpha)
    cells = chart.labels == component
    t = chart.phi_values[cells]
    a = A[cells]
    if t.size < 2 * min_cells:
        raise ValueError(f"component {component} has too few cells ({t.size}) to bin")
    order = np.argsort(t, kind="stable")
    t, a = t[order], a[order]
    max_width = np.ptp(t) / 2000 if max_width is None else max_width
    bounds = _bin_bounds(t, min_cells, max_bins, max(max_width, 1e-300))
    knots, coeffs, edges = [], [], []
    pred = np.empty_like(a)
    for b0, b1 in zip(bounds[:-1], bounds[1:]):
        tb, ab = t[b0:b1], a[b0:b1]
        # the knot is a data point so the fit is never extrapolated there
        c = tb[(b1 - b0) // 2]
        p = np.zeros(PROFILE_DEGREE + 1)
        half = 0.5 * (tb[-1] - tb[0])
        distinct = np.unique(np.round((tb - tb[0]) / max(half, 1e-300), 6)).size
        if half <= 1e-14 * max(1.0, abs(c)) or distinct < 2:
            p[0] = np.mean(ab)
        else:
            deg = min(PROFILE_DEGREE, distinct - 1)
            q = np.polynomial.polynomial.polyfit((tb - c) / half, ab, deg)
            p[: deg + 1] = q / half ** np.arange(deg + 1)
        knots.append(c)
        coeffs.append(p)
        edges.append(tb[0])
        pred[b0:b1] = np.polynomial.polynomial.polyval(tb - c, p)
    knots = np.asarray(knots)
    keep = np.concatenate([[True], np.diff(knots) > 0])
    coeffs = np.asarray(coeffs)[keep]
    dev = float(np.max(np.abs(a - pred)))
    rng = float(np.ptp(a))
    passed = dev <= fit_tol * (1.0 + rng)
    return ProfileFit(component, knots[keep], coeffs[:, 0], dev, rng, bool(passed), coeffs, np.asarray(edges)[keep])


# -- gluing -------------------------------------------------------------------


@dataclass
class PairCheck:
    components: tuple
    x: tuple
    y: tuple
    level: float
    mismatch: float
    star_defect: float


@dataclass
class SaddleCheck:
    saddle: float
    below: list
    above: list
    jumps: list
    smooth: bool


@dataclass
class GlueReport:
    pairs: list
    saddles: list
    max_mismatch: float
    max_star_defect: float
    tol: float
    passed: bool
    verdict: str


def _level_pairs(chart, fits, per_pair=5, rng=None):
    """Grid cells ``x ∈ Ω_i``, ``y ∈ Ω_j`` at nearly equal levels."""
    rng = np.random.default_rng(0) if rng is None else rng
    ids = sorted(fits)
    out = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            i, j = ids[a], ids[b]
            ti = chart.phi_values[chart.labels == i]
            tj = chart.phi_values[chart.labels == j]
            lo, hi = max(ti.min(), tj.min()), min(ti.max(), tj.max())
            if hi <= lo:
                continue
            for level in rng.uniform(lo, hi, size=per_pair):
                xi = _closest_cell(chart, i, level)
                yj = _closest_cell(chart, j, level)
                out.append((i, j, xi, yj))
    return out


def _closest_cell(chart, comp, level):
    idx = np.argwhere(chart.labels == comp)
    vals = chart.phi_values[tuple(idx.T)]
    k = int(np.argmin(np.abs(vals - level)))
    return tuple(int(v) for v in idx[k])


def _grid_path(grid, a, b):
    """L-shaped polygon between two grid nodes (x first, then y)."""
    pa = np.array([grid.x[a[0]], grid.y[a[1]]])
    pb = np.array([grid.x[b[0]], grid.y[b[1]]])
    return np.array([pa, [pb[0], pa[1]], pb])


def saddle_smoothness(alpha, chart, saddle, delta=None, degree=4, tol=1e-3):
    """One-sided polynomial fits of ``α`` against ``φ`` on both sides of a saddle level.

    Values and the first two derivatives at the saddle level are compared for
    every (below, above) pair of adjacent components.
    """
    A = alpha.alpha if isinstance(alpha, StreamResult) else np.asarray(alpha)
    eps = chart.margin
    delta = 0.25 if delta is None else delta
    reach = int(np.ceil(eps / min(chart.grid.step))) + 2
    comps = chart.adjacency.get(saddle, [])
    below, above, polys = [], [], {}
    for c in comps:
        own = chart.labels == c
        # the component plus the part of the removed band next to it
        cells = own | (ndimage.binary_dilation(own, iterations=reach) & (chart.labels == 0))
        t = chart.phi_values[cells] - saddle
        a = A[cells]
        # a component lies on one side of each saddle level
        side = "below" if np.median(chart.phi_values[own]) < saddle else "above"
        sel = (t < 0) & (t > -delta) if side == "below" else (t > 0) & (t < delta)
        if sel.sum() >= 4 * (degree + 1):
            q = np.polynomial.polynomial.polyfit(t[sel] / delta, a[sel], degree)
            polys[c, side] = q / delta ** np.arange(degree + 1)
            (below if side == "below" else above).append(c)
    jumps = []
    for cb in below:
        for ca in above:
            pb, pa = polys[cb, "below"], polys[ca, "above"]
            d = [abs(pb[0] - pa[0]), abs(pb[1] - pa[1]), 2.0 * abs(pb[2] - pa[2])]
            jumps.append({"below": cb, "above": ca, "value": d[0], "d1": d[1], "d2": d[2]})
    scale = 1.0 + float(np.ptp(A))
    smooth = all(max(j["value"], j["d1"], j["d2"]) <= tol * scale for j in jumps)
    return SaddleCheck(saddle, below, above, jumps, smooth)


def glue_check(fits, alpha, chart, U, pairs=None, tol=1e-4, per_pair=5, seed=0):
    """Test whether the per-component profiles glue into one smooth ``f``.

    ``fits`` maps component id to :class:`ProfileFit`.  ``pairs`` is an
    optional list of ``(i, j, x_index, y_index)``; by default cells at random
    shared levels are used.  The verdict is labelled "sampled".
    """
    U = _field(U)
    A = alpha.alpha if isinstance(alpha, StreamResult) else np.asarray(alpha)
    if not all(f.passed for f in fits.values()):
        raise ValueError("glue_check needs every per-component fit to pass")
    pairs = _level_pairs(chart, fits, per_pair, np.random.default_rng(seed)) if pairs is None else pairs
    grid = chart.grid
    scale = 1.0 + float(np.ptp(A))
    checks = []
    for i, j, xi, yj in pairs:
        ti, tj = chart.phi_values[xi], chart.phi_values[yj]
        level = 0.5 * (ti + tj)
        if abs(ti - tj) > 0.5 * max(grid.step) * 10:
            raise ValueError(f"pair levels differ: {ti:.4g} vs {tj:.4g}")
        # compare the two profiles at a common level
        mismatch = abs(float(fits[i](level)) - float(fits[j](level)))
        path = _grid_path(grid, xi, yj)
        star = star_integral(U, path)
        defect = abs((A[yj] - A[xi]) - STAR_SIGN * star)
        checks.append(
            PairCheck((i, j), tuple(path[0]), tuple(path[-1]), float(level), float(mismatch), float(defect))
        )
    saddles = [saddle_smoothness(A, chart, s) for s in chart.saddle_values]
    mm = max((c.mismatch for c in checks), default=0.0)
    sd = max((c.star_defect for c in checks), default=0.0)
    passed = mm <= tol * scale and all(s.smooth for s in saddles)
    return GlueReport(checks, saddles, mm, sd, tol, bool(passed), "sampled")


def reconstruction_residual(U, phi, fits, chart, samples=4000, seed=0):
    """Relative misfit of ``U`` against ``δ((f_j∘φ) ω)`` on sampled component cells."""
    U = _field(U)
    idx = np.argwhere(chart.labels > 0)
    rng = np.random.default_rng(seed)
    if len(idx) > samples:
        idx = idx[rng.choice(len(idx), samples, replace=False)]
    P = np.stack([chart.grid.x[idx[:, 0]], chart.grid.y[idx[:, 1]]], axis=1)
    J = eval_jet(_expr(phi), P, 0.1, 1)
    lab = chart.labels[tuple(idx.T)]
    fp = np.empty(len(P))
    for c, f in fits.items():
        sel = lab == c
        fp[sel] = f.spline()(J.val[sel], 1)
    pred = fp[:, None] * np.stack([-J.grad[:, 1], J.grad[:, 0]], axis=1)
    V = eval_field(U, P)
    return float(np.max(np.abs(V - pred)) / (1.0 + np.max(np.abs(V))))


# -- whole pipeline -----------------------------------------------------------


@dataclass
class MorseReport:
    critical: CriticalSet
    stream: StreamResult
    chart: ComponentChart
    fits: dict
    glue: object
    per_component_pass: bool
    reconstruction: float = float("nan")


def run_pipeline(phi, U, box, grid_points=401, fit_tol=1e-6, glue_tol=1e-4, saddle_margin=None, seeds=15):
    grid = Grid2D.from_box(box, grid_points)
    crit = find_critical_points(phi, box, seeds)
    stream = recover_stream(U, grid)
    chart = component_partition(phi, crit, grid, saddle_margin)
    fits = {c: fit_profile(stream, chart, c, fit_tol) for c in range(1, chart.n_components + 1)}
    per = all(f.passed for f in fits.values())
    glue = glue_check(fits, stream, chart, U, tol=glue_tol) if per else None
    recon = reconstruction_residual(U, phi, fits, chart) if per else float("nan")
    return MorseReport(crit, stream, chart, fits, glue, per, recon)
