import numpy as np
import pytest

from susyfactor.dsl import diff, parse, to_text, x_context
from susyfactor.morse2d import (
    STAR_SIGN,
    Grid2D,
    IntegrabilityError,
    NotMorseError,
    component_partition,
    find_critical_points,
    fit_profile,
    glue_check,
    recover_stream,
    run_pipeline,
    star_integral,
)
from susyfactor.operator import FieldBundle, OperatorSpec
from susyfactor.susy import ThetaDecomposition, check_assumption

X2 = x_context(2)
BOX = ((-2.0, 2.0), (-2.0, 2.0))
DW = "(x1^2 - 1)^2 + x2^2"


def _U(fp, phi):
    """``U = δ((f∘φ) ω)`` for ω = ½ dx1∧dx2, i.e. ``f'(φ)(-∂2φ, ∂1φ)``; ``fp`` is f' in t."""
    e = parse(phi, X2)
    d1, d2 = to_text(diff(e, "x1")), to_text(diff(e, "x2"))
    f1 = fp.replace("t", f"({phi})")
    return [f"-({f1})*({d2})", f"({f1})*({d1})"]


def test_critical_points_single_well():
    crit = find_critical_points("x1^2 + x2^2", BOX)
    assert len(crit.points) == 1
    p = crit.points[0]
    assert p.index == 0 and np.allclose(p.location, 0.0, atol=1e-12)


def test_critical_points_double_well():
    crit = find_critical_points(DW, BOX)
    assert [p.index for p in crit.points] == [0, 0, 1]
    assert crit.saddle_values == [1.0]
    mins = sorted(p.location[0] for p in crit.of_index(0))
    np.testing.assert_allclose(mins, [-1.0, 1.0], atol=1e-10)


def test_no_critical_points():
    assert find_critical_points("x1", BOX).points == []


def test_degenerate_critical_point():
    with pytest.raises(NotMorseError):
        find_critical_points("x1^4 + x2^2", BOX, seeds=[[0.0, 0.0]])


def test_stream_of_radial_profile():
    grid = Grid2D.from_box(BOX, 81)
    # α = sin(r²)/2: ∂1α = x1 cos(r²) = U2, ∂2α = x2 cos(r²) = -U1
    U = ["-x2*cos(x1^2 + x2^2)", "x1*cos(x1^2 + x2^2)"]
    s = recover_stream(U, grid)
    P = grid.points
    want = 0.5 * np.sin((P**2).sum(1)) - 0.5 * np.sin(8.0)
    np.testing.assert_allclose(s.alpha.ravel(), want, atol=1e-10)
    assert s.loop_residual <= 1e-10


def test_stream_examples():
    grid = Grid2D.from_box(BOX, 21)
    s = recover_stream(["0", "0"], grid)
    assert not s.alpha.any()
    s = recover_stream(["1", "0"], grid)
    # U = dx1 gives α = -x2 up to a constant
    np.testing.assert_allclose(s.alpha, -(grid.points[:, 1] + 2.0).reshape(21, 21), atol=1e-13)
    with pytest.raises(IntegrabilityError):
        recover_stream(["x1", "0"], grid)


def test_partitions():
    grid = Grid2D.from_box(BOX, 201)
    crit = find_critical_points(DW, BOX)
    chart = component_partition(DW, crit, grid)
    assert chart.n_components == 3
    assert chart.saddle_values == [1.0]
    assert len(chart.unbounded) == 1
    crit1 = find_critical_points("x1^2 + x2^2", BOX)
    assert component_partition("x1^2 + x2^2", crit1, grid).n_components == 1
    with pytest.raises(ValueError):
        component_partition(DW, crit, grid, saddle_margin=10.0)


def _single_chart(n=201):
    grid = Grid2D.from_box(BOX, n)
    phi = "x1^2 + x2^2"
    return phi, grid, component_partition(phi, find_critical_points(phi, BOX), grid)


def test_fit_profile_examples():
    phi, grid, chart = _single_chart()
    r2 = (grid.points**2).sum(1).reshape(grid.shape)
    fit = fit_profile(r2**2, chart, 1)
    assert fit.passed and fit.deviation <= 1e-9
    # exact at the knots, which are data levels
    np.testing.assert_allclose(fit(fit.knots), fit.knots**2, atol=1e-9)
    fit = fit_profile(np.full(grid.shape, 3.0), chart, 1)
    assert fit.passed and fit.deviation <= 1e-12
    fit = fit_profile(grid.points[:, 1].reshape(grid.shape), chart, 1)
    assert not fit.passed


def test_glue_examples():
    crit = find_critical_points(DW, BOX)
    R = run_pipeline(DW, _U("2*t", DW), BOX, grid_points=201, glue_tol=1e-4)
    assert R.per_component_pass and R.glue.passed
    assert R.glue.max_star_defect <= 1e-8
    R = run_pipeline(DW, ["0", "0"], BOX, grid_points=101, saddle_margin=0.3)
    assert R.per_component_pass and R.glue.passed
    assert len(crit.points) == 3


def test_glue_rejects_failed_fits():
    grid = Grid2D.from_box(BOX, 101)
    crit = find_critical_points(DW, BOX)
    chart = component_partition(DW, crit, grid, saddle_margin=0.3)
    alpha = grid.points[:, 1].reshape(grid.shape)
    fits = {c: fit_profile(alpha, chart, c) for c in range(1, chart.n_components + 1)}
    with pytest.raises(ValueError):
        glue_check(fits, alpha, chart, ["1", "0"])


def test_star_integral_matches_stream_difference():
    # STAR_SIGN fixes the orientation: α(y) - α(x) = STAR_SIGN ∫ ⋆U
    U = ["-x2*cos(x1^2 + x2^2) + x1", "x1*cos(x1^2 + x2^2) - x2"]
    alpha = lambda p: 0.5 * np.sin((p**2).sum(-1)) - p[..., 0] * p[..., 1]
    r = np.random.default_rng(4)
    for _ in range(100):
        path = r.uniform(-2, 2, (int(r.integers(2, 5)), 2))
        lhs = alpha(path[-1]) - alpha(path[0])
        assert lhs == pytest.approx(STAR_SIGN * star_integral(U, path, max_len=0.02), abs=1e-6)


def test_three_dimensional_restriction():
    # the r3 field restricted to x3 = 0 with φ = x1² + x2² and f = ½ sin
    U = ["-x2*cos(x1^2 + x2^2)", "x1*cos(x1^2 + x2^2)"]
    R = run_pipeline("x1^2 + x2^2", U, ((-1.5, 1.5), (-1.5, 1.5)), grid_points=201)
    assert R.per_component_pass and R.glue.passed
    fit = R.fits[1]
    t = np.linspace(0.2, 2.0, 20)
    shift = fit(np.array([4.5])) - 0.5 * np.sin(4.5)
    np.testing.assert_allclose(fit(t) - shift, 0.5 * np.sin(t), atol=1e-6)


def test_reconstructed_decomposition_is_supersymmetric():
    # polynomial f; the decomposition α(t) = f(t/2), θ = ω against φ̂ = 2φ
    phi = "x1^2 + x2^2"
    R = run_pipeline(phi, _U("(1 - t/4)", phi), BOX, grid_points=201)
    assert R.per_component_pass
    fit = R.fits[1]
    t = fit.knots
    c = np.polynomial.polynomial.polyfit(t, fit.f_values, 3)
    assert np.max(np.abs(np.polynomial.polynomial.polyval(t, c) - fit.f_values)) <= 1e-8
    f = " + ".join(f"({float(c[k])!r})*(t/2)^{k}" for k in range(1, 4))
    dec = ThetaDecomposition.from_strings(2, [(f, [["0", "0.5"], ["-0.5", "0"]])])
    zero = [["0", "0"], ["0", "0"]]
    U = [parse(u, X2) for u in _U("(1 - t/4)", phi)]
    A = tuple(tuple(parse(z, X2) for z in row) for row in zero)
    op = OperatorSpec(FieldBundle(2, A, tuple(U), parse("0", X2), parse(phi, X2), parse(phi, X2)))
    X = np.random.default_rng(3).uniform(-2, 2, (60, 2))
    assert check_assumption(op, dec, X, 0.1).max_residual <= 1e-5
