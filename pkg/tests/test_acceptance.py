"""The eleven acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (also collected in
the terminal summary) before asserting.
"""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from corpus import CORPUS
from susyfactor import pipeline
from susyfactor.analysis import fit_temperateness, invertibility_definite, invertibility_split
from susyfactor.dsl import T_CONTEXT, diff, eval_jet, eval_value, parse, profile_derivatives, to_text, x_context
from susyfactor.morse2d import run_pipeline
from susyfactor.operator import codiff_bivec, codiff_vec, eikonal_residuals
from susyfactor.specfile import GALLERY, load_gallery
from susyfactor.susy import (
    MaskedB,
    ThetaDecomposition,
    bivector_jet,
    check_assumption,
    classical_expansion,
    construct_B,
    factorization_residual,
    pde_certificate,
)
from susyfactor.synth import synthesize_operator

X2 = x_context(2)
OMEGA = [["0", "0.5"], ["-0.5", "0"]]
H4 = (0.05, 0.1, 0.2, 0.4)


def report(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_witten():
    t0 = time.perf_counter()
    b = pipeline.build(load_gallery("witten"))
    X = np.random.default_rng(1).uniform(-2, 2, (100, 2))
    us = pipeline.random_test_functions(2, b.spec.verify.box, 3, 0)
    fact = r1 = r2 = 0.0
    for h in H4:
        e = eikonal_residuals(b.op, X, h)
        r1 = max(r1, np.max(np.abs(e.r1)))
        r2 = max(r2, np.max(np.abs(e.r2)))
        for u in us:
            fact = max(fact, np.max(np.abs(factorization_residual(b.op, b.S, h, u, X))))
    dt = time.perf_counter() - t0
    ok = fact <= 1e-8 and r1 <= 1e-10 and r2 <= 1e-10 and dt <= 5.0
    report(1, ok, f"factorization {fact:.1e}, r1 {r1:.1e}, r2 {r2:.1e}, {dt:.2f} s")


def test_criterion_2_kfp():
    b = pipeline.build(load_gallery("kfp"))
    r = np.random.default_rng(2)
    X = r.uniform(-2, 2, (100, 2))
    Gs = np.concatenate([b.S.G(X, h) for h in H4])
    G0 = Gs[0]
    constant = float(np.max(np.abs(Gs - G0)))
    sym = 0.5 * (G0 + G0.T)
    sym_exact = bool(np.array_equal(sym, np.diag([0.0, 1.0])))
    exact_inv = np.array([[4.0, -2.0], [2.0, 0.0]])
    inv_err = float(np.max(np.abs(np.linalg.inv(G0) - exact_inv)))
    split = invertibility_split(sym, 0.5 * (G0 - G0.T))
    fact = 0.0
    for h in H4:
        for u in pipeline.random_test_functions(2, b.spec.verify.box, 3, 0):
            fact = max(fact, np.max(np.abs(factorization_residual(b.op, b.S, h, u, X))))
    ok = constant == 0.0 and sym_exact and inv_err <= 1e-12 and split.injective and fact <= 1e-8
    report(2, ok, f"G = {G0.tolist()}, inverse error {inv_err:.1e}, factorization {fact:.1e}")


def _gallery_decompositions():
    out = []
    for name in GALLERY:
        b = pipeline.build(load_gallery(name))
        if b.dec is not None and not b.dec.is_trivial:
            out.append((name, b.dec, b.S.phihat, False))
        elif isinstance(b.S.B, MaskedB):
            inner = b.S.B.inner
            out.append((name, inner.dec, inner.phihat, True))
    return out


def test_criterion_3_pde_certificate():
    worst, names = 0.0, []
    for name, dec, phihat, outside in _gallery_decompositions():
        n = dec.n
        box = load_gallery(name).verify.box
        X = np.random.default_rng(3).uniform([lo for lo, _ in box], [hi for _, hi in box], (200, n))
        for h in (0.05, 0.1, 0.2, 0.5):
            B = construct_B(dec, phihat, h, X=X, allow_outside=outside)
            worst = max(worst, float(np.max(pde_certificate(dec, phihat, h, X, B=B))))
        names.append(name)
    report(3, worst <= 1e-8 and len(names) >= 4, f"max residual {worst:.1e} over {', '.join(names)}")


def _slope(dec, phihat, K, X):
    hs = np.geomspace(0.02, 0.4, 8)
    coeffs = classical_expansion(dec, phihat, K, X)
    errs = []
    for h in hs:
        B = construct_B(dec, phihat, h, X=X).val
        errs.append(np.max(np.abs(B - sum(h**k * c for k, c in enumerate(coeffs)))))
    return np.polyfit(np.log(hs), np.log(errs), 1)[0]


def test_criterion_4_closed_forms():
    phihat = parse("x1^2 + x2^2", X2)
    X = np.random.default_rng(4).uniform(-2, 2, (100, 2))
    p = eval_jet(phihat, X, 0.1, 0).val
    om = np.asarray([[0.0, 0.5], [-0.5, 0.0]])
    lin = quad = 0.0
    for h in H4:
        B = construct_B(ThetaDecomposition.constant(2, "t", om), phihat, h, X=X).val
        lin = max(lin, np.max(np.abs(B - om)))
        B = construct_B(ThetaDecomposition.constant(2, "t^2/2", om), phihat, h, X=X).val
        quad = max(quad, np.max(np.abs(B - (p + h)[:, None, None] * om)))
    Xs = X[:20] / 2
    slopes = [_slope(ThetaDecomposition.constant(2, "sin(t)", om), phihat, K, Xs) for K in (0, 1, 2)]
    ok = lin <= 1e-11 and quad <= 1e-11 and all(s >= K + 0.9 for K, s in enumerate(slopes))
    report(4, ok, f"alpha=t {lin:.1e}, alpha=t^2/2 {quad:.1e}, slopes {np.round(slopes, 2).tolist()}")


def _synthesized(r, count):
    profiles = ["t", "t^2/2", "sin(t)", "t^3/6 - t", "tanh(t)", "exp(-t^2)"]
    phases = ["(x1^2 + x2^2)/2", "x1^2/2 + x1*x2/4 + x2^2", "x1^4/4 + x2^2/2"]
    out = []
    for _ in range(count):
        phi = phases[r.integers(len(phases))]
        psi = f"{phi} + {float(r.uniform(-0.5, 0.5))!r}*x1"
        a12 = float(r.uniform(-0.3, 0.3))
        dec = ThetaDecomposition.from_strings(2, [(profiles[r.integers(len(profiles))], OMEGA)])
        op = synthesize_operator(2, [["1 + x2^2", repr(a12)], [repr(a12), "1"]], phi, psi, dec)
        out.append((op, dec))
    return out


def test_criterion_5_eikonal_implication():
    r = np.random.default_rng(5)
    cases = []
    for name in ("witten", "kfp", "alpha-linear"):
        b = pipeline.build(load_gallery(name))
        cases.append((b.op, b.dec))
    cases += _synthesized(r, 20)
    X = r.uniform(-1.5, 1.5, (100, 2))
    checked, worst = 0, -np.inf
    for op, dec in cases:
        for h in H4:
            a = check_assumption(op, dec, X, h).max_residual
            e = eikonal_residuals(op, X, h)
            r1, r2 = np.max(np.abs(e.r1)), np.max(np.abs(e.r2))
            if a <= 1e-8 and r1 <= 1e-10:
                checked += 1
                worst = max(worst, r2 - (10 * (r1 + a) + 1e-9))
    ok = checked == 4 * len(cases) and worst <= 0
    report(5, ok, f"{checked} (spec, h) pairs, max of r2 - bound {worst:.1e}")


def _split_instance(r):
    n = int(r.integers(2, 6))
    k = int(r.integers(0, n))
    Q, _ = np.linalg.qr(r.normal(size=(n, n)))
    E, F = Q[:, :k], Q[:, k:]
    A0 = F @ np.diag(r.uniform(0.1, 3.0, n - k)) @ F.T
    A0 = 0.5 * (A0 + A0.T)
    M = r.normal(size=(n - k, k))
    if k and r.random() < 0.3:
        M[:, r.integers(k)] = 0.0
    C = r.normal(size=(n - k, n - k))
    Bf = F @ M @ E.T
    return A0, Bf - Bf.T + F @ (C - C.T) @ F.T


def test_criterion_6_invertibility_brute_force():
    r = np.random.default_rng(6)
    disagree = 0
    for _ in range(500):
        A0, B0 = _split_instance(r)
        sig = np.linalg.svd(A0 + B0, compute_uv=False)
        direct = sig[-1] > 1e-10 * max(sig[0], 1.0)
        disagree += invertibility_split(A0, B0).injective != direct
    bound_fail = 0
    for _ in range(500):
        n = int(r.integers(1, 6))
        M = r.normal(size=(n, n))
        A = M @ M.T + r.uniform(0.05, 1.0) * np.eye(n)
        S = r.normal(size=(n, n))
        G = A + (S - S.T)
        rep = invertibility_definite(A, G)
        lam = np.linalg.eigvalsh(A)[0]
        bound_fail += not (rep.applicable and np.linalg.norm(np.linalg.inv(G), 2) <= 1 / lam + 1e-12)
    report(6, disagree == 0 and bound_fail == 0, f"{disagree} disagreements, {bound_fail} bound failures")


def test_criterion_7_temperateness():
    variation = {}
    for name in GALLERY:
        b = pipeline.build(load_gallery(name))
        X = pipeline.sample_grid(b.spec.verify.box, 9 if b.S.n == 2 else 5)
        variation[name] = fit_temperateness(b.S, X, H4, factor=1.5).max_variation
    bad = [k for k, v in variation.items() if v > 1.5]
    detail = ", ".join(f"{k} {v:.3f}" for k, v in variation.items())
    report(7, not bad, f"max C_nu variation: {detail}")


def test_criterion_8_morse_round_trip():
    phi = "(x1^2 - 1)^2 + x2^2"
    f = "t/2 + sin(t)/4"
    fp = to_text(diff(parse(f, T_CONTEXT), "t")).replace("t", f"({phi})")
    e = parse(phi, X2)
    d1, d2 = to_text(diff(e, "x1")), to_text(diff(e, "x2"))
    U = [f"-({fp})*({d2})", f"({fp})*({d1})"]
    box = ((-2.5, 2.5), (-2.5, 2.5))
    t0 = time.perf_counter()
    R = run_pipeline(phi, U, box, grid_points=400)
    dt = time.perf_counter() - t0
    f0 = float(profile_derivatives(parse(f, T_CONTEXT), np.array([eval_value(e, [[-2.5, -2.5]], 0.1)[0]]), 0)[0, 0])
    err = 0.0
    for fit in R.fits.values():
        want = profile_derivatives(parse(f, T_CONTEXT), fit.knots, 0)[:, 0] - f0
        err = max(err, float(np.max(np.abs(fit.f_values - want))))
    forward = R.per_component_pass and R.glue.passed and err <= 1e-4 and dt <= 30.0
    rep = pipeline.run_morse(load_gallery("perturbation-two-wells"))["morse2d"]
    two = rep["per_component_pass"] and rep["glue"] is not None and not rep["glue"]["pass"]
    report(8, forward and two, f"knot error {err:.1e} in {dt:.1f} s, two-profile per-component {rep['per_component_pass']} glue {rep['glue']['pass']}")


def test_criterion_9_three_dimensional_example():
    b = pipeline.build(load_gallery("r3-example"))
    X = pipeline.sample_grid(b.spec.verify.box, 7)
    naive = max(float(np.max(check_assumption(b.op, b.dec, X, h).residuals)) for h in H4)
    fact = 0.0
    for h in H4:
        for u in pipeline.random_test_functions(3, b.spec.verify.box, 2, 0):
            fact = max(fact, float(np.max(np.abs(factorization_residual(b.op, b.S, h, u, X)))))
    report(9, naive >= 0.1 and fact <= 1e-7, f"naive assumption defect {naive:.2f}, direct factorization {fact:.1e}")


def test_criterion_10_tensorization():
    t0 = time.perf_counter()
    rep = pipeline.run_tensor(load_gallery("kfp"), load_gallery("witten"), grid=9)
    dt = time.perf_counter() - t0
    fact = next(c for c in rep["checks"] if c["name"] == "factorization")["max_residual"]
    ok = fact <= 1e-8 and dt <= 60.0 and rep["environment"]["grid_points"] == 9
    report(10, ok, f"product factorization {fact:.1e} on 9^4 points in {dt:.1f} s")


def _fd_rel(e, X, h=0.2, step=1e-4):
    J = eval_jet(e, X, h, 2)
    n = X.shape[1]
    g = np.empty(X.shape)
    H = np.empty(X.shape + (n,))
    for i in range(n):
        d = np.zeros(n)
        d[i] = step
        g[:, i] = (eval_value(e, X + d, h) - eval_value(e, X - d, h)) / (2 * step)
        H[:, :, i] = (eval_jet(e, X + d, h, 1).grad - eval_jet(e, X - d, h, 1).grad) / (2 * step)
    rel = lambda a, b: np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))
    return max(rel(J.grad, g), rel(J.hess, H))


def test_criterion_11_jets_and_dd():
    X = np.random.default_rng(11).uniform(-1.5, 1.5, (100, 2))
    jet_err = max(_fd_rel(parse(t, X2), X) for t in CORPUS)
    ctx = x_context(3)
    r = np.random.default_rng(12)
    entries = [t.replace("x2", "x3") if r.random() < 0.5 else t for t in CORPUS]
    dd = 0.0
    for k in range(10):
        a, b, c = (entries[(3 * k + i) % len(entries)] for i in range(3))
        W = [["0", a, b], [f"-({a})", "0", c], [f"-({b})", f"-({c})", "0"]]
        theta = tuple(tuple(parse(s, ctx) for s in row) for row in W)
        Y = r.uniform(-1.5, 1.5, (100, 3))
        dd = max(dd, float(np.max(np.abs(codiff_vec(codiff_bivec(bivector_jet(theta, Y, 0.2, 2))).val))))
    report(11, jet_err <= 1e-6 and dd <= 1e-9, f"jet vs FD {jet_err:.1e} over {len(CORPUS)} expressions, delta delta {dd:.1e}")
