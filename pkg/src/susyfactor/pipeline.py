"""Verification pipelines behind the command line."""

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import morse2d
from .analysis import (
    SplittingError,
    fit_temperateness,
    invertibility_definite,
    invertibility_split,
    kernel_consistency,
)
from .dsl import parse, x_context
from .operator import FieldBundle, OperatorSpec, eikonal_residuals
from .perturbation import build_perturbation_gallery
from .susy import (
    ExprB,
    QuadratureB,
    SusyStructure,
    ThetaDecomposition,
    ThetaTerm,
    _bivector_exprs,
    assemble_G,
    check_assumption,
    factorization_residual,
    pde_certificate,
    solve_constant_theta,
    structure_from_B,
    tensorize,
)
from .synth import synthesize_operator

SCHEMA = 1
MAX_TEMPERATE_POINTS = 200
MAX_REPORTED_KNOTS = 200


def thread_count():
    """Worker cap from ``SUSYFACTOR_THREADS`` (default 1)."""
    raw = os.environ.get("SUSYFACTOR_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class Built:
    spec: object
    op: OperatorSpec
    dec: Optional[ThetaDecomposition]
    S: SusyStructure
    info: object = None


def sample_grid(box, points):
    axes = [np.linspace(lo, hi, points) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def build(spec):
    """Operator, decomposition and structure described by a spec."""
    n = spec.dimension
    if spec.perturbation is not None:
        p = spec.perturbation
        op, S, info = build_perturbation_gallery(
            spec.phi, p.sigma, p.eps, p.alpha, p.theta, p.seed_point, p.box, p.grid, name=spec.name
        )
        return Built(spec, op, None, S, info)
    dec = None
    if spec.theta is not None and not any(isinstance(t, str) for _, t in spec.theta.terms):
        dec = _decomposition(spec, spec.theta.terms)
    if spec.derive:
        op = synthesize_operator(n, spec.A, spec.phi, spec.psi, dec, spec.name)
    else:
        op = OperatorSpec(FieldBundle(n, spec.A, spec.U, spec.v, spec.phi, spec.psi), spec.name)
    if spec.theta is None:
        dec = ThetaDecomposition(n, ())
    elif dec is None:
        X = sample_grid(spec.verify.box, min(spec.verify.grid_points, 9 if n <= 3 else 5))
        terms = []
        for alpha, th in spec.theta.terms:
            if isinstance(th, str):
                theta, _ = solve_constant_theta(op, X, spec.h[0], alpha)
                th = [[float(theta[i, j]) for j in range(n)] for i in range(n)]
            terms.append((alpha, th))
        dec = _decomposition(spec, terms)
    if spec.bivector is not None:
        S = structure_from_B(op, ExprB(_bivector_exprs(spec.bivector, n)), label=spec.name)
    else:
        S = assemble_G(op, dec, label=spec.name)
    return Built(spec, op, dec, S)


def _decomposition(spec, terms):
    n = spec.dimension
    out = []
    for alpha, th in terms:
        out.append(ThetaTerm(alpha, _bivector_exprs(th, n)))
    return ThetaDecomposition(n, tuple(out), spec.theta.N, spec.theta.m_inf)


def _monomials(n, degree):
    out = [()]
    for d in range(1, degree + 1):
        out += list(itertools.combinations_with_replacement(range(n), d))
    return out


def random_test_functions(n, box, count, seed):
    """Seeded ``q(x) exp(-|x - c|^2)`` with ``q`` a cubic polynomial."""
    rng = np.random.default_rng(seed)
    box = np.asarray(box, dtype=float)
    out = []
    for _ in range(count):
        c = rng.uniform(box[:, 0], box[:, 1])
        terms = []
        for mono in _monomials(n, 3):
            coef = float(rng.normal())
            factors = [repr(coef)] + [f"x{i + 1}" for i in mono]
            terms.append("*".join(factors))
        q = " + ".join(terms)
        g = " + ".join(f"(x{i + 1} - ({float(c[i])!r}))^2" for i in range(n))
        out.append(parse(f"({q})*exp(-({g}))", x_context(n)))
    return out


def _check(name, value, tol):
    return {"name": name, "max_residual": float(value), "tolerance": float(tol), "pass": bool(value <= tol)}


def _per_h(fn, hs):
    return max(_map(fn, hs), default=0.0)


def verify_built(b, h=None, seed=None, grid=None, morse=True):
    spec = b.spec
    n = spec.dimension
    hs = tuple(spec.h if h is None else h)
    seed = spec.verify.seed if seed is None else seed
    points = spec.verify.grid_points if grid is None else grid
    tol = spec.verify.tolerances
    X = sample_grid(spec.verify.box, points)
    op, S, dec = b.op, b.S, b.dec
    checks, skipped = [], []

    if dec is not None:
        rep = _map(lambda hh: check_assumption(op, dec, X, hh), hs)
        val = max(max(r.max_residual, r.max_delta_theta) for r in rep)
        checks.append(_check("assumption", val, tol["assumption"]))
    else:
        skipped.append("assumption")

    eik = _map(lambda hh: eikonal_residuals(op, X, hh), hs)
    checks.append(_check("eikonal_r1", max(float(np.max(np.abs(e.r1))) for e in eik), tol["eikonal"]))
    checks.append(_check("eikonal_r2", max(float(np.max(np.abs(e.r2))) for e in eik), tol["eikonal"]))

    if dec is not None and not dec.is_trivial and isinstance(S.B, QuadratureB):
        val = _per_h(lambda hh: float(np.max(pde_certificate(dec, S.phihat, hh, X, S.B.qc, S.B(X, hh, 1)))), hs)
        checks.append(_check("pde_certificate", val, tol["pde"]))
    else:
        skipped.append("pde_certificate")

    us = random_test_functions(n, spec.verify.box, spec.verify.test_functions, seed)
    fact = _per_h(lambda hh: max(float(np.max(np.abs(factorization_residual(op, S, hh, u, X)))) for u in us), hs)
    checks.append(_check("factorization", fact, tol["factorization"]))

    rng = np.random.default_rng(seed)
    Xt = X if len(X) <= MAX_TEMPERATE_POINTS else X[np.sort(rng.choice(len(X), MAX_TEMPERATE_POINTS, replace=False))]
    fit = fit_temperateness(S, Xt, hs, factor=tol["temperateness"])
    temperate = {
        "m": fit.m,
        "C": {_nu_key(k): v for k, v in fit.C.items()},
        "variation": {_nu_key(k): v for k, v in fit.variation.items()},
        "max_variation": fit.max_variation,
        "factor": fit.factor,
        "fit_residual": fit.fit_residual,
        "pass": fit.passed,
    }
    checks.append(_check("temperateness", fit.max_variation, tol["temperateness"]))

    report = {
        "schema": SCHEMA,
        "command": "verify",
        "name": spec.name,
        "dimension": n,
        "checks": checks,
        "skipped": skipped,
        "temperateness": temperate,
        "invertibility": invertibility_summary(S, Xt, hs[0]),
        "environment": {
            "seed": seed,
            "grid_points": points,
            "n_points": int(len(X)),
            "h": list(hs),
            "box": spec.verify.box,
            "test_functions": spec.verify.test_functions,
        },
    }
    if morse and n == 2 and (spec.morse2d is not None or spec.perturbation is not None):
        report["morse2d"] = morse_report(spec, op)
    report["verdict"] = "PASS" if all(c["pass"] for c in checks) else "FAIL"
    return report


def _nu_key(nu):
    return "G" if not nu else "d" + "".join(str(i + 1) for i in nu)


def invertibility_summary(S, X, h):
    """Pointwise invertibility of ``G``; reported, not part of the verdict."""
    A = S.A_jet(X, h, 0).val
    B = S.B_jet(X, h, 0).val
    G = A + B
    definite = invertibility_definite(A, G)
    out = {
        "h": h,
        "definite": {"C": definite.C, "applicable": definite.applicable, "pass": definite.passed,
                     "max_inv_norm": definite.max_inv_norm},
    }
    angle = kernel_consistency(A[: min(len(A), 50)])
    split = {"kernel_angle": angle}
    try:
        reps = [invertibility_split(a, b) for a, b in zip(A, B)]
        split.update(
            injective=all(r.injective for r in reps),
            dim_check=all(r.dim_check for r in reps),
            min_sigma_B=min(r.sigma_B for r in reps),
            max_inv_norm_bound=max(r.inv_norm_bound for r in reps),
            max_measured_inv_norm=max(r.measured_inv_norm for r in reps),
        )
    except SplittingError as exc:
        split["error"] = str(exc)
    except ValueError as exc:
        split["error"] = str(exc)
    out["split"] = split
    return out


def morse_report(spec, op):
    m = spec.morse2d
    if m is None:
        box = spec.perturbation.box if spec.perturbation is not None else spec.verify.box
        m = type("M", (), dict(box=box, grid_points=401, fit_tol=1e-6, glue_tol=1e-4, saddle_margin=None, seeds=15))
    try:
        R = morse2d.run_pipeline(spec.phi, op, m.box, m.grid_points, m.fit_tol, m.glue_tol, m.saddle_margin, m.seeds)
    except (morse2d.NotMorseError, morse2d.IntegrabilityError, ValueError) as exc:
        return {"error": str(exc), "verdict": "FAIL"}
    return morse_result_dict(R)


def morse_result_dict(R):
    fits = {}
    for c, f in R.fits.items():
        k = np.unique(np.linspace(0, len(f.knots) - 1, min(len(f.knots), MAX_REPORTED_KNOTS)).astype(int))
        fits[str(c)] = {
            "pass": f.passed,
            "deviation": f.deviation,
            "alpha_range": f.alpha_range,
            "knots": f.knots[k].tolist(),
            "f_values": f.f_values[k].tolist(),
            "unbounded": c in R.chart.unbounded,
        }
    out = {
        "critical_points": [{"location": list(p.location), "index": p.index, "value": p.value} for p in R.critical.points],
        "saddle_values": R.critical.saddle_values,
        "warnings": R.critical.warnings,
        "stream": {"max_divergence": R.stream.divergence, "loop_residual": R.stream.loop_residual},
        "components": R.chart.n_components,
        "saddle_margin": R.chart.margin,
        "fits": fits,
        "per_component_pass": R.per_component_pass,
    }
    if R.glue is not None:
        g = R.glue
        out["glue"] = {
            "pass": g.passed,
            "verdict_kind": g.verdict,
            "max_mismatch": g.max_mismatch,
            "max_star_defect": g.max_star_defect,
            "tolerance": g.tol,
            "pairs": len(g.pairs),
            "saddles": [
                {"saddle": s.saddle, "smooth": s.smooth,
                 "max_jump": max((max(j["value"], j["d1"], j["d2"]) for j in s.jumps), default=0.0)}
                for s in g.saddles
            ],
        }
        out["reconstruction_residual"] = R.reconstruction
    ok = R.per_component_pass and R.glue is not None and R.glue.passed
    out["verdict"] = "PASS" if ok else "FAIL"
    return out


def run_verify(spec, h=None, seed=None, grid=None):
    return verify_built(build(spec), h, seed, grid)


def run_morse(spec, grid=None):
    if spec.dimension != 2:
        raise ValueError("morse2d needs a two-dimensional spec")
    if spec.morse2d is None:
        raise ValueError("spec has no [morse2d] block")
    b = build(spec)
    if grid is not None:
        spec.morse2d.grid_points = grid
    rep = morse_report(spec, b.op)
    return {"schema": SCHEMA, "command": "morse2d", "name": spec.name, "morse2d": rep, "verdict": rep["verdict"]}


def run_tensor(spec_a, spec_b, h=None, seed=None, grid=None):
    """Verify both factors, then the product structure on the product box."""
    ba, bb = build(spec_a), build(spec_b)
    ra = verify_built(ba, h, seed, morse=False)
    rb = verify_built(bb, h, seed, morse=False)
    S = tensorize(ba.S, bb.S)
    op = S.operator
    n = S.n
    hs = tuple(spec_a.h if h is None else h)
    seed = spec_a.verify.seed if seed is None else seed
    box = spec_a.verify.box + spec_b.verify.box
    points = grid if grid is not None else (21 if n <= 3 else 9)
    X = sample_grid(box, points)
    tol = spec_a.verify.tolerances
    us = random_test_functions(n, box, spec_a.verify.test_functions, seed)
    fact = _per_h(lambda hh: max(float(np.max(np.abs(factorization_residual(op, S, hh, u, X)))) for u in us), hs)
    eik = _map(lambda hh: eikonal_residuals(op, X, hh), hs)
    factors_ok = ra["verdict"] == rb["verdict"] == "PASS"
    checks = [
        _check("eikonal_r1", max(float(np.max(np.abs(e.r1))) for e in eik), tol["eikonal"]),
        _check("eikonal_r2", max(float(np.max(np.abs(e.r2))) for e in eik), tol["eikonal"]),
        _check("factorization", fact, tol["factorization"]),
    ]
    return {
        "schema": SCHEMA,
        "command": "tensor",
        "name": f"{spec_a.name}x{spec_b.name}",
        "dimension": n,
        "factors": {spec_a.name: ra["verdict"], spec_b.name: rb["verdict"]},
        "checks": checks,
        "environment": {"seed": seed, "grid_points": points, "n_points": int(len(X)), "h": list(hs), "box": box},
        "verdict": "PASS" if factors_ok and all(c["pass"] for c in checks) else "FAIL",
    }
