"""Spec files: TOML documents describing an operator and how to verify it."""

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dsl import ParseError, T_CONTEXT, parse, x_context

DEFAULT_H = (0.05, 0.1, 0.2, 0.4)
DEFAULT_TOLERANCES = {
    "assumption": 1e-8,
    "eikonal": 1e-10,
    "factorization": 1e-8,
    "pde": 1e-8,
    "temperateness": 2.0,
}


class SpecError(ValueError):
    """Invalid spec file; ``location`` names the offending key."""

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


def _expr(text, n, where):
    try:
        return parse(str(text), x_context(n))
    except ParseError as exc:
        raise SpecError(str(exc), where) from None


def _alpha(text, where):
    try:
        return parse(str(text), T_CONTEXT)
    except ParseError as exc:
        raise SpecError(str(exc), where) from None


def _matrix(rows, n, where):
    if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise SpecError(f"expected a {n}x{n} matrix", where)
    return tuple(tuple(_expr(e, n, f"{where}[{i}][{j}]") for j, e in enumerate(r)) for i, r in enumerate(rows))


def _vector(items, n, where):
    if not isinstance(items, list) or len(items) != n:
        raise SpecError(f"expected {n} entries", where)
    return tuple(_expr(e, n, f"{where}[{i}]") for i, e in enumerate(items))


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError("expected a number", where)
    return float(value)


@dataclass
class ThetaSpec:
    terms: list  # (alpha Expr, theta matrix) pairs; theta may be the string "solve"
    N: float = 2.0
    m_inf: float = math.inf


@dataclass
class VerifySpec:
    box: list
    grid_points: int
    test_functions: int = 3
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))


@dataclass
class MorseSpec:
    box: list
    grid_points: int = 401
    fit_tol: float = 1e-6
    glue_tol: float = 1e-4
    saddle_margin: Optional[float] = None
    seeds: int = 15


@dataclass
class PerturbationSpec:
    sigma: float
    eps: float
    alpha: object
    theta: tuple
    seed_point: tuple
    box: list
    grid: int = 401


@dataclass
class SpecFile:
    name: str
    dimension: int
    h: tuple
    phi: object
    psi: object
    A: Optional[tuple]
    U: Optional[tuple]
    v: object
    derive: bool
    theta: Optional[ThetaSpec]
    bivector: Optional[tuple]
    verify: VerifySpec
    morse2d: Optional[MorseSpec]
    perturbation: Optional[PerturbationSpec]
    description: str = ""


def _box(raw, n, where):
    if not isinstance(raw, list) or len(raw) != n:
        raise SpecError(f"expected {n} [min, max] pairs", where)
    out = []
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SpecError("expected [min, max]", f"{where}[{i}]")
        lo, hi = (_number(p, f"{where}[{i}]") for p in pair)
        if not hi > lo:
            raise SpecError("degenerate interval", f"{where}[{i}]")
        out.append([lo, hi])
    return out


def _known(table, keys, where):
    extra = sorted(set(table) - set(keys))
    if extra:
        raise SpecError(f"unknown keys {extra}", where)


def load_spec(source, name=None):
    """Parse a spec from a path or a TOML string."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        path = Path(source)
        text = path.read_text()
        name = name or path.stem
    else:
        text = str(source)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"malformed TOML ({exc})", "toml") from None
    return spec_from_dict(doc, name or "spec")


def spec_from_dict(doc, name="spec"):
    _known(
        doc,
        {"name", "description", "dimension", "h", "phases", "operator", "theta", "structure", "verify", "morse2d", "perturbation"},
        "top level",
    )
    if "dimension" not in doc:
        raise SpecError("missing", "dimension")
    n = doc["dimension"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SpecError("must be an integer >= 1", "dimension")
    h = doc.get("h", list(DEFAULT_H))
    if not isinstance(h, list) or not h:
        raise SpecError("expected a nonempty list", "h")
    h = tuple(_number(x, "h") for x in h)
    if any(not 0 < x <= 1 for x in h):
        raise SpecError("values must lie in ]0, 1]", "h")

    ph = doc.get("phases", {})
    _known(ph, {"phi", "psi"}, "phases")
    if "phi" not in ph:
        raise SpecError("missing", "phases.phi")
    phi = _expr(ph["phi"], n, "phases.phi")
    psi = _expr(ph.get("psi", ph["phi"]), n, "phases.psi")

    pert = None
    if "perturbation" in doc:
        pert = _perturbation(doc["perturbation"], n)

    opt = doc.get("operator", {})
    _known(opt, {"A", "U", "v", "derive"}, "operator")
    derive = bool(opt.get("derive", False))
    A = _matrix(opt["A"], n, "operator.A") if "A" in opt else None
    U = _vector(opt["U"], n, "operator.U") if "U" in opt else None
    v = _expr(opt["v"], n, "operator.v") if "v" in opt else None
    if pert is None:
        if A is None:
            raise SpecError("missing", "operator.A")
        if not derive and (U is None or v is None):
            raise SpecError("U and v are required unless derive = true", "operator")

    theta = None
    if "theta" in doc:
        theta = _theta(doc["theta"], n)
    if derive and (theta is None or any(isinstance(t, str) for _, t in theta.terms)):
        raise SpecError("derive = true needs explicit [theta] terms", "operator.derive")

    bivector = None
    st = doc.get("structure", {})
    _known(st, {"bivector"}, "structure")
    if "bivector" in st:
        bivector = _matrix(st["bivector"], n, "structure.bivector")

    ver = doc.get("verify", {})
    _known(ver, {"box", "grid_points", "test_functions", "seed", "tolerances"}, "verify")
    if "box" not in ver:
        raise SpecError("missing", "verify.box")
    box = _box(ver["box"], n, "verify.box")
    grid_points = int(ver.get("grid_points", 21 if n <= 3 else 9))
    if grid_points < 2:
        raise SpecError("must be >= 2", "verify.grid_points")
    tol = dict(DEFAULT_TOLERANCES)
    raw_tol = ver.get("tolerances", {})
    _known(raw_tol, set(DEFAULT_TOLERANCES), "verify.tolerances")
    for k, val in raw_tol.items():
        tol[k] = _number(val, f"verify.tolerances.{k}")
        if tol[k] <= 0:
            raise SpecError("must be positive", f"verify.tolerances.{k}")
    verify = VerifySpec(box, grid_points, int(ver.get("test_functions", 3)), int(ver.get("seed", 0)), tol)

    morse = None
    if "morse2d" in doc:
        if n != 2:
            raise SpecError("needs dimension = 2", "morse2d")
        m = doc["morse2d"]
        _known(m, {"box", "grid_points", "fit_tol", "glue_tol", "saddle_margin", "seeds"}, "morse2d")
        morse = MorseSpec(
            _box(m.get("box", box), 2, "morse2d.box"),
            int(m.get("grid_points", 401)),
            _number(m.get("fit_tol", 1e-6), "morse2d.fit_tol"),
            _number(m.get("glue_tol", 1e-4), "morse2d.glue_tol"),
            None if "saddle_margin" not in m else _number(m["saddle_margin"], "morse2d.saddle_margin"),
            int(m.get("seeds", 15)),
        )
    return SpecFile(
        str(doc.get("name", name)),
        n,
        h,
        phi,
        psi,
        A,
        U,
        v,
        derive,
        theta,
        bivector,
        verify,
        morse,
        pert,
        str(doc.get("description", "")),
    )


def _theta(raw, n):
    _known(raw, {"terms", "N", "m_infinity"}, "theta")
    N = _number(raw.get("N", 2.0), "theta.N")
    m = raw.get("m_infinity", "inf")
    if isinstance(m, str):
        if m.strip() != "inf":
            raise SpecError('expected "inf" or a number', "theta.m_infinity")
        m_inf = math.inf
    else:
        m_inf = _number(m, "theta.m_infinity")
    terms = []
    for k, term in enumerate(raw.get("terms", [])):
        where = f"theta.terms[{k}]"
        _known(term, {"alpha", "theta"}, where)
        if "alpha" not in term or "theta" not in term:
            raise SpecError("needs alpha and theta", where)
        alpha = _alpha(term["alpha"], f"{where}.alpha")
        th = term["theta"]
        if isinstance(th, str):
            if th != "solve":
                raise SpecError('theta is a matrix or "solve"', f"{where}.theta")
            terms.append((alpha, "solve"))
        else:
            terms.append((alpha, _matrix(th, n, f"{where}.theta")))
    if sum(isinstance(t, str) for _, t in terms) > 1:
        raise SpecError('at most one term may use theta = "solve"', "theta.terms")
    return ThetaSpec(terms, N, m_inf)


def _perturbation(raw, n):
    keys = {"sigma", "eps", "alpha", "theta", "seed_point", "box", "grid"}
    _known(raw, keys, "perturbation")
    for k in keys - {"grid"}:
        if k not in raw:
            raise SpecError("missing", f"perturbation.{k}")
    seed = raw["seed_point"]
    if not isinstance(seed, list) or len(seed) != n:
        raise SpecError(f"expected {n} coordinates", "perturbation.seed_point")
    return PerturbationSpec(
        _number(raw["sigma"], "perturbation.sigma"),
        _number(raw["eps"], "perturbation.eps"),
        _alpha(raw["alpha"], "perturbation.alpha"),
        _matrix(raw["theta"], n, "perturbation.theta"),
        tuple(_number(s, "perturbation.seed_point") for s in seed),
        _box(raw["box"], n, "perturbation.box"),
        int(raw.get("grid", 401)),
    )


GALLERY_DIR = Path(__file__).parent / "gallery"
GALLERY = ("witten", "kfp", "r3-example", "alpha-linear", "perturbation-two-wells")


def gallery_path(name):
    if name not in GALLERY:
        raise SpecError(f"unknown gallery entry {name!r}; choose from {', '.join(GALLERY)}", "gallery")
    return GALLERY_DIR / f"{name}.toml"


def load_gallery(name):
    return load_spec(gallery_path(name), name)
