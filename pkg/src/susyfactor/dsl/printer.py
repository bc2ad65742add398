from .nodes import BinOp, Bump, Call, Mask, Neg, Num, Pow, Var

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY = 3
_POW = 4
_ATOM = 5


def _num(v):
    v = float(v)
    text = repr(v)
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"cannot print non-finite literal {text}")
    # integral values print without the trailing ".0"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return text


def _prec(e):
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _UNARY
    if isinstance(e, Pow):
        return _POW
    if isinstance(e, Num) and e.value < 0:
        return _UNARY
    return _ATOM


def to_text(e):
    """Print an expression so that parsing the text gives back the same tree."""
    if isinstance(e, Num):
        return _num(e.value) if e.value >= 0 else f"-{_num(-e.value)}"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _UNARY, strict=False)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = _wrap(e.left, p, strict=False)
        # left associative: an equal-precedence right operand needs parentheses
        right = _wrap(e.right, p, strict=True)
        return f"{left} {e.op} {right}"
    if isinstance(e, Pow):
        base = _wrap(e.base, _POW, strict=True)
        exp = _num(e.exponent) if e.exponent >= 0 else f"(-{_num(-e.exponent)})"
        return f"{base}^{exp}"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Bump):
        name = "bump" if e.deriv == 0 else f"bump_d{e.deriv}"
        return f"{name}({to_text(e.arg)}, {_num(e.a)}, {_num(e.b)})"
    if isinstance(e, Mask):
        return f"mask[{e.label}]"
    raise TypeError(f"cannot print {type(e).__name__}")


def _wrap(e, p, strict):
    text = to_text(e)
    q = _prec(e)
    if q < p or (strict and q == p):
        return f"({text})"
    return text
