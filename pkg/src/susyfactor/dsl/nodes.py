"""Expression tree for the coefficient language.

Nodes are frozen dataclasses; the source ``span`` is excluded from equality so
that a printed-and-reparsed tree compares equal to the original.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

FUNCTIONS = ("exp", "sin", "cos", "sqrt", "log", "tanh")


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_col: int


@dataclass(frozen=True)
class Expr:
    def __add__(self, other):
        return BinOp("+", self, _wrap(other))

    def __radd__(self, other):
        return BinOp("+", _wrap(other), self)

    def __sub__(self, other):
        return BinOp("-", self, _wrap(other))

    def __rsub__(self, other):
        return BinOp("-", _wrap(other), self)

    def __mul__(self, other):
        return BinOp("*", self, _wrap(other))

    def __rmul__(self, other):
        return BinOp("*", _wrap(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, _wrap(other))

    def __neg__(self):
        return Neg(self)

    def __pow__(self, p):
        return Pow(self, float(p))

    def __str__(self):
        from .printer import to_text

        return to_text(self)


def _wrap(x):
    return x if isinstance(x, Expr) else Num(float(x))


@dataclass(frozen=True)
class Num(Expr):
    value: float
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var(Expr):
    """``x<i>`` (index >= 1), the parameter ``h`` or the profile variable ``t``."""

    name: str
    span: Optional[Span] = field(default=None, compare=False, repr=False)

    @property
    def index(self):
        return int(self.name[1:]) - 1 if self.name.startswith("x") else None


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Bump(Expr):
    """``bump(arg, a, b)``; ``deriv > 0`` marks its derivative (internal only)."""

    arg: Expr
    a: float
    b: float
    deriv: int = 0
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Mask(Expr):
    """Locally constant 0/1 field given by a callable on points (internal only).

    Used for cutoffs restricted to one connected component of a sublevel set:
    the callable is evaluated where the mask is multiplied by a factor that
    vanishes near the component boundary, so its derivatives are zero.
    """

    label: str
    fn: Callable = field(compare=False, hash=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)


def walk(e):
    yield e
    for child in children(e):
        yield from walk(child)


def children(e) -> Tuple[Expr, ...]:
    if isinstance(e, (Neg,)):
        return (e.arg,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, (Call, Bump)):
        return (e.arg,)
    return ()


def depth(e):
    return 1 + max((depth(c) for c in children(e)), default=0)


def free_vars(e):
    return {node.name for node in walk(e) if isinstance(node, Var)}
