"""Recursive-descent parser for coefficient expressions.

Precedence, tightest first: ``^`` (right associative, constant exponent),
unary ``-``, ``* /``, ``+ -``.  Identifiers are resolved against a context:
``x1..xn`` and ``h`` in an x-context, ``t`` in a t-context.
"""

import math
import re
from dataclasses import dataclass

from .nodes import FUNCTIONS, BinOp, Bump, Call, Neg, Num, Pow, Span, Var


class ParseError(ValueError):
    def __init__(self, message, line, col, kind="syntax"):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col
        self.kind = kind


@dataclass(frozen=True)
class Context:
    kind: str  # "x" or "t"
    n: int = 0

    def __post_init__(self):
        if self.kind not in ("x", "t"):
            raise ValueError(f"unknown context kind {self.kind!r}")


def x_context(n):
    return Context("x", n)


T_CONTEXT = Context("t")

CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("end", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text, context):
        self.tokens = tokenize(text)
        self.i = 0
        self.ctx = context

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, message, tok=None, kind="syntax"):
        tok = tok or self.tok
        raise ParseError(message, tok.line, tok.col, kind)

    def expect(self, text):
        if self.tok.text != text:
            where = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            self.error(f"expected {text!r}, found {where}")
        return self.advance()

    def span(self, tok):
        return Span(tok.line, tok.col, tok.col + len(tok.text))

    def parse(self):
        if self.tok.kind == "end":
            self.error("empty expression")
        e = self.sum()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return e

    def sum(self):
        left = self.product()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance()
            left = BinOp(op.text, left, self.product(), span=self.span(op))
        return left

    def product(self):
        left = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance()
            left = BinOp(op.text, left, self.unary(), span=self.span(op))
        return left

    def unary(self):
        if self.tok.text == "-":
            op = self.advance()
            return Neg(self.unary(), span=self.span(op))
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.text == "^":
            op = self.advance()
            exp_tok = self.tok
            exponent = self.unary()
            value = constant_value(exponent)
            if value is None:
                self.error("exponent must be a constant", exp_tok, kind="exponent")
            return Pow(base, value, span=self.span(op))
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), span=self.span(tok))
        if tok.text == "(":
            self.advance()
            e = self.sum()
            self.expect(")")
            return e
        if tok.kind == "name":
            self.advance()
            if self.tok.text == "(":
                return self.call(tok)
            return self.identifier(tok)
        if tok.kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected {tok.text!r}")

    def args(self):
        self.expect("(")
        args = [self.sum()]
        while self.tok.text == ",":
            self.advance()
            args.append(self.sum())
        self.expect(")")
        return args

    def call(self, name_tok):
        name = name_tok.text
        if name not in FUNCTIONS and name != "bump":
            self.error(f"unknown function {name!r}", name_tok, kind="identifier")
        args = self.args()
        span = self.span(name_tok)
        if name == "bump":
            if len(args) != 3:
                self.error(f"bump expects 3 arguments, got {len(args)}", name_tok, kind="arity")
            a, b = constant_value(args[1]), constant_value(args[2])
            if a is None or b is None:
                self.error("bump bounds must be constants", name_tok, kind="arity")
            if not a < b:
                self.error(f"bump needs a < b, got {a} and {b}", name_tok, kind="arity")
            return Bump(args[0], a, b, span=span)
        if len(args) != 1:
            self.error(f"{name} expects 1 argument, got {len(args)}", name_tok, kind="arity")
        return Call(name, args[0], span=span)

    def identifier(self, tok):
        name = tok.text
        span = self.span(tok)
        if name in CONSTANTS:
            return Var(name, span=span)
        if self.ctx.kind == "x":
            if name == "h":
                return Var("h", span=span)
            m = re.fullmatch(r"x([1-9]\d*)", name)
            if m and int(m.group(1)) <= self.ctx.n:
                return Var(name, span=span)
            if name == "t":
                self.error("profile variable 't' is not allowed in an x-expression", tok, kind="context")
        else:
            if name == "t":
                return Var("t", span=span)
            if name == "h" or re.fullmatch(r"x\d+", name):
                self.error(f"{name!r} is not allowed in a profile (t) expression", tok, kind="context")
        self.error(f"unknown identifier {name!r}", tok, kind="identifier")


def constant_value(e):
    """Numeric value of a variable-free expression, else ``None``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return CONSTANTS.get(e.name)
    if isinstance(e, Neg):
        v = constant_value(e.arg)
        return None if v is None else -v
    if isinstance(e, BinOp):
        a, b = constant_value(e.left), constant_value(e.right)
        if a is None or b is None:
            return None
        if e.op == "/" and b == 0:
            return None
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else 0.0}[e.op]
    if isinstance(e, Pow):
        a = constant_value(e.base)
        try:
            return None if a is None else float(a**e.exponent)
        except (ZeroDivisionError, OverflowError):
            return None
    return None


def parse(text, context):
    if isinstance(context, int):
        context = x_context(context)
    return _Parser(text, context).parse()
