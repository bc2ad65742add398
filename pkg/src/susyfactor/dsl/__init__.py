"""Coefficient expression language: parse, print, evaluate with jets."""

from .evaluate import eval_jet, eval_series, eval_value, profile_derivatives
from .nodes import BinOp, Bump, Call, Expr, Mask, Neg, Num, Pow, Var, depth, free_vars
from .parser import T_CONTEXT, Context, ParseError, parse, x_context
from .printer import to_text
from .symbolic import diff, divergence, gradient, shift_variables, substitute

__all__ = [
    "BinOp",
    "Bump",
    "Call",
    "Context",
    "Expr",
    "Mask",
    "Neg",
    "Num",
    "ParseError",
    "Pow",
    "T_CONTEXT",
    "Var",
    "depth",
    "diff",
    "divergence",
    "eval_jet",
    "eval_series",
    "eval_value",
    "free_vars",
    "gradient",
    "parse",
    "profile_derivatives",
    "shift_variables",
    "substitute",
    "to_text",
    "x_context",
]
