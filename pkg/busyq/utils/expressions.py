"""Expression mini-grammar for user-supplied functions.

Two forms are accepted:
  - plain expressions in one variable, e.g. ``10/(1+t)`` or ``1 - exp(-t)``
  - ``rational:"<poly>/<poly>"`` in the variable ``s``, e.g. ``rational:"(0.632)/(s+0.368)"``
"""
from __future__ import annotations
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from busyq.errors import ModelValidationError

_RATIONAL = re.compile(r"^\s*rational\s*:\s*(?P<body>.+?)\s*$", re.S)
_ALLOWED_FUNCS = {
    "exp": sympy.exp,
    "log": sympy.log,
    "sqrt": sympy.sqrt,
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tanh": sympy.tanh,
    "pi": sympy.pi,
    "E": sympy.E,
}


def _parse(text: str, var: str, path: str) -> sympy.Expr:
    symbol = sympy.Symbol(var)
    local = dict(_ALLOWED_FUNCS)
    local[var] = symbol
    try:
        expr = parse_expr(
            text.replace("^", "**"),
            local_dict=local,
            global_dict={"Integer": sympy.Integer, "Float": sympy.Float,
                         "Rational": sympy.Rational, "Symbol": sympy.Symbol},
            transformations=standard_transformations,
        )
    except Exception as e:  # sympy raises a zoo of exception types
        raise ModelValidationError(
            f"cannot parse expression {text!r}: {type(e).__name__}: {e}",
            code="INVALID_EXPRESSION", path=path,
        ) from e
    extra = {str(x) for x in expr.free_symbols} - {var}
    if extra:
        raise ModelValidationError(
            f"expression {text!r} uses unknown symbols {sorted(extra)}; only {var!r} is allowed",
            code="INVALID_EXPRESSION", path=path,
        )
    return expr


def compile_expression(text: str, var: str = "t", *, path: str = "") -> Callable[[np.ndarray], np.ndarray]:
    """Compile a one-variable expression into a vectorised numpy callable."""
    expr = _parse(text, var, path)
    fn = sympy.lambdify(sympy.Symbol(var), expr, modules="numpy")

    def evaluate(x):
        x_arr = np.asarray(x, dtype=float)
        out = np.asarray(fn(x_arr), dtype=float)
        return np.broadcast_to(out, x_arr.shape).copy() if out.shape != x_arr.shape else out

    evaluate.__doc__ = f"{var} -> {text}"
    return evaluate


@dataclass(frozen=True)
class RationalFunction:
    """Ratio of two real polynomials in s; coefficients highest degree first."""

    numerator: tuple[float, ...]
    denominator: tuple[float, ...]
    text: str = ""

    def __call__(self, s):
        return np.polyval(self.numerator, s) / np.polyval(self.denominator, s)


def is_rational(text: str) -> bool:
    return bool(_RATIONAL.match(text or ""))


def parse_rational(text: str, *, path: str = "") -> RationalFunction:
    m = _RATIONAL.match(text or "")
    if not m:
        raise ModelValidationError(
            f"expected rational:\"<poly>/<poly>\", got {text!r}", code="INVALID_EXPRESSION", path=path
        )
    body = m.group("body").strip().strip("\"'")
    expr = _parse(body, "s", path)
    s = sympy.Symbol("s")
    num, den = sympy.fraction(sympy.together(expr))
    try:
        p_num = sympy.Poly(sympy.expand(num), s)
        p_den = sympy.Poly(sympy.expand(den), s)
    except sympy.PolynomialError as e:
        raise ModelValidationError(
            f"{body!r} is not a ratio of polynomials in s", code="INVALID_EXPRESSION", path=path
        ) from e
    if p_den.is_zero:
        raise ModelValidationError("zero denominator", code="INVALID_EXPRESSION", path=path)
    return RationalFunction(
        numerator=tuple(float(c) for c in p_num.all_coeffs()),
        denominator=tuple(float(c) for c in p_den.all_coeffs()),
        text=body,
    )
