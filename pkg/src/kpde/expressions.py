"""Closed-form field expressions from configuration strings.

Expressions are parsed by sympy with a restricted namespace and compiled to
numpy functions. Spatial fields use the coordinates ``x`` (and ``y`` in 2-D);
space-time sources may also use ``t``. ``R`` is the box half-width.
"""
from __future__ import annotations

import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

X, Y, T_SYM, R_SYM = sp.symbols("x y t R", real=True)

_FUNCTIONS = {
    name: getattr(sp, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "sinh", "cosh",
                 "Abs", "sign", "Min", "Max", "Piecewise", "Heaviside", "atan", "erf")
}
_FUNCTIONS.update(abs=sp.Abs, pi=sp.pi, E=sp.E, Integer=sp.Integer, Float=sp.Float,
                  Rational=sp.Rational, Symbol=sp.Symbol)


class ExpressionError(ValueError):
    pass


def parse(text: str, variables=("x",)) -> sp.Expr:
    """Parse ``text`` allowing only ``variables`` and the box size ``R``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string")
    if "__" in text or any(c in text for c in ";\n"):
        raise ExpressionError(f"illegal characters in expression {text!r}")
    local = {"x": X, "y": Y, "t": T_SYM, "R": R_SYM}
    try:
        expr = parse_expr(text, local_dict=local, global_dict=dict(_FUNCTIONS),
                          transformations=standard_transformations, evaluate=True)
    except Exception as exc:  # sympy raises a wide range of types here
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from None
    if not isinstance(expr, sp.Expr):
        raise ExpressionError(f"{text!r} is not a scalar expression")
    allowed = {local[v] for v in variables} | {R_SYM}
    extra = expr.free_symbols - allowed
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise ExpressionError(f"{text!r} uses unknown symbols: {names} (allowed: {', '.join(variables)}, R)")
    return expr


def compile_expression(text: str, variables=("x",), R: float = 1.0):
    """Vectorized ``f(*variables)`` with ``R`` substituted."""
    expr = parse(text, variables).subs(R_SYM, R)
    syms = [{"x": X, "y": Y, "t": T_SYM}[v] for v in variables]
    fn = sp.lambdify(syms, expr, modules="numpy")
    return _Compiled(fn, text)


class _Compiled:
    """Keeps the source text next to the compiled function for error messages."""

    def __init__(self, fn, text):
        self.fn = fn
        self.text = text

    def __call__(self, *args):
        return self.fn(*args)

    def __repr__(self):
        return f"Expression({self.text!r})"


def spatial_variables(d: int) -> tuple[str, ...]:
    return ("x",) if d == 1 else ("x", "y")


def space_time_variables(d: int) -> tuple[str, ...]:
    return ("t",) + spatial_variables(d)
