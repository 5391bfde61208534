"""Exact evaluation of expressions at a point, compiled to closures.

Used by the simulator, which evaluates the same trajectories and contract
predicates thousands of times. Everything is a Fraction; a square root
that is not rational is rounded down to 1e-12 so results stay
reproducible.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import (
    And, BinOp, BoolConst, Call, Cmp, Implies, Ite, Neg, Not, Num, Or, Pow, Var,
)
from .interval import exact_sqrt

SQRT_RESOLUTION = Fraction(1, 10**12)


class EvalError(Exception):
    pass


def point_sqrt(q: Fraction) -> Fraction:
    if q < 0:
        raise EvalError(f"sqrt of negative value {q}")
    r = exact_sqrt(q)
    if r is not None:
        return r
    # floor(sqrt(q) / res) * res by integer square root
    from math import isqrt
    scaled = q / (SQRT_RESOLUTION * SQRT_RESOLUTION)
    return Fraction(isqrt(scaled.numerator // scaled.denominator)) * SQRT_RESOLUTION


_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def compile_expr(e):
    """Closure env -> Fraction (terms) or bool (formulas)."""
    if isinstance(e, Num):
        v = e.value
        return lambda env: v
    if isinstance(e, Var):
        n = e.name

        def var(env):
            try:
                return env[n]
            except KeyError:
                raise EvalError(f"no value for {n}") from None
        return var
    if isinstance(e, BoolConst):
        v = e.value
        return lambda env: v
    if isinstance(e, BinOp):
        a, b = compile_expr(e.left), compile_expr(e.right)
        if e.op == "+":
            return lambda env: a(env) + b(env)
        if e.op == "-":
            return lambda env: a(env) - b(env)
        if e.op == "*":
            return lambda env: a(env) * b(env)

        def div(env):
            d = b(env)
            if d == 0:
                raise EvalError("division by zero")
            return a(env) / d
        return div
    if isinstance(e, Neg):
        a = compile_expr(e.arg)
        return lambda env: -a(env)
    if isinstance(e, Pow):
        a, k = compile_expr(e.base), e.exp
        return lambda env: a(env) ** k
    if isinstance(e, Call):
        args = [compile_expr(x) for x in e.args]
        if e.fn == "sqrt":
            a = args[0]
            return lambda env: point_sqrt(a(env))
        if e.fn == "abs":
            a = args[0]
            return lambda env: abs(a(env))
        a, b = args
        if e.fn == "min":
            return lambda env: min(a(env), b(env))
        return lambda env: max(a(env), b(env))
    if isinstance(e, Ite):
        c, t, o = compile_expr(e.cond), compile_expr(e.then), compile_expr(e.other)
        return lambda env: t(env) if c(env) else o(env)
    if isinstance(e, Cmp):
        a, b, op = compile_expr(e.left), compile_expr(e.right), _CMP[e.op]
        return lambda env: op(a(env), b(env))
    if isinstance(e, And):
        parts = [compile_expr(x) for x in e.args]
        return lambda env: all(p(env) for p in parts)
    if isinstance(e, Or):
        parts = [compile_expr(x) for x in e.args]
        return lambda env: any(p(env) for p in parts)
    if isinstance(e, Not):
        a = compile_expr(e.arg)
        return lambda env: not a(env)
    if isinstance(e, Implies):
        a, b = compile_expr(e.left), compile_expr(e.right)
        return lambda env: (not a(env)) or b(env)
    raise TypeError(f"cannot evaluate {e!r}")
