"""Exact decision procedure for conjunctions of linear literals.

Interval reasoning cannot settle a goal whose only counterexamples would sit
on the boundary of a strict inequality. For conjunctions where every
literal is linear, Fourier-Motzkin elimination with strictness tracking
decides feasibility exactly over the rationals and yields a model.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import BinOp, Cmp, Neg, Num, Pow, Var

MAX_ROWS = 4000


def linearize(e):
    """(coefficients, constant) when e is affine in its variables, else None."""
    if isinstance(e, Num):
        return {}, e.value
    if isinstance(e, Var):
        return {e.name: Fraction(1)}, Fraction(0)
    if isinstance(e, Neg):
        a = linearize(e.arg)
        if a is None:
            return None
        return {k: -v for k, v in a[0].items()}, -a[1]
    if isinstance(e, Pow):
        a = linearize(e.base)
        if a is None:
            return None
        if e.exp == 1:
            return a
        if not a[0]:
            return {}, a[1] ** e.exp
        return None
    if isinstance(e, BinOp):
        a, b = linearize(e.left), linearize(e.right)
        if a is None or b is None:
            return None
        if e.op in "+-":
            s = 1 if e.op == "+" else -1
            out = dict(a[0])
            for k, v in b[0].items():
                out[k] = out.get(k, 0) + s * v
            return {k: v for k, v in out.items() if v}, a[1] + s * b[1]
        if e.op == "*":
            if not a[0]:
                a, b = b, a
            if b[0]:
                return None
            return {k: v * b[1] for k, v in a[0].items() if v * b[1]}, a[1] * b[1]
        if e.op == "/":
            if b[0] or b[1] == 0:
                return None
            return {k: v / b[1] for k, v in a[0].items()}, a[1] / b[1]
    return None


class _Row:
    """sum(coef[x] * x) + const  (<= 0 | < 0 | == 0)"""
    __slots__ = ("coef", "const", "op")

    def __init__(self, coef, const, op):
        self.coef, self.const, self.op = coef, const, op


def rows_of(lit: Cmp):
    """Rows for a comparison literal, or None when it is not linear.
    Disequalities are not representable and also give None."""
    a, b = linearize(lit.left), linearize(lit.right)
    if a is None or b is None or lit.op == "!=":
        return None
    coef = dict(a[0])
    for k, v in b[0].items():
        coef[k] = coef.get(k, 0) - v
    coef = {k: v for k, v in coef.items() if v}
    const = a[1] - b[1]
    neg = {k: -v for k, v in coef.items()}
    if lit.op == "<=":
        return [_Row(coef, const, "<=")]
    if lit.op == "<":
        return [_Row(coef, const, "<")]
    if lit.op == ">=":
        return [_Row(neg, -const, "<=")]
    if lit.op == ">":
        return [_Row(neg, -const, "<")]
    return [_Row(coef, const, "==")]


def _bound_rows(box, names):
    out = []
    for k in names:
        iv = box[k]
        out.append(_Row({k: Fraction(1)}, -iv.hi, "<="))
        out.append(_Row({k: Fraction(-1)}, iv.lo, "<="))
    return out


def solve(rows, box):
    """A rational model (dict) of the rows inside box, False when there is
    none, or None when the problem grew too large to finish."""
    names = sorted({k for r in rows for k in r.coef})
    rows = list(rows) + _bound_rows(box, names)
    steps = []   # (var, definition) for equalities, (var, rows) for bounds
    for x in names:
        eq = next((r for r in rows if r.op == "==" and r.coef.get(x)), None)
        if eq is not None:
            c = eq.coef[x]
            # x = -(const + sum others) / c
            defn = ({k: -v / c for k, v in eq.coef.items() if k != x}, -eq.const / c)
            new = []
            for r in rows:
                if r is eq:
                    continue
                a = r.coef.get(x)
                if not a:
                    new.append(r)
                    continue
                coef = {k: v for k, v in r.coef.items() if k != x}
                for k, v in defn[0].items():
                    coef[k] = coef.get(k, 0) + a * v
                new.append(_Row({k: v for k, v in coef.items() if v}, r.const + a * defn[1], r.op))
            steps.append((x, "eq", defn))
            rows = new
            continue
        # equalities mentioning x are gone, so split every == row in two
        split = []
        for r in rows:
            if r.op == "==" and r.coef.get(x):
                split.append(_Row(r.coef, r.const, "<="))
                split.append(_Row({k: -v for k, v in r.coef.items()}, -r.const, "<="))
            else:
                split.append(r)
        rows = split
        upper = [r for r in rows if r.coef.get(x, 0) > 0]
        lower = [r for r in rows if r.coef.get(x, 0) < 0]
        rest = [r for r in rows if not r.coef.get(x)]
        steps.append((x, "fm", upper + lower))
        for u in upper:
            for lo in lower:
                a, b = u.coef[x], -lo.coef[x]
                coef = {}
                for k, v in u.coef.items():
                    if k != x:
                        coef[k] = coef.get(k, 0) + v / a
                for k, v in lo.coef.items():
                    if k != x:
                        coef[k] = coef.get(k, 0) + v / b
                op = "<" if "<" in (u.op, lo.op) else "<="
                rest.append(_Row({k: v for k, v in coef.items() if v}, u.const / a + lo.const / b, op))
        rows = rest
        if len(rows) > MAX_ROWS:
            return None
    for r in rows:
        if r.op == "<=" and r.const > 0:
            return False
        if r.op == "<" and r.const >= 0:
            return False
        if r.op == "==" and r.const != 0:
            return False
    model = {}
    for x, kind, data in reversed(steps):
        if kind == "eq":
            coef, const = data
            model[x] = const + sum(v * model[k] for k, v in coef.items())
            continue
        lo = hi = None
        lo_strict = hi_strict = False
        for r in data:
            a = r.coef[x]
            val = -(r.const + sum(v * model[k] for k, v in r.coef.items() if k != x)) / a
            strict = r.op == "<"
            if a > 0:
                if hi is None or val < hi or (val == hi and strict):
                    hi, hi_strict = val, strict
            else:
                if lo is None or val > lo or (val == lo and strict):
                    lo, lo_strict = val, strict
        if lo is not None and hi is not None:
            if lo == hi and not (lo_strict or hi_strict):
                model[x] = lo
            else:
                model[x] = (lo + hi) / 2
        elif lo is not None:
            model[x] = lo + 1 if lo_strict else lo
        elif hi is not None:
            model[x] = hi - 1 if hi_strict else hi
        else:
            model[x] = Fraction(0)
    return model
