"""Closed rational intervals and three-valued evaluation over boxes.

Everything is exact: bounds are `Fraction`s, rounded outward only when
denominators grow past `_MAX_BITS` so long bisection chains stay cheap.
"""

from __future__ import annotations

from fractions import Fraction
from math import floor, ceil, isqrt

from .expr import (
    Expr, Num, Var, BinOp, Neg, Pow, Call, Ite, BoolConst, Cmp, And, Or, Not, Implies,
    free_vars, is_formula,
)

_MAX_BITS = 160
_GRID = 2 ** 128
_SQRT_SCALE = 2 ** 64


class DomainError(Exception):
    """An operation is undefined (or possibly undefined) on the interval."""


class DivisionByZeroRegion(DomainError):
    pass


def _down(q: Fraction) -> Fraction:
    if q.denominator.bit_length() > _MAX_BITS:
        return Fraction(floor(q * _GRID), _GRID)
    return q


def _up(q: Fraction) -> Fraction:
    if q.denominator.bit_length() > _MAX_BITS:
        return Fraction(ceil(q * _GRID), _GRID)
    return q


class Interval:
    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        self.lo = Fraction(lo)
        self.hi = Fraction(lo if hi is None else hi)

    def __repr__(self):
        return f"[{self.lo}, {self.hi}]"

    def __eq__(self, other):
        return isinstance(other, Interval) and self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    @property
    def is_point(self):
        return self.lo == self.hi

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return (self.lo + self.hi) / 2

    def contains(self, q) -> bool:
        return self.lo <= q <= self.hi

    def __add__(self, o):
        return Interval(_down(self.lo + o.lo), _up(self.hi + o.hi))

    def __sub__(self, o):
        return Interval(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, o):
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(_down(min(ps)), _up(max(ps)))

    def __truediv__(self, o):
        if o.lo <= 0 <= o.hi:
            raise DivisionByZeroRegion("division by an interval spanning 0")
        return self * Interval(_down(1 / o.hi), _up(1 / o.lo))

    def power(self, n: int):
        if n == 0:
            return Interval(1)
        if n % 2 == 1 or self.lo >= 0:
            return Interval(_down(self.lo ** n), _up(self.hi ** n))
        if self.hi <= 0:
            return Interval(_down(self.hi ** n), _up(self.lo ** n))
        return Interval(0, _up(max(self.lo ** n, self.hi ** n)))

    def sqrt(self):
        if self.lo < 0:
            raise DomainError("sqrt over a possibly negative interval")
        return Interval(sqrt_down(self.lo), sqrt_up(self.hi))

    def hull(self, o):
        return Interval(min(self.lo, o.lo), max(self.hi, o.hi))

    def meet(self, o):
        lo, hi = max(self.lo, o.lo), min(self.hi, o.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)


def exact_sqrt(q: Fraction):
    """Exact rational square root, or None when irrational."""
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def sqrt_down(q: Fraction) -> Fraction:
    r = exact_sqrt(q)
    if r is not None:
        return r
    return Fraction(isqrt(floor(q * _SQRT_SCALE ** 2)), _SQRT_SCALE)


def sqrt_up(q: Fraction) -> Fraction:
    r = exact_sqrt(q)
    if r is not None:
        return r
    return Fraction(isqrt(ceil(q * _SQRT_SCALE ** 2)) + 1, _SQRT_SCALE)


def eval_term(e: Expr, box) -> Interval:
    """Interval enclosure of a term over `box` (name -> Interval)."""
    if isinstance(e, Num):
        return Interval(e.value)
    if isinstance(e, Var):
        try:
            return box[e.name]
        except KeyError:
            raise KeyError(e.name) from None
    if isinstance(e, BinOp):
        a = eval_term(e.left, box)
        b = eval_term(e.right, box)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    if isinstance(e, Neg):
        return -eval_term(e.arg, box)
    if isinstance(e, Pow):
        return eval_term(e.base, box).power(e.exp)
    if isinstance(e, Call):
        args = [eval_term(a, box) for a in e.args]
        if e.fn == "sqrt":
            return args[0].sqrt()
        if e.fn == "abs":
            a = args[0]
            if a.lo >= 0:
                return a
            if a.hi <= 0:
                return -a
            return Interval(0, max(-a.lo, a.hi))
        a, b = args
        if e.fn == "min":
            return Interval(min(a.lo, b.lo), min(a.hi, b.hi))
        return Interval(max(a.lo, b.lo), max(a.hi, b.hi))
    if isinstance(e, Ite):
        c = eval_bool(e.cond, box)
        if c is True:
            return eval_term(e.then, box)
        if c is False:
            return eval_term(e.other, box)
        return eval_term(e.then, box).hull(eval_term(e.other, box))
    raise TypeError(f"not a term: {e!r}")


def compare(op: str, a: Interval, b: Interval):
    """Three-valued comparison of two intervals."""
    if op == "<":
        if a.hi < b.lo:
            return True
        if a.lo >= b.hi:
            return False
        return None
    if op == "<=":
        if a.hi <= b.lo:
            return True
        if a.lo > b.hi:
            return False
        return None
    if op == ">":
        return compare("<", b, a)
    if op == ">=":
        return compare("<=", b, a)
    if op == "==":
        if a.is_point and b.is_point and a.lo == b.lo:
            return True
        if a.hi < b.lo or b.hi < a.lo:
            return False
        return None
    if op == "!=":
        r = compare("==", a, b)
        return None if r is None else not r
    raise ValueError(op)


def eval_bool(p: Expr, box):
    """Kleene three-valued truth of a formula over a box (True/False/None)."""
    if isinstance(p, BoolConst):
        return p.value
    if isinstance(p, Cmp):
        try:
            return compare(p.op, eval_term(p.left, box), eval_term(p.right, box))
        except DomainError:
            return None
    if isinstance(p, And):
        unknown = False
        for a in p.args:
            r = eval_bool(a, box)
            if r is False:
                return False
            if r is None:
                unknown = True
        return None if unknown else True
    if isinstance(p, Or):
        unknown = False
        for a in p.args:
            r = eval_bool(a, box)
            if r is True:
                return True
            if r is None:
                unknown = True
        return None if unknown else False
    if isinstance(p, Not):
        r = eval_bool(p.arg, box)
        return None if r is None else not r
    if isinstance(p, Implies):
        a = eval_bool(p.left, box)
        if a is False:
            return True
        b = eval_bool(p.right, box)
        if b is True:
            return True
        if a is True and b is False:
            return False
        return None
    raise TypeError(f"not a formula: {p!r}")


def point_box(env) -> dict:
    return {k: Interval(v) for k, v in env.items()}


def eval_at(e: Expr, env):
    """Evaluate at a point. Terms give an Interval (a point unless sqrt is
    irrational), formulas give True/False/None."""
    box = point_box(env)
    if isinstance(e, (BoolConst, Cmp, And, Or, Not, Implies)):
        return eval_bool(e, box)
    return eval_term(e, box)


def fold_closed(e: Expr) -> Expr:
    """Replace a variable-free term by its exact value when it has one."""
    if isinstance(e, Num) or is_formula(e) or free_vars(e):
        return e
    try:
        v = eval_term(e, {})
    except (DomainError, ZeroDivisionError):
        return e
    return Num(v.lo) if v.is_point else e


# --- contraction (HC4-style forward/backward propagation) ------------------

class Empty(Exception):
    """The box has no point satisfying the literal."""


def contract(lit: Cmp, box: dict) -> bool:
    """Narrow `box` in place using literal `lit`. Returns True if anything
    changed; raises Empty when infeasible. Sound: never drops a solution."""
    if lit.op == "!=":
        return False
    diff = BinOp("-", lit.left, lit.right)
    try:
        fwd = {}
        val = _forward(diff, box, fwd)
    except DomainError:
        return False
    if lit.op in ("<", "<="):
        target = Interval(val.lo, min(val.hi, Fraction(0))) if val.lo <= 0 else None
    elif lit.op in (">", ">="):
        target = Interval(max(val.lo, Fraction(0)), val.hi) if val.hi >= 0 else None
    else:
        target = val.meet(Interval(0))
    if target is None:
        raise Empty()
    if lit.op == "<" and val.lo >= 0:
        raise Empty()
    if lit.op == ">" and val.hi <= 0:
        raise Empty()
    changed = [False]
    _backward(diff, target, box, fwd, changed)
    return changed[0]


def _forward(e, box, memo):
    if isinstance(e, Num):
        r = Interval(e.value)
    elif isinstance(e, Var):
        r = box[e.name]
    elif isinstance(e, BinOp):
        a = _forward(e.left, box, memo)
        b = _forward(e.right, box, memo)
        r = {"+": Interval.__add__, "-": Interval.__sub__,
             "*": Interval.__mul__, "/": Interval.__truediv__}[e.op](a, b)
    elif isinstance(e, Neg):
        r = -_forward(e.arg, box, memo)
    elif isinstance(e, Pow):
        r = _forward(e.base, box, memo).power(e.exp)
    elif isinstance(e, Call) and e.fn == "sqrt":
        r = _forward(e.args[0], box, memo).sqrt()
    else:
        r = eval_term(e, box)
    memo[id(e)] = r
    return r


def _narrow(e, target, box, memo, changed):
    cur = memo[id(e)]
    new = cur.meet(target)
    if new is None:
        raise Empty()
    if new != cur:
        memo[id(e)] = new
        _backward(e, new, box, memo, changed)


def _backward(e, target, box, memo, changed):
    if isinstance(e, Num):
        if not target.contains(e.value):
            raise Empty()
        return
    if isinstance(e, Var):
        cur = box[e.name]
        new = cur.meet(target)
        if new is None:
            raise Empty()
        if new != cur:
            box[e.name] = new
            changed[0] = True
        return
    if isinstance(e, BinOp):
        a, b = memo[id(e.left)], memo[id(e.right)]
        if e.op == "+":
            _narrow(e.left, target - b, box, memo, changed)
            _narrow(e.right, target - memo[id(e.left)], box, memo, changed)
        elif e.op == "-":
            _narrow(e.left, target + b, box, memo, changed)
            _narrow(e.right, memo[id(e.left)] - target, box, memo, changed)
        elif e.op == "*":
            if not (b.lo <= 0 <= b.hi):
                _narrow(e.left, target / b, box, memo, changed)
            a = memo[id(e.left)]
            if not (a.lo <= 0 <= a.hi):
                _narrow(e.right, target / a, box, memo, changed)
        else:
            _narrow(e.left, target * b, box, memo, changed)
            if not (target.lo <= 0 <= target.hi):
                _narrow(e.right, memo[id(e.left)] / target, box, memo, changed)
        return
    if isinstance(e, Neg):
        _narrow(e.arg, -target, box, memo, changed)
        return
    if isinstance(e, Pow) and e.exp == 2:
        if target.hi < 0:
            raise Empty()
        hi = sqrt_up(target.hi)
        lo = sqrt_down(max(target.lo, Fraction(0)))
        base = memo[id(e.base)]
        if base.lo >= 0:
            cand = Interval(lo, hi)
        elif base.hi <= 0:
            cand = Interval(-hi, -lo)
        else:
            cand = Interval(-hi, hi)
        _narrow(e.base, cand, box, memo, changed)
        return
    if isinstance(e, Call) and e.fn == "sqrt":
        lo = max(target.lo, Fraction(0))
        if target.hi < 0:
            raise Empty()
        _narrow(e.args[0], Interval(lo * lo, target.hi * target.hi), box, memo, changed)
        return
    # min/max/abs/ite/odd powers: forward information only
