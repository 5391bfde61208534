"""Terms and formulas over real-valued variables.

One tree type covers both arithmetic terms and boolean formulas; the
checkers, the motion contracts and the typing rules all speak it.

Variable naming conventions used across the package:

* ``Cart.x``   state variable ``x`` of participant ``Cart``
* ``xf``       motion parameter or bound term variable (no dot)
* ``clock``, ``nu``, ``px``, ``py``, ``pz``  reserved
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

RESERVED = frozenset({"clock", "nu", "px", "py", "pz"})
ARITH_FUNCS = {"sqrt": 1, "min": 2, "max": 2, "abs": 1}
CMP_OPS = ("<", "<=", "==", "!=", ">=", ">")
NEGATED_CMP = {"<": ">=", "<=": ">", "==": "!=", "!=": "==", ">=": "<", ">": "<="}
MIRRORED_CMP = {"<": ">", "<=": ">=", "==": "==", "!=": "!=", ">=": "<=", ">": "<"}


class Expr:
    __slots__ = ()

    def __str__(self):
        return show(self)


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: int


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass(frozen=True)
class BoolConst(Expr):
    value: bool


@dataclass(frozen=True)
class Cmp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(Expr):
    args: tuple


@dataclass(frozen=True)
class Or(Expr):
    args: tuple


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class Implies(Expr):
    left: Expr
    right: Expr


TRUE = BoolConst(True)
FALSE = BoolConst(False)


def num(v) -> Num:
    if isinstance(v, Num):
        return v
    return Num(Fraction(v))


def var(name: str) -> Var:
    return Var(name)


def is_formula(e: Expr) -> bool:
    return isinstance(e, (BoolConst, Cmp, And, Or, Not, Implies))


def conj(*parts: Expr) -> Expr:
    """Flattening conjunction; drops `true`, collapses on `false`."""
    out = []
    for p in parts:
        if isinstance(p, And):
            items = p.args
        else:
            items = (p,)
        for q in items:
            if q == TRUE:
                continue
            if q == FALSE:
                return FALSE
            if q not in out:
                out.append(q)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(*parts: Expr) -> Expr:
    out = []
    for p in parts:
        items = p.args if isinstance(p, Or) else (p,)
        for q in items:
            if q == FALSE:
                continue
            if q == TRUE:
                return TRUE
            if q not in out:
                out.append(q)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def implies(a: Expr, b: Expr) -> Expr:
    if a == TRUE:
        return b
    if b == TRUE or a == FALSE:
        return TRUE
    return Implies(a, b)


def negate(p: Expr) -> Expr:
    if isinstance(p, BoolConst):
        return BoolConst(not p.value)
    if isinstance(p, Not):
        return p.arg
    return Not(p)


def conjuncts(p: Expr) -> tuple:
    if isinstance(p, And):
        return p.args
    if p == TRUE:
        return ()
    return (p,)


def children(e: Expr) -> tuple:
    if isinstance(e, (Num, Var, BoolConst)):
        return ()
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, (Neg, Not)):
        return (e.arg,)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, Call):
        return e.args
    if isinstance(e, Ite):
        return (e.cond, e.then, e.other)
    if isinstance(e, Cmp):
        return (e.left, e.right)
    if isinstance(e, (And, Or)):
        return e.args
    if isinstance(e, Implies):
        return (e.left, e.right)
    raise TypeError(f"not an expression: {e!r}")


def rebuild(e: Expr, kids) -> Expr:
    """Same node as e with its children replaced (inverse of `children`)."""
    kids = tuple(kids)
    if isinstance(e, (Num, Var, BoolConst)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, *kids)
    if isinstance(e, Neg):
        return Neg(kids[0])
    if isinstance(e, Not):
        return Not(kids[0])
    if isinstance(e, Pow):
        return Pow(kids[0], e.exp)
    if isinstance(e, Call):
        return Call(e.fn, kids)
    if isinstance(e, Ite):
        return Ite(*kids)
    if isinstance(e, Cmp):
        return Cmp(e.op, *kids)
    if isinstance(e, And):
        return And(kids)
    if isinstance(e, Or):
        return Or(kids)
    if isinstance(e, Implies):
        return Implies(*kids)
    raise TypeError(f"not an expression: {e!r}")


def free_vars(e: Expr) -> frozenset:
    acc = set()
    stack = [e]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            acc.add(cur.name)
        else:
            stack.extend(children(cur))
    return frozenset(acc)


def substitute(e: Expr, m: Mapping[str, Expr]) -> Expr:
    """Simultaneous substitution of variables by expressions."""
    if not m:
        return e
    return _subst(e, m)


def _subst(e, m):
    if isinstance(e, Var):
        return m.get(e.name, e)
    if isinstance(e, (Num, BoolConst)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst(e.left, m), _subst(e.right, m))
    if isinstance(e, Neg):
        return Neg(_subst(e.arg, m))
    if isinstance(e, Pow):
        return Pow(_subst(e.base, m), e.exp)
    if isinstance(e, Call):
        return Call(e.fn, tuple(_subst(a, m) for a in e.args))
    if isinstance(e, Ite):
        return Ite(_subst(e.cond, m), _subst(e.then, m), _subst(e.other, m))
    if isinstance(e, Cmp):
        return Cmp(e.op, _subst(e.left, m), _subst(e.right, m))
    if isinstance(e, And):
        return And(tuple(_subst(a, m) for a in e.args))
    if isinstance(e, Or):
        return Or(tuple(_subst(a, m) for a in e.args))
    if isinstance(e, Not):
        return Not(_subst(e.arg, m))
    if isinstance(e, Implies):
        return Implies(_subst(e.left, m), _subst(e.right, m))
    raise TypeError(f"not an expression: {e!r}")


def rename_vars(e: Expr, fn) -> Expr:
    """Apply `fn` to every variable name (fn returns the new name)."""
    names = free_vars(e)
    return substitute(e, {n: Var(fn(n)) for n in names if fn(n) != n})


def nnf(p: Expr, positive: bool = True) -> Expr:
    """Negation normal form; atoms are comparisons and constants."""
    if isinstance(p, BoolConst):
        return BoolConst(p.value if positive else not p.value)
    if isinstance(p, Cmp):
        return p if positive else Cmp(NEGATED_CMP[p.op], p.left, p.right)
    if isinstance(p, Not):
        return nnf(p.arg, not positive)
    if isinstance(p, And):
        parts = [nnf(a, positive) for a in p.args]
        return conj(*parts) if positive else disj(*parts)
    if isinstance(p, Or):
        parts = [nnf(a, positive) for a in p.args]
        return disj(*parts) if positive else conj(*parts)
    if isinstance(p, Implies):
        if positive:
            return disj(nnf(p.left, False), nnf(p.right, True))
        return conj(nnf(p.left, True), nnf(p.right, False))
    raise TypeError(f"not a formula: {show(p)}")


# --- printing -------------------------------------------------------------
# The textual form is exactly what the surface parser accepts.

_PREC = {"=>": 1, "||": 2, "&&": 3, "!": 4, "cmp": 5, "+": 6, "-": 6, "*": 7, "/": 7, "neg": 8, "^": 9}


def show_num(q: Fraction) -> str:
    if q.denominator == 1 and q >= 0:
        return str(q.numerator)
    if q.denominator == 1:
        return f"({q.numerator})"
    return f"({q.numerator}/{q.denominator})"


def show(e: Expr) -> str:
    return _show(e, 0)


def _wrap(text: str, prec: int, ctx: int) -> str:
    return f"({text})" if prec < ctx else text


def _show(e, ctx):
    if isinstance(e, Num):
        return show_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, BoolConst):
        return "true" if e.value else "false"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        text = f"{_show(e.left, p)} {e.op} {_show(e.right, p + 1)}"
        return _wrap(text, p, ctx)
    if isinstance(e, Neg):
        p = _PREC["neg"]
        return _wrap(f"-{_show(e.arg, p + 1)}", p, ctx)
    if isinstance(e, Pow):
        p = _PREC["^"]
        return _wrap(f"{_show(e.base, p + 1)}^{e.exp}", p, ctx)
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_show(a, 0) for a in e.args)})"
    if isinstance(e, Ite):
        return f"ite({_show(e.cond, 0)}, {_show(e.then, 0)}, {_show(e.other, 0)})"
    if isinstance(e, Cmp):
        p = _PREC["cmp"]
        return _wrap(f"{_show(e.left, p + 1)} {e.op} {_show(e.right, p + 1)}", p, ctx)
    if isinstance(e, And):
        p = _PREC["&&"]
        return _wrap(" && ".join(_show(a, p + 1) for a in e.args), p, ctx)
    if isinstance(e, Or):
        p = _PREC["||"]
        return _wrap(" || ".join(_show(a, p + 1) for a in e.args), p, ctx)
    if isinstance(e, Not):
        p = _PREC["!"]
        return _wrap(f"!{_show(e.arg, p + 1)}", p, ctx)
    if isinstance(e, Implies):
        p = _PREC["=>"]
        return _wrap(f"{_show(e.left, p + 1)} => {_show(e.right, p)}", p, ctx)
    raise TypeError(f"not an expression: {e!r}")


def size(e: Expr) -> int:
    return 1 + sum(size(c) for c in children(e))


def all_vars(exprs: Iterable[Expr]) -> frozenset:
    out = frozenset()
    for e in exprs:
        out |= free_vars(e)
    return out
