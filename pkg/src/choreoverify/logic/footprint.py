"""Footprints: regions of space, as boxes or as predicates over px/py/pz."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .expr import (
    Expr, Var, Cmp, Call, Not, Implies, TRUE, FALSE, conj, disj, free_vars, substitute, show,
)
from .checker import Verdict, check_validity, DEFAULT_DEPTH
from .interval import eval_term, Interval

POINT_VARS = ("px", "py", "pz")
PX, PY, PZ = (Var(n) for n in POINT_VARS)


@dataclass(frozen=True)
class Box:
    xlo: Expr
    xhi: Expr
    ylo: Expr
    yhi: Expr
    zlo: Expr
    zhi: Expr

    def sides(self):
        return (self.xlo, self.xhi, self.ylo, self.yhi, self.zlo, self.zhi)

    def axes(self):
        return ((self.xlo, self.xhi), (self.ylo, self.yhi), (self.zlo, self.zhi))

    def __str__(self):
        return "box(" + ", ".join(show(s) for s in self.sides()) + ")"


@dataclass(frozen=True)
class Region:
    pred: Expr

    def __str__(self):
        return f"region({show(self.pred)})"


def as_pred(fp) -> Expr:
    if isinstance(fp, Region):
        return fp.pred
    parts = []
    for (lo, hi), p in zip(fp.axes(), (PX, PY, PZ)):
        parts.append(Cmp("<=", lo, p))
        parts.append(Cmp("<=", p, hi))
    return conj(*parts)


def fp_substitute(fp, m: Mapping[str, Expr]):
    if isinstance(fp, Region):
        return Region(substitute(fp.pred, m))
    return Box(*(substitute(s, m) for s in fp.sides()))


def fp_free_vars(fp) -> frozenset:
    """Free variables other than the spatial point variables."""
    if isinstance(fp, Region):
        return free_vars(fp.pred) - set(POINT_VARS)
    out = frozenset()
    for s in fp.sides():
        out |= free_vars(s)
    return out


def fp_meet(a, b):
    """Intersection. Boxes stay boxes."""
    if a == b:
        return a
    if isinstance(a, Box) and isinstance(b, Box):
        sides = []
        for (alo, ahi), (blo, bhi) in zip(a.axes(), b.axes()):
            sides.append(alo if alo == blo else Call("max", (alo, blo)))
            sides.append(ahi if ahi == bhi else Call("min", (ahi, bhi)))
        return Box(*sides)
    return Region(conj(as_pred(a), as_pred(b)))


def fp_union(a, b):
    if a == b:
        return a
    return Region(disj(as_pred(a), as_pred(b)))


def box_interval(fp: Box, env) -> list:
    """Evaluate a box at a point state: three (lo, hi) interval pairs."""
    box = {k: Interval(v) for k, v in env.items()}
    return [(eval_term(lo, box), eval_term(hi, box)) for lo, hi in fp.axes()]


def _overlap(a: Box, b: Box) -> Expr:
    parts = []
    for (alo, ahi), (blo, bhi) in zip(a.axes(), b.axes()):
        parts.append(Cmp("<=", alo, bhi))
        parts.append(Cmp("<=", blo, ahi))
        parts.append(Cmp("<=", alo, ahi))
        parts.append(Cmp("<=", blo, bhi))
    return conj(*parts)


def footprints_disjoint(fp1, fp2, ctx: Expr, bounds: Mapping,
                        depth: int = DEFAULT_DEPTH) -> Verdict:
    """Valid iff no point is in both footprints for any state satisfying ctx."""
    if isinstance(fp1, Box) and isinstance(fp2, Box):
        v = check_validity(Implies(ctx, Not(_overlap(fp1, fp2))) if ctx != TRUE
                           else Not(_overlap(fp1, fp2)), bounds, depth)
        if v.refuted:
            env = dict(v.witness)
            (x1, y1, z1) = box_interval(fp1, env)
            (x2, y2, z2) = box_interval(fp2, env)
            env.update({
                "px": max(x1[0].lo, x2[0].lo),
                "py": max(y1[0].lo, y2[0].lo),
                "pz": max(z1[0].lo, z2[0].lo),
            })
            return Verdict("refuted", witness=env)
        return v
    goal = Not(conj(ctx, as_pred(fp1), as_pred(fp2)))
    return check_validity(goal, bounds, depth)


def footprint_within(inner, outer, ctx: Expr, bounds: Mapping,
                     depth: int = DEFAULT_DEPTH) -> Verdict:
    """Valid iff inner is contained in outer whenever ctx holds."""
    if inner == outer:
        return Verdict("valid")
    if isinstance(inner, Box) and isinstance(outer, Box):
        parts = []
        for (ilo, ihi), (olo, ohi) in zip(inner.axes(), outer.axes()):
            parts.append(Cmp("<=", olo, ilo))
            parts.append(Cmp("<=", ihi, ohi))
        v = check_validity(Implies(ctx, conj(*parts)), bounds, depth)
        if v.valid:
            return v
        # boxes may still be contained when the inner one is empty; fall through
    goal = Implies(conj(ctx, as_pred(inner)), as_pred(outer))
    return check_validity(goal, bounds, depth)
