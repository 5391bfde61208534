"""Branch-and-refute validity checker over bounded real boxes.

`check_validity(p, bounds)` searches for a point of the box where `p` is
false. The search splits on disjunctions, narrows boxes with interval
contraction and bisects variables up to `depth` times each. Verdicts:

* ``valid``    no counterexample can exist (interval argument, sound)
* ``refuted``  a concrete rational counterexample, re-checked exactly
* ``unknown``  the budget ran out first
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .expr import (
    Expr, BinOp, BoolConst, Call, Cmp, And, Or, Not, Implies, Ite, Neg, Num, TRUE, FALSE, children, rebuild,
    conj, disj, conjuncts, free_vars, nnf, show, NEGATED_CMP,
)
from .interval import Interval, eval_bool, eval_term, contract, Empty, DomainError
from .linear import rows_of, solve

DEFAULT_DEPTH = 12
DEFAULT_BUDGET = 4000


class UnboundedVariable(Exception):
    def __init__(self, names):
        self.names = sorted(names)
        super().__init__("no bounds for: " + ", ".join(self.names))


@dataclass(frozen=True)
class Verdict:
    status: str  # "valid" | "refuted" | "unknown"
    witness: dict | None = None
    reason: str | None = None

    @property
    def valid(self):
        return self.status == "valid"

    @property
    def refuted(self):
        return self.status == "refuted"

    @property
    def unknown(self):
        return self.status == "unknown"

    def to_json(self):
        out = {"status": self.status}
        if self.witness is not None:
            out["witness"] = {k: str(v) for k, v in sorted(self.witness.items())}
        if self.reason:
            out["reason"] = self.reason
        return out


VALID = Verdict("valid")


def make_bounds(spec: Mapping) -> dict:
    """Accepts name -> (lo, hi) pairs or Intervals."""
    out = {}
    for k, v in spec.items():
        if isinstance(v, Interval):
            out[k] = v
        else:
            lo, hi = v
            if Fraction(lo) > Fraction(hi):
                raise ValueError(f"empty bounds for {k}")
            out[k] = Interval(lo, hi)
    return out


def combine(verdicts) -> Verdict:
    """Verdict of a conjunction of goals."""
    unknown = None
    for v in verdicts:
        if v.refuted:
            return v
        if v.unknown and unknown is None:
            unknown = v
    return unknown or VALID


def check_validity(p: Expr, bounds: Mapping, depth: int = DEFAULT_DEPTH,
                   budget: int = DEFAULT_BUDGET) -> Verdict:
    b = make_bounds(bounds)
    missing = free_vars(p) - set(b)
    if missing:
        raise UnboundedVariable(missing)
    goals = _split_goals(p)
    v = combine(_check_goal(g, b, depth, budget) for g in goals)
    for hook in _HOOKS:
        v = hook(p, b, v)
    return v


# Observers of every validity query, innermost last. Each one is called as
# hook(goal, bounds, verdict) and returns the verdict to use instead.
_HOOKS = []


@contextmanager
def query_hook(fn):
    _HOOKS.append(fn)
    try:
        yield fn
    finally:
        _HOOKS.remove(fn)


def _split_goals(p):
    """Validity of a conjunction is the conjunction of validities."""
    if isinstance(p, And):
        out = []
        for a in p.args:
            out.extend(_split_goals(a))
        return out
    if isinstance(p, Implies) and isinstance(p.right, And):
        return [g for a in p.right.args for g in _split_goals(Implies(p.left, a))]
    return [p]


def _syntactically_valid(p) -> bool:
    if p == TRUE:
        return True
    if isinstance(p, Implies):
        hyps = set(conjuncts(p.left))
        if p.right in hyps or p.right == TRUE:
            return True
        if p.left == FALSE:
            return True
    if isinstance(p, Or):
        lits = set(p.args)
        for a in p.args:
            if isinstance(a, Not) and a.arg in lits:
                return True
    return False


def _check_goal(p, box, depth, budget):
    if _syntactically_valid(p):
        return VALID
    target = _lift_cases(nnf(p, positive=False))
    fv = sorted(free_vars(p))
    start = {k: box[k] for k in fv}
    search = _Search(p, depth, budget)
    res = search.run(target, start)
    if res == "unsat":
        return VALID
    if isinstance(res, dict):
        return Verdict("refuted", witness=res)
    reason = _domain_trouble(p, start) or search.reason or "depth exhausted"
    return Verdict("unknown", reason=reason)


def _domain_trouble(p, box):
    """Name the partial operation that may be undefined somewhere in the box,
    since that is usually why the search could not settle the goal."""
    todo = [p]
    while todo:
        e = todo.pop()
        try:
            if isinstance(e, BinOp) and e.op == "/":
                d = eval_term(e.right, box)
                if d.lo <= 0 <= d.hi:
                    return f"DivisionByZeroRegion: divisor {show(e.right)} may be 0"
            if isinstance(e, Call) and e.fn == "sqrt":
                a = eval_term(e.args[0], box)
                if a.lo < 0:
                    return f"sqrt of {show(e.args[0])} may be negative"
        except DomainError:
            pass
        todo.extend(children(e))
    return None


class _Search:
    def __init__(self, goal, depth, budget):
        self.goal = goal
        self.depth = depth
        self.budget = budget
        self.nodes = 0
        self.reason = None

    def run(self, f, box):
        splits = {k: 0 for k in box}
        return self._solve(f, dict(box), splits)

    def _point(self, box):
        return {k: iv.mid for k, iv in box.items()}

    def _verify(self, env):
        # the witness must make the original goal false under exact evaluation
        pb = {k: Interval(v) for k, v in env.items()}
        return eval_bool(self.goal, pb) is False

    def _solve(self, f, box, splits):
        self.nodes += 1
        if self.nodes > self.budget:
            self.reason = "node budget exhausted"
            return "unknown"
        # propagate unit literals and simplify until stable
        for _ in range(8):
            f = _simplify(f, box)
            if f == FALSE:
                return "unsat"
            if f == TRUE:
                env = self._point(box)
                return env if self._verify(env) else self._split(f, box, splits)
            lits = [c for c in conjuncts(f) if isinstance(c, Cmp)]
            if _has_complementary(lits):
                return "unsat"
            changed = False
            try:
                for lit in lits:
                    changed |= contract(lit, box)
            except Empty:
                return "unsat"
            except DomainError:
                pass
            if not changed:
                break
        env = self._point(box)
        if eval_bool(f, {k: Interval(v) for k, v in env.items()}) is True and self._verify(env):
            return env
        exact = self._linear(f, box)
        if exact is not None:
            return exact
        disjunction = next((c for c in conjuncts(f) if isinstance(c, Or)), None)
        if disjunction is None:
            found = self._dive(f, box)
            if found is not None:
                return found
        if disjunction is not None:
            rest = [c for c in conjuncts(f) if c is not disjunction]
            unknown = False
            for d in disjunction.args:
                r = self._solve(conj(d, *rest), dict(box), dict(splits))
                if isinstance(r, dict):
                    return r
                if r == "unknown":
                    unknown = True
            return "unknown" if unknown else "unsat"
        return self._split(f, box, splits)

    def _linear(self, f, box):
        """Settle a conjunction of linear literals exactly, if it is one."""
        rows = []
        for c in conjuncts(f):
            r = rows_of(c) if isinstance(c, Cmp) else None
            if r is None:
                return None
            rows.extend(r)
        model = solve(rows, box)
        if model is False:
            return "unsat"
        if model is None:
            return None
        env = self._point(box)
        env.update(model)
        return env if self._verify(env) else None

    def _dive(self, f, box):
        """Greedy search for a model: fix variables one at a time to a
        candidate value and re-propagate. Cheap, incomplete."""
        lits = [c for c in conjuncts(f) if isinstance(c, Cmp)]
        cur = dict(box)
        order = sorted((k for k in free_vars(f) if k in cur), key=lambda k: (-cur[k].width, k))
        for k in order:
            iv = cur[k]
            placed = False
            for c in (iv.mid, iv.lo, iv.hi):
                trial = dict(cur)
                trial[k] = Interval(c)
                try:
                    for _ in range(4):
                        changed = False
                        for lit in lits:
                            changed |= contract(lit, trial)
                        if not changed:
                            break
                except Empty:
                    continue
                except DomainError:
                    pass
                cur = trial
                placed = True
                break
            if not placed:
                return None
        env = self._point(cur)
        if eval_bool(f, {k: Interval(v) for k, v in env.items()}) is True and self._verify(env):
            return env
        return None

    def _split(self, f, box, splits):
        names = [k for k in free_vars(f) if k in box and not box[k].is_point
                 and splits[k] < self.depth]
        if not names:
            if self.reason is None:
                self.reason = "depth exhausted"
            return "unknown"
        k = max(names, key=lambda n: (box[n].width, -splits[n], n))
        iv = box[k]
        m = iv.mid
        unknown = False
        for half in (Interval(iv.lo, m), Interval(m, iv.hi)):
            b2 = dict(box)
            b2[k] = half
            s2 = dict(splits)
            s2[k] += 1
            r = self._solve(f, b2, s2)
            if isinstance(r, dict):
                return r
            if r == "unknown":
                unknown = True
        return "unknown" if unknown else "unsat"


MAX_LIFTED = 8


def _partial_terms(e, out):
    if isinstance(e, Ite) or (isinstance(e, Call) and e.fn in ("min", "max", "abs")):
        out.append(e)
    for c in children(e):
        _partial_terms(c, out)
    return out


def _replace(e, old, new):
    if e == old:
        return new
    kids = children(e)
    if not kids:
        return e
    return rebuild(e, [_replace(c, old, new) for c in kids])


def _as_ite(t):
    if isinstance(t, Ite):
        return t
    if t.fn == "abs":
        a = t.args[0]
        return Ite(Cmp(">=", a, Num(Fraction(0))), a, Neg(a))
    a, b = t.args
    return Ite(Cmp("<=" if t.fn == "min" else ">=", a, b), a, b)


def _lift_cases(f):
    """Case-split ite/min/max/abs out of comparisons so every literal is a
    plain comparison of terms. Exact; skipped when it would blow up."""
    if len(_partial_terms(f, [])) > MAX_LIFTED:
        return f

    def go(g):
        if isinstance(g, And):
            return conj(*(go(a) for a in g.args))
        if isinstance(g, Or):
            return disj(*(go(a) for a in g.args))
        if not isinstance(g, Cmp):
            return g
        found = _partial_terms(g, [])
        if not found:
            return g
        t = _as_ite(found[0])
        yes = conj(go(nnf(t.cond)), go(_replace(g, found[0], t.then)))
        no = conj(go(nnf(t.cond, positive=False)), go(_replace(g, found[0], t.other)))
        return disj(yes, no)
    return go(f)


def _simplify(f, box):
    """Replace atoms whose truth is fixed on the box by constants."""
    if isinstance(f, BoolConst):
        return f
    if isinstance(f, Cmp):
        r = eval_bool(f, box)
        if r is None:
            return f
        return TRUE if r else FALSE
    if isinstance(f, And):
        return conj(*(_simplify(a, box) for a in f.args))
    if isinstance(f, Or):
        return disj(*(_simplify(a, box) for a in f.args))
    raise TypeError(f"unexpected node in NNF: {f!r}")


def _has_complementary(lits):
    seen = set(lits)
    for l in lits:
        if Cmp(NEGATED_CMP[l.op], l.left, l.right) in seen:
            return True
    return False


def is_satisfiable(p: Expr, bounds: Mapping, depth: int = DEFAULT_DEPTH,
                   budget: int = DEFAULT_BUDGET) -> Verdict:
    """Refuted(witness) here means p is satisfiable with that model;
    Valid means p is unsatisfiable. Thin wrapper over check_validity(not p)."""
    return check_validity(Not(p), bounds, depth, budget)
