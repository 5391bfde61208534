"""Domain types: physical interfaces, motion contracts, global and local
types, processes and whole systems.

Participants are plain strings. Every tree type is an immutable dataclass,
so structural equality and hashing come for free; equality up to recursive
unfolding is `equi_equal`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

from .logic.expr import Expr, Num, TRUE, Var, free_vars, show, substitute
from .logic.interval import fold_closed
from .logic.footprint import Box, Region, fp_substitute

SORTS = ("unit", "real", "bool", "point", "vector", "product")


class Mode(Enum):
    INTERRUPT = "interrupt"        # can be preempted by a message
    NONINTERRUPT = "noninterrupt"  # runs until its duration window

    @property
    def symbol(self):
        return "↯" if self is Mode.INTERRUPT else "⤳"


class NotRecursive(Exception):
    pass


@dataclass(frozen=True)
class PhysicalInterface:
    owner: str
    state_vars: tuple = ()
    input_vars: tuple = ()
    geom: Union[Box, Region, None] = None
    init: Expr = TRUE

    def qualified_state(self):
        return tuple(f"{self.owner}.{x}" for x in self.state_vars)


@dataclass(frozen=True)
class Refinement:
    sort: str = "unit"
    body: Expr = TRUE


@dataclass(frozen=True)
class Duration:
    lo: Expr
    hi: Optional[Expr] = None  # None is +infinity

    def __str__(self):
        return f"[{show(self.lo)}, {'inf' if self.hi is None else show(self.hi)}]"


@dataclass(frozen=True)
class MotionSpec:
    name: str
    owner: str
    params: tuple = ()          # ((name, sort), ...)
    pre: Expr = TRUE
    assume: Expr = TRUE
    guarantee: Expr = TRUE
    post: Expr = TRUE
    footprint: Union[Box, Region, None] = None
    duration: Duration = Duration(Num(Fraction(0)))
    mode: Mode = Mode.INTERRUPT
    trajectory: Optional[tuple] = None   # ((state var, expr), ...)

    @property
    def param_names(self):
        return tuple(p for p, _ in self.params)

    def instantiate(self, args) -> "MotionSpec":
        """Substitute parameter values; the result has no parameters."""
        args = tuple(args)
        if len(args) != len(self.params):
            raise ValueError(f"{self.owner}.{self.name} expects {len(self.params)} argument(s), got {len(args)}")
        if not args:
            return self
        m = dict(zip(self.param_names, args))
        traj = None
        if self.trajectory is not None:
            traj = tuple((x, substitute(e, m)) for x, e in self.trajectory)
        hi = None if self.duration.hi is None else fold_closed(substitute(self.duration.hi, m))
        return replace(
            self,
            params=(),
            pre=substitute(self.pre, m),
            assume=substitute(self.assume, m),
            guarantee=substitute(self.guarantee, m),
            post=substitute(self.post, m),
            footprint=None if self.footprint is None else fp_substitute(self.footprint, m),
            duration=Duration(fold_closed(substitute(self.duration.lo, m)), hi),
            trajectory=traj,
        )


@dataclass(frozen=True)
class MotionAtom:
    name: str
    args: tuple = ()

    def __str__(self):
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(show(a) for a in self.args)})"


@dataclass(frozen=True)
class MergedAtom:
    """The merge of several motion atoms of one participant (projection)."""
    parts: tuple

    def __str__(self):
        return " & ".join(str(p) for p in self.parts)


def merge_atoms(a, b):
    parts = []
    for x in (a, b):
        for p in (x.parts if isinstance(x, MergedAtom) else (x,)):
            if p not in parts:
                parts.append(p)
    if len(parts) == 1:
        return parts[0]
    parts.sort(key=str)
    return MergedAtom(tuple(parts))


# --- global types ----------------------------------------------------------

@dataclass(frozen=True)
class GMessage:
    sender: str
    receiver: str
    label: str
    guard: Expr = TRUE
    refinement: Refinement = Refinement()


@dataclass(frozen=True)
class GMotion:
    items: tuple                 # ((participant, MotionAtom), ...)
    regions: Optional[tuple] = None  # ((participant, footprint), ...) user annotation

    @property
    def executors(self):
        return tuple(p for p, _ in self.items)

    def atom_of(self, p):
        for q, a in self.items:
            if q == p:
                return a
        raise KeyError(p)

    def region_of(self, p):
        for q, fp in self.regions or ():
            if q == p:
                return fp
        return None


@dataclass(frozen=True)
class GPrefSeq:
    first: object
    second: object


@dataclass(frozen=True)
class GChoice:
    alts: tuple


@dataclass(frozen=True)
class GSep:
    left: object
    right: object
    partition: Optional[tuple] = None   # (fp_left, fp_right)


@dataclass(frozen=True)
class GSeq:
    prefix: object
    rest: object


@dataclass(frozen=True)
class GRecVar:
    name: str


@dataclass(frozen=True)
class GRec:
    var: str
    body: object


GPREFIX = (GMessage, GMotion, GPrefSeq, GChoice, GSep)
GTYPE = (GSeq, GRecVar, GRec)


def head_message(g):
    """First message of a choice alternative, and the remainder (or None)."""
    if isinstance(g, GMessage):
        return g, None
    if isinstance(g, GPrefSeq):
        m, rest = head_message(g.first)
        if m is None:
            return None, None
        if rest is None:
            return m, g.second
        return m, GPrefSeq(rest, g.second)
    return None, None


def participants_of(g) -> frozenset:
    if isinstance(g, GMessage):
        return frozenset((g.sender, g.receiver))
    if isinstance(g, GMotion):
        return frozenset(g.executors)
    if isinstance(g, GPrefSeq):
        return participants_of(g.first) | participants_of(g.second)
    if isinstance(g, GChoice):
        out = frozenset()
        for a in g.alts:
            out |= participants_of(a)
        return out
    if isinstance(g, GSep):
        return participants_of(g.left) | participants_of(g.right)
    if isinstance(g, GSeq):
        return participants_of(g.prefix) | participants_of(g.rest)
    if isinstance(g, GRecVar):
        return frozenset()
    if isinstance(g, GRec):
        return participants_of(g.body)
    raise TypeError(f"not a global type: {g!r}")


def _subst_g(g, name, repl):
    if isinstance(g, GRecVar):
        return repl if g.name == name else g
    if isinstance(g, GRec):
        if g.var == name:
            return g
        return GRec(g.var, _subst_g(g.body, name, repl))
    if isinstance(g, GSeq):
        return GSeq(g.prefix, _subst_g(g.rest, name, repl))
    return g


def unfold(g):
    """One unrolling of a recursive global or local type."""
    if isinstance(g, GRec):
        return _subst_g(g.body, g.var, g)
    if isinstance(g, LRec):
        return _subst_l(g.body, g.var, g)
    raise NotRecursive(f"not a recursive type: {type(g).__name__}")


def unfold_all(g):
    seen = set()
    while isinstance(g, (GRec, LRec)):
        if g in seen:
            raise ValueError("unguarded recursion")
        seen.add(g)
        g = unfold(g)
    return g


# --- local types -----------------------------------------------------------

@dataclass(frozen=True)
class SelectEntry:
    peer: str
    label: str
    cont: object
    guard: Expr = TRUE
    refinement: Refinement = Refinement()


@dataclass(frozen=True)
class BranchEntry:
    label: str
    cont: object
    refinement: Refinement = Refinement()


@dataclass(frozen=True)
class LMotion:
    atom: object
    cont: object


@dataclass(frozen=True)
class LSelect:
    entries: tuple


@dataclass(frozen=True)
class LBranch:
    peer: str
    entries: tuple


@dataclass(frozen=True)
class LBranchDefault:
    peer: str
    entries: tuple
    atom: object
    default: object


@dataclass(frozen=True)
class LRec:
    var: str
    body: object


@dataclass(frozen=True)
class LRecVar:
    name: str


def _subst_l(t, name, repl):
    if isinstance(t, LRecVar):
        return repl if t.name == name else t
    if isinstance(t, LRec):
        if t.var == name:
            return t
        return LRec(t.var, _subst_l(t.body, name, repl))
    if isinstance(t, LMotion):
        return LMotion(t.atom, _subst_l(t.cont, name, repl))
    if isinstance(t, LSelect):
        return LSelect(tuple(replace(e, cont=_subst_l(e.cont, name, repl)) for e in t.entries))
    if isinstance(t, LBranch):
        return LBranch(t.peer, tuple(replace(e, cont=_subst_l(e.cont, name, repl)) for e in t.entries))
    if isinstance(t, LBranchDefault):
        return LBranchDefault(
            t.peer,
            tuple(replace(e, cont=_subst_l(e.cont, name, repl)) for e in t.entries),
            t.atom,
            _subst_l(t.default, name, repl),
        )
    raise TypeError(f"not a local type: {t!r}")


def local_children(t):
    if isinstance(t, LMotion):
        return (t.cont,)
    if isinstance(t, LSelect):
        return tuple(e.cont for e in t.entries)
    if isinstance(t, LBranch):
        return tuple(e.cont for e in t.entries)
    if isinstance(t, LBranchDefault):
        return tuple(e.cont for e in t.entries) + (t.default,)
    if isinstance(t, LRec):
        return (t.body,)
    return ()


def equi_equal(a, b) -> bool:
    """Equality of (global or local) types up to unfolding of recursion,
    decided by a bisimulation with a visited-pair set."""
    seen = set()
    todo = [(a, b)]
    while todo:
        x, y = todo.pop()
        x, y = unfold_all(x), unfold_all(y)
        if x is y or (x, y) in seen:
            continue
        seen.add((x, y))
        pairs = _shallow_pairs(x, y)
        if pairs is None:
            return False
        todo.extend(pairs)
    return True


def _shallow_pairs(x, y):
    if type(x) is not type(y):
        return None
    if isinstance(x, LMotion):
        return [(x.cont, y.cont)] if x.atom == y.atom else None
    if isinstance(x, LSelect):
        kx = {(e.peer, e.label): e for e in x.entries}
        ky = {(e.peer, e.label): e for e in y.entries}
        if kx.keys() != ky.keys():
            return None
        out = []
        for k, e in kx.items():
            f = ky[k]
            if e.guard != f.guard or e.refinement != f.refinement:
                return None
            out.append((e.cont, f.cont))
        return out
    if isinstance(x, (LBranch, LBranchDefault)):
        if x.peer != y.peer:
            return None
        kx = {e.label: e for e in x.entries}
        ky = {e.label: e for e in y.entries}
        if kx.keys() != ky.keys():
            return None
        out = []
        for k, e in kx.items():
            if e.refinement != ky[k].refinement:
                return None
            out.append((e.cont, ky[k].cont))
        if isinstance(x, LBranchDefault):
            if x.atom != y.atom:
                return None
            out.append((x.default, y.default))
        return out
    if isinstance(x, LRecVar):
        return [] if x == y else None
    if isinstance(x, GSeq):
        return [(x.rest, y.rest)] if _prefix_equal(x.prefix, y.prefix) else None
    if isinstance(x, GRecVar):
        return [] if x == y else None
    return None


def _prefix_equal(p, q):
    return p == q


# --- processes -------------------------------------------------------------

@dataclass(frozen=True)
class RecvBranch:
    label: str
    var: Optional[str]
    cont: object


@dataclass(frozen=True)
class PSend:
    to: str
    label: str
    expr: Optional[Expr]
    cont: object


@dataclass(frozen=True)
class PRecv:
    sender: str
    branches: tuple


@dataclass(frozen=True)
class PRecvDefault:
    sender: str
    branches: tuple
    atom: MotionAtom
    default: object


@dataclass(frozen=True)
class PMotion:
    atom: MotionAtom
    cont: object


@dataclass(frozen=True)
class PCond:
    cond: Expr
    then: object
    other: object


@dataclass(frozen=True)
class PRec:
    var: str
    body: object


@dataclass(frozen=True)
class PVar:
    name: str


def unfold_process(p):
    if not isinstance(p, PRec):
        raise NotRecursive("not a recursive process")
    return _subst_p(p.body, p.var, p)


def _subst_p(p, name, repl):
    if isinstance(p, PVar):
        return repl if p.name == name else p
    if isinstance(p, PRec):
        return p if p.var == name else PRec(p.var, _subst_p(p.body, name, repl))
    if isinstance(p, PSend):
        return replace(p, cont=_subst_p(p.cont, name, repl))
    if isinstance(p, PRecv):
        return PRecv(p.sender, tuple(replace(b, cont=_subst_p(b.cont, name, repl)) for b in p.branches))
    if isinstance(p, PRecvDefault):
        return PRecvDefault(p.sender, tuple(replace(b, cont=_subst_p(b.cont, name, repl)) for b in p.branches),
                            p.atom, _subst_p(p.default, name, repl))
    if isinstance(p, PMotion):
        return PMotion(p.atom, _subst_p(p.cont, name, repl))
    if isinstance(p, PCond):
        return PCond(p.cond, _subst_p(p.then, name, repl), _subst_p(p.other, name, repl))
    raise TypeError(f"not a process: {p!r}")


def subst_process_values(p, m):
    """Substitute term variables (received payloads) by expressions,
    respecting receive binders."""
    if not m:
        return p
    if isinstance(p, PVar):
        return p
    if isinstance(p, PRec):
        return PRec(p.var, subst_process_values(p.body, m))
    if isinstance(p, PSend):
        e = None if p.expr is None else substitute(p.expr, m)
        return PSend(p.to, p.label, e, subst_process_values(p.cont, m))
    if isinstance(p, (PRecv, PRecvDefault)):
        bs = []
        for b in p.branches:
            inner = {k: v for k, v in m.items() if k != b.var}
            bs.append(replace(b, cont=subst_process_values(b.cont, inner)))
        if isinstance(p, PRecv):
            return PRecv(p.sender, tuple(bs))
        atom = MotionAtom(p.atom.name, tuple(substitute(a, m) for a in p.atom.args))
        return PRecvDefault(p.sender, tuple(bs), atom, subst_process_values(p.default, m))
    if isinstance(p, PMotion):
        atom = MotionAtom(p.atom.name, tuple(substitute(a, m) for a in p.atom.args))
        return PMotion(atom, subst_process_values(p.cont, m))
    if isinstance(p, PCond):
        return PCond(substitute(p.cond, m), subst_process_values(p.then, m), subst_process_values(p.other, m))
    raise TypeError(f"not a process: {p!r}")


# --- systems ---------------------------------------------------------------

@dataclass
class System:
    name: str
    participants: dict = field(default_factory=dict)   # name -> PhysicalInterface
    motions: dict = field(default_factory=dict)        # (owner, name) -> MotionSpec
    global_type: object = None
    processes: dict = field(default_factory=dict)      # name -> process
    bounds: dict = field(default_factory=dict)         # var -> (lo, hi)

    def spec(self, owner: str, atom) -> MotionSpec:
        """Resolve a motion atom of `owner` to an instantiated spec."""
        if isinstance(atom, MergedAtom):
            from .projection import merge_motion
            specs = [self.spec(owner, a) for a in atom.parts]
            out = specs[0]
            for s in specs[1:]:
                out = merge_motion(out, s)
            return out
        try:
            base = self.motions[(owner, atom.name)]
        except KeyError:
            raise KeyError(f"unknown motion {owner}.{atom.name}") from None
        return base.instantiate(atom.args)

    def input_source(self, owner: str, w: str) -> str:
        """The participant whose state variable feeds input `w` of `owner`."""
        hits = [p for p, iface in self.participants.items() if p != owner and w in iface.state_vars]
        if len(hits) != 1:
            raise KeyError(f"input {owner}.{w} is connected to {len(hits)} state variables")
        return hits[0]

    def bounds_for(self, extra=None) -> dict:
        out = dict(self.bounds)
        if extra:
            out.update(extra)
        return out
