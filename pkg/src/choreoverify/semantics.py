"""Small-step execution of a session, with two monitors.

The subject-reduction monitor consumes every step from the global type and
raises an alarm when a step has no counterpart. The collision monitor
checks that the shapes of the participants stay apart at every sampled
instant. Motion contracts are also checked along the declared
trajectories. Everything runs on exact rationals.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .logic.checker import is_satisfiable
from .logic.expr import Cmp, Num, Var, conj, conjuncts, free_vars, show, substitute
from .logic.footprint import Box, as_pred
from .logic.interval import eval_term
from .logic.pointeval import EvalError, compile_expr
from .model import (
    GChoice, GMessage, GMotion, GPrefSeq, GRec, GRecVar, GSep, GSeq, Mode,
    PCond, PMotion, PRec, PRecv, PRecvDefault, PSend, PVar,
    head_message, subst_process_values, unfold, unfold_process,
)
from .syntax.parser import NONDET
from .wellformed import build_tree, check_unique_minimal_communication, happens_before

DEFAULT_DT = Fraction(1, 100)


# --- step labels -----------------------------------------------------------

@dataclass(frozen=True)
class Comm:
    sender: str
    label: str
    value: Optional[Fraction]
    receiver: str

    def to_json(self):
        out = {"kind": "comm", "from": self.sender, "label": self.label, "to": self.receiver}
        if self.value is not None:
            out["value"] = str(self.value)
        return out


@dataclass(frozen=True)
class MotionAdvance:
    moving: tuple       # ((participant, atom text, elapsed before), ...)
    dt: Fraction

    @property
    def executors(self):
        return tuple(p for p, _, _ in self.moving)

    def to_json(self):
        return {"kind": "advance", "executors": list(self.executors), "dt": str(self.dt)}


@dataclass(frozen=True)
class Tau:
    rule: str           # traj-base | default | non-interrupt
    participant: str
    detail: str = ""

    def to_json(self):
        return {"kind": "tau", "rule": self.rule, "participant": self.participant, "detail": self.detail}


@dataclass(frozen=True)
class CondTaken:
    participant: str
    branch: str

    def to_json(self):
        return {"kind": "cond", "participant": self.participant, "branch": self.branch}


# --- annotated global types ------------------------------------------------

@dataclass(frozen=True)
class AMotion:
    """A joint motion in progress: elapsed time and its minimal sender."""
    motion: GMotion
    t: Fraction
    sender: Optional[str]

    @property
    def executors(self):
        return self.motion.executors


class ConsumptionError(Exception):
    def __init__(self, label, reason, g=None):
        self.label = label
        self.reason = reason
        self.g = g
        super().__init__(f"cannot consume {_label_text(label)}: {reason}")


def _label_text(label):
    if isinstance(label, Comm):
        return f"{label.sender}->{label.receiver}:{label.label}"
    if isinstance(label, MotionAdvance):
        return f"advance {', '.join(label.executors)} by {label.dt}"
    return str(label)


def _pt(g) -> frozenset:
    if g is None:
        return frozenset()
    if isinstance(g, GMessage):
        return frozenset((g.sender, g.receiver))
    if isinstance(g, (GMotion, AMotion)):
        return frozenset(g.executors)
    if isinstance(g, GPrefSeq):
        return _pt(g.first) | _pt(g.second)
    if isinstance(g, GChoice):
        out = frozenset()
        for a in g.alts:
            out |= _pt(a)
        return out
    if isinstance(g, GSep):
        return _pt(g.left) | _pt(g.right)
    raise TypeError(f"not a prefix: {g!r}")


def _seq(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return GPrefSeq(a, b)


def _sep(a, b, partition):
    if a is None:
        return b
    if b is None:
        return a
    return GSep(a, b, partition)


def _gseq(prefix, rest):
    return rest if prefix is None else GSeq(prefix, rest)


DONE, SKIP, BLOCK = "done", "skip", "block"


class _Motions:
    """Specs and compiled predicates of motion atoms, cached."""

    def __init__(self, system):
        self.system = system
        self.cache = {}
        self.by_id = {}

    def get(self, owner, atom):
        fast = self.by_id.get((owner, id(atom)))
        if fast is not None and fast[0] is atom:
            return fast[1]
        key = (owner, atom)
        hit = self.cache.get(key)
        if hit is None:
            hit = _CompiledSpec(self.system.spec(owner, atom))
            self.cache[key] = hit
        self.by_id[(owner, id(atom))] = (atom, hit)
        return hit


class _CompiledSpec:
    def __init__(self, spec):
        self.spec = spec
        self.mode = spec.mode
        self.pre = compile_expr(spec.pre)
        self.assume = compile_expr(spec.assume)
        self.guarantee = compile_expr(spec.guarantee)
        self.post = compile_expr(spec.post)
        self.lo = _upper(spec.duration.lo)
        self.hi = None if spec.duration.hi is None else _lower(spec.duration.hi)
        self.traj = None
        if spec.trajectory is not None:
            owner = spec.owner
            self.traj = tuple((x if "." in x else f"{owner}.{x}", compile_expr(e)) for x, e in spec.trajectory)
        self.fp = _compile_shape(spec.footprint)

    def in_d(self, t):
        return self.lo <= t and (self.hi is None or t <= self.hi)


def _upper(e):
    # smallest rational we are sure is not below the exact value
    return eval_term(e, {}).hi


def _lower(e):
    return eval_term(e, {}).lo


def _compile_shape(fp):
    if fp is None:
        return None
    if isinstance(fp, Box):
        return ("box", tuple(compile_expr(s) for s in fp.sides()))
    return ("region", fp)


class GlobalConsumer:
    """Consumption of steps by an annotated global type."""

    def __init__(self, system, senders: dict):
        self.system = system
        self.senders = senders      # id(GMotion) -> minimal sender
        self.motions = _Motions(system)

    def annotate(self, m: GMotion):
        return AMotion(m, Fraction(0), self.senders.get(id(m)))

    def consume(self, g, label):
        if isinstance(label, Comm):
            enabled = {label.sender}
            st, out = self._type_msg(g, label, enabled, set())
            if st != DONE:
                raise ConsumptionError(label, "no matching communication is enabled", g)
            return out
        if isinstance(label, MotionAdvance):
            return self._advance(g, label)
        return g

    # messages

    def _type_msg(self, g, x, enabled, unfolded):
        if isinstance(g, GRec):
            if id(g) in unfolded:
                return BLOCK, g
            unfolded.add(id(g))
            g = unfold(g)
        if not isinstance(g, GSeq):
            return BLOCK, g
        st, p2 = self._msg(g.prefix, x, enabled)
        if st == DONE:
            return DONE, _gseq(p2, g.rest)
        if st == BLOCK:
            return BLOCK, g
        st, r2 = self._type_msg(g.rest, x, enabled, unfolded)
        if st == DONE:
            return DONE, _gseq(p2, r2)
        return BLOCK, g

    def _msg(self, g, x, enabled):
        ends = {x.sender, x.receiver}
        if g is None:
            return SKIP, None
        if isinstance(g, GMessage):
            if (g.sender, g.label, g.receiver) == (x.sender, x.label, x.receiver):
                return DONE, None
            return (BLOCK if ends & {g.sender, g.receiver} else SKIP), g
        if isinstance(g, GChoice):
            heads = [head_message(a) for a in g.alts]
            for m, rest in heads:
                if (m.sender, m.label, m.receiver) == (x.sender, x.label, x.receiver):
                    return DONE, rest
            if any(ends & {m.sender, m.receiver} for m, _ in heads):
                return BLOCK, g
            # an independent message may happen inside every alternative
            results = [self._msg(rest, x, enabled) for _, rest in heads]
            if all(st == SKIP for st, _ in results):
                return SKIP, g
            if all(st == DONE for st, _ in results):
                return DONE, GChoice(tuple(_seq(m, r) for (m, _), (_, r) in zip(heads, results)))
            return BLOCK, g
        if isinstance(g, (GMotion, AMotion)):
            if not ends & set(g.executors):
                return SKIP, g
            if self._removable(g, enabled):
                return SKIP, None
            return BLOCK, g
        if isinstance(g, GPrefSeq):
            st, a2 = self._msg(g.first, x, enabled)
            if st == DONE:
                return DONE, _seq(a2, g.second)
            if st == BLOCK:
                return BLOCK, g
            st, b2 = self._msg(g.second, x, enabled)
            if st == BLOCK:
                return BLOCK, g
            return st, _seq(a2, b2)
        if isinstance(g, GSep):
            st, l2 = self._msg(g.left, x, enabled)
            if st == DONE:
                return DONE, _sep(l2, g.right, g.partition)
            if st == BLOCK:
                return BLOCK, g
            st, r2 = self._msg(g.right, x, enabled)
            if st == BLOCK:
                return BLOCK, g
            return st, _sep(l2, r2, g.partition)
        raise TypeError(f"not a prefix: {g!r}")

    def _removable(self, g, enabled):
        a = g if isinstance(g, AMotion) else self.annotate(g)
        s = a.sender
        specs = {p: self.motions.get(p, atom) for p, atom in a.motion.items}
        if s in specs:
            mine = specs[s]
            all_interrupt = all(c.mode is Mode.INTERRUPT for c in specs.values())
            if mine.in_d(a.t) and (mine.mode is Mode.NONINTERRUPT or all_interrupt):
                enabled.add(s)
                return True
            return False
        if s in enabled and all(c.in_d(a.t) for c in specs.values()):
            return True
        return False

    # time

    def _advance(self, g, label):
        moving = {p: (atom, t) for p, atom, t in label.moving}
        covered, errors = {}, []
        out = self._adv_type(g, frozenset(), moving, label.dt, covered, errors, set())
        missing = sorted(set(moving) - set(covered))
        if missing:
            errors.append(f"no pending motion for {', '.join(missing)}")
        if errors:
            raise ConsumptionError(label, "; ".join(errors), g)
        return out

    def _adv_type(self, g, blocked, moving, dt, covered, errors, unfolded):
        if isinstance(g, GRec):
            if id(g) in unfolded:
                return g
            unfolded.add(id(g))
            u = unfold(g)
            v = self._adv_type(u, blocked, moving, dt, covered, errors, unfolded)
            return g if v is u else v
        if not isinstance(g, GSeq):
            return g
        p2 = self._adv(g.prefix, blocked, moving, dt, covered, errors)
        left = blocked | _pt(p2)
        if set(moving) - set(covered) - left:
            r2 = self._adv_type(g.rest, left, moving, dt, covered, errors, unfolded)
        else:
            r2 = g.rest
        if p2 is g.prefix and r2 is g.rest:
            return g
        return GSeq(p2, r2)

    def _adv(self, g, blocked, moving, dt, covered, errors):
        if g is None or isinstance(g, (GMessage, GChoice)):
            return g
        if isinstance(g, (GMotion, AMotion)):
            ex = g.executors
            if set(ex) & blocked:
                return g
            a = g if isinstance(g, AMotion) else self.annotate(g)
            for p, atom in a.motion.items:
                if p not in moving:
                    errors.append(f"{p} is not moving but {_motion_text(a.motion)} is pending")
                    return g
                have_atom, t = moving[p]
                if t != a.t:
                    errors.append(f"{p} has run for {t}, the type for {a.t}")
                if have_atom != str(atom) and str(atom) not in have_atom:
                    errors.append(f"{p} runs {have_atom}, the type expects {atom}")
                if p in covered:
                    errors.append(f"{p} appears in two pending motions")
                covered[p] = a
            t2 = a.t + dt
            for p, atom in a.motion.items:
                c = self.motions.get(p, atom)
                if c.hi is not None and t2 > c.hi:
                    errors.append(f"{p}:{atom} would exceed its duration window")
            return AMotion(a.motion, t2, a.sender)
        if isinstance(g, GPrefSeq):
            a2 = self._adv(g.first, blocked, moving, dt, covered, errors)
            b2 = self._adv(g.second, blocked | _pt(a2), moving, dt, covered, errors)
            if a2 is g.first and b2 is g.second:
                return g
            return GPrefSeq(a2, b2)
        if isinstance(g, GSep):
            l2 = self._adv(g.left, blocked, moving, dt, covered, errors)
            r2 = self._adv(g.right, blocked, moving, dt, covered, errors)
            if l2 is g.left and r2 is g.right:
                return g
            return GSep(l2, r2, g.partition)
        raise TypeError(f"not a prefix: {g!r}")


def _motion_text(m):
    return "dt<" + ", ".join(f"{p}: {a}" for p, a in m.items) + ">"


def minimal_senders(system) -> dict:
    """id(GMotion) -> unique minimal sender, from the well-formedness analysis."""
    tree = build_tree(system.global_type)
    hb = happens_before(tree)
    by_path, _, _ = check_unique_minimal_communication(tree, hb)
    out = {}
    for n in tree.primary_motions():
        if n.path in by_path:
            out[id(n.event)] = by_path[n.path][0]
    return out


def consume(system, g, label, senders=None):
    if senders is None:
        senders = minimal_senders(system)
    return GlobalConsumer(system, senders).consume(g, label)


# --- configurations --------------------------------------------------------

@dataclass(frozen=True)
class Running:
    atom: object
    t: Fraction
    cont: object


@dataclass
class Config:
    procs: dict             # participant -> process term (continuation when running)
    running: dict           # participant -> Running
    stores: dict            # qualified state variable -> Fraction
    time: Fraction
    g: object               # annotated global type

    def copy(self, **kw):
        c = Config(dict(self.procs), dict(self.running), dict(self.stores), self.time, self.g)
        for k, v in kw.items():
            setattr(c, k, v)
        return c


class StuckDetected(Exception):
    pass


class TrajectoryMissing(Exception):
    pass


def _head(p):
    while isinstance(p, PRec):
        p = unfold_process(p)
    return p


def initial_stores(system) -> dict:
    out = {}
    for p, iface in sorted(system.participants.items()):
        pinned = {}
        for c in conjuncts(iface.init):
            if isinstance(c, Cmp) and c.op == "==":
                if isinstance(c.left, Var) and isinstance(c.right, Num):
                    pinned[c.left.name] = c.right.value
                elif isinstance(c.right, Var) and isinstance(c.left, Num):
                    pinned[c.right.name] = c.left.value
        for x in iface.qualified_state():
            if x in pinned:
                out[x] = pinned[x]
            elif x in system.bounds:
                lo, hi = system.bounds[x]
                out[x] = (Fraction(lo) + Fraction(hi)) / 2
            else:
                out[x] = Fraction(0)
    return out


class Machine:
    """Steps of a whole session."""

    def __init__(self, system, senders=None):
        self.system = system
        self.motions = _Motions(system)
        self.consumer = GlobalConsumer(system, senders if senders is not None else minimal_senders(system))
        self.names = sorted(system.processes)
        self.geoms = {p: _compile_shape(i.geom) for p, i in system.participants.items() if i.geom is not None}
        self.geom_vars = {p: i.qualified_state() for p, i in system.participants.items()}
        self._boxes = {}
        self._exprs = {}

    def initial(self) -> Config:
        procs = {p: self.system.processes[p] for p in self.names}
        return Config(procs, {}, initial_stores(self.system), Fraction(0), self.system.global_type)

    def _eval(self, e, env):
        f = self._exprs.get(id(e))
        if f is None:
            f = (e, compile_expr(e))
            self._exprs[id(e)] = f
        return f[1](env)

    def _env(self, c, clock=None):
        env = dict(c.stores)
        if clock is not None:
            env["clock"] = clock
        return env

    # enabled steps

    def enabled_steps(self, c: Config, dt=DEFAULT_DT):
        out = []
        env = self._env(c)
        for p in self.names:
            if p in c.running:
                r = c.running[p]
                spec = self.motions.get(p, r.atom)
                if spec.mode is Mode.NONINTERRUPT and spec.in_d(r.t) and spec.post(self._env(c, r.t)):
                    running = dict(c.running)
                    del running[p]
                    procs = dict(c.procs)
                    procs[p] = r.cont
                    out.append((Tau("non-interrupt", p, str(r.atom)), c.copy(running=running, procs=procs)))
                continue
            h = _head(c.procs[p])
            if isinstance(h, PSend):
                hit = self._receive(c, h.to, p, h.label)
                if hit is not None:
                    value = None if h.expr is None else self._eval(h.expr, env)
                    out.append(self._comm(c, p, h, value, hit))
            elif isinstance(h, PMotion):
                out.append((Tau("traj-base", p, str(h.atom)), self._start(c, p, h.atom, h.cont)))
            elif isinstance(h, PRecvDefault):
                out.append((Tau("default", p, str(h.atom)), self._start(c, p, h.atom, h.default)))
            elif isinstance(h, PCond):
                if h.cond == Var(NONDET):
                    out.append((CondTaken(p, "then"), self._set(c, p, h.then)))
                    out.append((CondTaken(p, "else"), self._set(c, p, h.other)))
                else:
                    yes = bool(self._eval(h.cond, env))
                    out.append((CondTaken(p, "then" if yes else "else"),
                                self._set(c, p, h.then if yes else h.other)))
        adv = self._advance_step(c, dt)
        if adv is not None:
            out.append(adv)
        return out

    def _set(self, c, p, proc):
        procs = dict(c.procs)
        procs[p] = proc
        return c.copy(procs=procs)

    def _receive(self, c, q, p, label):
        """How q can take `label` from p now: (interrupted?, branch, recv term) or None."""
        if q not in c.procs:
            return None
        if q in c.running:
            r = c.running[q]
            spec = self.motions.get(q, r.atom)
            if spec.mode is not Mode.INTERRUPT or not spec.in_d(r.t):
                return None
            if not spec.post(self._env(c, r.t)):
                return None
            h = _head(r.cont)
            interrupted = True
        else:
            h = _head(c.procs[q])
            interrupted = False
        if not isinstance(h, (PRecv, PRecvDefault)) or h.sender != p:
            return None
        for b in h.branches:
            if b.label == label:
                return interrupted, b
        return None

    def _comm(self, c, p, send, value, hit):
        interrupted, branch = hit
        q = send.to
        procs = dict(c.procs)
        running = dict(c.running)
        procs[p] = send.cont
        cont = branch.cont
        if branch.var is not None and value is not None:
            cont = subst_process_values(cont, {branch.var: Num(value)})
        procs[q] = cont
        if interrupted:
            del running[q]
        return Comm(p, send.label, value, q), c.copy(procs=procs, running=running)

    def _start(self, c, p, atom, cont):
        running = dict(c.running)
        running[p] = Running(atom, Fraction(0), cont)
        procs = dict(c.procs)
        procs[p] = cont
        return c.copy(running=running, procs=procs)

    def _advance_step(self, c, dt):
        if not c.running or set(c.running) != set(self.names):
            return None
        step = Fraction(dt)
        for p, r in c.running.items():
            spec = self.motions.get(p, r.atom)
            if r.t < spec.lo:
                step = min(step, spec.lo - r.t)
            if spec.hi is not None:
                if r.t >= spec.hi:
                    return None
                step = min(step, spec.hi - r.t)
        moving = tuple((p, str(r.atom), r.t) for p, r in sorted(c.running.items()))
        stores = dict(c.stores)
        running = {}
        for p, r in c.running.items():
            spec = self.motions.get(p, r.atom)
            if spec.traj is None:
                raise TrajectoryMissing(f"{p}:{r.atom} has no trajectory")
            env = dict(c.stores)
            env["clock"] = r.t + step
            for x, f in spec.traj:
                stores[x] = f(env)
            running[p] = replace(r, t=r.t + step)
        return MotionAdvance(moving, step), c.copy(stores=stores, running=running, time=c.time + step)

    # monitors

    def shape_box(self, p, stores):
        shape = self.geoms.get(p)
        if shape is None or shape[0] != "box":
            return None
        key = (p, tuple(stores[x] for x in self.geom_vars[p]))
        box = self._boxes.get(key)
        if box is None:
            box = tuple(f(stores) for f in shape[1])
            if len(self._boxes) > 4096:
                self._boxes.clear()
            self._boxes[key] = box
        return box

    def collisions(self, before: Config, after: Config, dt):
        """Pairs whose shapes meet during the last quantum; exact when both
        shapes move affinely, else at the end point."""
        out = []
        names = sorted(self.geoms)
        moved = before.time != after.time
        shapes = {}
        for p in names:
            b1 = self.shape_box(p, after.stores)
            if b1 is None:
                shapes[p] = None
                continue
            b0 = self.shape_box(p, before.stores) if moved else b1
            affine = False
            if b0 == b1:
                affine = True
            else:
                mid = self._midpoint_stores(p, before, after)
                if mid is not None:
                    bm = self.shape_box(p, mid)
                    affine = all(m * 2 == x + y for m, x, y in zip(bm, b0, b1))
            shapes[p] = (b0, b1, affine)
        for i, p in enumerate(names):
            for q in names[i + 1:]:
                hit = self._pair_contact(p, q, shapes, before, after)
                if hit is not None:
                    out.append({"kind": "Collision", "participants": [p, q], "time": str(hit)})
        return out

    def _pair_contact(self, p, q, shapes, before, after):
        sp, sq = shapes[p], shapes[q]
        if sp is None or sq is None:
            return after.time if self._region_meet(p, q, after.stores) else None
        (a0, a1, fa), (c0, c1, fc) = sp, sq
        if fa and fc and before.time != after.time and not (a0 == a1 and c0 == c1):
            if not _boxes_meet(_hull(a0, a1), _hull(c0, c1)):
                return None
            s = _first_contact(a0, a1, c0, c1)
            if s is None:
                return None
            return before.time + s * (after.time - before.time)
        if _boxes_meet(a1, c1):
            return after.time
        return None

    def _midpoint_stores(self, p, before, after):
        r = after.running.get(p)
        if r is None or p not in before.running:
            return None
        spec = self.motions.get(p, r.atom)
        if spec.traj is None:
            return None
        stores = dict(before.stores)
        env = dict(before.stores)
        env["clock"] = (before.running[p].t + r.t) / 2
        for x, f in spec.traj:
            stores[x] = f(env)
        return stores

    def _region_meet(self, p, q, stores):
        ip, iq = self.system.participants[p], self.system.participants[q]
        m = {k: Num(v) for k, v in stores.items()}
        goal = substitute(conj(as_pred(ip.geom), as_pred(iq.geom)), m)
        v = is_satisfiable(goal, self.system.bounds_for())
        return v.refuted   # a witness point lies in both

    def conformance(self, c: Config, started=()):
        """Contract checks along the declared trajectories at this instant."""
        out = []
        for p, r in sorted(c.running.items()):
            spec = self.motions.get(p, r.atom)
            env = self._env(c, r.t)
            try:
                if p in started and not spec.pre(env):
                    out.append(_alarm("PreconditionViolated", p, r))
                if not spec.assume(env):
                    out.append(_alarm("AssumptionViolated", p, r))
                if not spec.guarantee(env):
                    out.append(_alarm("GuaranteeViolated", p, r))
                if p in started and spec.traj is not None:
                    e0 = dict(env)
                    if any(f(e0) != c.stores[x] for x, f in spec.traj):
                        out.append(_alarm("TrajectoryDiscontinuity", p, r))
                box = self.shape_box(p, c.stores)
                if box is not None and spec.fp is not None and spec.fp[0] == "box":
                    fp = tuple(f(env) for f in spec.fp[1])
                    if not _box_within(box, fp):
                        out.append(_alarm("FootprintEscaped", p, r))
            except EvalError as exc:
                out.append(dict(_alarm("EvaluationError", p, r), detail=str(exc)))
        return out


def _alarm(kind, p, r):
    return {"kind": kind, "participant": p, "motion": str(r.atom), "elapsed": str(r.t)}


def _boxes_meet(a, b):
    return all(a[2 * k] <= b[2 * k + 1] and b[2 * k] <= a[2 * k + 1] for k in range(3))


def _hull(a, b):
    return tuple(min(x, y) if k % 2 == 0 else max(x, y) for k, (x, y) in enumerate(zip(a, b)))


def _box_within(inner, outer):
    return all(outer[2 * k] <= inner[2 * k] and inner[2 * k + 1] <= outer[2 * k + 1] for k in range(3))


def _first_contact(a0, a1, b0, b1):
    """Boxes moving linearly from a0 to a1 and b0 to b1 over s in [0, 1]:
    the least s at which they meet, or None."""
    lo, hi = Fraction(0), Fraction(1)
    for k in range(3):
        # a.lo <= b.hi and b.lo <= a.hi, each of the form c0 + c1 s >= 0
        for (u0, u1), (v0, v1) in (((b0[2 * k + 1], b1[2 * k + 1]), (a0[2 * k], a1[2 * k])),
                                   ((a0[2 * k + 1], a1[2 * k + 1]), (b0[2 * k], b1[2 * k]))):
            c0 = u0 - v0
            c1 = (u1 - v1) - c0
            if c1 == 0:
                if c0 < 0:
                    return None
                continue
            root = -c0 / c1
            if c1 > 0:
                lo = max(lo, root)
            else:
                hi = min(hi, root)
            if lo > hi:
                return None
    return lo


# --- simulation ------------------------------------------------------------

@dataclass
class TraceRecord:
    seed: int
    dt: Fraction
    records: list = field(default_factory=list)
    alarms: list = field(default_factory=list)
    steps: int = 0

    @property
    def ok(self):
        return not self.alarms

    def alarm_kinds(self):
        return sorted({a["kind"] for a in self.alarms})

    def lines(self):
        for r in self.records:
            yield json.dumps(r, sort_keys=True)

    def digest(self):
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def summary(self):
        return {"seed": self.seed, "dt": str(self.dt), "steps": self.steps,
                "alarms": self.alarms, "digest": self.digest()}


class _Interner:
    def __init__(self):
        self.ids = {}
        self.keep = []

    def __call__(self, obj):
        k = id(obj)
        if k not in self.ids:
            self.ids[k] = len(self.ids)
            self.keep.append(obj)
        return self.ids[k]


def _config_digest(c: Config, intern):
    parts = [str(c.time)]
    for p in sorted(c.procs):
        r = c.running.get(p)
        parts.append(f"{p}:{intern(c.procs[p])}:{'' if r is None else f'{r.atom}@{r.t}'}")
    parts.extend(f"{k}={v}" for k, v in sorted(c.stores.items()))
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


def simulate(system, seed=0, dt=DEFAULT_DT, max_steps=1000, record_stores=True,
             senders=None) -> TraceRecord:
    dt = Fraction(dt)
    rng = random.Random(seed)
    m = Machine(system, senders)
    c = m.initial()
    trace = TraceRecord(seed, dt)
    intern = _Interner()
    initial = m.collisions(c, c, dt)
    if initial:
        trace.alarms.extend(initial)
        return trace
    for step in range(max_steps):
        try:
            steps = m.enabled_steps(c, dt)
        except TrajectoryMissing as exc:
            trace.alarms.append({"kind": "TrajectoryMissing", "detail": str(exc), "step": step})
            break
        if not steps:
            trace.alarms.append({"kind": "StuckDetected", "step": step, "time": str(c.time)})
            break
        label, nxt = steps[rng.randrange(len(steps))]
        verdicts = []
        try:
            nxt.g = m.consumer.consume(c.g, label)
        except ConsumptionError as exc:
            verdicts.append({"kind": "ConsumptionError", "detail": str(exc)})
        started = ()
        if isinstance(label, Tau) and label.rule in ("traj-base", "default"):
            started = (label.participant,)
        if isinstance(label, MotionAdvance) or started:
            verdicts += m.conformance(nxt, started)
        if isinstance(label, MotionAdvance):
            verdicts += m.collisions(c, nxt, dt)
        rec = {"step": step, "label": label.to_json(), "time": str(nxt.time),
               "config": _config_digest(nxt, intern), "verdicts": verdicts}
        if record_stores:
            rec["stores"] = {k: str(v) for k, v in sorted(nxt.stores.items())}
        trace.records.append(rec)
        trace.steps = step + 1
        c = nxt
        if verdicts:
            for v in verdicts:
                trace.alarms.append(dict(v, step=step))
            break
    return trace
