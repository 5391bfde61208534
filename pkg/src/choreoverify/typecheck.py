"""Subtyping of local types and typing of processes against them.

Typing carries a logical context (what is known about the participant's
state) and discharges every side condition as a validity query.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .contracts import refines
from .logic.checker import DEFAULT_DEPTH, Verdict, check_validity
from .logic.expr import (
    TRUE, Implies, Var, conj, conjuncts, free_vars, is_formula, negate, show, substitute,
)
from .logic.footprint import as_pred
from .model import (
    LBranch, LBranchDefault, LMotion, LRecVar, LSelect,
    PCond, PMotion, PRec, PRecv, PRecvDefault, PSend, PVar,
    participants_of, unfold_all,
)
from .projection import ProjectionError, project
from .syntax.parser import NONDET

NU = "nu"
FALLBACK_PAYLOAD_BOUNDS = (-10**6, 10**6)


class TypingFailure(Exception):
    """rule: the rule whose premise failed; query: the failing validity goal."""

    def __init__(self, rule, message, query=None, verdict: Verdict = None, bounds=None):
        super().__init__(message)
        self.rule = rule
        self.query = query
        self.verdict = verdict
        self.bounds = bounds

    @property
    def unknown(self):
        return self.verdict is not None and self.verdict.unknown

    def to_json(self):
        out = {"rule": self.rule, "message": str(self)}
        if self.query is not None:
            out["query"] = show(self.query)
        if self.verdict is not None:
            out["verdict"] = self.verdict.to_json()
        return out


class RuleMismatch(TypingFailure):
    def __init__(self, expected, found, where=""):
        super().__init__("mismatch", f"expected {expected}, found {found}" + (f" at {where}" if where else ""))
        self.expected, self.found = expected, found


class ValidityFailed(TypingFailure):
    pass


def _shape(t):
    return type(t).__name__


class _Oracle:
    """Validity queries with bookkeeping shared by subtyping and typing."""

    def __init__(self, bounds, depth, unknown_ok):
        self.bounds = dict(bounds)
        self.depth = depth
        self.unknown_ok = unknown_ok
        self.queries = 0

    def bound_like_nu(self, name):
        if name not in self.bounds:
            self.bounds[name] = self.bounds.get(NU, FALLBACK_PAYLOAD_BOUNDS)

    def valid(self, goal) -> Verdict:
        self.queries += 1
        return check_validity(goal, self.bounds, self.depth)

    def require(self, rule, hyp, goal, what):
        q = Implies(hyp, goal) if hyp != TRUE else goal
        v = self.valid(q)
        if v.valid or (v.unknown and self.unknown_ok):
            return v
        tail = "undecided" if v.unknown else "refuted"
        if v.witness:
            tail += " at " + ", ".join(f"{k}={x}" for k, x in sorted(v.witness.items()))
        raise ValidityFailed(rule, f"{what}: {show(q)} {tail}", q, v, dict(self.bounds))


# --- subtyping -------------------------------------------------------------

@dataclass
class SubtypeResult:
    verdict: Verdict
    trace: list = field(default_factory=list)
    failure: TypingFailure = None

    @property
    def valid(self):
        return self.verdict.valid


def subtype(t1, t2, system, owner, bounds=None, depth=DEFAULT_DEPTH, unknown_ok=False) -> SubtypeResult:
    """Is t1 a subtype of t2? Coinductive: a pair met again is assumed."""
    oracle = _Oracle(system.bounds_for(bounds), depth, unknown_ok)
    trace = []
    try:
        _sub(t1, t2, system, owner, oracle, set(), trace)
    except TypingFailure as exc:
        status = "unknown" if exc.unknown else "refuted"
        return SubtypeResult(Verdict(status, reason=str(exc)), trace, exc)
    return SubtypeResult(Verdict("valid"), trace)


def _sub(t1, t2, system, owner, oracle, seen, trace):
    x, y = unfold_all(t1), unfold_all(t2)
    if (x, y) in seen or x == y:
        return
    seen.add((x, y))
    if isinstance(x, LMotion) and isinstance(y, LMotion):
        trace.append(f"sub-motion {x.atom} <= {y.atom}")
        _motion_refines(x.atom, y.atom, system, owner, oracle)
        return _sub(x.cont, y.cont, system, owner, oracle, seen, trace)
    if isinstance(x, LSelect) and isinstance(y, LSelect):
        trace.append("sub-out")
        sup = {(e.peer, e.label): e for e in y.entries}
        for e in x.entries:
            f = sup.get((e.peer, e.label))
            if f is None:
                raise RuleMismatch(f"selection offering {e.peer}!{e.label}", "no such entry", "sub-out")
            oracle.require("sub-out", e.guard, f.guard, f"guard of {e.peer}!{e.label}")
            oracle.require("sub-out", e.refinement.body, f.refinement.body, f"payload of {e.peer}!{e.label}")
            _sub(e.cont, f.cont, system, owner, oracle, seen, trace)
        return
    if isinstance(x, (LBranch, LBranchDefault)) and isinstance(y, (LBranch, LBranchDefault)):
        if x.peer != y.peer:
            raise RuleMismatch(f"branch from {y.peer}", f"branch from {x.peer}")
        if isinstance(y, LBranchDefault) and not isinstance(x, LBranchDefault):
            raise RuleMismatch("branch with a default motion", "branch without one")
        if isinstance(y, LBranchDefault):
            rule = "sub-in1"
        elif isinstance(x, LBranchDefault):
            rule = "sub-in2"
        else:
            rule = "sub-in0"
        trace.append(rule)
        sub = {e.label: e for e in x.entries}
        for f in y.entries:
            e = sub.get(f.label)
            if e is None:
                raise RuleMismatch(f"reception of {f.label}", "no such branch", rule)
            oracle.require(rule, f.refinement.body, e.refinement.body, f"payload of {f.label}")
            _sub(e.cont, f.cont, system, owner, oracle, seen, trace)
        if rule == "sub-in1":
            _sub(LMotion(x.atom, x.default), LMotion(y.atom, y.default), system, owner, oracle, seen, trace)
        return
    if isinstance(x, LBranchDefault) and isinstance(y, LMotion):
        trace.append("sub-in3")
        return _sub(LMotion(x.atom, x.default), y, system, owner, oracle, seen, trace)
    if isinstance(x, LRecVar) and isinstance(y, LRecVar) and x.name == y.name:
        return
    raise RuleMismatch(_shape(y), _shape(x), "subtyping")


def _motion_refines(a, b, system, owner, oracle):
    if a == b:
        return
    rep = refines(system.spec(owner, a), system.spec(owner, b), oracle.bounds, oracle.depth)
    v = rep.verdict
    if v.valid or (v.unknown and oracle.unknown_ok):
        return
    i, name = rep.failed()
    raise ValidityFailed("sub-motion", f"{a} does not refine {b} (clause {i}: {name})", None, v)


# --- process typing --------------------------------------------------------

@dataclass
class _RecFrame:
    type: object
    invariant: tuple            # conjuncts assumed on entry
    arrivals: list = field(default_factory=list)  # contexts reaching X


def _sort_of(e):
    if e is None:
        return "unit"
    return "bool" if is_formula(e) else "real"


def _state_only(p, owner):
    return all(v.startswith(owner + ".") for v in free_vars(p))


class _Typer:
    def __init__(self, system, owner, oracle):
        self.system, self.owner, self.o = system, owner, oracle
        self.trace = []

    def check(self, p, t, sigma, gamma):
        if isinstance(p, PRec):
            return self.t_rec(p, t, sigma, gamma)
        if isinstance(p, PVar):
            return self.t_var(p, t, sigma, gamma)
        t = unfold_all(t)
        if isinstance(p, PMotion):
            return self.t_motion(p.atom, p.cont, t, sigma, gamma)
        if isinstance(p, PSend):
            return self.t_out(p, t, sigma, gamma)
        if isinstance(p, (PRecv, PRecvDefault)):
            return self.t_choice(p, t, sigma, gamma)
        if isinstance(p, PCond):
            return self.t_cond(p, t, sigma, gamma)
        raise TypeError(f"not a process: {p!r}")

    def t_rec(self, p, t, sigma, gamma):
        # the loop invariant is the largest set of state conjuncts of the
        # entry context that every jump back re-establishes
        cands = tuple(c for c in conjuncts(sigma) if _state_only(c, self.owner))
        while True:
            frame = _RecFrame(t, cands)
            self.trace.append(f"t-rec {p.var} invariant {show(conj(*cands))}")
            self.check(p.body, t, conj(*cands), {**gamma, p.var: frame})
            keep = tuple(c for c in cands
                         if all(self._holds(s, c) for s in frame.arrivals))
            if keep == cands:
                return
            cands = keep

    def _holds(self, sigma, c):
        v = self.o.valid(Implies(sigma, c))
        return v.valid or (v.unknown and self.o.unknown_ok)

    def t_var(self, p, t, sigma, gamma):
        frame = gamma.get(p.name)
        if frame is None:
            raise RuleMismatch("bound process variable", p.name)
        self.trace.append(f"t-var {p.name}")
        frame.arrivals.append(sigma)
        _sub(frame.type, t, self.system, self.owner, self.o, set(), self.trace)

    def t_motion(self, atom, cont, t, sigma, gamma):
        if not isinstance(t, LMotion):
            raise RuleMismatch(_shape(t), f"motion {atom}", "t-motion")
        spec = self.system.spec(self.owner, atom)
        self.trace.append(f"t-motion {atom}")
        self.o.require("t-motion", sigma, spec.pre, f"precondition of {atom}")
        if atom != t.atom:
            self.trace.append(f"t-sub {atom} <= {t.atom}")
            _motion_refines(atom, t.atom, self.system, self.owner, self.o)
        self.check(cont, t.cont, spec.post, gamma)

    def t_out(self, p, t, sigma, gamma):
        if not isinstance(t, LSelect):
            raise RuleMismatch(_shape(t), f"send {p.to}!{p.label}", "t-out")
        e = next((x for x in t.entries if x.peer == p.to and x.label == p.label), None)
        if e is None:
            raise RuleMismatch(f"one of {', '.join(f'{x.peer}!{x.label}' for x in t.entries)}",
                               f"{p.to}!{p.label}", "t-out")
        want = e.refinement.sort
        have = _sort_of(p.expr)
        if want != have and not (want == "real" and have == "real"):
            raise RuleMismatch(f"payload of sort {want}", f"sort {have}", f"{p.to}!{p.label}")
        self.trace.append(f"t-out {p.to}!{p.label}")
        goal = e.guard
        if p.expr is not None:
            goal = conj(goal, substitute(e.refinement.body, {NU: p.expr}))
        self.o.require("t-out", sigma, goal, f"guard and payload of {p.to}!{p.label}")
        self.check(p.cont, e.cont, sigma, gamma)

    def t_choice(self, p, t, sigma, gamma):
        dflt = isinstance(p, PRecvDefault)
        if isinstance(t, LMotion) and dflt:
            self.trace.append("t-sub sub-in3")
            return self.t_motion(p.atom, p.default, t, sigma, gamma)
        if not isinstance(t, (LBranch, LBranchDefault)):
            raise RuleMismatch(_shape(t), f"reception from {p.sender}", "t-choice")
        if t.peer != p.sender:
            raise RuleMismatch(f"reception from {t.peer}", f"reception from {p.sender}")
        if isinstance(t, LBranchDefault) and not dflt:
            raise RuleMismatch("reception with a default motion", "reception without one")
        self.trace.append("t-choice2" if isinstance(t, LBranchDefault) else "t-choice1")
        mine = {b.label: b for b in p.branches}
        for e in t.entries:
            b = mine.get(e.label)
            if b is None:
                raise RuleMismatch(f"branch for {p.sender}?{e.label}", "none", "t-choice")
            s = sigma
            if b.var is not None:
                self.o.bound_like_nu(b.var)
                s = conj(sigma, substitute(e.refinement.body, {NU: Var(b.var)}))
            self.check(b.cont, e.cont, s, gamma)
        if isinstance(t, LBranchDefault):
            self.t_motion(p.atom, p.default, LMotion(t.atom, t.default), sigma, gamma)

    def t_cond(self, p, t, sigma, gamma):
        nondet = p.cond == Var(NONDET)
        yes = sigma if nondet else conj(sigma, p.cond)
        no = sigma if nondet else conj(sigma, negate(p.cond))
        if isinstance(t, LSelect) and len(t.entries) > 1:
            for k, e in enumerate(t.entries):
                if not self._holds(yes, e.guard):
                    continue
                rest = LSelect(t.entries[:k] + t.entries[k + 1:])
                mark = len(self.trace)
                try:
                    self.trace.append(f"t-cond picks {e.peer}!{e.label}")
                    self.check(p.then, LSelect((e,)), yes, gamma)
                    self.check(p.other, rest, no, gamma)
                    return
                except TypingFailure:
                    del self.trace[mark:]
        # both arms against the whole selection, each by subsumption
        self.trace.append("t-cond")
        self.check(p.then, t, yes, gamma)
        self.check(p.other, t, no, gamma)


def type_process(system, owner, process, local_type, sigma=TRUE, bounds=None,
                 depth=DEFAULT_DEPTH, unknown_ok=False):
    """Returns (verdict, trace, failure or None)."""
    oracle = _Oracle(system.bounds_for(bounds), depth, unknown_ok)
    typer = _Typer(system, owner, oracle)
    try:
        typer.check(process, local_type, sigma, {})
    except TypingFailure as exc:
        status = "unknown" if exc.unknown else "refuted"
        return Verdict(status, reason=str(exc)), typer.trace, exc
    return Verdict("valid"), typer.trace, None


# --- sessions --------------------------------------------------------------

@dataclass
class TypingReport:
    participants: dict          # name -> {"ok": bool, ...}
    errors: list                # session-level failures
    unsound: bool = False
    failures: dict = field(default_factory=dict)  # name -> TypingFailure, for query dumps

    @property
    def ok(self):
        return not self.errors and all(r["ok"] for r in self.participants.values())

    @property
    def only_unknown(self):
        bad = [r for r in self.participants.values() if not r["ok"]]
        return (not self.ok and not self.errors
                and all(r.get("verdict", {}).get("status") == "unknown" for r in bad))

    def to_json(self):
        out = {"well_typed": self.ok,
               "participants": dict(sorted(self.participants.items())),
               "errors": self.errors}
        if self.unsound:
            out["unsound"] = "unknown verdicts were assumed valid"
        return out


def geom_overlap_query(system, p, q):
    """Formula valid iff the initial shapes of p and q cannot meet."""
    a, b = system.participants[p], system.participants[q]
    return negate(conj(a.init, b.init, as_pred(a.geom), as_pred(b.geom)))


def type_session(system, bounds=None, depth=DEFAULT_DEPTH, unknown_ok=False) -> TypingReport:
    g = system.global_type
    everyone = sorted(participants_of(g))
    b = system.bounds_for(bounds)
    errors, rows, failures = [], {}, {}
    for p in everyone:
        if p not in system.processes:
            errors.append({"kind": "ParticipantWithoutProcess", "participant": p,
                           "message": f"no process for {p}"})
            continue
        try:
            t = project(g, p)
        except ProjectionError as exc:
            rows[p] = {"ok": False, "rule": "projection", "message": str(exc)}
            continue
        iface = system.participants.get(p)
        sigma = iface.init if iface is not None else TRUE
        v, trace, fail = type_process(system, p, system.processes[p], t, sigma, b, depth, unknown_ok)
        row = {"ok": v.valid, "verdict": v.to_json(), "trace": trace}
        if fail is not None:
            row.update(fail.to_json())
            failures[p] = fail
        rows[p] = row
    geo = [p for p in everyone if p in system.participants and system.participants[p].geom is not None]
    for i, p in enumerate(geo):
        for q in geo[i + 1:]:
            goal = geom_overlap_query(system, p, q)
            v = check_validity(goal, b, depth)
            if v.valid or (v.unknown and unknown_ok):
                continue
            err = {"kind": "InitialCollision" if v.refuted else "Unknown",
                   "participants": [p, q],
                   "message": f"initial shapes of {p} and {q} may overlap",
                   "verdict": v.to_json()}
            errors.append(err)
            failures[f"{p}-{q}"] = TypingFailure("t-sess", err["message"], goal, v, b)
    return TypingReport(rows, errors, unsound=unknown_ok, failures=failures)
