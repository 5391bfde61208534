"""Projection of global types onto participants, and the merge operator on
local types and motion primitives used when a participant does not take
part in a choice."""

from __future__ import annotations

from dataclasses import replace

from .contracts import ModeMismatch, duration_hull, duration_meet
from .logic.expr import conj, disj
from .logic.footprint import fp_meet
from .model import (
    Mode, MotionSpec, head_message, merge_atoms, participants_of, equi_equal,
    GMessage, GMotion, GPrefSeq, GChoice, GSep, GSeq, GRecVar, GRec,
    SelectEntry, BranchEntry, LMotion, LSelect, LBranch, LBranchDefault, LRec, LRecVar,
)


class MergeUndefined(Exception):
    def __init__(self, t1, t2, why=""):
        self.t1, self.t2 = t1, t2
        super().__init__(why or "no merge rule applies")


class ProjectionError(Exception):
    """reason is one of MergeUndefined, ParticipantAbsentInRec, NotInSepBranch."""

    def __init__(self, participant, location, reason, detail=""):
        self.participant = participant
        self.location = tuple(location)
        self.reason = reason
        self.detail = detail
        where = "/".join(self.location) or "top"
        super().__init__(f"cannot project onto {participant} at {where}: {reason}"
                         + (f" ({detail})" if detail else ""))

    def to_json(self):
        return {"participant": self.participant, "location": list(self.location),
                "reason": self.reason, "detail": self.detail}


# --- merging ---------------------------------------------------------------

def merge_motion(a: MotionSpec, b: MotionSpec) -> MotionSpec:
    """A spec refining both: weaker pre and assumption, stronger guarantee,
    post and footprint. Durations meet for interruptible motions and join
    for non-interruptible ones, so clause 7 of refinement holds both ways."""
    if a == b:
        return a
    if a.owner != b.owner or len(a.params) != len(b.params):
        raise ValueError("can only merge motions of one participant with equal signatures")
    if a.mode is not b.mode:
        raise ModeMismatch(f"cannot merge {a.name} ({a.mode.value}) with {b.name} ({b.mode.value})")
    if a.mode is Mode.INTERRUPT:
        d = duration_meet(a.duration, b.duration)
    else:
        d = duration_hull(a.duration, b.duration)
    if a.footprint is None or b.footprint is None:
        fp = a.footprint or b.footprint
    else:
        fp = fp_meet(a.footprint, b.footprint)
    return MotionSpec(
        name=f"{a.name}&{b.name}",
        owner=a.owner,
        params=a.params,
        pre=disj(a.pre, b.pre),
        assume=disj(a.assume, b.assume),
        guarantee=conj(a.guarantee, b.guarantee),
        post=conj(a.post, b.post),
        footprint=fp,
        duration=d,
        mode=a.mode,
        trajectory=None,
    )


def _same(t1, t2):
    return t1 == t2 or equi_equal(t1, t2)


def _union_branches(e1, e2):
    by_label = {e.label: e for e in e1}
    order = [e.label for e in e1]
    for e in e2:
        if e.label in by_label:
            f = by_label[e.label]
            if f.refinement != e.refinement:
                raise MergeUndefined(f, e, f"label {e.label} carries different refinements")
            by_label[e.label] = replace(f, cont=merge_local(f.cont, e.cont))
        else:
            by_label[e.label] = e
            order.append(e.label)
    return tuple(by_label[k] for k in order)


def merge_local(t1, t2):
    if _same(t1, t2):
        return t1
    try:
        return _merge_one_way(t1, t2)
    except MergeUndefined:
        pass
    try:
        return _merge_one_way(t2, t1)
    except MergeUndefined:
        raise MergeUndefined(t1, t2) from None


def _merge_one_way(t1, t2):
    if isinstance(t1, LBranch) and isinstance(t2, LBranch) and t1.peer == t2.peer:
        return LBranch(t1.peer, _union_branches(t1.entries, t2.entries))
    if isinstance(t1, LBranchDefault) and isinstance(t2, LBranchDefault) and t1.peer == t2.peer:
        if not _same(t1.default, t2.default):
            raise MergeUndefined(t1, t2, "default continuations differ")
        return LBranchDefault(t1.peer, _union_branches(t1.entries, t2.entries),
                              merge_atoms(t1.atom, t2.atom), t1.default)
    if isinstance(t1, LBranch) and isinstance(t2, LBranchDefault) and t1.peer == t2.peer:
        return LBranchDefault(t1.peer, _union_branches(t1.entries, t2.entries), t2.atom, t2.default)
    if isinstance(t1, LMotion) and isinstance(t2, LBranchDefault):
        if not _same(t1.cont, t2.default):
            raise MergeUndefined(t1, t2, "default continuations differ")
        return LBranchDefault(t2.peer, t2.entries, merge_atoms(t1.atom, t2.atom), t2.default)
    if isinstance(t1, LMotion) and isinstance(t2, LBranch):
        return LBranchDefault(t2.peer, t2.entries, t1.atom, t1.cont)
    raise MergeUndefined(t1, t2)


# --- projection ------------------------------------------------------------

def project(g, r: str):
    """Local type of participant r."""
    return _project(g, r, ())


def _project(g, r, path):
    if isinstance(g, GRecVar):
        return LRecVar(g.name)
    if isinstance(g, GRec):
        if r not in participants_of(g.body):
            raise ProjectionError(r, path + (f"rec {g.var}",), "ParticipantAbsentInRec")
        return LRec(g.var, _project(g.body, r, path + (f"rec {g.var}",)))
    if isinstance(g, GSeq):
        cont = _project(g.rest, r, path + ("rest",))
        return _prefix(g.prefix, r, cont, path + ("prefix",))
    raise TypeError(f"not a global type: {g!r}")


def _prefix(g, r, cont, path):
    """Projection of a prefix, with `cont` plugged into its hole."""
    if isinstance(g, GMessage):
        if r == g.receiver:
            return LBranch(g.sender, (BranchEntry(g.label, cont, g.refinement),))
        if r == g.sender:
            return LSelect((SelectEntry(g.receiver, g.label, cont, g.guard, g.refinement),))
        return cont
    if isinstance(g, GMotion):
        if r in g.executors:
            return LMotion(g.atom_of(r), cont)
        return cont
    if isinstance(g, GPrefSeq):
        rest = _prefix(g.second, r, cont, path + ("2",))
        return _prefix(g.first, r, rest, path + ("1",))
    if isinstance(g, GChoice):
        alts = [_prefix(a, r, cont, path + (f"alt{i}",)) for i, a in enumerate(g.alts)]
        sender = _choice_sender(g)
        if r == sender:
            entries = []
            for t in alts:
                if not isinstance(t, LSelect):
                    raise ProjectionError(r, path, "MergeUndefined", "choice sender does not select")
                entries.extend(t.entries)
            return LSelect(tuple(entries))
        out = alts[0]
        for i, t in enumerate(alts[1:], 1):
            try:
                out = merge_local(out, t)
            except MergeUndefined as exc:
                raise ProjectionError(r, path + (f"alt{i}",), "MergeUndefined", str(exc)) from None
        return out
    if isinstance(g, GSep):
        if r in participants_of(g.left):
            return _prefix(g.left, r, cont, path + ("left",))
        if r in participants_of(g.right):
            return _prefix(g.right, r, cont, path + ("right",))
        raise ProjectionError(r, path, "NotInSepBranch")
    raise TypeError(f"not a global prefix: {g!r}")


def _choice_sender(g: GChoice):
    m, _ = head_message(g.alts[0])
    return None if m is None else m.sender


def project_all(g, participants):
    out = {}
    for p in sorted(participants):
        out[p] = project(g, p)
    return out
