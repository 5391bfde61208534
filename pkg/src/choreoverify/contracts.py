"""Assume-guarantee motion contracts: refinement, composition of two
contracts into one, and compatibility of joint motions.

Refinement `a <= b` means `a` may be used where `b` is expected: weaker
precondition and assumption, stronger guarantee and postcondition, smaller
footprint, same mode, and a duration window nested in the direction the
mode dictates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .logic.checker import VALID, Verdict, check_validity, combine, DEFAULT_DEPTH
from .logic.expr import (
    Call, Cmp, Implies, TRUE, conj, conjuncts, free_vars, show,
)
from .logic.interval import fold_closed
from .logic.footprint import fp_union, footprints_disjoint, footprint_within
from .model import Duration, Mode, MotionSpec


def interrupt_combine(d1: Mode, d2: Mode) -> Mode:
    if d1 is Mode.INTERRUPT and d2 is Mode.INTERRUPT:
        return Mode.INTERRUPT
    return Mode.NONINTERRUPT


@dataclass(frozen=True)
class CompositeContract:
    pre: object
    assume: object
    guarantee: object
    post: object
    footprint: object
    duration: Duration
    mode: Mode
    executors: tuple                 # ((participant, atom text), ...)
    provenance: object = None        # json-ready derivation tree


def leaf_contract(owner: str, atom, spec: MotionSpec, region=None) -> CompositeContract:
    return CompositeContract(
        pre=spec.pre, assume=spec.assume, guarantee=spec.guarantee, post=spec.post,
        footprint=spec.footprint, duration=spec.duration, mode=spec.mode,
        executors=((owner, str(atom)),),
        provenance={"leaf": f"{owner}:{atom}", "mode": spec.mode.value,
                    "duration": str(spec.duration)},
    )


# --- errors ----------------------------------------------------------------

class CompositionError(Exception):
    kind = "CompositionError"

    def __init__(self, message, verdict: Optional[Verdict] = None, **info):
        super().__init__(message)
        self.verdict = verdict
        self.info = info

    def to_json(self):
        out = {"kind": self.kind, "message": str(self)}
        if self.verdict is not None:
            out["verdict"] = self.verdict.to_json()
        out.update({k: v for k, v in self.info.items()})
        return out


class BothNonInterruptible(CompositionError):
    kind = "BothNonInterruptible"


class DurationNotNested(CompositionError):
    kind = "DurationNotNested"


class FootprintOverlap(CompositionError):
    kind = "FootprintOverlap"

    @property
    def witness(self):
        return None if self.verdict is None else self.verdict.witness


class FootprintNotContained(CompositionError):
    kind = "FootprintNotContained"


class RefinementClauseFailed(CompositionError):
    kind = "RefinementClauseFailed"


class UnknownVerdict(CompositionError):
    kind = "UnknownVerdict"


class MissingFootprintAnnotation(CompositionError):
    kind = "MissingFootprintAnnotation"


class LeftoverAssumption(CompositionError):
    kind = "LeftoverAssumption"


class ModeMismatch(Exception):
    pass


# --- durations -------------------------------------------------------------

def duration_within(d: Duration, outer: Duration, bounds, depth=DEFAULT_DEPTH) -> Verdict:
    """Validity of D <= D' as intervals."""
    if d == outer:
        return VALID
    if d.hi is None and outer.hi is not None:
        return Verdict("refuted", witness={}, reason="unbounded window inside a bounded one")
    parts = [Cmp("<=", outer.lo, d.lo)]
    if outer.hi is not None:
        parts.append(Cmp("<=", d.hi, outer.hi))
    return check_validity(conj(*parts), bounds, depth)


def duration_meet(a: Duration, b: Duration) -> Duration:
    if a == b:
        return a
    lo = a.lo if a.lo == b.lo else fold_closed(Call("max", (a.lo, b.lo)))
    if a.hi is None:
        hi = b.hi
    elif b.hi is None or a.hi == b.hi:
        hi = a.hi
    else:
        hi = fold_closed(Call("min", (a.hi, b.hi)))
    return Duration(lo, hi)


def duration_hull(a: Duration, b: Duration) -> Duration:
    if a == b:
        return a
    lo = a.lo if a.lo == b.lo else fold_closed(Call("min", (a.lo, b.lo)))
    if a.hi is None or b.hi is None:
        hi = None
    else:
        hi = a.hi if a.hi == b.hi else fold_closed(Call("max", (a.hi, b.hi)))
    return Duration(lo, hi)


def duration_nonempty(d: Duration, bounds, depth=DEFAULT_DEPTH) -> Verdict:
    if d.hi is None:
        return VALID
    return check_validity(Cmp("<=", d.lo, d.hi), bounds, depth)


# --- refinement ------------------------------------------------------------

REFINES_CLAUSES = ("pre", "assume", "guarantee", "post", "footprint", "mode", "duration")


@dataclass(frozen=True)
class RefinesReport:
    clauses: tuple          # seven verdicts, in REFINES_CLAUSES order

    @property
    def verdict(self) -> Verdict:
        return combine(self.clauses)

    def failed(self):
        """Index (1-based) and name of the first non-valid clause, or None."""
        for i, v in enumerate(self.clauses):
            if not v.valid:
                return i + 1, REFINES_CLAUSES[i]
        return None

    def to_json(self):
        return {name: v.to_json() for name, v in zip(REFINES_CLAUSES, self.clauses)}


def _implies(a, b, bounds, depth):
    if a == b or b == TRUE:
        return VALID
    return check_validity(Implies(a, b), bounds, depth)


def refines(a, b, bounds, depth=DEFAULT_DEPTH) -> RefinesReport:
    """Check a <= b clause by clause. Works on MotionSpec and
    CompositeContract alike (anything with the seven fields)."""
    c1 = _implies(b.pre, a.pre, bounds, depth)
    c2 = _implies(b.assume, a.assume, bounds, depth)
    c3 = _implies(a.guarantee, b.guarantee, bounds, depth)
    c4 = _implies(a.post, b.post, bounds, depth)
    if a.footprint is None or b.footprint is None:
        c5 = VALID if b.footprint is None else Verdict("refuted", witness={}, reason="missing footprint")
    else:
        c5 = footprint_within(a.footprint, b.footprint, TRUE, bounds, depth)
    if a.mode is b.mode:
        c6 = VALID
    else:
        c6 = Verdict("refuted", witness={}, reason=f"mode {a.mode.value} vs {b.mode.value}")
    if a.mode is Mode.INTERRUPT:
        c7 = duration_within(a.duration, b.duration, bounds, depth)
    else:
        c7 = duration_within(b.duration, a.duration, bounds, depth)
    return RefinesReport((c1, c2, c3, c4, c5, c6, c7))


# --- AGcomp ----------------------------------------------------------------

def _require(v: Verdict, err_cls, message, unknown_ok, query, **info):
    if v.valid:
        return
    if v.unknown:
        if unknown_ok:
            return
        raise UnknownVerdict(f"{query}: {v.reason or 'undecided'}", v, query=query)
    raise err_cls(message, v, **info)


def _owners(c: CompositeContract):
    return {p for p, _ in c.executors}


def _leftover(assume, partners):
    """Conjuncts of an assumption that the partner's guarantee cannot
    discharge: those reading state of participants outside `partners`."""
    keep = []
    for q in conjuncts(assume):
        owners = {v.split(".", 1)[0] for v in free_vars(q) if "." in v}
        if owners - partners:
            keep.append(q)
    return conj(*keep)


def compose_pair(c1: CompositeContract, c2: CompositeContract, fp_partition, target_fp,
                 bounds, depth=DEFAULT_DEPTH, unknown_ok=False) -> CompositeContract:
    """One application of the assume-guarantee composition rule."""
    clash = _owners(c1) & _owners(c2)
    if clash:
        raise CompositionError(f"executors overlap: {sorted(clash)}")
    fp1, fp2 = fp_partition
    if fp1 is None or fp2 is None or target_fp is None:
        raise MissingFootprintAnnotation("composition needs a footprint for each side")
    g12 = conj(c1.guarantee, c2.guarantee)

    if c1.mode is Mode.NONINTERRUPT and c2.mode is Mode.NONINTERRUPT:
        raise BothNonInterruptible(
            f"{_names(c1)} and {_names(c2)} are both non-interruptible")
    if c1.mode is Mode.NONINTERRUPT:
        _require(duration_within(c1.duration, c2.duration, bounds, depth), DurationNotNested,
                 f"duration {c1.duration} of {_names(c1)} is not inside {c2.duration}",
                 unknown_ok, "duration-nesting")
    if c2.mode is Mode.NONINTERRUPT:
        _require(duration_within(c2.duration, c1.duration, bounds, depth), DurationNotNested,
                 f"duration {c2.duration} of {_names(c2)} is not inside {c1.duration}",
                 unknown_ok, "duration-nesting")

    v = footprints_disjoint(fp1, fp2, g12, bounds, depth)
    _require(v, FootprintOverlap, f"footprints of {_names(c1)} and {_names(c2)} overlap",
             unknown_ok, "footprint-disjoint", witness=_witness(v))
    joined = fp_union(fp1, fp2)
    v = footprint_within(joined, target_fp, g12, bounds, depth)
    _require(v, FootprintNotContained, "partition escapes the joint footprint",
             unknown_ok, "footprint-within", witness=_witness(v))

    assume = conj(_leftover(c1.assume, _owners(c2)), _leftover(c2.assume, _owners(c1)))
    for side, (c, g_other, fp) in enumerate(((c1, c2.guarantee, fp1), (c2, c1.guarantee, fp2)), 1):
        abstract = CompositeContract(c.pre, conj(assume, g_other), c.guarantee, c.post, fp,
                                     c.duration, c.mode, c.executors)
        rep = refines(c, abstract, bounds, depth)
        bad = rep.failed()
        if bad is not None:
            idx, name = bad
            _require(rep.clauses[idx - 1], RefinementClauseFailed,
                     f"{_names(c)} does not refine its role in the composition (clause {idx}: {name})",
                     unknown_ok, f"refines-{side}-{name}", side=side, clause=idx)

    d = duration_meet(c1.duration, c2.duration)
    _require(duration_nonempty(d, bounds, depth), DurationNotNested,
             f"durations {c1.duration} and {c2.duration} do not intersect", unknown_ok,
             "duration-nonempty")
    return CompositeContract(
        pre=conj(c1.pre, c2.pre),
        assume=assume,
        guarantee=g12,
        post=conj(c1.post, c2.post),
        footprint=target_fp,
        duration=d,
        mode=interrupt_combine(c1.mode, c2.mode),
        executors=c1.executors + c2.executors,
        provenance={"rule": "AGcomp", "partition": [str(fp1), str(fp2)],
                    "duration": str(d), "mode": interrupt_combine(c1.mode, c2.mode).value,
                    "left": c1.provenance, "right": c2.provenance},
    )


def _names(c):
    return ", ".join(f"{p}:{a}" for p, a in c.executors)


def _witness(v):
    if v.witness is None:
        return None
    return {k: str(x) for k, x in sorted(v.witness.items())}


@dataclass
class Derivation:
    contract: CompositeContract
    unsound: bool = False       # Unknown verdicts were assumed valid

    def to_json(self):
        c = self.contract
        out = {
            "executors": [f"{p}:{a}" for p, a in c.executors],
            "mode": c.mode.value,
            "duration": str(c.duration),
            "pre": show(c.pre),
            "guarantee": show(c.guarantee),
            "post": show(c.post),
            "derivation": c.provenance,
        }
        if self.unsound:
            out["unsound"] = True
        return out


def check_compatible(system, motion, bounds=None, pre=None, depth=DEFAULT_DEPTH,
                     unknown_ok=False) -> Derivation:
    """Fold compose_pair over the executors of a joint motion in
    declaration order. Each executor's region annotation is its side of the
    partition; without one, the motion's own footprint is used."""
    if bounds is None:
        bounds = system.bounds_for()
    leaves = []
    for p, atom in motion.items:
        spec = system.spec(p, atom)
        region = motion.region_of(p)
        if region is None:
            region = spec.footprint
        if region is None:
            raise MissingFootprintAnnotation(f"{p}:{atom} has no footprint")
        leaves.append((leaf_contract(p, atom, spec), region))

    acc, acc_fp = leaves[0]
    if len(leaves) == 1:
        if acc.footprint is not None and acc.footprint != acc_fp:
            v = footprint_within(acc.footprint, acc_fp, acc.guarantee, bounds, depth)
            _require(v, FootprintNotContained, f"{_names(acc)} escapes its region",
                     unknown_ok, "footprint-within", witness=_witness(v))
    for c, fp in leaves[1:]:
        target = fp_union(acc_fp, fp)
        acc = compose_pair(acc, c, (acc_fp, fp), target, bounds, depth, unknown_ok)
        acc_fp = target
    if acc.assume != TRUE:
        v = check_validity(acc.assume, bounds, depth)
        _require(v, LeftoverAssumption, f"assumption {show(acc.assume)} is not discharged",
                 unknown_ok, "leftover-assumption")
    if pre is not None:
        v = _implies(pre, acc.pre, bounds, depth)
        _require(v, RefinementClauseFailed, "joint precondition does not hold",
                 unknown_ok, "joint-pre")
    return Derivation(acc, unsound=unknown_ok)
