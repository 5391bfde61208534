"""Well-formedness of global types: a dataflow analysis over the tree of
the choreography with every recursion unfolded once.

The tree holds the body of each loop twice: the primary copy, where every
check is made, and a shadow copy standing for the next iteration, which
only supplies happens-before successors for events at the end of the
primary copy.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .contracts import CompositionError, check_compatible
from .logic.checker import DEFAULT_DEPTH, check_validity
from .logic.expr import TRUE, disj, free_vars, show
from .logic.footprint import footprints_disjoint, footprint_within
from .model import (
    GMessage, GMotion, GPrefSeq, GChoice, GSep, GSeq, GRecVar, GRec,
    Mode, head_message, participants_of,
)
from .syntax.render import render_global

PRIMARY, SHADOW = 0, 1


# --- the tree --------------------------------------------------------------

@dataclass(eq=False)
class Node:
    kind: str                   # msg | motion | . | + | *
    children: list = field(default_factory=list)
    event: object = None        # GMessage or GMotion for leaves
    syntax: object = None       # the GChoice / GSep behind + and * nodes
    copy: int = PRIMARY
    path: str = ""
    decoration: tuple = None    # + nodes: (sender, receivers)
    index: int = -1             # position among the leaves, left to right
    scope: frozenset = None

    @property
    def is_event(self):
        return self.kind in ("msg", "motion")

    def participants(self) -> frozenset:
        if self.kind == "msg":
            return frozenset((self.event.sender, self.event.receiver))
        if self.kind == "motion":
            return frozenset(self.event.executors)
        out = frozenset()
        for c in self.children:
            out |= c.participants()
        return out

    def describe(self):
        if self.kind == "msg":
            e = self.event
            return f"{e.sender}->{e.receiver}:{e.label}"
        if self.kind == "motion":
            return render_global(self.event)
        return self.kind

    def leaves(self):
        if self.is_event:
            yield self
        for c in self.children:
            yield from c.leaves()


@dataclass
class ChoreoTree:
    root: Node
    events: list                # leaves in left-to-right order
    back_edges: list            # (recursion variable, path of its shadow copy)

    def primary_motions(self):
        return [n for n in self.events if n.kind == "motion" and n.copy == PRIMARY]


def _dot(a, b, path, copy):
    if a is None:
        return b
    if b is None:
        return a
    return Node(".", [a, b], path=path, copy=copy)


def build_tree(g) -> ChoreoTree:
    back = []

    def glob(g, env, copy, path):
        if isinstance(g, GSeq):
            return _dot(prefix(g.prefix, copy, path + "/prefix"),
                        glob(g.rest, env, copy, path + "/rest"), path, copy)
        if isinstance(g, GRecVar):
            thunk = env.get(g.name)
            return thunk() if thunk else None
        if isinstance(g, GRec):
            if copy == PRIMARY:
                def shadow(g=g, env=env, path=path):
                    back.append((g.var, path + f"/rec {g.var}*"))
                    inner = {k: None for k in env}
                    inner[g.var] = None
                    return glob(g.body, inner, SHADOW, path + f"/rec {g.var}*")
                env = dict(env)
                env[g.var] = shadow
            else:
                env = dict(env)
                env[g.var] = None
            return glob(g.body, env, copy, path + f"/rec {g.var}")
        raise TypeError(f"not a global type: {g!r}")

    def prefix(g, copy, path):
        if isinstance(g, GMessage):
            return Node("msg", event=g, copy=copy, path=path)
        if isinstance(g, GMotion):
            return Node("motion", event=g, copy=copy, path=path)
        if isinstance(g, GPrefSeq):
            return _dot(prefix(g.first, copy, path + "/1"), prefix(g.second, copy, path + "/2"), path, copy)
        if isinstance(g, GChoice):
            kids = [prefix(a, copy, path + f"/alt{i}") for i, a in enumerate(g.alts)]
            heads = [head_message(a)[0] for a in g.alts]
            sender = heads[0].sender if heads[0] is not None else None
            receivers = tuple(sorted({h.receiver for h in heads if h is not None}))
            return Node("+", kids, syntax=g, copy=copy, path=path, decoration=(sender, receivers))
        if isinstance(g, GSep):
            return Node("*", [prefix(g.left, copy, path + "/left"), prefix(g.right, copy, path + "/right")],
                        syntax=g, copy=copy, path=path)
        raise TypeError(f"not a global prefix: {g!r}")

    root = glob(g, {}, PRIMARY, "G")
    events = list(root.leaves()) if root is not None else []
    for i, n in enumerate(events):
        n.index = i
    return ChoreoTree(root, events, back)


# --- violations ------------------------------------------------------------

@dataclass
class Violation:
    check: str          # total_choice | scope | fully_separated | total_motion
                        # | compatibility | umc | motion_motion | sender_readiness | total_sync
    kind: str
    message: str
    location: str = ""
    info: dict = field(default_factory=dict)

    def to_json(self):
        out = {"check": self.check, "kind": self.kind, "message": self.message}
        if self.location:
            out["location"] = self.location
        out.update(self.info)
        return out


class ScopeError(Exception):
    def __init__(self, node, missing):
        self.node = node
        self.missing = sorted(missing)
        super().__init__(f"{node.describe()} mentions {', '.join(self.missing)} outside its scope")


# --- scope labels ----------------------------------------------------------

def scope_label(tree: ChoreoTree, everyone, rng: random.Random = None) -> list:
    """Label every node with its scope, top-down. Returns the list of
    violations (empty when the tree is well-scoped). With `rng`, children
    are visited in a shuffled order; the labels must not depend on it."""
    out = []
    if tree.root is None:
        return out
    stack = [(tree.root, frozenset(everyone))]
    while stack:
        node, label = stack.pop()
        node.scope = label
        if node.kind == "msg" or node.kind == "motion":
            missing = node.participants() - label
            if missing:
                if node.copy == PRIMARY:
                    err = ScopeError(node, missing)
                    out.append(Violation("scope", "ScopeError", str(err), node.path,
                                         {"missing": err.missing}))
            continue
        kids = []
        if node.kind == ".":
            kids = [(c, label) for c in node.children]
        elif node.kind == "+":
            sender, receivers = node.decoration
            need = {sender, *receivers} - {None}
            if not need <= label:
                if node.copy == PRIMARY:
                    out.append(Violation("scope", "ScopeError",
                                         f"choice by {sender} reaches outside its scope",
                                         node.path, {"missing": sorted(need - label)}))
                continue
            kids = [(c, label) for c in node.children]
        elif node.kind == "*":
            left, right = node.children
            p1, p2 = left.participants(), right.participants()
            if p1 & p2:
                if node.copy == PRIMARY:
                    out.append(Violation("scope", "NonPartition",
                                         f"{', '.join(sorted(p1 & p2))} on both sides of *",
                                         node.path, {"shared": sorted(p1 & p2)}))
                continue
            l1 = p1 & label
            kids = [(left, l1), (right, label - l1)]
        if rng is not None:
            rng.shuffle(kids)
        stack.extend(kids)
    out.sort(key=lambda v: (v.location, v.message))
    return out


def scope_labels(tree: ChoreoTree) -> dict:
    """path -> sorted scope of every labelled primary node."""
    out = {}

    def walk(n):
        if n.scope is not None and n.copy == PRIMARY:
            out[f"{n.path}#{n.kind}"] = sorted(n.scope)
        for c in n.children:
            walk(c)
    if tree.root is not None:
        walk(tree.root)
    return out


# --- happens before --------------------------------------------------------

@dataclass
class HBGraph:
    events: list
    succ: list          # direct edges, bitmasks
    reach: list         # transitive closure, bitmasks
    pred: list          # inverse of reach
    immediate: list     # transitive reduction, bitmasks

    def hb(self, a: Node, b: Node) -> bool:
        return bool(self.reach[a.index] >> b.index & 1)

    def immediate_of(self, n: Node):
        return [self.events[i] for i in _bits(self.immediate[n.index])]

    def after(self, n: Node):
        return [self.events[i] for i in _bits(self.reach[n.index])]

    def edges(self):
        for i, m in enumerate(self.reach):
            for j in _bits(m):
                yield self.events[i], self.events[j]


def _bits(m):
    i = 0
    while m:
        if m & 1:
            yield i
        m >>= 1
        i += 1


def _related(n: Node, m: Node) -> bool:
    if n.kind == "msg" and m.kind == "msg":
        return m.event.sender in (n.event.sender, n.event.receiver)
    return bool(n.participants() & m.participants())


def happens_before(tree: ChoreoTree) -> HBGraph:
    ev = tree.events
    succ = [0] * len(ev)

    def walk(node):
        if node.is_event:
            return [node]
        parts = [walk(c) for c in node.children]
        if node.kind == ".":
            left, right = parts
            for n in left:
                mask = 0
                for m in right:
                    if _related(n, m):
                        mask |= 1 << m.index
                succ[n.index] |= mask
        return [x for p in parts for x in p]

    if tree.root is not None:
        walk(tree.root)
    # leaves are numbered left to right and edges only point rightwards,
    # so a reverse sweep closes the relation
    reach = [0] * len(ev)
    immediate = [0] * len(ev)
    for i in range(len(ev) - 1, -1, -1):
        r, covered = succ[i], 0
        for j in _bits(succ[i]):
            r |= reach[j]
            covered |= reach[j]
        reach[i] = r
        immediate[i] = r & ~covered
    pred = [0] * len(ev)
    for i, r in enumerate(reach):
        for j in _bits(r):
            pred[j] |= 1 << i
    return HBGraph(ev, succ, reach, pred, immediate)


# --- synchronisability -----------------------------------------------------

@dataclass
class SyncResult:
    minimal_senders: dict       # motion path -> (sender, [messages])
    umc: list
    motion_motion: list
    sender_readiness: list
    total_sync: list


def check_unique_minimal_communication(tree: ChoreoTree, hb: HBGraph):
    """Every primary motion needs immediate successors that are messages
    all sent by one participant (alternatives of a choice may contribute
    several messages by the same sender)."""
    senders, umc, mm = {}, [], []
    for n in tree.primary_motions():
        nxt = hb.immediate_of(n)
        motions = [m for m in nxt if m.kind == "motion"]
        msgs = [m for m in nxt if m.kind == "msg"]
        if motions:
            mm.append(Violation("motion_motion", "MotionMotion",
                                f"{n.describe()} is directly followed by "
                                + ", ".join(m.describe() for m in motions)
                                + " with no message in between",
                                n.path, {"successors": [m.describe() for m in motions]}))
            continue
        who = sorted({m.event.sender for m in msgs})
        if len(who) != 1:
            if who:
                text = f"the minimal senders after {n.describe()} are {' and '.join(who)}"
            else:
                text = f"no communication follows {n.describe()}"
            umc.append(Violation("umc", "UMCViolation", text, n.path,
                                 {"senders": who, "successors": [m.describe() for m in msgs]}))
            continue
        senders[n.path] = (who[0], [m.describe() for m in msgs])
    return senders, umc, mm


def check_sender_readiness(tree: ChoreoTree, senders: dict, system) -> list:
    """After a motion, everyone except the next sender must be running an
    interruptible primitive, so that they can take the message."""
    out = []
    for n in tree.primary_motions():
        if n.path not in senders:
            continue
        s, _ = senders[n.path]
        blocking = []
        for p, atom in n.event.items:
            if p == s:
                continue
            if system.spec(p, atom).mode is not Mode.INTERRUPT:
                blocking.append(f"{p}:{atom}")
        if blocking:
            out.append(Violation("sender_readiness", "SRViolation",
                                 f"{', '.join(blocking)} cannot be interrupted, yet {s} sends next",
                                 n.path, {"sender": s, "blocking": blocking}))
    return out


def check_total_synchronisation(tree: ChoreoTree, hb: HBGraph, only=None) -> list:
    """For motions n -> n', every executor of n takes part in some message
    that happens before n'. `only` restricts the n to check."""
    touching = {}
    for m in tree.events:
        if m.kind == "msg":
            for p in (m.event.sender, m.event.receiver):
                touching[p] = touching.get(p, 0) | (1 << m.index)
    out = []
    for n in tree.primary_motions():
        if only is not None and n.path not in only:
            continue
        for m in hb.after(n):
            if m.kind != "motion":
                continue
            lost = [p for p in n.event.executors if not touching.get(p, 0) & hb.pred[m.index]]
            if lost:
                out.append(Violation("total_sync", "TSViolation",
                                     f"{', '.join(lost)} not told to switch from {n.describe()} "
                                     f"to {m.describe()}",
                                     n.path, {"participants": lost, "next": m.describe()}))
    return out


# --- syntactic walks -------------------------------------------------------

def _walk_prefixes(g, path="G"):
    """(path, prefix) for every prefix node of G, without unfolding."""
    if isinstance(g, GSeq):
        yield from _walk_prefix(g.prefix, path + "/prefix")
        yield from _walk_prefixes(g.rest, path + "/rest")
    elif isinstance(g, GRec):
        yield from _walk_prefixes(g.body, path + f"/rec {g.var}")


def _walk_prefix(g, path):
    yield path, g
    if isinstance(g, GPrefSeq):
        yield from _walk_prefix(g.first, path + "/1")
        yield from _walk_prefix(g.second, path + "/2")
    elif isinstance(g, GChoice):
        for i, a in enumerate(g.alts):
            yield from _walk_prefix(a, path + f"/alt{i}")
    elif isinstance(g, GSep):
        yield from _walk_prefix(g.left, path + "/left")
        yield from _walk_prefix(g.right, path + "/right")


def _motions_in(g):
    for _, x in _walk_prefix(g, ""):
        if isinstance(x, GMotion):
            yield x


class _Queries:
    """Runs validity queries and turns Unknown into a reported violation."""

    def __init__(self, bounds, depth, unknown_ok):
        self.bounds, self.depth, self.unknown_ok = bounds, depth, unknown_ok

    def verdict_violation(self, v, check, kind, message, path, **info):
        if v.valid:
            return None
        if v.unknown:
            if self.unknown_ok:
                return None
            return Violation(check, "Unknown", f"{message}: undecided ({v.reason})", path, info)
        wit = None if v.witness is None else {k: str(x) for k, x in sorted(v.witness.items())}
        if wit is not None:
            info = dict(info, witness=wit)
        return Violation(check, kind, message, path, info)


def check_total_choice(g, bounds, depth=DEFAULT_DEPTH, unknown_ok=False) -> list:
    q = _Queries(bounds, depth, unknown_ok)
    out = []
    for path, x in _walk_prefixes(g):
        if not isinstance(x, GChoice):
            continue
        guards = [head_message(a)[0].guard for a in x.alts]
        if any(gd == TRUE for gd in guards):
            continue
        goal = disj(*guards)
        v = check_validity(goal, bounds, depth)
        bad = q.verdict_violation(v, "total_choice", "IncompleteChoice",
                                  f"guards {show(goal)} do not cover every state", path)
        if bad:
            out.append(bad)
    return out


def check_fully_separated(g, system, bounds, depth=DEFAULT_DEPTH, unknown_ok=False) -> list:
    q = _Queries(bounds, depth, unknown_ok)
    out = []
    for path, x in _walk_prefixes(g):
        if not isinstance(x, GSep):
            continue
        p1, p2 = participants_of(x.left), participants_of(x.right)
        if p1 & p2:
            out.append(Violation("fully_separated", "NonPartition",
                                 f"{', '.join(sorted(p1 & p2))} on both sides of *", path))
            continue
        if x.partition is None:
            out.append(Violation("fully_separated", "MissingFootprintAnnotation",
                                 "separating conjunction without footprint partition", path))
            continue
        fp1, fp2 = x.partition
        v = footprints_disjoint(fp1, fp2, TRUE, bounds, depth)
        bad = q.verdict_violation(v, "fully_separated", "FootprintOverlap",
                                  f"partition {fp1} and {fp2} overlap", path)
        if bad:
            out.append(bad)
        for side, sub, fp, own in (("left", x.left, fp1, p1), ("right", x.right, fp2, p2)):
            for m in _motions_in(sub):
                for p, atom in m.items:
                    spec = system.spec(p, atom)
                    readers = {v.split(".", 1)[0] for v in free_vars(spec.assume) if "." in v}
                    if readers - own:
                        out.append(Violation(
                            "fully_separated", "CoupledAssumption",
                            f"assumption of {p}:{atom} reads state of "
                            f"{', '.join(sorted(readers - own))} across *", path + "/" + side))
                    if spec.footprint is None:
                        continue
                    v = footprint_within(spec.footprint, fp, spec.guarantee, bounds, depth)
                    bad = q.verdict_violation(v, "fully_separated", "FootprintEscapes",
                                              f"footprint of {p}:{atom} leaves {fp}",
                                              path + "/" + side)
                    if bad:
                        out.append(bad)
    return out


def check_motions(g, tree: ChoreoTree, system, bounds, depth=DEFAULT_DEPTH, unknown_ok=False):
    """Each joint motion covers exactly its scope and its primitives are
    compatible. Returns (violations, derivations by path)."""
    out, derivs = [], {}
    for n in tree.primary_motions():
        if n.scope is None:
            continue
        have = set(n.event.executors)
        if have != n.scope:
            missing = sorted(n.scope - have)
            out.append(Violation("total_motion", "PartialMotion",
                                 f"{n.describe()} has no primitive for {', '.join(missing)}",
                                 n.path, {"missing": missing}))
    for path, x in _walk_prefixes(g):
        if not isinstance(x, GMotion):
            continue
        try:
            d = check_compatible(system, x, bounds, depth=depth, unknown_ok=unknown_ok)
            derivs[path] = d.to_json()
        except CompositionError as exc:
            kind = exc.kind
            info = exc.to_json()
            info.pop("kind", None)
            info.pop("message", None)
            out.append(Violation("compatibility", kind, str(exc), path, info))
    return out, derivs


# --- the verdict -----------------------------------------------------------

CLAUSES = ("total_choice", "well_scoped", "total_compatible_motion", "synchronisable")


@dataclass
class WfReport:
    violations: list
    minimal_senders: dict
    derivations: dict
    scope: dict
    unsound: bool = False

    def by_clause(self):
        groups = {c: [] for c in CLAUSES}
        for v in self.violations:
            if v.check == "total_choice":
                groups["total_choice"].append(v)
            elif v.check in ("scope", "fully_separated"):
                groups["well_scoped"].append(v)
            elif v.check in ("total_motion", "compatibility"):
                groups["total_compatible_motion"].append(v)
            else:
                groups["synchronisable"].append(v)
        return groups

    @property
    def ok(self):
        return not self.violations

    @property
    def only_unknown(self):
        return bool(self.violations) and all(v.kind == "Unknown" for v in self.violations)

    def kinds(self):
        return sorted({v.kind for v in self.violations})

    def to_json(self):
        groups = self.by_clause()
        out = {
            "well_formed": self.ok,
            "clauses": {c: {"ok": not vs, "violations": [v.to_json() for v in vs]}
                        for c, vs in groups.items()},
            "minimal_senders": {k: {"sender": s, "messages": ms}
                                for k, (s, ms) in sorted(self.minimal_senders.items())},
            "compatibility": dict(sorted(self.derivations.items())),
            "scope": self.scope,
            "readings": {
                "hb_case_1": "n' sender is n's sender or receiver",
                "hb_case_2": "applies when at least one event is a motion",
                "unfolding": "each recursion unfolded once; shadow copy supplies successors",
            },
        }
        if self.unsound:
            out["unsound"] = "unknown verdicts were assumed valid"
        return out


def check_wellformed(system, depth=DEFAULT_DEPTH, unknown_ok=False) -> WfReport:
    g = system.global_type
    bounds = system.bounds_for()
    tree = build_tree(g)
    everyone = participants_of(g)
    violations = []
    violations += check_total_choice(g, bounds, depth, unknown_ok)
    violations += scope_label(tree, everyone)
    violations += check_fully_separated(g, system, bounds, depth, unknown_ok)
    motion_v, derivs = check_motions(g, tree, system, bounds, depth, unknown_ok)
    violations += motion_v
    hb = happens_before(tree)
    senders, umc, mm = check_unique_minimal_communication(tree, hb)
    violations += umc + mm
    violations += check_sender_readiness(tree, senders, system)
    # a motion without unique minimal communication already failed; its
    # total synchronisation would fail for the same reason
    violations += check_total_synchronisation(tree, hb, only=set(senders))
    return WfReport(violations, senders, derivs, scope_labels(tree), unsound=unknown_ok)


def compat_report(system, depth=DEFAULT_DEPTH, unknown_ok=False) -> dict:
    """Per joint motion: its composite contract, or why composition failed."""
    bounds = system.bounds_for()
    rows = {}
    for path, x in _walk_prefixes(system.global_type):
        if not isinstance(x, GMotion):
            continue
        row = {"executors": [f"{p}:{a}" for p, a in x.items]}
        try:
            row["ok"] = True
            row["contract"] = check_compatible(system, x, bounds, depth=depth,
                                               unknown_ok=unknown_ok).to_json()
        except CompositionError as exc:
            row["ok"] = False
            row["error"] = exc.to_json()
        rows[path] = row
    return rows
