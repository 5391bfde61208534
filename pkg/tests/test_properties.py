"""Randomised properties, 500 examples each."""

import random
from fractions import Fraction

from hypothesis import HealthCheck, event, given, settings, strategies as st

from choreoverify.bench import LaneParams, gen_lanes
from choreoverify.contracts import (
    CompositionError, compose_pair, interrupt_combine, leaf_contract, refines,
)
from choreoverify.logic import check_validity
from choreoverify.logic.expr import (
    And, BinOp, BoolConst, Call, Cmp, Implies, Ite, Neg, Not, Num, Or, Pow, Var, show,
)
from choreoverify.logic.footprint import Box, fp_union
from choreoverify.model import (
    BranchEntry, Duration, GChoice, GMessage, GMotion, GPrefSeq, GRec, GRecVar, GSep, GSeq,
    LBranch, LBranchDefault, LMotion, LRec, LRecVar, LSelect, Mode, MotionAtom, MotionSpec,
    PhysicalInterface, Refinement, SelectEntry, System, equi_equal, participants_of, unfold,
)
from choreoverify.projection import MergeUndefined, ProjectionError, merge_local, merge_motion, project
from choreoverify.semantics import simulate
from choreoverify.syntax.parser import (
    ParseFailure, parse_expr, parse_global, parse_local, parse_process, parse_system,
)
from choreoverify.syntax.render import render_global, render_local
from choreoverify.typecheck import geom_overlap_query, subtype, type_process
from choreoverify.wellformed import build_tree, happens_before, scope_label, scope_labels

from _support import agcomp_system, fixture, fixture_text

N = 500
PROP = settings(max_examples=N, deadline=None, derandomize=True,
                suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large,
                                       HealthCheck.filter_too_much])

I, NI = Mode.INTERRUPT, Mode.NONINTERRUPT


# --- expressions -----------------------------------------------------------------------

small = st.fractions(min_value=-20, max_value=20, max_denominator=4)


def _folded(e):
    # the parser folds literal negation and literal division
    if isinstance(e, Neg):
        return not isinstance(e.arg, Num)
    if isinstance(e, BinOp) and e.op == "/":
        return not (isinstance(e.left, Num) and isinstance(e.right, Num))
    return True


def terms(names=("x", "y", "z")):
    leaf = st.one_of(small.map(Num), st.sampled_from(names).map(Var))

    def grow(t):
        return st.one_of(
            st.tuples(st.sampled_from("+-*/"), t, t).map(lambda a: BinOp(*a)).filter(_folded),
            t.map(Neg).filter(_folded),
            st.tuples(t, st.integers(2, 3)).map(lambda a: Pow(*a)),
            st.tuples(st.sampled_from(["min", "max"]), t, t).map(lambda a: Call(a[0], (a[1], a[2]))),
            t.map(lambda a: Call("abs", (a,))),
            t.map(lambda a: Call("sqrt", (a,))),
        )
    return st.recursive(leaf, grow, max_leaves=6)


def formulas(names=("x", "y", "z")):
    t = terms(names)
    atom = st.one_of(
        st.tuples(st.sampled_from(["<", "<=", ">", ">=", "==", "!="]), t, t).map(lambda a: Cmp(*a)),
        st.booleans().map(BoolConst),
    )

    def flat(cls):
        def build(parts):
            out = []
            for p in parts:
                out.extend(p.args if isinstance(p, cls) else (p,))
            return cls(tuple(out))
        return build

    def grow(f):
        return st.one_of(
            st.lists(f, min_size=2, max_size=3).map(flat(And)),
            st.lists(f, min_size=2, max_size=3).map(flat(Or)),
            f.map(Not),
            st.tuples(f, f).map(lambda a: Implies(*a)),
            st.tuples(f, t, t).map(lambda a: Cmp("<=", Ite(*a), a[1])),
        )
    return st.recursive(atom, grow, max_leaves=5)


@PROP
@given(formulas())
def test_expression_show_parse_round_trip(e):
    assert parse_expr(show(e)) == e


# --- global types ------------------------------------------------------------------------

PTS = ("p", "q", "r", "s")
LABELS = ("a", "b", "c", "d")


@st.composite
def messages(draw, sender=None, label=None):
    s = sender or draw(st.sampled_from(PTS))
    r = draw(st.sampled_from([p for p in PTS if p != s]))
    lab = label or draw(st.sampled_from(LABELS))
    guard = draw(st.sampled_from([BoolConst(True), Cmp(">", Var("x"), Num(Fraction(0)))]))
    ref = draw(st.sampled_from([Refinement(), Refinement("real", Cmp(">=", Var("nu"), Num(Fraction(0))))]))
    return GMessage(s, r, lab, guard, ref)


@st.composite
def motions(draw):
    who = draw(st.lists(st.sampled_from(PTS), min_size=1, max_size=4, unique=True))
    return GMotion(tuple((p, MotionAtom(draw(st.sampled_from(["hold", "stay"])))) for p in who))


BOXES = (Box(*(Num(Fraction(v)) for v in (0, 1, 0, 1, 0, 1))),
         Box(*(Num(Fraction(v)) for v in (0, 1, 0, 1, 2, 3))))


@st.composite
def prefixes(draw, depth=3):
    kinds = ["msg", "motion"] + (["seq", "seq", "choice", "sep"] if depth > 0 else [])
    k = draw(st.sampled_from(kinds))
    if k == "msg":
        return draw(messages())
    if k == "motion":
        return draw(motions())
    if k == "seq":
        return GPrefSeq(draw(prefixes(depth - 1)), draw(prefixes(depth - 1)))
    if k == "choice":
        s = draw(st.sampled_from(PTS))
        labs = draw(st.lists(st.sampled_from(LABELS), min_size=2, max_size=3, unique=True))
        alts = []
        for lab in labs:
            m = draw(messages(sender=s, label=lab))
            if draw(st.booleans()):
                m = GPrefSeq(m, draw(prefixes(depth - 1)))
            alts.append(m)
        return GChoice(tuple(alts))
    part = BOXES if draw(st.booleans()) else None
    return GSep(draw(prefixes(depth - 1)), draw(prefixes(depth - 1)), part)


@st.composite
def globals_(draw):
    body = GRecVar("t")
    for _ in range(draw(st.integers(1, 2))):
        body = GSeq(draw(prefixes()), body)
    return GRec("t", body)


@PROP
@given(globals_())
def test_global_render_parse_round_trip(g):
    assert parse_global(render_global(g)) == g


@PROP
@given(globals_())
def test_happens_before_is_a_strict_partial_order(g):
    tree = build_tree(g)
    hb = happens_before(tree)
    for i, reach in enumerate(hb.reach):
        assert not reach >> i & 1                       # irreflexive
        j, m = 0, reach
        while m:
            if m & 1:
                assert hb.reach[j] & reach == hb.reach[j]  # transitive
                assert not hb.reach[j] >> i & 1            # antisymmetric
            m >>= 1
            j += 1
    # immediate edges generate the same order
    for i, imm in enumerate(hb.immediate):
        assert imm & hb.reach[i] == imm


@PROP
@given(globals_(), st.integers(0, 10**6))
def test_scope_labels_do_not_depend_on_visit_order(g, seed):
    everyone = participants_of(g)
    t1, t2 = build_tree(g), build_tree(g)
    v1 = scope_label(t1, everyone)
    v2 = scope_label(t2, everyone, random.Random(seed))
    assert scope_labels(t1) == scope_labels(t2)
    assert [v.to_json() for v in v1] == [v.to_json() for v in v2]


@PROP
@given(globals_(), st.sampled_from(PTS))
def test_project_after_unfold(g, r):
    def attempt(x):
        try:
            return project(x, r)
        except ProjectionError as exc:
            return exc.reason
    a, b = attempt(g), attempt(unfold(g))
    event("projection fails" if isinstance(a, str) else "projection defined")
    if isinstance(a, str) or isinstance(b, str):
        assert a == b
    else:
        assert equi_equal(a, b)


# --- parser totality -------------------------------------------------------------------

@st.composite
def mangled_sources(draw):
    text = fixture_text(draw(st.sampled_from(["basic", "sorting", "good-umc", "bad-umc"])))
    for _ in range(draw(st.integers(1, 4))):
        i = draw(st.integers(0, len(text)))
        op = draw(st.sampled_from(["cut", "insert", "dup"]))
        if op == "cut":
            text = text[:i] + text[i + draw(st.integers(1, 12)):]
        elif op == "insert":
            text = text[:i] + draw(st.text(alphabet="(){};.,<>*+-!?:=|&[]$ \nxpq0", max_size=4)) + text[i:]
        else:
            j = draw(st.integers(i, min(len(text), i + 20)))
            text = text[:j] + text[i:j] + text[j:]
    return text


@PROP
@given(st.one_of(mangled_sources(), st.text(max_size=60)))
def test_parser_is_total(text):
    out = parse_system(text)
    if isinstance(out, list):
        assert out and all(d.severity == "error" and d.code for d in out)
    else:
        assert isinstance(out, System)


# --- local types and merging ----------------------------------------------------------------

ATOMS = ("work", "brief", "crowd")


@st.composite
def locals_(draw, depth=2, with_select=True):
    if depth == 0:
        return LRecVar("X")
    kinds = ["motion", "branch", "default"] + (["select"] if with_select else [])
    k = draw(st.sampled_from(kinds))
    sub = lambda: draw(locals_(depth - 1, with_select))
    if k == "motion":
        return LMotion(MotionAtom(draw(st.sampled_from(ATOMS))), sub())
    labs = draw(st.lists(st.sampled_from(LABELS), min_size=1, max_size=3, unique=True))
    if k == "select":
        return LSelect(tuple(SelectEntry("Cart", lab, sub()) for lab in labs))
    entries = tuple(BranchEntry(lab, sub()) for lab in labs)
    if k == "branch":
        return LBranch("Cart", entries)
    return LBranchDefault("Cart", entries, MotionAtom(draw(st.sampled_from(ATOMS))), sub())


def _merge(a, b):
    try:
        return merge_local(a, b)
    except MergeUndefined:
        return None


@PROP
@given(locals_())
def test_merge_idempotent(t):
    assert equi_equal(merge_local(t, t), t)


@PROP
@given(locals_(with_select=False), locals_(with_select=False))
def test_merge_commutative(a, b):
    m1, m2 = _merge(a, b), _merge(b, a)
    event("merge undefined" if m1 is None else "merge defined")
    assert (m1 is None) == (m2 is None)
    if m1 is not None:
        assert equi_equal(m1, m2)


@st.composite
def branches(draw, depth=2):
    if depth == 0:
        return LRecVar("X")
    labs = draw(st.lists(st.sampled_from(LABELS), min_size=1, max_size=3, unique=True))
    return LBranch("Cart", tuple(BranchEntry(lab, draw(branches(depth - 1))) for lab in labs))


@PROP
@given(branches(), branches(), branches())
def test_merge_associative_on_branches(a, b, c):
    left = _merge(_merge(a, b), c)
    right = _merge(a, _merge(b, c))
    assert left is not None and right is not None
    assert equi_equal(left, right)


# --- subtyping -----------------------------------------------------------------------------------

@st.composite
def wider(draw, t):
    """A type that is a subtype of t: more receptions, fewer selections,
    defaults added to plain branches."""
    if isinstance(t, LRecVar):
        return t
    if isinstance(t, LMotion):
        return LMotion(t.atom, draw(wider(t.cont)))
    if isinstance(t, LSelect):
        keep = draw(st.lists(st.sampled_from(range(len(t.entries))), min_size=1,
                             max_size=len(t.entries), unique=True))
        return LSelect(tuple(SelectEntry(e.peer, e.label, draw(wider(e.cont)))
                             for i, e in enumerate(t.entries) if i in keep))
    have = {e.label for e in t.entries}
    extra = draw(st.lists(st.sampled_from([l for l in LABELS + ("e", "f") if l not in have]),
                          max_size=2, unique=True))
    entries = tuple(BranchEntry(e.label, draw(wider(e.cont))) for e in t.entries)
    entries += tuple(BranchEntry(lab, LRecVar("X")) for lab in extra)
    if isinstance(t, LBranchDefault):
        return LBranchDefault(t.peer, entries, t.atom, draw(wider(t.default)))
    if draw(st.booleans()):
        return LBranchDefault(t.peer, entries, MotionAtom(draw(st.sampled_from(ATOMS))), LRecVar("X"))
    return LBranch(t.peer, entries)


def _sub(a, b):
    return subtype(LRec("X", a), LRec("X", b), agcomp_system(), "GRobot").verdict


@PROP
@given(locals_())
def test_subtype_reflexive(t):
    assert _sub(t, t).valid


@PROP
@given(st.data())
def test_subtype_transitive(data):
    t3 = data.draw(locals_())
    t2 = data.draw(wider(t3))
    t1 = data.draw(wider(t2))
    assert _sub(t2, t3).valid and _sub(t1, t2).valid
    assert _sub(t1, t3).valid


@PROP
@given(locals_(), locals_(), locals_())
def test_subtype_transitive_on_random_triples(a, b, c):
    chained = _sub(a, b).valid and _sub(b, c).valid
    event("chained" if chained else "not chained")
    if chained:
        assert _sub(a, c).valid


# --- motion specs: refinement and merging ------------------------------------------------------

def _k(v):
    return Num(Fraction(v))


@st.composite
def specs(draw, mode=None):
    lo = draw(st.integers(-4, 4))
    hi = lo + draw(st.integers(0, 4))
    x = Var("A.x")
    pre = And((Cmp(">=", x, _k(lo)), Cmp("<=", x, _k(hi))))
    g = Cmp("<=", x, _k(hi + draw(st.integers(0, 3))))
    post = Cmp(">=", x, _k(lo - draw(st.integers(0, 3))))
    b = [Fraction(draw(st.integers(-3, 3))) for _ in range(3)]
    fp = Box(_k(b[0]), _k(b[0] + 1), _k(b[1]), _k(b[1] + 1), _k(b[2]), _k(b[2] + 1))
    d_lo = draw(st.integers(0, 5))
    d_hi = draw(st.one_of(st.none(), st.integers(d_lo, 10)))
    m = mode or draw(st.sampled_from([I, NI]))
    return MotionSpec("m", "A", (), pre, BoolConst(True), g, post, fp,
                      Duration(_k(d_lo), None if d_hi is None else _k(d_hi)), m)


@st.composite
def abstractions(draw, a):
    """A spec that a refines: stronger pre, weaker guarantee and post,
    larger footprint, and a duration window in the matching direction."""
    x = Var("A.x")
    pre = And((a.pre, Cmp("<=", x, _k(draw(st.integers(-4, 8))))))
    g = Or((a.guarantee, Cmp(">=", x, _k(draw(st.integers(-8, 8))))))
    post = Or((a.post, Cmp("==", x, _k(draw(st.integers(-8, 8))))))
    grow = [Fraction(draw(st.integers(0, 2))) for _ in range(6)]
    s = a.footprint.sides()
    fp = Box(*(Num(s[i].value - grow[i]) if i % 2 == 0 else Num(s[i].value + grow[i])
               for i in range(6)))
    lo, hi = a.duration.lo.value, None if a.duration.hi is None else a.duration.hi.value
    if a.mode is I:
        nlo = lo - min(lo, draw(st.integers(0, 2)))
        nhi = None if hi is None or draw(st.booleans()) else hi + draw(st.integers(0, 3))
    else:
        nlo = lo + draw(st.integers(0, 3))
        if hi is None:
            nhi = draw(st.one_of(st.none(), st.integers(int(nlo), int(nlo) + 5)))
        else:
            nhi = max(nlo, hi - draw(st.integers(0, 3)))
            nhi = min(nhi, hi)
            if nhi < nlo:
                nlo = nhi
    d = Duration(_k(nlo), None if nhi is None else _k(nhi))
    return MotionSpec("m", "A", (), pre, a.assume, g, post, fp, d, a.mode)


SB = {"A.x": (-12, 12), "px": (-10, 10), "py": (-10, 10), "pz": (-10, 10),
      "clock": (0, 20)}


@PROP
@given(specs())
def test_refines_reflexive(a):
    assert refines(a, a, SB).verdict.valid


@PROP
@given(st.data())
def test_refines_transitive(data):
    a = data.draw(specs())
    b = data.draw(abstractions(a))
    c = data.draw(abstractions(b))
    assert refines(a, b, SB).verdict.valid
    assert refines(b, c, SB).verdict.valid
    assert refines(a, c, SB).verdict.valid


@PROP
@given(st.sampled_from([I, NI]).flatmap(lambda m: st.tuples(specs(m), specs(m))))
def test_merged_motion_refines_both(pair):
    a, b = pair
    m = merge_motion(a, b)
    assert refines(m, a, SB).verdict.valid
    assert refines(m, b, SB).verdict.valid


@PROP
@given(st.sampled_from([I, NI]), st.sampled_from([I, NI]), st.sampled_from([I, NI]))
def test_interrupt_combine_algebra(a, b, c):
    assert interrupt_combine(a, b) is interrupt_combine(b, a)
    assert interrupt_combine(interrupt_combine(a, b), c) is interrupt_combine(a, interrupt_combine(b, c))
    assert interrupt_combine(I, a) is a


@PROP
@given(specs(), specs(), st.integers(0, 4))
def test_compose_commutes(a, b, gap):
    b = MotionSpec("n", "B", (), *[getattr(b, f) for f in
                                   ("pre", "assume", "guarantee", "post")],
                   Box(*(_k(v) for v in (0, 1, 0, 1, 4 + gap, 5 + gap))), b.duration, b.mode)
    a = MotionSpec("m", "A", (), a.pre, a.assume, a.guarantee, a.post,
                   Box(*(_k(v) for v in (0, 1, 0, 1, 0, 1 + gap))), a.duration, a.mode)
    ca, cb = leaf_contract("A", MotionAtom("m"), a), leaf_contract("B", MotionAtom("n"), b)
    target = fp_union(a.footprint, b.footprint)

    def go(x, y, fx, fy):
        try:
            return compose_pair(x, y, (fx, fy), target, SB)
        except CompositionError as exc:
            return exc.kind
    r1 = go(ca, cb, a.footprint, b.footprint)
    r2 = go(cb, ca, b.footprint, a.footprint)
    event(r1 if isinstance(r1, str) else "composed")
    if isinstance(r1, str) or isinstance(r2, str):
        assert r1 == r2
    else:
        assert refines(r1, r2, SB).verdict.valid and refines(r2, r1, SB).verdict.valid
        assert r1.duration == r2.duration and r1.mode is r2.mode


# --- typing ---------------------------------------------------------------------------------

FWD = """motion Cart.fwd(xf: real) {
  pre xf > x; guarantee x == x; post x == xf && v == 0;
  footprint box(-1, 21, 0, 1, -1/2, 1/2);
  duration [0, inf); mode interrupt;
  trajectory { x = x; v = 0; }
}

"""


def _fwd_system():
    from choreoverify.syntax.parser import load_system
    return load_system(fixture_text("basic").replace("bounds {", FWD + "bounds {", 1))


_FWD = []


@PROP
@given(st.integers(-4, 6), st.integers(-4, 12), st.sampled_from(["<=", ">=", "=="]),
       st.integers(-5, 15))
def test_typing_is_monotone_in_context(target, start, op, k):
    if not _FWD:
        _FWD.append(_fwd_system())
    s = _FWD[0]
    p = parse_process(f"run fwd({target}) . rec X . run m_idle({target}) . X")
    t = parse_local(f"dt<fwd({target})> . rec t . dt<m_idle({target})> . t")
    sigma = Cmp("==", Var("Cart.x"), _k(start))
    stronger = And((sigma, Cmp(op, Var("Cart.x"), _k(k))))
    v1, _, _ = type_process(s, "Cart", p, t, sigma)
    v2, _, _ = type_process(s, "Cart", p, t, stronger)
    event(f"weak context {v1.status}")
    if v1.valid:
        assert not v2.refuted


# --- checker ----------------------------------------------------------------------------------

@st.composite
def linear_formulas(draw):
    names = ("x", "y")

    def lit():
        a, b = draw(st.integers(-3, 3)), draw(st.integers(-3, 3))
        c = draw(st.integers(-6, 6))
        lhs = BinOp("+", BinOp("*", _k(a), Var("x")), BinOp("*", _k(b), Var("y")))
        return Cmp(draw(st.sampled_from(["<", "<=", ">", ">=", "=="])), lhs, _k(c))
    parts = [lit() for _ in range(draw(st.integers(1, 4)))]
    shape = draw(st.sampled_from(["or", "and", "imp"]))
    if shape == "or" or len(parts) == 1:
        return Or(tuple(parts)) if len(parts) > 1 else parts[0]
    if shape == "and":
        return And(tuple(parts))
    return Implies(And(tuple(parts[:-1])) if len(parts) > 2 else parts[0], parts[-1])


@PROP
@given(linear_formulas())
def test_depth_never_flips_a_decided_verdict(f):
    b = {"x": (-2, 2), "y": (-2, 2)}
    shallow = check_validity(f, b, depth=3)
    deep = check_validity(f, b, depth=10)
    event(shallow.status)
    if not shallow.unknown:
        assert deep.status == shallow.status


# --- semantics ------------------------------------------------------------------------------------

@PROP
@given(st.integers(0, 10**6), st.sampled_from(["good-umc", "good-star-scoped", "sorting"]))
def test_simulation_is_deterministic(seed, name):
    a = simulate(fixture(name), seed=seed, max_steps=60)
    b = simulate(fixture(name), seed=seed, max_steps=60)
    assert a.digest() == b.digest()


def _two_boxes(a, b):
    ifaces = {}
    for name, (x0, z0) in (("P", a), ("Q", b)):
        geom = Box(BinOp("+", Var(f"{name}.x"), _k(0)), BinOp("+", Var(f"{name}.x"), _k(1)),
                   _k(0), _k(1), _k(z0), _k(z0 + 1))
        ifaces[name] = PhysicalInterface(name, ("x",), (), geom, Cmp("==", Var(f"{name}.x"), _k(x0)))
    return System("S", ifaces, {}, None, {}, {"P.x": (-5, 5), "Q.x": (-5, 5), "px": (-10, 10),
                                              "py": (-10, 10), "pz": (-10, 10)})


@PROP
@given(st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
       st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
def test_initial_geometry_check_is_symmetric(a, b):
    s = _two_boxes(a, b)
    bounds = s.bounds_for()
    v1 = check_validity(geom_overlap_query(s, "P", "Q"), bounds)
    v2 = check_validity(geom_overlap_query(s, "Q", "P"), bounds)
    assert v1.status == v2.status
    # boxes of unit size overlap iff both offsets are within 1
    event(v1.status)
    touching = abs(a[0] - b[0]) <= 1 and abs(a[1] - b[1]) <= 1
    assert v1.refuted == touching
