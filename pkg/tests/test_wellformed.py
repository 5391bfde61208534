import json
import random

import pytest

from choreoverify.bench import toy_source
from choreoverify.model import GChoice, GMessage, GRec, GRecVar, GSeq, participants_of
from choreoverify.syntax.parser import load_system, parse_expr as E, parse_global
from choreoverify.wellformed import (
    build_tree, check_total_choice, check_wellformed, happens_before, scope_label, scope_labels,
)

from _support import fixture, fixture_text

TOY_GLOBAL = "global G = "

PEEK = """motion p.peek() {
  pre x == 0; assume r.x == 0; guarantee x == 0; post x == 0;
  footprint box(0, 1, 0, 1, 0, 1);
  duration [0, inf); mode interrupt;
  trajectory { x = 0; }
}

"""


def toy(glob, extra=""):
    """The three-participant toy system with a different global type."""
    src = toy_source("bad-total-sync")
    head = src[:src.index(TOY_GLOBAL)]
    if extra:
        head = head.replace("bounds {", extra + "bounds {", 1)
    return load_system(head + TOY_GLOBAL + glob + ";\n")


def events(tree, what):
    return next(n for n in tree.events if n.describe() == what and n.copy == 0)


# -- the tree ---------------------------------------------------------------------

def test_tree_of_basic():
    tree = build_tree(fixture("basic").global_type)
    kinds = [n.kind for n in _nodes(tree.root) if n.copy == 0]
    assert kinds.count("+") == 1 and kinds.count("*") == 4
    plus = next(n for n in _nodes(tree.root) if n.kind == "+")
    assert plus.decoration[0] == "Cart"
    assert set(plus.decoration[1]) == {"GRobot", "RRobot"}


def test_tree_single_message():
    tree = build_tree(parse_global("rec t . p -> q : a . t"))
    assert len([n for n in tree.events if n.copy == 0]) == 1
    assert len(tree.back_edges) == 1


def _nodes(n):
    yield n
    for c in n.children:
        yield from _nodes(c)


# -- scope ----------------------------------------------------------------------------

def test_scope_of_green_box():
    s = fixture("basic")
    tree = build_tree(s.global_type)
    assert scope_label(tree, participants_of(s.global_type)) == []
    assert tree.root.scope == {"Cart", "GRobot", "RRobot"}
    seps = [n for n in _nodes(tree.root) if n.kind == "*" and n.copy == 0]
    splits = {(frozenset(n.children[0].scope), frozenset(n.children[1].scope)) for n in seps}
    assert (frozenset({"Cart", "GRobot"}), frozenset({"RRobot"})) in splits


def test_shared_participant_across_star():
    s = toy("rec t . (dt<p: hold, r: hold> *{box(-1, 2, -1, 2, -1, 4); box(-1, 2, -1, 2, 5, 8)} "
            "dt<p: stay, q: hold>) . p -> q : l . p -> r : m . t")
    r = check_wellformed(s)
    assert "NonPartition" in r.kinds()


def test_motion_outside_its_scope():
    # root scope deliberately too small: r escapes it
    tree = build_tree(parse_global("rec t . dt<p: hold, r: hold> . p -> r : m . t"))
    out = scope_label(tree, {"p", "q"})
    assert out and out[0].kind == "ScopeError"
    assert out[0].info["missing"] == ["r"]


def test_scope_is_independent_of_visit_order():
    s = fixture("good-star-scoped")
    base_tree = build_tree(s.global_type)
    scope_label(base_tree, participants_of(s.global_type))
    base = scope_labels(base_tree)
    for seed in range(20):
        tree = build_tree(s.global_type)
        scope_label(tree, participants_of(s.global_type), random.Random(seed))
        assert scope_labels(tree) == base


# -- happens before ---------------------------------------------------------------------

def test_hb_shared_participant():
    tree = build_tree(parse_global("rec t . dt<p: hold, q: hold> . p -> q : a . t"))
    hb = happens_before(tree)
    m, a = events(tree, "dt<p: hold, q: hold>"), events(tree, "p->q:a")
    assert hb.hb(m, a) and not hb.hb(a, m)


def test_hb_unrelated_messages():
    tree = build_tree(parse_global("rec t . p -> q : a . r -> s : b . t"))
    hb = happens_before(tree)
    assert not hb.hb(events(tree, "p->q:a"), events(tree, "r->s:b"))


def test_hb_is_a_strict_partial_order():
    for name in ("basic", "sorting", "good-umc", "bad-umc"):
        tree = build_tree(fixture(name).global_type)
        hb = happens_before(tree)
        pairs = set((a.index, b.index) for a, b in hb.edges())
        assert all(a != b for a, b in pairs)
        assert not any((b, a) in pairs for a, b in pairs)


def test_green_box_immediate_ready():
    tree = build_tree(fixture("basic").global_type)
    hb = happens_before(tree)
    m = next(n for n in tree.primary_motions()
             if [p for p, _ in n.event.items] == ["Cart", "GRobot"]
             and str(n.event.items[0][1]) == "m_move(5, 9, 1)")
    assert [x.describe() for x in hb.immediate_of(m)] == ["Cart->GRobot:ready"]


# -- synchronisability --------------------------------------------------------------------

@pytest.mark.parametrize("name,kind", [
    ("bad-umc", "UMCViolation"),
    ("bad-motion-motion", "MotionMotion"),
    ("bad-total-sync", "TSViolation"),
])
def test_counterexamples(name, kind):
    r = check_wellformed(fixture(name))
    assert r.kinds() == [kind]
    groups = r.by_clause()
    assert [c for c, vs in groups.items() if vs] == ["synchronisable"]


def test_minimal_senders_message():
    r = check_wellformed(fixture("bad-umc"))
    msg = r.violations[0].message
    assert "minimal senders" in msg and "are p and p'" in msg


@pytest.mark.parametrize("name", ["good-umc", "good-motion-motion", "good-star-scoped",
                                  "basic", "sorting"])
def test_well_formed(name):
    r = check_wellformed(fixture(name))
    assert r.ok, [v.to_json() for v in r.violations]


def test_basic_minimal_senders_are_unique():
    r = check_wellformed(fixture("basic"))
    assert len(r.minimal_senders) == 10
    senders = {s for s, _ in r.minimal_senders.values()}
    assert senders <= {"Cart", "GRobot", "RRobot"}


def test_sender_readiness():
    ok = toy("rec t . dt<p: hold, q: hold, r: hold> . p -> q : l . p -> r : l2 . t")
    assert check_wellformed(ok).ok
    g = "rec t . dt<Cart: m_move(5, 9, 1), GRobot: work, RRobot: work> . GRobot -> Cart : ok . " \
        "Cart -> RRobot : free . dt<Cart: m_move(9, 5, 1), GRobot: work, RRobot: work> . " \
        "Cart -> GRobot : back . Cart -> RRobot : back . t"
    src = fixture_text("basic")
    src = src[:src.index("global G")] + f"global G = {g};\n"
    r = check_wellformed(load_system(src))
    assert "SRViolation" in r.kinds()


# -- total choice and separation ------------------------------------------------------------

def test_total_choice_tautology():
    g = parse_global("rec t . (([x > 0] p -> q : a) + ([x <= 0] p -> q : b)) . t")
    assert check_total_choice(g, {"x": (-1, 1)}) == []


def test_total_choice_gap_has_witness():
    g = GRec("t", GSeq(GChoice((GMessage("p", "q", "a", E("x > 1")),)), GRecVar("t")))
    (v,) = check_total_choice(g, {"x": (-1, 1)})
    assert v.kind == "IncompleteChoice" and v.info["witness"] == {"x": "0"}


def test_assumption_reading_the_other_side():
    s = toy("rec t . ((dt<p: peek, q: hold> . p -> q : l . dt<p: stay, q: stay>) "
            "*{box(-1, 2, -1, 2, -1, 4); box(-1, 2, -1, 2, 5, 8)} dt<r: hold>) . "
            "p -> q : l . p -> r : l2 . t", PEEK)
    assert "fully_separated" in {v.check for v in check_wellformed(s).violations}


def test_identical_partition_overlaps():
    s = toy("rec t . ((dt<p: hold, q: hold> . p -> q : l . dt<p: stay, q: stay>) "
            "*{box(-1, 2, -1, 2, -1, 8); box(-1, 2, -1, 2, -1, 8)} dt<r: hold>) . "
            "p -> q : l . p -> r : l2 . t")
    r = check_wellformed(s)
    bad = [v for v in r.violations if v.check == "fully_separated"]
    assert bad and any("witness" in v.info for v in bad)


def test_report_is_deterministic():
    a = json.dumps(check_wellformed(fixture("sorting")).to_json(), sort_keys=True, default=str)
    b = json.dumps(check_wellformed(fixture("sorting")).to_json(), sort_keys=True, default=str)
    assert a == b
