import dataclasses
from fractions import Fraction

import pytest

from choreoverify.contracts import (
    BothNonInterruptible, DurationNotNested, FootprintOverlap, UnknownVerdict,
    check_compatible, compose_pair, duration_meet, interrupt_combine, leaf_contract, refines,
)
from choreoverify.logic import TRUE
from choreoverify.logic.footprint import Box, fp_union
from choreoverify.model import Duration, GMotion, MotionAtom, Mode
from choreoverify.syntax.parser import parse_expr as E
from choreoverify.wellformed import compat_report

from _support import agcomp_system, fixture

I, N = Mode.INTERRUPT, Mode.NONINTERRUPT


def atom(name, *args):
    return MotionAtom(name, tuple(E(str(a)) for a in args))


def leaf(owner, name, *args):
    s = agcomp_system()
    a = atom(name, *args)
    spec = s.spec(owner, a)
    return leaf_contract(owner, a, spec), spec.footprint


def compose(x, y):
    return compose_pair(x[0], y[0], (x[1], y[1]), fp_union(x[1], y[1]),
                        agcomp_system().bounds_for())


# -- interrupt combination -----------------------------------------------------

def test_combine_table():
    assert interrupt_combine(I, I) is I
    assert interrupt_combine(I, N) is N
    assert interrupt_combine(N, I) is N
    assert interrupt_combine(N, N) is N


# -- refinement --------------------------------------------------------------

def test_refines_is_reflexive_on_library():
    s = agcomp_system()
    b = s.bounds_for()
    for (owner, name), spec in s.motions.items():
        inst = spec.instantiate(tuple(E("1") if i == 2 else E(str(i * 4 + 5))
                                      for i in range(len(spec.params))))
        rep = refines(inst, inst, b)
        assert all(v.valid for v in rep.clauses), (owner, name, rep.to_json())


def test_noninterruptible_lower_bound_must_not_shrink():
    s = agcomp_system()
    mv = s.spec("Cart", atom("m_move", 5, 9, 1))
    assert mv.duration.lo == E("4") and mv.duration.hi is None
    abstract = dataclasses.replace(mv, guarantee=TRUE, duration=Duration(E("3")))
    rep = refines(mv, abstract, s.bounds_for())
    assert rep.clauses[6].refuted
    assert rep.failed() == (7, "duration")
    assert all(v.valid for v in rep.clauses[:6])


def test_interruptible_window_inclusion():
    s = agcomp_system()
    w = s.spec("GRobot", atom("work"))
    a = dataclasses.replace(w, duration=Duration(E("0"), E("5")))
    a2 = dataclasses.replace(w, duration=Duration(E("0"), E("10")))
    assert refines(a, a2, s.bounds_for()).verdict.valid
    assert refines(a2, a, s.bounds_for()).failed() == (7, "duration")


def test_stronger_guarantee_refines_weaker():
    s = agcomp_system()
    w = s.spec("GRobot", atom("work"))
    weak = dataclasses.replace(w, guarantee=E("GRobot.q >= 0"))
    assert refines(w, weak, s.bounds_for()).verdict.valid
    assert refines(weak, w, s.bounds_for()).failed() == (3, "guarantee")


def test_mode_mismatch_fails_clause_six():
    s = agcomp_system()
    w = s.spec("GRobot", atom("work"))
    rep = refines(w, dataclasses.replace(w, mode=N), s.bounds_for())
    assert rep.clauses[5].refuted


# -- composition ----------------------------------------------------------------

def test_move_with_work():
    c = compose(leaf("Cart", "m_move", 5, 9, 1), leaf("GRobot", "work"))
    assert c.duration == Duration(E("4"))
    assert c.mode is N
    assert [p for p, _ in c.executors] == ["Cart", "GRobot"]


def test_composition_commutes_up_to_order():
    x, y = leaf("Cart", "m_move", 5, 9, 1), leaf("GRobot", "work")
    c1, c2 = compose(x, y), compose(y, x)
    b = agcomp_system().bounds_for()
    assert refines(c1, c2, b).verdict.valid and refines(c2, c1, b).verdict.valid
    assert c1.duration == c2.duration and c1.mode is c2.mode


def test_both_noninterruptible():
    with pytest.raises(BothNonInterruptible) as exc:
        compose(leaf("Cart", "m_move", 5, 9, 1), leaf("GRobot", "pick"))
    assert exc.value.kind == "BothNonInterruptible"


def test_duration_not_nested():
    with pytest.raises(DurationNotNested):
        compose(leaf("Cart", "m_move", 5, 9, 1), leaf("GRobot", "brief"))


def test_footprint_overlap_has_witness():
    with pytest.raises(FootprintOverlap) as exc:
        compose(leaf("Cart", "m_move", 5, 9, 1), leaf("GRobot", "crowd"))
    w = {k: Fraction(v) for k, v in exc.value.witness.items()}
    assert 4 <= w["px"] <= 19 / Fraction(2) and -Fraction(1, 2) <= w["pz"] <= Fraction(1, 2)


def test_identical_partition_overlaps():
    x, y = leaf("Cart", "m_move", 5, 9, 1), leaf("GRobot", "work")
    with pytest.raises(FootprintOverlap):
        compose_pair(x[0], y[0], (x[1], x[1]), x[1], agcomp_system().bounds_for())


def test_unknown_is_a_failure_unless_allowed():
    # the z extent divides by a quantity that may vanish
    odd = Box(E("9"), E("11"), E("0"), E("3"), E("1 + (GRobot.q - GRobot.q) / GRobot.q"), E("2"))
    x = leaf("Cart", "m_move", 5, 9, 1)
    y = (leaf("GRobot", "work")[0], odd)
    b = agcomp_system().bounds_for()
    with pytest.raises(UnknownVerdict) as exc:
        compose_pair(x[0], y[0], (x[1], odd), fp_union(x[1], odd), b, depth=6)
    assert exc.value.kind == "UnknownVerdict"
    c = compose_pair(x[0], y[0], (x[1], odd), fp_union(x[1], odd), b, depth=6, unknown_ok=True)
    assert c.mode is N


def test_composite_duration_is_meet():
    a = Duration(E("1"), E("5"))
    b = Duration(E("2"))
    assert duration_meet(a, b) == Duration(E("2"), E("5"))
    assert duration_meet(a, a) == a


# -- whole-motion compatibility ---------------------------------------------------

def _joint_motions(system):
    return [r for r in compat_report(system).values()]


@pytest.mark.parametrize("name,count", [("basic", 10), ("sorting", 12)])
def test_every_joint_motion_of_the_fixtures_composes(name, count):
    rows = _joint_motions(fixture(name))
    assert len(rows) == count
    assert all(r["ok"] for r in rows), [r for r in rows if not r["ok"]]


def test_singleton_is_its_leaf():
    s = agcomp_system()
    m = GMotion((("GRobot", atom("work")),))
    d = check_compatible(s, m)
    spec = s.spec("GRobot", atom("work"))
    assert (d.contract.guarantee, d.contract.duration, d.contract.mode) == \
        (spec.guarantee, spec.duration, spec.mode)
    assert d.contract.provenance["leaf"] == "GRobot:work"


def test_green_box_pair():
    s = agcomp_system()
    m = GMotion((("Cart", atom("m_move", 5, 9, 1)), ("GRobot", atom("work"))))
    d = check_compatible(s, m)
    assert d.contract.mode is N
    assert d.to_json()["derivation"]["rule"] == "AGcomp"


def test_cart_with_pick_is_rejected():
    s = agcomp_system()
    m = GMotion((("Cart", atom("m_move", 5, 9, 1)), ("GRobot", atom("pick"))))
    with pytest.raises(BothNonInterruptible):
        check_compatible(s, m)
