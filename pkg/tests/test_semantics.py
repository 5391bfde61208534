from fractions import Fraction as F

import pytest

from choreoverify.model import MotionAtom
from choreoverify.semantics import (
    AMotion, Comm, CondTaken, ConsumptionError, Machine, MotionAdvance, Running, Tau,
    consume, simulate,
)
from choreoverify.syntax.parser import load_system, parse_expr as E, parse_process
from choreoverify.syntax.render import render_global
from choreoverify.logic import free_vars

from _support import fixture


def _basic_machine():
    m = Machine(fixture("basic"))
    return m, m.initial()


# -- enabled steps -----------------------------------------------------------------------

def test_first_steps_of_basic():
    m, c = _basic_machine()
    labels = [l for l, _ in m.enabled_steps(c)]
    assert labels == [CondTaken("Cart", "then"), CondTaken("Cart", "else")]
    c1 = next(n for l, n in m.enabled_steps(c) if l.branch == "then")
    assert [l for l, _ in m.enabled_steps(c1)] == [Comm("Cart", "arrive", F(4), "GRobot")]


@pytest.mark.parametrize("t,x,enabled", [(F(4), F(4), True), (F(3), F(7, 2), False)])
def test_noninterruptible_completion(t, x, enabled):
    # t_m = 2 * sqrt((4 - 0) / 1) = 4
    m, c = _basic_machine()
    atom = MotionAtom("m_move", (E("0"), E("4"), E("1")))
    cont = parse_process("rec X . GRobot!ready . X")
    cc = c.copy(running={"Cart": Running(atom, t, cont)},
                stores=dict(c.stores, **{"Cart.x": x, "Cart.v": F(0)}))
    taus = [l for l, _ in m.enabled_steps(cc) if isinstance(l, Tau)]
    assert (taus == [Tau("non-interrupt", "Cart", "m_move(0, 4, 1)")]) is enabled


def test_interruptible_motion_takes_a_message():
    m, c = _basic_machine()
    cc = c.copy(procs=dict(c.procs, Cart=parse_process("rec X . GRobot!ready . X")),
                running={"GRobot": Running(MotionAtom("work"), F(1),
                                           parse_process("rec X . Cart?ready . X"))})
    steps = m.enabled_steps(cc)
    assert [l for l, _ in steps] == [Comm("Cart", "ready", None, "GRobot")]
    _, after = steps[0]
    assert "GRobot" not in after.running


# -- consumption ---------------------------------------------------------------------------

def test_consume_picks_the_alternative():
    s = fixture("basic")
    g = consume(s, s.global_type, Comm("Cart", "arrive", F(4), "GRobot"))
    assert render_global(g).startswith("(Cart -> RRobot : free . (dt<Cart: m_move(5, 9, 1), GRobot: work>")


def test_consume_unknown_message():
    s = fixture("basic")
    with pytest.raises(ConsumptionError):
        consume(s, s.global_type, Comm("Cart", "arrive", F(4), "Prod"))


def test_consume_across_a_star():
    s = fixture("good-star-scoped")
    with pytest.raises(ConsumptionError):
        consume(s, s.global_type, Comm("p", "l", None, "r"))


def test_consume_advance():
    s = fixture("good-star-scoped")
    moving = (("p", "hold", F(0)), ("q", "hold", F(0)), ("r", "hold", F(0)))
    g = consume(s, s.global_type, MotionAdvance(moving, F(1, 2)))
    found = []

    def walk(x):
        if isinstance(x, AMotion):
            found.append(x.t)
        for v in getattr(x, "__dict__", {}).values():
            if isinstance(v, tuple):
                for y in v:
                    walk(y)
            elif hasattr(v, "__dict__"):
                walk(v)
    walk(g)
    assert found and set(found) == {F(1, 2)}
    with pytest.raises(ConsumptionError):
        consume(s, s.global_type, MotionAdvance(moving[:2], F(1, 2)))


# -- simulation ------------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["basic", "sorting"])
def test_short_runs_are_clean(name):
    for seed in range(3):
        tr = simulate(fixture(name), seed=seed, max_steps=1500)
        assert tr.ok, tr.alarms
        assert tr.steps == 1500


def test_same_seed_same_trace():
    a = simulate(fixture("sorting"), seed=7, max_steps=600)
    b = simulate(fixture("sorting"), seed=7, max_steps=600)
    assert a.digest() == b.digest()
    assert list(a.lines()) == list(b.lines())


def test_joint_advance_moves_every_clock_by_dt():
    # motions under different sides of a * may have started at different
    # times; each advance still adds the same increment to all of them
    import random
    m = Machine(fixture("sorting"))
    c = m.initial()
    rng = random.Random(3)
    advances = 0
    for _ in range(800):
        steps = m.enabled_steps(c)
        label, nxt = steps[rng.randrange(len(steps))]
        if isinstance(label, MotionAdvance):
            advances += 1
            assert set(label.executors) == set(c.running) == set(nxt.running)
            for p, r in c.running.items():
                assert nxt.running[p].t == r.t + label.dt
            assert nxt.time == c.time + label.dt
        c = nxt
    assert advances > 50


def test_crossing_carts_collide_at_nine_halves():
    for seed in (0, 1, 2):
        tr = simulate(fixture("crossing-carts"), seed=seed, max_steps=2000)
        assert tr.alarm_kinds() == ["Collision"]
        assert F(tr.alarms[0]["time"]) == F(9, 2)


def test_extra_message_breaks_consumption():
    tr = simulate(fixture("basic-extra-message"), seed=0, max_steps=200)
    assert tr.alarm_kinds() == ["ConsumptionError"]
    assert tr.alarms[0]["step"] < 200


INPUTS = """system Follow;
participants {
  A { vars x; geom box(x, x + 1, 0, 1, 0, 1); init x == 0; }
  B { vars y; inputs x; geom box(y, y + 1, 0, 1, 3, 4); init y == 0; }
}
motion A.stay() {
  pre x == 0; guarantee x == 0; post x == 0;
  footprint box(0, 1, 0, 1, 0, 1); duration [0, inf); mode interrupt;
  trajectory { x = 0; }
}
motion B.copy() {
  pre y == x; guarantee y == x; post y == x;
  footprint box(-1, 2, 0, 1, 3, 4); duration [0, inf); mode interrupt;
  trajectory { y = x; }
}
bounds { A.x in [-1, 1]; B.y in [-1, 1]; clock in [0, 10];
         px in [-2, 3]; py in [-1, 2]; pz in [-1, 5]; }
global G = rec t . dt<A: stay, B: copy> . A -> B : go . t;
process A = rec X . run stay . B!go . X;
process B = rec X . run copy . A?go . X;
"""


def test_inputs_read_the_peer_state():
    s = load_system(INPUTS)
    assert free_vars(s.motions[("B", "copy")].pre) == {"A.x", "B.y"}
    tr = simulate(s, seed=0, max_steps=300)
    assert tr.ok, tr.alarms
    for rec in tr.records:
        st = rec["stores"]
        assert set(st) == {"A.x", "B.y"}
