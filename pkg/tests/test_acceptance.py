"""Acceptance checks 1-9. Each test prints one PASS or FAIL line.

Run `pytest tests/test_acceptance.py -v` to see the lines next to the test
names; they are printed with output capture switched off.
"""

import itertools
import math
import random
import time
from fractions import Fraction as F

import numpy as np
import pytest

from choreoverify.bench import LaneParams, gen_lanes
from choreoverify.cli import run
from choreoverify.contracts import CompositionError, compose_pair, leaf_contract
from choreoverify.logic import check_validity, emit_smtlib, validate_script
from choreoverify.logic.expr import BinOp, Call, Cmp, Num, Var, free_vars
from choreoverify.logic.footprint import fp_union
from choreoverify.logic.pointeval import compile_expr
from choreoverify.model import MotionAtom, equi_equal
from choreoverify.projection import project, project_all
from choreoverify.semantics import simulate
from choreoverify.syntax.parser import parse_local
from choreoverify.typecheck import type_session
from choreoverify.wellformed import check_wellformed, compat_report

import test_properties as props
from _support import WELL_TYPED, agcomp_system, fixture, fixture_path
from test_projection import CART_BASIC, PROD_SORTING, ROBOT_SORTING


@pytest.fixture
def verdict(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return say


# 1 -----------------------------------------------------------------------------------------

def test_c1_fixtures_pass_end_to_end(verdict):
    t0 = time.perf_counter()
    problems = []
    for name in WELL_TYPED:
        s = fixture(name)
        wf = check_wellformed(s)
        if not wf.ok:
            problems.append(f"{name} wf {wf.kinds()}")
        locals_ = project_all(s.global_type, s.participants)
        if set(locals_) != set(s.participants):
            problems.append(f"{name} project")
        ty = type_session(s)
        if not ty.ok:
            problems.append(f"{name} typecheck {ty.errors}")
        bad = [k for k, r in compat_report(s).items() if not r["ok"]]
        if bad:
            problems.append(f"{name} compat {bad}")
    took = time.perf_counter() - t0
    verdict(1, not problems and took < 60,
            f"basic and sorting pass wf/project/typecheck/compat in {took:.1f} s {problems or ''}")


# 2 -----------------------------------------------------------------------------------------

NEGATIVE = {"bad-umc": ["UMCViolation"], "bad-motion-motion": ["MotionMotion"],
            "bad-total-sync": ["TSViolation"], "good-umc": [], "good-motion-motion": [],
            "good-star-scoped": []}


def test_c2_negative_corpus(verdict):
    got = {n: check_wellformed(fixture(n)).kinds() for n in NEGATIVE}
    wrong = {n: k for n, k in got.items() if k != NEGATIVE[n]}
    verdict(2, not wrong, f"6 fixtures give the expected violation classes {wrong or ''}")


# 3 -----------------------------------------------------------------------------------------

def test_c3_projection_fidelity(verdict):
    cases = [("basic", "Cart", CART_BASIC), ("sorting", "GRobot", ROBOT_SORTING),
             ("sorting", "RRobot", ROBOT_SORTING), ("sorting", "Prod", PROD_SORTING)]
    bad = [f"{n}/{r}" for n, r, text in cases
           if not equi_equal(project(fixture(n).global_type, r), parse_local(text))]
    verdict(3, not bad, f"4 projections match the transcribed local types {bad or ''}")


# 4 -----------------------------------------------------------------------------------------

def _sqrt_argument(e):
    """r where e is `2 * sqrt(r)`."""
    assert isinstance(e, BinOp) and e.op == "*" and e.left == Num(F(2))
    assert isinstance(e.right, Call) and e.right.fn == "sqrt"
    return e.right.args[0]


def test_c4_physics_oracle(verdict):
    s = fixture("basic")
    declared = compile_expr(_sqrt_argument(s.motions[("Cart", "m_move")].duration.lo))
    violations, checked = [], 0
    for xi, xf, a in [(0, 4, 1), (0, 9, 1), (1, 5, 2)]:
        spec = s.spec("Cart", MotionAtom("m_move", tuple(Num(F(v)) for v in (xi, xf, a))))
        t_sq = 4 * declared({"xi": F(xi), "xf": F(xf), "a": F(a)})
        if t_sq * a != 4 * (xf - xi):
            violations.append(f"t^2 a != 4(xf - xi) for {(xi, xf, a)}")
        # independent route: bang-bang kinematics in floating point
        if not math.isclose(math.sqrt(t_sq), 2 * math.sqrt((xf - xi) / a), rel_tol=1e-12):
            violations.append(f"minimal time off for {(xi, xf, a)}")
        t_m = compile_expr(spec.duration.lo)({})
        traj = {x: compile_expr(e) for x, e in spec.trajectory}
        g = compile_expr(spec.guarantee)
        for k in range(100):
            c = t_m * k / 99
            env = {"clock": c}
            state = {x: f(env) for x, f in traj.items()}
            checked += 1
            if not g(dict(env, **state)):
                violations.append(f"guarantee fails at clock {c} for {(xi, xf, a)}")
    verdict(4, not violations,
            f"t_m^2 a = 4(xf - xi) on 3 instances, guarantee held at {checked} samples "
            f"{violations[:3] or ''}")


# 5 -----------------------------------------------------------------------------------------

def _leaf(owner, name, *args):
    s = agcomp_system()
    atom = MotionAtom(name, tuple(Num(F(v)) for v in args))
    spec = s.spec(owner, atom)
    return leaf_contract(owner, atom, spec), spec.footprint


def test_c5_agcomp_suite(verdict):
    b = agcomp_system().bounds_for()
    move = _leaf("Cart", "m_move", 5, 9, 1)
    expect = {"work": None, "pick": "BothNonInterruptible", "brief": "DurationNotNested",
              "crowd": "FootprintOverlap"}
    wrong = []
    for other, want in expect.items():
        r = _leaf("GRobot", other)
        for x, y in ((move, r), (r, move)):
            try:
                compose_pair(x[0], y[0], (x[1], y[1]), fp_union(x[1], y[1]), b)
                got = None
            except CompositionError as exc:
                got = exc.kind
            if got != want:
                wrong.append(f"{other}: {got} != {want}")
    verdict(5, not wrong, f"8 compositions give the expected outcome {wrong or ''}")


# 6 -----------------------------------------------------------------------------------------

def test_c6_metatheory_monitors(verdict):
    alarms = []
    for name in WELL_TYPED:
        for seed in range(20):
            tr = simulate(fixture(name), seed=seed, dt=F(1, 100), max_steps=10000)
            if tr.steps < 10000 or tr.alarms:
                alarms.append((name, seed, tr.steps, tr.alarm_kinds()))
    mut = simulate(fixture("basic-extra-message"), seed=0, dt=F(1, 100), max_steps=200)
    caught = "ConsumptionError" in mut.alarm_kinds()
    verdict(6, not alarms and caught,
            f"40 runs of 10000 steps are alarm free {alarms or ''}, "
            f"mutated fixture {'caught' if caught else 'missed'} within 200 steps")


# 7 -----------------------------------------------------------------------------------------

def test_c7_scaling_trend(verdict):
    ns = [2, 4, 8, 12, 16, 20]
    secs = []
    ok = True
    for n in ns:
        s = gen_lanes(LaneParams(n))
        t0 = time.perf_counter()
        wf = check_wellformed(s)
        rows = compat_report(s)
        secs.append(time.perf_counter() - t0)
        ok &= wf.ok and all(r["ok"] for r in rows.values())
    x, y = np.array(ns, float), np.array(secs)
    fit = np.polyval(np.polyfit(x, y, 2), x)
    r2 = 1 - ((y - fit) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    times = ", ".join(f"{n}:{t:.2f}s" for n, t in zip(ns, secs))
    verdict(7, ok and r2 >= 0.95 and secs[-1] < 120,
            f"quadratic fit R^2 = {r2:.4f}, n=20 in {secs[-1]:.1f} s ({times})")


# 8 -----------------------------------------------------------------------------------------

PROPERTY_SUITES = [
    props.test_merge_idempotent, props.test_merge_commutative,
    props.test_merge_associative_on_branches,
    props.test_refines_reflexive, props.test_refines_transitive,
    props.test_interrupt_combine_algebra,
    props.test_subtype_reflexive, props.test_subtype_transitive,
    props.test_scope_labels_do_not_depend_on_visit_order,
    props.test_global_render_parse_round_trip, props.test_expression_show_parse_round_trip,
]


def test_c8_property_suites(verdict):
    failed = []
    for fn in PROPERTY_SUITES:
        assert fn.hypothesis.inner_test and props.PROP.max_examples >= 500
        try:
            fn()
        except Exception as exc:   # report every suite, not only the first
            failed.append(f"{fn.__name__}: {type(exc).__name__}")
    verdict(8, not failed,
            f"{len(PROPERTY_SUITES)} property suites at {props.PROP.max_examples} cases each "
            f"{failed or ''}")


# 9 -----------------------------------------------------------------------------------------

GRID = [F(k, 4) for k in range(-8, 9)]    # step 1/4 over [-2, 2]


def _random_linear(rng):
    def lit():
        a, b, c = rng.randint(-3, 3), rng.randint(-3, 3), rng.randint(-6, 6)
        lhs = BinOp("+", BinOp("*", Num(F(a)), Var("x")), BinOp("*", Num(F(b)), Var("y")))
        return Cmp(rng.choice(["<", "<=", ">", ">=", "==", "!="]), lhs, Num(F(c, rng.choice([1, 2, 4]))))
    from choreoverify.logic.expr import And, Implies, Or
    parts = [lit() for _ in range(rng.randint(1, 4))]
    shape = rng.choice(["or", "and", "imp", "lit"])
    if shape == "lit" or len(parts) == 1:
        return parts[0]
    if shape == "or":
        return Or(tuple(parts))
    if shape == "and":
        return And(tuple(parts))
    return Implies(And(tuple(parts[:-1])) if len(parts) > 2 else parts[0], parts[-1])


def test_c9_logic_backend(verdict, tmp_path):
    rng = random.Random(2024)
    bounds = {"x": (-2, 2), "y": (-2, 2)}
    contradictions, tally = [], {"valid": 0, "refuted": 0, "unknown": 0}
    bad_smt = 0
    for i in range(1000):
        f = _random_linear(rng)
        v = check_validity(f, bounds)
        tally[v.status] += 1
        holds = compile_expr(f)
        grid_cex = next((p for p in itertools.product(GRID, GRID)
                         if not holds({"x": p[0], "y": p[1]})), None)
        if v.valid and grid_cex is not None:
            contradictions.append((i, "valid but grid counterexample", grid_cex))
        if v.refuted:
            w = {k: F(q) for k, q in v.witness.items()}
            w = {"x": w.get("x", F(0)), "y": w.get("y", F(0))}
            if not all(-2 <= q <= 2 for q in w.values()) or holds(w):
                contradictions.append((i, "bad witness", w))
        try:
            validate_script(emit_smtlib(f, {k: bounds[k] for k in free_vars(f)}))
        except Exception:
            bad_smt += 1
    # every query the tools write for the fixtures re-parses as well
    files = 0
    for name in WELL_TYPED:
        out = tmp_path / name
        code = run(["emit-smt", str(fixture_path(name)), "--out", str(out)],
                   stdout=open("/dev/null", "w"))
        if code != 0:
            bad_smt += 1
        for p in out.glob("*.smt2"):
            files += 1
            try:
                validate_script(p.read_text())
            except Exception:
                bad_smt += 1
    verdict(9, not contradictions and not bad_smt and files > 0,
            f"1000 formulas {tally}, {len(contradictions)} contradictions with the grid, "
            f"{files} fixture queries + 1000 emitted scripts re-parse ({bad_smt} failures)")
