import io
from fractions import Fraction
import json
import sys

from choreoverify.cli import run
from choreoverify.logic import check_validity
from choreoverify.logic.checker import Verdict, query_hook
from choreoverify.logic.interval import Interval
from choreoverify.logic.smtlib import validate_script
from choreoverify.solver import SolverBridge
from choreoverify.syntax.parser import parse_expr as E

from _support import fixture_path


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def test_wf_sorting_green():
    code, out, _ = cli("wf", fixture_path("sorting"))
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == 1 and rep["well_formed"]
    assert all(c["ok"] for c in rep["clauses"].values()) and len(rep["clauses"]) == 4


def test_wf_bad_umc():
    code, out, _ = cli("wf", fixture_path("bad-umc"))
    assert code == 1
    rep = json.loads(out)
    (v,) = rep["clauses"]["synchronisable"]["violations"]
    assert v["kind"] == "UMCViolation" and v["senders"] == ["p", "p'"]


def test_shipped_fixture_path_works_anywhere(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli("wf", "fixtures/good-umc.mcc")[0] == 0


def test_project_cart_text():
    code, out, _ = cli("project", fixture_path("basic"), "Cart", "--format", "text")
    assert code == 0
    assert out.startswith("rec t . select { GRobot!arrive(nu: real | nu >= 0) . RRobot!free")


def test_project_everyone():
    code, out, _ = cli("project", fixture_path("sorting"))
    assert code == 0
    assert set(json.loads(out)["local_types"]) == {"Cart", "Prod", "GRobot", "RRobot"}


def test_project_unknown_participant():
    assert cli("project", fixture_path("basic"), "Nobody")[0] == 2


def test_typecheck_and_compat():
    for name in ("basic", "sorting"):
        assert cli("typecheck", fixture_path(name))[0] == 0
        code, out, _ = cli("compat", fixture_path(name))
        assert code == 0
        assert all(r["ok"] for r in json.loads(out)["motions"].values())


def test_simulate_writes_trace(tmp_path):
    trace = tmp_path / "t.jsonl"
    code, out, _ = cli("simulate", fixture_path("sorting"), "--seed", 2, "--steps", 300,
                       "--trace", trace)
    assert code == 0
    rep = json.loads(out)
    lines = trace.read_text().splitlines()
    assert len(lines) == rep["steps"] == 300
    assert json.loads(lines[0])["step"] == 0


def test_simulate_alarm_exit_code():
    assert cli("simulate", fixture_path("crossing-carts"), "--steps", 1000)[0] == 1


def test_usage_and_parse_errors(tmp_path):
    assert cli("wf", tmp_path / "missing.mcc")[0] == 2
    bad = tmp_path / "bad.mcc"
    bad.write_text("system X; participants { p { vars x; } } global G = rec t . t;")
    code, _, err = cli("wf", bad)
    assert code == 2 and "UnguardedRecursion" in err
    assert cli("frobnicate")[0] == 2
    assert cli("simulate", fixture_path("basic"), "--dt", "-1")[0] == 2


def test_reports_are_deterministic():
    a = cli("wf", fixture_path("basic"))[1]
    b = cli("wf", fixture_path("basic"))[1]
    assert a == b
    assert "elapsed_seconds" not in a
    assert "elapsed_seconds" in cli("wf", fixture_path("basic"), "--timing")[1]


def test_emit_smt(tmp_path):
    code, out, _ = cli("emit-smt", fixture_path("basic"), "--out", tmp_path)
    assert code == 0
    rep = json.loads(out)
    files = sorted(tmp_path.glob("*.smt2"))
    assert len(files) == len(rep["files"]) > 0
    for f in files:
        validate_script(f.read_text())


def test_dump_smt_flag(tmp_path):
    assert cli("wf", fixture_path("good-umc"), "--dump-smt", tmp_path)[0] == 0
    assert list(tmp_path.glob("q*.smt2"))


def test_bench_lanes(tmp_path):
    out_file = tmp_path / "lanes.mcc"
    code, out, _ = cli("bench", "lanes", "--n", 2, "--emit", out_file)
    rep = json.loads(out)
    assert code == 0 and rep["well_formed"] and rep["compat_ok"] and "seconds" not in rep
    assert "system Lanes2;" in out_file.read_text()
    assert "seconds" in json.loads(cli("bench", "lanes", "--n", 2, "--timing")[1])


# -- solver bridge ----------------------------------------------------------------------

GOAL = E("1 / y != 0")
BOUNDS = {"y": (-1, 1)}


def test_bridge_unsat_upgrades_to_valid():
    bridge = SolverBridge("fake", runner=lambda argv: "unsat\n")
    with query_hook(bridge):
        v = check_validity(GOAL, BOUNDS, depth=4)
    assert v.valid and bridge.calls == 1 and bridge.upgraded == 1


def test_bridge_sat_needs_a_checked_model():
    # valid for y in (0, 1]; the solver's model does not refute it
    goal = E("1 / y >= 1 || y <= 0")
    bogus = SolverBridge("fake", runner=lambda argv: "sat\n(model (define-fun y () Real 0.5))\n")
    with query_hook(bogus):
        v = check_validity(goal, BOUNDS, depth=4)
    assert v.unknown and bogus.calls == 1 and bogus.upgraded == 0


def test_bridge_sat_with_real_counterexample():
    unknown = Verdict("unknown", reason="test")
    b = {"x": Interval(-1, 1)}
    out = "sat\n(model (define-fun x () Real (- (/ 1.0 2.0))))\n"
    bridge = SolverBridge("fake", runner=lambda argv: out)
    v = bridge(E("x > 0"), b, unknown)
    assert v.refuted and v.witness == {"x": Fraction(-1, 2)}
    # a model outside the bounds is not accepted
    far = SolverBridge("fake", runner=lambda argv: "sat\n(model (define-fun x () Real (- 5.0)))\n")
    assert far(E("x > 0"), b, unknown).unknown
    # decided verdicts never reach the solver
    assert bridge(E("x > 0"), b, Verdict("valid")).valid and bridge.calls == 1


def test_bridge_garbage_stays_unknown():
    bridge = SolverBridge("fake", runner=lambda argv: "error: confused\n")
    with query_hook(bridge):
        v = check_validity(GOAL, BOUNDS, depth=4)
    assert v.unknown and bridge.calls == 1


def test_bridge_runs_a_real_command():
    cmd = f'{sys.executable} -c "print(\'unsat\')"'
    bridge = SolverBridge(cmd)
    with query_hook(bridge):
        v = check_validity(GOAL, BOUNDS, depth=4)
    assert v.valid


def test_cli_reports_solver_stats():
    cmd = f'{sys.executable} -c "print(\'unsat\')"'
    code, out, _ = cli("wf", fixture_path("good-umc"), "--solver", cmd)
    assert code == 0
    assert json.loads(out)["solver"] == {"calls": 0, "upgraded": 0}
