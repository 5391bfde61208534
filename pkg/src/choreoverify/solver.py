"""Optional bridge to an external SMT solver, plus .smt2 dumping.

Both are hooks on the internal validity checker. The bridge is only
consulted when the internal verdict is unknown: `unsat` upgrades the query
to valid, `sat` upgrades it to refuted only when the returned model
re-evaluates the goal to false exactly. Anything else leaves it unknown.
"""

from __future__ import annotations

import hashlib
import os
import shlex
import subprocess
import tempfile
from pathlib import Path

from .logic.checker import Verdict
from .logic.pointeval import EvalError, compile_expr
from .logic.smtlib import emit_smtlib, logic_for, read_model

DEFAULT_TIMEOUT = 30.0


def check_id(goal, bounds, seq: int) -> str:
    text = emit_smtlib(goal, bounds)
    return f"q{seq:05d}-{hashlib.sha256(text.encode()).hexdigest()[:10]}"


class SmtDumper:
    """Writes every validity query as `<check-id>.smt2` into a directory."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.seq = 0
        self.written = []

    def __call__(self, goal, bounds, verdict):
        self.seq += 1
        path = self.directory / f"{check_id(goal, bounds, self.seq)}.smt2"
        path.write_text(emit_smtlib(goal, bounds, logic_for(goal)))
        self.written.append(path)
        return verdict


class SolverBridge:
    """One-shot invocation of `cmd <file.smt2>` per unknown query.

    `cmd` is a command line; `{file}` in it is replaced by the script path,
    otherwise the path is appended.
    """

    def __init__(self, cmd: str, timeout: float = DEFAULT_TIMEOUT, runner=None):
        self.argv = shlex.split(cmd)
        self.timeout = timeout
        self.runner = runner or self._run
        self.calls = 0
        self.upgraded = 0

    def _run(self, argv):
        try:
            res = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired):
            return ""
        return res.stdout

    def ask(self, goal, bounds) -> str:
        """Raw solver output for the negated goal."""
        text = emit_smtlib(goal, bounds, logic_for(goal))
        text = text.replace("(check-sat)\n", "(check-sat)\n(get-model)\n")
        fd, path = tempfile.mkstemp(suffix=".smt2")
        try:
            with os.fdopen(fd, "w") as f:
                f.write(text)
            if any("{file}" in a for a in self.argv):
                argv = [a.replace("{file}", path) for a in self.argv]
            else:
                argv = self.argv + [path]
            self.calls += 1
            return self.runner(argv)
        finally:
            os.unlink(path)

    def __call__(self, goal, bounds, verdict):
        if not verdict.unknown:
            return verdict
        out = self.ask(goal, bounds)
        first = out.strip().split("\n", 1)[0].strip() if out.strip() else ""
        if first == "unsat":
            self.upgraded += 1
            return Verdict("valid", reason="external solver: unsat")
        if first == "sat":
            model = read_model(out)
            try:
                holds = compile_expr(goal)(model)
            except (EvalError, ZeroDivisionError):
                return verdict
            inside = all(k in model and bounds[k].lo <= model[k] <= bounds[k].hi
                         for k in bounds if k in model)
            if holds is False and inside:
                self.upgraded += 1
                return Verdict("refuted", witness=model, reason="external solver: sat, model re-checked")
        return verdict
