"""SMT-LIB 2 emission for validity queries, plus a small s-expression reader
used to sanity-check emitted scripts and to read solver models."""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Mapping

from .expr import (
    Expr, Num, Var, BinOp, Neg, Pow, Call, Ite, BoolConst, Cmp, And, Or, Not, Implies,
    children, free_vars,
)
from .checker import make_bounds

_SIMPLE = re.compile(r"^[A-Za-z~!@$%^&*_+=<>.?/-][A-Za-z0-9~!@$%^&*_+=<>.?/-]*$")
_RESERVED_WORDS = {"true", "false", "and", "or", "not", "ite", "let", "assert", "par", "_", "!",
                   "as", "forall", "exists", "declare-const", "check-sat"}


class UnsupportedOperator(Exception):
    pass


def symbol(name: str) -> str:
    if _SIMPLE.match(name) and name not in _RESERVED_WORDS:
        return name
    return "|" + name.replace("|", "_").replace("\\", "_") + "|"


def real_literal(q: Fraction) -> str:
    q = Fraction(q)
    mag = abs(q)
    if mag.denominator == 1:
        text = f"{mag.numerator}.0"
    else:
        text = f"(/ {mag.numerator}.0 {mag.denominator}.0)"
    return f"(- {text})" if q < 0 else text


def term(e: Expr) -> str:
    if isinstance(e, Num):
        return real_literal(e.value)
    if isinstance(e, Var):
        return symbol(e.name)
    if isinstance(e, BoolConst):
        return "true" if e.value else "false"
    if isinstance(e, BinOp):
        return f"({e.op} {term(e.left)} {term(e.right)})"
    if isinstance(e, Neg):
        return f"(- {term(e.arg)})"
    if isinstance(e, Pow):
        if e.exp == 0:
            return "1.0"
        if e.exp == 1:
            return term(e.base)
        b = term(e.base)
        return "(* " + " ".join([b] * e.exp) + ")"
    if isinstance(e, Call):
        args = [term(a) for a in e.args]
        if e.fn == "sqrt":
            # dReal spelling; not part of the core Reals theory
            return f"(sqrt {args[0]})"
        if e.fn == "abs":
            return f"(ite (>= {args[0]} 0.0) {args[0]} (- {args[0]}))"
        if e.fn == "min":
            return f"(ite (<= {args[0]} {args[1]}) {args[0]} {args[1]})"
        if e.fn == "max":
            return f"(ite (>= {args[0]} {args[1]}) {args[0]} {args[1]})"
        raise UnsupportedOperator(e.fn)
    if isinstance(e, Ite):
        return f"(ite {term(e.cond)} {term(e.then)} {term(e.other)})"
    if isinstance(e, Cmp):
        l, r = term(e.left), term(e.right)
        if e.op == "==":
            return f"(= {l} {r})"
        if e.op == "!=":
            return f"(not (= {l} {r}))"
        return f"({e.op} {l} {r})"
    if isinstance(e, And):
        return "(and " + " ".join(term(a) for a in e.args) + ")"
    if isinstance(e, Or):
        return "(or " + " ".join(term(a) for a in e.args) + ")"
    if isinstance(e, Not):
        return f"(not {term(e.arg)})"
    if isinstance(e, Implies):
        return f"(=> {term(e.left)} {term(e.right)})"
    raise UnsupportedOperator(type(e).__name__)


def emit_smtlib(goal: Expr, bounds: Mapping, logic_hint: str = "QF_NRA") -> str:
    """Script whose `unsat` answer means `goal` is valid within `bounds`."""
    b = make_bounds(bounds)
    names = sorted(free_vars(goal) | set(b))
    lines = [f"(set-logic {logic_hint})"]
    for n in names:
        lines.append(f"(declare-const {symbol(n)} Real)")
    for n in names:
        if n in b:
            lines.append(f"(assert (<= {real_literal(b[n].lo)} {symbol(n)}))")
            lines.append(f"(assert (<= {symbol(n)} {real_literal(b[n].hi)}))")
    lines.append(f"(assert (not {term(goal)}))")
    lines.append("(check-sat)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


def logic_for(goal: Expr) -> str:
    """QF_LRA when every product has a constant side, else QF_NRA."""
    def nonlinear(e):
        if isinstance(e, BinOp) and e.op in "*/":
            if e.op == "*" and not (free_vars(e.left) and free_vars(e.right)):
                return nonlinear(e.left) or nonlinear(e.right)
            if e.op == "/" and not free_vars(e.right):
                return nonlinear(e.left)
            return True
        if isinstance(e, Pow) and e.exp > 1 and free_vars(e.base):
            return True
        if isinstance(e, Call) and e.fn == "sqrt":
            return True
        return any(nonlinear(c) for c in children(e))
    return "QF_NRA" if nonlinear(goal) else "QF_LRA"


# --- s-expressions -------------------------------------------------------

class SexpError(Exception):
    pass


_TOKEN = re.compile(r"""\s*(?:(;[^\n]*)|(\()|(\))|(\|[^|]*\|)|("(?:[^"]|"")*")|([^\s()|";]+))""")


def parse_sexps(text: str) -> list:
    """Parse a sequence of s-expressions into nested Python lists of str."""
    pos = 0
    stack = [[]]
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise SexpError(f"bad token at offset {pos}")
        pos = m.end()
        comment, lp, rp, quoted, string, atom = m.groups()
        if comment is not None:
            continue
        if lp:
            stack.append([])
        elif rp:
            if len(stack) == 1:
                raise SexpError(f"unbalanced ')' at offset {pos}")
            done = stack.pop()
            stack[-1].append(done)
        elif quoted is not None:
            stack[-1].append(quoted)
        elif string is not None:
            stack[-1].append(string)
        elif atom is not None:
            stack[-1].append(atom)
    if len(stack) != 1:
        raise SexpError("unbalanced '('")
    return stack[0]


_COMMANDS = {"set-logic", "set-option", "set-info", "declare-const", "declare-fun",
             "define-fun", "assert", "check-sat", "get-model", "exit", "push", "pop"}


def validate_script(text: str) -> list:
    """Re-parse a script and check every top-level form is a known command.
    Returns the parsed forms; raises SexpError otherwise."""
    forms = parse_sexps(text)
    declared = set()
    for f in forms:
        if not isinstance(f, list) or not f or f[0] not in _COMMANDS:
            raise SexpError(f"not a command: {f!r}")
        if f[0] == "declare-const":
            if len(f) != 3:
                raise SexpError(f"malformed declare-const: {f!r}")
            declared.add(f[1])
        if f[0] == "assert":
            if len(f) != 2:
                raise SexpError(f"malformed assert: {f!r}")
            for sym in _atoms(f[1]):
                if _is_symbol(sym) and sym not in declared and sym not in _THEORY:
                    raise SexpError(f"undeclared symbol {sym}")
    return forms


_THEORY = {"and", "or", "not", "=>", "=", "<", "<=", ">", ">=", "+", "-", "*", "/",
           "ite", "true", "false", "sqrt"}


def _atoms(s):
    if isinstance(s, list):
        for x in s:
            yield from _atoms(x)
    else:
        yield s


def _is_symbol(a: str) -> bool:
    return not re.match(r"^-?\d+(\.\d+)?$", a)


def read_real(s) -> Fraction:
    """Evaluate a solver-printed real value: decimals, (/ a b), (- a)."""
    if isinstance(s, str):
        return Fraction(s)
    if s and s[0] == "-" and len(s) == 2:
        return -read_real(s[1])
    if s and s[0] == "/" and len(s) == 3:
        return read_real(s[1]) / read_real(s[2])
    raise SexpError(f"not a real literal: {s!r}")


def read_model(text: str) -> dict:
    """Extract `(define-fun x () Real v)` entries from solver output."""
    out = {}
    try:
        forms = parse_sexps(text)
    except SexpError:
        return out

    def walk(f):
        if isinstance(f, list):
            if len(f) == 5 and f[0] == "define-fun" and f[2] == [] and f[3] == "Real":
                name = f[1].strip("|")
                try:
                    out[name] = read_real(f[4])
                except (SexpError, ValueError, ZeroDivisionError):
                    pass
            else:
                for x in f:
                    walk(x)
    for f in forms:
        walk(f)
    return out
