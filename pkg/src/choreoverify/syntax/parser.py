"""Recursive-descent parser for .mcc system descriptions.

Layout of a file::

    system Name;
    participants { P { vars x, v; inputs w; geom box(...); init pred; } ... }
    motion P.m(a: real) { pre ..; assume ..; guarantee ..; post ..;
                          footprint box(..); duration [lo, inf); mode noninterrupt;
                          trajectory { x = ..; } }
    bounds { P.x in [lo, hi]; clock in [0, 10]; }
    global G = rec t . ... . t;
    process P = rec X . ...;

Variables are stored qualified (``P.x``). An input variable is replaced by
the state variable of the peer it is connected to. Literal quotients and
negated literals are folded into numbers, so printing and re-parsing is the
identity on parser output.
"""

from __future__ import annotations

from fractions import Fraction

from ..logic.expr import (
    Num, Var, BinOp, Neg, Pow, Call, Ite, BoolConst, Cmp, And, Or, Not, Implies,
    TRUE, FALSE, ARITH_FUNCS, RESERVED, is_formula, rename_vars,
)
from ..logic.footprint import Box, Region
from ..model import (
    SORTS, Mode, PhysicalInterface, Refinement, Duration, MotionSpec, MotionAtom, MergedAtom,
    GMessage, GMotion, GPrefSeq, GChoice, GSep, GSeq, GRecVar, GRec,
    LMotion, LSelect, LBranch, LBranchDefault, LRec, LRecVar, SelectEntry, BranchEntry,
    PSend, PRecv, PRecvDefault, PMotion, PCond, PRec, PVar, RecvBranch, System, head_message,
)
from .lexer import tokenize, ParseError, Diagnostic, SourceSpan, Pos

KEYWORDS = {"system", "participants", "vars", "inputs", "geom", "motion", "pre", "assume",
            "guarantee", "post", "footprint", "duration", "mode", "trajectory", "global",
            "process", "init", "rec", "bounds", "dt", "run", "if", "then", "else", "in",
            "inf", "box", "region", "true", "false", "ite", "select", "branch", "default",
            "end", "interrupt", "noninterrupt", "nu"}

NONDET = "random"   # reserved boolean read by `if`: a nondeterministic choice


class ParseFailure(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# --- token stream ----------------------------------------------------------

class _Stream:
    def __init__(self, text, file):
        self.toks = tokenize(text, file)
        self.i = 0
        self.file = file

    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    def at(self, text, kind=None):
        t = self.tok
        if kind is not None and t.kind != kind:
            return False
        return t.text == text and t.kind in ("OP", "IDENT")

    def accept(self, text):
        if self.at(text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text, what=None):
        t = self.accept(text)
        if t is None:
            self.fail(f"expected {what or repr(text)}, found {self.describe()}")
        return t

    def ident(self, what="identifier", allow_kw=False):
        t = self.tok
        if t.kind != "IDENT" or (not allow_kw and t.text in KEYWORDS):
            self.fail(f"expected {what}, found {self.describe()}")
        self.i += 1
        return t

    def describe(self):
        t = self.tok
        return "end of input" if t.kind == "EOF" else repr(t.text)

    def fail(self, msg, code="SyntaxError", span=None):
        raise ParseError(code, msg, span or self.tok.span)

    def qualified_next(self):
        """IDENT immediately followed by '.' and IDENT with no spaces."""
        a, b = self.peek(1), self.peek(2)
        return (self.tok.kind == "IDENT" and a.text == "." and not a.gap_before
                and b.kind == "IDENT" and not b.gap_before)


def _span(a, b):
    return SourceSpan(a.span.file, a.span.start, b.span.end)


# --- expressions -----------------------------------------------------------

class ExprParser:
    """Predicate / term grammar. Names are returned raw; callers resolve."""

    def __init__(self, s: _Stream, names: dict):
        self.s = s
        self.names = names   # raw name -> first span

    def formula(self):
        e = self.expr()
        if not is_formula(e):
            self.s.fail("expected a predicate, found a term")
        return e

    def term(self):
        e = self.expr()
        if is_formula(e):
            self.s.fail("expected a term, found a predicate")
        return e

    def expr(self):
        return self.implies()

    def implies(self):
        left = self.disj()
        if self.s.accept("=>"):
            right = self.implies()
            return Implies(self._f(left), self._f(right))
        return left

    def disj(self):
        parts = [self.conj()]
        while self.s.accept("||"):
            parts.append(self.conj())
        return Or(tuple(self._f(p) for p in parts)) if len(parts) > 1 else parts[0]

    def conj(self):
        parts = [self.neg()]
        while self.s.accept("&&"):
            parts.append(self.neg())
        return And(tuple(self._f(p) for p in parts)) if len(parts) > 1 else parts[0]

    def neg(self):
        if self.s.at("!") and not self.s.peek().text == "=":
            self.s.accept("!")
            return Not(self._f(self.neg()))
        return self.cmp()

    def cmp(self):
        left = self.add()
        for op in ("<=", ">=", "==", "!=", "<", ">"):
            if self.s.at(op):
                self.s.accept(op)
                right = self.add()
                for op2 in ("<=", ">=", "==", "!=", "<", ">"):
                    if self.s.at(op2):
                        self.s.fail("comparisons do not chain; use &&")
                return Cmp(op, self._t(left), self._t(right))
        return left

    def add(self):
        e = self.mul()
        while self.s.at("+") or self.s.at("-"):
            op = self.s.tok.text
            self.s.i += 1
            e = BinOp(op, self._t(e), self._t(self.mul()))
        return e

    def mul(self):
        e = self.unary()
        while self.s.at("*") or self.s.at("/"):
            op = self.s.tok.text
            self.s.i += 1
            r = self._t(self.unary())
            e = self._t(e)
            if op == "/" and isinstance(e, Num) and isinstance(r, Num) and r.value != 0:
                e = Num(e.value / r.value)
            else:
                e = BinOp(op, e, r)
        return e

    def unary(self):
        if self.s.accept("-"):
            arg = self._t(self.unary())
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self):
        base = self.primary()
        if self.s.accept("^"):
            t = self.s.tok
            if t.kind != "NUM" or "." in t.text:
                self.s.fail("exponent must be a non-negative integer literal")
            self.s.i += 1
            return Pow(self._t(base), int(t.text))
        return base

    def primary(self):
        s = self.s
        t = s.tok
        if t.kind == "NUM":
            s.i += 1
            return Num(Fraction(t.text))
        if s.accept("("):
            e = self.expr()
            s.expect(")")
            return e
        if t.kind == "IDENT":
            if t.text == "true":
                s.i += 1
                return TRUE
            if t.text == "false":
                s.i += 1
                return FALSE
            if t.text == "ite":
                s.i += 1
                s.expect("(")
                c = self.formula()
                s.expect(",")
                a = self.term()
                s.expect(",")
                b = self.term()
                s.expect(")")
                return Ite(c, a, b)
            if t.text in ARITH_FUNCS and s.peek().text == "(":
                s.i += 1
                s.expect("(")
                args = [self.term()]
                while s.accept(","):
                    args.append(self.term())
                s.expect(")")
                if len(args) != ARITH_FUNCS[t.text]:
                    s.fail(f"{t.text} takes {ARITH_FUNCS[t.text]} argument(s)", span=t.span)
                return Call(t.text, tuple(args))
            if t.text in KEYWORDS and t.text not in ("nu",):
                s.fail(f"unexpected keyword {t.text!r} in expression")
            if s.qualified_next():
                a = t
                s.i += 2
                b = s.tok
                s.i += 1
                name = f"{a.text}.{b.text}"
                self.names.setdefault(name, _span(a, b))
                return Var(name)
            s.i += 1
            self.names.setdefault(t.text, t.span)
            return Var(t.text)
        s.fail(f"expected an expression, found {s.describe()}")

    def _f(self, e):
        if not is_formula(e):
            self.s.fail("expected a predicate, found a term")
        return e

    def _t(self, e):
        if is_formula(e):
            self.s.fail("expected a term, found a predicate")
        return e


# --- system parser ---------------------------------------------------------

class _Ctx:
    """Name-resolution context for unqualified variables."""

    def __init__(self, owner=None, params=(), extra=(), allow=()):
        self.owner = owner
        self.params = set(params)
        self.extra = set(extra)      # bound payload variables etc.
        self.allow = set(allow)      # reserved names allowed here


class SystemParser:
    def __init__(self, text, file="<input>"):
        self.s = _Stream(text, file)
        self.names = {}
        self.ifaces = {}         # name -> PhysicalInterface (inputs unresolved names)
        self.iface_spans = {}
        self.motions = {}
        self.global_type = None
        self.processes = {}
        self.bounds = {}
        self.diags = []
        self.atom_refs = []      # (owner, MotionAtom, span)
        self.part_refs = []      # (name, span)

    # helpers
    def E(self):
        return ExprParser(self.s, self.names)

    def fail(self, *a, **k):
        self.s.fail(*a, **k)

    def resolve(self, e, ctx: _Ctx):
        def fn(name):
            return self._resolve_name(name, ctx)
        return rename_vars(e, fn)

    def _resolve_name(self, name, ctx):
        span = self.names.get(name, self.s.tok.span)
        if "." in name:
            p, x = name.split(".", 1)
            if p not in self.ifaces:
                raise ParseError("UnknownParticipant", f"unknown participant {p!r}", span)
            iface = self.ifaces[p]
            if x in iface.state_vars:
                return name
            if x in iface.input_vars:
                return self._input_peer(p, x, span)
            raise ParseError("UnknownVariable", f"{p} has no variable {x!r}", span)
        if name in ctx.extra:
            return name
        if ctx.owner is not None and ctx.owner in self.ifaces:
            iface = self.ifaces[ctx.owner]
            if name in iface.state_vars:
                return f"{ctx.owner}.{name}"
            if name in iface.input_vars:
                return self._input_peer(ctx.owner, name, span)
        if name in ctx.params:
            return name
        if name in ctx.allow:
            return name
        raise ParseError("UnknownVariable", f"unknown variable {name!r}", span)

    def _input_peer(self, owner, w, span):
        hits = [p for p, i in self.ifaces.items() if p != owner and w in i.state_vars]
        if len(hits) != 1:
            raise ParseError("AmbiguousInputVariable",
                             f"input {owner}.{w} must match exactly one state variable of another "
                             f"participant (found {len(hits)})", span)
        return f"{hits[0]}.{w}"

    # top level
    def parse(self):
        s = self.s
        s.expect("system")
        name = s.ident("system name").text
        s.expect(";")
        while s.tok.kind != "EOF":
            t = s.tok
            if s.at("participants"):
                self.participants_block()
            elif s.at("motion"):
                self.motion_decl()
            elif s.at("bounds"):
                self.bounds_block()
            elif s.at("global"):
                s.accept("global")
                s.ident("global type name")
                s.expect("=")
                if self.global_type is not None:
                    self.fail("only one global type per system")
                self.global_type = self.gtype()
                s.expect(";")
            elif s.at("process"):
                s.accept("process")
                pt = s.ident("participant")
                if pt.text not in self.ifaces:
                    self.fail(f"unknown participant {pt.text!r}", code="UnknownParticipant", span=pt.span)
                if pt.text in self.processes:
                    self.fail(f"duplicate process for {pt.text}", span=pt.span)
                s.expect("=")
                self.processes[pt.text] = self.process(_Ctx(pt.text, allow={"clock"}))
                s.expect(";")
            else:
                self.fail(f"expected a declaration, found {s.describe()}")
        self.check_references()
        return System(name=name, participants=dict(self.ifaces), motions=dict(self.motions),
                      global_type=self.global_type, processes=dict(self.processes),
                      bounds=dict(self.bounds))

    def participants_block(self):
        s = self.s
        s.expect("participants")
        if self.ifaces:
            self.fail("participants declared twice")
        s.expect("{")
        raw = []
        while not s.accept("}"):
            pt = s.ident("participant name")
            if pt.text in self.iface_spans:
                self.fail(f"duplicate participant {pt.text!r}", code="DuplicateParticipant", span=pt.span)
            self.iface_spans[pt.text] = pt.span
            s.expect("{")
            xs, ws, geom, init = [], [], None, TRUE
            while not s.accept("}"):
                if s.accept("vars"):
                    xs += self.idlist()
                elif s.accept("inputs"):
                    ws += self.idlist()
                elif s.accept("geom"):
                    geom = self.footprint()
                elif s.accept("init"):
                    init = self.E().formula()
                else:
                    self.fail(f"expected vars, inputs, geom or init, found {s.describe()}")
                s.expect(";")
            dup = {x for x in xs + ws if (xs + ws).count(x) > 1}
            if dup:
                self.fail(f"{pt.text}: variable(s) declared twice: {', '.join(sorted(dup))}", span=pt.span)
            for x in xs + ws:
                if x in RESERVED or x == NONDET:
                    self.fail(f"{pt.text}: {x!r} is reserved", span=pt.span)
            self.ifaces[pt.text] = PhysicalInterface(pt.text, tuple(xs), tuple(ws), None, TRUE)
            raw.append((pt.text, geom, init))
        # resolve after all participants are known (inputs may point forward)
        for p, geom, init in raw:
            ctx = _Ctx(p, allow={"px", "py", "pz", "clock"})
            for w in self.ifaces[p].input_vars:
                self._input_peer(p, w, self.iface_spans[p])
            iface = self.ifaces[p]
            ctx_state = _Ctx(p, allow={"px", "py", "pz"})
            self.ifaces[p] = PhysicalInterface(
                p, iface.state_vars, iface.input_vars,
                None if geom is None else self.resolve_fp(geom, ctx_state),
                self.resolve(init, ctx),
            )

    def idlist(self):
        out = [self.s.ident().text]
        while self.s.accept(","):
            out.append(self.s.ident().text)
        return out

    def footprint(self):
        s = self.s
        if s.accept("box"):
            s.expect("(")
            sides = [self.E().term()]
            for _ in range(5):
                s.expect(",", "six box sides")
                sides.append(self.E().term())
            s.expect(")")
            return Box(*sides)
        if s.accept("region"):
            s.expect("(")
            p = self.E().formula()
            s.expect(")")
            return Region(p)
        self.fail(f"expected box(...) or region(...), found {s.describe()}")

    def resolve_fp(self, fp, ctx):
        if isinstance(fp, Region):
            return Region(self.resolve(fp.pred, ctx))
        return Box(*(self.resolve(x, ctx) for x in fp.sides()))

    def motion_decl(self):
        s = self.s
        s.expect("motion")
        if not s.qualified_next():
            self.fail("expected Owner.name after 'motion'")
        owner_t = s.ident("participant")
        s.expect(".")
        name_t = s.ident("motion name")
        owner = owner_t.text
        if owner not in self.ifaces:
            self.fail(f"unknown participant {owner!r}", code="UnknownParticipant", span=owner_t.span)
        if (owner, name_t.text) in self.motions:
            self.fail(f"duplicate motion {owner}.{name_t.text}", span=name_t.span)
        params = []
        if s.accept("("):
            if not s.at(")"):
                while True:
                    pn = s.ident("parameter name")
                    s.expect(":")
                    sort = s.ident("sort", allow_kw=True)
                    if sort.text not in SORTS:
                        self.fail(f"unknown sort {sort.text!r}", span=sort.span)
                    params.append((pn.text, sort.text))
                    if not s.accept(","):
                        break
            s.expect(")")
        pnames = [p for p, _ in params]
        if len(set(pnames)) != len(pnames):
            self.fail("duplicate parameter name", span=name_t.span)
        iface = self.ifaces[owner]
        for p in pnames:
            if p in iface.state_vars or p in iface.input_vars or p in RESERVED:
                self.fail(f"parameter {p!r} shadows a variable", span=name_t.span)
        ctx = _Ctx(owner, params=pnames, allow={"clock", "px", "py", "pz"})
        fields = {}
        s.expect("{")
        while not s.accept("}"):
            t = s.tok
            key = t.text
            if key in fields:
                self.fail(f"duplicate clause {key!r}")
            if key in ("pre", "assume", "guarantee", "post"):
                s.i += 1
                fields[key] = self.resolve(self.E().formula(), ctx)
            elif key == "footprint":
                s.i += 1
                fields[key] = self.resolve_fp(self.footprint(), ctx)
            elif key == "duration":
                s.i += 1
                s.expect("[")
                lo = self.resolve(self.E().term(), ctx)
                s.expect(",")
                if s.accept("inf"):
                    hi = None
                    if not (s.accept(")") or s.accept("]")):
                        self.fail("expected ')' after inf")
                else:
                    hi = self.resolve(self.E().term(), ctx)
                    s.expect("]")
                fields[key] = Duration(lo, hi)
            elif key == "mode":
                s.i += 1
                m = s.ident("interrupt or noninterrupt", allow_kw=True)
                if m.text not in ("interrupt", "noninterrupt"):
                    self.fail("mode must be interrupt or noninterrupt", span=m.span)
                fields[key] = Mode(m.text)
            elif key == "trajectory":
                s.i += 1
                s.expect("{")
                traj = []
                while not s.accept("}"):
                    xt = s.ident("state variable")
                    if xt.text not in iface.state_vars:
                        self.fail(f"{owner} has no state variable {xt.text!r}", code="UnknownVariable",
                                  span=xt.span)
                    s.expect("=")
                    traj.append((f"{owner}.{xt.text}", self.resolve(self.E().term(), ctx)))
                    s.expect(";")
                fields[key] = tuple(traj)
                continue
            else:
                self.fail(f"expected a motion clause, found {s.describe()}")
            s.expect(";")
        fp = fields.get("footprint", iface.geom)
        self.motions[(owner, name_t.text)] = MotionSpec(
            name=name_t.text, owner=owner, params=tuple(params),
            pre=fields.get("pre", TRUE), assume=fields.get("assume", TRUE),
            guarantee=fields.get("guarantee", TRUE), post=fields.get("post", TRUE),
            footprint=fp, duration=fields.get("duration", Duration(Num(Fraction(0)))),
            mode=fields.get("mode", Mode.INTERRUPT), trajectory=fields.get("trajectory"),
        )

    def bounds_block(self):
        s = self.s
        s.expect("bounds")
        s.expect("{")
        ctx = _Ctx(allow=RESERVED)
        while not s.accept("}"):
            t = s.tok
            if s.qualified_next():
                a = s.ident()
                s.expect(".")
                b = s.ident()
                raw = f"{a.text}.{b.text}"
                self.names.setdefault(raw, _span(a, b))
            else:
                a = s.ident("variable", allow_kw=True)
                raw = a.text
                self.names.setdefault(raw, a.span)
            name = self._resolve_name(raw, ctx)
            s.expect("in")
            s.expect("[")
            lo = self.const()
            s.expect(",")
            hi = self.const()
            s.expect("]")
            s.expect(";")
            if lo > hi:
                self.fail(f"empty bounds for {name}", span=t.span)
            self.bounds[name] = (lo, hi)

    def const(self):
        t = self.s.tok
        e = self.E().term()
        if not isinstance(e, Num):
            self.fail("expected a rational constant", span=t.span)
        return e.value

    # global types
    def gtype(self):
        s = self.s
        if s.at("end"):
            self.fail("'end' is not a global type; close every path with a recursion variable")
        if s.accept("rec"):
            v = s.ident("recursion variable")
            s.expect(".")
            body = self.gtype()
            self._check_guarded_g(v, body)
            return GRec(v.text, body)
        if s.tok.kind == "IDENT" and s.tok.text not in KEYWORDS and s.peek().text not in ("->",):
            return GRecVar(s.ident().text)
        first = s.tok
        pre = self.gchoice()
        if not s.accept("."):
            self.fail("a global type must continue with '.' and end in a recursion variable",
                      span=first.span)
        return GSeq(pre, self.gtype())

    def _check_guarded_g(self, v, body):
        b = body
        while isinstance(b, GRec):
            b = b.body
        if isinstance(b, GRecVar):
            raise ParseError("UnguardedRecursion", f"recursion on {v.text!r} is not guarded", v.span)

    def gprefseq(self):
        first = self.gchoice()
        if self.s.accept("."):
            return GPrefSeq(first, self.gprefseq())
        return first

    def gchoice(self):
        start = self.s.tok
        alts = [self.gsep()]
        while self.s.accept("+"):
            alts.append(self.gsep())
        if len(alts) == 1:
            return alts[0]
        self._check_choice(alts, start.span)
        return GChoice(tuple(alts))

    def _check_choice(self, alts, span):
        heads = []
        for a in alts:
            m, _ = head_message(a)
            if m is None:
                raise ParseError("MalformedChoice", "every choice alternative must begin with a message", span)
            heads.append(m)
        senders = {m.sender for m in heads}
        if len(senders) != 1:
            raise ParseError("MalformedChoice",
                             f"choice alternatives must share the sender (found {', '.join(sorted(senders))})",
                             span)
        keys = [(m.receiver, m.label) for m in heads]
        if len(set(keys)) != len(keys):
            dup = sorted({f"{r}:{l}" for r, l in keys if keys.count((r, l)) > 1})
            raise ParseError("DuplicateLabel", f"duplicate choice label(s): {', '.join(dup)}", span)

    def gsep(self):
        left = self.gatom()
        if self.s.accept("*"):
            part = None
            if self.s.accept("{"):
                f1 = self.resolve_fp(self.footprint(), _Ctx(allow={"px", "py", "pz", "clock"}))
                self.s.expect(";")
                f2 = self.resolve_fp(self.footprint(), _Ctx(allow={"px", "py", "pz", "clock"}))
                self.s.expect("}")
                part = (f1, f2)
            right = self.gsep()
            return GSep(left, right, part)
        return left

    def gatom(self):
        s = self.s
        if s.accept("("):
            inner = self.gprefseq()
            s.expect(")")
            return inner
        if s.at("dt"):
            return self.gmotion()
        return self.gmessage()

    def gmessage(self):
        s = self.s
        guard = TRUE
        gtok = None
        if s.at("["):
            gtok = s.accept("[")
            guard = self.E().formula()
            s.expect("]")
        a = s.ident("participant")
        s.expect("->", "'->'")
        b = s.ident("participant")
        s.expect(":")
        lab = s.ident("label")
        if a.text == b.text:
            self.fail("a message needs two different participants", span=_span(a, b))
        self.part_refs += [(a.text, a.span), (b.text, b.span)]
        ref = Refinement()
        if s.at("("):
            ref = self.refinement()
        if self.ifaces:
            for t in (a, b):
                if t.text not in self.ifaces:
                    self.fail(f"unknown participant {t.text!r}", code="UnknownParticipant", span=t.span)
            guard = self.resolve(guard, _Ctx(a.text))
            ref = Refinement(ref.sort, self.resolve(ref.body, _Ctx(a.text, allow={"nu"})))
        return GMessage(a.text, b.text, lab.text, guard, ref)

    def refinement(self):
        s = self.s
        s.expect("(")
        s.expect("nu")
        s.expect(":")
        sort = s.ident("sort", allow_kw=True)
        if sort.text not in SORTS:
            self.fail(f"unknown sort {sort.text!r}", span=sort.span)
        body = TRUE
        if s.accept("|"):
            body = self.E().formula()
        s.expect(")")
        return Refinement(sort.text, body)

    def gmotion(self):
        s = self.s
        s.expect("dt")
        s.expect("<")
        items, regions = [], []
        while True:
            p = s.ident("participant")
            s.expect(":")
            atom, span = self.atom_call(p.text)
            if s.accept("@"):
                regions.append((p.text, self.resolve_fp(self.footprint(),
                                                        _Ctx(p.text, allow={"px", "py", "pz", "clock"}))))
            if any(q == p.text for q, _ in items):
                self.fail(f"{p.text} appears twice in a joint motion", span=p.span)
            items.append((p.text, atom))
            self.part_refs.append((p.text, p.span))
            self.atom_refs.append((p.text, atom, span))
            if not s.accept(","):
                break
        s.expect(">")
        return GMotion(tuple(items), tuple(regions) if regions else None)

    def atom_call(self, owner):
        s = self.s
        t = s.ident("motion name")
        args = []
        if s.accept("("):
            if not s.at(")"):
                args.append(self.E().term())
                while s.accept(","):
                    args.append(self.E().term())
            s.expect(")")
        ctx = _Ctx(owner, allow={"clock"})
        if self.ifaces:
            args = [self.resolve(a, ctx) for a in args]
        return MotionAtom(t.text, tuple(args)), _span(t, self.s.toks[self.s.i - 1])

    # processes
    def process(self, ctx):
        s = self.s
        if s.accept("rec"):
            v = s.ident("recursion variable")
            s.expect(".")
            body = self.process(ctx)
            b = body
            while isinstance(b, PRec):
                b = b.body
            if isinstance(b, PVar):
                raise ParseError("UnguardedRecursion", f"recursion on {v.text!r} is not guarded", v.span)
            return PRec(v.text, body)
        start = s.tok
        summands = [self.psummand(ctx)]
        while s.accept("+"):
            summands.append(self.psummand(ctx))
        if len(summands) == 1:
            k, v = summands[0]
            if k == "recv":
                sender, br = v
                return PRecv(sender, (br,))
            return v
        return self._sum(summands, start.span)

    def _sum(self, summands, span):
        recvs = [v for k, v in summands if k == "recv"]
        others = [(k, v) for k, v in summands if k != "recv"]
        if not recvs:
            raise ParseError("SyntaxError", "'+' joins receives from one sender", span)
        if others and (len(others) > 1 or summands[-1][0] != "motion"):
            raise ParseError("SyntaxError", "only a final 'run a . P' may join a receive sum", span)
        senders = {snd for snd, _ in recvs}
        if len(senders) != 1:
            raise ParseError("MixedSenders", "a receive sum must use a single sender", span)
        labels = [b.label for _, b in recvs]
        if len(set(labels)) != len(labels):
            raise ParseError("DuplicateLabel", "duplicate label in receive sum", span)
        sender = recvs[0][0]
        branches = tuple(b for _, b in recvs)
        if others:
            m = others[0][1]
            return PRecvDefault(sender, branches, m.atom, m.cont)
        return PRecv(sender, branches)

    def pterm(self, ctx):
        k, v = self.psummand(ctx)
        if k == "recv":
            sender, br = v
            return PRecv(sender, (br,))
        return v

    def psummand(self, ctx):
        s = self.s
        owner = ctx.owner
        if s.accept("("):
            p = self.process(ctx)
            s.expect(")")
            return "proc", p
        if s.at("run"):
            s.accept("run")
            atom, span = self.atom_call(owner)
            if owner is not None:
                self.atom_refs.append((owner, atom, span))
            s.expect(".")
            return "motion", PMotion(atom, self.pterm(ctx))
        if s.accept("if"):
            if s.tok.text == NONDET and s.peek().text == "then":
                s.i += 1
                c = Var(NONDET)
            else:
                c = self.E().formula()
                if self.ifaces:
                    c = self.resolve(c, ctx)
            s.expect("then")
            a = self.pterm(ctx)
            s.expect("else")
            b = self.pterm(ctx)
            return "proc", PCond(c, a, b)
        if s.at("rec"):
            return "proc", self.process(ctx)
        peer = s.ident("participant or recursion variable")
        if s.accept("!"):
            lab = s.ident("label")
            e = None
            if s.accept("("):
                e = self.E().term()
                if self.ifaces:
                    e = self.resolve(e, ctx)
                s.expect(")")
            s.expect(".")
            self.part_refs.append((peer.text, peer.span))
            return "proc", PSend(peer.text, lab.text, e, self.pterm(ctx))
        if s.accept("?"):
            lab = s.ident("label")
            x = None
            if s.accept("("):
                x = s.ident("variable").text
                s.expect(")")
            s.expect(".")
            inner = _Ctx(ctx.owner, ctx.params, ctx.extra | ({x} if x else set()), ctx.allow)
            self.part_refs.append((peer.text, peer.span))
            return "recv", (peer.text, RecvBranch(lab.text, x, self.pterm(inner)))
        return "proc", PVar(peer.text)

    # local types
    def ltype(self):
        s = self.s
        if s.accept("rec"):
            v = s.ident("recursion variable")
            s.expect(".")
            body = self.ltype()
            b = body
            while isinstance(b, LRec):
                b = b.body
            if isinstance(b, LRecVar):
                raise ParseError("UnguardedRecursion", f"recursion on {v.text!r} is not guarded", v.span)
            return LRec(v.text, body)
        if s.accept("("):
            t = self.ltype()
            s.expect(")")
            return t
        if s.at("dt"):
            atom = self.lmotion_atom()
            s.expect(".")
            return LMotion(atom, self.ltype())
        if s.accept("select"):
            s.expect("{")
            entries = [self.lselect_entry()]
            while s.accept(";"):
                entries.append(self.lselect_entry())
            s.expect("}")
            return LSelect(tuple(entries))
        if s.accept("branch"):
            peer = s.ident("participant").text
            s.expect("{")
            entries, default = [], None
            while True:
                if s.accept("default"):
                    atom = self.lmotion_atom()
                    s.expect(".")
                    default = (atom, self.ltype())
                    s.expect("}")
                    break
                entries.append(self.lbranch_entry())
                if s.accept("}"):
                    break
                s.expect(";")
            labels = [e.label for e in entries]
            if len(set(labels)) != len(labels):
                self.fail("duplicate branch label", code="DuplicateLabel")
            if default:
                return LBranchDefault(peer, tuple(entries), default[0], default[1])
            return LBranch(peer, tuple(entries))
        if s.at("["):
            return LSelect((self.lselect_entry(),))
        t = s.ident("local type")
        if s.at("!"):
            s.i -= 1
            return LSelect((self.lselect_entry(),))
        if s.accept("?"):
            peer = t.text
            e = self.lbranch_entry()
            return LBranch(peer, (e,))
        return LRecVar(t.text)

    def lmotion_atom(self):
        s = self.s
        s.expect("dt")
        s.expect("<")
        parts = [self.atom_call(None)[0]]
        while s.accept("&"):
            parts.append(self.atom_call(None)[0])
        s.expect(">")
        return parts[0] if len(parts) == 1 else MergedAtom(tuple(parts))

    def lselect_entry(self):
        s = self.s
        guard = TRUE
        if s.accept("["):
            guard = self.E().formula()
            s.expect("]")
        peer = s.ident("participant").text
        s.expect("!")
        lab = s.ident("label").text
        ref = self.refinement() if s.at("(") else Refinement()
        s.expect(".")
        return SelectEntry(peer, lab, self.ltype(), guard, ref)

    def lbranch_entry(self):
        s = self.s
        if s.tok.kind == "IDENT" and s.peek().text == "?":
            s.i += 2
        lab = s.ident("label").text
        ref = self.refinement() if s.at("(") else Refinement()
        s.expect(".")
        return BranchEntry(lab, self.ltype(), ref)

    # post checks
    def check_references(self):
        for name, span in self.part_refs:
            if name not in self.ifaces:
                raise ParseError("UnknownParticipant", f"unknown participant {name!r}", span)
        for owner, atom, span in self.atom_refs:
            spec = self.motions.get((owner, atom.name))
            if spec is None:
                raise ParseError("UnknownMotion", f"{owner} has no motion {atom.name!r}", span)
            if len(spec.params) != len(atom.args):
                raise ParseError("UnknownMotion",
                                 f"{owner}.{atom.name} takes {len(spec.params)} argument(s), "
                                 f"got {len(atom.args)}", span)


# --- public entry points ---------------------------------------------------

def _guarded(fn, text, file):
    try:
        return fn()
    except ParseError as e:
        return [e.diag]
    except RecursionError:
        return [Diagnostic("error", "SyntaxError", "input nested too deeply",
                           SourceSpan(file, Pos(1, 1), Pos(1, 1)))]


def parse_system(text: str, file: str = "<input>"):
    """A System, or a non-empty list of error diagnostics."""
    text = text.replace("\r\n", "\n")

    def run():
        return SystemParser(text, file).parse()
    return _guarded(run, text, file)


def load_system(text: str, file: str = "<input>") -> System:
    r = parse_system(text, file)
    if isinstance(r, list):
        raise ParseFailure(r)
    return r


def load_file(path) -> System:
    with open(path, encoding="utf-8") as fh:
        return load_system(fh.read(), str(path))


def _fragment(text, method, *args):
    p = SystemParser(text, "<fragment>")
    try:
        out = getattr(p, method)(*args)
        if p.s.tok.kind != "EOF":
            p.fail(f"unexpected {p.s.describe()} after end")
        p.check_references() if p.ifaces else None
        return out
    except ParseError as e:
        raise ParseFailure([e.diag]) from None


def parse_expr(text: str):
    """Parse a stand-alone predicate or term; names are kept as written."""
    p = SystemParser(text, "<fragment>")
    try:
        e = p.E().expr()
        if p.s.tok.kind != "EOF":
            p.fail(f"unexpected {p.s.describe()} after end")
        return e
    except ParseError as e:
        raise ParseFailure([e.diag]) from None


def parse_global(text: str):
    """Stand-alone global type, no name resolution."""
    return _fragment(text, "gtype")


def parse_local(text: str):
    return _fragment(text, "ltype")


def parse_process(text: str):
    p = SystemParser(text, "<fragment>")
    try:
        out = p.process(_Ctx(None))
        if p.s.tok.kind != "EOF":
            p.fail(f"unexpected {p.s.describe()} after end")
        return out
    except ParseError as e:
        raise ParseFailure([e.diag]) from None
