"""Printers producing text the parser reads back to an equal value."""

from __future__ import annotations

from ..logic.expr import TRUE, show, show_num
from ..logic.footprint import Box, Region
from ..model import (
    Mode, MotionAtom, MergedAtom, Refinement,
    GMessage, GMotion, GPrefSeq, GChoice, GSep, GSeq, GRecVar, GRec,
    LMotion, LSelect, LBranch, LBranchDefault, LRec, LRecVar,
    PSend, PRecv, PRecvDefault, PMotion, PCond, PRec, PVar,
)


def render_fp(fp) -> str:
    if isinstance(fp, Box):
        return "box(" + ", ".join(show(s) for s in fp.sides()) + ")"
    if isinstance(fp, Region):
        return f"region({show(fp.pred)})"
    raise TypeError(fp)


def render_atom(a) -> str:
    if isinstance(a, MergedAtom):
        return " & ".join(render_atom(p) for p in a.parts)
    if not a.args:
        return a.name
    return f"{a.name}({', '.join(show(x) for x in a.args)})"


def _refinement(r: Refinement) -> str:
    if r == Refinement():
        return ""
    if r.body == TRUE:
        return f"(nu: {r.sort})"
    return f"(nu: {r.sort} | {show(r.body)})"


# --- global types ----------------------------------------------------------

def render_global(g) -> str:
    if isinstance(g, GRec):
        return f"rec {g.var} . {render_global(g.body)}"
    if isinstance(g, GRecVar):
        return g.name
    if isinstance(g, GSeq):
        return f"{_gitem(g.prefix)} . {render_global(g.rest)}"
    # a bare prefix
    return _gprefseq(g)


def _gprefseq(g) -> str:
    if isinstance(g, GPrefSeq):
        return f"{_gitem(g.first)} . {_gprefseq(g.second)}"
    return _gitem(g)


def _gitem(g) -> str:
    """Choice level."""
    if isinstance(g, GChoice):
        return " + ".join(_gsep(a) for a in g.alts)
    if isinstance(g, GPrefSeq):
        return f"({_gprefseq(g)})"
    return _gsep(g)


def _gsep(g) -> str:
    if isinstance(g, GSep):
        ann = ""
        if g.partition is not None:
            ann = "{" + render_fp(g.partition[0]) + "; " + render_fp(g.partition[1]) + "}"
        return f"{_gatom(g.left)} *{ann} {_gsep(g.right)}"
    return _gatom(g)


def _gatom(g) -> str:
    if isinstance(g, GMessage):
        guard = "" if g.guard == TRUE else f"[{show(g.guard)}] "
        return f"{guard}{g.sender} -> {g.receiver} : {g.label}{_refinement(g.refinement)}"
    if isinstance(g, GMotion):
        parts = []
        for p, a in g.items:
            txt = f"{p}: {render_atom(a)}"
            r = g.region_of(p)
            if r is not None:
                txt += f" @ {render_fp(r)}"
            parts.append(txt)
        return "dt<" + ", ".join(parts) + ">"
    if isinstance(g, (GChoice, GSep, GPrefSeq)):
        return f"({_gprefseq(g)})"
    raise TypeError(f"not a global prefix: {g!r}")


# --- local types -----------------------------------------------------------

def render_local(t) -> str:
    if isinstance(t, LRec):
        return f"rec {t.var} . {render_local(t.body)}"
    if isinstance(t, LRecVar):
        return t.name
    if isinstance(t, LMotion):
        return f"dt<{render_atom(t.atom)}> . {render_local(t.cont)}"
    if isinstance(t, LSelect):
        entries = [_sel(e) for e in t.entries]
        if len(entries) == 1:
            return entries[0]
        return "select { " + " ; ".join(entries) + " }"
    if isinstance(t, (LBranch, LBranchDefault)):
        entries = [f"{e.label}{_refinement(e.refinement)} . {render_local(e.cont)}" for e in t.entries]
        if isinstance(t, LBranchDefault):
            entries.append(f"default dt<{render_atom(t.atom)}> . {render_local(t.default)}")
        elif len(entries) == 1:
            return f"{t.peer}?{entries[0]}"
        return f"branch {t.peer} {{ " + " ; ".join(entries) + " }"
    raise TypeError(f"not a local type: {t!r}")


def _sel(e) -> str:
    guard = "" if e.guard == TRUE else f"[{show(e.guard)}] "
    return f"{guard}{e.peer}!{e.label}{_refinement(e.refinement)} . {render_local(e.cont)}"


# --- processes -------------------------------------------------------------

def render_process(p) -> str:
    if isinstance(p, PRec):
        return f"rec {p.var} . {render_process(p.body)}"
    if isinstance(p, (PRecv, PRecvDefault)):
        parts = [_recv(p.sender, b) for b in p.branches]
        if isinstance(p, PRecvDefault):
            parts.append(f"run {render_atom(p.atom)} . {_pterm(p.default)}")
        return " + ".join(parts)
    return _pterm_body(p)


def _recv(sender, b):
    arg = f"({b.var})" if b.var else ""
    return f"{sender}?{b.label}{arg} . {_pterm(b.cont)}"


def _pterm(p) -> str:
    """A process in term position (after '.', in if-arms)."""
    if isinstance(p, PRec) or (isinstance(p, PRecv) and len(p.branches) > 1) or isinstance(p, PRecvDefault):
        return f"({render_process(p)})"
    if isinstance(p, PRecv):
        return _recv(p.sender, p.branches[0])
    return _pterm_body(p)


def _pterm_body(p) -> str:
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, PSend):
        arg = "" if p.expr is None else f"({show(p.expr)})"
        return f"{p.to}!{p.label}{arg} . {_pterm(p.cont)}"
    if isinstance(p, PMotion):
        return f"run {render_atom(p.atom)} . {_pterm(p.cont)}"
    if isinstance(p, PCond):
        return f"if {show(p.cond)} then {_pterm(p.then)} else {_pterm(p.other)}"
    if isinstance(p, PRecv):
        return _recv(p.sender, p.branches[0])
    raise TypeError(f"not a process: {p!r}")


# --- systems ---------------------------------------------------------------

def _local_names(e, owner):
    return e


def render_system(s) -> str:
    out = [f"system {s.name};", ""]
    out.append("participants {")
    for name, iface in s.participants.items():
        out.append(f"  {name} {{")
        if iface.state_vars:
            out.append(f"    vars {', '.join(iface.state_vars)};")
        if iface.input_vars:
            out.append(f"    inputs {', '.join(iface.input_vars)};")
        if iface.geom is not None:
            out.append(f"    geom {render_fp(iface.geom)};")
        if iface.init != TRUE:
            out.append(f"    init {show(iface.init)};")
        out.append("  }")
    out.append("}")
    for (owner, name), m in s.motions.items():
        params = ", ".join(f"{p}: {sort}" for p, sort in m.params)
        out.append("")
        out.append(f"motion {owner}.{name}({params}) {{")
        for key in ("pre", "assume", "guarantee", "post"):
            val = getattr(m, key)
            if val != TRUE:
                out.append(f"  {key} {show(val)};")
        if m.footprint is not None:
            out.append(f"  footprint {render_fp(m.footprint)};")
        hi = "inf)" if m.duration.hi is None else f"{show(m.duration.hi)}]"
        out.append(f"  duration [{show(m.duration.lo)}, {hi};")
        out.append(f"  mode {m.mode.value};")
        if m.trajectory is not None:
            out.append("  trajectory {")
            for x, e in m.trajectory:
                out.append(f"    {x.split('.', 1)[1]} = {show(e)};")
            out.append("  }")
        out.append("}")
    if s.bounds:
        out.append("")
        out.append("bounds {")
        for k, (lo, hi) in s.bounds.items():
            out.append(f"  {k} in [{show_num(lo)}, {show_num(hi)}];")
        out.append("}")
    if s.global_type is not None:
        out.append("")
        out.append(f"global G = {render_global(s.global_type)};")
    for p, proc in s.processes.items():
        out.append("")
        out.append(f"process {p} = {render_process(proc)};")
    return "\n".join(out) + "\n"
