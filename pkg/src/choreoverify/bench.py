"""Generators for benchmark systems and the small synchronisability corpus.

gen_lanes builds the parallel-lanes family: n independent lanes, each with
one cart shuttling back and forth and a static end station it reports to,
glued together by a right-nested chain of separating conjunctions.

toy_source builds the tiny three-participant systems used as positive and
negative examples for the synchronisability checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .syntax.parser import load_system
from .syntax.render import render_system


def _q(v) -> str:
    """Render a rational as .mcc source."""
    v = Fraction(v)
    if v.denominator == 1:
        return str(v.numerator)
    if v < 0:
        return f"-({-v.numerator}/{v.denominator})"
    return f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class LaneParams:
    n: int
    lane_spacing: Fraction = Fraction(3)
    length: Fraction = Fraction(1)
    width: Fraction = Fraction(1)
    height: Fraction = Fraction(1)
    travel: Fraction = Fraction(4)
    a_max: Fraction = Fraction(1)
    # only for building deliberately broken instances
    check: bool = True

    def __post_init__(self):
        for f in ("lane_spacing", "length", "width", "height", "travel", "a_max"):
            object.__setattr__(self, f, Fraction(getattr(self, f)))
        if self.n < 2:
            raise ValueError("need at least two lanes")
        if min(self.length, self.width, self.height, self.travel, self.a_max) <= 0:
            raise ValueError("dimensions, travel and a_max must be positive")
        if self.check and self.lane_spacing <= self.width:
            raise ValueError("lane spacing must exceed the cart width")


_MOVE = """motion {c}.m_move(xi: real, xf: real, a: real) {{
  pre x == xi && v == 0 && 0 < a && a <= {amax} && xf != xi;
  guarantee min(xi, xf) <= x && x <= max(xi, xf)
    && (abs(x - xi) <= abs(xf - xi) / 2 => v^2 == 2 * a * abs(x - xi))
    && (abs(xf - x) <= abs(xf - xi) / 2 => v^2 == 2 * a * abs(xf - x));
  post x == xf && v == 0;
  footprint box(min(xi, xf) - {hl}, max(xi, xf) + {hl}, 0, {h}, {z0}, {z1});
  duration [2 * sqrt(abs(xf - xi) / a), inf);
  mode noninterrupt;
  trajectory {{
    x = ite(clock <= sqrt(abs(xf - xi) / a),
            xi + (xf - xi) / abs(xf - xi) * a * clock^2 / 2,
            ite(clock <= 2 * sqrt(abs(xf - xi) / a),
                xf - (xf - xi) / abs(xf - xi) * a * (2 * sqrt(abs(xf - xi) / a) - clock)^2 / 2,
                xf));
    v = ite(clock <= sqrt(abs(xf - xi) / a),
            (xf - xi) / abs(xf - xi) * a * clock,
            ite(clock <= 2 * sqrt(abs(xf - xi) / a),
                (xf - xi) / abs(xf - xi) * a * (2 * sqrt(abs(xf - xi) / a) - clock),
                0));
  }}
}}
"""

_IDLE = """motion {s}.m_idle() {{
  pre q == 0; guarantee q == 0; post q == 0;
  footprint box({x0}, {x1}, 0, {h}, {z0}, {z1});
  duration [0, inf); mode interrupt;
  trajectory {{ q = 0; }}
}}
"""


def _lane_fp(p: LaneParams, first: int, last: int) -> str:
    hw = p.width / 2
    z0 = first * p.lane_spacing - hw
    z1 = last * p.lane_spacing + hw
    return (f"box({_q(-p.length / 2)}, {_q(p.travel + p.length + 1)}, 0, {_q(p.height)}, "
            f"{_q(z0)}, {_q(z1)})")


def _lane_global(p: LaneParams, i: int) -> str:
    c, s = f"C{i}", f"S{i}"
    L, a = _q(p.travel), _q(p.a_max)
    return (f"dt<{c}: m_move(0, {L}, {a}), {s}: m_idle> . {c} -> {s} : there . "
            f"dt<{c}: m_move({L}, 0, {a}), {s}: m_idle> . {c} -> {s} : back")


def lanes_source(p: LaneParams) -> str:
    """.mcc text for the n-lane system."""
    hl, hw, h = p.length / 2, p.width / 2, p.height
    L = p.travel
    parts, motions, bounds, procs = [], [], [], []
    for i in range(p.n):
        z = i * p.lane_spacing
        z0, z1 = _q(z - hw), _q(z + hw)
        sx0, sx1 = L + p.length, L + p.length + 1
        parts.append(f"  C{i} {{ vars x, v; geom box(x - {_q(hl)}, x + {_q(hl)}, 0, {_q(h)}, {z0}, {z1}); "
                     f"init x == 0 && v == 0; }}")
        parts.append(f"  S{i} {{ vars q; geom box({_q(sx0)}, {_q(sx1)}, 0, {_q(h)} + q, {z0}, {z1}); "
                     f"init q == 0; }}")
        motions.append(_MOVE.format(c=f"C{i}", amax=_q(p.a_max), hl=_q(hl), h=_q(h), z0=z0, z1=z1))
        motions.append(_IDLE.format(s=f"S{i}", x0=_q(sx0), x1=_q(sx1), h=_q(h), z0=z0, z1=z1))
        bounds.append(f"  C{i}.x in [-1, {_q(L + 1)}]; C{i}.v in [-10, 10]; S{i}.q in [-1, 1];")
        Lq, a = _q(L), _q(p.a_max)
        procs.append(f"process C{i} = rec X . run m_move(0, {Lq}, {a}) . S{i}!there . "
                     f"run m_move({Lq}, 0, {a}) . S{i}!back . X;")
        procs.append(f"process S{i} = rec X . run m_idle . C{i}?there . run m_idle . C{i}?back . X;")
    # right-nested chain: lane 0 * (lane 1 * (... * lane n-1))
    g = _lane_global(p, p.n - 1)
    for i in range(p.n - 2, -1, -1):
        g = f"({_lane_global(p, i)}) *{{{_lane_fp(p, i, i)}; {_lane_fp(p, i + 1, p.n - 1)}}} ({g})"
    zmax = (p.n - 1) * p.lane_spacing + hw + 1
    bounds.append(f"  clock in [0, 50]; nu in [-100, 100];")
    bounds.append(f"  px in [-2, {_q(L + p.length + 3)}]; py in [-1, {_q(h + 2)}]; "
                  f"pz in [{_q(-hw - 1)}, {_q(zmax)}];")
    return "\n".join([
        f"// {p.n} carts on parallel lanes, each reporting to its own end station.",
        f"system Lanes{p.n};",
        "",
        "participants {",
        *parts,
        "}",
        "",
        *motions,
        "bounds {",
        *bounds,
        "}",
        "",
        f"global G = rec t . ({g}) . t;",
        "",
        *procs,
        "",
    ])


def gen_lanes(p: LaneParams):
    return load_system(lanes_source(p), f"<lanes n={p.n}>")


def render_lanes(p: LaneParams) -> str:
    """Canonical rendering of the generated system."""
    return render_system(gen_lanes(p))


# -- synchronisability corpus ------------------------------------------------

_TOY_MOTION = """motion {p}.{m}() {{
  pre x == 0; guarantee x == 0; post x == 0;
  footprint box(0, 1, 0, 1, {z0}, {z1});
  duration [0, inf); mode interrupt;
  trajectory {{ x = 0; }}
}}
"""

TOY_CORPUS = {
    "bad-umc": (
        "BadUmc", ["p", "q", "p'"],
        ["After the joint motion, p tells q and independently p' tells q.",
         "Neither message is ordered before the other, so there is no",
         "unique participant that ends the motion."],
        "rec t . dt<p: hold, q: hold, p': hold> . p -> q : l . p' -> q : l2 . t"),
    "bad-motion-motion": (
        "BadMotionMotion", ["p", "q"],
        ["Two joint motions back to back: nobody sends a message to say",
         "when the first one ends."],
        "rec t . dt<p: hold, q: hold> . dt<p: stay, q: stay> . p -> q : l . t"),
    "bad-total-sync": (
        "BadTotalSync", ["p", "q", "r"],
        ["p tells q to switch motions, but r is never told and cannot",
         "know when to shift from its first motion to the second."],
        "rec t . dt<p: hold, q: hold, r: hold> . p -> q : l . "
        "dt<p: stay, q: stay, r: stay> . p -> r : l2 . r -> q : l3 . t"),
    "good-umc": (
        "GoodUmc", ["p", "q", "p'"],
        ["The repaired version: q forwards to p', so p alone ends the motion."],
        "rec t . dt<p: hold, q: hold, p': hold> . p -> q : l . q -> p' : l2 . t"),
    "good-motion-motion": (
        "GoodMotionMotion", ["p", "q"],
        ["The repaired version: a message separates the two joint motions."],
        "rec t . dt<p: hold, q: hold> . p -> q : l . dt<p: stay, q: stay> . q -> p : l2 . t"),
    "good-star-scoped": (
        "GoodStarScoped", ["p", "q", "r"],
        ["The repaired version: r runs in its own branch of a separating",
         "conjunction and is told only once both branches have finished."],
        "rec t . ((dt<p: hold, q: hold> . p -> q : l . dt<p: stay, q: stay>) "
        "*{box(-1, 2, -1, 2, -1, 4); box(-1, 2, -1, 2, 5, 8)} dt<r: hold>) . "
        "p -> q : l . p -> r : l2 . t"),
}


def toy_source(name: str) -> str:
    sysname, names, comment, glob = TOY_CORPUS[name]
    out = [f"// {line}" for line in comment]
    out += [f"system {sysname};", "", "participants {"]
    for i, p in enumerate(names):
        out.append(f"  {p} {{ vars x; geom box(x, x + 1, 0, 1, {3 * i}, {3 * i + 1}); init x == 0; }}")
    out += ["}", ""]
    for i, p in enumerate(names):
        for m in ("hold", "stay"):
            out.append(_TOY_MOTION.format(p=p, m=m, z0=3 * i, z1=3 * i + 1))
    bnd = "; ".join(f"{p}.x in [-1, 1]" for p in names)
    out.append(f"bounds {{ {bnd}; clock in [0, 10];")
    out.append(f"         px in [-2, 3]; py in [-1, 2]; pz in [-1, {3 * len(names) + 1}]; }}")
    out.append(f"global G = {glob};")
    return "\n".join(out) + "\n"
