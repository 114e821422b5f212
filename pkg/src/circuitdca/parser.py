"""Circuit-Lagrangian DSL: tokenizer, Pratt expression parser, file format.

A ``.lagr`` file looks like::

    var x1 x2 x3 X
    param E=5 L1=1 L2=2 k=3
    lagrangian:
      X*(d(x3) - d(x1)) + E*cos(k*X) - 1/(2*L1)*(x1-x2)^2 - 1/(2*L2)*(x2-x3)^2
    gauge: x1
    keep: x3

``var`` entries may name their momentum explicitly (``x1:P1``); otherwise
the momentum of ``x`` is ``p_x``.
"""

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    DSLSyntaxError,
    ExpressionError,
    UnboundParameter,
    UndeclaredIdentifier,
    UnsupportedVelocityStructure,
)
from .expr import Expression, PhaseSpaceChart, default_momentum_name, format_expression

RESERVED = {"d", "sin", "cos", "var", "param", "lagrangian", "gauge", "keep"}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


def velocity_name(coordinate):
    return f"d({coordinate})"


def is_velocity(name):
    return name.startswith("d(") and name.endswith(")")


def velocity_coordinate(name):
    return name[2:-1]


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "ident", "op", "eof"
    value: object
    line: int
    column: int


def tokenize(segments):
    """Tokenize ``[(line, first_column, text), ...]``; columns are 1-based."""
    tokens = []
    last = (1, 1)
    for line, col0, text in segments:
        i = 0
        while i < len(text):
            c = text[i]
            col = col0 + i
            if c.isspace():
                i += 1
                continue
            m = _NUMBER.match(text, i)
            if m:
                tokens.append(Token("num", Fraction(m.group(0)), line, col))
                i = m.end()
                continue
            m = _IDENT.match(text, i)
            if m:
                tokens.append(Token("ident", m.group(0), line, col))
                i = m.end()
                continue
            if c in "+-*/^(),":
                tokens.append(Token("op", c, line, col))
                i += 1
                continue
            raise DSLSyntaxError(f"unexpected character {c!r}", line, col)
        last = (line, col0 + len(text))
    tokens.append(Token("eof", None, *last))
    return tokens


_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_BP = 25


class ExpressionParser:
    """Pratt parser evaluating straight into canonical :class:`Expression`.

    ``names`` maps identifiers to expressions (variables or bound constants);
    ``None`` accepts every identifier as a variable. ``velocities`` is the set
    of coordinates allowed inside ``d(...)``.
    """

    def __init__(self, tokens, names=None, velocities=()):
        self.tokens = tokens
        self.pos = 0
        self.names = names
        self.velocities = set(velocities)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, value):
        t = self.advance()
        if t.kind != "op" or t.value != value:
            raise DSLSyntaxError(f"expected {value!r}, got {_describe(t)}", t.line, t.column)
        return t

    def parse(self):
        if self.peek().kind == "eof":
            t = self.peek()
            raise DSLSyntaxError("empty expression", t.line, t.column)
        e = self.expression(0)
        t = self.peek()
        if t.kind != "eof":
            raise DSLSyntaxError(f"unexpected {_describe(t)}", t.line, t.column)
        return e

    def expression(self, rbp):
        left = self.nud(self.advance())
        while True:
            t = self.peek()
            if t.kind != "op" or _LBP.get(t.value, 0) <= rbp:
                return left
            self.advance()
            left = self.led(t, left)

    def nud(self, t):
        if t.kind == "num":
            return Expression.constant(t.value)
        if t.kind == "ident":
            return self.identifier(t)
        if t.kind == "op" and t.value == "(":
            e = self.expression(0)
            self.expect(")")
            return e
        if t.kind == "op" and t.value == "-":
            return -self.expression(_UNARY_BP)
        if t.kind == "op" and t.value == "+":
            return self.expression(_UNARY_BP)
        raise DSLSyntaxError(f"unexpected {_describe(t)}", t.line, t.column)

    def identifier(self, t):
        name = t.value
        nxt = self.peek()
        if name in ("sin", "cos"):
            self.expect("(")
            arg = self.expression(0)
            self.expect(")")
            try:
                return Expression.trig(name, arg)
            except ExpressionError as exc:
                raise DSLSyntaxError(f"{name}: {exc}", t.line, t.column) from None
        if name == "d" and nxt.kind == "op" and nxt.value == "(":
            self.advance()
            v = self.advance()
            if v.kind != "ident":
                raise DSLSyntaxError("d(...) takes a variable name", v.line, v.column)
            self.expect(")")
            if v.value not in self.velocities:
                raise UndeclaredIdentifier(
                    f"velocity of undeclared coordinate {v.value!r}", v.line, v.column
                )
            return Expression.variable(velocity_name(v.value))
        if self.names is None:
            return Expression.variable(name)
        if name not in self.names:
            raise UndeclaredIdentifier(f"undeclared identifier {name!r}", t.line, t.column)
        return self.names[name]

    def led(self, t, left):
        op = t.value
        if op == "+":
            return left + self.expression(10)
        if op == "-":
            return left - self.expression(10)
        if op == "*":
            return left * self.expression(20)
        if op == "/":
            right = self.expression(20)
            if not right.is_constant():
                raise DSLSyntaxError("division by a non-constant expression", t.line, t.column)
            value = right.constant_value()
            if value == 0:
                raise DSLSyntaxError("division by zero", t.line, t.column)
            return left / value
        if op == "^":
            right = self.expression(_LBP["^"] - 1)
            if not right.is_constant() or right.constant_value().denominator != 1:
                raise DSLSyntaxError("exponent must be an integer constant", t.line, t.column)
            n = int(right.constant_value())
            if left.is_constant():
                base = left.constant_value()
                if base == 0 and n < 0:
                    raise DSLSyntaxError("division by zero", t.line, t.column)
                return Expression.constant(base**n)
            if n < 0:
                raise DSLSyntaxError("negative power of a non-constant expression", t.line, t.column)
            return left**n
        raise DSLSyntaxError(f"unexpected {_describe(t)}", t.line, t.column)


def _describe(t):
    if t.kind == "eof":
        return "end of input"
    return repr(str(t.value))


def parse_expression(text, names=None, velocities=(), line=1, column=1):
    """Parse one expression; ``names=None`` treats every identifier as a variable."""
    tokens = tokenize([(line, column, text)])
    return ExpressionParser(tokens, names, velocities).parse()


# -- file format --------------------------------------------------------


@dataclass(frozen=True)
class LagrangianSource:
    coordinates: tuple
    momenta: tuple
    params: dict
    lagrangian: Expression
    lagrangian_text: str
    gauges: tuple = ()
    gauge_texts: tuple = ()
    keep: tuple = ()
    text: str = field(default="", compare=False)

    @property
    def chart(self):
        return PhaseSpaceChart(self.coordinates, self.momenta)

    def phase_names(self):
        """Identifier table for phase-space expressions (gauges, keep lists)."""
        names = {n: Expression.constant(v) for n, v in self.params.items()}
        for n in self.coordinates + self.momenta:
            names[n] = Expression.variable(n)
        return names


_DIRECTIVE = re.compile(r"^(\s*)(lagrangian|gauge|keep)\s*:(.*)$")
_LIST_DIRECTIVE = re.compile(r"^(\s*)(var|param)(\s+.*|)$")
_PARAM = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\s*=\s*([^\s]+))?")


def _strip_comment(line):
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse(text):
    """Parse ``.lagr`` text into a validated :class:`LagrangianSource`."""
    coordinates = []
    momenta = []
    params = {}
    decl_pos = {}
    lagr_segments = None
    lagr_pos = None
    gauge_segments = []
    keep_entries = []
    current = None  # segment list receiving continuation lines

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        m = _DIRECTIVE.match(line)
        if m:
            indent, kind, rest = m.groups()
            col = m.start(3) + 1
            if kind == "lagrangian":
                if lagr_segments is not None:
                    raise DSLSyntaxError("duplicate lagrangian section", lineno, len(indent) + 1)
                lagr_segments = [(lineno, col, rest)]
                lagr_pos = (lineno, len(indent) + 1)
                current = lagr_segments
            elif kind == "gauge":
                seg = [(lineno, col, rest)]
                gauge_segments.append(seg)
                current = seg
            else:
                for mm in re.finditer(r"[^\s,]+", rest):
                    keep_entries.append((mm.group(0), lineno, col + mm.start()))
                current = None
            continue
        m = _LIST_DIRECTIVE.match(line)
        if m:
            indent, kind, rest = m.groups()
            base = m.start(3) + 1
            current = None
            if kind == "var":
                for mm in re.finditer(r"\S+", rest):
                    entry, col = mm.group(0), base + mm.start()
                    name, _, mom = entry.partition(":")
                    for ident in (name, mom or default_momentum_name(name)):
                        if not _IDENT.fullmatch(ident) or ident in RESERVED:
                            raise DSLSyntaxError(f"invalid variable name {ident!r}", lineno, col)
                        if ident in decl_pos:
                            raise DSLSyntaxError(f"duplicate declaration of {ident!r}", lineno, col)
                        decl_pos[ident] = (lineno, col)
                    coordinates.append(name)
                    momenta.append(mom or default_momentum_name(name))
            else:
                pos = 0
                body = rest
                while pos < len(body):
                    if body[pos].isspace():
                        pos += 1
                        continue
                    mm = _PARAM.match(body, pos)
                    col = base + pos
                    if not mm:
                        raise DSLSyntaxError("malformed parameter binding", lineno, col)
                    name, value = mm.groups()
                    if name in RESERVED or name in decl_pos:
                        raise DSLSyntaxError(f"invalid or duplicate parameter {name!r}", lineno, col)
                    decl_pos[name] = (lineno, col)
                    if value is None:
                        raise UnboundParameter(f"parameter {name!r} has no value", lineno, col)
                    try:
                        params[name] = Fraction(value)
                    except (ValueError, ZeroDivisionError):
                        raise DSLSyntaxError(
                            f"parameter {name!r}: {value!r} is not a rational literal", lineno, col
                        ) from None
                    pos = mm.end()
            continue
        if current is not None:
            current.append((lineno, 1, line))
            continue
        col = len(line) - len(line.lstrip()) + 1
        raise DSLSyntaxError(f"unexpected text {line.strip()!r}", lineno, col)

    if lagr_segments is None:
        raise DSLSyntaxError("missing 'lagrangian:' section", 1, 1)
    if not coordinates:
        raise DSLSyntaxError("no variables declared", *lagr_pos)

    names = {n: Expression.constant(v) for n, v in params.items()}
    for q in coordinates:
        names[q] = Expression.variable(q)
    lagrangian = ExpressionParser(tokenize(lagr_segments), names, coordinates).parse()

    phase = dict(names)
    for p in momenta:
        phase[p] = Expression.variable(p)
    gauges = tuple(ExpressionParser(tokenize(seg), phase).parse() for seg in gauge_segments)
    for g, seg in zip(gauges, gauge_segments):
        if not g.is_affine() or g.is_constant():
            raise DSLSyntaxError("gauge condition must be a non-constant affine expression", seg[0][0], seg[0][1])

    keep = []
    for name, lineno, col in keep_entries:
        if name not in coordinates and name not in momenta:
            raise UndeclaredIdentifier(f"keep: unknown variable {name!r}", lineno, col)
        keep.append(name)

    return LagrangianSource(
        coordinates=tuple(coordinates),
        momenta=tuple(momenta),
        params=params,
        lagrangian=lagrangian,
        lagrangian_text="\n".join(s[2] for s in lagr_segments).strip(),
        gauges=gauges,
        gauge_texts=tuple(" ".join(s[2] for s in seg).strip() for seg in gauge_segments),
        keep=tuple(keep),
        text=text,
    )


# -- structured normal form -----------------------------------------------


def _matrix(rows):
    return tuple(tuple(r) for r in rows)


@dataclass(frozen=True)
class StructuredLagrangian:
    """``L = 1/2 qd^T M qd + qd^T (B q + c) - V(q)``."""

    chart: PhaseSpaceChart
    M: tuple
    B: tuple
    c: tuple
    V: Expression

    @property
    def coordinates(self):
        return self.chart.coordinates

    @property
    def size(self):
        return len(self.chart.coordinates)

    def velocity_part(self):
        """``qd^T (B q + c)`` as an expression."""
        qs = self.chart.coordinates
        out = Expression()
        for i, qi in enumerate(qs):
            vel = Expression.variable(velocity_name(qi))
            lin = Expression.constant(self.c[i])
            for j, qj in enumerate(qs):
                if self.B[i][j]:
                    lin = lin + Expression.variable(qj) * self.B[i][j]
            out = out + vel * lin
        return out

    def kinetic_part(self):
        qs = self.chart.coordinates
        out = Expression()
        for i, qi in enumerate(qs):
            for j, qj in enumerate(qs):
                if self.M[i][j]:
                    out = out + Expression.variable(velocity_name(qi)) * Expression.variable(
                        velocity_name(qj)
                    ) * (self.M[i][j] / 2)
        return out

    def to_expression(self):
        return self.kinetic_part() + self.velocity_part() - self.V

    def to_text(self):
        decl = []
        for q, p in self.chart.pairs:
            decl.append(q if p == default_momentum_name(q) else f"{q}:{p}")
        return f"var {' '.join(decl)}\nlagrangian:\n  {format_expression(self.to_expression())}\n"


def canonicalize(src):
    """Split the parsed Lagrangian into ``(M, B, c, V)`` exactly."""
    qs = src.coordinates
    idx = {q: i for i, q in enumerate(qs)}
    n = len(qs)
    M = [[Fraction(0)] * n for _ in range(n)]
    B = [[Fraction(0)] * n for _ in range(n)]
    c = [Fraction(0)] * n
    V = {}
    for term in src.lagrangian.terms:
        for f in term.trig:
            if any(is_velocity(v) for v in f.arg.variables):
                raise UnsupportedVelocityStructure(f"velocity inside {f.kind}(...) is not supported")
        vels = [(velocity_coordinate(v), e) for v, e in term.monomial if is_velocity(v)]
        coords = [(v, e) for v, e in term.monomial if not is_velocity(v)]
        vdeg = sum(e for _, e in vels)
        cdeg = sum(e for _, e in coords)
        coef = term.coefficient
        if vdeg == 0:
            V[(term.monomial, term.trig)] = -coef
            continue
        if term.trig:
            raise UnsupportedVelocityStructure("velocity multiplied by a trig factor is not supported")
        if vdeg == 1:
            i = idx[vels[0][0]]
            if cdeg == 0:
                c[i] += coef
            elif cdeg == 1:
                B[i][idx[coords[0][0]]] += coef
            else:
                raise UnsupportedVelocityStructure(
                    "velocity coupled to a nonlinear function of coordinates is not supported"
                )
            continue
        if vdeg == 2 and cdeg == 0:
            if len(vels) == 1:
                i = idx[vels[0][0]]
                M[i][i] += 2 * coef
            else:
                i, j = idx[vels[0][0]], idx[vels[1][0]]
                M[i][j] += coef
                M[j][i] += coef
            continue
        if vdeg == 2:
            raise UnsupportedVelocityStructure("coordinate-dependent kinetic matrix is not supported")
        raise UnsupportedVelocityStructure(f"velocity polynomial of degree {vdeg} is not supported")
    return StructuredLagrangian(
        chart=src.chart,
        M=_matrix(M),
        B=_matrix(B),
        c=tuple(c),
        V=Expression(V),
    )
