"""Exact symbolic algebra for polynomial-times-trig expressions.

An :class:`Expression` is a canonical sum of terms

    coefficient * x1^e1 * ... * trig1(affine1) * trig2(affine2) * ...

with rational coefficients and ``sin``/``cos`` factors of affine arguments.
The class is closed under addition, multiplication, differentiation and
affine substitution, hence under Poisson brackets.

Variables are plain strings. Velocities of the Lagrangian DSL are variables
named ``d(x)``, which keeps the printer and the parser in step.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from . import linalg
from .errors import DependentConstraintSet, ExpressionError, UnboundVariable


def as_scalar(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"refusing inexact scalar {value!r}")
    return Fraction(value)


def format_scalar(q):
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "coordinate" or "momentum"
    index: int


class PhaseSpaceChart:
    """Ordered coordinates with their conjugate momenta."""

    def __init__(self, coordinates, momenta):
        coordinates = tuple(coordinates)
        momenta = tuple(momenta)
        if len(coordinates) != len(momenta):
            raise ValueError("need exactly one momentum per coordinate")
        names = coordinates + momenta
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        self.coordinates = coordinates
        self.momenta = momenta
        self._conj = {}
        for q, p in zip(coordinates, momenta):
            self._conj[q] = p
            self._conj[p] = q

    @classmethod
    def from_coordinates(cls, coordinates):
        return cls(coordinates, [default_momentum_name(q) for q in coordinates])

    def __eq__(self, other):
        return (
            isinstance(other, PhaseSpaceChart)
            and self.coordinates == other.coordinates
            and self.momenta == other.momenta
        )

    def __hash__(self):
        return hash((self.coordinates, self.momenta))

    def __repr__(self):
        return f"PhaseSpaceChart({list(self.coordinates)}, {list(self.momenta)})"

    @property
    def pairs(self):
        return tuple(zip(self.coordinates, self.momenta))

    @property
    def names(self):
        return self.coordinates + self.momenta

    @property
    def dimension(self):
        return 2 * len(self.coordinates)

    def variables(self):
        out = [Variable(q, "coordinate", i) for i, q in enumerate(self.coordinates)]
        out += [Variable(p, "momentum", i) for i, p in enumerate(self.momenta)]
        return out

    def conjugate(self, name):
        return self._conj[name]

    def is_momentum(self, name):
        return name in self.momenta

    def pivot_order(self):
        """Momenta first, then coordinates, both in declaration order."""
        return self.momenta + self.coordinates

    def interleaved(self):
        out = []
        for q, p in self.pairs:
            out += [q, p]
        return tuple(out)


def default_momentum_name(coordinate):
    return f"p_{coordinate}"


def _var_key(name):
    return name


class AffineForm:
    """``sum_i a_i v_i + c`` with rational coefficients; zeros are dropped."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs=None, const=0):
        items = {}
        for name, a in (coeffs or {}).items():
            a = as_scalar(a)
            if a != 0:
                items[name] = a
        self.coeffs = tuple(sorted(items.items(), key=lambda kv: _var_key(kv[0])))
        self.const = as_scalar(const)
        self._hash = hash((self.coeffs, self.const))

    def __eq__(self, other):
        return isinstance(other, AffineForm) and self.coeffs == other.coeffs and self.const == other.const

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"AffineForm({self.to_expression()})"

    def key(self):
        return (self.coeffs, self.const)

    def coefficient(self, name):
        for n, a in self.coeffs:
            if n == name:
                return a
        return Fraction(0)

    def as_dict(self):
        return dict(self.coeffs)

    @property
    def variables(self):
        return tuple(n for n, _ in self.coeffs)

    def is_constant(self):
        return not self.coeffs

    def __neg__(self):
        return AffineForm({n: -a for n, a in self.coeffs}, -self.const)

    def scale(self, s):
        s = as_scalar(s)
        return AffineForm({n: s * a for n, a in self.coeffs}, s * self.const)

    def to_expression(self):
        e = Expression.constant(self.const)
        for n, a in self.coeffs:
            e = e + Expression.variable(n) * a
        return e

    def evaluate(self, assignment):
        total = float(self.const)
        for n, a in self.coeffs:
            try:
                total += float(a) * assignment[n]
            except KeyError:
                raise UnboundVariable(f"no value for {n!r}") from None
        return total


class TrigFactor:
    """``sin(arg)`` or ``cos(arg)``; the argument's leading coefficient is positive."""

    __slots__ = ("kind", "arg", "_key", "_hash")

    def __init__(self, kind, arg):
        if kind not in ("sin", "cos"):
            raise ValueError(kind)
        if arg.is_constant():
            raise ExpressionError(f"{kind} of a constant argument is not representable exactly")
        if arg.coeffs[0][1] < 0:
            raise ValueError("use TrigFactor.make for non-canonical arguments")
        self.kind = kind
        self.arg = arg
        self._key = (kind, arg.coeffs, arg.const)
        self._hash = hash(self._key)

    @staticmethod
    def make(kind, arg):
        """Return ``(sign, factor)`` with the argument in canonical sign."""
        if arg.is_constant():
            raise ExpressionError(f"{kind} of a constant argument is not representable exactly")
        if arg.coeffs[0][1] < 0:
            return (-1 if kind == "sin" else 1), TrigFactor(kind, -arg)
        return 1, TrigFactor(kind, arg)

    def __eq__(self, other):
        return isinstance(other, TrigFactor) and self._key == other._key

    def __lt__(self, other):
        return self._key < other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.kind}({_format_affine(self.arg)})"

    def key(self):
        return self._key

    def evaluate(self, assignment):
        x = self.arg.evaluate(assignment)
        return math.sin(x) if self.kind == "sin" else math.cos(x)


@dataclass(frozen=True)
class Term:
    coefficient: Fraction
    monomial: tuple  # ((name, exponent), ...) sorted by name
    trig: tuple  # TrigFactor, ... sorted

    @property
    def degree(self):
        return sum(e for _, e in self.monomial)


def _sort_key(key):
    mono, trig = key
    return (sum(e for _, e in mono), mono, tuple(t.key() for t in trig))


def _merge_mono(a, b):
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for n, e in b:
        d[n] = d.get(n, 0) + e
    return tuple(sorted(d.items()))


class Expression:
    """Immutable canonical sum of :class:`Term`."""

    __slots__ = ("_data", "__dict__")

    def __init__(self, data=None):
        # data: {(monomial, trig): coefficient}
        # insertion order is irrelevant; ordered views are built on demand
        self._data = {k: c for k, c in (data or {}).items() if c != 0}

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value):
        value = as_scalar(value)
        return cls({((), ()): value})

    @classmethod
    def variable(cls, name):
        return cls({(((name, 1),), ()): Fraction(1)})

    @classmethod
    def trig(cls, kind, arg):
        if isinstance(arg, Expression):
            arg = arg.to_affine()
        if arg.is_constant() and arg.const == 0:
            # the only exactly representable constant argument
            return cls.constant(0 if kind == "sin" else 1)
        sign, f = TrigFactor.make(kind, arg)
        return cls({((), (f,)): Fraction(sign)})

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def lift(cls, value):
        if isinstance(value, Expression):
            return value
        if isinstance(value, AffineForm):
            return value.to_expression()
        return cls.constant(value)

    # -- inspection ---------------------------------------------------
    @cached_property
    def _ordered(self):
        return sorted(self._data.items(), key=lambda kv: _sort_key(kv[0]))

    @property
    def terms(self):
        return [Term(c, m, t) for (m, t), c in self._ordered]

    def items(self):
        return list(self._ordered)

    def __len__(self):
        return len(self._data)

    def is_zero(self):
        return not self._data

    def __bool__(self):
        return bool(self._data)

    def is_constant(self):
        return all(not m and not t for (m, t) in self._data)

    def constant_value(self):
        if not self.is_constant():
            raise ExpressionError(f"expression {self} is not constant")
        return self._data.get(((), ()), Fraction(0))

    @cached_property
    def free_symbols(self):
        names = set()
        for m, t in self._data:
            names.update(n for n, _ in m)
            for f in t:
                names.update(f.arg.variables)
        return frozenset(names)

    @cached_property
    def degree(self):
        return max((sum(e for _, e in m) for m, _ in self._data), default=0)

    def has_trig(self):
        return any(t for _, t in self._data)

    def trig_factors(self):
        out = set()
        for _, t in self._data:
            out.update(t)
        return out

    def is_affine(self):
        return all(not t and sum(e for _, e in m) <= 1 for m, t in self._data)

    def to_affine(self):
        if not self.is_affine():
            raise ExpressionError(f"expression {self} is not affine")
        coeffs = {}
        const = Fraction(0)
        for (m, _), c in self._data.items():
            if m:
                coeffs[m[0][0]] = c
            else:
                const = c
        return AffineForm(coeffs, const)

    def coefficient_of(self, monomial, trig=()):
        return self._data.get((tuple(sorted(monomial)), tuple(trig)), Fraction(0))

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        other = Expression.lift(other)
        if not other._data:
            return self
        d = dict(self._data)
        for k, c in other._data.items():
            d[k] = d.get(k, 0) + c
        return Expression(d)

    __radd__ = __add__

    def __neg__(self):
        return Expression({k: -c for k, c in self._data.items()})

    def __sub__(self, other):
        return self + (-Expression.lift(other))

    def __rsub__(self, other):
        return Expression.lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, (Expression, AffineForm)):
            s = as_scalar(other)
            if s == 0:
                return Expression()
            return Expression({k: c * s for k, c in self._data.items()})
        other = Expression.lift(other)
        d = {}
        for (m1, t1), c1 in self._data.items():
            for (m2, t2), c2 in other._data.items():
                m = _merge_mono(m1, m2)
                t = tuple(sorted(t1 + t2)) if (t1 and t2) else (t1 or t2)
                k = (m, t)
                d[k] = d.get(k, 0) + c1 * c2
        return Expression(d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Expression):
            other = other.constant_value()
        other = as_scalar(other)
        if other == 0:
            raise ZeroDivisionError("division by zero")
        return self * (1 / other)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ExpressionError(f"only non-negative integer powers are supported, got {n!r}")
        result = Expression.constant(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Expression.constant(other)
        if not isinstance(other, Expression):
            return NotImplemented
        return self._data == other._data

    def __hash__(self):
        return hash(frozenset(self._data.items()))

    def __repr__(self):
        return f"Expression({self})"

    def __str__(self):
        return format_expression(self)

    # -- calculus -----------------------------------------------------
    def diff(self, name):
        if name not in self.free_symbols:
            return Expression()
        d = {}

        def add(k, c):
            d[k] = d.get(k, 0) + c

        for (m, t), c in self._data.items():
            for i, (n, e) in enumerate(m):
                if n == name:
                    nm = m[:i] + (((n, e - 1),) if e > 1 else ()) + m[i + 1 :]
                    add((nm, t), c * e)
                    break
            for i, f in enumerate(t):
                a = f.arg.coefficient(name)
                if a == 0:
                    continue
                if f.kind == "sin":
                    nf, s = TrigFactor("cos", f.arg), a
                else:
                    nf, s = TrigFactor("sin", f.arg), -a
                nt = tuple(sorted(t[:i] + (nf,) + t[i + 1 :]))
                add((m, nt), c * s)
        return Expression(d)

    # -- substitution -------------------------------------------------
    def subs(self, mapping, trig_only=False):
        """Substitute variables by expressions.

        Variables inside trig arguments may only be replaced by affine
        expressions. With ``trig_only`` the polynomial part is left alone.
        """
        mapping = {n: Expression.lift(v) for n, v in mapping.items()}
        mapping = {n: v for n, v in mapping.items() if n in self.free_symbols}
        if not mapping:
            return self
        affine = {}
        powers = {}

        def power(n, e):
            key = (n, e)
            if key not in powers:
                powers[key] = mapping[n] ** e
            return powers[key]

        def new_arg(arg):
            if not any(n in mapping for n in arg.variables):
                return None
            e = Expression.constant(arg.const)
            for n, a in arg.coeffs:
                if n in mapping:
                    if n not in affine:
                        affine[n] = mapping[n].to_affine().to_expression()
                    e = e + affine[n] * a
                else:
                    e = e + Expression.variable(n) * a
            return e.to_affine()

        trig_cache = {}
        acc = {}
        for (m, t), c in self._data.items():
            term = Expression({((), ()): c})
            keep_mono = []
            for n, e in m:
                if n in mapping and not trig_only:
                    term = term * power(n, e)
                else:
                    keep_mono.append((n, e))
            keep_trig = []
            for f in t:
                if f not in trig_cache:
                    arg = new_arg(f.arg)
                    trig_cache[f] = None if arg is None else Expression.trig(f.kind, arg)
                rep = trig_cache[f]
                if rep is None:
                    keep_trig.append(f)
                else:
                    term = term * rep
            rest = Expression({(tuple(keep_mono), tuple(sorted(keep_trig))): Fraction(1)})
            for k, v in (term * rest)._data.items():
                acc[k] = acc.get(k, 0) + v
        return Expression(acc)

    # -- numerics -----------------------------------------------------
    def evaluate(self, assignment):
        total = 0.0
        for (m, t), c in self._data.items():
            v = float(c)
            for n, e in m:
                try:
                    v *= assignment[n] ** e
                except KeyError:
                    raise UnboundVariable(f"no value for {n!r}") from None
            for f in t:
                v *= f.evaluate(assignment)
            total += v
        return total

    def python_source(self, index):
        """Python source evaluating this expression on a sequence ``s``.

        ``index`` maps variable names to positions in ``s``.
        """
        missing = self.free_symbols - set(index)
        if missing:
            raise UnboundVariable(f"no value for {sorted(missing)}")

        def ref(n):
            return f"s[{index[n]}]"

        def affine_src(arg):
            parts = [repr(float(arg.const))] if arg.const else []
            parts += [f"{float(a)!r}*{ref(n)}" for n, a in arg.coeffs]
            return " + ".join(parts)

        terms = []
        for (m, t), c in self._data.items():
            factors = [repr(float(c))]
            for n, e in m:
                factors.append(ref(n) if e == 1 else f"{ref(n)}**{e}")
            for f in t:
                factors.append(f"_{f.kind}({affine_src(f.arg)})")
            terms.append("*".join(factors))
        return " + ".join(terms) if terms else "0.0"


def compile_expressions(exprs, variables):
    """Compile expressions to one function ``f(s) -> list[float]``.

    ``s`` is any indexable holding the values of ``variables`` in order.
    """
    index = {n: i for i, n in enumerate(variables)}
    body = ", ".join(e.python_source(index) for e in exprs)
    src = f"def _f(s):\n    return [{body}]\n"
    ns = {"_sin": math.sin, "_cos": math.cos}
    exec(src, ns)
    return ns["_f"]


def variable(name):
    return Expression.variable(name)


def const(value):
    return Expression.constant(value)


def sin(arg):
    return Expression.trig("sin", Expression.lift(arg))


def cos(arg):
    return Expression.trig("cos", Expression.lift(arg))


def evaluate(expr, assignment):
    return expr.evaluate(assignment)


# -- printing ----------------------------------------------------------


def _format_affine(arg):
    return format_expression(arg.to_expression())


def _format_factors(m, t):
    out = []
    for n, e in m:
        out.append(n if e == 1 else f"{n}^{e}")
    for f in t:
        out.append(f"{f.kind}({_format_affine(f.arg)})")
    return out


def _format_term(c, m, t):
    factors = _format_factors(m, t)
    if not factors:
        return format_scalar(c)
    body = "*".join(factors)
    if c == 1:
        return body
    if c == -1:
        return "-" + body
    return f"{format_scalar(c)}*{body}"


def format_expression(expr):
    # highest degree first; parsing is order independent
    items = sorted(expr.items(), key=lambda kv: (-_sort_key(kv[0])[0],) + _sort_key(kv[0])[1:])
    if not items:
        return "0"
    parts = []
    for i, ((m, t), c) in enumerate(items):
        if i == 0:
            parts.append(_format_term(c, m, t))
        elif c < 0:
            parts.append(" - " + _format_term(-c, m, t))
        else:
            parts.append(" + " + _format_term(c, m, t))
    return "".join(parts)


# -- brackets and surface reduction --------------------------------------


def poisson_bracket(a, b, chart):
    """Canonical Poisson bracket ``{a, b}`` in the given chart."""
    a = Expression.lift(a)
    b = Expression.lift(b)
    fa = a.free_symbols
    fb = b.free_symbols
    out = Expression()
    for q, p in chart.pairs:
        if q in fa and p in fb:
            out = out + a.diff(q) * b.diff(p)
        if p in fa and q in fb:
            out = out - a.diff(p) * b.diff(q)
    return out


def _affine_rows(surface, columns):
    rows = []
    for s in surface:
        if isinstance(s, Expression):
            s = s.to_affine()
        rows.append([s.coefficient(c) for c in columns] + [s.const])
    return rows


def surface_columns(surface, order=None):
    names = set()
    for s in surface:
        if isinstance(s, Expression):
            s = s.to_affine()
        names.update(s.variables)
    order = [n for n in (order or ()) if n in names]
    return order + sorted(names - set(order))


def echelon_surface(surface, order=None):
    """Echelonize an affine set; returns ``[(pivot, AffineForm)]``.

    Each returned form has coefficient 1 on its pivot, and no pivot appears
    in any other form.
    """
    columns = surface_columns(surface, order)
    rows = _affine_rows(surface, columns)
    if not rows:
        return []
    r, pivots = linalg.rref(rows, len(columns))
    if len(pivots) < len(rows):
        raise DependentConstraintSet(
            f"{len(rows)} affine constraints span only {len(pivots)} dimensions"
        )
    out = []
    for row, pc in zip(r, pivots):
        form = AffineForm({c: a for c, a in zip(columns, row[:-1])}, row[-1])
        out.append((columns[pc], form))
    return out


def solve_surface(surface, order=None):
    """Map each pivot variable to its value on the surface ``S = 0``."""
    solution = {}
    for pivot, form in echelon_surface(surface, order):
        rest = AffineForm({n: a for n, a in form.coeffs if n != pivot}, form.const)
        solution[pivot] = (-rest).to_expression()
    return solution


def reduce_modulo(expr, surface, order=None):
    """Normal form of ``expr`` on ``surface = 0``.

    The pivot of each echelonized element is substituted away. ``order``
    lists preferred pivot variables first; the rest follow by name.
    """
    expr = Expression.lift(expr)
    if not surface:
        return expr
    return expr.subs(solve_surface(surface, order))
