"""Commutator tables from Dirac brackets and the rescaling to canonical form.

Planck's constant stays a symbol throughout: ``[A, B] = i*hbar*C``.
"""

from dataclasses import dataclass
from fractions import Fraction

from . import linalg
from .errors import OperatorOrderingUnsupported
from .expr import Expression
from .reduce import dirac_bracket, darboux, chart_matrix


@dataclass(frozen=True)
class QuantumTable:
    entries: tuple  # (A, B, C) with [A, B] = i*hbar*C
    variables: tuple = ()
    hbar: str = "hbar"

    def lookup(self, a, b):
        a, b = Expression.lift(a), Expression.lift(b)
        for x, y, c in self.entries:
            if (x, y) == (a, b):
                return c
            if (x, y) == (b, a):
                return -c
        return Expression()

    def lines(self):
        out = []
        for a, b, c in self.entries:
            if c.is_constant() and c.constant_value() < 0:
                out.append(f"[{a}, {b}] = -i*{self.hbar}*{-c}")
            else:
                out.append(f"[{a}, {b}] = i*{self.hbar}*{c}")
        return out

    def to_dict(self):
        return {
            "hbar": self.hbar,
            "entries": [{"a": str(a), "b": str(b), "c": str(c)} for a, b, c in self.entries],
        }


def _as_expr(x):
    return Expression.variable(x) if isinstance(x, str) else Expression.lift(x)


def commutator_table(D, variables=None):
    """Promote each nonzero Dirac bracket among ``variables`` to a commutator."""
    names = list(variables) if variables is not None else list(D.keep)
    entries = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            A, B = _as_expr(a), _as_expr(b)
            c = dirac_bracket(A, B, D)
            if not c.is_constant():
                raise OperatorOrderingUnsupported(
                    f"bracket {{{A}, {B}}} = {c} depends on the dynamical variables; operator ordering is not handled"
                )
            if c:
                entries.append((A, B, c))
    return QuantumTable(tuple(entries), tuple(str(n) for n in names))


@dataclass(frozen=True)
class LinearMap:
    """``new_i = sum_j rows[i][j] * old_j`` (plus constant shifts, dropped in commutators)."""

    old: tuple
    new: tuple
    rows: tuple
    n_pairs: int

    def omega_old(self, table):
        n = len(self.old)
        om = linalg.zeros(n)
        for i, a in enumerate(self.old):
            for j, b in enumerate(self.old):
                if i != j:
                    om[i][j] = table.lookup(Expression.variable(a), Expression.variable(b)).constant_value()
        return om

    def mapped_omega(self, table):
        T = [list(r) for r in self.rows]
        return linalg.matmul(linalg.matmul(T, self.omega_old(table)), linalg.transpose(T))

    def is_canonical(self, table):
        om = self.mapped_omega(table)
        for i in range(len(self.new)):
            for j in range(len(self.new)):
                want = Fraction(0)
                if i < 2 * self.n_pairs and j < 2 * self.n_pairs and i // 2 == j // 2 and i != j:
                    want = Fraction(1) if i % 2 == 0 else Fraction(-1)
                if om[i][j] != want:
                    return False
        return True

    def describe(self):
        out = []
        for name, row in zip(self.new, self.rows):
            e = Expression()
            for a, v in zip(row, self.old):
                if a:
                    e = e + Expression.variable(v) * a
            out.append(f"{name} = {e}")
        return out


def canonical_rescaling(table, D, chart=None):
    """Linear map from the kept variables to canonical pairs and Casimirs.

    Without a chart the Darboux chart of ``D`` is used.
    """
    if chart is None:
        chart = darboux(D)
    rows, _ = chart_matrix(chart, D)
    return LinearMap(
        old=tuple(D.keep),
        new=tuple(chart.names()),
        rows=tuple(tuple(r) for r in rows),
        n_pairs=len(chart.pairs),
    )
