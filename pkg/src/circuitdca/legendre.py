"""Momenta, primary constraints and the base Hamiltonian of a structured Lagrangian."""

from dataclasses import dataclass, replace
from fractions import Fraction

from . import linalg
from .expr import AffineForm, Expression, echelon_surface
from .parser import velocity_name


@dataclass(frozen=True)
class Constraint:
    body: Expression
    generation: str = "primary"  # or "secondary", "gauge"
    kind: str = "unclassified"  # or "first", "second"
    label: str = ""

    def with_kind(self, kind):
        return replace(self, kind=kind)

    def __str__(self):
        return f"{self.label}: {self.body} ~ 0"


def momenta(sl):
    """``p_i = (M qd + B q + c)_i`` for every coordinate."""
    qs = sl.chart.coordinates
    out = []
    for i, p in enumerate(sl.chart.momenta):
        e = Expression.constant(sl.c[i])
        for j, q in enumerate(qs):
            if sl.M[i][j]:
                e = e + Expression.variable(velocity_name(q)) * sl.M[i][j]
            if sl.B[i][j]:
                e = e + Expression.variable(q) * sl.B[i][j]
        out.append((p, e))
    return out


def _shifted_momenta(sl):
    """``w = p - B q - c`` as affine expressions."""
    qs = sl.chart.coordinates
    ws = []
    for i, p in enumerate(sl.chart.momenta):
        coeffs = {p: Fraction(1)}
        for j, q in enumerate(qs):
            if sl.B[i][j]:
                coeffs[q] = -sl.B[i][j]
        ws.append(AffineForm(coeffs, -sl.c[i]))
    return ws


def echelonize(bodies, chart, generation="primary", start=1):
    """Echelon basis of an affine constraint set, momenta as leading pivots."""
    forms = echelon_surface(bodies, chart.pivot_order())
    return [
        Constraint(body=form.to_expression(), generation=generation, label=f"chi{start + i}")
        for i, (_, form) in enumerate(forms)
    ]


def primary_constraints(sl):
    """One constraint ``v^T (p - B q - c)`` per null vector ``v`` of ``M``."""
    n = sl.size
    null = linalg.nullspace([list(r) for r in sl.M], n)
    if not null:
        return []
    ws = _shifted_momenta(sl)
    bodies = []
    for v in null:
        body = Expression()
        for vi, w in zip(v, ws):
            if vi:
                body = body + w.to_expression() * vi
        bodies.append(body)
    return echelonize(bodies, sl.chart)


def _principal_basis(M):
    """Greedy index set whose principal submatrix of ``M`` is nonsingular with full rank."""
    n = len(M)
    chosen = []
    for i in range(n):
        trial = chosen + [i]
        if linalg.bareiss_det(linalg.submatrix(M, trial, trial)) != 0:
            chosen = trial
    return chosen


def generalized_inverse(M):
    """Inverse on a maximal nonsingular principal block, zero elsewhere.

    For symmetric ``M`` this satisfies ``M G M = M``.
    """
    n = len(M)
    idx = _principal_basis([list(r) for r in M])
    G = linalg.zeros(n)
    if idx:
        inv = linalg.inverse(linalg.submatrix(M, idx, idx))
        for a, i in enumerate(idx):
            for b, j in enumerate(idx):
                G[i][j] = inv[a][b]
    return G


def _momentum_relation(constraint, coordinate, chart):
    """``coordinate = f(momenta)`` if the constraint has that shape, else None."""
    form = constraint.body.to_affine()
    coords = [n for n in form.variables if not chart.is_momentum(n)]
    if coords != [coordinate]:
        return None
    a = form.coefficient(coordinate)
    rest = AffineForm({n: b for n, b in form.coeffs if n != coordinate}, form.const)
    return (-rest).scale(1 / a)


def rewrite_trig_arguments(H, primaries, chart):
    """Replace coordinates inside trig arguments by momenta where a primary allows it.

    Among candidate relations the sparsest wins, then the one with positive
    coefficients, then the later constraint.
    """
    coords = set()
    for f in H.trig_factors():
        coords.update(n for n in f.arg.variables if not chart.is_momentum(n))
    mapping = {}
    for z in sorted(coords, key=chart.coordinates.index):
        best = None
        for pos, con in enumerate(primaries):
            rel = _momentum_relation(con, z, chart)
            if rel is None or rel.is_constant():
                continue
            score = (-len(rel.coeffs), sum(1 for _, a in rel.coeffs if a > 0), pos)
            if best is None or score > best[0]:
                best = (score, rel)
        if best is not None:
            mapping[z] = best[1].to_expression()
    return H.subs(mapping, trig_only=True) if mapping else H


def base_hamiltonian(sl, primaries=None):
    """``H = 1/2 w^T G w + V`` with ``w = p - B q - c`` and ``G`` a generalized inverse of ``M``.

    On the primary surface this equals ``p.qd - L``. Multiplier terms are
    added later by the stabilization loop.
    """
    if primaries is None:
        primaries = primary_constraints(sl)
    G = generalized_inverse(sl.M)
    ws = [w.to_expression() for w in _shifted_momenta(sl)]
    H = Expression()
    n = sl.size
    for i in range(n):
        for j in range(n):
            if G[i][j]:
                H = H + ws[i] * ws[j] * (G[i][j] / 2)
    H = H + sl.V
    return rewrite_trig_arguments(H, primaries, sl.chart)
