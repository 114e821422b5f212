"""Dirac brackets, strong elimination, gauge fixing and Darboux charts."""

from dataclasses import dataclass, field, replace
from fractions import Fraction

from . import linalg
from .errors import InadmissibleGauge, UnsolvableEliminationChoice
from .expr import Expression, poisson_bracket, reduce_modulo, solve_surface
from .legendre import Constraint


@dataclass(frozen=True)
class GaugeCondition:
    body: Expression
    target: str = ""  # label of the first-class constraint it fixes

    def as_constraint(self, label):
        return Constraint(body=Expression.lift(self.body), generation="gauge", kind="second", label=label)


@dataclass(frozen=True)
class DiracStructure:
    chart: object
    scc: tuple  # Constraint, every one imposed strongly
    matrix: tuple  # brackets among scc
    inverse: tuple
    fccs: tuple = ()  # first-class constraints not yet gauge fixed
    keep: tuple = ()
    discard: tuple = ()
    solved: dict = field(default_factory=dict)
    omega: tuple = ()

    @property
    def surface(self):
        return [c.body for c in self.scc] + [c.body for c in self.fccs]

    @property
    def order(self):
        return tuple(self.discard) + tuple(self.keep)

    @property
    def gauge_fixed(self):
        return not self.fccs

    def omega_entry(self, u, v):
        return self.omega[self.keep.index(u)][self.keep.index(v)]


def _raw_dirac_bracket(a, b, chart, scc_bodies, inverse):
    out = poisson_bracket(a, b, chart)
    if not scc_bodies:
        return out
    left = [poisson_bracket(a, chi, chart) for chi in scc_bodies]
    right = [poisson_bracket(chi, b, chart) for chi in scc_bodies]
    n = len(scc_bodies)
    for r in range(n):
        if left[r].is_zero():
            continue
        t = Expression()
        for s in range(n):
            if inverse[r][s] and not right[s].is_zero():
                t = t + right[s] * inverse[r][s]
        if t:
            out = out - left[r] * t
    return out


def dirac_bracket(a, b, D):
    """``{a,b} - {a,chi_r} C^-1_rs {chi_s,b}`` reduced on the full constraint surface."""
    a = Expression.lift(a)
    b = Expression.lift(b)
    raw = _raw_dirac_bracket(a, b, D.chart, [c.body for c in D.scc], D.inverse)
    return reduce_modulo(raw, D.surface, D.order)


def _coefficient_rows(bodies, names):
    rows = []
    for b in bodies:
        form = b.to_affine()
        rows.append([form.coefficient(n) for n in names])
    return rows


def _in_span(rows, vector):
    return linalg.rank(rows + [vector]) == linalg.rank(rows)


def discard_priority(bodies, chart):
    """Order in which variables are tried for elimination.

    Canonical pairs whose momentum alone lies in the constraint span go
    first (momentum, then coordinate); remaining momenta follow in
    declaration order, then remaining coordinates.
    """
    names = list(chart.names)
    rows = _coefficient_rows(bodies, names)
    first = []
    if rows:
        for q, p in chart.pairs:
            unit = [Fraction(int(n == p)) for n in names]
            if _in_span(rows, unit):
                first += [p, q]
    rest = [p for p in chart.momenta if p not in first] + [q for q in chart.coordinates if q not in first]
    return first + rest


def _greedy_discard(bodies, chart, candidates):
    names = list(chart.names)
    rows = _coefficient_rows(bodies, names)
    target = len(bodies)
    chosen = []
    current = 0
    for v in candidates:
        if current == target:
            break
        cols = [names.index(c) for c in chosen + [v]]
        rk = linalg.rank([[row[c] for c in cols] for row in rows], len(cols))
        if rk > current:
            chosen.append(v)
            current = rk
    return chosen, current


def choose_elimination(bodies, chart, keep=None):
    """Split phase variables into ``(keep, discard)`` for solving ``bodies = 0``."""
    names = list(chart.names)
    n_keep = len(names) - len(bodies)
    priority = discard_priority(bodies, chart)
    default_discard, _ = _greedy_discard(bodies, chart, priority)
    default_keep = [n for n in names if n not in default_discard]
    if keep is None:
        return tuple(default_keep), tuple(default_discard)
    keep = list(dict.fromkeys(keep))
    unknown = [k for k in keep if k not in names]
    if unknown:
        raise UnsolvableEliminationChoice(f"unknown variables {unknown}")
    if len(keep) < n_keep:
        for k in list(keep):
            conj = chart.conjugate(k)
            if conj not in keep and len(keep) < n_keep:
                keep.append(conj)
    discard, rk = _greedy_discard(bodies, chart, [v for v in priority if v not in keep])
    if len(keep) > n_keep or rk < len(bodies):
        raise UnsolvableEliminationChoice(
            f"cannot keep {keep}: the {len(bodies)} strong constraints must be solved for "
            f"{len(bodies)} of the remaining variables; a valid keep set is {default_keep}"
        )
    keep_full = [n for n in names if n not in discard]
    return tuple(keep_full), tuple(discard)


def solve_for(bodies, discard):
    """Express ``discard`` through the other variables using ``bodies = 0``."""
    if not bodies:
        return {}
    solution = solve_surface(bodies, list(discard))
    if set(solution) != set(discard):
        raise UnsolvableEliminationChoice(f"constraints cannot be solved for {list(discard)}")
    return solution


def _omega(keep, chart, scc_bodies, inverse, surface, order):
    n = len(keep)
    om = linalg.zeros(n)
    for i in range(n):
        for j in range(i + 1, n):
            e = reduce_modulo(
                _raw_dirac_bracket(Expression.variable(keep[i]), Expression.variable(keep[j]), chart, scc_bodies, inverse),
                surface,
                order,
            )
            v = e.constant_value()
            om[i][j] = v
            om[j][i] = -v
    return tuple(tuple(r) for r in om)


def build_structure(chart, scc, fccs=(), keep=None):
    scc = tuple(scc)
    bodies = [c.body for c in scc]
    C = linalg.zeros(len(scc))
    for i in range(len(scc)):
        for j in range(i + 1, len(scc)):
            v = poisson_bracket(bodies[i], bodies[j], chart).constant_value()
            C[i][j] = v
            C[j][i] = -v
    inv = linalg.inverse(C) if scc else []
    keep_t, discard = choose_elimination(bodies, chart, keep)
    solved = solve_for(bodies, discard)
    surface = bodies + [c.body for c in fccs]
    order = discard + keep_t
    omega = _omega(keep_t, chart, bodies, inv, surface, order)
    return DiracStructure(
        chart=chart,
        scc=scc,
        matrix=tuple(tuple(r) for r in C),
        inverse=tuple(tuple(r) for r in inv),
        fccs=tuple(fccs),
        keep=keep_t,
        discard=discard,
        solved=solved,
        omega=omega,
    )


def dirac_structure(closure, keep=None):
    """Dirac structure of the second-class part of a classified closure."""
    return build_structure(closure.chart, closure.sccs, closure.fccs, keep)


def gauge_fix(D, fccs, gauges, keep=None):
    """Pair each first-class constraint with a gauge condition and rebuild the brackets."""
    fccs = list(fccs)
    gauges = [g if isinstance(g, GaugeCondition) else GaugeCondition(Expression.lift(g)) for g in gauges]
    if len(gauges) != len(fccs):
        raise InadmissibleGauge(f"{len(fccs)} first-class constraints need {len(fccs)} gauge conditions, got {len(gauges)}")
    thetas = []
    for i, (g, f) in enumerate(zip(gauges, fccs)):
        body = Expression.lift(g.body)
        if not body.is_affine() or body.is_constant():
            raise InadmissibleGauge(f"gauge condition {body} must be affine and non-constant")
        thetas.append(replace(g.as_constraint(f"theta{i + 1}"), body=body))
    added = [f.with_kind("second") for f in fccs] + thetas
    scc = tuple(D.scc) + tuple(added)
    C = linalg.zeros(len(scc))
    for i in range(len(scc)):
        for j in range(i + 1, len(scc)):
            v = poisson_bracket(scc[i].body, scc[j].body, D.chart).constant_value()
            C[i][j] = v
            C[j][i] = -v
    if linalg.bareiss_det(C) == 0:
        raise InadmissibleGauge(
            "extended bracket matrix of first-class constraints and gauge conditions is singular"
        )
    remaining = [f for f in D.fccs if all(f.body != g.body for g in fccs)]
    return build_structure(D.chart, scc, remaining, keep)


def eliminate(H, D, keep=None):
    """Impose the second-class constraints strongly on ``H``.

    Returns ``(H_reduced, solved)`` where ``solved`` maps each discarded
    variable to an affine expression in the kept ones.
    """
    bodies = [c.body for c in D.scc]
    if keep is None or tuple(keep) == D.keep:
        solved = D.solved
    else:
        _, discard = choose_elimination(bodies, D.chart, keep)
        solved = solve_for(bodies, discard)
    return Expression.lift(H).subs(solved), dict(solved)


def reconstruct(values, solved):
    """Values of eliminated variables from kept ones (floats)."""
    out = dict(values)
    for name, e in solved.items():
        out[name] = e.evaluate(values)
    return out


# -- Darboux charts ---------------------------------------------------------


@dataclass(frozen=True)
class CanonicalChart:
    pairs: tuple  # ((Q, P), ...) as expressions
    casimirs: tuple = ()

    def functions(self):
        out = []
        for q, p in self.pairs:
            out += [q, p]
        return out + list(self.casimirs)

    def names(self):
        out = []
        for i in range(len(self.pairs)):
            out += [f"Q{i + 1}", f"P{i + 1}"]
        return out + [f"C{i + 1}" for i in range(len(self.casimirs))]


def _form(u, v, om):
    n = len(u)
    total = Fraction(0)
    for i in range(n):
        if u[i] == 0:
            continue
        for j in range(n):
            if v[j] and om[i][j]:
                total += u[i] * om[i][j] * v[j]
    return total


def _vec_expr(vec, names):
    e = Expression()
    for a, n in zip(vec, names):
        if a:
            e = e + Expression.variable(n) * a
    return e


def symplectic_basis(omega):
    """Symplectic Gram-Schmidt over the rationals.

    Returns ``(pairs, casimirs)`` as coefficient vectors; ``Q`` stays a basis
    vector when possible and the scale goes into ``P``.
    """
    n = len(omega)
    remaining = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    pairs = []
    while True:
        found = None
        for a, u in enumerate(remaining):
            for b, v in enumerate(remaining):
                if b != a and _form(u, v, omega) != 0:
                    found = (a, b)
                    break
            if found:
                break
        if not found:
            break
        a, b = found
        u, v = remaining[a], remaining[b]
        w = _form(u, v, omega)
        Q = u
        P = [x / w for x in v]
        rest = []
        for k, x in enumerate(remaining):
            if k in (a, b):
                continue
            c_p = _form(x, P, omega)
            c_q = _form(x, Q, omega)
            rest.append([xi - c_p * qi + c_q * pi for xi, qi, pi in zip(x, Q, P)])
        remaining = rest
        pairs.append((Q, P))
    casimirs = [v for v in remaining if any(v)]
    return pairs, casimirs


def darboux(D):
    """Canonical pairs and Casimirs of the Dirac bracket on the kept variables."""
    pairs, casimirs = symplectic_basis([list(r) for r in D.omega])
    names = list(D.keep)
    return CanonicalChart(
        pairs=tuple((_vec_expr(q, names), _vec_expr(p, names)) for q, p in pairs),
        casimirs=tuple(_vec_expr(c, names) for c in casimirs),
    )


def chart_violations(chart, D):
    """Every failed canonical-chart invariant under the Dirac bracket of ``D``."""
    bad = []
    pairs = list(chart.pairs)
    for i, (qi, pi) in enumerate(pairs):
        for j, (qj, pj) in enumerate(pairs):
            want = Expression.constant(int(i == j))
            got = dirac_bracket(qi, pj, D)
            if got != want:
                bad.append(f"{{Q{i + 1},P{j + 1}}} = {got}, expected {want}")
            if j > i:
                for label, a, b in (("Q", qi, qj), ("P", pi, pj)):
                    got = dirac_bracket(a, b, D)
                    if not got.is_zero():
                        bad.append(f"{{{label}{i + 1},{label}{j + 1}}} = {got}, expected 0")
    funcs = chart.functions()
    for k, c in enumerate(chart.casimirs):
        for f in funcs + [Expression.variable(v) for v in D.keep]:
            got = dirac_bracket(c, f, D)
            if not got.is_zero():
                bad.append(f"casimir C{k + 1} has bracket {got} with {f}")
    return bad


def chart_matrix(chart, D):
    """Rows: chart functions as linear combinations of ``D.keep``; plus constants."""
    rows = []
    consts = []
    for f in chart.functions():
        form = reduce_modulo(f, D.surface, D.order).to_affine()
        rows.append([form.coefficient(v) for v in D.keep])
        consts.append(form.const)
    return rows, consts


def express_in_chart(H, chart, D):
    """Rewrite ``H`` (in kept variables) through the chart variables ``Q_i, P_i, C_k``."""
    rows, consts = chart_matrix(chart, D)
    if len(rows) != len(D.keep):
        raise UnsolvableEliminationChoice(
            f"chart has {len(rows)} functions for {len(D.keep)} kept variables; it cannot be inverted"
        )
    inv = linalg.inverse(rows)
    new = [Expression.variable(n) - c for n, c in zip(chart.names(), consts)]
    mapping = {}
    for i, v in enumerate(D.keep):
        e = Expression()
        for j, x in enumerate(new):
            if inv[i][j]:
                e = e + x * inv[i][j]
        mapping[v] = e
    H = reduce_modulo(Expression.lift(H), D.surface, D.order)
    return H.subs(mapping)


# -- gauge-invariant observables ------------------------------------------


def physical_observables(closure):
    """Linear functions commuting with every FCC, independent modulo the constraints.

    There are exactly ``phase_dof`` of them; evaluated on any gauge slice
    they give the same physical state.
    """
    chart = closure.chart
    names = list(chart.names)
    cons_rows = _coefficient_rows([c.body for c in closure.constraints], names)
    cond = []
    for f in closure.fccs:
        # {v, psi} for every phase variable v, as a linear condition on coefficients
        cond.append([poisson_bracket(Expression.variable(v), f.body, chart).constant_value() for v in names])
    basis = linalg.nullspace(cond, len(names)) if cond else [
        [Fraction(int(i == j)) for j in range(len(names))] for i in range(len(names))
    ]
    chosen = []
    rows = [list(r) for r in cons_rows]
    base_rank = linalg.rank(rows, len(names)) if rows else 0
    for v in basis:
        if linalg.rank(rows + [v], len(names)) > base_rank:
            rows.append(v)
            base_rank += 1
            chosen.append(v)
    return [_vec_expr(v, names) for v in chosen]
