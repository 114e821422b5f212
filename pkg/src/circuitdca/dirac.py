"""Stabilization of constraints, first/second-class split and DOF counting."""

import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction

from . import linalg
from .errors import (
    AnalysisError,
    InconsistentConstraints,
    InvalidSCCChoice,
    NonAffineSecondaryConstraint,
    NonConstantBracketMatrix,
    NonTerminating,
    OddPhaseDof,
)
from .expr import Expression, poisson_bracket, reduce_modulo
from .legendre import Constraint

LIMIT_WARNING = (
    "classification holds only for the exact bound parameter values; a limit in any "
    "parameter (for example a capacitance going to zero) can change constraint classes "
    "and must be analyzed as a separate model, not extrapolated"
)


@dataclass(frozen=True)
class ConstraintClosure:
    chart: object
    hamiltonian: Expression
    constraints: tuple  # stabilized set, in admission order
    n_primary: int
    multipliers: dict  # label -> particular solution (free multipliers set to 0)
    determined: tuple  # labels whose multiplier is fixed by the persistence conditions
    persistence: dict  # label -> {chi, H} reduced on the surface known when chi was admitted
    iterations: int = 0
    # filled by classify()
    matrix: tuple = None
    scc_indices: tuple = ()
    fcc_coefficients: tuple = ()
    fccs: tuple = ()
    classified: bool = False

    @property
    def primaries(self):
        return self.constraints[: self.n_primary]

    @property
    def bodies(self):
        return [c.body for c in self.constraints]

    @property
    def sccs(self):
        return tuple(self.constraints[i] for i in self.scc_indices)

    def labels(self):
        return [c.label for c in self.constraints]

    def classified_constraints(self):
        """SCCs followed by the FCC basis; spans the same surface as ``constraints``."""
        return self.sccs + self.fccs

    @property
    def determined_multipliers(self):
        return {k: self.multipliers[k] for k in self.determined}


def bracket_value(a, b, chart, surface=(), order=None):
    e = reduce_modulo(poisson_bracket(a, b, chart), list(surface), order)
    if not e.is_constant():
        raise NonConstantBracketMatrix(f"bracket {{{a}, {b}}} = {e} is not constant on the surface")
    return e.constant_value()


def bracket_matrix(constraints, chart, surface=(), order=None):
    bodies = [c.body if isinstance(c, Constraint) else c for c in constraints]
    n = len(bodies)
    C = linalg.zeros(n)
    for i in range(n):
        for j in range(i + 1, n):
            v = bracket_value(bodies[i], bodies[j], chart, surface, order)
            C[i][j] = v
            C[j][i] = -v
    return C


def _eliminate(A, rhs):
    """Gauss-Jordan on ``A alpha = rhs`` with expression right-hand sides.

    Returns ``(rows, rhs, pivots, residuals)``: the reduced nonzero rows with
    their right-hand sides and pivot columns, then the right-hand sides of
    rows whose coefficient part vanished.
    """
    rows = [list(r) for r in A]
    rhs = list(rhs)
    ncols = len(rows[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        rhs[r], rhs[p] = rhs[p], rhs[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        rhs[r] = rhs[r] * inv
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
                rhs[i] = rhs[i] - rhs[r] * f
        pivots.append(c)
        r += 1
    return rows[:r], rhs[:r], pivots, rhs[r:]


def stabilize(H, primaries, chart, max_iterations=None):
    """Demand time persistence of every constraint until the set closes.

    Each round solves ``{chi_k, H} + sum_l alpha_l {chi_k, chi_l} ~ 0`` for the
    multipliers of the primary constraints. Rows with no multiplier left yield
    candidate secondary constraints, which are reduced on the current surface
    and echelonized before admission.
    """
    primaries = list(primaries)
    for c in primaries:
        if not c.body.is_affine():
            raise NonAffineSecondaryConstraint(f"primary constraint {c.label} is not affine", c.body)
    constraints = list(primaries)
    order = chart.pivot_order()
    bound = max_iterations if max_iterations is not None else 2 * chart.dimension
    first_seen = {}
    for iteration in range(1, bound + 1):
        surface = [c.body for c in constraints]
        A = bracket_matrix(constraints, chart) if constraints else []
        A = [row[: len(primaries)] for row in A]
        persistence = [reduce_modulo(poisson_bracket(c.body, H, chart), surface, order) for c in constraints]
        for c, p in zip(constraints, persistence):
            first_seen.setdefault(c.label, p)
        rows, rhs, pivots, residuals = _eliminate(A, [-p for p in persistence])
        new = []
        for res in residuals:
            res = reduce_modulo(res, surface + [n.body for n in new], order)
            if res.is_zero():
                continue
            if not res.is_affine():
                raise NonAffineSecondaryConstraint(
                    f"secondary constraint {res} ~ 0 is not affine", res
                )
            if res.is_constant():
                raise InconsistentConstraints(f"persistence requires {res} = 0")
            form = res.to_affine()
            lead = next(n for n in list(order) + sorted(form.variables) if form.coefficient(n) != 0)
            body = (form.scale(1 / form.coefficient(lead))).to_expression()
            new.append(
                Constraint(
                    body=body,
                    generation="secondary",
                    label=f"chi{len(constraints) + len(new) + 1}",
                )
            )
        if not new:
            break
        constraints.extend(new)
    else:
        raise NonTerminating(f"constraint chain did not close within {bound} rounds")

    labels = [c.label for c in primaries]
    null = linalg.nullspace(A, len(primaries)) if primaries else []
    determined = tuple(labels[j] for j in range(len(primaries)) if all(v[j] == 0 for v in null))
    particular = {lab: Expression() for lab in labels}
    for row, value, pc in zip(rows, rhs, pivots):
        particular[labels[pc]] = reduce_modulo(value, surface, order)
    return ConstraintClosure(
        chart=chart,
        hamiltonian=H,
        constraints=tuple(constraints),
        n_primary=len(primaries),
        multipliers=particular,
        determined=determined,
        persistence=first_seen,
        iterations=iteration,
    )


def classify(closure, scc_choice=None):
    """Split the closed set into first-class combinations and a second-class complement.

    FCCs are the reduced row echelon basis of the left null space of the
    bracket matrix. The SCC complement is the lowest-index independent set
    of rows unless ``scc_choice`` (labels) overrides it.
    """
    cons = list(closure.constraints)
    chart = closure.chart
    bodies = [c.body for c in cons]
    order = chart.pivot_order()
    C = bracket_matrix(cons, chart, bodies, order)
    n = len(cons)
    null = linalg.left_nullspace(C, n) if n else []
    r = n - len(null)
    if scc_choice is None:
        scc = linalg.independent_rows(C, n)
    else:
        labels = [c.label for c in cons]
        missing = [s for s in scc_choice if s not in labels]
        if missing:
            raise InvalidSCCChoice(f"unknown constraint labels {missing}")
        scc = sorted(labels.index(s) for s in scc_choice)
        if len(scc) != r:
            raise InvalidSCCChoice(f"need exactly {r} second-class constraints, got {len(scc)}")
    if scc and linalg.bareiss_det(linalg.submatrix(C, scc, scc)) == 0:
        raise InvalidSCCChoice("chosen second-class set has a singular bracket matrix")
    fccs = []
    for i, v in enumerate(null):
        body = Expression()
        gens = set()
        for coef, con in zip(v, cons):
            if coef:
                body = body + con.body * coef
                gens.add(con.generation)
        gen = "primary" if gens == {"primary"} else "secondary"
        fccs.append(Constraint(body=body, generation=gen, kind="first", label=f"psi{i + 1}"))
    sset = set(scc)
    fset = {i for i in range(n) if all(x == 0 for x in C[i])}
    new_cons = []
    for i, c in enumerate(cons):
        kind = "second" if i in sset else ("first" if i in fset else "unclassified")
        new_cons.append(c.with_kind(kind))
    return replace(
        closure,
        constraints=tuple(new_cons),
        matrix=tuple(tuple(r) for r in C),
        scc_indices=tuple(scc),
        fcc_coefficients=tuple(tuple(v) for v in null),
        fccs=tuple(fccs),
        classified=True,
    )


def dof_count(closure, chart=None):
    """``(phase_dof, config_dof)`` with ``phase = 2N - 2 #FCC - #SCC``."""
    chart = chart or closure.chart
    phase = chart.dimension - 2 * len(closure.fccs) - len(closure.scc_indices)
    if phase % 2:
        warnings.warn(f"odd phase-space dimension {phase}", OddPhaseDof, stacklevel=2)
    return phase, Fraction(phase, 2)


@dataclass
class DiagnosticReport:
    rank_kinetic: int
    size: int
    n_constraints: int
    n_primary: int
    n_secondary: int
    n_fcc: int
    n_scc: int
    rank_constraint_matrix: int
    rank_primary_matrix: int
    flags: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    hard: bool = False
    error: dict = None

    def to_dict(self):
        return {
            "size": self.size,
            "rank_kinetic_matrix": self.rank_kinetic,
            "n_constraints": self.n_constraints,
            "n_primary": self.n_primary,
            "n_secondary": self.n_secondary,
            "n_fcc": self.n_fcc,
            "n_scc": self.n_scc,
            "rank_constraint_matrix": self.rank_constraint_matrix,
            "rank_primary_matrix": self.rank_primary_matrix,
            "flags": list(self.flags),
            "warnings": list(self.warnings),
            "hard": self.hard,
            "error": self.error,
        }


def singularity_scan(sl, closure):
    """Rank report for the kinetic and constraint matrices of a classified closure."""
    n = sl.size
    rank_m = linalg.rank([list(r) for r in sl.M], n)
    C = [list(r) for r in closure.matrix] if closure.matrix is not None else []
    rank_c = linalg.rank(C, len(C)) if C else 0
    prim = [row[: closure.n_primary] for row in C[: closure.n_primary]]
    rank_p = linalg.rank(prim, closure.n_primary) if prim else 0
    flags = []
    phase = closure.chart.dimension - 2 * len(closure.fccs) - len(closure.scc_indices)
    if phase % 2:
        flags.append("odd_phase_dof")
    if rank_c % 2:
        flags.append("odd_constraint_matrix_rank")
    scc = list(closure.scc_indices)
    if scc and linalg.bareiss_det(linalg.submatrix(C, scc, scc)) == 0:
        flags.append("singular_scc_matrix")
    return DiagnosticReport(
        rank_kinetic=rank_m,
        size=n,
        n_constraints=len(closure.constraints),
        n_primary=closure.n_primary,
        n_secondary=len(closure.constraints) - closure.n_primary,
        n_fcc=len(closure.fccs),
        n_scc=len(scc),
        rank_constraint_matrix=rank_c,
        rank_primary_matrix=rank_p,
        flags=flags,
        warnings=[LIMIT_WARNING],
        hard=bool(flags),
    )


def diagnose(sl, scc_choice=None):
    """Run Legendre, stabilization and classification; failures become a hard diagnostic."""
    from .legendre import base_hamiltonian, primary_constraints

    primaries = primary_constraints(sl)
    n = sl.size
    rank_m = linalg.rank([list(r) for r in sl.M], n)
    try:
        H = base_hamiltonian(sl, primaries)
        closure = classify(stabilize(H, primaries, sl.chart), scc_choice)
    except AnalysisError as exc:
        C = bracket_matrix(primaries, sl.chart) if primaries else []
        rank_p = linalg.rank(C, len(C)) if C else 0
        return DiagnosticReport(
            rank_kinetic=rank_m,
            size=n,
            n_constraints=len(primaries),
            n_primary=len(primaries),
            n_secondary=0,
            n_fcc=0,
            n_scc=0,
            rank_constraint_matrix=rank_p,
            rank_primary_matrix=rank_p,
            flags=["analysis_failed"] + (["singular_primary_matrix"] if rank_p < len(primaries) else []),
            warnings=[LIMIT_WARNING],
            hard=True,
            error=exc.to_dict(),
        )
    return singularity_scan(sl, closure)
