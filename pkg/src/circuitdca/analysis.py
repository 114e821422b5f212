"""End-to-end pipeline: source text to reduced, quantized model."""

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg
from .dirac import LIMIT_WARNING, classify, diagnose, dof_count, singularity_scan, stabilize
from .dynamics import equations_of_motion, evaluate_along, integrate, relative_deviation
from .errors import InvariantViolation, OddPhaseDof
from .expr import Expression, format_scalar
from .legendre import base_hamiltonian, momenta, primary_constraints
from .parser import canonicalize, parse, parse_expression
from .quantize import canonical_rescaling, commutator_table
from .reduce import (
    GaugeCondition,
    chart_violations,
    darboux,
    dirac_bracket,
    dirac_structure,
    eliminate,
    express_in_chart,
    gauge_fix,
    physical_observables,
)

SCHEMA = 1


@dataclass
class Analysis:
    source: object
    sl: object
    primaries: list
    hamiltonian: Expression  # base Hamiltonian before multipliers
    closure: object
    phase_dof: int
    structure: object  # Dirac structure actually used for reduction
    gauges: list
    reduced: Expression
    solved: dict
    chart: object
    chart_hamiltonian: Expression
    table: object = None
    rescaling: object = None
    diagnostics: object = None
    notes: list = field(default_factory=list)

    @property
    def chart_names(self):
        return self.sl.chart

    def equations(self):
        return equations_of_motion(self.reduced, self.structure)

    def observables(self):
        return physical_observables(self.closure)


def parse_gauges(texts, source):
    names = source.phase_names()
    return [parse_expression(t, names) for t in texts]


def load(text):
    src = parse(text)
    return src, canonicalize(src)


def analyze(text, gauges=None, keep=None, scc_choice=None, quantize=True):
    """Run the full pipeline.

    ``gauges`` and ``keep`` override the ``gauge:`` and ``keep:``
    directives of the source; gauges are strings or expressions.
    """
    src, sl = load(text)
    primaries = primary_constraints(sl)
    H = base_hamiltonian(sl, primaries)
    closure = classify(stabilize(H, primaries, sl.chart), scc_choice)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OddPhaseDof)
        phase, _ = dof_count(closure)
    notes = [str(w.message) for w in caught]
    D = dirac_structure(closure)
    if gauges is None:
        gauge_exprs = list(src.gauges)
    else:
        gauge_exprs = [parse_gauges([g], src)[0] if isinstance(g, str) else Expression.lift(g) for g in gauges]
    if keep is None and src.keep:
        keep = list(src.keep)
    if gauge_exprs:
        D = gauge_fix(D, closure.fccs, [GaugeCondition(g, f.label) for g, f in zip(gauge_exprs, closure.fccs)], keep)
    elif keep is not None:
        D = dirac_structure(closure, keep)
    reduced, solved = eliminate(H, D)
    chart = darboux(D)
    # with first-class constraints left, the kept variables are not independent on the surface
    chart_H = express_in_chart(reduced, chart, D) if D.gauge_fixed else None
    table = rescaling = None
    if quantize:
        table = commutator_table(D)
        rescaling = canonical_rescaling(table, D, chart)
    result = Analysis(
        source=src,
        sl=sl,
        primaries=primaries,
        hamiltonian=H,
        closure=closure,
        phase_dof=phase,
        structure=D,
        gauges=gauge_exprs,
        reduced=reduced,
        solved=solved,
        chart=chart,
        chart_hamiltonian=chart_H,
        table=table,
        rescaling=rescaling,
        diagnostics=singularity_scan(sl, closure),
        notes=notes,
    )
    check_invariants(result)
    return result


def check_invariants(a):
    """Internal consistency checks; a failure here is a bug, not bad input."""
    C = [list(r) for r in a.closure.matrix] if a.closure.matrix else []
    n = len(C)
    for i in range(n):
        for j in range(n):
            if C[i][j] != -C[j][i]:
                raise InvariantViolation("constraint bracket matrix is not antisymmetric")
    if len(a.closure.scc_indices) % 2:
        raise InvariantViolation("odd number of second-class constraints")
    D = a.structure
    if D.scc:
        prod = linalg.matmul([list(r) for r in D.inverse], [list(r) for r in D.matrix])
        if prod != linalg.identity(len(D.scc)):
            raise InvariantViolation("inverse of the second-class bracket matrix is wrong")
    om = [list(r) for r in D.omega]
    if om and any(om[i][j] != -om[j][i] for i in range(len(om)) for j in range(len(om))):
        raise InvariantViolation("Dirac bracket matrix of kept variables is not antisymmetric")
    if D.gauge_fixed:
        rk = linalg.rank(om, len(om)) if om else 0
        if rk != a.phase_dof:
            raise InvariantViolation(f"rank of kept-variable brackets {rk} differs from phase_dof {a.phase_dof}")
    bad = chart_violations(a.chart, D)
    if bad:
        raise InvariantViolation("Darboux chart failed: " + "; ".join(bad))
    for c in D.scc:
        if not c.body.subs(a.solved).is_zero():
            raise InvariantViolation(f"solved variables do not satisfy {c.label}")


def diagnose_text(text, scc_choice=None):
    """Diagnostic report for a source, tolerant of analysis failures."""
    _, sl = load(text)
    return diagnose(sl, scc_choice)


# -- report -------------------------------------------------------------


def _matrix_str(m):
    return [[format_scalar(x) for x in row] for row in m]


def report(a, path=None):
    """Deterministic, JSON-ready summary of an analysis."""
    sl = a.sl
    D = a.structure
    cl = a.closure
    kept = list(D.keep)
    brackets = []
    for i, u in enumerate(kept):
        for v in kept[i + 1:]:
            brackets.append({"a": u, "b": v, "value": format_scalar(D.omega_entry(u, v))})
    out = {
        "schema": SCHEMA,
        "input": {
            "file": path,
            "coordinates": list(sl.chart.coordinates),
            "momenta": list(sl.chart.momenta),
            "parameters": {k: format_scalar(v) for k, v in sorted(a.source.params.items())},
            "lagrangian": str(a.source.lagrangian),
            "gauge": [str(g) for g in a.gauges],
            "keep": list(a.source.keep),
        },
        "structured_lagrangian": {
            "M": _matrix_str(sl.M),
            "B": _matrix_str(sl.B),
            "c": [format_scalar(x) for x in sl.c],
            "V": str(sl.V),
        },
        "momenta": {p: str(e) for p, e in momenta(sl)},
        "base_hamiltonian": str(a.hamiltonian),
        "constraints": [
            {"label": c.label, "body": str(c.body), "generation": c.generation, "class": c.kind}
            for c in cl.constraints
        ],
        "first_class": [{"label": f.label, "body": str(f.body)} for f in cl.fccs],
        "second_class": [c.label for c in cl.sccs],
        "persistence": {k: str(v) for k, v in cl.persistence.items()},
        "determined_multipliers": {k: str(v) for k, v in cl.determined_multipliers.items()},
        "constraint_matrix": _matrix_str(cl.matrix or []),
        "dof": {
            "phase": a.phase_dof,
            "config": format_scalar(Fraction(a.phase_dof, 2)),
            "n_fcc": len(cl.fccs),
            "n_scc": len(cl.scc_indices),
            "n_scc_after_gauge": len(D.scc),
        },
        "reduction": {
            "gauge_fixed": D.gauge_fixed,
            "strong_constraints": [{"label": c.label, "body": str(c.body)} for c in D.scc],
            "kept": kept,
            "solved": {k: str(v) for k, v in sorted(a.solved.items())},
            "hamiltonian": str(a.reduced),
        },
        "dirac_brackets": brackets,
        "canonical_chart": {
            "pairs": [{"Q": str(q), "P": str(p)} for q, p in a.chart.pairs],
            "casimirs": [str(c) for c in a.chart.casimirs],
            "hamiltonian": None if a.chart_hamiltonian is None else str(a.chart_hamiltonian),
        },
        "quantum": None,
        "diagnostics": a.diagnostics.to_dict(),
        "notes": list(a.notes),
    }
    if a.table is not None:
        q = a.table.to_dict()
        q["rescaling"] = a.rescaling.describe()
        q["rescaling_canonical"] = a.rescaling.is_canonical(a.table)
        out["quantum"] = q
    return out


def render_text(rep):
    """Human-readable rendering of a report dictionary."""
    lines = []
    inp = rep["input"]
    lines.append(f"variables: {' '.join(f'{q}:{p}' for q, p in zip(inp['coordinates'], inp['momenta']))}")
    lines.append(f"base Hamiltonian: {rep['base_hamiltonian']}")
    lines.append("constraints:")
    for c in rep["constraints"]:
        lines.append(f"  {c['label']} = {c['body']}  ({c['generation']}, {c['class']})")
    for f in rep["first_class"]:
        lines.append(f"  first class {f['label']} = {f['body']}")
    if rep["persistence"]:
        lines.append("persistence:")
        for k, v in rep["persistence"].items():
            lines.append(f"  d/dt {k} ~ {v}")
    if rep["determined_multipliers"]:
        lines.append("determined multipliers: " + ", ".join(
            f"alpha[{k}] = {v}" for k, v in rep["determined_multipliers"].items()))
    d = rep["dof"]
    lines.append(f"dof: phase {d['phase']}, config {d['config']} ({d['n_fcc']} first class, {d['n_scc']} second class)")
    r = rep["reduction"]
    if r["gauge_fixed"] and rep["input"]["gauge"]:
        lines.append(f"gauge: {', '.join(rep['input']['gauge'])}")
    lines.append(f"kept: {' '.join(r['kept'])}")
    for k, v in r["solved"].items():
        lines.append(f"  {k} = {v}")
    lines.append(f"reduced Hamiltonian: {r['hamiltonian']}")
    lines.append("Dirac brackets:")
    for b in rep["dirac_brackets"]:
        lines.append(f"  {{{b['a']}, {b['b']}}} = {b['value']}")
    ch = rep["canonical_chart"]
    lines.append("canonical chart:")
    for i, p in enumerate(ch["pairs"], start=1):
        lines.append(f"  Q{i} = {p['Q']}, P{i} = {p['P']}")
    for i, c in enumerate(ch["casimirs"], start=1):
        lines.append(f"  C{i} = {c}")
    if ch["hamiltonian"] is not None:
        lines.append(f"  H = {ch['hamiltonian']}")
    if rep["quantum"]:
        lines.append("commutators:")
        for e in rep["quantum"]["entries"]:
            lines.append(f"  [{e['a']}, {e['b']}] = i*hbar*({e['c']})")
    diag = rep["diagnostics"]
    lines.append(f"diagnostics: rank M = {diag['rank_kinetic_matrix']}, rank C = {diag['rank_constraint_matrix']}, flags = {diag['flags'] or 'none'}")
    for w in diag["warnings"]:
        lines.append(f"  note: {w}")
    for n in rep["notes"]:
        lines.append(f"  warning: {n}")
    return "\n".join(lines) + "\n"


# -- simulation helpers -------------------------------------------------------


def simulate(a, initial, dt, t_end, record_every=1):
    """Integrate the reduced dynamics; unspecified kept variables start at 0."""
    D = a.structure
    unknown = [k for k in initial if k not in D.keep]
    if unknown:
        raise ValueError(f"initial values given for non-evolving variables {unknown}; evolving: {list(D.keep)}")
    init = {v: float(initial.get(v, 0.0)) for v in D.keep}
    traj = integrate(a.equations(), init, dt, t_end, record_every)
    traj.metadata["parameters"] = {k: format_scalar(v) for k, v in sorted(a.source.params.items())}
    traj.metadata["gauge"] = [str(g) for g in a.gauges]
    return traj.with_reconstructed(a.solved)


def gauge_family(closure, basis):
    """``(a, b) -> a*basis[0] + b*basis[1]``."""
    u, v = (Expression.variable(b) for b in basis)
    return lambda a, b: u * a + v * b


def default_gauge_basis(closure):
    """First and last coordinate whose momentum enters the (single) first-class constraint."""
    chart = closure.chart
    if len(closure.fccs) != 1:
        raise ValueError(f"gauge comparison needs exactly one first-class constraint, found {len(closure.fccs)}")
    body = closure.fccs[0].body
    qs = [q for q, p in chart.pairs if body.diff(p)]
    if len(qs) < 2:
        raise ValueError("first-class constraint involves fewer than two momenta; give --gauge-basis")
    return [qs[0], qs[-1]]


def transport_state(observables, values, target):
    """Kept-variable state of ``target`` on which ``observables`` take ``values``."""
    rows = []
    rhs = []
    for o, val in zip(observables, values):
        form = o.subs(target.solved).to_affine()
        rows.append([float(form.coefficient(v)) for v in target.structure.keep])
        rhs.append(val - float(form.const))
    sol = np.linalg.solve(np.array(rows), np.array(rhs))
    return dict(zip(target.structure.keep, sol.tolist()))


def gauge_compare(text, pairs, initial, dt, t_end, basis=None):
    """Run two gauges of a one-FCC model from the same physical state.

    The first gauge starts from ``initial``; the second starts from the
    state with identical gauge-invariant observables. Returns the per
    observable maximum relative deviation and both trajectories.
    """
    base = analyze(text, quantize=False)
    closure = base.closure
    basis = list(basis) if basis else default_gauge_basis(closure)
    fam = gauge_family(closure, basis)
    runs = [analyze(text, gauges=[fam(*ab)], quantize=False) for ab in pairs]
    obs = physical_observables(closure)
    first = simulate(runs[0], initial, dt, t_end)
    state0 = first.states[0]
    values = [o.evaluate(state0) for o in obs]
    init2 = transport_state(obs, values, runs[1])
    second = simulate(runs[1], init2, dt, t_end)
    deviations = {}
    for o in obs:
        deviations[str(o)] = relative_deviation(evaluate_along(o, first), evaluate_along(o, second))
    return {
        "basis": basis,
        "gauges": [str(fam(*ab)) for ab in pairs],
        "observables": [str(o) for o in obs],
        "initial": [dict(sorted(first.states[0].items())), dict(sorted(second.states[0].items()))],
        "max_relative_deviation": deviations,
        "max_deviation": max(deviations.values()) if deviations else 0.0,
    }, (first, second)


__all__ = [
    "Analysis",
    "LIMIT_WARNING",
    "analyze",
    "diagnose_text",
    "gauge_compare",
    "report",
    "render_text",
    "simulate",
]
