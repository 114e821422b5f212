from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from circuitdca import linalg
from circuitdca.dirac import classify, dof_count, stabilize
from circuitdca.errors import InadmissibleGauge, UnsolvableEliminationChoice
from circuitdca.expr import Expression, PhaseSpaceChart, cos, reduce_modulo
from circuitdca.legendre import base_hamiltonian, primary_constraints
from circuitdca.parser import canonicalize, parse
from circuitdca.reduce import (
    CanonicalChart,
    build_structure,
    chart_violations,
    darboux,
    dirac_bracket,
    dirac_structure,
    eliminate,
    express_in_chart,
    gauge_fix,
    physical_observables,
    symplectic_basis,
)
from conftest import expressions, model_text, v

F = Fraction


def pipeline(name):
    sl = canonicalize(parse(model_text(name)))
    prim = primary_constraints(sl)
    H = base_hamiltonian(sl, prim)
    cl = classify(stabilize(H, prim, sl.chart))
    return H, cl


LOOP_H, LOOP = pipeline("loop")
NC_H, NC = pipeline("noncommutative")
NC_D = dirac_structure(NC)
LOOP_D = dirac_structure(LOOP)


def loop_gauge(a, b):
    return gauge_fix(LOOP_D, LOOP.fccs, [a * v("x1") + b * v("x3")])


def db(a, b, D):
    return dirac_bracket(v(a), v(b), D)


@pytest.mark.parametrize(
    "a,b,value",
    [("x1", "x2", F(1, 3)), ("x1", "x3", 0), ("x1", "X", F(2, 3)),
     ("x2", "x3", F(-1, 3)), ("x2", "X", F(-1, 3)), ("x3", "X", F(5, 3))],
)
def test_noncommutative_brackets(a, b, value):
    assert db(a, b, NC_D) == Expression.constant(value)


def test_gauge_family_brackets():
    D = loop_gauge(2, 3)
    got = [db("x1", "P1", D), db("x1", "P3", D), db("x3", "P3", D), db("x3", "P1", D)]
    assert got == [Expression.constant(x) for x in (F(3, 5), F(-3, 5), F(2, 5), F(-2, 5))]


def test_elimination_keeps_node_fluxes():
    D = dirac_structure(LOOP, ["x1", "x3", "P3", "P1"])
    H, solved = eliminate(LOOP_H, D)
    assert H == -5 * cos(3 * v("P3")) + (v("x1") - v("x3")) ** 2 / 6
    assert set(solved) == {"x2", "X", "P2", "pi"}


def test_default_keep_matches_node_flux_choice():
    assert set(LOOP_D.keep) == {"x1", "x3", "P1", "P3"}


def test_elimination_without_constraints():
    sl = canonicalize(parse(model_text("oscillator")))
    H = base_hamiltonian(sl)
    cl = classify(stabilize(H, [], sl.chart))
    D = dirac_structure(cl)
    assert eliminate(H, D) == (H, {})


def test_unsolvable_keep_reports_alternative():
    with pytest.raises(UnsolvableEliminationChoice) as info:
        dirac_structure(LOOP, ["P2", "pi", "x1", "x3"])
    assert "valid keep set" in str(info.value)


def test_gauge_x1():
    D = loop_gauge(1, 0)
    H, _ = eliminate(LOOP_H, D)
    assert H == -5 * cos(3 * v("P3")) + v("x3") ** 2 / 6
    assert len(D.scc) == 6


def test_first_class_constraint_is_not_a_gauge():
    with pytest.raises(InadmissibleGauge):
        gauge_fix(LOOP_D, LOOP.fccs, [v("P1") + v("P2") + v("P3")])


def test_gauge_count_must_match():
    with pytest.raises(InadmissibleGauge):
        gauge_fix(LOOP_D, LOOP.fccs, [])


def test_published_chart_is_canonical():
    chart = CanonicalChart(pairs=(
        (v("x3") - v("x1"), v("X")),
        (v("x2") + v("x1") / 2, -5 * v("x1") + 2 * v("x3")),
    ))
    assert chart_violations(chart, NC_D) == []


def test_own_darboux_chart():
    chart = darboux(NC_D)
    assert len(chart.pairs) == 2 and chart.casimirs == ()
    assert chart_violations(chart, NC_D) == []


def test_darboux_identity_and_null_cases():
    pairs, cas = symplectic_basis([[F(0), F(1)], [F(-1), F(0)]])
    assert pairs == [([1, 0], [0, 1])] and cas == []
    pairs, cas = symplectic_basis([[F(0)] * 3 for _ in range(3)])
    assert pairs == [] and len(cas) == 3


def test_darboux_puts_scale_into_momentum():
    chart = darboux(loop_gauge(2, 3))
    assert chart.pairs == ((v("x3"), F(5, 2) * v("P3")),)


@pytest.mark.parametrize("D", [NC_D, loop_gauge(2, 3), loop_gauge(1, 1)], ids=["nc", "g23", "g11"])
def test_chart_size_matches_dof(D):
    om = [list(r) for r in D.omega]
    rank = linalg.rank(om, len(om))
    chart = darboux(D)
    assert 2 * len(chart.pairs) == rank
    assert len(chart.casimirs) == len(D.keep) - rank


def test_omega_rank_is_phase_dof():
    assert linalg.rank([list(r) for r in NC_D.omega]) == dof_count(NC)[0]
    D = loop_gauge(2, 3)
    assert linalg.rank([list(r) for r in D.omega]) == dof_count(LOOP)[0]


def test_limit_hamiltonian_in_chart():
    """Chart form against direct numeric substitution of the chart map."""
    H, cl = pipeline("noncommutative_limit")
    D = dirac_structure(cl)
    lam, L1, L2, E, k = 2, 1, 2, 5, 3
    chart = CanonicalChart(pairs=((v("x3") - v("x1"), v("X")), (v("x2"), lam * v("x3"))))
    assert chart_violations(chart, D) == []
    reduced, _ = eliminate(H, D)
    Hc = express_in_chart(reduced, chart, D)
    Q1, P1, Q2, P2 = v("Q1"), v("P1"), v("Q2"), v("P2")
    want = (
        -E * cos(k * P1)
        + (lam * (Q1 + Q2) - P2) ** 2 / (2 * L1 * lam**2)
        + (lam * Q2 - P2) ** 2 / (2 * L2 * lam**2)
    )
    assert Hc == want
    rng = np.random.default_rng(7)
    for _ in range(20):
        s = dict(zip(D.keep, rng.normal(size=len(D.keep))))
        full = {**s, **{n: e.evaluate(s) for n, e in D.solved.items()}}
        q = {"Q1": full["x3"] - full["x1"], "P1": full["X"], "Q2": full["x2"], "P2": lam * full["x3"]}
        assert want.evaluate(q) == pytest.approx(reduced.evaluate(s), abs=1e-12)


def test_solved_satisfy_constraints():
    for D in (NC_D, LOOP_D, loop_gauge(2, 3)):
        for c in D.scc:
            assert c.body.subs(D.solved).is_zero()


def test_observables_are_gauge_invariant():
    obs = physical_observables(LOOP)
    assert len(obs) == dof_count(LOOP)[0]
    for o in obs:
        for f in LOOP.fccs:
            assert dirac_bracket(o, f.body, build_structure(LOOP.chart, ())).is_zero()


ALL = list(NC.chart.names)
# trig arguments stay in the kept variables so no argument collapses to a constant
nc_exprs = expressions(ALL, max_terms=2, trig_names=list(NC_D.keep))


@given(nc_exprs, nc_exprs)
@settings(max_examples=50, deadline=None)
def test_db_antisymmetry(a, b):
    assert dirac_bracket(a, b, NC_D) == -dirac_bracket(b, a, NC_D)


@given(nc_exprs, nc_exprs, nc_exprs)
@settings(max_examples=50, deadline=None)
def test_db_leibniz(a, b, c):
    lhs = dirac_bracket(a, b * c, NC_D)
    rhs = reduce_modulo(dirac_bracket(a, b, NC_D) * c + b * dirac_bracket(a, c, NC_D), NC_D.surface, NC_D.order)
    assert lhs == rhs


@given(nc_exprs, nc_exprs, nc_exprs)
@settings(max_examples=50, deadline=None)
def test_db_jacobi(a, b, c):
    def d(x, y):
        return dirac_bracket(x, y, NC_D)

    assert (d(a, d(b, c)) + d(b, d(c, a)) + d(c, d(a, b))).is_zero()


@given(nc_exprs)
@settings(max_examples=50, deadline=None)
def test_db_annihilates_second_class(a):
    for chi in NC_D.scc:
        assert dirac_bracket(a, chi.body, NC_D).is_zero()
