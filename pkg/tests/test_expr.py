import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circuitdca.errors import DependentConstraintSet, ExpressionError, UnboundVariable
from circuitdca.expr import (
    AffineForm,
    Expression,
    PhaseSpaceChart,
    compile_expressions,
    cos,
    poisson_bracket,
    reduce_modulo,
    sin,
)
from circuitdca.parser import parse_expression
from conftest import TWO_PAIRS, expressions, v

LOOP = PhaseSpaceChart(("x1", "x2", "x3", "X"), ("P1", "P2", "P3", "pi"))
NAMES = list(TWO_PAIRS.names)
exprs = expressions(NAMES)


def pb(a, b):
    return poisson_bracket(a, b, TWO_PAIRS)


def test_canonical_pair():
    assert poisson_bracket(v("x1"), v("P1"), LOOP) == Expression.constant(1)


def test_cancellation():
    assert poisson_bracket(v("P1") + v("P3"), v("x1") - v("x3"), LOOP).is_zero()


def test_chain_rule_on_trig():
    got = poisson_bracket(v("x3"), cos(3 * v("P3")), LOOP)
    assert got == -3 * sin(3 * v("P3"))
    assert str(got) == "-3*sin(3*P3)"


def test_trig_sign_convention():
    assert cos(-v("x") + v("y")) == cos(v("x") - v("y"))
    assert sin(-v("x")) == -sin(v("x"))


def test_trig_of_constant_rejected():
    with pytest.raises(ExpressionError):
        cos(Expression.constant(2))


def test_reduce_direct_substitution():
    got = reduce_modulo(v("P1") + v("P2") + v("P3"), [v("P2")])
    assert got == v("P1") + v("P3")


def test_reduce_on_secondary_surface():
    a = (v("x1") - v("x2")) ** 2 / 2 + (v("x2") - v("x3")) ** 2 / 4
    s = [(3 * v("x2") - v("x3") - 2 * v("x1")) / 2]
    assert reduce_modulo(a, s, ["x2"]) == (v("x1") - v("x3")) ** 2 / 6


def test_reduce_empty_surface():
    a = v("x") * cos(v("p"))
    assert reduce_modulo(a, []) is a


def test_reduce_dependent_surface():
    with pytest.raises(DependentConstraintSet):
        reduce_modulo(v("x"), [v("x") + v("y"), 2 * v("x") + 2 * v("y")])


def test_evaluate():
    assert (3 * v("x1") * v("P1")).evaluate({"x1": 2, "P1": 5}) == 30
    assert cos(3 * v("P3")).evaluate({"P3": 0}) == 1
    assert ((v("x1") - v("x3")) ** 2 / 6).evaluate({"x1": 4, "x3": 1}) == pytest.approx(1.5)


def test_evaluate_unbound():
    with pytest.raises(UnboundVariable):
        (v("x") + v("y")).evaluate({"x": 1})


def test_floats_are_rejected():
    with pytest.raises((TypeError, ExpressionError)):
        Expression.constant(0.5)


def test_printing_is_graded():
    e = v("x") + v("x") ** 2 + 1
    assert str(e) == "x^2 + x + 1"


def test_affine_round_trip():
    form = AffineForm({"x": Fraction(2), "p": Fraction(-1)}, Fraction(1, 3))
    assert form.to_expression().to_affine() == form


@given(exprs, exprs)
@settings(max_examples=50, deadline=None)
def test_antisymmetry(a, b):
    assert pb(a, b) == -pb(b, a)


@given(exprs, exprs, exprs)
@settings(max_examples=50, deadline=None)
def test_leibniz(a, b, c):
    assert pb(a, b * c) == pb(a, b) * c + b * pb(a, c)


@given(expressions(NAMES, max_terms=2), expressions(NAMES, max_terms=2), expressions(NAMES, max_terms=2))
@settings(max_examples=50, deadline=None)
def test_jacobi(a, b, c):
    assert (pb(a, pb(b, c)) + pb(b, pb(c, a)) + pb(c, pb(a, b))).is_zero()


@given(exprs)
@settings(max_examples=100, deadline=None)
def test_print_parse_round_trip(a):
    assert parse_expression(str(a)) == a


@given(exprs, st.lists(st.floats(-2, 2), min_size=4, max_size=4))
@settings(max_examples=100, deadline=None)
def test_compiled_matches_evaluate(a, point):
    env = dict(zip(NAMES, point))
    fast = compile_expressions([a], NAMES)(point)[0]
    assert fast == pytest.approx(a.evaluate(env), rel=1e-12, abs=1e-12)


@given(exprs)
@settings(max_examples=100, deadline=None)
def test_reduce_is_idempotent_and_annihilates(a):
    # fresh variables z, w keep every trig argument non-constant after substitution
    surface = [v("x") - v("z") - 2 * v("q") + 1, v("p") + v("y") - v("w")]
    order = ["x", "p"]
    once = reduce_modulo(a, surface, order)
    assert not ({"x", "p"} & once.free_symbols)
    assert reduce_modulo(once, surface, order) == once
    for s in surface:
        assert reduce_modulo(s, surface, order).is_zero()


def test_zero_trig_argument_collapses():
    e = sin(v("p") + v("y")) + cos(v("p") + v("y"))
    assert reduce_modulo(e, [v("p") + v("y")]) == Expression.constant(1)


def test_diff_of_trig():
    e = sin(2 * v("x") + v("y"))
    assert e.diff("x") == 2 * cos(2 * v("x") + v("y"))
    assert math.isclose(e.evaluate({"x": 0.1, "y": 0.2}), math.sin(0.4))
