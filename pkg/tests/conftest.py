from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import strategies as st

from circuitdca.expr import AffineForm, Expression, PhaseSpaceChart

MODELS = Path(__file__).resolve().parent.parent / "models"


def model_text(name):
    return (MODELS / f"{name}.lagr").read_text()


@pytest.fixture
def loop_text():
    return model_text("loop")


@pytest.fixture
def nc_text():
    return model_text("noncommutative")


def v(name):
    return Expression.variable(name)


small = st.fractions(min_value=-3, max_value=3, max_denominator=3)
nonzero_int = st.integers(-3, 3).filter(bool)


def affine_arg(names):
    """Non-constant affine form with small integer coefficients."""
    return st.builds(
        lambda picks, coeffs, c: AffineForm(dict(zip(picks, coeffs)), c),
        st.lists(st.sampled_from(names), min_size=1, max_size=2, unique=True),
        st.lists(nonzero_int, min_size=2, max_size=2),
        st.integers(-2, 2),
    )


def expressions(names, max_terms=3, max_degree=2, max_trig=2, trig_names=None):
    """Random expressions in the closed class: polynomials times trig factors of affine forms.

    ``trig_names`` restricts the variables allowed inside trig arguments.
    """

    def term(coef, mono, trig_part):
        e = Expression.constant(coef)
        for n, k in mono:
            e = e * v(n) ** k
        for kind, arg in trig_part:
            e = e * Expression.trig(kind, arg.to_expression())
        return e

    trig_st = st.lists(st.tuples(st.sampled_from(["sin", "cos"]), affine_arg(trig_names or names)), max_size=max_trig)
    one = st.builds(
        term,
        small,
        st.lists(st.tuples(st.sampled_from(names), st.integers(1, max_degree)), max_size=2),
        trig_st,
    )
    return st.lists(one, min_size=1, max_size=max_terms).map(lambda ts: sum(ts, Expression()))


TWO_PAIRS = PhaseSpaceChart(("x", "y"), ("p", "q"))


def rational_matrix(rows):
    return [[Fraction(x) for x in r] for r in rows]


# acceptance reporting: one line per criterion at the end of the run

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "notes": []})
    entry["ok"] = entry["ok"] and rep.passed
    for key, value in item.user_properties:
        if key == "detail":
            entry["notes"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        c = _CRITERIA[number]
        line = f"criterion {number}: {'PASS' if c['ok'] else 'FAIL'}  {c['title']}"
        tr.write_line(line)
        for note in c["notes"]:
            tr.write_line(f"    {note}")
