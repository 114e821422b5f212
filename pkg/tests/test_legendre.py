from fractions import Fraction

import numpy as np
import pytest

from circuitdca.expr import cos
from circuitdca.legendre import base_hamiltonian, generalized_inverse, momenta, primary_constraints
from circuitdca.parser import canonicalize, parse
from circuitdca import linalg
from conftest import model_text, v


def sl_of(name):
    return canonicalize(parse(model_text(name)))


def test_loop_momenta():
    p = dict(momenta(sl_of("loop")))
    assert p == {"P1": -v("X"), "P2": 0 * v("X"), "P3": v("X"), "pi": 0 * v("X")}


def test_noncommutative_momenta():
    p = dict(momenta(sl_of("noncommutative")))
    assert p["P1"] == -v("X") + v("x3") + 5 * v("x2")
    assert p["P2"] == 2 * v("x3")


def test_oscillator_momentum():
    assert dict(momenta(sl_of("oscillator"))) == {"p": v("d(x)")}


def test_loop_primaries_span_the_textbook_set():
    prim = [c.body for c in primary_constraints(sl_of("loop"))]
    assert prim == [v("P1") + v("X"), v("P2"), v("P3") - v("X"), v("pi")]


def test_noncommutative_primaries():
    prim = [c.body for c in primary_constraints(sl_of("noncommutative"))]
    textbook = [
        v("P1") + v("P3") - v("x3") - 5 * v("x2"),
        v("P2") - 2 * v("x3"),
        v("P3") - v("X"),
        v("pi"),
    ]
    names = ["x1", "x2", "x3", "X", "P1", "P2", "P3", "pi"]

    def row(e):
        f = e.to_affine()
        return [f.coefficient(n) for n in names] + [f.const]

    ours = [row(e) for e in prim]
    assert linalg.rank(ours) == linalg.rank(ours + [row(e) for e in textbook]) == 4


def test_nonsingular_has_no_primaries():
    assert primary_constraints(sl_of("oscillator")) == []


def test_loop_hamiltonian_uses_momentum_in_josephson_term():
    H = base_hamiltonian(sl_of("loop"))
    assert H == -5 * cos(3 * v("P3")) + (v("x1") - v("x2")) ** 2 / 2 + (v("x2") - v("x3")) ** 2 / 4


def test_oscillator_hamiltonian():
    assert base_hamiltonian(sl_of("oscillator")) == (v("p") ** 2 + v("x") ** 2) / 2


def test_generalized_inverse_identity():
    M = linalg.to_fractions([[2, 2, 0], [2, 2, 0], [0, 0, 3]])
    G = generalized_inverse(M)
    assert linalg.matmul(linalg.matmul(M, G), M) == M


def test_hamiltonian_is_blind_to_null_velocities():
    # L = 1/2 (d(a) + d(b))^2 - a^2 : the combination d(a) - d(b) is pure gauge
    sl = canonicalize(parse("var a b\nlagrangian: 1/2*(d(a) + d(b))^2 - a^2"))
    prim = primary_constraints(sl)
    assert len(prim) == 1
    H = base_hamiltonian(sl, prim)
    # p.qd - L on the surface p_a = p_b = d(a) + d(b), for arbitrary split of velocities
    for s, t in [(0.3, 1.1), (-2.0, 0.5)]:
        pa = s + t
        pdq = pa * (s + t)
        L = 0.5 * (s + t) ** 2 - 0.7**2
        assert H.evaluate({"a": 0.7, "b": 0.0, "p_a": pa, "p_b": pa}) == pytest.approx(pdq - L)
