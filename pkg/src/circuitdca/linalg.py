"""Exact linear algebra over the rationals.

Matrices are lists of rows of :class:`fractions.Fraction`. Everything here is
exact; there is no pivot tolerance anywhere.
"""

from fractions import Fraction

from .errors import SingularMatrixError


def to_fractions(rows):
    return [[Fraction(x) for x in row] for row in rows]


def zeros(n, m=None):
    m = n if m is None else m
    return [[Fraction(0)] * m for _ in range(n)]


def identity(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def transpose(rows, ncols=None):
    if not rows:
        return [[] for _ in range(ncols or 0)]
    return [list(col) for col in zip(*rows)]


def matmul(a, b):
    bt = transpose(b)
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def matvec(a, v):
    return [sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in a]


def submatrix(rows, row_idx, col_idx):
    return [[rows[i][j] for j in col_idx] for i in row_idx]


def is_zero(rows):
    return all(x == 0 for row in rows for x in row)


def rref(rows, ncols=None):
    """Reduced row echelon form by Gauss-Jordan elimination.

    Returns ``(R, pivots)`` where ``R`` holds only the nonzero rows and
    ``pivots[i]`` is the pivot column of row ``i``.
    """
    a = [list(map(Fraction, row)) for row in rows]
    if ncols is None:
        ncols = len(a[0]) if a else 0
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    return a[:r], pivots


def bareiss_det(rows):
    """Determinant by fraction-free (Bareiss) elimination."""
    n = len(rows)
    if n == 0:
        return Fraction(1)
    # scale to integers so every intermediate division is exact in Z
    from math import lcm

    den = 1
    for row in rows:
        for x in row:
            den = lcm(den, Fraction(x).denominator)
    a = [[int(Fraction(x) * den) for x in row] for row in rows]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return Fraction(0)
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return Fraction(sign * a[n - 1][n - 1], den**n)


def rank(rows, ncols=None):
    return len(rref(rows, ncols)[1])


def nullspace(rows, ncols=None):
    """Basis of ``{v : A v = 0}``, one vector per free column."""
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    r, pivots = rref(rows, ncols)
    basis = []
    for free in range(ncols):
        if free in pivots:
            continue
        v = [Fraction(0)] * ncols
        v[free] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -r[i][free]
        basis.append(v)
    return basis


def left_nullspace(rows, nrows=None):
    """Basis of ``{v : v^T A = 0}`` in reduced row echelon form."""
    if nrows is None:
        nrows = len(rows)
    basis = nullspace(transpose(rows, nrows), nrows) if rows else [
        [Fraction(int(i == j)) for j in range(nrows)] for i in range(nrows)
    ]
    return rref(basis, nrows)[0] if basis else []


def inverse(rows):
    n = len(rows)
    aug = [list(map(Fraction, row)) + e for row, e in zip(rows, identity(n))]
    r, pivots = rref(aug, 2 * n)
    if len(pivots) < n or pivots[n - 1] != n - 1:
        raise SingularMatrixError(f"{n}x{n} matrix is singular")
    return [row[n:] for row in r]


def solve(rows, rhs):
    """Unique solution of a square system; raises on singular input."""
    inv = inverse(rows)
    return matvec(inv, rhs)


def independent_rows(rows, ncols=None):
    """Indices of the greedy (lowest-index-first) maximal independent row set."""
    chosen = []
    basis = []
    current = 0
    for i, row in enumerate(rows):
        trial = basis + [row]
        rk = rank(trial, ncols)
        if rk > current:
            chosen.append(i)
            basis = trial
            current = rk
    return chosen
