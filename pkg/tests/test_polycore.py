"""Exactness tests for the polynomial core, anchored to a cofactor oracle."""

import random
from fractions import Fraction

import pytest

from gpsolve.polycore import Poly, PolyMatrix, polymat_det


def x(i, nvars=2):
    return Poly.variable(nvars, i)


def random_poly(rng, nvars, degree, max_terms=6, coeff_range=9):
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        exp = [0] * nvars
        budget = rng.randint(0, degree)
        for _ in range(budget):
            exp[rng.randrange(nvars)] += 1
        c = rng.randint(-coeff_range, coeff_range)
        if c:
            terms[tuple(exp)] = terms.get(tuple(exp), 0) + c
    return Poly(nvars, {e: Fraction(c) for e, c in terms.items() if c})


def cofactor_det(m: PolyMatrix) -> Poly:
    """Independent determinant oracle: Laplace expansion along the first row."""
    n = m.rows
    if n == 0:
        return Poly.const(m.nvars, 1)
    if n == 1:
        return m[0, 0]
    total = Poly.zero(m.nvars)
    rest = list(range(1, n))
    for j in range(n):
        cols = [c for c in range(n) if c != j]
        minor = cofactor_det(m.submatrix(rest, cols))
        term = m[0, j] * minor
        total = total + term if j % 2 == 0 else total - term
    return total


def test_difference_of_squares():
    p = (x(0) + 1) * (x(0) - 1)
    assert p == x(0) * x(0) - 1


def test_add_zero_identity():
    p = random_poly(random.Random(7), 2, 3)
    assert p + Poly.zero(2) == p


def test_binomial_square():
    p = (x(0) + x(1)) ** 2
    expected = x(0) ** 2 + 2 * x(0) * x(1) + x(1) ** 2
    assert p == expected


def test_eval_exact():
    p = x(0, 1) ** 2 - 1
    assert p.eval([3]) == 8
    assert Poly.zero(3).eval([1, 2, 3]) == 0
    q = (x(0) + x(1)) ** 2
    assert q.eval([1, 2]) == 9


def test_eval_variable_count_mismatch():
    with pytest.raises(ValueError):
        x(0, 2).eval([1])
    with pytest.raises(ValueError):
        (x(0, 2) + x(1, 3).pad(2, 0))  # incompatible nvars cannot even be built


def test_partial_derivatives():
    p = x(0) ** 2 + x(1) ** 3
    assert p.partial(1) == 3 * x(1) ** 2
    assert Poly.const(2, 5).partial(0) == Poly.zero(2)
    assert (x(0) * x(1)).partial(0) == x(1)
    with pytest.raises(IndexError):
        p.partial(2)


def test_ring_axioms_random():
    rng = random.Random(20240811)
    for _ in range(25):
        a = random_poly(rng, 3, 3)
        b = random_poly(rng, 3, 3)
        c = random_poly(rng, 3, 3)
        assert (a + b) + c == a + (b + c)
        assert a * (b + c) == a * b + a * c
        assert a * b == b * a


def test_evaluation_homomorphism():
    rng = random.Random(99)
    for _ in range(25):
        a = random_poly(rng, 2, 3)
        b = random_poly(rng, 2, 3)
        pt = [Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(2)]
        assert (a * b).eval(pt) == a.eval(pt) * b.eval(pt)
        assert (a + b).eval(pt) == a.eval(pt) + b.eval(pt)


def test_eval_float_matches_exact():
    rng = random.Random(5)
    p = random_poly(rng, 3, 4)
    pt = [0.5, -1.25, 2.0]
    exact = float(p.eval([Fraction(v) for v in pt]))
    assert abs(p.eval_float(pt) - exact) < 1e-12


def test_compose():
    # p(y0, y1) = y0^2 + y1 with y0 = x0 + x1, y1 = x0*x1
    p = x(0) ** 2 + x(1)
    q = p.compose([x(0) + x(1), x(0) * x(1)])
    expected = (x(0) + x(1)) ** 2 + x(0) * x(1)
    assert q == expected


def test_substitute_values():
    p = x(0) ** 2 * x(1) + 3 * x(1)
    q = p.substitute_values({0: Fraction(2)})
    assert q == 7 * x(1)


def test_format_deterministic():
    p = x(0) ** 2 - x(1) + Poly.const(2, 1)
    assert p.format(["a", "b"]) == "a^2 - b + 1"


def test_submatrix_basics():
    entries = [Poly.const(1, (i * 3 + j)) for i in range(3) for j in range(3)]
    m = PolyMatrix(3, 3, entries)
    block = m.submatrix([0, 1], [1, 2])
    assert block.rows == 2 and block.cols == 2
    assert block[0, 0] == Poly.const(1, 1)
    assert block[1, 1] == Poly.const(1, 5)
    full = m.submatrix([0, 1, 2], [0, 1, 2])
    assert all(full[i, j] == m[i, j] for i in range(3) for j in range(3))
    empty = m.submatrix([], [])
    assert polymat_det(empty) == Poly.const(1, 1)
    with pytest.raises(IndexError):
        m.submatrix([0, 3], [0, 1])
    with pytest.raises(ValueError):
        m.submatrix([1, 0], [0, 1])


def test_det_2x2_symbolic():
    m = PolyMatrix(2, 2, [x(0, 1), Poly.const(1, 1), Poly.const(1, 1), x(0, 1)])
    assert polymat_det(m) == x(0, 1) ** 2 - 1


def test_det_identity():
    one = Poly.const(1, 1)
    zero = Poly.zero(1)
    m = PolyMatrix(3, 3, [one, zero, zero, zero, one, zero, zero, zero, one])
    assert polymat_det(m) == one


def test_det_non_square_rejected():
    m = PolyMatrix(2, 3, [Poly.const(1, 1)] * 6)
    with pytest.raises(ValueError):
        polymat_det(m)


def test_det_matches_cofactor_expansion():
    rng = random.Random(4242)
    for trial in range(12):
        n = rng.randint(2, 4)
        nvars = rng.randint(1, 2)
        entries = [random_poly(rng, nvars, 2, max_terms=3) for _ in range(n * n)]
        m = PolyMatrix(n, n, entries)
        assert polymat_det(m) == cofactor_det(m)


def test_det_equal_rows_is_zero():
    rng = random.Random(11)
    row = [random_poly(rng, 2, 2) for _ in range(3)]
    other = [random_poly(rng, 2, 2) for _ in range(3)]
    m = PolyMatrix(3, 3, row + other + row)
    assert polymat_det(m).is_zero()


def test_det_ignores_unused_variables():
    # entries live in a 4-variable space but only touch variable 1
    p = Poly.variable(4, 1)
    one = Poly.const(4, 1)
    m = PolyMatrix(2, 2, [p, one, one, p])
    assert polymat_det(m) == p * p - 1
