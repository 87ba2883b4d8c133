"""Tests for the quadratic-map layer: evaluation, gradients, Phi/b assembly,
perturbations and the numerical rank check."""

import random
from fractions import Fraction

import numpy as np
import pytest

from gpsolve.polycore import Poly
from gpsolve.gpmodel import (
    GPSystem,
    QuadraticMap,
    check_general_position,
    perturbation_diagonal,
    perturbation_matrix,
)

from conftest import random_gp_system, random_quadratic_map, sphere_system


def test_sphere_eval():
    sys = sphere_system(4)
    unit = [1, 0, 0, 0]
    assert sys.eval(unit) == 0
    assert sys.eval([0, 0, 0, 0]) == 1


def test_eval_matches_composition_by_hand():
    rng = random.Random(31)
    for _ in range(10):
        sys = random_gp_system(rng, n=4, k=2)
        x = [Fraction(rng.randint(-3, 3), rng.randint(1, 3)) for _ in range(4)]
        y = sys.q.eval_exact(x)
        assert sys.eval(x) == sys.p.eval(y)


def test_eval_dimension_mismatch():
    sys = sphere_system(3)
    with pytest.raises(ValueError):
        sys.eval([1, 0])


def test_asymmetric_h_rejected():
    with pytest.raises(ValueError):
        QuadraticMap(2, [([[0, 1], [0, 0]], None, 0)])


def test_gradient_identity_map():
    # p = y0, Q0 = (1/2) X^T I X: gradient of p(Q(X)) is X itself
    n = 3
    h = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    sys = GPSystem(QuadraticMap(n, [(h, None, 0)]), Poly.variable(1, 0))
    x = [Fraction(1), Fraction(-2), Fraction(3, 2)]
    assert sys.gradient(x) == x


def test_gradient_zero_at_sphere_point():
    # (p o Q) = (||X||^2 - 1)^2 has zero gradient on the sphere
    sys = sphere_system(3)
    grad = sys.gradient([1, 0, 0])
    assert grad == [Fraction(0)] * 3


def test_gradient_matches_finite_differences():
    rng = random.Random(7)
    for _ in range(10):
        sys = random_gp_system(rng, n=4, k=2)
        x = np.array([rng.uniform(-1, 1) for _ in range(4)])
        grad = sys.gradient_float(x)
        step = 1e-5
        for i in range(4):
            e = np.zeros(4)
            e[i] = step
            fd = (sys.eval_float(x + e) - sys.eval_float(x - e)) / (2 * step)
            scale = max(1.0, abs(grad[i]))
            assert abs(fd - grad[i]) / scale < 1e-6


def test_phi_single_component():
    # k=1, p = y0^2: Phi(Y) = 2 Y0 * Hhat
    rng = random.Random(3)
    q = random_quadratic_map(rng, 4, 1)
    sys = GPSystem(q, Poly.variable(1, 0) ** 2)
    phi = sys.phi()
    assert phi.rows == 3 and phi.cols == 4
    y0 = Poly.variable(1, 0)
    for r in range(3):
        for c in range(4):
            expected = 2 * y0 * q.components[0].h.get((r + 1, c), Fraction(0))
            assert phi[r, c] == expected


def test_phi_constant_outer():
    rng = random.Random(4)
    sys = GPSystem(random_quadratic_map(rng, 3, 2), Poly.const(2, 7))
    assert all(e.is_zero() for e in sys.phi().entries)


def test_chain_rule_identity():
    # Phi(Q(X)) X - b(Q(X)) equals the gradient of p(Q(.)) on coordinates 1..N-1
    rng = random.Random(2024)
    for _ in range(8):
        n, k = rng.choice([(3, 1), (4, 2), (5, 2)])
        sys = random_gp_system(rng, n, k)
        phi = sys.phi()
        bvec = sys.b_vector()
        for _ in range(12):
            x = [Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(n)]
            y = sys.q.eval_exact(x)
            grad = sys.gradient(x)
            for row in range(n - 1):
                lhs = sum(
                    (phi[row, c].eval(y) * x[c] for c in range(n)), Fraction(0)
                ) - bvec[row].eval(y)
                assert lhs == grad[row + 1]


def test_phi_float_matches_exact():
    rng = random.Random(77)
    sys = random_gp_system(rng, 4, 2)
    y = np.array([0.3, -1.2])
    phi = sys.phi()
    num = sys.phi_float(y)
    for r in range(3):
        for c in range(4):
            assert abs(num[r, c] - phi[r, c].eval_float(y)) < 1e-12


def test_perturbation_diagonals():
    assert perturbation_diagonal(3, 2) == [1, 2, 3]
    assert perturbation_diagonal(4, 1) == [1, 1, 1, 1]
    assert perturbation_diagonal(4, 3) == [1, 4, 9, 16]
    assert np.allclose(perturbation_matrix(3, 2), np.diag([1.0, 2.0, 3.0]))


def test_perturb_symbolic():
    rng = random.Random(9)
    sys = random_gp_system(rng, 3, 2)
    mat = sys.perturb(2)
    # at eps = 0 this is H_2 itself; the eps coefficient is diag(1, 2, 3)
    h = sys.q.components[1].h
    for r in range(3):
        for c in range(3):
            entry = mat[r, c]
            assert entry.eval([Fraction(0)]) == h.get((r, c), Fraction(0))
            slope = entry.partial(0)
            expected = Fraction([1, 2, 3][r]) if r == c else Fraction(0)
            assert slope == Poly.const(1, expected)
    # symmetry is preserved for every eps
    for r in range(3):
        for c in range(3):
            assert mat[r, c] == mat[c, r]
    with pytest.raises(IndexError):
        sys.perturb(0)
    with pytest.raises(IndexError):
        sys.perturb(3)


def test_general_position_zero_h_with_perturbation():
    n = 5
    q = QuadraticMap(n, [([[0] * n for _ in range(n)], None, 0)])
    sys = GPSystem(q, Poly.variable(1, 0))
    # eps J(1) = eps I has full rank
    assert check_general_position(sys, 0.01, [1.0], n)
    assert not check_general_position(sys, 0.0, [1.0], 1)
    with pytest.raises(ValueError):
        check_general_position(sys, 0.01, [0.0], 1)


def test_general_position_random():
    rng = random.Random(123)
    npr = np.random.default_rng(123)
    for _ in range(20):
        n = rng.randint(3, 8)
        k = rng.randint(1, 3)
        sys = random_gp_system(rng, n, k)
        y = npr.normal(size=k)
        while np.all(y == 0):
            y = npr.normal(size=k)
        assert check_general_position(sys, 1e-3, y, n - k + 1)
