"""Shared builders for small random systems used across the test suite."""

import random
from fractions import Fraction

import numpy as np
import pytest

from gpsolve.polycore import Poly
from gpsolve.gpmodel import QuadraticMap, GPSystem


def random_symmetric(rng, n, lo=-3, hi=3):
    m = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            v = rng.randint(lo, hi)
            m[i][j] = v
            m[j][i] = v
    return m


def random_quadratic_map(rng, n, k):
    comps = []
    for _ in range(k):
        h = random_symmetric(rng, n)
        b = [rng.randint(-3, 3) for _ in range(n)]
        c = rng.randint(-3, 3)
        comps.append((h, b, c))
    return QuadraticMap(n, comps)


def random_outer(rng, k, degree=2, max_terms=5):
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        exp = [0] * k
        for _ in range(rng.randint(0, degree)):
            exp[rng.randrange(k)] += 1
        c = rng.randint(-4, 4)
        if c:
            terms[tuple(exp)] = terms.get(tuple(exp), 0) + c
    terms = {e: Fraction(c) for e, c in terms.items() if c}
    if not terms:
        terms = {(0,) * k: Fraction(1)}
    return Poly(k, terms)


def random_gp_system(rng, n, k, degree=2):
    return GPSystem(random_quadratic_map(rng, n, k), random_outer(rng, k, degree))


def sphere_system(n):
    """p = y0^2 with Q0 = ||X||^2 - 1: zero set is the unit sphere."""
    h = [[2 if i == j else 0 for j in range(n)] for i in range(n)]
    q = QuadraticMap(n, [(h, None, -1)])
    p = Poly.variable(1, 0) ** 2
    return GPSystem(
        q, p, bound_hint=Fraction(2), residual_parts=[Poly.variable(1, 0)]
    )
