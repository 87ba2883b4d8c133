"""Feasibility decisions: verdict semantics, determinism, dual-route agreement."""

import random
from fractions import Fraction

import numpy as np
import pytest

from gpsolve import backend as bk
from gpsolve import oracle, pieces
from gpsolve.gpmodel import GPSystem
from gpsolve.polycore import Poly
from gpsolve.solvers import lm_solve

from conftest import sphere_system


def test_schedule_defaults():
    s = bk.ProbeSchedule.default()
    assert len(s.levels) == 8
    assert s.levels[0] == (1e-3, 1e-1)
    assert s.levels[-1][1] == pytest.approx(1e-8)
    with pytest.raises(ValueError):
        bk.ProbeSchedule(((1e-3, 1e-1), (1e-3, 1e-1)))  # not decreasing
    with pytest.raises(ValueError):
        bk.ProbeSchedule.default(n_levels=3, zeta_min=1e-8)


def test_tolerances_validation():
    with pytest.raises(ValueError):
        bk.Tolerances(tol_feas=1e-3, tol_infeas=1e-4)
    with pytest.raises(ValueError):
        bk.Tolerances(tol_newton=-1)


def test_sphere_feasible_with_unit_witness():
    v = bk.decide_feasibility(sphere_system(3), seed=1)
    assert v.status == bk.FEASIBLE
    assert abs(np.linalg.norm(v.witness) - 1) < 1e-6
    assert v.residual <= 1e-8
    assert Fraction(v.residual_exact) <= Fraction(10**-8)


def test_always_positive_infeasible():
    sys0 = sphere_system(3)
    sys_inf = GPSystem(sys0.q, Poly.variable(1, 0) ** 2 + 1, bound_hint=2)
    v = bk.decide_feasibility(sys_inf, seed=1)
    assert v.status == bk.INFEASIBLE
    assert all(t.n_solutions == 0 for t in v.certificate_trace)


def test_unbounded_requires_waiver():
    sys0 = sphere_system(3)
    free = GPSystem(sys0.q, sys0.p)  # no bound hint
    with pytest.raises(bk.UnboundedSystemError):
        bk.decide_feasibility(free)
    v = bk.decide_feasibility(free, allow_unbounded=True, seed=1)
    assert v.status == bk.FEASIBLE  # sphere is still easily found


def test_solve_piece_at_toy_and_infeasible():
    sys0 = sphere_system(3)
    ps = pieces.PieceSystem(sys0, pieces.Piece((0, 1), (1, 2)))
    sols = bk.solve_piece_at(ps, 1e-6, 1e-4, budget=12, seed=0)
    assert sols  # Y0 = +-sqrt(zeta) solutions exist
    for z in sols:
        assert abs(z[0] ** 2 - 1e-4) < 1e-8
    sys_inf = GPSystem(sys0.q, Poly.variable(1, 0) ** 2 + 1, bound_hint=2)
    ps_inf = pieces.PieceSystem(sys_inf, pieces.Piece((0, 1), (1, 2)))
    assert bk.solve_piece_at(ps_inf, 1e-6, 1e-4, budget=12, seed=0) == []


def test_planted_agreement_and_determinism():
    for seed in (3, 4):
        sys_f, x_star = oracle.plant_instance("gp", seed, (5, 2))
        v1 = bk.decide_feasibility(sys_f, seed=seed)
        v2 = bk.decide_feasibility(sys_f, seed=seed, workers=4)
        assert v1.status == bk.FEASIBLE
        assert v2.status == bk.FEASIBLE
        assert np.array_equal(v1.witness, v2.witness)
        assert [t.best_residual for t in v1.certificate_trace] == [
            t.best_residual for t in v2.certificate_trace
        ]
        _, res = bk.direct_minimize(sys_f, budget=60, seed=seed)
        assert res <= 1e-10

        sys_i, _ = oracle.plant_instance("gp", seed, (5, 2), feasible=False)
        assert bk.decide_feasibility(sys_i, seed=seed).status == bk.INFEASIBLE
        _, res_i = bk.direct_minimize(sys_i, budget=40, seed=seed)
        assert res_i >= 1.0


def test_direct_engine_matches_piece_engine():
    sys0 = sphere_system(4)
    v_p = bk.decide_feasibility(sys0, seed=5, engine="pieces")
    v_d = bk.decide_feasibility(sys0, seed=5, engine="direct")
    assert v_p.status == v_d.status == bk.FEASIBLE


def test_feasible_points_are_deduplicated_zeros():
    sys0 = sphere_system(3)
    pts = bk.feasible_points(sys0, budget=30, seed=2)
    assert len(pts) >= 2
    for x in pts:
        assert bk.gp_residual_float(sys0, x) < 1e-16
    for i, a in enumerate(pts):
        for b in pts[i + 1 :]:
            assert np.linalg.norm(a - b) >= 1e-6


def test_exact_reverification_blocks_fake_witness():
    sys0 = sphere_system(3)
    x = np.array([1.0 + 1e-5, 0.0, 0.0])  # close but not close enough
    exact = bk.gp_residual_exact(sys0, x)
    assert exact > Fraction(10**-8)
