"""Oracle ground truth: partial traces, consistency search, trust region."""

import numpy as np
import pytest

from gpsolve import frontends, oracle, quantum


def haar(seed, n):
    return quantum.haar_random_state(np.random.default_rng(seed), n)


# -- partial-trace engine -------------------------------------------------------


def test_partial_trace_of_product():
    rng = np.random.default_rng(0)
    a = haar(1, 1)
    rho_a = np.outer(a, a.conj())
    b = haar(2, 2)
    rho_b = np.outer(b, b.conj())
    joint = np.kron(rho_a, rho_b)
    out = quantum.partial_trace(joint, [0], 3)
    assert np.abs(out - rho_a * np.trace(rho_b)).max() < 1e-12


def test_partial_trace_chaining():
    rng = np.random.default_rng(3)
    psi = haar(3, 3)
    rho = np.outer(psi, psi.conj())
    two_step = quantum.partial_trace(quantum.partial_trace(rho, [0, 1], 3), [0], 2)
    one_step = quantum.partial_trace(rho, [0], 3)
    assert np.abs(two_step - one_step).max() < 1e-12


def test_partial_trace_unitary_covariance():
    rng = np.random.default_rng(5)
    psi = haar(7, 2)
    rho = np.outer(psi, psi.conj())
    u_a = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
    u_b = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
    rotated = np.kron(u_a, u_b) @ rho @ np.kron(u_a, u_b).conj().T
    lhs = quantum.partial_trace(rotated, [0], 2)
    rhs = u_a @ quantum.partial_trace(rho, [0], 2) @ u_a.conj().T
    assert np.abs(lhs - rhs).max() < 1e-12


# -- consistency oracles ----------------------------------------------------------


def test_pure_consistency_planted():
    inst, psi = oracle.plant_instance("marginal", seed=4, size=3)
    rep = oracle.pure_consistency_min(inst, restarts=12, seed=0)
    assert rep.minimum <= 1e-10
    assert rep.restarts_used == 12


def test_pure_consistency_plus_state():
    plus = np.ones(8) / np.sqrt(8)
    rho = np.outer(plus, plus.conj())
    entries = []
    for a in range(3):
        for b in range(a + 1, 3):
            marg = quantum.partial_trace(rho, [a, b], 3)
            entries.append(((a, b), frontends.matrix_to_strings(marg)))
    inst = frontends.MarginalInstance(3, entries)
    rep = oracle.pure_consistency_min(inst, restarts=8, seed=1)
    assert rep.minimum <= 1e-12


def test_mixed_consistency_feasible_cases():
    # product state marginals are consistent
    inst, _ = oracle.plant_instance("marginal", seed=9, size=3)
    feasible, res = oracle.mixed_consistency(inst)
    assert feasible and res <= 1e-8


def test_mixed_consistency_contradictory():
    # rho_12 = |11><11| and rho_23 = |00><00| disagree on qubit 2
    one = [[["0", "0"], ["0", "0"], ["0", "0"], ["0", "0"]],
           [["0", "0"], ["0", "0"], ["0", "0"], ["0", "0"]],
           [["0", "0"], ["0", "0"], ["0", "0"], ["0", "0"]],
           [["0", "0"], ["0", "0"], ["0", "0"], ["1", "0"]]]
    zero = [[["1", "0"], ["0", "0"], ["0", "0"], ["0", "0"]],
            [["0", "0"], ["0", "0"], ["0", "0"], ["0", "0"]],
            [["0", "0"], ["0", "0"], ["0", "0"], ["0", "0"]],
            [["0", "0"], ["0", "0"], ["0", "0"], ["0", "0"]]]
    inst = frontends.MarginalInstance(3, [((0, 1), one), ((1, 2), zero)])
    feasible, res = oracle.mixed_consistency(inst, max_iters=800)
    assert not feasible
    assert res > 1e-3


def test_example2_mixed_yes_pure_no():
    rho = [[["1/3", "0"], ["0", "0"], ["0", "0"], ["0", "0"]],
           [["0", "0"], ["1/3", "0"], ["0", "0"], ["0", "0"]],
           [["0", "0"], ["0", "0"], ["1/3", "0"], ["0", "0"]],
           [["0", "0"], ["0", "0"], ["0", "0"], ["0", "0"]]]
    inst = frontends.MarginalInstance(3, [((0, 1), rho), ((0, 2), rho), ((1, 2), rho)])
    feasible, _ = oracle.mixed_consistency(inst)
    assert feasible
    rep = oracle.pure_consistency_min(inst, restarts=16, seed=0)
    assert rep.minimum > 0.5  # frozen regression value is 2/3


# -- trust region ----------------------------------------------------------------


def test_trust_region_simple_cases():
    rep = oracle.trust_region_exact(np.diag([-1.0, 1.0]), np.zeros(2), 1.0)
    assert rep.minimum == pytest.approx(-1.0, abs=1e-10)
    rep = oracle.trust_region_exact(np.eye(2), np.zeros(2), 1.0)
    assert rep.minimum == pytest.approx(0.0, abs=1e-12)
    assert np.abs(rep.argmin).max() < 1e-9


def test_trust_region_hard_case():
    q = np.diag([-1.0, -1.0, 2.0])
    c = np.array([0.0, 0.0, 1.0])
    rep = oracle.trust_region_exact(q, c, 1.0)
    # grid + polish cross-check
    rng = np.random.default_rng(0)
    best = np.inf
    for _ in range(4000):
        x = rng.normal(size=3)
        x = x / np.linalg.norm(x) * rng.uniform(0, 1) ** (1 / 3)
        best = min(best, x @ q @ x + c @ x)
    assert rep.minimum <= best + 1e-9
    assert rep.minimum == pytest.approx(best, abs=2e-3)
    # KKT with multiplier pinned at the bottom eigenvalue
    lam = 1.0
    kkt = (q + lam * np.eye(3)) @ rep.argmin + c / 2
    assert np.linalg.norm(kkt) < 1e-8
    assert np.linalg.norm(rep.argmin) == pytest.approx(1.0, abs=1e-9)


def test_trust_region_kkt_random():
    rng = np.random.default_rng(11)
    for _ in range(10):
        n = int(rng.integers(2, 6))
        m = rng.normal(size=(n, n))
        q = (m + m.T) / 2
        c = rng.normal(size=n)
        rep = oracle.trust_region_exact(q, c, 1.0)
        r = np.linalg.norm(rep.argmin)
        assert r <= 1 + 1e-9
        if r < 1 - 1e-7:
            lam = 0.0
        else:
            grad = 2 * q @ rep.argmin + c
            lam = float(-(grad @ rep.argmin) / (2 * r * r))
        assert lam >= -1e-8
        kkt = (q + lam * np.eye(n)) @ rep.argmin + c / 2
        assert np.linalg.norm(kkt) < 1e-7


def test_qcqp_penalty_on_planted_boundary():
    inst, rep_tr = oracle.plant_instance("qcqp", seed=2, size=3)
    rep = oracle.qcqp_penalty_min(inst, restarts=20, seed=2)
    assert rep.minimum == pytest.approx(rep_tr.minimum, abs=1e-6)


def test_plant_gp_exact_zero():
    sys_f, x_star = oracle.plant_instance("gp", 7, (4, 2))
    assert sys_f.eval(x_star) == 0
