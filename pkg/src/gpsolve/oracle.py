"""Independent brute-force ground truth for the solver pipeline.

Nothing in this module touches the critical-point machinery: consistency is
checked by direct state-space descent, mixed feasibility by alternating
projections on the density-matrix cone, and trust-region problems by
eigendecomposition plus a one-dimensional secular equation.  Agreement between
these answers and the main pipeline is the backbone of the acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from gpsolve import quantum
from gpsolve.gpmodel import GPSystem, QuadraticMap
from gpsolve.polycore import Poly


@dataclass
class OracleReport:
    minimum: float
    argmin: np.ndarray
    method: str
    restarts_used: int

    def __post_init__(self):
        self.argmin = np.asarray(self.argmin)


def _report(objective: Callable, argmin: np.ndarray, method: str, restarts: int) -> OracleReport:
    return OracleReport(float(objective(argmin)), argmin, method, restarts)


# -- pure-state consistency ----------------------------------------------------


def _state_from_reals(x: np.ndarray, dim: int) -> np.ndarray:
    psi = x[:dim] + 1j * x[dim:]
    return psi / np.linalg.norm(psi)


def _marginal_residuals(x, entries, n):
    dim = 2**n
    psi = _state_from_reals(x, dim)
    rho = np.outer(psi, psi.conj())
    parts = []
    for qubits, target in entries:
        diff = quantum.partial_trace(rho, qubits, n) - target
        parts.append(diff.real.ravel())
        parts.append(diff.imag.ravel())
    return np.concatenate(parts)


def pure_consistency_min(inst, restarts: int = 32, seed: int = 0) -> OracleReport:
    """Minimize the summed squared Frobenius marginal error over pure states.

    ``inst`` is a frontends.MarginalInstance (or anything exposing ``n`` and
    ``entries`` as (qubit tuple, dense complex matrix) pairs).
    """
    n = inst.n
    if n > 10:
        raise ValueError("pure-state oracle is limited to 10 qubits")
    entries = [(tuple(c), np.asarray(rho, dtype=complex)) for c, rho in inst.dense_entries()]
    rng = np.random.default_rng(seed)
    dim = 2**n

    def objective(x):
        r = _marginal_residuals(x, entries, n)
        return float(r @ r)

    best_x = None
    best_val = np.inf
    for _ in range(restarts):
        x0 = rng.normal(size=2 * dim)
        res = optimize.least_squares(
            _marginal_residuals, x0, args=(entries, n), method="lm", xtol=1e-14, ftol=1e-14
        )
        val = objective(res.x)
        if val < best_val - 1e-15:
            best_val = val
            best_x = res.x
    argmin = _state_from_reals(best_x, dim)
    report = OracleReport(best_val, argmin, "pure-state multistart descent", restarts)
    return report


def mixed_consistency(
    inst, max_iters: int = 4000, tol: float = 1e-8
) -> Tuple[bool, float]:
    """Mixed-state consistency via alternating projections.

    Cycles projections onto each marginal's affine set, the trace-one
    hyperplane and the PSD cone.  Returns (feasible, final residual); feasible
    means the converged residual is at most ``tol``.
    """
    n = inst.n
    if n > 6:
        raise ValueError("mixed-state oracle is limited to 6 qubits")
    entries = [(tuple(c), np.asarray(rho, dtype=complex)) for c, rho in inst.dense_entries()]
    dim = 2**n
    rho = np.eye(dim, dtype=complex) / dim
    residual = np.inf
    for _ in range(max_iters):
        for qubits, target in entries:
            diff = target - quantum.partial_trace(rho, qubits, n)
            rho = rho + quantum.embed_operator(diff, list(qubits), n) / 2 ** (n - len(qubits))
        rho = rho + (1.0 - np.trace(rho).real) / dim * np.eye(dim)
        rho = (rho + rho.conj().T) / 2
        w, v = np.linalg.eigh(rho)
        rho = (v * np.clip(w, 0.0, None)) @ v.conj().T
        residual = _consistency_residual(rho, entries, n)
        if residual <= tol:
            return True, residual
    return False, residual


def _consistency_residual(rho, entries, n):
    total = abs(np.trace(rho).real - 1.0) ** 2
    w = np.linalg.eigvalsh(rho)
    total += float(np.clip(-w, 0.0, None).max() ** 2)
    for qubits, target in entries:
        diff = quantum.partial_trace(rho, qubits, n) - target
        total += float(np.linalg.norm(diff) ** 2)
    return float(np.sqrt(total))


# -- trust region ----------------------------------------------------------------


def trust_region_exact(
    q: np.ndarray, c: np.ndarray, radius: float = 1.0
) -> OracleReport:
    """Global minimum of x^T Q x + c^T x over the ball of the given radius.

    Eigendecomposition plus secular-equation root finding on the multiplier,
    including the hard case where c is orthogonal to the bottom eigenspace.
    """
    q = np.asarray(q, dtype=float)
    q = (q + q.T) / 2
    c = np.asarray(c, dtype=float)
    n = q.shape[0]
    d, v = np.linalg.eigh(q)
    ct = v.T @ c
    d_min = d[0]

    def x_of_lambda(lam):
        denom = 2 * (d + lam)
        xt = np.where(np.abs(denom) > 1e-300, -ct / denom, 0.0)
        return xt

    def value(x):
        return float(x @ q @ x + c @ x)

    candidates = []

    # interior stationary point (requires PSD and containment)
    if d_min >= -1e-14:
        safe = d > 1e-12
        xt = np.zeros(n)
        xt[safe] = -ct[safe] / (2 * d[safe])
        if np.all(np.abs(ct[~safe]) < 1e-12) and np.linalg.norm(xt) <= radius + 1e-12:
            candidates.append(v @ xt)

    lam_floor = max(0.0, -d_min)
    bottom = np.abs(d - d_min) < 1e-10 * max(1.0, abs(d_min))

    def norm_sq(lam):
        return float(np.sum((ct / (2 * (d + lam))) ** 2))

    hard = d_min < 0 and np.all(np.abs(ct[bottom]) < 1e-12)
    if hard:
        # multiplier pinned at -d_min; pad with bottom eigenvector to the boundary
        denom = 2 * (d - d_min)
        xt = np.where(np.abs(denom) > 1e-12, -ct / denom, 0.0)
        base_norm_sq = float(xt @ xt)
        if base_norm_sq <= radius**2 + 1e-12:
            pad = np.sqrt(max(radius**2 - base_norm_sq, 0.0))
            e = np.zeros(n)
            e[int(np.argmax(bottom))] = 1.0
            candidates.append(v @ (xt + pad * e))

    # regular boundary solution: phi(lam) = ||x(lam)||^2 - radius^2 has a root
    lo = lam_floor + 1e-14
    if norm_sq(lo) > radius**2:
        hi = lam_floor + 1.0
        while norm_sq(hi) > radius**2:
            hi *= 2
            if hi > 1e16:
                break
        lam = optimize.brentq(
            lambda t: norm_sq(t) - radius**2, lo, hi, xtol=1e-15, rtol=1e-15
        )
        candidates.append(v @ x_of_lambda(lam))

    if not candidates:
        candidates.append(np.zeros(n))
    best = min(candidates, key=value)
    return OracleReport(value(best), best, "trust-region eigendecomposition", 0)


def qcqp_penalty_min(inst, restarts: int = 60, seed: int = 0) -> OracleReport:
    """Multi-start penalty oracle for small QCQPs.

    Quadratic penalty stages with increasing weight, then an SLSQP refinement
    on the original constrained problem from each penalty solution; returns
    the best feasible point found.
    """
    n = inst.dim
    a0 = np.array([[float(v) for v in row] for row in inst.a0])
    l0 = np.array([float(v) for v in inst.lin0])
    cons = []
    for am, lin, b in inst.constraints:
        cons.append(
            (
                np.array([[float(v) for v in row] for row in am]),
                np.array([float(v) for v in lin]),
                float(b),
            )
        )

    def objective(x):
        return float(x @ a0 @ x + l0 @ x)

    def violations(x):
        return np.array([x @ a @ x + l @ x - b for a, l, b in cons])

    def penalty(x, mu):
        v = np.clip(violations(x), 0.0, None)
        return objective(x) + mu * float(v @ v)

    rng = np.random.default_rng(seed)
    best_x = None
    best_val = np.inf
    scipy_cons = [
        {
            "type": "ineq",
            "fun": (lambda x, a=a, l=l, b=b: b - x @ a @ x - l @ x),
            "jac": (lambda x, a=a, l=l: -(a + a.T) @ x - l),
        }
        for a, l, b in cons
    ]
    for _ in range(restarts):
        x = rng.normal(size=n)
        for mu in (10.0, 1e3, 1e5, 1e7):
            res = optimize.minimize(lambda z: penalty(z, mu), x, method="BFGS")
            x = res.x
        res = optimize.minimize(
            objective,
            x,
            jac=lambda z: (a0 + a0.T) @ z + l0,
            constraints=scipy_cons,
            method="SLSQP",
            options={"maxiter": 200, "ftol": 1e-14},
        )
        x = res.x
        if violations(x).max(initial=0.0) <= 1e-8:
            val = objective(x)
            if val < best_val - 1e-15:
                best_val = val
                best_x = x
    if best_x is None:
        raise RuntimeError("penalty oracle found no feasible point")
    return OracleReport(best_val, best_x, "penalty multistart + SLSQP", restarts)


# -- planted instances ------------------------------------------------------------


def plant_instance(kind: str, seed: int, size, feasible: bool = True):
    """Build an instance with a known witness (or known infeasibility).

    kind="gp": size=(n, k); returns (GPSystem, witness X* or None).
    kind="marginal": size=n qubits; returns (MarginalInstance, planted state).
    kind="qcqp": size=n; returns (QCQPInstance, oracle report by trust region).
    """
    rng = np.random.default_rng(seed)
    if kind == "gp":
        return _plant_gp(rng, size, feasible)
    if kind == "marginal":
        return _plant_marginal(rng, size)
    if kind == "qcqp":
        return _plant_qcqp(rng, size)
    raise ValueError(f"unknown instance kind {kind!r}")


def _plant_gp(rng, size, feasible: bool):
    n, k = size
    x_star = [Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 3))) for _ in range(n)]
    comps = []
    # component 0 anchors the zero set to a sphere through X*, keeping it bounded
    comps.append(([[2 if i == j else 0 for j in range(n)] for i in range(n)], None, 0))
    for _ in range(k - 1):
        h = [[0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                val = int(rng.integers(-2, 3))
                h[i][j] = val
                h[j][i] = val
        b = [int(rng.integers(-2, 3)) for _ in range(n)]
        c = int(rng.integers(-2, 3))
        comps.append((h, b, c))
    q = QuadraticMap(n, comps)
    y_star = q.eval_exact(x_star)
    parts = [Poly.variable(k, j) - Poly.const(k, y_star[j]) for j in range(k)]
    p = Poly.zero(k)
    for part in parts:
        p = p + part * part
    radius_sq = sum(v * v for v in x_star)
    bound = Fraction(2) + radius_sq  # generous: ||X*||^2 <= bound
    if feasible:
        sys = GPSystem(q, p, bound_hint=bound, residual_parts=parts)
        return sys, x_star
    sys = GPSystem(q, p * p + 1, bound_hint=bound)
    return sys, None


def _plant_marginal(rng, n):
    from gpsolve import frontends

    psi = quantum.haar_random_state(rng, n)
    rho = np.outer(psi, psi.conj())
    entries = []
    for a in range(n):
        for b in range(a + 1, n):
            marg = quantum.partial_trace(rho, [a, b], n)
            entries.append(((a, b), frontends.matrix_to_strings(marg)))
    inst = frontends.MarginalInstance(n=n, entries_raw=entries, alpha="0", beta="1/10")
    return inst, psi


def _plant_qcqp(rng, n):
    from gpsolve import frontends

    # indefinite quadratic objective forces the optimum onto the sphere
    m = rng.normal(size=(n, n))
    a0 = (m + m.T) / 2
    a0 = a0 - (np.linalg.eigvalsh(a0)[0] + 0.5) * np.eye(n)
    c = rng.normal(size=n) * 0.3
    inst = frontends.QCQPInstance.ball_constrained(a0, c, radius=1.0)
    report = trust_region_exact(a0, c, 1.0)
    return inst, report
