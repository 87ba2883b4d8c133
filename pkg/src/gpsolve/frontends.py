"""Compilers from application problems into composed quadratic systems.

Every frontend produces a GPSystem whose coefficients are exact rationals.
Matrix entries are ingested as decimal or fraction strings ("0.25", "-1/3"),
never as binary floats, so exact residual checks downstream stay meaningful.

Variable layouts are documented per compiler; quantum states always enter as
interleaved real/imaginary pairs (a_0, b_0, a_1, b_1, ...).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from gpsolve import quantum
from gpsolve.gpmodel import GPSystem, QuadraticMap
from gpsolve.polycore import Poly, _as_fraction
from gpsolve.quantum import SparseComplex

ComplexEntry = Tuple[Fraction, Fraction]


def parse_complex_matrix(raw: Sequence[Sequence[Sequence[str]]]) -> SparseComplex:
    """Parse a matrix of [re, im] string pairs into exact sparse form."""
    out: SparseComplex = {}
    for i, row in enumerate(raw):
        for j, pair in enumerate(row):
            re, im = _as_fraction(pair[0]), _as_fraction(pair[1])
            if re != 0 or im != 0:
                out[(i, j)] = (re, im)
    return out


def matrix_to_strings(m: np.ndarray, digits: int = 17) -> List[List[List[str]]]:
    """Render a dense complex matrix as [re, im] decimal strings.

    The matrix is Hermitized first so the textual form is exactly Hermitian.
    """
    m = np.asarray(m, dtype=complex)
    m = (m + m.conj().T) / 2
    out = []
    for i in range(m.shape[0]):
        row = []
        for j in range(m.shape[1]):
            if j < i:
                re, im = out[j][i]
                row.append([re, "-" + im if not im.startswith("-") else im[1:]])
                continue
            v = m[i, j]
            im_val = 0.0 if j == i else v.imag
            row.append([f"{v.real:.{digits}g}", f"{im_val:.{digits}g}"])
        out.append(row)
    return out


def _hermitian_exact(op: SparseComplex) -> bool:
    for (i, j), (re, im) in op.items():
        got = op.get((j, i), (Fraction(0), Fraction(0)))
        if got[0] != re or got[1] != -im:
            return False
    return True


def _dense(op: SparseComplex, dim: int) -> np.ndarray:
    return quantum.sparse_to_dense(op, dim)


class MalformedInstance(ValueError):
    """Raised when an instance file violates a structural invariant."""


# -- marginal instances ---------------------------------------------------------


class MarginalInstance:
    """Reduced density matrices on qubit subsets with consistency thresholds."""

    def __init__(self, n: int, entries_raw, alpha="0", beta="1/10"):
        self.n = int(n)
        self.alpha = _as_fraction(alpha)
        self.beta = _as_fraction(beta)
        if self.beta - self.alpha <= 0:
            raise MalformedInstance("thresholds must satisfy beta > alpha")
        self.entries: List[Tuple[Tuple[int, ...], SparseComplex]] = []
        for qubits, raw in entries_raw:
            qubits = tuple(int(q) for q in qubits)
            if list(qubits) != sorted(set(qubits)):
                raise MalformedInstance(f"qubit set {qubits} must be sorted and distinct")
            if any(not 0 <= q < self.n for q in qubits):
                raise MalformedInstance(f"qubit index out of range in {qubits}")
            op = raw if isinstance(raw, dict) else parse_complex_matrix(raw)
            dim = 2 ** len(qubits)
            if not _hermitian_exact(op):
                raise MalformedInstance(f"marginal on {qubits} is not Hermitian")
            dense = _dense(op, dim)
            if abs(np.trace(dense).real - 1.0) > 1e-9:
                raise MalformedInstance(f"marginal on {qubits} does not have unit trace")
            if np.linalg.eigvalsh(dense).min() < -1e-12:
                raise MalformedInstance(f"marginal on {qubits} is not PSD")
            self.entries.append((qubits, op))

    def dense_entries(self) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
        return [(q, _dense(op, 2 ** len(q))) for q, op in self.entries]


@dataclass
class Check:
    """One super-verifier constraint (V, r, s): POVM element, target, slack."""

    v: SparseComplex
    n1: int
    r: Fraction
    s_squared: Fraction

    def __post_init__(self):
        dim = 2**self.n1
        if not _hermitian_exact(self.v):
            raise MalformedInstance("check operator is not Hermitian")
        w = np.linalg.eigvalsh(_dense(self.v, dim))
        if w.min() < -1e-9 or w.max() > 1 + 1e-9:
            raise MalformedInstance("check operator spectrum leaves [0, 1]")
        if not 0 <= self.r <= 1:
            raise MalformedInstance("target probability r outside [0, 1]")
        if self.s_squared < 0:
            raise MalformedInstance("negative slack")

    def dense(self) -> np.ndarray:
        return _dense(self.v, 2**self.n1)

    def acceptance(self, psi: np.ndarray) -> float:
        return float(np.real(psi.conj() @ self.dense() @ psi))


@dataclass
class CheckSet:
    n1: int
    checks: List[Check]


def marginals_to_checks(inst: MarginalInstance, canonical: bool = False) -> CheckSet:
    """Tomography compilation: one check per (marginal, Pauli word).

    The check for word w on qubits C accepts with probability
    1/2 + <P_w>/2 where P_w is the unnormalized Pauli word, so the target is
    r = 1/2 + Tr(P_w rho)/2, which is rational for rational marginals.  The
    exact variant (alpha = 0) uses slack 0; otherwise each check receives the
    uniform slack cap alpha / 2^{|C|/2}, stored through its square.
    """
    checks: List[Check] = []
    n = inst.n
    for qubits, op in inst.entries:
        nq = len(qubits)
        for word in itertools.product(range(4), repeat=nq):
            pw = quantum.pauli_word_exact(word)
            # exact tilde_a = Tr(P_w rho); imaginary part must vanish
            re_tot, im_tot = Fraction(0), Fraction(0)
            for (i, j), (re, im) in pw.items():
                r2 = op.get((j, i))
                if r2 is None:
                    continue
                re_tot += re * r2[0] - im * r2[1]
                im_tot += re * r2[1] + im * r2[0]
            if im_tot != 0:
                raise MalformedInstance("non-real Pauli expectation; marginal not Hermitian")
            target = Fraction(1, 2) + re_tot / 2
            embedded = quantum.embed_exact(pw, qubits, n)
            v: SparseComplex = {}
            for idx in range(2**n):
                v[(idx, idx)] = (Fraction(1, 2), Fraction(0))
            for key, (re, im) in embedded.items():
                base = v.get(key, (Fraction(0), Fraction(0)))
                v[key] = (base[0] + re / 2, base[1] + im / 2)
            s_sq = inst.alpha**2 / 2**nq
            check = Check(v, n, target, s_sq)
            if canonical:
                check = canonicalize_check(check)
            checks.append(check)
    return CheckSet(n, checks)


def canonicalize_check(check: Check) -> Check:
    """Canonical form (V', 1/2, s/2) with V' = (1-r)/2 I + V/2.

    The acceptance probability then satisfies
    p(V', psi) - 1/2 = (p(V, psi) - r)/2 on unit states.
    """
    shift = (1 - check.r) / 2
    v: SparseComplex = {}
    for idx in range(2**check.n1):
        v[(idx, idx)] = (shift, Fraction(0))
    for key, (re, im) in check.v.items():
        base = v.get(key, (Fraction(0), Fraction(0)))
        v[key] = (base[0] + re / 2, base[1] + im / 2)
    return Check(v, check.n1, Fraction(1, 2), check.s_squared / 4)


def _expectation_form(
    op: SparseComplex, n_total: int, offset: int, dim: int, want_imag: bool = False
) -> Dict[Tuple[int, int], Fraction]:
    """Sparse H over interleaved real variables with (1/2) x^T H x = Re or Im <psi|op|psi>.

    The state block starts at variable ``offset`` and spans 2*dim variables.
    """
    h: Dict[Tuple[int, int], Fraction] = {}

    def add(r, c, v):
        if v == 0:
            return
        h[(r, c)] = h.get((r, c), Fraction(0)) + v

    for (i, j), (re, im) in op.items():
        ai, bi = offset + 2 * i, offset + 2 * i + 1
        aj, bj = offset + 2 * j, offset + 2 * j + 1
        if not want_imag:
            # x^T M x with M = [[R, -S], [S, R]]; H = M + M^T
            add(ai, aj, re)
            add(aj, ai, re)
            add(bi, bj, re)
            add(bj, bi, re)
            add(ai, bj, -im)
            add(bj, ai, -im)
            add(bi, aj, im)
            add(aj, bi, im)
        else:
            # M' = [[S, R], [-R, S]]; H = M' + M'^T
            add(ai, aj, im)
            add(aj, ai, im)
            add(bi, bj, im)
            add(bj, bi, im)
            add(ai, bj, re)
            add(bj, ai, re)
            add(bi, aj, -re)
            add(aj, bi, -re)
    return h


def checks_to_gp(checks: CheckSet) -> GPSystem:
    """Compile a check set into the feasibility system over state + slack variables.

    Variables: (a_1, b_1, ..., a_M, b_M, c_1, ..., c_m) with M = 2^{n1}.
    Components: Q_0 = norm^2 - 1; Q_i = <psi|V_i|psi> - r_i; Q_{m+i} = c_i.
    Outer polynomial: p = Y_0^2 + sum_j (Y_j^2 + Y_{m+j}^2 - s_j^2)^2.
    """
    m = len(checks.checks)
    dim = 2**checks.n1
    n_vars = 2 * dim + m
    comps = []
    h0 = {(i, i): Fraction(2) for i in range(2 * dim)}
    comps.append((h0, None, Fraction(-1)))
    for check in checks.checks:
        h = _expectation_form(check.v, n_vars, 0, dim)
        comps.append((h, None, -check.r))
    for i in range(m):
        comps.append(({}, {2 * dim + i: Fraction(1)}, Fraction(0)))
    q = QuadraticMap(n_vars, comps)

    k = 1 + 2 * m
    y = [Poly.variable(k, j) for j in range(k)]
    p = y[0] ** 2
    exact = all(c.s_squared == 0 for c in checks.checks)
    parts: List[Poly] = [y[0]]
    for j, check in enumerate(checks.checks, start=1):
        summand = y[j] ** 2 + y[m + j] ** 2 - Poly.const(k, check.s_squared)
        p = p + summand**2
        if exact:
            parts.append(y[j])
            parts.append(y[m + j])
        else:
            parts.append(summand)
    slack_budget = sum((c.s_squared for c in checks.checks), Fraction(0))
    return GPSystem(q, p, bound_hint=1 + slack_budget, residual_parts=parts)


def marginal_to_gp(inst: MarginalInstance, canonical: bool = False) -> GPSystem:
    return checks_to_gp(marginals_to_checks(inst, canonical=canonical))


# -- QCQP / trust region ---------------------------------------------------------


class QCQPInstance:
    """min x^T A_0 x + a_0^T x subject to x^T A_i x + a_i^T x <= b_i."""

    def __init__(self, objective, constraints, radius=None):
        a0, lin0 = objective
        self.a0 = _matrix_fractions(a0)
        self.lin0 = _vector_fractions(lin0, len(self.a0))
        self.constraints = []
        for a, lin, b in constraints:
            am = _matrix_fractions(a)
            self.constraints.append(
                (am, _vector_fractions(lin, len(am)), _as_fraction(b))
            )
        self.radius = None if radius is None else _as_fraction(radius)
        if len(self.constraints) > 4:
            import warnings

            warnings.warn(
                "QCQP with more than 4 constraints: piece enumeration grows as N^O(k)",
                stacklevel=2,
            )

    @property
    def dim(self) -> int:
        return len(self.a0)

    @property
    def m(self) -> int:
        return len(self.constraints)

    @classmethod
    def ball_constrained(cls, q, c, radius=1.0):
        """SQO form: one ball constraint ||x||^2 <= radius^2."""
        q = np.asarray(q, dtype=float)
        n = q.shape[0]
        ball = [[("1" if i == j else "0") for j in range(n)] for i in range(n)]
        rad = _as_fraction(str(radius))
        return cls(
            objective=(_floats_to_strings(q), _floats_to_strings_vec(np.asarray(c, float))),
            constraints=[(ball, ["0"] * n, rad * rad)],
            radius=rad,
        )

    def objective_value(self, x: np.ndarray) -> float:
        a0 = np.array([[float(v) for v in row] for row in self.a0])
        l0 = np.array([float(v) for v in self.lin0])
        return float(x @ a0 @ x + l0 @ x)

    def constraint_violation(self, x: np.ndarray) -> float:
        worst = 0.0
        for am, lin, b in self.constraints:
            a = np.array([[float(v) for v in row] for row in am])
            l = np.array([float(v) for v in lin])
            worst = max(worst, float(x @ a @ x + l @ x - float(b)))
        return worst


def _matrix_fractions(m) -> List[List[Fraction]]:
    return [[_as_fraction(v) for v in row] for row in m]


def _vector_fractions(v, n) -> List[Fraction]:
    if v is None:
        return [Fraction(0)] * n
    return [_as_fraction(x) for x in v]


def _floats_to_strings(m: np.ndarray) -> List[List[str]]:
    return [[f"{v:.17g}" for v in row] for row in m]


def _floats_to_strings_vec(v: np.ndarray) -> List[str]:
    return [f"{x:.17g}" for x in v]


def qcqp_to_gp(inst: QCQPInstance, level=None) -> GPSystem:
    """Compile a QCQP into an optimization system over (x, slack) variables.

    Variables: (x_1..x_n, d_1..d_m).  Component 0 is the objective form;
    component i is constraint form i; component m+i is the slack d_i.  The
    inequality x^T A_i x + a_i^T x <= b_i becomes the summand
    (Y_i + Y_{m+i}^2 - b_i)^2 of p.  A_i matrices are symmetrized at ingest,
    which leaves every quadratic form unchanged.

    With ``level`` given, returns the feasibility system with outer polynomial
    p^2 + (Y_0 - level)^2 instead of carrying an objective.
    """
    n, m = inst.dim, inst.m
    n_vars = n + m
    comps = []

    def form(am, lin):
        h = {}
        for i in range(n):
            for j in range(n):
                v = am[i][j] + am[j][i]  # symmetrized, times 2 for the 1/2 convention
                if v != 0:
                    h[(i, j)] = v
        b = {i: v for i, v in enumerate(lin) if v != 0}
        return (h, b, Fraction(0))

    comps.append(form(inst.a0, inst.lin0))
    for am, lin, b in inst.constraints:
        comps.append(form(am, lin))
    for i in range(m):
        comps.append(({}, {n + i: Fraction(1)}, Fraction(0)))
    q = QuadraticMap(n_vars, comps)

    k = 1 + 2 * m
    y = [Poly.variable(k, j) for j in range(k)]
    parts = []
    p = Poly.zero(k)
    for i, (_, _, b) in enumerate(inst.constraints, start=1):
        summand = y[i] + y[m + i] ** 2 - Poly.const(k, b)
        parts.append(summand)
        p = p + summand**2
    r = y[0]
    bound = _qcqp_bound(inst)
    if level is not None:
        theta = _as_fraction(level)
        p_level = p * p + (r - Poly.const(k, theta)) ** 2
        return GPSystem(
            q, p_level, bound_hint=bound,
            residual_parts=parts + [r - Poly.const(k, theta)],
        )
    return GPSystem(q, p, r=r, bound_hint=bound, residual_parts=parts)


def _qcqp_bound(inst: QCQPInstance) -> Optional[Fraction]:
    if inst.radius is None:
        return None
    r = inst.radius
    # slack d_i^2 = b_i - Q_i(x) is bounded by coefficient norms on the ball
    budget = r * r
    for am, lin, b in inst.constraints:
        coeff = sum(abs(v) for row in am for v in row)
        coeff += sum(abs(v) for v in lin)
        budget += abs(b) + coeff * max(Fraction(1), r * r)
    return budget + 1


def sqo_to_gp(q, c, radius=1.0) -> GPSystem:
    """Sphere-constrained quadratic optimization as a one-constraint QCQP."""
    return qcqp_to_gp(QCQPInstance.ball_constrained(q, c, radius))


# -- separable Hamiltonians --------------------------------------------------------


def sh_to_gp(terms, d: int, alpha="0") -> GPSystem:
    """Energy-threshold system for product states of k parties.

    terms[i][j] is the (possibly non-Hermitian) factor of term i on party j as
    a matrix of [re, im] strings or sparse exact form; the assembled total
    Hamiltonian must be Hermitian.  Variables are the k states (interleaved,
    2d each) followed by one slack variable.
    """
    parsed: List[List[SparseComplex]] = []
    for row in terms:
        parsed.append([op if isinstance(op, dict) else parse_complex_matrix(op) for op in row])
    m = len(parsed)
    k = len(parsed[0])
    if any(len(row) != k for row in parsed):
        raise MalformedInstance("ragged decomposition table")
    alpha = _as_fraction(alpha)

    total = None
    for row in parsed:
        term = np.array([[1.0 + 0j]])
        for op in row:
            term = np.kron(term, _dense(op, d))
        total = term if total is None else total + term
    if np.abs(total - total.conj().T).max() > 1e-9:
        raise MalformedInstance("assembled Hamiltonian is not Hermitian")

    n_vars = 2 * d * k + 1
    comps = []
    # component layout: per (i, j) a real part and, when needed, an imaginary
    # part; then the k norms; then the slack variable
    z_index: List[List[Tuple[int, Optional[int]]]] = []
    for i, row in enumerate(parsed):
        z_row = []
        for j, op in enumerate(row):
            offset = 2 * d * j
            re_idx = len(comps)
            comps.append((_expectation_form(op, n_vars, offset, d), None, Fraction(0)))
            if _hermitian_exact(op):
                z_row.append((re_idx, None))
            else:
                im_idx = len(comps)
                comps.append(
                    (_expectation_form(op, n_vars, offset, d, want_imag=True), None, Fraction(0))
                )
                z_row.append((re_idx, im_idx))
        z_index.append(z_row)
    norm_idx = []
    for j in range(k):
        offset = 2 * d * j
        h = {(offset + t, offset + t): Fraction(2) for t in range(2 * d)}
        norm_idx.append(len(comps))
        comps.append((h, None, Fraction(0)))
    slack_idx = len(comps)
    comps.append(({}, {n_vars - 1: Fraction(1)}, Fraction(0)))
    q = QuadraticMap(n_vars, comps)

    kk = len(comps)
    energy_re = Poly.zero(kk)
    for z_row in z_index:
        prod_re = Poly.const(kk, 1)
        prod_im = Poly.zero(kk)
        for re_idx, im_idx in z_row:
            zr = Poly.variable(kk, re_idx)
            zi = Poly.variable(kk, im_idx) if im_idx is not None else Poly.zero(kk)
            prod_re, prod_im = prod_re * zr - prod_im * zi, prod_re * zi + prod_im * zr
        energy_re = energy_re + prod_re
    energy_part = (
        energy_re + Poly.variable(kk, slack_idx) ** 2 - Poly.const(kk, alpha)
    )
    parts = [energy_part]
    p = energy_part**2
    for j in range(k):
        norm_part = Poly.variable(kk, norm_idx[j]) - Poly.const(kk, 1)
        parts.append(norm_part)
        p = p + norm_part**2
    # coarse slack bound from Frobenius norms of the factors
    budget = Fraction(1)
    for row in parsed:
        term_bound = Fraction(1)
        for op in row:
            fro_sq = sum(re * re + im * im for re, im in op.values())
            term_bound *= 1 + fro_sq
        budget += term_bound
    bound = Fraction(k) + abs(alpha) + budget + 1
    return GPSystem(q, p, bound_hint=bound, residual_parts=parts)


# -- fermions / bosons ---------------------------------------------------------------


class FermionInstance:
    """A two-particle reduced density matrix for pure N-representability."""

    def __init__(self, n_particles: int, modes: int, rho2, statistics: str = "fermion"):
        if statistics not in ("fermion", "boson"):
            raise MalformedInstance("statistics must be 'fermion' or 'boson'")
        self.statistics = statistics
        self.n_particles = int(n_particles)
        self.modes = int(modes)
        if self.modes != 2 * self.n_particles:
            raise MalformedInstance("expected d = 2N modes for the qubit embedding")
        rho2 = np.asarray(rho2, dtype=complex)
        expected = len(quantum.mode_pairs(self.modes, statistics == "fermion"))
        if rho2.shape != (expected, expected):
            raise MalformedInstance(
                f"2-RDM has shape {rho2.shape}, expected {(expected, expected)}"
            )
        if np.abs(rho2 - rho2.conj().T).max() > 1e-9:
            raise MalformedInstance("2-RDM is not Hermitian")
        if abs(np.trace(rho2).real - 0.5) > 1e-6:
            raise MalformedInstance("2-RDM trace must be 1/2 in this convention")
        self.rho2 = rho2


def fermion_embed(psi: np.ndarray, n: int, statistics: str = "fermion") -> np.ndarray:
    """2-RDM of the N-particle representation of an n-qubit state on 2n modes."""
    state = quantum.qubits_to_fock(np.asarray(psi, dtype=complex), n)
    return quantum.rdm2_matrix(state, 2 * n, n, statistics == "fermion")


def fermion_extract(
    rho2: np.ndarray, u: int, v: int, n: int, statistics: str = "fermion",
    cross_tol: float = 1e-10,
) -> np.ndarray:
    """Two-qubit marginal on 0-based qubits (u, v), u > v, from the 2-RDM.

    The returned 4x4 matrix uses ascending qubit order (v before u).  Entries
    of the 2-RDM outside the legal index pattern must vanish; violations above
    ``cross_tol`` raise MalformedInstance.
    """
    if not u > v >= 0:
        raise ValueError("need qubit indices u > v")
    d = 2 * n
    fermion = statistics == "fermion"
    entry = quantum.rdm2_lookup(np.asarray(rho2, dtype=complex), d, fermion)
    _assert_cross_pattern(rho2, d, n, fermion, cross_tol)
    out = np.zeros((4, 4), dtype=complex)
    scale = n * (n - 1)
    for b_i in (0, 1):
        for b_j in (0, 1):
            for b_k in (0, 1):
                for b_l in (0, 1):
                    i = 2 * u + b_i
                    j = 2 * v + b_j
                    k = 2 * u + b_k
                    l = 2 * v + b_l
                    row = 2 * b_j + b_i  # ascending qubit order: v's bit first
                    col = 2 * b_l + b_k
                    out[row, col] = scale * entry(i, j, k, l)
    return out


def _assert_cross_pattern(rho2, d, n, fermion, tol):
    pairs = quantum.mode_pairs(d, fermion)
    rho2 = np.asarray(rho2, dtype=complex)

    def legal(i, j):
        # one mode from each of two distinct qubit blocks
        if i // 2 == j // 2:
            return False
        return True

    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            ok = legal(i, j) and legal(k, l) and {i // 2, j // 2} == {k // 2, l // 2}
            if not ok and abs(rho2[a, b]) > tol:
                raise MalformedInstance(
                    f"illegal 2-RDM entry at pairs {(i, j)}, {(k, l)}: {rho2[a, b]}"
                )


def fermion_to_marginals(inst: FermionInstance) -> MarginalInstance:
    """Extract every two-qubit marginal from a legal 2-RDM."""
    n = inst.n_particles
    entries = []
    for v in range(n):
        for u in range(v + 1, n):
            marg = fermion_extract(inst.rho2, u, v, n, inst.statistics)
            entries.append(((v, u), matrix_to_strings(marg)))
    return MarginalInstance(n=n, entries_raw=entries, alpha="0", beta="1/10")


# -- unique / spectral variants ---------------------------------------------------


def unique_to_gp(inst: MarginalInstance) -> GPSystem:
    """Two-state system: psi exactly consistent, phi orthogonal to psi,
    objective = total check violation of phi.

    Variables: psi block (2M) then phi block (2M).
    """
    checks = marginals_to_checks(inst, canonical=True)
    m = len(checks.checks)
    dim = 2**checks.n1
    n_vars = 4 * dim
    comps = []
    h_norm_psi = {(i, i): Fraction(2) for i in range(2 * dim)}
    h_norm_phi = {(2 * dim + i, 2 * dim + i): Fraction(2) for i in range(2 * dim)}
    comps.append((h_norm_psi, None, Fraction(-1)))
    comps.append((h_norm_phi, None, Fraction(-1)))
    for check in checks.checks:
        comps.append((_expectation_form(check.v, n_vars, 0, dim), None, -check.r))
    for check in checks.checks:
        comps.append((_expectation_form(check.v, n_vars, 2 * dim, dim), None, -check.r))
    # sesquilinear overlap <psi|phi>: real and imaginary parts
    h_re: Dict[Tuple[int, int], Fraction] = {}
    h_im: Dict[Tuple[int, int], Fraction] = {}
    for i in range(dim):
        a1, b1 = 2 * i, 2 * i + 1
        a2, b2 = 2 * dim + 2 * i, 2 * dim + 2 * i + 1
        for r, c, v in ((a1, a2, 1), (b1, b2, 1)):
            h_re[(r, c)] = Fraction(v)
            h_re[(c, r)] = Fraction(v)
        for r, c, v in ((a1, b2, 1), (b1, a2, -1)):
            h_im[(r, c)] = Fraction(v)
            h_im[(c, r)] = Fraction(v)
    comps.append((h_re, None, Fraction(0)))
    comps.append((h_im, None, Fraction(0)))
    q = QuadraticMap(n_vars, comps)

    kk = len(comps)
    y = [Poly.variable(kk, j) for j in range(kk)]
    parts = [y[0], y[1]] + [y[2 + i] for i in range(m)] + [y[2 + 2 * m], y[3 + 2 * m]]
    p = Poly.zero(kk)
    for part in parts:
        p = p + part**2
    r = Poly.zero(kk)
    for i in range(m):
        r = r + y[2 + m + i] ** 2
    return GPSystem(q, p, r=r, bound_hint=Fraction(3), residual_parts=parts)


def spectral_to_gp(spectra, n: int) -> GPSystem:
    """Consistency with prescribed marginal spectra only.

    ``spectra`` is a list of (qubit tuple, eigenvalue list); each marginal gets
    its own eigenbasis variables with orthonormality constraints, and the
    reconstructed marginal is matched to the partial trace Pauli coefficient by
    Pauli coefficient.

    Variables: psi block (2 * 2^n) then per spectrum its eigenvector blocks.
    """
    dim = 2**n
    parsed = []
    for qubits, values in spectra:
        qubits = tuple(int(q) for q in qubits)
        lam = [_as_fraction(v) for v in values]
        if len(lam) != 2 ** len(qubits):
            raise MalformedInstance("spectrum length must be 2^|C|")
        if any(v < 0 for v in lam) or sum(lam) != 1:
            raise MalformedInstance("spectrum must be nonnegative and sum to 1")
        parsed.append((qubits, lam))

    n_vars = 2 * dim
    blocks = []  # (qubits, lam, [offset per eigenvector], local dim)
    for qubits, lam in parsed:
        ldim = 2 ** len(qubits)
        offsets = []
        for _ in range(ldim):
            offsets.append(n_vars)
            n_vars += 2 * ldim
        blocks.append((qubits, lam, offsets, ldim))

    comps = []
    parts_spec = []  # indices of components that p squares directly
    h_norm = {(i, i): Fraction(2) for i in range(2 * dim)}
    comps.append((h_norm, None, Fraction(-1)))

    def overlap_forms(off_a, off_b, ldim):
        h_re: Dict[Tuple[int, int], Fraction] = {}
        h_im: Dict[Tuple[int, int], Fraction] = {}
        for t in range(ldim):
            a1, b1 = off_a + 2 * t, off_a + 2 * t + 1
            a2, b2 = off_b + 2 * t, off_b + 2 * t + 1
            for r, c, v in ((a1, a2, 1), (b1, b2, 1)):
                h_re[(r, c)] = h_re.get((r, c), Fraction(0)) + v
                h_re[(c, r)] = h_re.get((c, r), Fraction(0)) + v
            for r, c, v in ((a1, b2, 1), (b1, a2, -1)):
                h_im[(r, c)] = h_im.get((r, c), Fraction(0)) + v
                h_im[(c, r)] = h_im.get((c, r), Fraction(0)) + v
        return h_re, h_im

    for qubits, lam, offsets, ldim in blocks:
        # orthonormality: norms and pairwise overlaps
        for t, off in enumerate(offsets):
            h = {(off + s, off + s): Fraction(2) for s in range(2 * ldim)}
            comps.append((h, None, Fraction(-1)))
        for t1 in range(ldim):
            for t2 in range(t1 + 1, ldim):
                h_re, h_im = overlap_forms(offsets[t1], offsets[t2], ldim)
                comps.append((h_re, None, Fraction(0)))
                comps.append((h_im, None, Fraction(0)))
        # Pauli-coefficient match: <psi|P_w embedded|psi> = sum_l lam_l <phi_l|P_w|phi_l>
        for word in itertools.product(range(4), repeat=len(qubits)):
            pw = quantum.pauli_word_exact(word)
            h = _expectation_form(quantum.embed_exact(pw, qubits, n), n_vars, 0, dim)
            for lam_l, off in zip(lam, offsets):
                local = _expectation_form(pw, n_vars, off, ldim)
                for key, v in local.items():
                    h[key] = h.get(key, Fraction(0)) - lam_l * v
            comps.append((h, None, Fraction(0)))

    q = QuadraticMap(n_vars, comps)
    kk = len(comps)
    parts = [Poly.variable(kk, 0) ]
    for idx in range(1, kk):
        parts.append(Poly.variable(kk, idx))
    p = Poly.zero(kk)
    for part in parts:
        p = p + part**2
    return GPSystem(q, p, bound_hint=Fraction(2 + n_vars), residual_parts=parts)
