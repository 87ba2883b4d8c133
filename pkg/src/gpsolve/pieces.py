"""Critical-point reduction: enumerate (U, W) pieces and generate, for each,
the equation system over (Y, T, eps, zeta) describing the image of the piece
under the projection phi_W: X -> (Q(X), X_Wbar).

Index conventions: U holds 0-based row indices into the hatted matrix Phi,
whose row i corresponds to gradient coordinate i+1 (coordinate 0 is the
projection direction and carries no constraint).  W holds 0-based variable
indices.  Display helpers translate to the 1-based convention of the
literature, where U is a subset of {2..N} and W of {1..N}.

Two faces of the same system:

* the symbolic face (``equalities`` / ``omega`` / ``inverse_map``) carries the
  paper-shaped polynomials, cleared of denominators by the prescribed powers
  of Omega = det Phi_UW; it is built on demand and only affordable at desk
  scale;
* the numeric face (``residuals`` / ``jacobian``) evaluates the equivalent
  normalized residuals with linear solves instead of adjugates and is what the
  backend's local solver consumes.  Within the guard |Omega| >= omega_min the
  two faces have identical zero sets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from gpsolve.gpmodel import GPSystem
from gpsolve.polycore import Poly, PolyMatrix, polymat_det


class SingularPieceError(ValueError):
    """Raised when applying the piece inverse at a point with Omega ~ 0."""


@dataclass(frozen=True)
class Piece:
    rows: Tuple[int, ...]  # U, indices into Phi rows (0..N-2)
    cols: Tuple[int, ...]  # W, variable indices (0..N-1)

    def __post_init__(self):
        if list(self.rows) != sorted(set(self.rows)) or list(self.cols) != sorted(
            set(self.cols)
        ):
            raise ValueError("piece index sets must be sorted and distinct")
        if len(self.rows) != len(self.cols):
            raise ValueError("piece needs |U| = |W|")

    @property
    def size(self) -> int:
        return len(self.rows)

    def rows_paper(self) -> Tuple[int, ...]:
        return tuple(u + 2 for u in self.rows)

    def cols_paper(self) -> Tuple[int, ...]:
        return tuple(w + 1 for w in self.cols)

    def __str__(self):
        return f"U={{{','.join(map(str, self.rows_paper()))}}} W={{{','.join(map(str, self.cols_paper()))}}}"


def default_rank(n: int, k: int) -> int:
    """Default minimum piece size N-k+1, clamped into the meaningful range.

    The clamp matters at the boundaries: for k = 1 the hatted matrices cannot
    exceed rank N-1, and for k >= N the bound degenerates below 1.
    """
    return min(max(n - k + 1, 1), n - 1)


def enumerate_pieces(n: int, k: Optional[int] = None, rank: Optional[int] = None) -> Iterator[Piece]:
    """Yield every piece with rank <= |U| = |W| <= N-1 in deterministic order
    (size ascending, then lexicographic in U, then in W)."""
    if rank is None:
        if k is None:
            raise ValueError("need k to derive the default rank")
        rank = default_rank(n, k)
    if rank < 1:
        raise ValueError(f"rank {rank} out of range")
    for s in range(rank, n):
        for rows in itertools.combinations(range(n - 1), s):
            for cols in itertools.combinations(range(n), s):
                yield Piece(rows, cols)


def piece_count(n: int, k: Optional[int] = None, rank: Optional[int] = None) -> int:
    """Closed form: sum over s of C(N-1, s) * C(N, s)."""
    if rank is None:
        rank = default_rank(n, k)
    if rank < 1:
        raise ValueError(f"rank {rank} out of range")
    return sum(
        math.comb(n - 1, s) * math.comb(n, s) for s in range(rank, n)
    )


@dataclass
class InverseMap:
    """phi_UW^{-1} as numerators over the shared denominator Omega.

    X_W = numerators / Omega evaluated at (Y, T, eps, zeta); X_Wbar = T.
    """

    numerators: List[Poly]
    omega: Poly
    cols: Tuple[int, ...]
    cols_rest: Tuple[int, ...]


class PieceSystem:
    """The generated equation system of one piece for one GP system.

    Symbolic variables are ordered (Y_1..Y_k, T_1..T_{N-|W|}, eps, zeta).
    """

    def __init__(self, sys: GPSystem, piece: Piece, perturbed: bool = True):
        n, k = sys.n, sys.k
        if any(not 0 <= u < n - 1 for u in piece.rows):
            raise ValueError("piece row indices out of range")
        if any(not 0 <= w < n for w in piece.cols):
            raise ValueError("piece column indices out of range")
        self.sys = sys
        self.piece = piece
        self.perturbed = perturbed
        self.k = k
        self.n = n
        self.cols_rest = tuple(w for w in range(n) if w not in piece.cols)
        self.rows_rest = tuple(u for u in range(n - 1) if u not in piece.rows)
        self.nt = len(self.cols_rest)
        self.nv = k + self.nt + 2  # Y, T, eps, zeta
        self.eps_index = k + self.nt
        self.zeta_index = k + self.nt + 1
        self._symbolic = None
        self._super_rows, self._super_cols = self._superset_index_arrays()

    # -- plumbing ---------------------------------------------------------------

    def var_names(self) -> List[str]:
        return (
            [f"Y{j+1}" for j in range(self.k)]
            + [f"T{i+1}" for i in range(self.nt)]
            + ["eps", "zeta"]
        )

    def _superset_index_arrays(self):
        rows_sup = []
        cols_sup = []
        s = self.piece.size
        if s >= self.n - 1:
            return np.zeros((0, s + 1), dtype=int), np.zeros((0, s + 1), dtype=int)
        for u2 in self.rows_rest:
            for w2 in self.cols_rest:
                rows_sup.append(sorted(self.piece.rows + (u2,)))
                cols_sup.append(sorted(self.piece.cols + (w2,)))
        return np.array(rows_sup, dtype=int), np.array(cols_sup, dtype=int)

    @property
    def n_residuals(self) -> int:
        s = self.piece.size
        return 1 + self.k + (self.n - 1 - s) + self._super_rows.shape[0]

    # -- numeric face -------------------------------------------------------------

    def _phi_b(self, y: np.ndarray, eps: float):
        phi = self.sys.phi_float(y, eps=eps)
        b = self.sys.b_float(y)
        return phi, b

    def residuals(self, z: np.ndarray, eps: float, zeta: float) -> np.ndarray:
        """Normalized residual vector at a (batch, k+nt) array of unknowns
        z = (Y, T).  Lanes with numerically singular Phi_UW get residual 1e6."""
        z = np.asarray(z, dtype=float)
        squeeze = z.ndim == 1
        z = z.reshape(-1, self.k + self.nt)
        y = z[:, : self.k]
        t = z[:, self.k :]
        rows = np.array(self.piece.rows, dtype=int)
        cols = np.array(self.piece.cols, dtype=int)
        phi, b = self._phi_b(y, eps)
        psi = phi[:, rows[:, None], cols[None, :]]
        dets = np.linalg.det(psi)
        bad = ~np.isfinite(dets) | (np.abs(dets) < 1e-300)
        psi_safe = psi + bad[:, None, None] * np.eye(len(rows))
        b_u = b[:, rows]
        phi_u_rest = phi[:, rows[:, None], np.array(self.cols_rest)[None, :]]
        rhs = b_u - np.einsum("bij,bj->bi", phi_u_rest, t)
        x_w = np.linalg.solve(psi_safe, rhs[..., None])[..., 0]
        x = np.zeros((z.shape[0], self.n))
        x[:, cols] = x_w
        x[:, np.array(self.cols_rest)] = t
        q_val = self.sys.q.eval_float(x, eps=eps if self.perturbed else 0.0)

        blocks = [np.asarray(self.sys.p.eval_float(y)).reshape(-1, 1) - zeta]
        blocks.append(y - q_val)
        # gradient consistency on the rows outside U
        if self.rows_rest:
            rr = np.array(self.rows_rest, dtype=int)
            v = np.linalg.solve(psi_safe, b_u[..., None])[..., 0]
            phi_rest_w = phi[:, rr[:, None], cols[None, :]]
            blocks.append(b[:, rr] - np.einsum("bij,bj->bi", phi_rest_w, v))
        if self._super_rows.shape[0]:
            sup = phi[:, self._super_rows[:, :, None], self._super_cols[:, None, :]]
            blocks.append(np.linalg.det(sup))
        out = np.concatenate(blocks, axis=1)
        out = np.where(bad[:, None], 1e6, out)
        return out[0] if squeeze else out

    def omega_values(self, z: np.ndarray, eps: float) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        y = z[..., : self.k]
        rows = np.array(self.piece.rows, dtype=int)
        cols = np.array(self.piece.cols, dtype=int)
        phi = self.sys.phi_float(y, eps=eps)
        psi = phi[..., rows[:, None], cols[None, :]]
        return np.linalg.det(psi)

    def apply_inverse(self, y, t, eps: float, omega_min: float = 1e-300) -> np.ndarray:
        """Map a numeric (Y, T) point back to X; explicit error when singular."""
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        rows = np.array(self.piece.rows, dtype=int)
        cols = np.array(self.piece.cols, dtype=int)
        phi, b = self._phi_b(y, eps)
        psi = phi[rows[:, None], cols[None, :]]
        det = float(np.linalg.det(psi))
        if not np.isfinite(det) or abs(det) <= omega_min:
            raise SingularPieceError(
                f"Omega = {det} at this point; the piece inverse is undefined"
            )
        rhs = b[rows]
        if self.nt:
            rhs = rhs - phi[rows[:, None], np.array(self.cols_rest)[None, :]] @ t
        x = np.zeros(self.n)
        x[cols] = np.linalg.solve(psi, rhs)
        if self.nt:
            x[np.array(self.cols_rest)] = t
        return x

    def forward(self, x: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray]:
        """phi_W: X -> (Q~(X, eps), X_Wbar)."""
        x = np.asarray(x, dtype=float)
        q_val = self.sys.q.eval_float(x, eps=eps if self.perturbed else 0.0)
        return q_val, x[np.array(self.cols_rest, dtype=int)] if self.nt else np.zeros(0)

    # -- symbolic face ------------------------------------------------------------

    def _pad(self, p: Poly) -> Poly:
        return p.pad(self.nv, 0)

    def _build_symbolic(self):
        if self._symbolic is not None:
            return self._symbolic
        n, k, nv = self.n, self.k, self.nv
        sys = self.sys
        eps = Poly.variable(nv, self.eps_index)
        zeta = Poly.variable(nv, self.zeta_index)
        parts = [self._pad(pj) for pj in sys.partials()]
        t_vars = [Poly.variable(nv, k + i) for i in range(self.nt)]

        # Phi(Y, eps) and b(Y) in the piece variable space
        entries = [Poly.zero(nv)] * ((n - 1) * n)
        for j, comp in enumerate(sys.q.components):
            pj = parts[j]
            if pj.is_zero():
                continue
            for (r, c), v in comp.h.items():
                if r == 0:
                    continue
                idx = (r - 1) * n + c
                entries[idx] = entries[idx] + pj * v
            if self.perturbed:
                diag = [Fraction(i ** j) for i in range(1, n + 1)]
                for r in range(1, n):
                    idx = (r - 1) * n + r
                    entries[idx] = entries[idx] + pj * eps * diag[r]
        phi = PolyMatrix(n - 1, n, entries, nvars=nv)
        bvec = [Poly.zero(nv)] * (n - 1)
        for j, comp in enumerate(sys.q.components):
            pj = parts[j]
            if pj.is_zero():
                continue
            for i, v in comp.b.items():
                if i == 0:
                    continue
                bvec[i - 1] = bvec[i - 1] - pj * v

        rows = list(self.piece.rows)
        cols = list(self.piece.cols)
        s = len(rows)
        psi = phi.submatrix(rows, cols)
        omega = polymat_det(psi)

        # adjugate via cofactors: adj[i][j] = (-1)^{i+j} det(psi minor (j, i))
        adj = [[None] * s for _ in range(s)]
        for i in range(s):
            for j in range(s):
                minor_rows = [r for r in range(s) if r != j]
                minor_cols = [c for c in range(s) if c != i]
                minor = psi.submatrix(minor_rows, minor_cols)
                cof = polymat_det(minor)
                adj[i][j] = cof if (i + j) % 2 == 0 else -cof

        b_u = [bvec[u] for u in rows]
        rhs = list(b_u)
        if self.nt:
            for pos, u in enumerate(rows):
                acc = rhs[pos]
                for ti, w in enumerate(self.cols_rest):
                    acc = acc - phi[u, w] * t_vars[ti]
                rhs[pos] = acc
        # numerators of X_W scaled by Omega
        numer = []
        for i in range(s):
            acc = Poly.zero(nv)
            for j in range(s):
                acc = acc + adj[i][j] * rhs[j]
            numer.append(acc)
        inverse = InverseMap(numer, omega, tuple(cols), tuple(self.cols_rest))

        # scaled coordinate vector Omega * X
        x_scaled = [Poly.zero(nv)] * n
        for pos, w in enumerate(cols):
            x_scaled[w] = numer[pos]
        for ti, w in enumerate(self.cols_rest):
            x_scaled[w] = omega * t_vars[ti]

        equalities: List[Poly] = []
        equalities.append(self._pad(sys.p) - zeta)
        omega_sq = omega * omega
        for j, comp in enumerate(sys.q.components):
            # Omega^2 * Q~_j(X) with X = x_scaled / Omega
            acc = Poly.zero(nv)
            for (a, bb), v in comp.h.items():
                acc = acc + x_scaled[a] * x_scaled[bb] * Fraction(v, 2)
            if self.perturbed:
                diag = [Fraction(i ** j) for i in range(1, n + 1)]
                half_eps = eps * Fraction(1, 2)
                for a in range(n):
                    if diag[a] and not x_scaled[a].is_zero():
                        acc = acc + x_scaled[a] * x_scaled[a] * half_eps * diag[a]
            lin = Poly.zero(nv)
            for a, v in comp.b.items():
                lin = lin + x_scaled[a] * v
            acc = acc + omega * lin + omega_sq * comp.c
            equalities.append(omega_sq * Poly.variable(nv, j) - acc)
        for u in self.rows_rest:
            # Omega * b_Ubar[u] - Phi_{Ubar W} adj b_U
            acc = omega * bvec[u]
            for jpos, w in enumerate(cols):
                inner = Poly.zero(nv)
                for ipos in range(s):
                    inner = inner + adj[jpos][ipos] * b_u[ipos]
                acc = acc - phi[u, w] * inner
            equalities.append(acc)
        for rsup, csup in zip(self._super_rows, self._super_cols):
            equalities.append(polymat_det(phi.submatrix(list(rsup), list(csup))))

        self._symbolic = (equalities, omega, inverse)
        return self._symbolic

    @property
    def equalities(self) -> List[Poly]:
        return self._build_symbolic()[0]

    @property
    def omega(self) -> Poly:
        return self._build_symbolic()[1]

    @property
    def inverse_map(self) -> InverseMap:
        return self._build_symbolic()[2]

    def apply_inverse_exact(self, y, t, eps) -> List[Fraction]:
        """Exact inverse at a rational point (requires the symbolic face)."""
        inv = self.inverse_map
        point = [Fraction(v) for v in y] + [Fraction(v) for v in t]
        point += [Fraction(eps), Fraction(0)]
        om = inv.omega.eval(point)
        if om == 0:
            raise SingularPieceError("Omega = 0 exactly at this point")
        x = [Fraction(0)] * self.n
        for pos, w in enumerate(inv.cols):
            x[w] = inv.numerators[pos].eval(point) / om
        for pos, w in enumerate(inv.cols_rest):
            x[w] = Fraction(t[pos])
        return x

    def dump(self) -> str:
        """Human-readable equation listing, one per line, deterministic order."""
        names = self.var_names()
        lines = [f"piece {self.piece}"]
        lines.append(f"omega_nonzero: {self.omega.format(names)} != 0")
        for idx, eq in enumerate(self.equalities):
            lines.append(f"eq[{idx}]: {eq.format(names)} = 0")
        return "\n".join(lines)


def build_piece_system(sys: GPSystem, piece: Piece, perturbed: bool = True) -> PieceSystem:
    return PieceSystem(sys, piece, perturbed=perturbed)


def critical_system(sys: GPSystem, zeta: Fraction = Fraction(0)) -> List[Poly]:
    """The full N-variable critical-point system (level equation plus vanishing
    gradient in coordinates 2..N), used by the oracle side for cross-checks."""
    n, k = sys.n, sys.k
    q_polys = []
    for comp in sys.q.components:
        acc = Poly.const(n, comp.c)
        for (i, j), v in comp.h.items():
            acc = acc + Poly.variable(n, i) * Poly.variable(n, j) * Fraction(v, 2)
        for i, v in comp.b.items():
            acc = acc + Poly.variable(n, i) * v
        q_polys.append(acc)
    composed = sys.p.compose(q_polys)
    out = [composed - Poly.const(n, zeta)]
    for i in range(1, n):
        out.append(composed.partial(i))
    return out
