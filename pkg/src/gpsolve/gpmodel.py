"""Composed quadratic systems: the map Q, the outer polynomial p, and the
gradient objects used by the critical-point reduction.

Conventions fixed here and used everywhere downstream:

* A quadratic component is Q_j(X) = (1/2) X^T H_j X + b_j^T X + c_j with H_j
  exactly symmetric.
* The projection coordinate is variable 0; "hatted" matrices/vectors have row 0
  deleted, so Phi is (N-1) x N and the critical equations constrain the
  gradient in coordinates 1..N-1 only.
* The rank-repair perturbation for component index j (0-based) adds
  eps * diag(1**j, 2**j, ..., N**j) to H_j, i.e. the 1-based component j+1
  receives the diagonal (i**j)_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gpsolve.polycore import Poly, PolyMatrix, _as_fraction

SparseMat = Dict[Tuple[int, int], Fraction]
SparseVec = Dict[int, Fraction]


def _to_sparse_matrix(h, n: int) -> SparseMat:
    if isinstance(h, dict):
        out = {}
        for (i, j), v in h.items():
            v = _as_fraction(v)
            if v != 0:
                out[(int(i), int(j))] = v
        return out
    out = {}
    for i, row in enumerate(h):
        for j, v in enumerate(row):
            v = _as_fraction(v)
            if v != 0:
                out[(i, j)] = v
    return out


def _to_sparse_vector(b, n: int) -> SparseVec:
    if b is None:
        return {}
    if isinstance(b, dict):
        return {int(i): _as_fraction(v) for i, v in b.items() if _as_fraction(v) != 0}
    return {i: _as_fraction(v) for i, v in enumerate(b) if _as_fraction(v) != 0}


@dataclass(frozen=True)
class QuadComponent:
    """One quadratic form (1/2) X^T H X + b^T X + c with exact entries."""

    h: SparseMat
    b: SparseVec
    c: Fraction

    def eval_exact(self, x: Sequence[Fraction]) -> Fraction:
        total = self.c
        for (i, j), v in self.h.items():
            total += Fraction(1, 2) * v * x[i] * x[j]
        for i, v in self.b.items():
            total += v * x[i]
        return total


class QuadraticMap:
    """The quadratic map Q: R^N -> R^k as a list of (H, b, c) components."""

    def __init__(self, n: int, components: Sequence[Tuple]):
        self.n = n
        comps: List[QuadComponent] = []
        for h, b, c in components:
            hs = _to_sparse_matrix(h, n)
            for (i, j), v in hs.items():
                if hs.get((j, i)) != v:
                    raise ValueError(f"H is not symmetric at entry {(i, j)}")
                if not (0 <= i < n and 0 <= j < n):
                    raise IndexError("H index out of range")
            comps.append(QuadComponent(hs, _to_sparse_vector(b, n), _as_fraction(c)))
        self.components = comps
        self._float_cache: dict = {}

    @property
    def k(self) -> int:
        return len(self.components)

    # -- float views ---------------------------------------------------------

    def h_stack(self) -> np.ndarray:
        """Dense float (k, N, N) stack of the H matrices."""
        cached = self._float_cache.get("h")
        if cached is None:
            cached = np.zeros((self.k, self.n, self.n))
            for idx, comp in enumerate(self.components):
                for (i, j), v in comp.h.items():
                    cached[idx, i, j] = float(v)
            self._float_cache["h"] = cached
        return cached

    def b_stack(self) -> np.ndarray:
        cached = self._float_cache.get("b")
        if cached is None:
            cached = np.zeros((self.k, self.n))
            for idx, comp in enumerate(self.components):
                for i, v in comp.b.items():
                    cached[idx, i] = float(v)
            self._float_cache["b"] = cached
        return cached

    def c_stack(self) -> np.ndarray:
        cached = self._float_cache.get("c")
        if cached is None:
            cached = np.array([float(comp.c) for comp in self.components])
            self._float_cache["c"] = cached
        return cached

    def j_diag_stack(self) -> np.ndarray:
        """Float (k, N) diagonals of the perturbation matrices, row j = (i+1)**j."""
        cached = self._float_cache.get("jdiag")
        if cached is None:
            cached = np.array(
                [perturbation_diagonal(self.n, j + 1) for j in range(self.k)],
                dtype=float,
            )
            self._float_cache["jdiag"] = cached
        return cached

    # -- evaluation ----------------------------------------------------------

    def eval_exact(self, x: Sequence) -> List[Fraction]:
        if len(x) != self.n:
            raise ValueError(f"point has {len(x)} coordinates, expected {self.n}")
        xs = [_as_fraction(v) for v in x]
        return [comp.eval_exact(xs) for comp in self.components]

    def _h_flat(self) -> np.ndarray:
        cached = self._float_cache.get("h_flat")
        if cached is None:
            cached = self.h_stack().reshape(self.k * self.n, self.n)
            self._float_cache["h_flat"] = cached
        return cached

    def _hx(self, x: np.ndarray, eps: float) -> np.ndarray:
        """(H_j + eps J_j) x for all components: shape (..., k, N)."""
        hx = (x @ self._h_flat().T).reshape(x.shape[:-1] + (self.k, self.n))
        if eps:
            hx = hx + eps * self.j_diag_stack() * x[..., None, :]
        return hx

    def eval_float(self, x: np.ndarray, eps: float = 0.0) -> np.ndarray:
        """Evaluate all components at float points of shape (..., N)."""
        x = np.asarray(x, dtype=float)
        hx = self._hx(x, eps)
        vals = 0.5 * (hx * x[..., None, :]).sum(axis=-1)
        return vals + x @ self.b_stack().T + self.c_stack()

    def gradients_float(self, x: np.ndarray, eps: float = 0.0) -> np.ndarray:
        """Gradients of all components: shape (..., k, N)."""
        x = np.asarray(x, dtype=float)
        return self._hx(x, eps) + self.b_stack()

    def eval_and_gradients(self, x: np.ndarray, eps: float = 0.0):
        """Values and gradients of all components from one shared product."""
        x = np.asarray(x, dtype=float)
        hx = self._hx(x, eps)
        vals = 0.5 * (hx * x[..., None, :]).sum(axis=-1)
        vals = vals + x @ self.b_stack().T + self.c_stack()
        return vals, hx + self.b_stack()


def perturbation_diagonal(n: int, j: int) -> List[int]:
    """Diagonal of the rank-repair matrix for 1-based component j: (i**(j-1))_i."""
    if j < 1:
        raise IndexError("component index is 1-based")
    return [i ** (j - 1) for i in range(1, n + 1)]


def perturbation_matrix(n: int, j: int) -> np.ndarray:
    """Dense float rank-repair matrix diag(1**(j-1), ..., n**(j-1))."""
    return np.diag(np.array(perturbation_diagonal(n, j), dtype=float))


class GPSystem:
    """A composed system p(Q(X)) with optional objective r(Q(X)).

    ``residual_parts`` is an optional tuple of polynomials over the component
    outputs whose simultaneous vanishing is equivalent to p = 0.  Frontends
    that build p as a sum of even powers record the base polynomials here so
    numeric solvers see a well-conditioned residual vector; it never replaces
    p in any reported quantity.
    """

    def __init__(
        self,
        q: QuadraticMap,
        p: Poly,
        r: Optional[Poly] = None,
        bound_hint: Optional[Fraction] = None,
        residual_parts: Optional[Sequence[Poly]] = None,
    ):
        if p.nvars != q.k:
            raise ValueError(f"p has {p.nvars} variables but Q has {q.k} components")
        if r is not None and r.nvars != q.k:
            raise ValueError(f"r has {r.nvars} variables but Q has {q.k} components")
        self.q = q
        self.p = p
        self.r = r
        self.bound_hint = None if bound_hint is None else _as_fraction(bound_hint)
        self.residual_parts = tuple(residual_parts) if residual_parts else (p,)
        for part in self.residual_parts:
            if part.nvars != q.k:
                raise ValueError("residual part variable count mismatch")
        self._partials: Optional[List[Poly]] = None
        self._parts_partials = None
        self._parts_compiled = None
        self._parts_weight_split = None

    @property
    def n(self) -> int:
        return self.q.n

    @property
    def k(self) -> int:
        return self.q.k

    def partials(self) -> List[Poly]:
        """The formal partials of p with respect to each component output."""
        if self._partials is None:
            self._partials = [self.p.partial(j) for j in range(self.k)]
        return self._partials

    def parts_eval_float(self, y: np.ndarray) -> np.ndarray:
        """Evaluate every zero part at batched component outputs y: (B, parts).

        All parts share one compiled monomial table, so the whole vector costs
        a single numpy pass.
        """
        cache = self._parts_compiled
        if cache is None:
            exps = []
            coefs = []
            owner = []
            for idx, g in enumerate(self.residual_parts):
                for exp, coef in sorted(g.terms.items()):
                    exps.append(exp)
                    coefs.append(float(coef))
                    owner.append(idx)
            n_parts = len(self.residual_parts)
            if exps:
                exp_arr = np.array(exps, dtype=np.int64)
                scatter = np.zeros((len(exps), n_parts))
                scatter[np.arange(len(exps)), owner] = coefs
            else:
                exp_arr = np.zeros((0, self.k), dtype=np.int64)
                scatter = np.zeros((0, n_parts))
            cols = np.where(exp_arr.max(axis=0) > 0)[0] if exp_arr.size else np.zeros(0, int)
            cache = (exp_arr[:, cols], cols, scatter)
            self._parts_compiled = cache
        exp_arr, cols, scatter = cache
        y = np.asarray(y, dtype=float).reshape(-1, self.k)
        if exp_arr.shape[0] == 0:
            return np.zeros((y.shape[0], scatter.shape[1]))
        mono = np.prod(y[:, None, cols] ** exp_arr[None, :, :], axis=2)
        return mono @ scatter

    def parts_partials(self) -> List[List[Tuple[int, Poly]]]:
        """Per zero part, its nonzero partials as (component index, Poly) pairs.

        Most parts touch very few components, so gradient assembly iterates
        only the support instead of all k columns.
        """
        if self._parts_partials is None:
            table = []
            for g in self.residual_parts:
                row = []
                for j in range(self.k):
                    pj = g.partial(j)
                    if not pj.is_zero():
                        row.append((j, pj))
                table.append(row)
            self._parts_partials = table
        return self._parts_partials

    def parts_weight_split(self):
        """Partial-derivative table split into a constant matrix and the rest.

        Returns (W, var_terms): W is (parts, k) with the constant weights, and
        var_terms lists (part index, component index, Poly) for partials that
        genuinely depend on Y.  Linear parts, the common case, land entirely
        in W, letting the Jacobian assemble as one matmul.
        """
        if self._parts_weight_split is None:
            n_parts = len(self.residual_parts)
            w = np.zeros((n_parts, self.k))
            var_terms = []
            for i, support in enumerate(self.parts_partials()):
                for j, pj in support:
                    if pj.is_constant():
                        w[i, j] = float(pj.constant_part())
                    else:
                        var_terms.append((i, j, pj))
            self._parts_weight_split = (w, var_terms)
        return self._parts_weight_split

    # -- evaluation ----------------------------------------------------------

    def eval(self, x: Sequence) -> Fraction:
        """Exact p(Q(X)) at a rational point."""
        return self.p.eval(self.q.eval_exact(x))

    def eval_float(self, x, eps: float = 0.0) -> float | np.ndarray:
        y = self.q.eval_float(x, eps=eps)
        return self.p.eval_float(y)

    def gradient(self, x: Sequence) -> List[Fraction]:
        """Exact gradient of p(Q(.)) at a rational point, via the chain rule."""
        xs = [_as_fraction(v) for v in x]
        if len(xs) != self.n:
            raise ValueError("dimension mismatch")
        y = self.q.eval_exact(xs)
        weights = [pj.eval(y) for pj in self.partials()]
        grad = [Fraction(0)] * self.n
        for w, comp in zip(weights, self.q.components):
            if w == 0:
                continue
            for (i, j), v in comp.h.items():
                grad[i] += w * v * xs[j]
            for i, v in comp.b.items():
                grad[i] += w * v
        return grad

    def gradient_float(self, x, eps: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.q.eval_float(x, eps=eps)
        k = self.k
        weights = np.stack(
            [np.asarray(pj.eval_float(y)) for pj in self.partials()], axis=-1
        )
        comp_grads = self.q.gradients_float(x, eps=eps)
        return np.einsum("...k,...ki->...i", weights.reshape(y.shape[:-1] + (k,)), comp_grads)

    # -- gradient-assembled polynomial objects --------------------------------

    def phi(self) -> PolyMatrix:
        """The (N-1) x N matrix sum_j p_j(Y) Hhat_j over the k outputs."""
        n, k = self.n, self.k
        parts = self.partials()
        entries = [Poly.zero(k)] * ((n - 1) * n)
        acc: Dict[int, Poly] = {}
        for j, comp in enumerate(self.q.components):
            pj = parts[j]
            if pj.is_zero():
                continue
            for (r, c), v in comp.h.items():
                if r == 0:
                    continue
                idx = (r - 1) * n + c
                term = pj * v
                acc[idx] = acc.get(idx, Poly.zero(k)) + term
        for idx, poly in acc.items():
            entries[idx] = poly
        return PolyMatrix(n - 1, n, entries)

    def b_vector(self) -> List[Poly]:
        """The length N-1 vector -sum_j p_j(Y) bhat_j."""
        n, k = self.n, self.k
        parts = self.partials()
        out = [Poly.zero(k)] * (n - 1)
        for j, comp in enumerate(self.q.components):
            pj = parts[j]
            if pj.is_zero():
                continue
            for i, v in comp.b.items():
                if i == 0:
                    continue
                out[i - 1] = out[i - 1] - pj * v
        return out

    def phi_float(self, y: np.ndarray, eps: float = 0.0) -> np.ndarray:
        """Float Phi(Y, eps), batched over leading axes of y: (..., N-1, N)."""
        y = np.asarray(y, dtype=float)
        weights = np.stack(
            [np.asarray(pj.eval_float(y)) for pj in self.partials()], axis=-1
        ).reshape(y.shape[:-1] + (self.k,))
        h = self.q.h_stack()[:, 1:, :]
        phi = np.einsum("...k,kij->...ij", weights, h)
        if eps:
            jd = self.q.j_diag_stack()
            # eps * sum_j p_j(Y) * Jhat_j contributes only on the diagonal block
            diag = eps * np.einsum("...k,ki->...i", weights, jd)
            rows = np.arange(1, self.n)
            phi[..., rows - 1, rows] += diag[..., 1:]
        return phi

    def b_float(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        weights = np.stack(
            [np.asarray(pj.eval_float(y)) for pj in self.partials()], axis=-1
        ).reshape(y.shape[:-1] + (self.k,))
        bhat = self.q.b_stack()[:, 1:]
        return -np.einsum("...k,ki->...i", weights, bhat)

    def perturb(self, j: int) -> PolyMatrix:
        """H_j(eps) = H_j + eps J(j) for 1-based component j, as a matrix of
        polynomials in the single variable eps."""
        if not 1 <= j <= self.k:
            raise IndexError(f"component index {j} out of range 1..{self.k}")
        comp = self.q.components[j - 1]
        n = self.n
        diag = perturbation_diagonal(n, j)
        entries = []
        for r in range(n):
            for c in range(n):
                const = comp.h.get((r, c), Fraction(0))
                terms = {}
                if const != 0:
                    terms[(0,)] = const
                if r == c:
                    terms[(1,)] = Fraction(diag[r])
                entries.append(Poly(1, terms))
        return PolyMatrix(n, n, entries)


def check_general_position(
    sys: GPSystem, eps: float, y: Sequence[float], rank: int, rtol: float = 1e-9
) -> bool:
    """Numerical rank test of sum_j y_j (H_j + eps J(j)) against a target rank.

    Uses an SVD with threshold rtol * sigma_max.
    """
    y = np.asarray(y, dtype=float)
    if np.all(y == 0):
        raise ValueError("y must be nonzero")
    a = np.einsum("k,kij->ij", y, sys.q.h_stack())
    if eps:
        a = a + eps * np.diag(y @ sys.q.j_diag_stack())
    sigma = np.linalg.svd(a, compute_uv=False)
    if sigma[0] == 0:
        return rank <= 0
    return int(np.sum(sigma > rtol * sigma[0])) >= rank
