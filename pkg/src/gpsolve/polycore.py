"""Exact sparse multivariate polynomial arithmetic over the rationals.

A polynomial is a map from exponent tuples to nonzero Fraction coefficients.
All arithmetic is exact; floats never enter this module.  Determinants of
polynomial-entried matrices are computed by evaluating at an integer grid and
interpolating, which keeps the cost polynomial in the size of the *result*
rather than in the number of intermediate products.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

Exponent = Tuple[int, ...]

_ZERO = Fraction(0)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        # floats are binary rationals, so this conversion is exact
        return Fraction(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as an exact rational")


class Poly:
    """Sparse polynomial with exact rational coefficients.

    Immutable after construction.  ``terms`` maps exponent tuples (one entry
    per variable) to nonzero Fractions; the zero polynomial has no terms.
    """

    __slots__ = ("nvars", "terms", "_compiled")

    def __init__(self, nvars: int, terms: Dict[Exponent, Fraction] | None = None):
        clean: Dict[Exponent, Fraction] = {}
        if terms:
            for exp, coef in terms.items():
                coef = _as_fraction(coef)
                if coef == 0:
                    continue
                if len(exp) != nvars:
                    raise ValueError(
                        f"exponent {exp} has length {len(exp)}, expected {nvars}"
                    )
                clean[tuple(int(e) for e in exp)] = coef
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_compiled", None)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars, {})

    @classmethod
    def const(cls, nvars: int, value) -> "Poly":
        return cls(nvars, {(0,) * nvars: _as_fraction(value)})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Poly":
        if not 0 <= index < nvars:
            raise IndexError(f"variable index {index} out of range for {nvars} variables")
        exp = [0] * nvars
        exp[index] = 1
        return cls(nvars, {tuple(exp): Fraction(1)})

    # -- basic queries ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (
            len(self.terms) == 1 and (0,) * self.nvars in self.terms
        )

    def degree(self) -> int:
        """Max total degree over terms; 0 for the zero polynomial."""
        if not self.terms:
            return 0
        return max(sum(exp) for exp in self.terms)

    def degree_in(self, index: int) -> int:
        if not self.terms:
            return 0
        return max(exp[index] for exp in self.terms)

    def constant_part(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, _ZERO)

    # -- arithmetic ---------------------------------------------------------

    def _check_compatible(self, other: "Poly"):
        if self.nvars != other.nvars:
            raise ValueError(
                f"variable-count mismatch: {self.nvars} vs {other.nvars}"
            )

    def __add__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        self._check_compatible(other)
        out = dict(self.terms)
        for exp, coef in other.terms.items():
            out[exp] = out.get(exp, _ZERO) + coef
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        return (-self) + other

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = _as_fraction(other)
            if c == 0:
                return Poly.zero(self.nvars)
            return Poly(self.nvars, {e: k * c for e, k in self.terms.items()})
        self._check_compatible(other)
        out: Dict[Exponent, Fraction] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                exp = tuple(x + y for x, y in zip(ea, eb))
                out[exp] = out.get(exp, _ZERO) + ca * cb
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        result = Poly.const(self.nvars, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    # -- calculus and evaluation ---------------------------------------------

    def partial(self, index: int) -> "Poly":
        """Formal partial derivative with respect to variable ``index``."""
        if not 0 <= index < self.nvars:
            raise IndexError(f"variable index {index} out of range")
        out: Dict[Exponent, Fraction] = {}
        for exp, coef in self.terms.items():
            e = exp[index]
            if e == 0:
                continue
            new = list(exp)
            new[index] = e - 1
            key = tuple(new)
            out[key] = out.get(key, _ZERO) + coef * e
        return Poly(self.nvars, out)

    def eval(self, point: Sequence) -> Fraction:
        """Exact evaluation at a point of rationals (or ints / rational strings)."""
        if len(point) != self.nvars:
            raise ValueError(
                f"point has {len(point)} coordinates, expected {self.nvars}"
            )
        vals = [_as_fraction(v) for v in point]
        total = _ZERO
        for exp, coef in self.terms.items():
            term = coef
            for e, v in zip(exp, vals):
                if e:
                    term *= v**e
            total += term
        return total

    def eval_float(self, point) -> float | np.ndarray:
        """Fast float evaluation; ``point`` may be a vector or a batch (..., nvars)."""
        exps, coefs = self._compile()
        pt = np.asarray(point, dtype=float)
        if pt.shape[-1] != self.nvars and self.nvars > 0:
            raise ValueError("point dimension mismatch")
        if exps.shape[0] == 0:
            return np.zeros(pt.shape[:-1]) if pt.ndim > 1 else 0.0
        if exps.shape[0] == 1 and not exps.any():
            # constant polynomial
            c = coefs[0]
            return np.full(pt.shape[:-1], c) if pt.ndim > 1 else c
        mono = np.prod(pt[..., None, :] ** exps, axis=-1)
        out = mono @ coefs
        return out if pt.ndim > 1 else float(out)

    def _compile(self):
        cached = self._compiled
        if cached is None:
            if self.terms:
                items = sorted(self.terms.items())
                exps = np.array([e for e, _ in items], dtype=np.int64)
                coefs = np.array([float(c) for _, c in items], dtype=float)
            else:
                exps = np.zeros((0, self.nvars), dtype=np.int64)
                coefs = np.zeros(0, dtype=float)
            cached = (exps, coefs)
            object.__setattr__(self, "_compiled", cached)
        return cached

    def compose(self, substitutions: Sequence["Poly"]) -> "Poly":
        """Substitute a polynomial for every variable.

        All substituted polynomials must share one variable space, which
        becomes the variable space of the result.
        """
        if len(substitutions) != self.nvars:
            raise ValueError("need one substitution per variable")
        if self.nvars == 0:
            raise ValueError("compose needs at least one variable")
        target = substitutions[0].nvars
        for s in substitutions:
            if s.nvars != target:
                raise ValueError("substitutions disagree on variable count")
        # cache powers of each substituted polynomial
        powers: list[dict[int, Poly]] = [
            {0: Poly.const(target, 1)} for _ in range(self.nvars)
        ]

        def power(i: int, e: int) -> Poly:
            cache = powers[i]
            if e not in cache:
                cache[e] = power(i, e - 1) * substitutions[i]
            return cache[e]

        total = Poly.zero(target)
        for exp, coef in self.terms.items():
            term = Poly.const(target, coef)
            for i, e in enumerate(exp):
                if e:
                    term = term * power(i, e)
            total = total + term
        return total

    def pad(self, nvars: int, offset: int = 0) -> "Poly":
        """Re-embed into a larger variable space, shifting indices by ``offset``."""
        if offset < 0 or offset + self.nvars > nvars:
            raise ValueError("padded variable space too small")
        out = {}
        for exp, coef in self.terms.items():
            new = (0,) * offset + exp + (0,) * (nvars - offset - self.nvars)
            out[new] = coef
        return Poly(nvars, out)

    def substitute_values(self, assignments: Dict[int, Fraction]) -> "Poly":
        """Fix some variables to exact values, keeping the variable space."""
        out: Dict[Exponent, Fraction] = {}
        for exp, coef in self.terms.items():
            c = coef
            new = list(exp)
            for i, v in assignments.items():
                e = exp[i]
                if e:
                    c *= _as_fraction(v) ** e
                new[i] = 0
            if c == 0:
                continue
            key = tuple(new)
            got = out.get(key, _ZERO) + c
            if got == 0:
                out.pop(key, None)
            else:
                out[key] = got
        return Poly(self.nvars, out)

    # -- display -------------------------------------------------------------

    def __repr__(self) -> str:
        return f"Poly({self.format()})"

    def format(self, names: Sequence[str] | None = None) -> str:
        """Deterministic human-readable form, graded-lex term order."""
        if not self.terms:
            return "0"
        if names is None:
            names = [f"x{i}" for i in range(self.nvars)]
        pieces = []
        for exp in sorted(self.terms, key=lambda e: (-sum(e), tuple(-x for x in e))):
            coef = self.terms[exp]
            factors = [
                names[i] if e == 1 else f"{names[i]}^{e}"
                for i, e in enumerate(exp)
                if e
            ]
            body = "*".join(factors)
            if not factors:
                pieces.append(str(coef))
            elif coef == 1:
                pieces.append(body)
            elif coef == -1:
                pieces.append(f"-{body}")
            else:
                pieces.append(f"{coef}*{body}")
        text = " + ".join(pieces)
        return text.replace("+ -", "- ")


class PolyMatrix:
    """Dense matrix of Poly entries sharing one variable space."""

    __slots__ = ("rows", "cols", "entries", "nvars")

    def __init__(self, rows: int, cols: int, entries: Sequence[Poly], nvars: int | None = None):
        entries = list(entries)
        if len(entries) != rows * cols:
            raise ValueError("entry count does not match dimensions")
        if entries:
            nv = entries[0].nvars
            for p in entries:
                if p.nvars != nv:
                    raise ValueError("entries disagree on variable count")
            if nvars is not None and nvars != nv:
                raise ValueError("declared nvars disagrees with entries")
            nvars = nv
        self.rows = rows
        self.cols = cols
        self.entries = entries
        self.nvars = 0 if nvars is None else nvars

    @classmethod
    def zeros(cls, rows: int, cols: int, nvars: int) -> "PolyMatrix":
        return cls(rows, cols, [Poly.zero(nvars)] * (rows * cols), nvars=nvars)

    def __getitem__(self, key: Tuple[int, int]) -> Poly:
        i, j = key
        return self.entries[i * self.cols + j]

    def submatrix(self, row_idx: Iterable[int], col_idx: Iterable[int]) -> "PolyMatrix":
        """Submatrix on the given sorted, distinct, in-range index sets."""
        rows = list(row_idx)
        cols = list(col_idx)
        for idx, bound, what in ((rows, self.rows, "row"), (cols, self.cols, "column")):
            if any(not 0 <= i < bound for i in idx):
                raise IndexError(f"{what} index out of range")
            if sorted(set(idx)) != idx:
                raise ValueError(f"{what} indices must be sorted and distinct")
        return PolyMatrix(
            len(rows), len(cols), [self[i, j] for i in rows for j in cols],
            nvars=self.nvars,
        )

    def matvec(self, vec: Sequence[Poly]) -> list[Poly]:
        if len(vec) != self.cols:
            raise ValueError("vector length mismatch")
        nv = self.nvars if self.entries else vec[0].nvars
        out = []
        for i in range(self.rows):
            acc = Poly.zero(nv)
            for j in range(self.cols):
                acc = acc + self[i, j] * vec[j]
            out.append(acc)
        return out

    def scale(self, p: Poly) -> "PolyMatrix":
        return PolyMatrix(self.rows, self.cols, [e * p for e in self.entries])

    def eval_float(self, point) -> np.ndarray:
        out = np.empty((self.rows, self.cols), dtype=float)
        for i in range(self.rows):
            for j in range(self.cols):
                out[i, j] = self[i, j].eval_float(point)
        return out

    def det(self) -> Poly:
        return polymat_det(self)

    def __repr__(self):
        return f"PolyMatrix({self.rows}x{self.cols})"


# -- exact determinants via evaluation + interpolation ------------------------


def _det_fractions(mat: list[list[Fraction]]) -> Fraction:
    """Exact determinant by Gaussian elimination over the rationals."""
    n = len(mat)
    if n == 0:
        return Fraction(1)
    a = [row[:] for row in mat]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, n):
            if a[r][col] == 0:
                continue
            factor = a[r][col] * inv
            for c in range(col, n):
                a[r][c] -= factor * a[col][c]
    return det


def _interp_1d(values: list, degree: int):
    """Newton interpolation at nodes 0..degree.

    ``values`` may be Fractions or Polys (anything forming a vector space over
    the rationals); returns monomial coefficients c_0..c_degree.
    """
    n = degree + 1
    # divided differences
    dd = list(values)
    for level in range(1, n):
        for i in range(n - 1, level - 1, -1):
            dd[i] = (dd[i] - dd[i - 1]) * Fraction(1, level)
    # expand the Newton basis prod_{j<i}(x - j) into monomials
    coeffs = [v * 0 for v in values]  # zeros of the right type
    basis = [Fraction(1)]  # coefficients of the running Newton basis polynomial
    for i in range(n):
        for power, b in enumerate(basis):
            coeffs[power] = coeffs[power] + dd[i] * b
        # multiply basis by (x - i)
        new = [Fraction(0)] * (len(basis) + 1)
        for power, b in enumerate(basis):
            new[power + 1] += b
            new[power] -= b * i
        basis = new
    return coeffs


def _interpolate_grid(values: Dict[Exponent, Fraction], nvars: int, degree: int) -> Poly:
    """Recover the polynomial from exact values on the grid {0..degree}^nvars."""
    if nvars == 0:
        return Poly(0, {(): values[()]})

    def recurse(prefix: Tuple[int, ...], remaining: int) -> Poly:
        # returns a Poly in the last `remaining` variables, padded later
        if remaining == 0:
            return Poly(0, {(): values[prefix]})
        slices = [recurse(prefix + (a,), remaining - 1) for a in range(degree + 1)]
        coeffs = _interp_1d(slices, degree)
        # assemble: sum_e x_first^e * coeffs[e]  (coeffs live in remaining-1 vars)
        out: Dict[Exponent, Fraction] = {}
        for e, sub in enumerate(coeffs):
            for exp, coef in sub.terms.items():
                if coef == 0:
                    continue
                out[(e,) + exp] = coef
        return Poly(remaining, out)

    return recurse((), nvars)


def polymat_det(m: PolyMatrix) -> Poly:
    """Exact determinant of a square polynomial matrix.

    Evaluates the determinant at every integer point of {0..D}^v with
    D = (max entry degree) * (matrix size) and v the number of variables that
    actually occur in the entries, then interpolates.  The grid is processed
    in a fixed order, so the result is deterministic.
    """
    if m.rows != m.cols:
        raise ValueError(f"matrix is {m.rows}x{m.cols}, not square")
    n = m.rows
    nv = m.nvars
    if n == 0:
        return Poly.const(max(nv, 0), 1)
    if n == 1:
        return m[0, 0]
    d = max(p.degree() for p in m.entries)
    if d == 0:
        # constant matrix: no interpolation needed
        mat = [[m[i, j].constant_part() for j in range(n)] for i in range(n)]
        return Poly.const(nv, _det_fractions(mat))
    # interpolate only over variables with support in some entry
    used = sorted(
        {i for p in m.entries for i in range(nv) if p.degree_in(i) > 0}
    )
    compact = {old: new for new, old in enumerate(used)}
    v = len(used)
    degree = d * n
    values: Dict[Exponent, Fraction] = {}

    def fill(prefix: Tuple[int, ...]):
        if len(prefix) == v:
            point = [Fraction(0)] * nv
            for old, new in compact.items():
                point[old] = Fraction(prefix[new])
            mat = [[m[i, j].eval(point) for j in range(n)] for i in range(n)]
            values[prefix] = _det_fractions(mat)
            return
        for a in range(degree + 1):
            fill(prefix + (a,))

    fill(())
    det_compact = _interpolate_grid(values, v, degree)
    if v == nv:
        return det_compact
    # pad back into the full variable space
    out: Dict[Exponent, Fraction] = {}
    for exp, coef in det_compact.terms.items():
        full = [0] * nv
        for new, old in enumerate(used):
            full[old] = exp[new]
        out[tuple(full)] = coef
    return Poly(nv, out)
