"""A small batched Levenberg-Marquardt engine.

All restarts advance together as one (R, n) array, which keeps the per-
iteration cost in numpy instead of Python.  Residual callbacks take (R, n) and
return (R, m); Jacobians default to batched central differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray  # (R, n) final iterates
    sumsq: np.ndarray  # (R,) final residual sum of squares
    converged: np.ndarray  # (R,) bool: reached tol_f
    iterations: int
    trajectory: Optional[np.ndarray] = None  # (T, R, n) when recording


def numeric_jacobian(fun: Callable, x: np.ndarray, f0: np.ndarray, step: float = 1e-7):
    r, n = x.shape
    m = f0.shape[1]
    jac = np.empty((r, m, n))
    for i in range(n):
        h = step * np.maximum(1.0, np.abs(x[:, i]))
        xp = x.copy()
        xp[:, i] += h
        xm = x.copy()
        xm[:, i] -= h
        jac[:, :, i] = (fun(xp) - fun(xm)) / (2 * h)[:, None]
    return jac


def lm_solve(
    fun: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    jac: Optional[Callable] = None,
    max_iter: int = 60,
    tol_f: float = 1e-22,
    tol_step: float = 1e-14,
    lam0: float = 1e-3,
    record: bool = False,
) -> LMResult:
    """Minimize ||fun(x)||^2 from a batch of starts.

    tol_f bounds the residual sum of squares at which a lane counts as
    converged; iteration continues for unconverged lanes until max_iter or
    until every lane stalls.  With ``record`` the accepted iterates are kept
    as a (T, R, n) trajectory (including the starting points).
    """
    x = np.array(x0, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    r, n = x.shape
    f = fun(x)
    f = np.where(np.isfinite(f), f, 1e6)
    sumsq = np.einsum("bm,bm->b", f, f)
    lam = np.full(r, lam0)
    active = np.ones(r, dtype=bool)
    eye = np.eye(n)
    trail = [x.copy()] if record else None
    it = 0
    for it in range(1, max_iter + 1):
        if not active.any():
            break
        jmat = jac(x, f) if jac is not None else numeric_jacobian(fun, x, f)
        jmat = np.where(np.isfinite(jmat), jmat, 0.0)
        jt = jmat.transpose(0, 2, 1)
        jtj = jt @ jmat
        g = (jt @ f[:, :, None])[..., 0]
        # Levenberg damping with an isotropic, scale-aware ridge: the residual
        # count is often below the unknown count here, and Marquardt's
        # diagonal scaling explodes along the null directions of J^T J
        ridge = np.maximum(np.einsum("bii->b", jtj) / n, 1e-12)
        a = jtj + (lam * ridge)[:, None, None] * eye
        try:
            step = np.linalg.solve(a, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            a = a + 1e-10 * eye
            step = np.linalg.solve(a, g[..., None])[..., 0]
        x_new = x - np.where(active[:, None], step, 0.0)
        f_new = fun(x_new)
        f_new = np.where(np.isfinite(f_new), f_new, 1e6)
        sumsq_new = np.einsum("bm,bm->b", f_new, f_new)
        improved = (sumsq_new < sumsq) & active
        x = np.where(improved[:, None], x_new, x)
        f = np.where(improved[:, None], f_new, f)
        sumsq = np.where(improved, sumsq_new, sumsq)
        lam = np.where(improved, np.maximum(lam * 0.33, 1e-12), np.minimum(lam * 5.0, 1e10))
        step_size = np.linalg.norm(step, axis=1)
        stalled = (~improved) & (lam >= 1e10)
        tiny = improved & (step_size < tol_step)
        active = active & ~(stalled | tiny) & (sumsq > tol_f)
        if record:
            trail.append(x.copy())
    return LMResult(
        x, sumsq, sumsq <= tol_f, it,
        np.stack(trail, axis=0) if record else None,
    )
