"""Objective minimization over the zero set, by bisection on the level.

Each trial theta asks whether the augmented outer polynomial
p_theta = p^2 + (r - theta)^2 has a zero, reusing the feasibility backend with
sharpened tolerances.  The upper end of the bracket is always an *achieved*
objective value (it comes with a verified witness), so the reported optimum can
never undershoot the truth by more than the backend's witness tolerance;
trials that come back INCONCLUSIVE are treated as the infeasible side and
flagged, never silently absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from gpsolve import backend as bk
from gpsolve.gpmodel import GPSystem
from gpsolve.polycore import Poly


class BracketError(ValueError):
    """No feasible point found at the top of the bracket; widen it."""


@dataclass
class TrialRecord:
    theta: float
    status: str
    residual: Optional[float]


@dataclass
class OptResult:
    theta_lo: float
    theta_hi: float
    witness: np.ndarray
    residual: float  # p(Q(X))^2 at the witness
    objective: float  # r(Q(X)) at the witness
    residual_exact: str
    trace: List[TrialRecord] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def theta(self) -> float:
        return self.theta_hi


def trial_system(sys: GPSystem, theta: float) -> GPSystem:
    """The feasibility system for one trial level of the objective."""
    if sys.r is None:
        raise ValueError("system carries no objective")
    theta_exact = Fraction(float(theta))
    shifted = sys.r - Poly.const(sys.k, theta_exact)
    p_theta = sys.p * sys.p + shifted * shifted
    parts = list(sys.residual_parts) + [shifted]
    return GPSystem(sys.q, p_theta, bound_hint=sys.bound_hint, residual_parts=parts)


def auto_bracket(sys: GPSystem) -> Tuple[float, float]:
    """Coarse objective bracket from coefficient norms over the bound ball."""
    if sys.bound_hint is None:
        raise ValueError("auto_bracket needs a bound hint")
    if sys.r is None:
        raise ValueError("system carries no objective")
    radius = max(float(sys.bound_hint), 1.0)
    comp_bounds = []
    for comp in sys.q.components:
        h_norm = sum(abs(float(v)) for v in comp.h.values())
        b_norm = sum(abs(float(v)) for v in comp.b.values())
        comp_bounds.append(
            0.5 * h_norm * radius**2 + b_norm * radius + abs(float(comp.c))
        )
    total = 0.0
    for exp, coef in sys.r.terms.items():
        term = abs(float(coef))
        for j, e in enumerate(exp):
            term *= max(comp_bounds[j], 1.0) ** e
        total += term
    return (-total - 1.0, total + 1.0)


# trial verdicts hinge on the exact verification at tol_feas, so the
# convergence trigger can stay loose; level witnesses drift like sqrt(zeta).
# tol_feas = 1e-40 pins the rationalized witness to |r - theta| <= 1e-10 and
# base-constraint parts <= 1e-5 even through the quartic flattening
_TRIAL_TOL = bk.Tolerances(
    tol_newton=1e-10, tol_feas=1e-40, tol_infeas=1e-7, conv_tol=5e-2, omega_min=1e-10
)


def optimize(
    sys: GPSystem,
    delta: float = 1e-6,
    bracket: Optional[Tuple[float, float]] = None,
    seed: int = 0,
    workers: int = 1,
    trial_engine: str = "direct",
    trial_levels: int = 6,
    restarts: int = 10,
    max_trials: int = 80,
) -> OptResult:
    """Approximate min r(Q(X)) over the zero set of p(Q(X)) to width delta.

    Bisection calls the feasibility backend on the trial system of each theta;
    feasible trials pull the upper end down to the witness's achieved value,
    infeasible (or inconclusive, flagged) trials raise the lower end.  Trials
    default to the direct probing engine: bisection multiplies the per-trial
    cost twenty-fold, which the piece family cannot afford; pass
    trial_engine="pieces" to force the reduction per trial.
    """
    if sys.r is None:
        raise ValueError("optimize needs a system with an objective polynomial")
    if sys.bound_hint is None:
        raise ValueError("optimize requires a bounded system (bound hint)")
    notes: List[str] = []
    trace: List[TrialRecord] = []
    lo, hi = bracket if bracket is not None else auto_bracket(sys)
    if not lo < hi:
        raise BracketError(f"invalid bracket [{lo}, {hi}]")
    schedule = bk.ProbeSchedule(
        tuple((10.0**-t * 1e-2, 10.0**-t) for t in range(1, trial_levels + 1))
    )

    # establish an achieved value at the top of the bracket, plus a pool of
    # anchors across basins so trials are not captive to one witness chain
    pool = bk.feasible_points(sys, budget=max(60, restarts * 6), seed=seed)
    if not pool:
        raise BracketError(
            "no feasible point found; the zero set may be empty or the bracket "
            "may need widening"
        )
    x_best = pool[0]
    obj_best = float(np.asarray(sys.r.eval_float(sys.q.eval_float(x_best))))
    if obj_best > hi + 1e-12:
        raise BracketError(
            f"achieved objective {obj_best} exceeds the bracket top {hi}; widen it"
        )
    hi = min(hi, obj_best)
    witness = x_best
    anchors = pool[:6]

    infeasible_marks: List[float] = []
    trial = 0
    while hi - lo > delta and trial < max_trials:
        trial += 1
        theta = 0.5 * (lo + hi)
        t_sys = trial_system(sys, theta)
        verdict = bk.decide_feasibility(
            t_sys,
            schedule=schedule,
            tolerances=_TRIAL_TOL,
            seed=_trial_seed(seed, trial),
            workers=workers,
            engine=trial_engine,
            restarts=restarts,
            warm_starts=[witness] + anchors,
        )
        trace.append(TrialRecord(theta, verdict.status, verdict.residual))
        if verdict.status == bk.FEASIBLE:
            if infeasible_marks and theta < max(infeasible_marks) - 1e-15:
                notes.append(
                    f"monotonicity violation: feasible at {theta} below an "
                    f"infeasible trial at {max(infeasible_marks)}"
                )
            witness = verdict.witness
            achieved = float(np.asarray(sys.r.eval_float(sys.q.eval_float(witness))))
            hi = min(theta, achieved)
        else:
            if verdict.status == bk.INCONCLUSIVE:
                notes.append(f"trial at {theta} inconclusive; treated as infeasible")
            infeasible_marks.append(theta)
            lo = theta

    witness = bk.polish_witness(sys, witness)
    residual = bk.gp_residual_float(sys, witness)
    exact = bk.gp_residual_exact(sys, witness)
    objective = float(np.asarray(sys.r.eval_float(sys.q.eval_float(witness))))
    hi = min(hi, objective) if residual <= _TRIAL_TOL.tol_newton else hi
    if hi < lo:
        lo = hi - delta
        notes.append("achieved value undercut the lower bound; lower end widened")
    return OptResult(
        theta_lo=lo,
        theta_hi=hi,
        witness=witness,
        residual=residual,
        objective=objective,
        residual_exact=str(exact),
        trace=trace,
        notes=notes,
    )


def _trial_seed(seed: int, trial: int) -> int:
    return (seed * 1000003 + trial * 7919) & 0x7FFFFFFF
