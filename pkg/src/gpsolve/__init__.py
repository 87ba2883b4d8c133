"""gpsolve: feasibility and optimization of composed quadratic polynomial systems.

The core object is a system p(Q(X)) where Q maps R^N into a small number k of
quadratic outputs and p is a polynomial on those outputs.  The toolkit decides
whether p(Q(X)) = 0 has a real solution (and minimizes an objective r(Q(X))
over the solution set) by enumerating critical-point "pieces" in few variables
and probing them along a schedule of shrinking perturbation levels.  Frontends
compile quantum marginal consistency, QCQP, trust-region, separable-Hamiltonian
and N-representability instances into this form; a brute-force oracle module
provides independent ground truth.
"""

from gpsolve.polycore import Poly, PolyMatrix
from gpsolve.gpmodel import QuadraticMap, GPSystem

__all__ = ["Poly", "PolyMatrix", "QuadraticMap", "GPSystem"]
__version__ = "0.1.0"
