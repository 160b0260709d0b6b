"""
HDG-IP Solver - Skeleton Solve

Handles:
- Sparse direct solve (SuperLU with partial pivoting, iterative refinement)
- Restarted GMRES with an incomplete-LU preconditioner
- Recovery of interior DOFs from the trace solution
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, Field
from scipy.sparse.linalg import LinearOperator, gmres, spilu, splu

from hdg_ip.config import get_settings
from hdg_ip.errors import ConvergenceError, InvalidArgumentError, SingularityError
from hdg_ip.services.assembly import CondensedSystem

logger = logging.getLogger(__name__)

REFINEMENT_STEPS = 2


class SolverReport(BaseModel):
    """Summary of one skeleton solve."""

    method: str = Field(description="direct or iterative")
    size: int = Field(description="Number of free trace DOFs")
    iterations: int = Field(default=0, description="Krylov iterations or refinement steps")
    residual: float = Field(description="Relative residual ||S x - G|| / ||G||")
    seconds: float = Field(description="Wall time of the solve and recovery")
    history: List[float] = Field(default_factory=list, description="Residual history")


@dataclass
class Solution:
    """Composite discrete solution (U, U^)."""

    system: CondensedSystem
    trace: np.ndarray  # full trace vector, Dirichlet faces included
    interior: np.ndarray
    report: SolverReport

    @property
    def space(self):
        return self.system.space

    def element_coeffs(self, e: int) -> np.ndarray:
        return self.interior[self.space.interior_dofs(e)]

    def face_coeffs(self, f: int) -> np.ndarray:
        return self.trace[self.space.trace_dofs(f)]


def _relative_residual(matrix: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    norm_b = np.linalg.norm(b)
    res = np.linalg.norm(matrix @ x - b)
    return float(res / norm_b) if norm_b > 0 else float(res)


def _solve_direct(matrix: sp.csr_matrix, rhs: np.ndarray, tol: float):
    try:
        lu = splu(matrix.tocsc())
    except RuntimeError as e:
        raise SingularityError(f"sparse factorization failed: {e}") from e
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularityError("sparse factorization produced non-finite values")
    residual = _relative_residual(matrix, x, rhs)
    history = [residual]
    steps = 0
    while residual > tol and steps < REFINEMENT_STEPS:
        x = x + lu.solve(rhs - matrix @ x)
        residual = _relative_residual(matrix, x, rhs)
        history.append(residual)
        steps += 1
    return x, steps, residual, history


def _solve_iterative(matrix: sp.csr_matrix, rhs: np.ndarray, tol: float):
    settings = get_settings()
    csc = matrix.tocsc()
    try:
        ilu = spilu(csc, drop_tol=settings.ilu_drop_tol, fill_factor=settings.ilu_fill_factor)
    except RuntimeError as e:
        raise SingularityError(f"incomplete factorization failed: {e}") from e
    precond = LinearOperator(csc.shape, ilu.solve)

    history: List[float] = []
    restart = settings.gmres_restart
    x, info = gmres(
        csc,
        rhs,
        M=precond,
        rtol=tol,
        atol=0.0,
        restart=restart,
        maxiter=math.ceil(settings.gmres_max_iterations / restart),
        callback=history.append,
        callback_type="pr_norm",
    )
    residual = _relative_residual(matrix, x, rhs)
    if info != 0 or residual > 10.0 * tol:
        raise ConvergenceError(
            f"GMRES stopped after {len(history)} iterations with residual {residual:.3e}",
            history,
        )
    return x, len(history), residual, history


def solve(
    system: CondensedSystem,
    method: Optional[str] = None,
    tol: Optional[float] = None,
) -> Solution:
    """Solve S U^ = G and recover the interior DOFs."""
    settings = get_settings()
    method = method or settings.solver_method
    tol = settings.solver_tol if tol is None else tol
    if method not in ("direct", "iterative"):
        raise InvalidArgumentError(f"unknown solver method '{method}'")

    start = time.perf_counter()
    if system.size == 0:
        free, iterations, residual, history = np.zeros(0), 0, 0.0, []
    elif method == "direct":
        free, iterations, residual, history = _solve_direct(system.matrix, system.rhs, tol)
    else:
        free, iterations, residual, history = _solve_iterative(system.matrix, system.rhs, tol)

    if residual > tol:
        logger.warning(f"Skeleton residual {residual:.3e} above tolerance {tol:.1e}")

    trace = system.expand(free)
    interior = system.recover(trace)
    seconds = time.perf_counter() - start

    report = SolverReport(
        method=method,
        size=system.size,
        iterations=iterations,
        residual=residual,
        seconds=seconds,
        history=history,
    )
    logger.info(
        f"Solved {system.size} trace DOFs ({method}): residual {residual:.2e}, "
        f"{iterations} iterations, {seconds:.3f}s"
    )
    return Solution(system=system, trace=trace, interior=interior, report=report)
