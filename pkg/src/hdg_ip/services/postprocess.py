"""
HDG-IP Solver - Post-processing

Handles:
- L2 and energy-type errors against exact solutions (elementwise and global)
- Energy norm of composite discrete functions
- Estimated convergence rates and convergence tables
- Face-jump refinement indicator
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from hdg_ip.errors import ConfigurationError, InvalidArgumentError
from hdg_ip.services.fespace import FeSpace
from hdg_ip.services.mesh import BoundaryTag
from hdg_ip.services.model import ProblemSpec
from hdg_ip.services.solver import Solution

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "test",
    "scheme",
    "stabilization",
    "k",
    "h_inv",
    "l2_error",
    "ecr",
    "energy_error",
    "dofs",
    "solve_seconds",
]


class ConvergenceRecord(BaseModel):
    """One row of a convergence study."""

    test: str
    scheme: str
    stabilization: str
    k: int
    level: str = Field(description="Mesh level label: n, mesh file stem or adaptive cycle")
    h: float = Field(description="1/n for structured meshes, max element diameter otherwise")
    l2_error: float = Field(ge=0)
    energy_error: Optional[float] = Field(default=None, ge=0)
    ecr: Optional[float] = Field(default=None, description="Rate against the previous level")
    dofs: int
    solve_seconds: float

    @property
    def h_inv(self) -> float:
        return 1.0 / self.h


# ============================================================================
# Errors
# ============================================================================


def l2_error_cells(solution: Solution, problem: ProblemSpec) -> np.ndarray:
    """Elementwise ||u - u_h||_{0,E} with exactness 2k + 4 (+ boost)."""
    exact = problem.require_exact()
    space = solution.space
    exactness = 2 * space.k + 4 + problem.quadrature_boost
    out = np.empty(space.mesh.n_elements)
    for e in range(space.mesh.n_elements):
        data = space.sample(e, exactness)
        diff = exact(data.points, data.region) - data.phi @ solution.element_coeffs(e)
        out[e] = math.sqrt(max(float(data.weights @ diff**2), 0.0))
    return out


def l2_error(solution: Solution, problem: ProblemSpec) -> float:
    """||u - u_h||_{0,Omega}."""
    cells = l2_error_cells(solution, problem)
    return float(math.sqrt(float(cells @ cells)))


def energy_error(solution: Solution, problem: ProblemSpec) -> float:
    """
    Broken energy-type error: kappa-weighted gradient error, reaction-weighted
    L2 error and the penalty-weighted HDG jump of the discrete solution.
    """
    exact = problem.require_exact()
    grad_exact = problem.exact_gradient
    space = solution.space
    penalties = solution.system.penalties
    exactness = 2 * space.k + 4 + problem.quadrature_boost
    total = 0.0
    for e in range(space.mesh.n_elements):
        coeffs = solution.element_coeffs(e)
        data = space.sample(e, exactness)
        diff = exact(data.points, data.region) - data.phi @ coeffs
        mu = np.abs(problem.mu_star(data.points, data.region))
        total += float(data.weights @ (mu * diff**2))
        if grad_exact is not None:
            gdiff = grad_exact(data.points, data.region) - np.einsum("qbd,b->qd", data.grad, coeffs)
            kappa = problem.kappa(data.points, data.region)
            total += float(data.weights @ np.einsum("qi,qij,qj->q", gdiff, kappa, gdiff))
        for side in space.sides(e):
            jump = side.phi @ coeffs - side.psi @ solution.face_coeffs(side.face)
            tau = penalties.side(e, side.local_face).tau
            total += float(side.weights @ (tau * jump**2))
    return math.sqrt(max(total, 0.0))


def energy_norm(
    interior: np.ndarray,
    trace: np.ndarray,
    space: FeSpace,
    problem: ProblemSpec,
    tau0: float,
    mu0: float,
) -> float:
    """
    |||v|||^2 = ||kappa^1/2 grad v||^2 + mu_0 ||v||^2 + 1/2 ||(beta.n)^1/2 v^||^2_Gamma+
                + tau_0 sum_E ||v - v^||^2_dE
    """
    if not (0 < tau0 < math.inf):
        raise ConfigurationError(f"energy norm needs a finite tau_0 > 0, got {tau0:.3e}", field="tau0")
    if mu0 <= 0:
        raise ConfigurationError(f"energy norm needs mu_0 > 0, got {mu0:.3e}", field="mu0")
    mesh = space.mesh
    total = 0.0
    for e in range(mesh.n_elements):
        coeffs = interior[space.interior_dofs(e)]
        data = space.element(e)
        grad = np.einsum("qbd,b->qd", data.grad, coeffs)
        kappa = problem.kappa(data.points, data.region)
        total += float(data.weights @ np.einsum("qi,qij,qj->q", grad, kappa, grad))
        total += mu0 * float(data.weights @ (data.phi @ coeffs) ** 2)
        for side in space.sides(e):
            vhat = side.psi @ trace[space.trace_dofs(side.face)]
            jump = side.phi @ coeffs - vhat
            total += tau0 * float(side.weights @ jump**2)
            if mesh.boundary_tags[side.face] == BoundaryTag.GAMMA_PLUS:
                bn = np.einsum("qi,qi->q", problem.beta(side.points, data.region), side.normals)
                total += 0.5 * float(side.weights @ (np.maximum(bn, 0.0) * vhat**2))
    return math.sqrt(max(total, 0.0))


def ecr(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    """Estimated convergence rate log(e_c / e_f) / log(h_c / h_f)."""
    if min(e_coarse, e_fine, h_coarse, h_fine) <= 0:
        raise InvalidArgumentError("errors and mesh sizes must be positive")
    if not h_fine < h_coarse:
        raise InvalidArgumentError("h_fine must be smaller than h_coarse")
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def jump_indicator(solution: Solution) -> np.ndarray:
    """eta_E = sum over faces of h_F ||u_h - u^_h||^2_F."""
    space = solution.space
    mesh = space.mesh
    eta = np.zeros(mesh.n_elements)
    for e in range(mesh.n_elements):
        coeffs = solution.element_coeffs(e)
        for side in space.sides(e):
            jump = side.phi @ coeffs - side.psi @ solution.face_coeffs(side.face)
            eta[e] += mesh.face_lengths[side.face] * float(side.weights @ jump**2)
    return eta


# ============================================================================
# Tables
# ============================================================================


def fill_rates(records: Sequence[ConvergenceRecord]) -> List[ConvergenceRecord]:
    """ECR of each record against the previous one in its (test, scheme, stab, k) group."""
    out: List[ConvergenceRecord] = []
    previous = {}
    for rec in records:
        key = (rec.test, rec.scheme, rec.stabilization, rec.k)
        prev = previous.get(key)
        rate = None
        if prev is not None and prev.h > rec.h and prev.l2_error > 0 and rec.l2_error > 0:
            rate = ecr(prev.l2_error, rec.l2_error, prev.h, rec.h)
        out.append(rec.model_copy(update={"ecr": rate}))
        previous[key] = rec
    return out


def convergence_table(records: Sequence[ConvergenceRecord]) -> pd.DataFrame:
    """Records as a DataFrame with the convergence CSV columns."""
    rows = [
        {
            "test": r.test,
            "scheme": r.scheme,
            "stabilization": r.stabilization,
            "k": r.k,
            "h_inv": r.h_inv,
            "l2_error": r.l2_error,
            "ecr": r.ecr,
            "energy_error": r.energy_error,
            "dofs": r.dofs,
            "solve_seconds": r.solve_seconds,
        }
        for r in fill_rates(records)
    ]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)
