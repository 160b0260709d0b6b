"""
HDG-IP Solver - Assembly and Static Condensation

Handles:
- Element-local blocks of the H-IP bilinear form
      (kappa grad u, grad v) - <kappa grad u.n, v - v^> - eps <kappa grad v.n, u - u^>
    - (beta u, grad v) + (mu u, v) + <(beta.n) u, v - v^> + <tau (u - u^), v - v^>
    + <(beta.n) u^, v^> on Gamma+
- Schur complement on the skeleton and elementwise recovery data
- Global condensed system with Dirichlet traces lifted into the right-hand side
- The uncondensed coupled system, used to verify condensation
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from hdg_ip.config import get_settings
from hdg_ip.errors import LocalSolvabilityError
from hdg_ip.services.fespace import FeSpace
from hdg_ip.services.mesh import BoundaryTag
from hdg_ip.services.model import ProblemSpec
from hdg_ip.services.stabilization import PenaltyCalculator, StabilizationConfig

logger = logging.getLogger(__name__)

# Relative size below which face coefficients count as zero for inert faces
INERT_TOL = 1e-10


@dataclass
class LocalBlocks:
    """Element blocks; trace side ordered by local face then face DOF."""

    element: int
    A_uu: np.ndarray
    A_uh: np.ndarray
    A_hu: np.ndarray
    A_hh: np.ndarray
    F_u: np.ndarray
    F_h: np.ndarray
    trace_dofs: np.ndarray  # global (unconstrained numbering over all faces)


@dataclass
class ElementCondensation:
    """Schur block and the products needed to recover interior DOFs."""

    element: int
    S: np.ndarray
    G: np.ndarray
    Z: np.ndarray  # A_uu^-1 A_uh
    z: np.ndarray  # A_uu^-1 F_u
    trace_dofs: np.ndarray


@dataclass
class CondensedSystem:
    """Skeleton system over the free trace DOFs."""

    space: FeSpace
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet: np.ndarray  # full trace vector, zero on free faces
    free_dofs: np.ndarray  # full trace index of every free DOF
    recovery: List[ElementCondensation]
    tau0: float
    inert_faces: np.ndarray
    penalties: PenaltyCalculator

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def expand(self, free_values: np.ndarray) -> np.ndarray:
        """Full trace vector from free values plus Dirichlet data."""
        full = self.dirichlet.copy()
        full[self.free_dofs] = free_values
        return full

    def recover(self, trace: np.ndarray) -> np.ndarray:
        """Interior DOFs U_E = A_uu^-1 (F_u - A_uh U^_E) for every element."""
        out = np.empty(self.space.n_interior_dofs)
        for rec in self.recovery:
            out[self.space.interior_dofs(rec.element)] = rec.z - rec.Z @ trace[rec.trace_dofs]
        return out


@dataclass
class FullSystem:
    """Coupled system over (U, free U^)."""

    space: FeSpace
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet: np.ndarray
    free_dofs: np.ndarray

    @property
    def n_interior(self) -> int:
        return self.space.n_interior_dofs

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Interior DOFs and the full trace vector of a solution."""
        trace = self.dirichlet.copy()
        trace[self.free_dofs] = x[self.n_interior :]
        return x[: self.n_interior], trace


# ============================================================================
# Local blocks
# ============================================================================


def _inert_faces(space: FeSpace, penalties: PenaltyCalculator) -> np.ndarray:
    """Faces whose trace equation carries no diffusion, advection or penalty."""
    mesh = space.mesh
    flags = np.ones(mesh.n_faces, dtype=bool)
    scale = 0.0
    for e in range(mesh.n_elements):
        for j in range(int(mesh.nverts[e])):
            side = penalties.side(e, j)
            scale = max(scale, float(side.tau.max()), float(np.abs(side.beta_n).max()))
    cut = INERT_TOL * max(scale, 1e-300)
    for e in range(mesh.n_elements):
        for j in range(int(mesh.nverts[e])):
            side = penalties.side(e, j)
            f = int(mesh.element_faces[e, j])
            if (
                side.kappa_n.max() > cut
                or side.tau.max() > cut
                or np.abs(side.beta_n).max() > cut
            ):
                flags[f] = False
    flags[space.constrained] = False
    return flags


def local_blocks(
    e: int,
    space: FeSpace,
    problem: ProblemSpec,
    config: StabilizationConfig,
    penalties: PenaltyCalculator,
    inert: Optional[np.ndarray] = None,
) -> LocalBlocks:
    """Element-local matrices and loads of the H-IP form."""
    mesh = space.mesh
    data = space.element(e)
    region = data.region
    w = data.weights
    eps = float(config.epsilon)
    nt = space.n_trace

    kappa = problem.kappa(data.points, region)
    beta = problem.beta(data.points, region)
    mu = problem.gamma(data.points, region)
    f_vals = problem.source(data.points, region)

    kgrad = np.einsum("qij,qbj->qbi", kappa, data.grad)
    bgrad = np.einsum("qd,qbd->qb", beta, data.grad)
    A_uu = np.einsum("q,qad,qbd->ab", w, data.grad, kgrad)
    A_uu -= bgrad.T @ (w[:, None] * data.phi)
    A_uu += data.phi.T @ ((w * mu)[:, None] * data.phi)
    F_u = data.phi.T @ (w * f_vals)

    faces = mesh.local_faces(e)
    nfl = len(faces)
    A_uh = np.zeros((len(F_u), nfl * nt))
    A_hu = np.zeros((nfl * nt, len(F_u)))
    A_hh = np.zeros((nfl * nt, nfl * nt))
    trace_dofs = np.empty(nfl * nt, dtype=np.int64)

    for j, f in enumerate(faces):
        side = space.side(e, j)
        pen = penalties.side(e, j)
        loc = slice(j * nt, (j + 1) * nt)
        trace_dofs[loc] = np.arange(f * nt, (f + 1) * nt)

        wf = side.weights
        kappa_f = problem.kappa(side.points, region)
        flux = np.einsum("qd,qde,qbe->qb", side.normals, kappa_f, side.grad)
        phi, psi = side.phi, side.psi
        bn, tau = pen.beta_n, pen.tau

        A_uu -= phi.T @ (wf[:, None] * flux)
        A_uu -= eps * (flux.T @ (wf[:, None] * phi))
        A_uu += phi.T @ ((wf * (bn + tau))[:, None] * phi)

        A_uh[:, loc] += eps * (flux.T @ (wf[:, None] * psi))
        A_uh[:, loc] -= phi.T @ ((wf * tau)[:, None] * psi)

        A_hu[loc, :] += psi.T @ (wf[:, None] * flux)
        A_hu[loc, :] -= psi.T @ ((wf * (bn + tau))[:, None] * phi)

        A_hh[loc, loc] += psi.T @ ((wf * tau)[:, None] * psi)
        if mesh.boundary_tags[f] == BoundaryTag.GAMMA_PLUS:
            A_hh[loc, loc] += psi.T @ ((wf * bn)[:, None] * psi)

        if inert is not None and inert[f]:
            # trace equals the mean of the adjacent interior traces
            n_sides = 1 if mesh.face_elements[f, 1] < 0 else 2
            A_hh[loc, loc] += psi.T @ (wf[:, None] * psi) / n_sides
            A_hu[loc, :] -= psi.T @ (wf[:, None] * phi) / n_sides

    return LocalBlocks(
        element=e,
        A_uu=A_uu,
        A_uh=A_uh,
        A_hu=A_hu,
        A_hh=A_hh,
        F_u=F_u,
        F_h=np.zeros(nfl * nt),
        trace_dofs=trace_dofs,
    )


def condense(blocks: LocalBlocks, condition_limit: Optional[float] = None) -> ElementCondensation:
    """Eliminate interior DOFs: S = A_hh - A_hu A_uu^-1 A_uh, G = F_h - A_hu A_uu^-1 F_u."""
    if condition_limit is None:
        condition_limit = get_settings().condition_limit
    cond = np.linalg.cond(blocks.A_uu)
    if not np.isfinite(cond) or cond > condition_limit:
        raise LocalSolvabilityError(f"interior block condition number {cond:.3e}", blocks.element)
    lu = sla.lu_factor(blocks.A_uu)
    Z = sla.lu_solve(lu, blocks.A_uh)
    z = sla.lu_solve(lu, blocks.F_u)
    return ElementCondensation(
        element=blocks.element,
        S=blocks.A_hh - blocks.A_hu @ Z,
        G=blocks.F_h - blocks.A_hu @ z,
        Z=Z,
        z=z,
        trace_dofs=blocks.trace_dofs,
    )


# ============================================================================
# Global assembly
# ============================================================================


def _prepare(
    space: FeSpace, problem: ProblemSpec, config: StabilizationConfig
) -> Tuple[PenaltyCalculator, float, np.ndarray, np.ndarray, np.ndarray]:
    penalties = PenaltyCalculator(space, problem, config)
    tau0 = penalties.check()
    inert = _inert_faces(space, penalties)
    if inert.any():
        logger.debug(f"{int(inert.sum())} inert faces closed by the trace identity")
    dirichlet = space.dirichlet_values(problem).ravel()
    free_map = -np.ones(space.n_trace_dofs, dtype=np.int64)
    free_faces = np.flatnonzero(~space.constrained)
    nt = space.n_trace
    free_dofs = (free_faces[:, None] * nt + np.arange(nt)[None, :]).ravel()
    free_map[free_dofs] = np.arange(len(free_dofs))
    return penalties, tau0, inert, dirichlet, free_map


def _collect(results: list) -> list:
    failures = [r for r in results if isinstance(r, LocalSolvabilityError)]
    if failures:
        logger.error(f"Local solvability failed on {len(failures)} element(s)")
        first = failures[0]
        raise LocalSolvabilityError(
            f"{first.reason} ({len(failures)} element(s) failed)", first.element
        )
    return results


def assemble(
    space: FeSpace,
    problem: ProblemSpec,
    config: StabilizationConfig,
) -> CondensedSystem:
    """Assemble the condensed skeleton system."""
    settings = get_settings()
    penalties, tau0, inert, dirichlet, free_map = _prepare(space, problem, config)

    def work(e: int):
        try:
            blocks = local_blocks(e, space, problem, config, penalties, inert)
            return condense(blocks, settings.condition_limit)
        except LocalSolvabilityError as exc:
            return exc

    results = _collect([work(e) for e in range(space.mesh.n_elements)])

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    rhs = np.zeros(int((free_map >= 0).sum()))
    for rec in results:
        gdofs = free_map[rec.trace_dofs]
        free = gdofs >= 0
        fixed = ~free
        lifted = rec.G[free] - rec.S[np.ix_(free, fixed)] @ dirichlet[rec.trace_dofs[fixed]]
        np.add.at(rhs, gdofs[free], lifted)
        r, c = np.meshgrid(gdofs[free], gdofs[free], indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(rec.S[np.ix_(free, free)].ravel())

    n = len(rhs)
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    logger.info(
        f"Assembled condensed system: {n} trace DOFs, {matrix.nnz} nonzeros, "
        f"{space.mesh.n_elements} elements"
    )
    return CondensedSystem(
        space=space,
        matrix=matrix,
        rhs=rhs,
        dirichlet=dirichlet,
        free_dofs=np.flatnonzero(free_map >= 0),
        recovery=results,
        tau0=tau0,
        inert_faces=np.flatnonzero(inert),
        penalties=penalties,
    )


def assemble_full(
    space: FeSpace,
    problem: ProblemSpec,
    config: StabilizationConfig,
) -> FullSystem:
    """Assemble the coupled (U, U^) system without elimination."""
    penalties, _, inert, dirichlet, free_map = _prepare(space, problem, config)
    n_int = space.n_interior_dofs
    n_free = int((free_map >= 0).sum())
    n = n_int + n_free

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    rhs = np.zeros(n)
    for e in range(space.mesh.n_elements):
        blocks = local_blocks(e, space, problem, config, penalties, inert)
        udofs = np.arange(space.element_offsets[e], space.element_offsets[e + 1])
        tdofs = free_map[blocks.trace_dofs]
        free = tdofs >= 0
        g = dirichlet[blocks.trace_dofs[~free]]

        # interior rows
        row_ids = np.concatenate([udofs, n_int + tdofs[free]])
        local = np.block([[blocks.A_uu, blocks.A_uh[:, free]], [blocks.A_hu[free], blocks.A_hh[np.ix_(free, free)]]])
        r, c = np.meshgrid(row_ids, row_ids, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(local.ravel())

        rhs[udofs] += blocks.F_u - blocks.A_uh[:, ~free] @ g
        np.add.at(
            rhs,
            n_int + tdofs[free],
            blocks.F_h[free] - blocks.A_hh[np.ix_(free, ~free)] @ g,
        )

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    logger.info(f"Assembled full system: {n} DOFs ({n_int} interior, {n_free} trace)")
    return FullSystem(
        space=space,
        matrix=matrix,
        rhs=rhs,
        dirichlet=dirichlet,
        free_dofs=np.flatnonzero(free_map >= 0),
    )


def apply_bilinear(system: FullSystem, interior: np.ndarray, trace_free: np.ndarray) -> float:
    """a_h(v, v) for a composite function with zero trace on Gamma-."""
    x = np.concatenate([interior, trace_free])
    return float(x @ (system.matrix @ x))
