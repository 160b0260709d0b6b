"""
HDG-IP Solver - Finite Element Spaces

Handles:
- Broken element space V_h: P_k on triangles, Q_k on quadrilaterals, with the
  modal basis orthonormalised against each element's mass matrix
- Skeleton trace space M_h: degree-k polynomials per face, orthonormal in the
  face's own parameterisation
- Dirichlet constraints: trace DOFs on Gamma- faces hold projected data
- Element and face quadrature data, discrete trace constants
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from hdg_ip.errors import InvalidArgumentError
from hdg_ip.services.basis import MAX_DEGREE, basis_dimension, eval_basis, face_basis
from hdg_ip.services.mesh import BoundaryTag, Mesh, Region
from hdg_ip.services.model import Field, ProblemSpec
from hdg_ip.services.quadrature import quadrature

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ElementData:
    """Quadrature data of one element in the orthonormal basis."""

    element: int
    shape: str
    region: Region
    points: np.ndarray  # (nq, 2) physical
    weights: np.ndarray  # (nq,) physical, w |det J|
    phi: np.ndarray  # (nq, nb)
    grad: np.ndarray  # (nq, nb, 2) physical gradients
    transform: np.ndarray  # modal -> orthonormal


@dataclass(frozen=True)
class FaceSide:
    """Quadrature data of one (element, face) pair, sampled in face order."""

    element: int
    local_face: int
    face: int
    sign: int
    points: np.ndarray  # (nq, 2)
    weights: np.ndarray  # (nq,) physical
    normals: np.ndarray  # (nq, 2) outward from the element
    phi: np.ndarray  # (nq, nb) element basis
    grad: np.ndarray  # (nq, nb, 2)
    psi: np.ndarray  # (nq, k + 1) trace basis


class FeSpace:
    """Composite space V_h x M_h on a classified mesh."""

    def __init__(self, mesh: Mesh, k: int, quadrature_boost: int = 0):
        if not 1 <= k <= MAX_DEGREE:
            raise InvalidArgumentError(f"degree must lie in 1..{MAX_DEGREE}, got {k}")
        if not mesh.classified:
            raise InvalidArgumentError("mesh must be classified before building a space")
        self.mesh = mesh
        self.k = k
        self.quadrature_boost = quadrature_boost
        self.element_exactness = 2 * k + 2 + quadrature_boost
        self.face_exactness = 2 * k + 2 + quadrature_boost

        self.n_local = np.array([basis_dimension(mesh.shape(e), k) for e in range(mesh.n_elements)])
        self.element_offsets = np.concatenate([[0], np.cumsum(self.n_local)])
        self.n_trace = k + 1

        self.constrained = mesh.boundary_tags == BoundaryTag.GAMMA_MINUS
        self.free_index = -np.ones(mesh.n_faces, dtype=np.int64)
        free = np.flatnonzero(~self.constrained)
        self.free_index[free] = np.arange(len(free))
        self.n_free_faces = len(free)

        self._elements: Dict[int, ElementData] = {}
        self._sides: Dict[Tuple[int, int], FaceSide] = {}
        logger.debug(
            f"FeSpace k={k}: {self.n_interior_dofs} interior DOFs, "
            f"{self.n_free_dofs} free trace DOFs"
        )

    # ------------------------------------------------------------------
    # DOF counts
    # ------------------------------------------------------------------

    @property
    def n_interior_dofs(self) -> int:
        return int(self.element_offsets[-1])

    @property
    def n_trace_dofs(self) -> int:
        return self.mesh.n_faces * self.n_trace

    @property
    def n_free_dofs(self) -> int:
        return self.n_free_faces * self.n_trace

    def interior_dofs(self, e: int) -> slice:
        return slice(int(self.element_offsets[e]), int(self.element_offsets[e + 1]))

    def trace_dofs(self, f: int) -> slice:
        return slice(f * self.n_trace, (f + 1) * self.n_trace)

    # ------------------------------------------------------------------
    # Quadrature data
    # ------------------------------------------------------------------

    def element(self, e: int) -> ElementData:
        data = self._elements.get(e)
        if data is None:
            data = self._build_element(e)
            self._elements[e] = data
        return data

    def sample(self, e: int, exactness: int) -> ElementData:
        """Element data on a rule of the given exactness (not cached)."""
        return self._build_element(e, exactness, self.element(e).transform)

    def _build_element(
        self, e: int, exactness: Optional[int] = None, transform: Optional[np.ndarray] = None
    ) -> ElementData:
        mesh = self.mesh
        shape = mesh.shape(e)
        rule = quadrature(shape, exactness or self.element_exactness)
        points, jac = mesh.element_maps[e](rule.points)
        det = np.linalg.det(jac)
        if np.any(det <= 0):
            raise InvalidArgumentError(f"element {e}: mapping is not orientation preserving")
        weights = rule.weights * det
        values, grads = eval_basis(shape, self.k, rule.points, kind="modal")

        if transform is None:
            mass = values.T @ (weights[:, None] * values)
            chol = np.linalg.cholesky(mass)
            transform = np.linalg.inv(chol).T

        jinv = np.linalg.inv(jac)
        grad_phys = np.einsum("qbj,qji->qbi", grads, jinv)
        return ElementData(
            element=e,
            shape=shape,
            region=Region(int(mesh.regions[e])),
            points=points,
            weights=weights,
            phi=values @ transform,
            grad=np.einsum("qmd,mn->qnd", grad_phys, transform),
            transform=transform,
        )

    def side(self, e: int, j: int) -> FaceSide:
        key = (e, j)
        data = self._sides.get(key)
        if data is None:
            data = self._build_side(e, j)
            self._sides[key] = data
        return data

    def _build_side(self, e: int, j: int) -> FaceSide:
        mesh = self.mesh
        f = int(mesh.element_faces[e, j])
        sign = mesh.face_sign(e, f)
        rule = quadrature("segment", self.face_exactness)
        s_glob = rule.points[:, 0]
        ref, pts, normals, speed = mesh.element_maps[e].face(j, sign * s_glob)

        shape = mesh.shape(e)
        values, grads = eval_basis(shape, self.k, ref, kind="modal")
        _, jac = mesh.element_maps[e](ref)
        grad_phys = np.einsum("qbj,qji->qbi", grads, np.linalg.inv(jac))
        transform = self.element(e).transform

        psi = face_basis(self.k, s_glob) / np.sqrt(0.5 * mesh.face_lengths[f])
        return FaceSide(
            element=e,
            local_face=j,
            face=f,
            sign=sign,
            points=pts,
            weights=rule.weights * speed,
            normals=normals,
            phi=values @ transform,
            grad=np.einsum("qmd,mn->qnd", grad_phys, transform),
            psi=psi,
        )

    def sides(self, e: int):
        return [self.side(e, j) for j in range(int(self.mesh.nverts[e]))]

    # ------------------------------------------------------------------
    # Evaluation helpers
    # ------------------------------------------------------------------

    def evaluate(self, e: int, coeffs: np.ndarray, ref_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Physical points and values of a local field at reference points."""
        values, _ = eval_basis(self.mesh.shape(e), self.k, ref_points, kind="modal")
        points, _ = self.mesh.element_maps[e](ref_points)
        return points, values @ (self.element(e).transform @ coeffs)

    def project_dirichlet(self, f: int, datum: Field, region: Optional[Region] = None) -> np.ndarray:
        """L2 projection of a datum onto the degree-k polynomials of face f."""
        e = int(self.mesh.face_elements[f, 0])
        side = self.side(e, int(self.mesh.face_local[f, 0]))
        if region is None:
            region = Region(int(self.mesh.regions[e]))
        values = np.asarray(datum(side.points, region), dtype=float)
        return side.psi.T @ (side.weights * values)

    def dirichlet_values(self, problem: ProblemSpec) -> np.ndarray:
        """Trace coefficients on constrained faces (zeros elsewhere), shape (nf, k + 1)."""
        out = np.zeros((self.mesh.n_faces, self.n_trace))
        for f in np.flatnonzero(self.constrained):
            out[f] = self.project_dirichlet(int(f), problem.dirichlet)
        return out

    def trace_constant_sq(self, e: int, degree: Optional[int] = None) -> float:
        """
        C_tr^2 with ||v||_F <= C_tr h_E^(-1/2) ||v||_E for v of the given degree
        (P_degree on triangles, Q_degree on quads); defaults to the local space.
        """
        mesh = self.mesh
        d = self.k if degree is None else degree
        c_d = (d + 1) * (d + 2) / 2.0 if mesh.shape(e) == "tri" else float((d + 1) ** 2)
        longest = float(mesh.face_lengths[mesh.local_faces(e)].max())
        return c_d * longest * mesh.diameters[e] / mesh.areas[e]

    def flux_trace_constant_sq(self, e: int) -> float:
        """
        Trace constant for the diffusive flux kappa grad v . n of v in the local space.

        On triangles grad v lies in P_{k-1}. On quads the normal derivative has
        degree k - 1 across the face, which bounds the flux exactly on rectangles
        with isotropic kappa.
        """
        return self.trace_constant_sq(e, self.k - 1)

    def coefficient_bounds(self, problem: ProblemSpec) -> float:
        """Validate coefficients at all element quadrature points; returns mu_0."""
        mu0 = np.inf
        for e in range(self.mesh.n_elements):
            data = self.element(e)
            mu0 = min(mu0, problem.check_coefficients(data.points, data.region))
        return float(mu0)
