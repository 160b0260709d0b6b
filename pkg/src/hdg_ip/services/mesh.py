"""
HDG-IP Solver - Mesh Service

Handles:
- Hybrid triangle/quadrilateral meshes with face connectivity
- Structured square meshes and the holed-square (annulus-like) family
- Elliptic/hyperbolic region tags
- Fichera boundary classification (Gamma-, Gamma+) and interface parts (I-, I+)
"""

import logging
from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import cached_property
from typing import TYPE_CHECKING, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from hdg_ip.config import get_settings
from hdg_ip.errors import (
    ClassificationError,
    CoefficientError,
    InvalidArgumentError,
    MeshValidationError,
)
from hdg_ip.services.geometry import Circle, ElementMap, edge_curve, signed_area
from hdg_ip.services.quadrature import quadrature

if TYPE_CHECKING:
    from hdg_ip.services.model import ProblemSpec

logger = logging.getLogger(__name__)

EdgeKey = Tuple[int, int]


class Region(IntEnum):
    ELLIPTIC = 0
    HYPERBOLIC = 1


class BoundaryTag(IntEnum):
    NONE = 0
    GAMMA_MINUS = 1
    GAMMA_PLUS = 2


class InterfaceTag(IntEnum):
    NONE = 0
    I_MINUS = 1
    I_PLUS = 2


REGION_NAMES: Dict[str, Region] = {"ell": Region.ELLIPTIC, "hyp": Region.HYPERBOLIC}

# Sample rule used when classifying faces
_CLASSIFY_EXACTNESS = 11


def edge_key(a: int, b: int) -> EdgeKey:
    return (a, b) if a < b else (b, a)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Immutable 2D hybrid mesh.

    Elements are stored counter-clockwise in ``cells`` (padded with -1 for
    triangles). Face f connects ``faces[f]`` and is oriented as seen from its
    first element ``face_elements[f, 0]``; the second element (or -1 on the
    boundary) sees it reversed.
    """

    vertices: np.ndarray
    cells: np.ndarray
    nverts: np.ndarray
    regions: np.ndarray
    faces: np.ndarray
    face_elements: np.ndarray
    face_local: np.ndarray
    element_faces: np.ndarray
    circles: Mapping[EdgeKey, Circle] = field(default_factory=dict)
    boundary_tags: Optional[np.ndarray] = None
    interface_tags: Optional[np.ndarray] = None
    h_inv: Optional[float] = None

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_cells(
        cls,
        vertices: np.ndarray,
        cells: Sequence[Sequence[int]],
        regions: Sequence[int],
        circles: Optional[Mapping[EdgeKey, Circle]] = None,
        h_inv: Optional[float] = None,
        face_tags: Optional[Mapping[EdgeKey, Tuple[int, int]]] = None,
    ) -> "Mesh":
        """Build connectivity from element vertex lists and validate it."""
        vertices = np.array(vertices, dtype=float).reshape(-1, 2)
        n_el = len(cells)
        if n_el == 0:
            raise MeshValidationError("mesh has no elements")
        if len(regions) != n_el:
            raise MeshValidationError("one region tag per element is required")

        table = -np.ones((n_el, 4), dtype=np.int64)
        nverts = np.zeros(n_el, dtype=np.int64)
        seen: Dict[Tuple[int, ...], int] = {}
        for e, cell in enumerate(cells):
            ids = [int(v) for v in cell]
            if len(ids) not in (3, 4):
                raise MeshValidationError(f"element {e}: expected 3 or 4 vertices, got {len(ids)}")
            if len(set(ids)) != len(ids):
                raise MeshValidationError(f"element {e}: repeated vertex")
            if min(ids) < 0 or max(ids) >= len(vertices):
                raise MeshValidationError(f"element {e}: vertex index out of range")
            area = signed_area(vertices[ids])
            if abs(area) <= 1e-14:
                raise MeshValidationError(f"element {e}: zero area")
            if area < 0:
                logger.debug(f"Reorienting clockwise element {e}")
                ids = ids[::-1]
            key = tuple(sorted(ids))
            if key in seen:
                raise MeshValidationError(f"element {e} duplicates element {seen[key]}")
            seen[key] = e
            table[e, : len(ids)] = ids
            nverts[e] = len(ids)

        face_index: Dict[EdgeKey, int] = {}
        faces: List[Tuple[int, int]] = []
        face_elements: List[List[int]] = []
        face_local: List[List[int]] = []
        element_faces = -np.ones((n_el, 4), dtype=np.int64)
        for e in range(n_el):
            nv = nverts[e]
            for j in range(nv):
                a, b = int(table[e, j]), int(table[e, (j + 1) % nv])
                key = edge_key(a, b)
                f = face_index.get(key)
                if f is None:
                    face_index[key] = len(faces)
                    element_faces[e, j] = len(faces)
                    faces.append((a, b))
                    face_elements.append([e, -1])
                    face_local.append([j, -1])
                    continue
                if face_elements[f][1] != -1:
                    raise MeshValidationError(f"face {key} is shared by more than two elements")
                if faces[f] != (b, a):
                    raise MeshValidationError(
                        f"elements {face_elements[f][0]} and {e} overlap across face {key}"
                    )
                face_elements[f][1] = e
                face_local[f][1] = j
                element_faces[e, j] = f

        circles = dict(circles or {})
        unknown = [key for key in circles if key not in face_index]
        if unknown:
            raise MeshValidationError(f"curved entries do not match any face: {unknown[:3]}")

        boundary_tags = interface_tags = None
        if face_tags:
            boundary_tags = np.zeros(len(faces), dtype=np.int8)
            interface_tags = np.zeros(len(faces), dtype=np.int8)
            for key, (btag, itag) in face_tags.items():
                f = face_index.get(key)
                if f is not None:
                    boundary_tags[f] = btag
                    interface_tags[f] = itag
            _frozen(boundary_tags)
            _frozen(interface_tags)

        mesh = cls(
            vertices=_frozen(vertices),
            cells=_frozen(table),
            nverts=_frozen(nverts),
            regions=_frozen(np.asarray(regions, dtype=np.int8)),
            faces=_frozen(np.asarray(faces, dtype=np.int64)),
            face_elements=_frozen(np.asarray(face_elements, dtype=np.int64)),
            face_local=_frozen(np.asarray(face_local, dtype=np.int64)),
            element_faces=_frozen(element_faces),
            circles=circles,
            boundary_tags=boundary_tags,
            interface_tags=interface_tags,
            h_inv=h_inv,
        )
        mesh._check_hanging_vertices()
        return mesh

    def _check_hanging_vertices(self) -> None:
        boundary = self.boundary_faces
        if len(boundary) == 0:
            return
        candidates = np.unique(self.faces[boundary].ravel())
        points = self.vertices[candidates]
        for f in boundary:
            if self.face_circle(f) is not None:
                continue
            a, b = self.vertices[self.faces[f]]
            d = b - a
            rel = points - a
            cross = d[0] * rel[:, 1] - d[1] * rel[:, 0]
            along = rel @ d
            length2 = float(d @ d)
            inside = (np.abs(cross) <= 1e-12 * length2) & (along > 1e-12 * length2) & (
                along < (1.0 - 1e-12) * length2
            )
            if np.any(inside):
                v = int(candidates[np.argmax(inside)])
                raise MeshValidationError(f"hanging vertex {v} on face {int(f)}")

    def with_tags(self, boundary_tags: np.ndarray, interface_tags: np.ndarray) -> "Mesh":
        return replace(
            self,
            boundary_tags=_frozen(np.asarray(boundary_tags, dtype=np.int8)),
            interface_tags=_frozen(np.asarray(interface_tags, dtype=np.int8)),
        )

    def with_regions(self, regions: Sequence[int]) -> "Mesh":
        return replace(self, regions=_frozen(np.asarray(regions, dtype=np.int8)))

    # ------------------------------------------------------------------
    # Topology
    # ------------------------------------------------------------------

    @property
    def n_elements(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def classified(self) -> bool:
        return self.boundary_tags is not None

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_elements[:, 1] < 0)

    @cached_property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_elements[:, 1] >= 0)

    @cached_property
    def interface_faces(self) -> np.ndarray:
        inner = self.interior_faces
        left = self.regions[self.face_elements[inner, 0]]
        right = self.regions[self.face_elements[inner, 1]]
        return inner[left != right]

    def shape(self, e: int) -> str:
        return "tri" if self.nverts[e] == 3 else "quad"

    def element_vertices(self, e: int) -> np.ndarray:
        return self.cells[e, : self.nverts[e]]

    def local_faces(self, e: int) -> np.ndarray:
        return self.element_faces[e, : self.nverts[e]]

    def face_circle(self, f: int) -> Optional[Circle]:
        a, b = self.faces[f]
        return self.circles.get(edge_key(int(a), int(b)))

    def face_sign(self, e: int, f: int) -> int:
        """+1 if element e owns the orientation of face f, -1 otherwise."""
        return 1 if self.face_elements[f, 0] == e else -1

    @property
    def eta0(self) -> int:
        """Maximum number of faces per element."""
        return int(self.nverts.max())

    @cached_property
    def element_maps(self) -> List[ElementMap]:
        maps = []
        for e in range(self.n_elements):
            ids = self.element_vertices(e)
            nv = len(ids)
            curves = [
                self.circles.get(edge_key(int(ids[j]), int(ids[(j + 1) % nv]))) for j in range(nv)
            ]
            maps.append(ElementMap(self.vertices[ids], curves))
        return maps

    # ------------------------------------------------------------------
    # Measures
    # ------------------------------------------------------------------

    @cached_property
    def areas(self) -> np.ndarray:
        out = np.empty(self.n_elements)
        for e, emap in enumerate(self.element_maps):
            if not emap.curved:
                out[e] = signed_area(emap.vertices)
                continue
            rule = quadrature(emap.shape, 12)
            _, jac = emap(rule.points)
            out[e] = float(rule.weights @ np.abs(np.linalg.det(jac)))
        return _frozen(out)

    @cached_property
    def diameters(self) -> np.ndarray:
        out = np.empty(self.n_elements)
        t = np.linspace(0.0, 1.0, 17)
        for e, emap in enumerate(self.element_maps):
            if emap.curved:
                pts = np.vstack(
                    [
                        edge_curve(
                            emap.vertices[j], emap.vertices[(j + 1) % emap.nv], emap.curves[j], t
                        )[0]
                        for j in range(emap.nv)
                    ]
                )
            else:
                pts = emap.vertices
            diff = pts[:, None, :] - pts[None, :, :]
            out[e] = float(np.sqrt((diff**2).sum(axis=2).max()))
        return _frozen(out)

    @cached_property
    def face_lengths(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        out = np.linalg.norm(b - a, axis=1)
        for key, circle in self.circles.items():
            f = self._face_of(key)
            _, sweep = circle.arc(self.vertices[key[0]], self.vertices[key[1]])
            out[f] = circle.radius * abs(sweep)
        return _frozen(out)

    def _face_of(self, key: EdgeKey) -> int:
        return self._face_lookup[key]

    @cached_property
    def _face_lookup(self) -> Dict[EdgeKey, int]:
        return {edge_key(int(a), int(b)): f for f, (a, b) in enumerate(self.faces)}

    @property
    def h_max(self) -> float:
        return float(self.diameters.max())

    @property
    def h(self) -> float:
        """Mesh size: 1/n for structured meshes, max element diameter otherwise."""
        return 1.0 / self.h_inv if self.h_inv else self.h_max

    def centroids(self) -> np.ndarray:
        return np.array([self.vertices[self.element_vertices(e)].mean(axis=0) for e in range(self.n_elements)])

    def summary(self) -> Dict[str, int]:
        return {
            "elements": self.n_elements,
            "faces": self.n_faces,
            "boundary_faces": int(len(self.boundary_faces)),
            "interface_faces": int(len(self.interface_faces)),
            "curved_faces": len(self.circles),
        }


# ============================================================================
# Generators
# ============================================================================


def generate_structured(
    nx: int,
    ny: int,
    bbox: Sequence[float] = (0.0, 0.0, 1.0, 1.0),
    shape: str = "quad",
    region: str = "ell",
) -> Mesh:
    """
    Structured nx x ny grid on bbox = (xmin, ymin, xmax, ymax).

    Triangles split every cell along its (+1, +1) diagonal.
    """
    if nx < 1 or ny < 1:
        raise InvalidArgumentError("nx and ny must be positive")
    if shape not in ("tri", "quad"):
        raise InvalidArgumentError(f"unknown element shape '{shape}'")
    if region not in REGION_NAMES:
        raise InvalidArgumentError(f"unknown region '{region}'")
    x0, y0, x1, y1 = (float(v) for v in bbox)
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError(f"degenerate bounding box {tuple(bbox)}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    cells: List[Tuple[int, ...]] = []
    for j in range(ny):
        for i in range(nx):
            v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if shape == "quad":
                cells.append((v00, v10, v11, v01))
            else:
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))

    h_inv = max(nx / (x1 - x0), ny / (y1 - y0))
    mesh = Mesh.from_cells(vertices, cells, [REGION_NAMES[region]] * len(cells), h_inv=h_inv)
    logger.debug(f"Structured {shape} mesh {nx}x{ny}: {mesh.summary()}")
    return mesh


HOLE = Circle(0.0, 0.0, 0.5)


def generate_holed_square(n: int) -> Mesh:
    """
    Quadrilateral mesh of [-1, 1]^2 minus the disc of radius 1/2, h ~ 1/n.

    The outer boundary carries 2n cells per side, the hole boundary is a
    circle and there are max(1, n // 2) radial layers. Faces lie on y = 0 for
    |x| >= 1/2, elements above the axis are elliptic and the rest hyperbolic.
    """
    if n < 1:
        raise InvalidArgumentError("n must be positive")
    n_ang = 8 * n
    layers = max(1, n // 2)

    vertices = np.empty(((layers + 1) * n_ang, 2))
    for j in range(n_ang):
        block, rem = divmod(j, 2 * n)
        t = -1.0 + rem / n
        rot = block * np.pi / 2.0
        c, s = np.cos(rot), np.sin(rot)
        outer = np.array([c - s * t, s + c * t])
        ang = rot + t * np.pi / 4.0
        inner = HOLE.radius * np.array([np.cos(ang), np.sin(ang)])
        for i in range(layers + 1):
            frac = i / layers
            vertices[i * n_ang + j] = (1.0 - frac) * inner + frac * outer
    vertices[np.abs(vertices) < 1e-13] = 0.0

    cells: List[Tuple[int, int, int, int]] = []
    for i in range(layers):
        for j in range(n_ang):
            jn = (j + 1) % n_ang
            cells.append((i * n_ang + j, (i + 1) * n_ang + j, (i + 1) * n_ang + jn, i * n_ang + jn))
    circles = {edge_key(j, (j + 1) % n_ang): HOLE for j in range(n_ang)}

    regions = [
        Region.ELLIPTIC if vertices[list(cell)].mean(axis=0)[1] > 0 else Region.HYPERBOLIC
        for cell in cells
    ]
    mesh = Mesh.from_cells(vertices, cells, regions, circles=circles, h_inv=float(n))
    logger.debug(f"Holed-square mesh n={n}: {mesh.summary()}")
    return mesh


def tag_regions(mesh: Mesh, region_of: Callable[[np.ndarray], np.ndarray]) -> Mesh:
    """Tag elements from a point indicator evaluated at element centroids."""
    regions = np.asarray(region_of(mesh.centroids()), dtype=np.int8)
    return mesh.with_regions(regions)


def check_regions(mesh: Mesh, region_of: Callable[[np.ndarray], np.ndarray]) -> Mesh:
    """
    Check stored region tags against a point indicator at element centroids.

    Tags read from a file are kept as they are; a tag that disagrees with the
    indicator raises MeshValidationError naming the first such element.
    """
    expected = np.asarray(region_of(mesh.centroids()), dtype=np.int8)
    wrong = np.flatnonzero(expected != mesh.regions)
    if len(wrong):
        e = int(wrong[0])
        raise MeshValidationError(
            f"element {e} is tagged {Region(int(mesh.regions[e])).name.lower()} but the "
            f"problem makes it {Region(int(expected[e])).name.lower()} "
            f"({len(wrong)} of {mesh.n_elements} elements disagree)"
        )
    return mesh


# ============================================================================
# Fichera classification
# ============================================================================


def _face_samples(mesh: Mesh, f: int, side: int) -> Tuple[np.ndarray, np.ndarray, int]:
    e = int(mesh.face_elements[f, side])
    j = int(mesh.face_local[f, side])
    rule = quadrature("segment", _CLASSIFY_EXACTNESS)
    _, pts, normals, _ = mesh.element_maps[e].face(j, rule.points[:, 0])
    return pts, normals, e


def classify_boundary(mesh: Mesh, problem: "ProblemSpec", rel_tol: Optional[float] = None) -> Mesh:
    """
    Tag boundary faces Gamma-/Gamma+ and elliptic/hyperbolic interface faces I-/I+.

    A boundary sample point is in Gamma- when n.kappa.n > 0 or beta.n < 0. A face
    whose samples disagree is ambiguous and rejected. Interface faces are I- when
    beta points from the hyperbolic into the elliptic element at every sample.
    """
    if rel_tol is None:
        rel_tol = get_settings().classification_tol

    samples = []
    for f in mesh.boundary_faces:
        pts, normals, e = _face_samples(mesh, int(f), 0)
        region = Region(int(mesh.regions[e]))
        kn = np.einsum("qi,qij,qj->q", normals, problem.kappa(pts, region), normals)
        bn = np.einsum("qi,qi->q", problem.beta(pts, region), normals)
        samples.append((int(f), kn, bn))

    interface = []
    for f in mesh.interface_faces:
        side = 0 if mesh.regions[mesh.face_elements[f, 0]] == Region.HYPERBOLIC else 1
        pts, normals, _ = _face_samples(mesh, int(f), side)
        bn = np.einsum("qi,qi->q", problem.beta(pts, Region.HYPERBOLIC), normals)
        interface.append((int(f), bn))

    k_scale = max([float(np.abs(kn).max()) for _, kn, _ in samples] + [0.0])
    b_scale = max(
        [float(np.abs(bn).max()) for _, _, bn in samples]
        + [float(np.abs(bn).max()) for _, bn in interface]
        + [0.0]
    )
    k_tol = rel_tol * k_scale
    b_tol = rel_tol * b_scale

    boundary_tags = np.zeros(mesh.n_faces, dtype=np.int8)
    interface_tags = np.zeros(mesh.n_faces, dtype=np.int8)

    for f, kn, bn in samples:
        if np.any(kn < -k_tol):
            raise CoefficientError(f"face {f}: negative normal diffusivity {kn.min():.3e}")
        minus = (kn > k_tol) | (bn < -b_tol)
        if np.all(minus):
            boundary_tags[f] = BoundaryTag.GAMMA_MINUS
        elif not np.any(minus):
            boundary_tags[f] = BoundaryTag.GAMMA_PLUS
        else:
            raise ClassificationError("inflow/outflow character changes along the face", f)

    for f, bn in interface:
        if np.all(bn > b_tol):
            interface_tags[f] = InterfaceTag.I_MINUS
        elif np.all(bn <= b_tol):
            interface_tags[f] = InterfaceTag.I_PLUS
        else:
            raise ClassificationError("advection changes direction across the interface face", f)

    n_minus = int(np.sum(boundary_tags == BoundaryTag.GAMMA_MINUS))
    logger.info(
        f"Classified {len(samples)} boundary faces ({n_minus} Gamma-, "
        f"{len(samples) - n_minus} Gamma+) and {len(interface)} interface faces"
    )
    return mesh.with_tags(boundary_tags, interface_tags)

