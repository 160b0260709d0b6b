"""
HDG-IP Solver - VTK Field Output

Handles:
- Per-element subsampling of the discrete solution on k + 1 equispaced points
  per direction (discontinuous: points are not shared between elements)
- Point data u_h, exact solution and |u - u_h|; cell data region and L2 density
- Legacy-VTK ASCII files through meshio
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import meshio
import numpy as np

from hdg_ip.errors import HdgError
from hdg_ip.services.basis import lagrange_nodes
from hdg_ip.services.model import ProblemSpec
from hdg_ip.services.postprocess import l2_error_cells
from hdg_ip.services.solver import Solution

logger = logging.getLogger(__name__)

_CELL_TYPES = {"tri": "triangle", "quad": "quad"}


def _tri_subcells(k: int) -> np.ndarray:
    """Sub-triangles of the equispaced lattice in lagrange_nodes('tri', k) order."""
    offsets = np.concatenate([[0], np.cumsum([k + 1 - j for j in range(k + 1)])])

    def node(i: int, j: int) -> int:
        return int(offsets[j] + i)

    cells = []
    for j in range(k):
        for i in range(k - j):
            cells.append((node(i, j), node(i + 1, j), node(i, j + 1)))
            if i + j < k - 1:
                cells.append((node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)))
    return np.array(cells, dtype=np.int64)


def _quad_subcells(k: int) -> np.ndarray:
    def node(i: int, j: int) -> int:
        return j * (k + 1) + i

    return np.array(
        [(node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)) for j in range(k) for i in range(k)],
        dtype=np.int64,
    )


def sample_points_per_element(shape: str, k: int) -> int:
    return len(lagrange_nodes(shape, k))


def build_field_mesh(solution: Solution, problem: Optional[ProblemSpec] = None) -> meshio.Mesh:
    """Subsampled mesh with solution, error and region fields."""
    space = solution.space
    mesh = space.mesh
    k = space.k
    with_exact = problem is not None and problem.has_exact
    cell_l2 = l2_error_cells(solution, problem) if with_exact else None

    points: List[np.ndarray] = []
    values: List[np.ndarray] = []
    exact_values: List[np.ndarray] = []
    blocks: Dict[str, List[np.ndarray]] = {"triangle": [], "quad": []}
    region_data: Dict[str, List[np.ndarray]] = {"triangle": [], "quad": []}
    density_data: Dict[str, List[np.ndarray]] = {"triangle": [], "quad": []}
    element_data: Dict[str, List[np.ndarray]] = {"triangle": [], "quad": []}

    offset = 0
    for e in range(mesh.n_elements):
        shape = mesh.shape(e)
        cell_type = _CELL_TYPES[shape]
        ref = lagrange_nodes(shape, k)
        pts, vals = space.evaluate(e, solution.element_coeffs(e), ref)
        points.append(pts)
        values.append(vals)
        if with_exact:
            exact_values.append(problem.exact(pts, space.element(e).region))

        sub = _tri_subcells(k) if shape == "tri" else _quad_subcells(k)
        blocks[cell_type].append(sub + offset)
        n_sub = len(sub)
        region_data[cell_type].append(np.full(n_sub, int(mesh.regions[e]), dtype=np.int32))
        element_data[cell_type].append(np.full(n_sub, e, dtype=np.int32))
        if cell_l2 is not None:
            density = cell_l2[e] / np.sqrt(mesh.areas[e])
            density_data[cell_type].append(np.full(n_sub, density))
        offset += len(pts)

    used = [t for t in ("triangle", "quad") if blocks[t]]
    cells = [(t, np.concatenate(blocks[t])) for t in used]
    point_data = {"u_h": np.concatenate(values)}
    cell_data = {
        "region": [np.concatenate(region_data[t]) for t in used],
        "element": [np.concatenate(element_data[t]) for t in used],
    }
    if with_exact:
        exact_all = np.concatenate(exact_values)
        point_data["exact"] = exact_all
        point_data["error"] = np.abs(exact_all - point_data["u_h"])
        cell_data["l2_density"] = [np.concatenate(density_data[t]) for t in used]

    xyz = np.concatenate(points)
    xyz = np.column_stack([xyz, np.zeros(len(xyz))])
    return meshio.Mesh(xyz, cells, point_data=point_data, cell_data=cell_data)


def write_fields(
    solution: Solution,
    path: Union[str, Path],
    problem: Optional[ProblemSpec] = None,
) -> Path:
    """Write the solution fields as an ASCII legacy-VTK unstructured grid."""
    path = Path(path)
    field_mesh = build_field_mesh(solution, problem)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        meshio.write(str(path), field_mesh, file_format="vtk", binary=False)
    except OSError as e:
        raise HdgError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {len(field_mesh.points)} sample points to {path}")
    return path
