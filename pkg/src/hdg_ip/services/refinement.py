"""
HDG-IP Solver - Mesh Refinement

Handles:
- Uniform refinement (triangle -> 4 triangles, quad -> 4 quads)
- Bulk and fixed-fraction marking of an element indicator
- Conforming adaptive refinement: red/green/blue longest-edge closure on
  triangles, red refinement or a three-triangle transition on quads

Midpoints of circle faces are projected back onto the circle. Region tags and
face tags are inherited from the parent.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from hdg_ip.errors import InvalidArgumentError
from hdg_ip.services.geometry import Circle
from hdg_ip.services.mesh import EdgeKey, Mesh, edge_key

logger = logging.getLogger(__name__)


class _Refiner:
    """Accumulates child vertices, cells and inherited face data."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.vertices: List[np.ndarray] = list(mesh.vertices)
        self.cells: List[Tuple[int, ...]] = []
        self.regions: List[int] = []
        self.circles: Dict[EdgeKey, Circle] = {}
        self.face_tags: Dict[EdgeKey, Tuple[int, int]] = {}
        self._midpoints: Dict[EdgeKey, int] = {}

        # parent face data keyed by vertex pair
        self._parent_tags: Dict[EdgeKey, Tuple[int, int]] = {}
        if mesh.classified:
            for f, (a, b) in enumerate(mesh.faces):
                self._parent_tags[edge_key(int(a), int(b))] = (
                    int(mesh.boundary_tags[f]),
                    int(mesh.interface_tags[f]),
                )

    def _add_vertex(self, point: np.ndarray) -> int:
        self.vertices.append(np.asarray(point, dtype=float))
        return len(self.vertices) - 1

    def midpoint(self, a: int, b: int) -> int:
        key = edge_key(a, b)
        if key in self._midpoints:
            return self._midpoints[key]
        pa, pb = self.mesh.vertices[a], self.mesh.vertices[b]
        point = 0.5 * (pa + pb)
        circle = self.mesh.circles.get(key)
        if circle is not None:
            point = circle.project(point)
        m = self._add_vertex(point)
        self._midpoints[key] = m
        for half in (edge_key(a, m), edge_key(m, b)):
            if circle is not None:
                self.circles[half] = circle
            if key in self._parent_tags:
                self.face_tags[half] = self._parent_tags[key]
        return m

    def center(self, e: int) -> int:
        point, _ = self.mesh.element_maps[e](np.zeros((1, 2)))
        return self._add_vertex(point[0])

    def keep(self, e: int) -> None:
        self.emit(e, [tuple(int(v) for v in self.mesh.element_vertices(e))])

    def emit(self, parent: int, children: Sequence[Tuple[int, ...]]) -> None:
        for cell in children:
            self.cells.append(tuple(cell))
            self.regions.append(int(self.mesh.regions[parent]))
            # unsplit parent edges keep their circle and tags
            for j in range(len(cell)):
                key = edge_key(cell[j], cell[(j + 1) % len(cell)])
                if key in self.mesh.circles:
                    self.circles[key] = self.mesh.circles[key]
                if key in self._parent_tags:
                    self.face_tags[key] = self._parent_tags[key]

    def red(self, e: int) -> None:
        v = [int(x) for x in self.mesh.element_vertices(e)]
        if len(v) == 3:
            m01, m12, m20 = self.midpoint(v[0], v[1]), self.midpoint(v[1], v[2]), self.midpoint(v[2], v[0])
            self.emit(
                e,
                [(v[0], m01, m20), (m01, v[1], m12), (m20, m12, v[2]), (m01, m12, m20)],
            )
            return
        m01, m12 = self.midpoint(v[0], v[1]), self.midpoint(v[1], v[2])
        m23, m30 = self.midpoint(v[2], v[3]), self.midpoint(v[3], v[0])
        c = self.center(e)
        self.emit(
            e,
            [(v[0], m01, c, m30), (m01, v[1], m12, c), (c, m12, v[2], m23), (m30, c, m23, v[3])],
        )

    def build(self, h_inv: Optional[float]) -> Mesh:
        return Mesh.from_cells(
            np.array(self.vertices),
            self.cells,
            self.regions,
            circles=self.circles,
            h_inv=h_inv,
            face_tags=self.face_tags or None,
        )


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into 4 triangles and every quad into 4 quads."""
    refiner = _Refiner(mesh)
    for e in range(mesh.n_elements):
        refiner.red(e)
    out = refiner.build(2.0 * mesh.h_inv if mesh.h_inv else None)
    logger.debug(f"Uniform refinement: {mesh.n_elements} -> {out.n_elements} elements")
    return out


# ============================================================================
# Adaptive refinement
# ============================================================================


def mark_elements(indicator: np.ndarray, fraction: float) -> np.ndarray:
    """
    Boolean mask of the top ``fraction`` of elements by indicator.

    Ties at the threshold are marked too; elements with a zero indicator never are.
    """
    indicator = np.asarray(indicator, dtype=float)
    if not 0.0 < fraction < 1.0:
        raise InvalidArgumentError(f"fraction must lie in (0, 1), got {fraction}")
    if np.any(indicator < 0) or not np.all(np.isfinite(indicator)):
        raise InvalidArgumentError("indicator values must be finite and nonnegative")
    count = max(1, math.ceil(fraction * len(indicator)))
    threshold = np.sort(indicator)[::-1][count - 1]
    return (indicator >= threshold) & (indicator > 0.0)


def mark_bulk(indicator: np.ndarray, fraction: float) -> np.ndarray:
    """
    Boolean mask of the fewest elements whose indicators sum to at least
    ``fraction`` of the total (bulk marking).

    Ties at the threshold are marked too; elements with a zero indicator never are.
    """
    indicator = np.asarray(indicator, dtype=float)
    if not 0.0 < fraction < 1.0:
        raise InvalidArgumentError(f"fraction must lie in (0, 1), got {fraction}")
    if np.any(indicator < 0) or not np.all(np.isfinite(indicator)):
        raise InvalidArgumentError("indicator values must be finite and nonnegative")
    total = float(indicator.sum())
    if total == 0.0:
        return np.zeros(len(indicator), dtype=bool)
    ordered = np.sort(indicator)[::-1]
    count = int(np.searchsorted(np.cumsum(ordered), fraction * total)) + 1
    threshold = ordered[min(count, len(ordered)) - 1]
    return (indicator >= threshold) & (indicator > 0.0)


MARKINGS = {"bulk": mark_bulk, "fraction": mark_elements}


def _longest_edge(mesh: Mesh, e: int) -> int:
    ids = mesh.element_vertices(e)
    pts = mesh.vertices[ids]
    lengths = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    # ties resolved towards the lowest local index
    return int(np.argmax(np.round(lengths / lengths.max(), 12)))


def _close_marking(mesh: Mesh, marked: np.ndarray) -> Set[EdgeKey]:
    """Marked edges after closure: no hanging nodes can remain."""
    local_edges = []
    for e in range(mesh.n_elements):
        ids = [int(v) for v in mesh.element_vertices(e)]
        local_edges.append([edge_key(ids[j], ids[(j + 1) % len(ids)]) for j in range(len(ids))])

    edges: Set[EdgeKey] = set()
    for e in np.flatnonzero(marked):
        edges.update(local_edges[e])

    longest = [
        local_edges[e][_longest_edge(mesh, e)] if mesh.nverts[e] == 3 else None
        for e in range(mesh.n_elements)
    ]
    changed = True
    while changed:
        changed = False
        for e, own in enumerate(local_edges):
            hits = sum(1 for key in own if key in edges)
            if hits == 0:
                continue
            if mesh.nverts[e] == 3:
                key = longest[e]
                if key not in edges:
                    edges.add(key)
                    changed = True
            elif 1 < hits < 4:
                edges.update(own)
                changed = True
    return edges


def refine_adaptive(
    mesh: Mesh, indicator: Sequence[float], fraction: float, marking: str = "bulk"
) -> Mesh:
    """
    Refine the marked elements: by default the fewest elements carrying
    ``fraction`` of the total indicator, with ``marking="fraction"`` the top
    ``fraction`` of elements by count.

    Marked elements are split red; neighbours are closed with green (one
    edge), blue (two edges) or red (three edges) triangle splits, and quads
    with a single marked edge are split into three triangles.
    """
    indicator = np.asarray(indicator, dtype=float)
    if len(indicator) != mesh.n_elements:
        raise InvalidArgumentError(
            f"indicator has {len(indicator)} values for {mesh.n_elements} elements"
        )
    if marking not in MARKINGS:
        raise InvalidArgumentError(f"unknown marking '{marking}', expected one of {sorted(MARKINGS)}")
    marked = MARKINGS[marking](indicator, fraction)
    if not np.any(marked):
        logger.warning("Adaptive refinement: no element marked, mesh unchanged")
        return mesh

    edges = _close_marking(mesh, marked)
    refiner = _Refiner(mesh)
    for e in range(mesh.n_elements):
        v = [int(x) for x in mesh.element_vertices(e)]
        nv = len(v)
        flags = [edge_key(v[j], v[(j + 1) % nv]) in edges for j in range(nv)]
        hits = sum(flags)
        if hits == 0:
            refiner.keep(e)
        elif hits == nv:
            refiner.red(e)
        elif nv == 4:
            j = flags.index(True)
            p, q, r, s = v[j], v[(j + 1) % 4], v[(j + 2) % 4], v[(j + 3) % 4]
            m = refiner.midpoint(p, q)
            refiner.emit(e, [(p, m, s), (m, q, r), (m, r, s)])
        else:
            j = _longest_edge(mesh, e)
            p, q, o = v[j], v[(j + 1) % 3], v[(j + 2) % 3]
            m = refiner.midpoint(p, q)
            if hits == 1:
                refiner.emit(e, [(p, m, o), (m, q, o)])
            elif flags[(j + 1) % 3]:
                n = refiner.midpoint(q, o)
                refiner.emit(e, [(p, m, o), (m, q, n), (m, n, o)])
            else:
                n = refiner.midpoint(o, p)
                refiner.emit(e, [(p, m, n), (n, m, o), (m, q, o)])

    out = refiner.build(None)
    logger.info(
        f"Adaptive refinement: {int(marked.sum())} marked, "
        f"{mesh.n_elements} -> {out.n_elements} elements"
    )
    return out
