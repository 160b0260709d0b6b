"""
HDG-IP Solver - ASCII Mesh Format

Format (``#`` starts a comment, blank lines ignored)::

    meshfmt 1
    hinv 8                  # optional nominal 1/h of the mesh family
    vertices N
    x y                     # N lines
    elements M
    tri v0 v1 v2 ell        # M lines, region ell|hyp
    quad v0 v1 v2 v3 hyp
    curved C                # optional block
    va vb cx cy r           # face (va, vb) lies on the circle (cx, cy, r)

Vertex indices are zero-based.
"""

import logging
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from hdg_ip.errors import HdgError, MeshParseError
from hdg_ip.services.geometry import Circle
from hdg_ip.services.mesh import REGION_NAMES, EdgeKey, Mesh, Region, edge_key

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

_SHAPE_VERTICES = {"tri": 3, "quad": 4}
_REGION_LABELS = {Region.ELLIPTIC: "ell", Region.HYPERBOLIC: "hyp"}


def _records(text: str) -> Iterator[Tuple[int, List[str]]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line.split()


def _count(tokens: List[str], keyword: str, line: int) -> int:
    if len(tokens) != 2 or tokens[0] != keyword:
        raise MeshParseError(f"expected '{keyword} <count>'", line)
    try:
        value = int(tokens[1])
    except ValueError:
        raise MeshParseError(f"invalid {keyword} count '{tokens[1]}'", line) from None
    if value < 0:
        raise MeshParseError(f"negative {keyword} count", line)
    return value


def _floats(tokens: List[str], n: int, line: int) -> List[float]:
    if len(tokens) != n:
        raise MeshParseError(f"expected {n} numbers, got {len(tokens)}", line)
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise MeshParseError(f"invalid number in '{' '.join(tokens)}'", line) from None


def _ints(tokens: List[str], line: int) -> List[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise MeshParseError(f"invalid vertex index in '{' '.join(tokens)}'", line) from None


def parse_mesh(text: str) -> Mesh:
    """Parse mesh text; raises MeshParseError with the offending line number."""
    records = list(_records(text))
    if not records:
        raise MeshParseError("empty mesh file", 1)
    pos = 0

    def take() -> Tuple[int, List[str]]:
        nonlocal pos
        if pos >= len(records):
            last = records[-1][0] if records else 1
            raise MeshParseError("unexpected end of file", last)
        pos += 1
        return records[pos - 1]

    line, tokens = take()
    if tokens != ["meshfmt", str(FORMAT_VERSION)]:
        raise MeshParseError(f"expected header 'meshfmt {FORMAT_VERSION}'", line)

    h_inv: Optional[float] = None
    line, tokens = take()
    if tokens[0] == "hinv":
        h_inv = _floats(tokens[1:], 1, line)[0]
        line, tokens = take()

    n_vertices = _count(tokens, "vertices", line)
    vertices = np.empty((n_vertices, 2))
    for i in range(n_vertices):
        line, tokens = take()
        vertices[i] = _floats(tokens, 2, line)

    line, tokens = take()
    n_elements = _count(tokens, "elements", line)
    cells: List[List[int]] = []
    regions: List[Region] = []
    for _ in range(n_elements):
        line, tokens = take()
        shape = tokens[0]
        if shape not in _SHAPE_VERTICES:
            raise MeshParseError(f"unknown element shape '{shape}'", line)
        nv = _SHAPE_VERTICES[shape]
        if len(tokens) != nv + 2:
            raise MeshParseError(f"{shape} needs {nv} vertices and a region tag", line)
        ids = _ints(tokens[1 : nv + 1], line)
        if min(ids) < 0 or max(ids) >= n_vertices:
            raise MeshParseError("vertex index out of range", line)
        region = tokens[-1]
        if region not in REGION_NAMES:
            raise MeshParseError(f"unknown region tag '{region}'", line)
        cells.append(ids)
        regions.append(REGION_NAMES[region])

    circles: Dict[EdgeKey, Circle] = {}
    if pos < len(records):
        line, tokens = take()
        n_curved = _count(tokens, "curved", line)
        for _ in range(n_curved):
            line, tokens = take()
            if len(tokens) != 5:
                raise MeshParseError("curved entry needs 'va vb cx cy r'", line)
            va, vb = _ints(tokens[:2], line)
            cx, cy, r = _floats(tokens[2:], 3, line)
            if r <= 0:
                raise MeshParseError("circle radius must be positive", line)
            circles[edge_key(va, vb)] = Circle(cx, cy, r)
    if pos < len(records):
        raise MeshParseError("trailing content after mesh data", records[pos][0])

    return Mesh.from_cells(vertices, cells, regions, circles=circles, h_inv=h_inv)


def read_mesh(path: Union[str, Path]) -> Mesh:
    """Read a mesh file in the ASCII mesh format."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise HdgError(f"cannot read mesh file {path}: {e}") from e
    mesh = parse_mesh(text)
    logger.info(f"Read mesh {path.name}: {mesh.summary()}")
    return mesh


def format_mesh(mesh: Mesh) -> str:
    lines = [f"meshfmt {FORMAT_VERSION}"]
    if mesh.h_inv:
        lines.append(f"hinv {mesh.h_inv:.17g}")
    lines.append(f"vertices {len(mesh.vertices)}")
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    lines.append(f"elements {mesh.n_elements}")
    for e in range(mesh.n_elements):
        ids = " ".join(str(int(v)) for v in mesh.element_vertices(e))
        label = _REGION_LABELS[Region(int(mesh.regions[e]))]
        lines.append(f"{mesh.shape(e)} {ids} {label}")
    if mesh.circles:
        lines.append(f"curved {len(mesh.circles)}")
        for (va, vb), c in sorted(mesh.circles.items()):
            lines.append(f"{va} {vb} {c.cx:.17g} {c.cy:.17g} {c.radius:.17g}")
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path: Union[str, Path]) -> Path:
    """Write a mesh in the ASCII mesh format."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_mesh(mesh), encoding="utf-8")
    except OSError as e:
        raise HdgError(f"cannot write mesh file {path}: {e}") from e
    logger.info(f"Wrote mesh {path} ({mesh.n_elements} elements)")
    return path
