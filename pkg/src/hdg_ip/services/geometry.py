"""
HDG-IP Solver - Element Geometry

Maps from reference elements to physical elements:
- straight triangles: affine map
- straight quadrilaterals: bilinear map
- elements with circle faces: transfinite blending (Gordon-Hall on quads,
  edge blending on triangles) so circle faces are reproduced exactly

Reference triangle (0,0),(1,0),(0,1); reference quad [-1,1]^2. Local face j runs
from local vertex j to local vertex j+1 (mod number of vertices); with
counter-clockwise elements the outward normal is the tangent rotated clockwise.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Circle:
    """Circle carrying curved faces."""

    cx: float
    cy: float
    radius: float

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def project(self, point: np.ndarray) -> np.ndarray:
        """Radial projection onto the circle."""
        d = np.asarray(point, dtype=float) - self.center
        return self.center + self.radius * d / np.linalg.norm(d)

    def arc(self, p: np.ndarray, q: np.ndarray) -> Tuple[float, float]:
        """Start angle and signed sweep (|sweep| < pi) of the arc from p to q."""
        a0 = np.arctan2(p[1] - self.cy, p[0] - self.cx)
        a1 = np.arctan2(q[1] - self.cy, q[0] - self.cx)
        sweep = (a1 - a0 + np.pi) % (2.0 * np.pi) - np.pi
        return float(a0), float(sweep)


def edge_curve(
    p: np.ndarray, q: np.ndarray, circle: Optional[Circle], t: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Point and derivative d/dt of the edge from p (t=0) to q (t=1)."""
    t = np.asarray(t, dtype=float)
    if circle is None:
        pts = (1.0 - t)[:, None] * p + t[:, None] * q
        der = np.broadcast_to(q - p, pts.shape).copy()
        return pts, der
    a0, sweep = circle.arc(p, q)
    ang = a0 + t * sweep
    c, s = np.cos(ang), np.sin(ang)
    pts = circle.center + circle.radius * np.column_stack([c, s])
    der = circle.radius * sweep * np.column_stack([-s, c])
    # pin the end points to the stored vertices
    pts[t == 0.0] = p
    pts[t == 1.0] = q
    return pts, der


# Reference face parameterisations: xi(s) = origin + s * direction, s in [-1, 1]
_TRI_FACES = (
    (np.array([0.5, 0.0]), np.array([0.5, 0.0])),
    (np.array([0.5, 0.5]), np.array([-0.5, 0.5])),
    (np.array([0.0, 0.5]), np.array([0.0, -0.5])),
)
_QUAD_FACES = (
    (np.array([0.0, -1.0]), np.array([1.0, 0.0])),
    (np.array([1.0, 0.0]), np.array([0.0, 1.0])),
    (np.array([0.0, 1.0]), np.array([-1.0, 0.0])),
    (np.array([-1.0, 0.0]), np.array([0.0, -1.0])),
)


def face_reference_points(shape: str, local_face: int, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Reference points of a local face at parameters s, and d(xi)/ds."""
    origin, direction = (_TRI_FACES if shape == "tri" else _QUAD_FACES)[local_face]
    s = np.asarray(s, dtype=float)
    return origin + s[:, None] * direction, direction


class ElementMap:
    """Reference-to-physical map of one element."""

    def __init__(self, vertices: np.ndarray, curves: Sequence[Optional[Circle]]):
        self.vertices = np.asarray(vertices, dtype=float)
        self.nv = len(self.vertices)
        self.shape = "tri" if self.nv == 3 else "quad"
        self.curves: List[Optional[Circle]] = list(curves)
        self.curved = any(c is not None for c in self.curves)

    @property
    def kind(self) -> str:
        if self.curved:
            return "blended"
        return "affine" if self.shape == "tri" else "bilinear"

    def __call__(self, ref: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Physical points (n, 2) and Jacobians J[q, i, j] = dX_i / dxi_j."""
        ref = np.atleast_2d(np.asarray(ref, dtype=float))
        if self.shape == "tri":
            return self._tri(ref)
        return self._quad(ref)

    def _edge(self, j: int, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p = self.vertices[j]
        q = self.vertices[(j + 1) % self.nv]
        return edge_curve(p, q, self.curves[j], t)

    def _tri(self, ref: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        x, y = ref[:, 0], ref[:, 1]
        lam = np.column_stack([1.0 - x - y, x, y])
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # d lambda_m / d xi
        pts = lam @ v
        jac = np.broadcast_to((v.T @ dlam), (len(ref), 2, 2)).copy()
        for j, circle in enumerate(self.curves):
            if circle is None:
                continue
            a, b = j, (j + 1) % 3
            s = lam[:, a] + lam[:, b]
            safe = np.maximum(s, 1e-300)
            t = np.clip(lam[:, b] / safe, 0.0, 1.0)
            c, dc = self._edge(j, t)
            chord = (1.0 - t)[:, None] * v[a] + t[:, None] * v[b]
            phi = c - chord
            dphi = dc - (v[b] - v[a])
            pts += s[:, None] * phi
            g_a = phi - dphi * t[:, None]
            g_b = phi + dphi * (1.0 - t)[:, None]
            jac += g_a[:, :, None] * dlam[a][None, None, :] + g_b[:, :, None] * dlam[b][None, None, :]
        return pts, jac

    def _quad(self, ref: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        u = 0.5 * (ref[:, 0] + 1.0)
        w = 0.5 * (ref[:, 1] + 1.0)
        c0, d0 = self._edge(0, u)
        c1, d1 = self._edge(1, w)
        c2, d2 = self._edge(2, 1.0 - u)
        c3, d3 = self._edge(3, 1.0 - w)
        d2, d3 = -d2, -d3
        uu, ww = u[:, None], w[:, None]
        bilinear = (
            (1 - uu) * (1 - ww) * v[0] + uu * (1 - ww) * v[1] + uu * ww * v[2] + (1 - uu) * ww * v[3]
        )
        pts = (1 - ww) * c0 + ww * c2 + (1 - uu) * c3 + uu * c1 - bilinear
        dbu = -(1 - ww) * v[0] + (1 - ww) * v[1] + ww * v[2] - ww * v[3]
        dbw = -(1 - uu) * v[0] - uu * v[1] + uu * v[2] + (1 - uu) * v[3]
        dxu = (1 - ww) * d0 + ww * d2 - c3 + c1 - dbu
        dxw = -c0 + c2 + (1 - uu) * d3 + uu * d1 - dbw
        jac = 0.5 * np.stack([dxu, dxw], axis=2)
        return pts, jac

    def face(self, local_face: int, s_local: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Sample a local face at local parameters s in [-1, 1].

        Returns reference points, physical points, unit outward normals and the
        length element |dX/ds|.
        """
        ref, dref = face_reference_points(self.shape, local_face, s_local)
        pts, jac = self(ref)
        tangent = jac @ dref
        speed = np.linalg.norm(tangent, axis=1)
        normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / speed[:, None]
        return ref, pts, normals, speed


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace area of the straight polygon through the vertices."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
