"""
HDG-IP Solver - Reference Polynomial Bases

Two bases per reference shape, both spanning P_k (tri) or Q_k (quad):

- ``modal``: products of Legendre polynomials. On the triangle
  P_i(2x-1) P_j(2y-1) with i + j <= k, ordered by total degree d = i + j and,
  within a degree, by increasing j. On the quad L_i(xi) L_j(eta), i, j <= k,
  ordered with i fastest.
- ``nodal``: equispaced Lagrange basis. Triangle nodes (i/k, j/k), i + j <= k,
  ordered j-major then i (k = 1 gives the barycentric vertex basis); quad nodes
  (-1 + 2i/k, -1 + 2j/k) with i fastest.

Gradients are with respect to reference coordinates.
"""

from functools import lru_cache
from typing import Tuple

import numpy as np

from hdg_ip.errors import InvalidArgumentError

MAX_DEGREE = 10


def legendre_table(x: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of P_0..P_k at x, each of shape (k + 1, len(x))."""
    x = np.asarray(x, dtype=float)
    vals = np.zeros((k + 1,) + x.shape)
    ders = np.zeros((k + 1,) + x.shape)
    vals[0] = 1.0
    if k >= 1:
        vals[1] = x
        ders[1] = 1.0
    for n in range(1, k):
        vals[n + 1] = ((2 * n + 1) * x * vals[n] - n * vals[n - 1]) / (n + 1)
        ders[n + 1] = ders[n - 1] + (2 * n + 1) * vals[n]
    return vals, ders


def basis_dimension(shape: str, k: int) -> int:
    """dim P_k on triangles, dim Q_k on quads, k + 1 on segments."""
    if shape == "tri":
        return (k + 1) * (k + 2) // 2
    if shape == "quad":
        return (k + 1) ** 2
    if shape == "segment":
        return k + 1
    raise InvalidArgumentError(f"unsupported shape '{shape}'")


def _tri_indices(k: int) -> list:
    return [(d - j, j) for d in range(k + 1) for j in range(d + 1)]


def _modal(shape: str, k: int, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if shape == "tri":
        lx, dx = legendre_table(2.0 * points[:, 0] - 1.0, k)
        ly, dy = legendre_table(2.0 * points[:, 1] - 1.0, k)
        idx = _tri_indices(k)
        values = np.stack([lx[i] * ly[j] for i, j in idx], axis=1)
        gx = np.stack([2.0 * dx[i] * ly[j] for i, j in idx], axis=1)
        gy = np.stack([2.0 * lx[i] * dy[j] for i, j in idx], axis=1)
    else:
        lx, dx = legendre_table(points[:, 0], k)
        ly, dy = legendre_table(points[:, 1], k)
        idx = [(i, j) for j in range(k + 1) for i in range(k + 1)]
        values = np.stack([lx[i] * ly[j] for i, j in idx], axis=1)
        gx = np.stack([dx[i] * ly[j] for i, j in idx], axis=1)
        gy = np.stack([lx[i] * dy[j] for i, j in idx], axis=1)
    return values, np.stack([gx, gy], axis=2)


def lagrange_nodes(shape: str, k: int) -> np.ndarray:
    """Equispaced nodes of the nodal basis in its documented order."""
    if k == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]]) if shape == "tri" else np.zeros((1, 2))
    if shape == "tri":
        return np.array([[i / k, j / k] for j in range(k + 1) for i in range(k + 1 - j)])
    t = np.linspace(-1.0, 1.0, k + 1)
    return np.array([[t[i], t[j]] for j in range(k + 1) for i in range(k + 1)])


@lru_cache(maxsize=None)
def _nodal_transform(shape: str, k: int) -> np.ndarray:
    vandermonde, _ = _modal(shape, k, lagrange_nodes(shape, k))
    return np.linalg.inv(vandermonde)


def _check_points(shape: str, points: np.ndarray) -> None:
    tol = 1e-10
    if shape == "tri":
        inside = (
            (points[:, 0] >= -tol)
            & (points[:, 1] >= -tol)
            & (points[:, 0] + points[:, 1] <= 1.0 + tol)
        )
    else:
        inside = np.all(np.abs(points) <= 1.0 + tol, axis=1)
    if not np.all(inside):
        raise InvalidArgumentError(f"points outside the reference {shape}")


def eval_basis(
    shape: str,
    k: int,
    points: np.ndarray,
    kind: str = "nodal",
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluate a reference basis.

    Returns:
        values of shape (n_points, n_basis) and reference gradients of shape
        (n_points, n_basis, 2).
    """
    if shape not in ("tri", "quad"):
        raise InvalidArgumentError(f"unsupported shape '{shape}'")
    if not 0 <= k <= MAX_DEGREE:
        raise InvalidArgumentError(f"unsupported degree {k} (0..{MAX_DEGREE})")
    if kind not in ("nodal", "modal"):
        raise InvalidArgumentError(f"unknown basis kind '{kind}'")

    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_points(shape, points)

    values, grads = _modal(shape, k, points)
    if kind == "modal":
        return values, grads
    transform = _nodal_transform(shape, k)
    return values @ transform, np.einsum("pmd,mn->pnd", grads, transform)


def face_basis(k: int, s: np.ndarray) -> np.ndarray:
    """Orthonormal Legendre basis on [-1, 1]: values of shape (len(s), k + 1)."""
    vals, _ = legendre_table(np.asarray(s, dtype=float), k)
    scale = np.sqrt((2.0 * np.arange(k + 1) + 1.0) / 2.0)
    return (vals * scale[:, None]).T
