"""
HDG-IP Solver - Quadrature Rules

Reference-element rules:
- segment [-1, 1]: Gauss-Legendre
- quad [-1, 1]^2: tensor Gauss-Legendre
- tri (0,0),(1,0),(0,1): collapsed Gauss-Jacobi x Gauss-Legendre (Duffy)
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from hdg_ip.errors import CapabilityError, InvalidArgumentError

MAX_EXACTNESS = 61

SHAPES = ("segment", "tri", "quad")


@dataclass(frozen=True)
class QuadratureRule:
    """Points (n, dim) and positive weights (n,) on a reference element."""

    shape: str
    exactness: int
    points: np.ndarray
    weights: np.ndarray


def _npoints(exactness: int) -> int:
    return max(1, (exactness + 2) // 2)


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> tuple:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=None)
def quadrature(shape: str, exactness: int) -> QuadratureRule:
    """Rule integrating every polynomial of total degree <= exactness exactly."""
    if shape not in SHAPES:
        raise InvalidArgumentError(f"unknown reference shape '{shape}'")
    if exactness < 0:
        raise InvalidArgumentError("exactness must be nonnegative")
    if exactness > MAX_EXACTNESS:
        raise CapabilityError(
            f"quadrature exactness {exactness} exceeds supported maximum {MAX_EXACTNESS}"
        )

    n = _npoints(exactness)
    x, w = _gauss_legendre(n)

    if shape == "segment":
        points = x.reshape(-1, 1)
        weights = w.copy()
    elif shape == "quad":
        px, py = np.meshgrid(x, x, indexing="ij")
        points = np.column_stack([px.ravel(), py.ravel()])
        weights = np.outer(w, w).ravel()
    else:
        # weight (1 - a) absorbs the collapse Jacobian
        a, wa = roots_jacobi(n, 1.0, 0.0)
        pa, pb = np.meshgrid(a, x, indexing="ij")
        points = np.column_stack(
            [0.5 * (1.0 + pa.ravel()), 0.25 * (1.0 - pa.ravel()) * (1.0 + pb.ravel())]
        )
        weights = np.outer(wa, w).ravel() / 8.0

    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(shape=shape, exactness=exactness, points=points, weights=weights)


def reference_measure(shape: str) -> float:
    """Measure of the reference element."""
    return {"segment": 2.0, "quad": 4.0, "tri": 0.5}[shape]
