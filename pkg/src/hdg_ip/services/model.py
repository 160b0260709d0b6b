"""
HDG-IP Solver - Problem Model

Handles:
- Coefficient fields kappa, beta, gamma, source and Dirichlet datum
- Exact solutions for error studies
- Built-in test cases: nondegenerate boundary layers (A), pure advection of a
  discontinuity (B), locally degenerate flow around a hole (C), and global
  polynomial solutions for patch tests

Every field is called as ``field(points, region)`` with points of shape
(n, 2) so that piecewise coefficients can be evaluated on either side of the
elliptic/hyperbolic interface.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P

from hdg_ip.errors import CapabilityError, CoefficientError, DomainError, InvalidArgumentError
from hdg_ip.services.mesh import Region

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray, Region], np.ndarray]

# Relative tolerance for semidefiniteness checks
PSD_TOL = 1e-12


def _zeros(points: np.ndarray, region: Region) -> np.ndarray:
    return np.zeros(len(points))


def _elliptic_everywhere(points: np.ndarray) -> np.ndarray:
    return np.full(len(points), Region.ELLIPTIC, dtype=np.int8)


def _hyperbolic_everywhere(points: np.ndarray) -> np.ndarray:
    return np.full(len(points), Region.HYPERBOLIC, dtype=np.int8)


def _constant_matrix(matrix: np.ndarray) -> Field:
    def kappa(points: np.ndarray, region: Region) -> np.ndarray:
        return np.broadcast_to(matrix, (len(points), 2, 2)).copy()

    return kappa


def _constant_vector(vector: np.ndarray) -> Field:
    def beta(points: np.ndarray, region: Region) -> np.ndarray:
        return np.broadcast_to(vector, (len(points), 2)).copy()

    return beta


def _constant_scalar(value: float) -> Field:
    def scalar(points: np.ndarray, region: Region) -> np.ndarray:
        return np.full(len(points), float(value))

    return scalar


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients, data and optional exact solution of one problem."""

    name: str
    kappa: Field
    beta: Field
    gamma: Field
    source: Field
    dirichlet: Field
    exact: Optional[Field] = None
    exact_gradient: Optional[Field] = None
    div_beta: Field = _zeros
    region_of: Callable[[np.ndarray], np.ndarray] = _elliptic_everywhere
    quadrature_boost: int = 0
    mesh_family: str = "square"
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    def require_exact(self) -> Field:
        if self.exact is None:
            raise CapabilityError(f"problem '{self.name}' has no exact solution")
        return self.exact

    def mu_star(self, points: np.ndarray, region: Region) -> np.ndarray:
        """Coercivity shift gamma + div(beta) / 2."""
        return self.gamma(points, region) + 0.5 * self.div_beta(points, region)

    def check_coefficients(self, points: np.ndarray, region: Region) -> float:
        """
        Validate the fields at sample points of one region.

        Returns the minimum of gamma + div(beta)/2 over the points.
        """
        kappa = self.kappa(points, region)
        scale = max(float(np.abs(kappa).max()), 1.0)
        if not np.allclose(kappa, np.swapaxes(kappa, 1, 2), rtol=0.0, atol=PSD_TOL * scale):
            raise CoefficientError(f"{self.name}: kappa is not symmetric")
        eig = np.linalg.eigvalsh(kappa)
        if eig.min() < -PSD_TOL * scale:
            raise CoefficientError(f"{self.name}: kappa is not positive semidefinite")
        if region == Region.HYPERBOLIC and np.abs(kappa).max() > PSD_TOL * scale:
            raise CoefficientError(f"{self.name}: kappa does not vanish on a hyperbolic element")
        if region == Region.ELLIPTIC and eig.min() <= PSD_TOL * scale:
            raise CoefficientError(f"{self.name}: kappa degenerates on an elliptic element")

        mu = self.mu_star(points, region)
        if mu.min() < -PSD_TOL * max(float(np.abs(mu).max()), 1.0):
            raise CoefficientError(
                f"{self.name}: gamma + div(beta)/2 = {mu.min():.3e} is negative"
            )
        return float(mu.min())


# ============================================================================
# Test A: boundary layers, kappa > 0 everywhere
# ============================================================================


def _layer_profile(t: np.ndarray, c: float) -> tuple:
    """t + (exp(c t) - 1)/(1 - exp(c)) and its first two derivatives."""
    if c > 0:
        denom = -np.expm1(-c)
        d = np.exp(c * (t - 1.0)) / denom
        e = np.exp(-c) / denom
        return t - d + e, 1.0 - c * d, -c * c * d
    g = np.exp(c * t) / np.expm1(c)
    return t - np.expm1(c * t) / np.expm1(c), 1.0 - c * g, -c * c * g


def testcase_A(kappa_scalar: float, beta: Sequence[float] = (2.0, 1.0)) -> ProblemSpec:
    """Nondegenerate advection-diffusion with exponential layers at x = 1 and y = 1."""
    if not kappa_scalar > 0:
        raise InvalidArgumentError(f"kappa must be positive, got {kappa_scalar}")
    b = np.asarray(beta, dtype=float)
    if b.shape != (2,) or np.any(b == 0):
        raise InvalidArgumentError("Test A needs both components of beta nonzero")
    cx, cy = b / kappa_scalar

    def exact(points: np.ndarray, region: Region) -> np.ndarray:
        X, _, _ = _layer_profile(points[:, 0], cx)
        Y, _, _ = _layer_profile(points[:, 1], cy)
        return X * Y

    def exact_gradient(points: np.ndarray, region: Region) -> np.ndarray:
        X, dX, _ = _layer_profile(points[:, 0], cx)
        Y, dY, _ = _layer_profile(points[:, 1], cy)
        return np.column_stack([dX * Y, X * dY])

    def source(points: np.ndarray, region: Region) -> np.ndarray:
        X, dX, d2X = _layer_profile(points[:, 0], cx)
        Y, dY, d2Y = _layer_profile(points[:, 1], cy)
        return -kappa_scalar * (d2X * Y + X * d2Y) + b[0] * dX * Y + b[1] * X * dY

    return ProblemSpec(
        name="A",
        kappa=_constant_matrix(kappa_scalar * np.eye(2)),
        beta=_constant_vector(b),
        gamma=_constant_scalar(0.0),
        source=source,
        dirichlet=_zeros,
        exact=exact,
        exact_gradient=exact_gradient,
        params={"kappa": kappa_scalar, "beta": b.tolist()},
    )


# ============================================================================
# Test B: pure advection of a discontinuity
# ============================================================================


def testcase_B() -> ProblemSpec:
    """kappa = 0, beta = (2, 1), gamma = 1, f = 0; u = H(-x + 2y - 1)."""

    def exact(points: np.ndarray, region: Region) -> np.ndarray:
        return np.heaviside(-points[:, 0] + 2.0 * points[:, 1] - 1.0, 0.5)

    def exact_gradient(points: np.ndarray, region: Region) -> np.ndarray:
        return np.zeros((len(points), 2))

    return ProblemSpec(
        name="B",
        kappa=_constant_matrix(np.zeros((2, 2))),
        beta=_constant_vector(np.array([2.0, 1.0])),
        gamma=_constant_scalar(1.0),
        source=_zeros,
        dirichlet=exact,
        exact=exact,
        exact_gradient=exact_gradient,
        region_of=_hyperbolic_everywhere,
    )


# ============================================================================
# Test C: locally degenerate rotation around a hole
# ============================================================================

TEST_C_GAMMA = 1e-6


def _polar(points: np.ndarray, region: Region) -> tuple:
    x, y = points[:, 0], points[:, 1]
    r2 = x * x + y * y
    if np.any(r2 < 1e-28):
        raise DomainError("Test C fields are undefined at the origin")
    theta = np.arctan2(y, x)
    # elliptic half: theta in (0, pi]; hyperbolic half: theta in (pi, 2 pi]
    if region == Region.ELLIPTIC:
        theta = np.where(theta < -0.5 * np.pi, theta + 2.0 * np.pi, theta)
    else:
        theta = np.where(theta < 0.5 * np.pi, theta + 2.0 * np.pi, theta)
    return x, y, r2, theta


def testcase_C() -> ProblemSpec:
    """Diffusion in the upper half, pure rotation in the lower half of [-1,1]^2 minus a disc."""

    def kappa(points: np.ndarray, region: Region) -> np.ndarray:
        value = np.pi if region == Region.ELLIPTIC else 0.0
        return np.broadcast_to(value * np.eye(2), (len(points), 2, 2)).copy()

    def beta(points: np.ndarray, region: Region) -> np.ndarray:
        x, y, r2, _ = _polar(points, region)
        return np.column_stack([-y / r2, x / r2])

    def exact(points: np.ndarray, region: Region) -> np.ndarray:
        _, _, _, theta = _polar(points, region)
        if region == Region.ELLIPTIC:
            return (theta - np.pi) ** 2
        return 3.0 * np.pi * (theta - np.pi)

    def exact_gradient(points: np.ndarray, region: Region) -> np.ndarray:
        x, y, r2, theta = _polar(points, region)
        du = 2.0 * (theta - np.pi) if region == Region.ELLIPTIC else np.full(len(x), 3.0 * np.pi)
        return np.column_stack([-y * du / r2, x * du / r2])

    def source(points: np.ndarray, region: Region) -> np.ndarray:
        _, _, r2, theta = _polar(points, region)
        u = exact(points, region)
        if region == Region.ELLIPTIC:
            return (-2.0 * np.pi + 2.0 * (theta - np.pi)) / r2 + TEST_C_GAMMA * u
        return 3.0 * np.pi / r2 + TEST_C_GAMMA * u

    def region_of(points: np.ndarray) -> np.ndarray:
        return np.where(points[:, 1] > 0, Region.ELLIPTIC, Region.HYPERBOLIC).astype(np.int8)

    return ProblemSpec(
        name="C",
        kappa=kappa,
        beta=beta,
        gamma=_constant_scalar(TEST_C_GAMMA),
        source=source,
        dirichlet=exact,
        exact=exact,
        exact_gradient=exact_gradient,
        region_of=region_of,
        quadrature_boost=2,
        mesh_family="holed",
    )


# ============================================================================
# Polynomial patch tests
# ============================================================================


def testcase_polynomial(
    coeffs: Union[Sequence[Sequence[float]], np.ndarray],
    kappa: Union[float, Sequence[Sequence[float]]] = 1.0,
    beta: Sequence[float] = (0.0, 0.0),
    gamma: float = 1.0,
) -> ProblemSpec:
    """
    Constant-coefficient problem whose exact solution is the polynomial
    u = sum_ij coeffs[i, j] x^i y^j.
    """
    c = np.atleast_2d(np.asarray(coeffs, dtype=float))
    K = np.asarray(kappa, dtype=float)
    if K.ndim == 0:
        K = float(K) * np.eye(2)
    b = np.asarray(beta, dtype=float)
    degenerate = bool(np.all(K == 0.0))

    cx = P.polyder(c, axis=0)
    cy = P.polyder(c, axis=1)
    cxx = P.polyder(c, 2, axis=0)
    cyy = P.polyder(c, 2, axis=1)
    cxy = P.polyder(cx, axis=1)

    def exact(points: np.ndarray, region: Region) -> np.ndarray:
        return P.polyval2d(points[:, 0], points[:, 1], c)

    def exact_gradient(points: np.ndarray, region: Region) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        return np.column_stack([P.polyval2d(x, y, cx), P.polyval2d(x, y, cy)])

    def source(points: np.ndarray, region: Region) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        diffusion = (
            K[0, 0] * P.polyval2d(x, y, cxx)
            + (K[0, 1] + K[1, 0]) * P.polyval2d(x, y, cxy)
            + K[1, 1] * P.polyval2d(x, y, cyy)
        )
        grad = exact_gradient(points, region)
        return -diffusion + grad @ b + gamma * exact(points, region)

    return ProblemSpec(
        name="poly",
        kappa=_constant_matrix(K),
        beta=_constant_vector(b),
        gamma=_constant_scalar(gamma),
        source=source,
        dirichlet=exact,
        exact=exact,
        exact_gradient=exact_gradient,
        region_of=_hyperbolic_everywhere if degenerate else _elliptic_everywhere,
        params={"degree": int(c.shape[0] + c.shape[1] - 2)},
    )


TESTCASES = {"A": testcase_A, "B": testcase_B, "C": testcase_C}


def get_testcase(name: str, **params: Any) -> ProblemSpec:
    """Build a named test case ('A', 'B' or 'C')."""
    try:
        factory = TESTCASES[name.upper()]
    except KeyError:
        raise InvalidArgumentError(f"unknown test case '{name}'") from None
    problem = factory(**params)
    logger.debug(f"Test case {problem.name} with {problem.params}")
    return problem
