"""
HDG-IP Solver - Penalty Stabilization

Handles:
- Method configuration (epsilon, theta per region, alpha0, elliptic scheme)
- Bernoulli function and the Additive / Scharfetter-Gummel amplification functions
- Diffusive penalty tau_kappa, theta-upwind penalty tau_beta, local Peclet number
- Total penalty per (element, face) side and the coercivity margin tau_0
- Weighted trace averages
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Literal, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from hdg_ip.errors import (
    CoefficientError,
    ConfigurationError,
    DegenerateFaceError,
    InvalidArgumentError,
    RegimeError,
)
from hdg_ip.services.mesh import InterfaceTag, Region

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SCHEMES: Dict[str, int] = {"nip": -1, "iip": 0, "sip": 1}

# Below this |s| the Bernoulli function uses its Taylor series
BERNOULLI_SERIES_BREAK = 1e-5

# Relative rounding allowance on the coercivity margin
MARGIN_TOL = 1e-10

# |beta.n| below this fraction of (max |beta.n| + tau_kappa) carries no advection
ADVECTIVE_TOL = 1e-6


class StabilizationConfig(BaseModel):
    """Method parameters of the H-IP family."""

    epsilon: int = Field(default=1, description="-1 (H-NIP), 0 (H-IIP) or +1 (H-SIP)")
    theta: float = Field(default=1.0, description="Upwind amount, > 1/2")
    theta_ell: Optional[float] = Field(default=None, description="theta override on elliptic elements")
    theta_hyp: Optional[float] = Field(default=None, description="theta override on hyperbolic elements")
    alpha0: Optional[float] = Field(default=None, description="Diffusive penalty scale; default eta_0 + 1")
    elliptic_scheme: Literal["add", "sg"] = Field(default="sg", description="Additive or Scharfetter-Gummel")

    @field_validator("epsilon")
    @classmethod
    def check_epsilon(cls, v: int) -> int:
        if v not in (-1, 0, 1):
            raise ValueError("epsilon must be -1, 0 or +1")
        return v

    @field_validator("theta", "theta_ell", "theta_hyp")
    @classmethod
    def check_theta(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not (math.isfinite(v) and v > 0.5):
            raise ValueError("theta must be finite and greater than 1/2")
        return v

    @field_validator("alpha0")
    @classmethod
    def check_alpha0(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not (math.isfinite(v) and v > 0):
            raise ValueError("alpha0 must be positive")
        return v

    @classmethod
    def from_labels(cls, scheme: str, stabilization: str = "sg", **kwargs) -> "StabilizationConfig":
        """Build from CLI labels: scheme nip|iip|sip, stabilization add|sg."""
        if scheme not in SCHEMES:
            raise InvalidArgumentError(f"unknown scheme '{scheme}'")
        return cls(epsilon=SCHEMES[scheme], elliptic_scheme=stabilization, **kwargs)

    @property
    def scheme(self) -> str:
        return {v: k for k, v in SCHEMES.items()}[self.epsilon]

    def theta_for(self, region: Region) -> float:
        override = self.theta_ell if region == Region.ELLIPTIC else self.theta_hyp
        return self.theta if override is None else override

    def resolve_alpha0(self, eta0: int) -> float:
        """alpha0 for a mesh with at most eta0 faces per element."""
        alpha0 = self.alpha0 if self.alpha0 is not None else eta0 + 1.0
        if self.epsilon >= 0 and alpha0 <= eta0:
            raise ConfigurationError(
                f"alpha0 = {alpha0} must exceed eta_0 = {eta0} for {self.scheme}",
                field="alpha0",
            )
        return alpha0


# ============================================================================
# Amplification functions
# ============================================================================


def bernoulli(s: ArrayLike) -> ArrayLike:
    """B(s) = s / (exp(s) - 1), B(0) = 1."""
    arr = np.asarray(s, dtype=float)
    out = np.empty_like(arr)
    small = np.abs(arr) < BERNOULLI_SERIES_BREAK
    t = arr[small]
    out[small] = 1.0 - t / 2.0 + t * t / 12.0
    t = arr[~small]
    with np.errstate(over="ignore"):
        out[~small] = t / np.expm1(t)
    return float(out) if np.ndim(s) == 0 else out


def amp_add(s: ArrayLike) -> ArrayLike:
    """Additive amplification 1 + |s|."""
    return 1.0 + np.abs(s)


def amp_sg(s: ArrayLike) -> ArrayLike:
    """Scharfetter-Gummel amplification B(-|s|)."""
    return bernoulli(-np.abs(s))


AMPLIFICATIONS = {"add": amp_add, "sg": amp_sg}


def amplification_table(
    thetas: Iterable[float] = (0.5, 1.0, 1.5, 2.0),
    s_values: Optional[np.ndarray] = None,
) -> pd.DataFrame:
    """Samples of |A|_add(theta s) and |A|_sg(theta s)."""
    if s_values is None:
        s_values = np.linspace(-10.0, 10.0, 201)
    rows = []
    for theta in thetas:
        ts = theta * np.asarray(s_values, dtype=float)
        rows.append(
            pd.DataFrame({"theta": theta, "s": s_values, "add": amp_add(ts), "sg": amp_sg(ts)})
        )
    return pd.concat(rows, ignore_index=True)


# ============================================================================
# Penalty formulas
# ============================================================================


def diffusive_penalty(kappa_n: ArrayLike, h: float, alpha0: float, ctr2: float) -> ArrayLike:
    """tau_kappa = alpha0 C_tr^2 (n.kappa.n) / h_E."""
    return alpha0 * ctr2 * np.asarray(kappa_n) / h


def advective_penalty(beta_n: ArrayLike, theta: float) -> ArrayLike:
    """tau_beta = theta |beta.n|."""
    return theta * np.abs(beta_n)


def local_peclet(beta_n: ArrayLike, tau_kappa: ArrayLike, theta: float) -> ArrayLike:
    """Oriented Peclet number theta (beta.n) / tau_kappa."""
    tau_kappa = np.asarray(tau_kappa, dtype=float)
    if np.any(tau_kappa <= 0):
        raise RegimeError("Peclet number needs a positive diffusive penalty")
    return theta * np.asarray(beta_n) / tau_kappa


def total_penalty(
    tau_kappa: ArrayLike,
    beta_n: ArrayLike,
    theta: float,
    scheme: str,
    region: Region,
) -> ArrayLike:
    """tau_kappa |A|(Pe) on elliptic sides, theta |beta.n| on hyperbolic sides."""
    if region == Region.HYPERBOLIC:
        return advective_penalty(beta_n, theta)
    amplification = AMPLIFICATIONS[scheme]
    return np.asarray(tau_kappa) * amplification(local_peclet(beta_n, tau_kappa, theta))


class TraceWeights(NamedTuple):
    omega: Tuple[float, float]
    alpha: float
    eta: float


def trace_weights(tau1: float, tau2: float, *, beta_n: float = 0.0) -> TraceWeights:
    """
    Weights of the trace value solving the transmission condition on a face.

    Args:
        tau1, tau2: Total penalties of the two sides, nonnegative.
        beta_n: beta.n_1 measured with the outward normal of side 1. The
            numerical fluxes carry (beta.n) u_i, so the transmission condition
            gives u^ = omega_1 u_1 + omega_2 u_2 with
            omega_1 = (tau_1 + beta_n) / (tau_1 + tau_2) and
            omega_2 = (tau_2 - beta_n) / (tau_1 + tau_2). The default 0 is the
            pure-diffusion or tangential-flow case, the penalty-weighted average.

    Returns:
        omega (summing to 1), alpha = 1 / (tau_1 + tau_2) and
        eta = tau_1 tau_2 / (tau_1 + tau_2).
    """
    if tau1 < 0 or tau2 < 0:
        raise InvalidArgumentError("penalties must be nonnegative")
    total = tau1 + tau2
    if total <= 0:
        raise DegenerateFaceError("both penalties vanish on the face")
    omega = ((tau1 + beta_n) / total, (tau2 - beta_n) / total)
    return TraceWeights(omega=omega, alpha=1.0 / total, eta=tau1 * tau2 / total)


# ============================================================================
# Per-side penalties on a discrete space
# ============================================================================


@dataclass(frozen=True)
class SidePenalty:
    """Pointwise face data of one (element, face) side."""

    kappa_n: np.ndarray
    beta_n: np.ndarray
    tau_kappa: np.ndarray
    tau: np.ndarray

    @property
    def margin(self) -> np.ndarray:
        """tau - tau_kappa + beta.n / 2."""
        return self.tau - self.tau_kappa + 0.5 * self.beta_n


class PenaltyCalculator:
    """Evaluates penalties at the face quadrature points of every side."""

    def __init__(self, space, problem, config: StabilizationConfig):
        self.space = space
        self.problem = problem
        self.config = config
        self.alpha0 = config.resolve_alpha0(space.mesh.eta0)
        self._sides: Dict[Tuple[int, int], SidePenalty] = {}
        self.tau0: Optional[float] = None

    def side(self, e: int, j: int) -> SidePenalty:
        key = (e, j)
        data = self._sides.get(key)
        if data is None:
            data = self._evaluate(e, j)
            self._sides[key] = data
        return data

    def _evaluate(self, e: int, j: int) -> SidePenalty:
        space = self.space
        mesh = space.mesh
        face = space.side(e, j)
        region = Region(int(mesh.regions[e]))
        kappa = self.problem.kappa(face.points, region)
        kappa_n = np.einsum("qi,qij,qj->q", face.normals, kappa, face.normals)
        scale = max(float(np.abs(kappa).max()), 1.0)
        if np.any(kappa_n < -1e-12 * scale):
            raise CoefficientError(f"element {e}, face {face.face}: negative normal diffusivity")
        kappa_n = np.maximum(kappa_n, 0.0)
        beta_n = np.einsum("qi,qi->q", self.problem.beta(face.points, region), face.normals)

        theta = self.config.theta_for(region)
        tau_k = diffusive_penalty(kappa_n, mesh.diameters[e], self.alpha0, space.flux_trace_constant_sq(e))
        if region == Region.ELLIPTIC:
            tau = total_penalty(tau_k, beta_n, theta, self.config.elliptic_scheme, region)
        elif self._is_degenerate_outflow(face.face):
            # I-: the hyperbolic flux is its own upwind value (beta.n) u, the elliptic side sets u^
            tau = np.zeros_like(beta_n)
            tau_k = np.zeros_like(beta_n)
        else:
            tau = advective_penalty(beta_n, theta)
            tau_k = np.zeros_like(tau)
        return SidePenalty(kappa_n=kappa_n, beta_n=beta_n, tau_kappa=tau_k, tau=tau)

    def _is_degenerate_outflow(self, f: int) -> bool:
        tags = self.space.mesh.interface_tags
        return tags is not None and tags[f] == InterfaceTag.I_MINUS

    def tau_kappa(self, e: int, j: int) -> np.ndarray:
        return self.side(e, j).tau_kappa

    def tau_beta(self, e: int, j: int) -> np.ndarray:
        region = Region(int(self.space.mesh.regions[e]))
        return advective_penalty(self.side(e, j).beta_n, self.config.theta_for(region))

    def peclet(self, e: int, j: int) -> np.ndarray:
        region = Region(int(self.space.mesh.regions[e]))
        side = self.side(e, j)
        return local_peclet(side.beta_n, side.tau_kappa, self.config.theta_for(region))

    def tau_total(self, e: int, j: int) -> np.ndarray:
        return self.side(e, j).tau

    def check(self) -> float:
        """
        Compute tau_0 = min of tau - tau_kappa + beta.n/2 over the face points
        that carry advection, |beta.n| > ADVECTIVE_TOL (max |beta.n| + tau_kappa).

        The margin vanishes identically where beta.n = 0, so those points only
        have to keep it nonnegative. Without any advective point tau_0 is inf.
        Raises ConfigurationError if the margin is negative anywhere or tau_0 <= 0.
        """
        mesh = self.space.mesh
        sides = [
            (int(mesh.element_faces[e, j]), self.side(e, j))
            for e in range(mesh.n_elements)
            for j in range(int(mesh.nverts[e]))
        ]
        b_scale = max(float(np.abs(side.beta_n).max()) for _, side in sides)
        scale = max(max(float(side.tau.max()) for _, side in sides), b_scale, 1.0)

        tau0 = np.inf
        tau0_face = -1
        for f, side in sides:
            margin = side.margin
            low = float(margin.min())
            if low < -MARGIN_TOL * scale:
                raise ConfigurationError(
                    f"coercivity margin {low:.3e} is negative on face {f}",
                    field="theta",
                    face=f,
                )
            advective = np.abs(side.beta_n) > ADVECTIVE_TOL * (b_scale + side.tau_kappa)
            if advective.any():
                low = float(margin[advective].min())
                if low < tau0:
                    tau0, tau0_face = low, f

        if not tau0 > 0:
            raise ConfigurationError(
                f"coercivity margin tau_0 = {tau0:.3e} is not positive on face {tau0_face}",
                field="theta",
                face=tau0_face,
            )
        self.tau0 = tau0
        logger.debug(f"Penalty check: alpha0={self.alpha0}, tau_0={tau0:.3e}")
        return tau0
